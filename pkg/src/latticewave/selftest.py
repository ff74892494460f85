"""Fast structural self-checks runnable from the CLI.

Each check exercises one implementation invariant at tiny lattice sizes,
comparing the fast stepping path against independently built dense oracles.
The whole suite runs in a few seconds.
"""

from __future__ import annotations

import numpy as np

from .lattice import (
    LatticeSpec,
    MarkedSet,
    WaveState,
    basis_state,
    channel_flat,
    coin_matrix,
    dense_operator,
    state_from_flat,
    step_perturbed,
    step_unperturbed,
    uniform_state,
    vertex_flat,
)
from .spectral import band_theta, dense_eigenphases, perturber_state

__all__ = ["run_selftest", "oracle_dense_walk"]


def oracle_dense_walk(spec: LatticeSpec, marks: MarkedSet | None = None) -> np.ndarray:
    """Dense one-step matrix built from first principles, independent of the fast path.

    Assembles the global coin as a block-diagonal Kronecker product, the
    flip-flop shift as an explicit permutation matrix on (vertex, channel)
    indices, and the mark phases as rank-one corrections on the
    channel-symmetric target states.
    """
    d, n, N = spec.d, spec.n, spec.state_dim
    C = np.kron(np.eye(spec.site_count), coin_matrix(d)).astype(np.complex128)
    S = np.zeros((N, N))
    for vflat in range(spec.site_count):
        coords = []
        rem = vflat
        for _ in range(d):
            rem, c = divmod(rem, n)
            coords.append(c)
        coords = list(reversed(coords))
        for ax in range(d):
            for sign in (+1, -1):
                dest = list(coords)
                dest[ax] = (dest[ax] + sign) % n
                dflat = 0
                for c in dest:
                    dflat = dflat * n + c
                src = vflat * 2 * d + channel_flat(ax, sign, d)
                dst = dflat * 2 * d + channel_flat(ax, -sign, d)
                S[dst, src] = 1.0
    U = S @ C
    if marks is not None:
        R = np.eye(N, dtype=np.complex128)
        for v, lam in marks.entries:
            sv = np.zeros(N, dtype=np.complex128)
            base = vertex_flat(v, spec) * 2 * d
            sv[base: base + 2 * d] = 1.0 / np.sqrt(2 * d)
            R += (np.exp(1j * np.pi * lam) - 1.0) * np.outer(sv, sv.conj())
        U = U @ R
    return U


def _check_coin():
    for d in (1, 2, 3):
        sigma = coin_matrix(d)
        err = np.abs(sigma @ sigma - np.eye(2 * d)).max()
        if err > 1e-14:
            return False, f"coin involution error {err:.2e} at d={d}"
        s = np.full(2 * d, 1 / np.sqrt(2 * d))
        if np.abs(sigma @ s - s).max() > 1e-14:
            return False, f"uniform channel vector not fixed at d={d}"
    return True, "involutive, fixes the symmetric channel vector (d=1..3)"


def _check_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for d, n in ((1, 8), (2, 3), (3, 2)):
        spec = LatticeSpec(d, n)
        marks = MarkedSet((((0,) * d, 1.0), ((1,) + (0,) * (d - 1), 0.5)))
        U = oracle_dense_walk(spec, marks)
        for _ in range(5):
            psi = rng.normal(size=spec.state_dim) + 1j * rng.normal(size=spec.state_dim)
            psi /= np.linalg.norm(psi)
            fast = step_perturbed(state_from_flat(psi, spec), spec, marks).to_flat()
            worst = max(worst, np.abs(U @ psi - fast).max())
        Ufast = dense_operator(spec, marks)
        worst = max(worst, np.abs(U - Ufast).max())
    ok = worst < 1e-12
    return ok, f"fast step vs first-principles dense: max |diff| = {worst:.2e}"


def _check_unitarity():
    spec = LatticeSpec(2, 5)
    marks = MarkedSet((((1, 2), 0.7), ((3, 4), 1.3)))
    rng = np.random.default_rng(3)
    psi = rng.normal(size=spec.state_dim) + 1j * rng.normal(size=spec.state_dim)
    state = state_from_flat(psi / np.linalg.norm(psi), spec)
    for _ in range(200):
        state = step_perturbed(state, spec, marks)
    drift = abs(state.norm() - 1.0)
    return drift < 1e-12, f"norm drift over 200 perturbed steps: {drift:.2e}"


def _check_fixed_point():
    spec = LatticeSpec(2, 6)
    phi0 = uniform_state(spec)
    err = np.abs(step_unperturbed(phi0, spec).data - phi0.data).max()
    return err < 1e-12, f"uniform state fixed to {err:.2e}"


def _check_translation():
    spec = LatticeSpec(2, 5)
    rng = np.random.default_rng(11)
    psi = rng.normal(size=spec.state_shape) + 1j * rng.normal(size=spec.state_shape)
    state = WaveState(psi / np.linalg.norm(psi))
    a = np.roll(step_unperturbed(state, spec).data, (1, 2), axis=(0, 1))
    b = step_unperturbed(WaveState(np.roll(state.data, (1, 2), axis=(0, 1))), spec).data
    ok = np.array_equal(a, b)
    return ok, "stepping commutes with lattice translations exactly"


def _check_mark_phases():
    spec = LatticeSpec(2, 4)
    rng = np.random.default_rng(5)
    psi = rng.normal(size=spec.state_dim) + 1j * rng.normal(size=spec.state_dim)
    state = state_from_flat(psi / np.linalg.norm(psi), spec)
    free = step_unperturbed(state, spec).data
    for lam in (0.0, 2.0):
        marked = step_perturbed(state, spec, MarkedSet((((2, 1), lam),))).data
        if np.abs(marked - free).max() > 1e-14:
            return False, f"lambda={lam} is not a no-op"
    return True, "lambda = 0 and 2 reproduce the unperturbed step"


def _check_eigenphases():
    spec = LatticeSpec(2, 5)
    dense = np.exp(1j * dense_eigenphases(spec))
    targets = []
    for kappa in np.ndindex(spec.grid_shape):
        th = band_theta(kappa, spec.n)
        targets += [np.exp(1j * th), np.exp(-1j * th)]
    pool = dense.tolist()
    worst = 0.0
    for tv in targets:
        dist = [abs(p - tv) for p in pool]
        i = int(np.argmin(dist))
        worst = max(worst, dist[i])
        pool.pop(i)
    ok = worst < 1e-10
    return ok, f"closed-form band eigenvalues found in dense spectrum to {worst:.2e}"


def _check_perturber():
    spec = LatticeSpec(2, 9)
    pert = perturber_state(spec, (4, 4))
    nrm = pert.vector.norm()
    ortho = abs(np.vdot(uniform_state(spec).data, pert.vector.data))
    ok = abs(nrm - 1) < 1e-12 and ortho < 1e-10 and pert.overlap_sv.real > 0
    return ok, f"perturber normalized ({nrm:.12f}), carrier-orthogonal ({ortho:.1e})"


CHECKS = [
    ("coin-involution", _check_coin),
    ("dense-oracle-equivalence", _check_oracle),
    ("unitarity-drift", _check_unitarity),
    ("uniform-fixed-point", _check_fixed_point),
    ("translation-covariance", _check_translation),
    ("mark-phase-noop", _check_mark_phases),
    ("band-eigenphase-formula", _check_eigenphases),
    ("perturber-construction", _check_perturber),
]


def run_selftest(verbose: bool = True) -> bool:
    """Run all checks; print one PASS/FAIL line each; return overall success."""
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return all_ok
