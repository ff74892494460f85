"""Band structure, localized perturber states, and avoided-crossing models.

The unperturbed walk diagonalizes in the Bloch basis: for each quasi-momentum
label ``kappa`` (a d-tuple of integers mod n) the walk restricts to a 2d x 2d
channel problem whose two dispersive eigenvalues are ``exp(+-i*theta)`` with

    cos(theta) = mean_i cos(2*pi*kappa_i / n).

The remaining 2d - 2 eigenvalues per sector form flat bands at phases 0 and
pi.  A single marked vertex at lambda = 1 creates an exponentially localized
state that crosses the band gap at phase 0, where it hybridizes with the
uniform state through an avoided crossing of gap ``2*epsilon``; ``m`` marked
vertices open a gap ``2*sqrt(m)*epsilon``.  The rotation and transfer times
``T0 = round(pi / (2*epsilon*sqrt(m)))`` and ``T_s = 2*T0`` follow from the
(m+1)-level crossing Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import schur

from .lattice import (
    DENSE_CAP_DEFAULT,
    LatticeError,
    LatticeSpec,
    MarkedSet,
    WaveState,
    check_vertex,
    coin_matrix,
    dense_operator,
    step_perturbed,
    translate_state,
    uniform_state,
)

__all__ = [
    "BlochMode",
    "PerturberState",
    "CouplingEstimate",
    "CrossingModel",
    "DegenerateModeError",
    "bloch_eigenphases",
    "bloch_eigenvector",
    "sector_eigenvalues",
    "perturber_state",
    "exact_perturber_state",
    "perturber_residual",
    "coupling_epsilon",
    "crossing_model",
    "dense_eigenphases",
    "crossing_gap",
    "lambda_sweep",
]


class DegenerateModeError(LatticeError):
    """Bloch polarization is not unique (degenerate +- branches away from kappa=0)."""


@dataclass(frozen=True)
class BlochMode:
    """One dispersive Bloch eigenmode: quasi-momentum, eigenphase, branch sign."""

    kappa: tuple[int, ...]
    theta: float
    branch: int  # +1 or -1; eigenvalue is exp(1j * branch * theta)

    @property
    def eigenvalue(self) -> complex:
        return complex(np.exp(1j * self.branch * self.theta))


def band_theta(kappa, n: int) -> float:
    """Dispersive eigenphase in [0, pi] for quasi-momentum label kappa."""
    kappa = np.asarray(kappa, dtype=float)
    c = float(np.mean(np.cos(2.0 * np.pi * kappa / n)))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def bloch_eigenphases(spec: LatticeSpec) -> list[BlochMode]:
    """All n^d quasi-momentum labels with both dispersive branches.

    Sorted by (kappa, branch) with the + branch first; kappa = 0 carries
    theta = 0 on both branches.
    """
    modes = []
    for kappa in np.ndindex(spec.grid_shape):
        th = band_theta(kappa, spec.n)
        modes.append(BlochMode(kappa=kappa, theta=th, branch=+1))
        modes.append(BlochMode(kappa=kappa, theta=th, branch=-1))
    return modes


def _sector_matrix(spec: LatticeSpec, kappa) -> np.ndarray:
    """Reduced 2d x 2d walk in the Bloch sector: shift phases after the coin."""
    d = spec.d
    sigma = coin_matrix(d).astype(np.complex128)
    q = 2.0 * np.pi * np.asarray(kappa, dtype=float) / spec.n
    swapped = sigma[_swap_index(d), :]
    phases = np.empty(2 * d, dtype=np.complex128)
    phases[0::2] = np.exp(1j * q)
    phases[1::2] = np.exp(-1j * q)
    return phases[:, None] * swapped


def _swap_index(d: int) -> np.ndarray:
    idx = np.arange(2 * d)
    return idx ^ 1  # swaps (i,+) <-> (i,-)


def sector_eigenvalues(spec: LatticeSpec, kappa) -> np.ndarray:
    """All 2d eigenvalues of the reduced sector problem (dispersive + flat)."""
    return np.linalg.eigvals(_sector_matrix(spec, kappa))


def _plane_wave(spec: LatticeSpec, kappa) -> np.ndarray:
    """Normalized position plane wave exp(2*pi*i kappa.x / n) / sqrt(n^d)."""
    grid = np.indices(spec.grid_shape)
    phase = np.tensordot(np.asarray(kappa, dtype=float), grid, axes=1)
    return np.exp(2j * np.pi * phase / spec.n) / np.sqrt(spec.site_count)


def bloch_eigenvector(spec: LatticeSpec, mode: BlochMode) -> WaveState:
    """Normalized eigenvector of the unperturbed walk for a dispersive mode.

    The channel polarization is obtained from the reduced sector eigenproblem
    and gauge-fixed by making its first component of magnitude > 1e-9 real
    positive.  kappa = 0 returns the uniform state for both branches (the
    sector collapses there).  Raises DegenerateModeError when the two
    dispersive branches coincide away from kappa = 0 (possible on even n).
    """
    kappa = check_vertex(mode.kappa, spec)
    if all(k == 0 for k in kappa):
        return uniform_state(spec)
    if abs(np.sin(mode.theta)) < 1e-12:
        raise DegenerateModeError(
            f"dispersive branches degenerate at kappa={kappa}: polarization not unique"
        )
    target = np.exp(1j * mode.branch * mode.theta)
    vals, vecs = np.linalg.eig(_sector_matrix(spec, kappa))
    idx = int(np.argmin(np.abs(vals - target)))
    if abs(vals[idx] - target) > 1e-8:
        raise LatticeError(
            f"sector eigenvalue mismatch at kappa={kappa}: "
            f"expected {target:.6f}, nearest {vals[idx]:.6f}"
        )
    pol = vecs[:, idx]
    pol = pol / np.linalg.norm(pol)
    lead = pol[np.abs(pol) > 1e-9][0]
    pol = pol * (np.conj(lead) / abs(lead))
    data = _plane_wave(spec, kappa)[..., None] * pol
    return WaveState(data)


# ---------------------------------------------------------------------------
# perturber states
# ---------------------------------------------------------------------------

@dataclass
class PerturberState:
    """Localized approximate eigenstate created by a lambda = 1 mark.

    ``overlap_sv`` is the (real positive) overlap with the channel-symmetric
    state at the target vertex.  ``excluded`` lists quasi-momentum labels
    skipped because their dispersive denominator vanished (kappa = 0 is
    always excluded and not listed).
    """

    vector: WaveState
    target: tuple[int, ...]
    overlap_sv: complex
    method: str = "resolvent"
    excluded: tuple[tuple[int, ...], ...] = ()

    @property
    def self_probability(self) -> float:
        """Vertex probability the state concentrates on its own target."""
        d = self.vector.data.ndim - 1
        return float((np.abs(self.vector.data[self.target]) ** 2).sum())


@lru_cache(maxsize=32)
def _perturber_origin(d: int, n: int) -> tuple[np.ndarray, tuple]:
    """Resolvent construction of the localized state for a mark at the origin.

    Sums, over every nonzero quasi-momentum sector, the dispersive-subspace
    solution of (1 - U) w = U |s>; within a sector that is
    (A|s> - |s>) / (2 (1 - cos theta)) with A the phase-twisted channel swap,
    evaluated per channel and inverted to position space with an FFT.
    """
    spec = LatticeSpec(d, n)
    grid = np.indices(spec.grid_shape)
    q = 2.0 * np.pi * grid / n
    denom = 2.0 * (1.0 - np.mean(np.cos(q), axis=0))
    origin = (0,) * d
    denom_safe = denom.copy()
    denom_safe[origin] = 1.0
    excluded = []
    tiny = denom_safe < (1e-12) ** 2 / 2.0   # |1 - e^{i theta}|^2 = 2(1 - cos)
    if tiny.any():
        excluded = [tuple(int(i) for i in idx) for idx in np.argwhere(tiny)]
        denom_safe[tiny] = 1.0
    raw = np.empty(spec.state_shape, dtype=np.complex128)
    for ax in range(d):
        for sign, ch in ((+1, 2 * ax), (-1, 2 * ax + 1)):
            f = (np.exp(1j * sign * q[ax]) - 1.0) / denom_safe
            f[origin] = 0.0
            if excluded:
                f[tiny] = 0.0
            raw[..., ch] = np.fft.ifftn(f)
    raw /= np.sqrt(2 * d)
    nu = -raw / np.linalg.norm(raw)
    ov = nu[origin].sum() / np.sqrt(2 * d)
    nu *= np.conj(ov) / abs(ov)   # gauge: overlap with |s, v> real positive
    nu.setflags(write=False)
    return nu, tuple(excluded)


def perturber_state(spec: LatticeSpec, target) -> PerturberState:
    """Localized state of a single lambda = 1 mark, from the two-branch sum.

    Built once at the origin and translated to the target (the construction
    is translation covariant).  The overall scale is fixed by normalization
    and the global phase by a real positive target overlap.
    """
    target = check_vertex(target, spec)
    nu0, excluded = _perturber_origin(spec.d, spec.n)
    vec = translate_state(WaveState(nu0.copy()), target)
    ov = complex(vec.data[target].sum() / np.sqrt(2 * spec.d))
    return PerturberState(vector=vec, target=target, overlap_sv=ov, excluded=excluded)


@lru_cache(maxsize=4)
def _exact_perturber_origin(d: int, n: int, cap: int) -> np.ndarray:
    """Localized crossing state extracted from the dense spectrum (mark at origin).

    Takes the exact eigenvector at the smallest positive eigenphase of the
    single-mark walk and projects out its uniform-state component.
    """
    spec = LatticeSpec(d, n)
    origin = (0,) * d
    phases, vectors = _dense_schur(spec, MarkedSet(((origin, 1.0),)), cap)
    pos = np.where(phases > 1e-9)[0]
    idx = pos[np.argmin(phases[pos])]
    u = vectors[:, idx].reshape(spec.state_shape)
    phi0 = uniform_state(spec).data
    nu = u - np.vdot(phi0, u) * phi0
    nu /= np.linalg.norm(nu)
    ov = nu[origin].sum()
    nu *= np.conj(ov) / abs(ov)
    nu.setflags(write=False)
    return nu


def exact_perturber_state(
    spec: LatticeSpec, target, cap: int = DENSE_CAP_DEFAULT
) -> PerturberState:
    """Numerically exact localized crossing state (needs N <= cap)."""
    target = check_vertex(target, spec)
    nu0 = _exact_perturber_origin(spec.d, spec.n, cap)
    vec = translate_state(WaveState(nu0.copy()), target)
    ov = complex(vec.data[target].sum() / np.sqrt(2 * spec.d))
    return PerturberState(vector=vec, target=target, overlap_sv=ov, method="dense")


def perturber_residual(spec: LatticeSpec, pert: PerturberState) -> float:
    """Eigenvector residual || U_{lambda=1} nu - nu || of a perturber state."""
    marks = MarkedSet(((pert.target, 1.0),))
    stepped = step_perturbed(pert.vector, spec, marks)
    return float(np.linalg.norm(stepped.data - pert.vector.data))


# ---------------------------------------------------------------------------
# coupling and crossing model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingEstimate:
    """Two estimates of the avoided-crossing coupling; the matrix element is primary."""

    matrix_element: float
    closed_form: float
    rel_diff: float

    @property
    def epsilon(self) -> float:
        return self.matrix_element


def coupling_epsilon(spec: LatticeSpec, pert: PerturberState) -> CouplingEstimate:
    """Coupling between the uniform state and a single-mark perturber state.

    matrix_element: |<nu| U_{lambda=1} |Phi0>| (half the crossing gap).
    closed_form: the small-overlap estimate 2*|<sv|nu>| / sqrt(n^d), with the
    target state taken as the bare channel sum at the marked vertex.
    """
    marks = MarkedSet(((pert.target, 1.0),))
    driven = step_perturbed(uniform_state(spec), spec, marks)
    me = float(abs(np.vdot(pert.vector.data, driven.data)))
    cf = 2.0 * abs(pert.overlap_sv) / np.sqrt(spec.site_count)
    rel = abs(me - cf) / me if me else np.inf
    return CouplingEstimate(matrix_element=me, closed_form=cf, rel_diff=rel)


@dataclass
class CrossingModel:
    """Effective (m+1)-level model of the avoided crossing at lambda = 1."""

    epsilon: float
    delta: float
    T0: int
    T_s: int
    m_targets: int
    k_level: int = 0   # phase sector bookkeeping; the sector phase is 1
    hamiltonian: np.ndarray = field(repr=False, default=None)
    eigenvalues: np.ndarray = field(repr=False, default=None)
    eigenvectors: np.ndarray = field(repr=False, default=None)


def crossing_model(spec: LatticeSpec, marks: MarkedSet) -> CrossingModel:
    """Assemble the crossing model for a set of lambda = 1 marks.

    The coupling is computed from a single-target perturber (all targets are
    equivalent by translation symmetry); the model Hamiltonian couples the
    uniform state to each localized state with strength epsilon.
    """
    marks.validate_for(spec)
    m = marks.m_targets
    if m < 1:
        raise LatticeError("crossing model needs at least one marked vertex")
    if any(abs(lam - 1.0) > 1e-9 for lam in marks.lambdas):
        raise LatticeError("crossing model requires all marks at lambda = 1")
    pert = perturber_state(spec, marks.vertices[0])
    eps = coupling_epsilon(spec, pert).epsilon
    H = np.zeros((m + 1, m + 1), dtype=np.complex128)
    H[0, 1:] = -1j * eps
    H[1:, 0] = 1j * eps
    vals, vecs = np.linalg.eigh(H)
    T0 = int(round(np.pi / (2.0 * eps * np.sqrt(m))))
    return CrossingModel(
        epsilon=eps,
        delta=2.0 * np.sqrt(m) * eps,
        T0=T0,
        T_s=2 * T0,
        m_targets=m,
        hamiltonian=H,
        eigenvalues=vals,
        eigenvectors=vecs,
    )


# ---------------------------------------------------------------------------
# dense spectra
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _dense_schur(
    spec: LatticeSpec, marks: MarkedSet | None, cap: int
) -> tuple[np.ndarray, np.ndarray]:
    """Schur decomposition of the dense walk; returns (eigenphases, eigenvectors).

    The walk is normal, so the complex Schur form is diagonal and the Schur
    vectors are eigenvectors.
    """
    U = dense_operator(spec, marks, cap=cap)
    T, Q = schur(U, output="complex")
    offdiag = T - np.diag(np.diag(T))
    if np.abs(offdiag).max() > 1e-8:
        raise LatticeError("dense walk Schur form is unexpectedly non-diagonal")
    phases = np.angle(np.diag(T))
    phases.setflags(write=False)
    Q.setflags(write=False)
    return phases, Q


def dense_eigenphases(
    spec: LatticeSpec, marks: MarkedSet | None = None, cap: int = DENSE_CAP_DEFAULT
) -> np.ndarray:
    """Sorted eigenphases of the dense walk in (-pi, pi]."""
    phases, _ = _dense_schur(spec, marks, cap)
    return np.sort(phases.copy())


def crossing_gap(
    spec: LatticeSpec,
    marks: MarkedSet,
    floor: float = 1e-9,
    cap: int = DENSE_CAP_DEFAULT,
) -> tuple[float, float, float]:
    """Measured crossing gap: distance between the eigenphases bracketing 0.

    Phases with |phase| <= floor are treated as exact zeros (flat band and,
    for several marks, the nearly dark combinations) and skipped.  Returns
    (gap, positive phase, negative phase).
    """
    phases = dense_eigenphases(spec, marks, cap=cap)
    pos = phases[phases > floor]
    neg = phases[phases < -floor]
    if not len(pos) or not len(neg):
        raise LatticeError("no nonzero eigenphases bracket the crossing")
    return float(pos.min() - neg.max()), float(pos.min()), float(neg.max())


@dataclass
class LambdaSweep:
    """Eigenphases near phase 0 as a function of the mark parameter."""

    lambdas: np.ndarray
    phases: list[np.ndarray]   # per lambda, sorted phases within the window
    window: float
    epsilon: float


def lambda_sweep(
    spec: LatticeSpec,
    target,
    lambdas,
    window: float | None = None,
    cap: int = DENSE_CAP_DEFAULT,
) -> LambdaSweep:
    """Dense eigenphases within a window around phase 0 for each lambda.

    The default window is 4x the single-mark coupling, wide enough to show
    the localized level crossing the phase-0 axis at lambda = 1.
    """
    target = check_vertex(target, spec)
    eps = coupling_epsilon(spec, perturber_state(spec, target)).epsilon
    if window is None:
        window = 4.0 * eps
    lambdas = np.asarray(list(lambdas), dtype=float)
    rows = []
    for lam in lambdas:
        marks = MarkedSet(((target, float(lam)),))
        U = dense_operator(spec, marks, cap=cap)
        T, _ = schur(U, output="complex")
        ph = np.angle(np.diag(T))
        rows.append(np.sort(ph[np.abs(ph) <= window]))
    return LambdaSweep(lambdas=lambdas, phases=rows, window=float(window), epsilon=eps)
