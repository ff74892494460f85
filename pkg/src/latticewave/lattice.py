"""State representation and fast stepping for coined walks on d-dimensional tori.

Conventions used throughout the package:

* A lattice has ``d`` axes with ``n`` sites each (periodic boundaries) and
  ``2d`` direction channels per vertex, so the state space has
  ``N = 2d * n**d`` complex amplitudes.
* Channels are labelled by ``(axis, sign)`` with flat encoding
  ``2*axis + (0 if sign > 0 else 1)``.
* Vertices are ``d``-tuples of integers mod ``n``; their flat encoding is
  row-major (axis 0 slowest).
* A state is stored as a complex array of shape ``(n,)*d + (2d,)`` so that
  a C-order flatten gives the documented flat layout: all channels of a
  vertex contiguous, vertices row-major.
* One walk step applies the Kirchhoff coin at every vertex and then the
  flip-flop shift: the outgoing ``(i, +)`` amplitude at ``x`` becomes the
  incoming ``(i, -)`` amplitude at ``x + e_i``, and vice versa.  Marked
  vertices pick up the phase ``exp(i*pi*lambda)`` on their channel-symmetric
  component before the coin acts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_STATE_DIM = 2**62        # constructor guard against index overflow
DENSE_CAP_DEFAULT = 8192


class LatticeError(ValueError):
    """Invalid lattice geometry, state, or mark configuration."""


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of a d-dimensional periodic lattice with 2d channels per vertex."""

    d: int
    n: int
    a: float = 1.0   # lattice constant, dimensionless units

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise LatticeError(f"lattice dimension d must be an integer >= 1, got {self.d!r}")
        if not isinstance(self.n, int) or self.n < 2:
            raise LatticeError(f"sites per axis n must be an integer >= 2, got {self.n!r}")
        if 2 * self.d * self.n**self.d > MAX_STATE_DIM:
            raise LatticeError(
                f"state dimension 2*{self.d}*{self.n}^{self.d} overflows the addressable size"
            )

    @property
    def channel_count(self) -> int:
        return 2 * self.d

    @property
    def site_count(self) -> int:
        return self.n**self.d

    @property
    def state_dim(self) -> int:
        """Total number of complex amplitudes N = 2d * n^d."""
        return 2 * self.d * self.n**self.d

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def state_shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d + (2 * self.d,)


def build_lattice(d: int, n: int) -> LatticeSpec:
    """Construct a LatticeSpec, rejecting invalid or overflowing geometries."""
    return LatticeSpec(d=d, n=n)


# ---------------------------------------------------------------------------
# channel / vertex indexing
# ---------------------------------------------------------------------------

def channel_flat(axis: int, sign: int, d: int) -> int:
    """Flat channel index: 2*axis for the + direction, 2*axis + 1 for -."""
    if not 0 <= axis < d:
        raise LatticeError(f"channel axis {axis} out of range [0, {d})")
    if sign not in (+1, -1):
        raise LatticeError(f"channel sign must be +1 or -1, got {sign!r}")
    return 2 * axis + (0 if sign > 0 else 1)


def channel_unflat(flat: int, d: int) -> tuple[int, int]:
    """Inverse of channel_flat."""
    if not 0 <= flat < 2 * d:
        raise LatticeError(f"flat channel {flat} out of range [0, {2*d})")
    return flat // 2, +1 if flat % 2 == 0 else -1


def vertex_flat(coords: tuple[int, ...], spec: LatticeSpec) -> int:
    """Row-major flat vertex index (axis 0 slowest)."""
    coords = check_vertex(coords, spec)
    flat = 0
    for c in coords:
        flat = flat * spec.n + c
    return flat


def vertex_unflat(flat: int, spec: LatticeSpec) -> tuple[int, ...]:
    """Inverse of vertex_flat."""
    if not 0 <= flat < spec.site_count:
        raise LatticeError(f"flat vertex {flat} out of range [0, {spec.site_count})")
    coords = []
    for _ in range(spec.d):
        flat, c = divmod(flat, spec.n)
        coords.append(c)
    return tuple(reversed(coords))


def check_vertex(coords, spec: LatticeSpec) -> tuple[int, ...]:
    """Validate a vertex coordinate tuple against the lattice."""
    coords = tuple(int(c) for c in coords)
    if len(coords) != spec.d:
        raise LatticeError(f"vertex {coords} has {len(coords)} coordinates, expected {spec.d}")
    for c in coords:
        if not 0 <= c < spec.n:
            raise LatticeError(f"coordinate {c} out of range [0, {spec.n})")
    return coords


# ---------------------------------------------------------------------------
# marked vertices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkedSet:
    """Ordered marked vertices with per-vertex phase parameters lambda in [0, 2].

    The number of marks is capped at n^d / 2 (= N / 4d) to keep the marked
    set dilute relative to the lattice.
    """

    entries: tuple[tuple[tuple[int, ...], float], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self,
            "entries",
            tuple((tuple(int(c) for c in v), float(lam)) for v, lam in self.entries),
        )
        seen = set()
        for v, lam in self.entries:
            if v in seen:
                raise LatticeError(f"duplicate marked vertex {v}")
            seen.add(v)
            if not 0.0 <= lam <= 2.0:
                raise LatticeError(f"mark parameter lambda={lam} outside [0, 2]")

    @property
    def m_targets(self) -> int:
        return len(self.entries)

    @property
    def vertices(self) -> tuple[tuple[int, ...], ...]:
        return tuple(v for v, _ in self.entries)

    @property
    def lambdas(self) -> tuple[float, ...]:
        return tuple(lam for _, lam in self.entries)

    def validate_for(self, spec: LatticeSpec) -> None:
        for v, _ in self.entries:
            check_vertex(v, spec)
        cap = spec.state_dim // (4 * spec.d)
        if self.m_targets > cap:
            raise LatticeError(
                f"{self.m_targets} marks exceed the dilute-set cap N/(4d) = {cap}"
            )

    def with_lambda(self, value: float) -> "MarkedSet":
        """Same vertices, every lambda replaced by `value`."""
        return MarkedSet(tuple((v, value) for v, _ in self.entries))


def marked_set(vertices, lambdas=1.0) -> MarkedSet:
    """Build a MarkedSet from vertex tuples and a scalar or per-vertex lambda."""
    vertices = [tuple(v) for v in vertices]
    if np.isscalar(lambdas):
        lambdas = [float(lambdas)] * len(vertices)
    if len(lambdas) != len(vertices):
        raise LatticeError("need one lambda per marked vertex")
    return MarkedSet(tuple(zip(vertices, map(float, lambdas))))


# ---------------------------------------------------------------------------
# wave states
# ---------------------------------------------------------------------------

@dataclass
class WaveState:
    """Complex amplitudes on (channel, vertex), shape (n,)*d + (2d,).

    norm_policy "unit" marks states meant to stay normalized under unitary
    evolution; "free" permits damping and source injection.
    """

    data: np.ndarray
    norm_policy: str = "unit"

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.complex128)
        if self.norm_policy not in ("unit", "free"):
            raise LatticeError(f"unknown norm policy {self.norm_policy!r}")
        if self.norm_policy == "unit" and abs(self.norm() - 1.0) > 1e-6:
            raise LatticeError(f"unit-policy state has norm {self.norm():.3e}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def copy(self) -> "WaveState":
        return WaveState(self.data.copy(), self.norm_policy)

    def to_flat(self) -> np.ndarray:
        """Length-N vector in the documented flat layout."""
        return self.data.reshape(-1)

    def overlap(self, other: "WaveState") -> complex:
        return complex(np.vdot(self.data, other.data))


def state_from_flat(vector: np.ndarray, spec: LatticeSpec, norm_policy: str = "unit") -> WaveState:
    vector = np.asarray(vector)
    if vector.size != spec.state_dim:
        raise LatticeError(f"vector has {vector.size} entries, expected N={spec.state_dim}")
    return WaveState(vector.reshape(spec.state_shape), norm_policy)


def uniform_state(spec: LatticeSpec) -> WaveState:
    """The channel- and vertex-uniform state (the walk's symmetric fixed point)."""
    amp = 1.0 / np.sqrt(spec.state_dim)
    return WaveState(np.full(spec.state_shape, amp, dtype=np.complex128))


def basis_state(spec: LatticeSpec, axis: int, sign: int, vertex) -> WaveState:
    """A single (channel, vertex) basis vector."""
    data = np.zeros(spec.state_shape, dtype=np.complex128)
    data[check_vertex(vertex, spec) + (channel_flat(axis, sign, spec.d),)] = 1.0
    return WaveState(data)


def symmetric_vertex_state(spec: LatticeSpec, vertex) -> WaveState:
    """The normalized channel-symmetric state concentrated on one vertex."""
    data = np.zeros(spec.state_shape, dtype=np.complex128)
    data[check_vertex(vertex, spec)] = 1.0 / np.sqrt(2 * spec.d)
    return WaveState(data)


def translate_state(state: WaveState, shift) -> WaveState:
    """Shift a state by a lattice vector (channels unchanged)."""
    shift = tuple(int(s) for s in shift)
    d = state.data.ndim - 1
    if len(shift) != d:
        raise LatticeError(f"shift {shift} has {len(shift)} components, expected {d}")
    return WaveState(np.roll(state.data, shift, axis=tuple(range(d))), state.norm_policy)


# ---------------------------------------------------------------------------
# the walk
# ---------------------------------------------------------------------------

def coin_matrix(d: int) -> np.ndarray:
    """Kirchhoff (Grover) coin on 2d channels: 2|s><s| - 1 with |s> uniform.

    Real, symmetric, unitary, and involutive; the uniform channel vector is
    its only +1 eigenvector direction with eigenvalue +1 multiplicity 1.
    """
    if not isinstance(d, int) or d < 1:
        raise LatticeError(f"coin dimension d must be an integer >= 1, got {d!r}")
    m = 2 * d
    return np.full((m, m), 1.0 / d) - np.eye(m)


def _apply_walk(data: np.ndarray, spec: LatticeSpec, marks: MarkedSet | None) -> np.ndarray:
    """One walk step on an array of shape (n,)*d + (2d,) + optional batch axes.

    Marked-vertex phases, then the coin at every vertex, then the flip-flop
    shift.  O(N) per batch column.
    """
    d = spec.d
    out_of = data.shape[: d + 1]
    if out_of != spec.state_shape:
        raise LatticeError(f"state shape {out_of} does not match lattice {spec.state_shape}")
    ch_ax = d
    if marks is not None and marks.m_targets:
        data = data.copy()
        s2d = np.sqrt(2 * d)
        for v, lam in marks.entries:
            coef = np.exp(1j * np.pi * lam) - 1.0
            if coef != 0.0:
                sym = data[v].sum(axis=0) / s2d
                data[v] += coef * sym / s2d
    total = data.sum(axis=ch_ax, keepdims=True) / d
    coined = total - data
    out = np.empty_like(coined)
    sel: list = [slice(None)] * coined.ndim
    for ax in range(d):
        plus, minus = list(sel), list(sel)
        plus[ch_ax] = 2 * ax
        minus[ch_ax] = 2 * ax + 1
        out[tuple(minus)] = np.roll(coined[tuple(plus)], 1, axis=ax)
        out[tuple(plus)] = np.roll(coined[tuple(minus)], -1, axis=ax)
    return out


def step_unperturbed(state: WaveState, spec: LatticeSpec) -> WaveState:
    """Apply one unperturbed walk step in O(N)."""
    return WaveState(_apply_walk(state.data, spec, None), state.norm_policy)


def step_perturbed(state: WaveState, spec: LatticeSpec, marks: MarkedSet) -> WaveState:
    """Apply one walk step with marked-vertex phase perturbations in O(N + m*d)."""
    marks.validate_for(spec)
    return WaveState(_apply_walk(state.data, spec, marks), state.norm_policy)


def dense_operator(
    spec: LatticeSpec, marks: MarkedSet | None = None, cap: int = DENSE_CAP_DEFAULT
) -> np.ndarray:
    """Explicit N x N matrix of one walk step (test oracle and spectral input)."""
    N = spec.state_dim
    if N > cap:
        raise LatticeError(f"dense operator needs N={N} <= cap={cap}")
    if marks is not None:
        marks.validate_for(spec)
    basis = np.eye(N, dtype=np.complex128).reshape(spec.state_shape + (N,))
    return _apply_walk(basis, spec, marks).reshape(N, N)


def vertex_probabilities(state: WaveState, spec: LatticeSpec) -> np.ndarray:
    """Per-vertex probability p(x) = sum over channels |amplitude|^2, flat row-major."""
    if state.data.shape != spec.state_shape:
        raise LatticeError(
            f"state shape {state.data.shape} does not match lattice {spec.state_shape}"
        )
    return (np.abs(state.data) ** 2).sum(axis=spec.d).reshape(-1)


def vertex_probability(state: WaveState, spec: LatticeSpec, vertex) -> float:
    """Probability at a single vertex."""
    v = check_vertex(vertex, spec)
    return float((np.abs(state.data[v]) ** 2).sum())
