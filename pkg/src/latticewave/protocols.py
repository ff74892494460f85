"""Scenario runners: search, pulsed transfer, continuous sending, switching.

All runners share one evolution engine: per step, optionally inject a source
amplitude into the sender's channel-symmetric state, apply the (possibly
marked) walk, then apply uniform damping.  Mark events take effect for the
transition out of the step they are attached to: an event at step E changes
the configuration used to compute state E+1.

Two readouts are recorded for marked vertices: the vertex probability (sum of
channel intensities at the vertex) and, where perturber references exist, the
squared overlap with the localized state of that vertex.  The ``intensity``
entries of a transfer summary are vertex probabilities normalized by the
perturber's own on-target probability; the ``fidelity`` entries are squared
overlaps.  Both are kept because they estimate the same model amplitudes with
different sensitivities to the perturbers' mutual overlaps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import (
    DENSE_CAP_DEFAULT,
    LatticeError,
    LatticeSpec,
    MarkedSet,
    WaveState,
    _apply_walk,
    check_vertex,
    uniform_state,
    vertex_probabilities,
    vertex_probability,
)
from .spectral import (
    CrossingModel,
    PerturberState,
    crossing_model,
    exact_perturber_state,
    perturber_residual,
    perturber_state,
)

__all__ = [
    "MarkEvent",
    "ScenarioConfig",
    "RunRecord",
    "SwitchProbeResult",
    "run_search",
    "run_transfer",
    "run_continuous",
    "run_switch_probe",
]


@dataclass(frozen=True)
class MarkEvent:
    """A change of the marked set attached to a step of the run."""

    step: int
    action: str                     # "move_mark" | "set_lambda"
    mark_index: int
    vertex: tuple[int, ...] | None = None
    value: float | None = None

    def apply(self, marks: MarkedSet) -> MarkedSet:
        entries = list(marks.entries)
        if not 0 <= self.mark_index < len(entries):
            raise LatticeError(f"event mark_index {self.mark_index} out of range")
        v, lam = entries[self.mark_index]
        if self.action == "move_mark":
            if self.vertex is None:
                raise LatticeError("move_mark event needs a vertex")
            entries[self.mark_index] = (tuple(self.vertex), lam)
        elif self.action == "set_lambda":
            if self.value is None:
                raise LatticeError("set_lambda event needs a value")
            entries[self.mark_index] = (v, float(self.value))
        else:
            raise LatticeError(f"unknown event action {self.action!r}")
        return MarkedSet(tuple(entries))


@dataclass
class ScenarioConfig:
    """Fully resolved description of one run."""

    spec: LatticeSpec
    marks: MarkedSet
    kind: str                                  # search | transfer | continuous | sweep
    steps: int | None = None
    damping: float = 0.0
    source: tuple[int, complex] | None = None  # (mark index, amplitude per step)
    initial: object = "uniform"                # "uniform" | "zero" | ("localized", i) | WaveState
    sender_index: int | None = None
    events: tuple[MarkEvent, ...] = ()
    probes: tuple[tuple[int, ...], ...] = ()   # extra probe vertices
    heatmap_every: int | None = None
    sweep_lambdas: tuple[float, ...] | None = None
    initial_mode: str = "auto"                 # auto | exact | approx
    dense_cap: int = DENSE_CAP_DEFAULT

    def validate(self) -> None:
        self.marks.validate_for(self.spec)
        if self.kind not in ("search", "transfer", "continuous", "sweep"):
            raise LatticeError(f"unknown scenario kind {self.kind!r}")
        if not 0.0 <= self.damping < 1.0:
            raise LatticeError(f"damping {self.damping} outside [0, 1)")
        if self.source is not None:
            idx = self.source[0]
            if not 0 <= idx < self.marks.m_targets:
                raise LatticeError(f"source mark index {idx} out of range")
            if self.damping == 0.0:
                raise LatticeError("a source with zero damping grows without bound")
        for v in self.probes:
            check_vertex(v, self.spec)
        for ev in self.events:
            if ev.vertex is not None:
                check_vertex(ev.vertex, self.spec)
        if self.initial_mode not in ("auto", "exact", "approx"):
            raise LatticeError(f"unknown initial_mode {self.initial_mode!r}")


@dataclass
class RunRecord:
    """Per-step probe series plus run summary."""

    steps: int
    probe_vertices: tuple[tuple[int, ...], ...]
    series: dict[str, np.ndarray]              # "norm", "p_<coords>", "f_<coords>"
    events: list[tuple[int, str]] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    heatmaps: list[tuple[int, np.ndarray]] = field(default_factory=list)
    model: CrossingModel | None = None

    def probe_name(self, vertex) -> str:
        return "p_" + "_".join(str(c) for c in vertex)


def _probe_key(prefix: str, vertex) -> str:
    return prefix + "_".join(str(c) for c in vertex)


def _evolve(
    config: ScenarioConfig,
    state: WaveState,
    steps: int,
    fidelity_refs: dict[tuple[int, ...], WaveState] | None = None,
) -> RunRecord:
    """Shared evolution loop with probe recording."""
    spec = config.spec
    marks = config.marks
    probe_vertices: list[tuple[int, ...]] = []
    for v in marks.vertices:
        probe_vertices.append(v)
    for ev in config.events:
        if ev.vertex is not None and tuple(ev.vertex) not in probe_vertices:
            probe_vertices.append(tuple(ev.vertex))
    for v in config.probes:
        if tuple(v) not in probe_vertices:
            probe_vertices.append(tuple(v))

    events_at: dict[int, list[MarkEvent]] = {}
    for ev in config.events:
        events_at.setdefault(ev.step + 1, []).append(ev)

    source_vertex = None
    source_amp = 0.0
    if config.source is not None:
        source_vertex = marks.vertices[config.source[0]]
        source_amp = complex(config.source[1])
    s2d = np.sqrt(2 * spec.d)
    damp = 1.0 - config.damping

    series: dict[str, list[float]] = {"norm": []}
    for v in probe_vertices:
        series[_probe_key("p_", v)] = []
    if fidelity_refs:
        for v in fidelity_refs:
            series[_probe_key("f_", v)] = []
    heatmaps: list[tuple[int, np.ndarray]] = []
    event_log: list[tuple[int, str]] = []

    def record(t: int) -> None:
        series["norm"].append(state.norm())
        for v in probe_vertices:
            series[_probe_key("p_", v)].append(vertex_probability(state, spec, v))
        if fidelity_refs:
            for v, ref in fidelity_refs.items():
                series[_probe_key("f_", v)].append(abs(ref.overlap(state)) ** 2)
        if config.heatmap_every and t % config.heatmap_every == 0:
            heatmaps.append((t, vertex_probabilities(state, spec)))

    record(0)
    for t in range(1, steps + 1):
        for ev in events_at.get(t, ()):
            marks = ev.apply(marks)
            marks.validate_for(spec)
            event_log.append((ev.step, f"{ev.action} mark {ev.mark_index}"))
        if source_vertex is not None:
            state.data[source_vertex] += source_amp / s2d
        state = WaveState(_apply_walk(state.data, spec, marks), state.norm_policy)
        if config.damping:
            state.data *= damp
        record(t)

    return RunRecord(
        steps=steps,
        probe_vertices=tuple(probe_vertices),
        series={k: np.asarray(v) for k, v in series.items()},
        events=event_log,
        heatmaps=heatmaps,
    )


def _build_perturbers(
    config: ScenarioConfig, vertices
) -> tuple[dict[tuple[int, ...], PerturberState], str]:
    """Perturber reference per vertex, dense-exact when the size allows it."""
    spec = config.spec
    mode = config.initial_mode
    if mode == "auto":
        mode = "exact" if spec.state_dim <= config.dense_cap else "approx"
    if mode == "exact" and spec.state_dim > config.dense_cap:
        raise LatticeError(
            f"exact perturber needs N={spec.state_dim} <= dense cap {config.dense_cap}"
        )
    build = exact_perturber_state if mode == "exact" else perturber_state
    refs = {}
    for v in vertices:
        refs[tuple(v)] = (
            build(spec, v, cap=config.dense_cap) if mode == "exact" else build(spec, v)
        )
    return refs, mode


def _resolved_steps(config: ScenarioConfig, model: CrossingModel) -> int:
    if config.steps is not None:
        if config.steps < 1:
            raise LatticeError("steps must be a positive integer")
        return int(config.steps)
    return model.T_s


def run_search(config: ScenarioConfig) -> RunRecord:
    """Evolve the uniform state under lambda = 1 marks and track marked vertices.

    The summary reports the step of maximum total marked-vertex probability
    and the crossing-model prediction T0 it should match.
    """
    config.validate()
    if config.kind != "search":
        raise LatticeError(f"run_search got kind {config.kind!r}")
    if config.initial != "uniform":
        raise LatticeError("search runs start from the uniform state")
    if config.damping != 0.0 or config.source is not None:
        raise LatticeError("search runs are unitary: no damping, no source")
    if config.marks.m_targets < 1:
        raise LatticeError("search needs at least one marked vertex")
    if any(abs(lam - 1.0) > 1e-9 for lam in config.marks.lambdas):
        raise LatticeError("search requires all marks at lambda = 1")

    model = crossing_model(config.spec, config.marks)
    steps = _resolved_steps(config, model)
    record = _evolve(config, uniform_state(config.spec), steps)
    record.model = model

    total = np.zeros(steps + 1)
    for v in config.marks.vertices:
        total += record.series[_probe_key("p_", v)]
    peak_step = int(np.argmax(total))
    per_mark_peaks = {
        _probe_key("p_", v): int(np.argmax(record.series[_probe_key("p_", v)]))
        for v in config.marks.vertices
    }
    record.series["p_marked_total"] = total
    record.summary = {
        "peak_step": peak_step,
        "peak_total_probability": float(total[peak_step]),
        "per_mark_peak_step": per_mark_peaks,
        "model_T0": model.T0,
        "model_T_s": model.T_s,
        "epsilon": model.epsilon,
        "uniform_baseline": 1.0 / config.spec.site_count,
    }
    return record


def run_transfer(config: ScenarioConfig) -> RunRecord:
    """Pulsed sender-to-receiver transfer starting from a localized state.

    The walk runs for T_s = 2 T0 steps (unless steps is set) from the sender's
    perturber state; the summary reports, for every marked vertex, the squared
    overlap with its perturber state and the normalized vertex intensity.
    """
    config.validate()
    if config.kind not in ("transfer", "sweep"):
        raise LatticeError(f"run_transfer got kind {config.kind!r}")
    if config.marks.m_targets < 2:
        raise LatticeError("transfer needs at least two marked vertices")
    if config.damping != 0.0 or config.source is not None:
        raise LatticeError("transfer runs are unitary: no damping, no source")

    sender = config.sender_index
    if isinstance(config.initial, tuple) and config.initial[0] == "localized":
        sender = int(config.initial[1])
    if sender is None:
        sender = config.marks.m_targets - 1
    if not 0 <= sender < config.marks.m_targets:
        raise LatticeError(f"sender index {sender} out of range")

    model = crossing_model(config.spec, config.marks.with_lambda(1.0))
    steps = _resolved_steps(config, model)
    refs, mode = _build_perturbers(config, config.marks.vertices)
    sender_vertex = config.marks.vertices[sender]
    initial = refs[sender_vertex].vector.copy()

    fid_refs = {v: p.vector for v, p in refs.items()}
    record = _evolve(config, initial, steps, fidelity_refs=fid_refs)
    record.model = model

    m = config.marks.m_targets
    p_self = refs[sender_vertex].self_probability
    fidelity = {}
    intensity = {}
    for v in config.marks.vertices:
        fidelity[_probe_key("f_", v)] = float(record.series[_probe_key("f_", v)][-1])
        intensity[_probe_key("p_", v)] = float(
            record.series[_probe_key("p_", v)][-1] / p_self
        )
    record.summary = {
        "sender_index": sender,
        "sender_vertex": list(sender_vertex),
        "steps": steps,
        "model_T_s": model.T_s,
        "epsilon": model.epsilon,
        "perturber_mode": mode,
        "perturber_self_probability": p_self,
        "fidelity_at_end": fidelity,
        "intensity_at_end": intensity,
        "expected_receiver_intensity": 4.0 / m**2,
        "expected_sender_residual": (1.0 - 2.0 / m) ** 2,
        "eq3_residual": perturber_residual(
            config.spec, perturber_state(config.spec, sender_vertex)
        ),
    }
    return record


def run_continuous(config: ScenarioConfig) -> RunRecord:
    """Continuously driven sender with uniform damping and optional relocation.

    Each step injects the source amplitude into the sender's channel-symmetric
    state, applies the marked walk, and damps all amplitudes by (1 - gamma).
    The damping keeps the driven signal bounded.
    """
    config.validate()
    if config.kind != "continuous":
        raise LatticeError(f"run_continuous got kind {config.kind!r}")
    if config.source is None:
        raise LatticeError("continuous runs need a source")
    if config.damping <= 0.0:
        raise LatticeError("continuous runs need damping > 0 to stay bounded")
    if config.steps is None:
        raise LatticeError("continuous runs need an explicit step count")

    if isinstance(config.initial, WaveState):
        state = config.initial.copy()
        state.norm_policy = "free"
    elif config.initial == "uniform":
        state = uniform_state(config.spec)
        state.norm_policy = "free"
    elif config.initial == "zero":
        state = WaveState(
            np.zeros(config.spec.state_shape, dtype=np.complex128), norm_policy="free"
        )
    else:
        raise LatticeError(
            "continuous runs start from the zero field, the uniform state, or a custom state"
        )

    model = crossing_model(config.spec, config.marks.with_lambda(1.0))
    record = _evolve(config, state, int(config.steps))
    record.model = model

    sat_window = max(5, min(50, config.steps // 5))
    event_step = min((ev.step for ev in config.events), default=config.steps)
    sat_end = min(event_step, config.steps)
    saturation = {}
    for v in record.probe_vertices:
        key = _probe_key("p_", v)
        saturation[key] = float(record.series[key][max(0, sat_end - sat_window): sat_end + 1].mean())
    record.summary = {
        "steps": int(config.steps),
        "model_T_s": model.T_s,
        "epsilon": model.epsilon,
        "saturation_window": sat_window,
        "saturation_before_first_event": saturation,
        "first_event_step": None if event_step == config.steps else event_step,
    }
    return record


@dataclass
class SwitchProbeResult:
    """Transfer fidelity at T_s versus uniform mark detuning."""

    lambdas: np.ndarray
    fidelity: np.ndarray
    receiver_vertex: tuple[int, ...]
    T_s: int
    epsilon: float


def run_switch_probe(config: ScenarioConfig, lambda_values) -> SwitchProbeResult:
    """Sweep a uniform mark parameter across a two-mark transfer setup.

    The sender state, receiver reference, and T_s are those of the resonant
    (lambda = 1) configuration; only the walk's marks are detuned.  Transfer
    survives only near the avoided crossing, so the fidelity peaks at
    lambda = 1 and falls off with detuning.
    """
    config.validate()
    if config.marks.m_targets != 2:
        raise LatticeError("switch probe runs on a two-mark transfer setup")

    sender = config.sender_index
    if isinstance(config.initial, tuple) and config.initial[0] == "localized":
        sender = int(config.initial[1])
    if sender is None:
        sender = config.marks.m_targets - 1
    receiver = 1 - sender

    model = crossing_model(config.spec, config.marks.with_lambda(1.0))
    steps = _resolved_steps(config, model)
    refs, _ = _build_perturbers(config, config.marks.vertices)
    sender_vertex = config.marks.vertices[sender]
    receiver_vertex = config.marks.vertices[receiver]

    lambdas = np.asarray(list(lambda_values), dtype=float)
    fidelity = np.empty_like(lambdas)
    for i, lam in enumerate(lambdas):
        detuned = replace(
            config,
            kind="sweep",
            marks=config.marks.with_lambda(float(lam)),
            steps=steps,
            events=(),
        )
        rec = _evolve(
            detuned,
            refs[sender_vertex].vector.copy(),
            steps,
            fidelity_refs={receiver_vertex: refs[receiver_vertex].vector},
        )
        fidelity[i] = rec.series[_probe_key("f_", receiver_vertex)][-1]
    return SwitchProbeResult(
        lambdas=lambdas,
        fidelity=fidelity,
        receiver_vertex=receiver_vertex,
        T_s=steps,
        epsilon=model.epsilon,
    )
