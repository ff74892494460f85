"""Scenario definition files: JSON schema, validation, and resolution.

A scenario file is a JSON document with four sections::

    {
      "lattice":  {"d": 2, "n": 31},
      "marks":    [{"vertex": [15, 15], "lambda": 1.0}, ...],
      "scenario": {"kind": "search" | "transfer" | "continuous" | "sweep",
                   "steps": 90,                  # optional; default 2*T0
                   "damping": 0.01,              # optional; default 0
                   "sender": 0,                  # optional mark index
                   "source": {"mark_index": 0, "amplitude": 1.0},
                   "lambdas": [0.9, 1.0, 1.1],   # sweep kind only
                   "initial_mode": "auto",       # auto | exact | approx
                   "events": [{"step": 200, "action": "move_mark",
                               "mark_index": 1, "vertex": [5, 15]}]},
      "output":   {"probes": [[7, 8]],           # extra probe vertices
                   "heatmap_every": 10,
                   "out_path": "runs/search31"}
    }

Validation reports the offending field path with the expected and received
value.  Unknown keys are errors in strict mode and warnings otherwise.  When
``steps`` is omitted it defaults to the transfer time 2*T0 computed from the
crossing model of the marks at lambda = 1.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass

from .lattice import LatticeError, LatticeSpec, MarkedSet, build_lattice
from .protocols import MarkEvent, ScenarioConfig
from .spectral import crossing_model

__all__ = ["ScenarioError", "ScenarioDoc", "parse_scenario", "parse_scenario_dict", "config_to_dict"]

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """A scenario file failed validation; message carries the field path."""


@dataclass
class ScenarioDoc:
    """Parsed scenario plus its output options and resolved raw form."""

    config: ScenarioConfig
    out_path: str | None
    resolved: dict    # fully resolved dict; re-parses to an equal config


def _fail(path: str, expected: str, got) -> ScenarioError:
    return ScenarioError(f"{path}: expected {expected}, got {got!r}")


def _check_keys(obj: dict, path: str, known: set[str], strict: bool) -> None:
    unknown = sorted(set(obj) - known)
    if not unknown:
        return
    msg = f"{path}: unknown key(s) {', '.join(unknown)} (known: {', '.join(sorted(known))})"
    if strict:
        raise ScenarioError(msg)
    print(f"warning: {msg}", file=sys.stderr)


def _get_int(obj: dict, path: str, key: str, required=True, default=None):
    if key not in obj:
        if required:
            raise _fail(f"{path}.{key}", "an integer", "nothing")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise _fail(f"{path}.{key}", "an integer", val)
    return val


def _get_number(obj: dict, path: str, key: str, default=None):
    if key not in obj:
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise _fail(f"{path}.{key}", "a number", val)
    return float(val)


def _parse_vertex(val, path: str, spec: LatticeSpec) -> tuple[int, ...]:
    if not isinstance(val, list) or len(val) != spec.d:
        raise _fail(path, f"a list of {spec.d} integer coordinates", val)
    coords = []
    for i, c in enumerate(val):
        if isinstance(c, bool) or not isinstance(c, int):
            raise _fail(f"{path}[{i}]", "an integer", c)
        if not 0 <= c < spec.n:
            raise ScenarioError(f"{path}[{i}]: coordinate {c} out of range [0, {spec.n})")
        coords.append(c)
    return tuple(coords)


def parse_scenario(path, strict: bool = False) -> ScenarioDoc:
    """Load and validate a scenario file, resolving all defaults."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    return parse_scenario_dict(raw, strict=strict)


def parse_scenario_dict(raw: dict, strict: bool = False) -> ScenarioDoc:
    """Validate a scenario document given as a dict (see parse_scenario)."""
    if not isinstance(raw, dict):
        raise _fail("document", "a JSON object", raw)
    _check_keys(raw, "document", {"lattice", "marks", "scenario", "output", "schema_version"}, strict)

    lat = raw.get("lattice")
    if not isinstance(lat, dict):
        raise _fail("lattice", "an object with d and n", lat)
    _check_keys(lat, "lattice", {"d", "n"}, strict)
    try:
        spec = build_lattice(_get_int(lat, "lattice", "d"), _get_int(lat, "lattice", "n"))
    except LatticeError as exc:
        raise ScenarioError(f"lattice: {exc}")

    marks_raw = raw.get("marks")
    if not isinstance(marks_raw, list) or not marks_raw:
        raise _fail("marks", "a non-empty list of marks", marks_raw)
    entries = []
    for i, mk in enumerate(marks_raw):
        mpath = f"marks[{i}]"
        if not isinstance(mk, dict):
            raise _fail(mpath, "an object with vertex and lambda", mk)
        _check_keys(mk, mpath, {"vertex", "lambda"}, strict)
        vertex = _parse_vertex(mk.get("vertex"), f"{mpath}.vertex", spec)
        lam = _get_number(mk, mpath, "lambda", default=1.0)
        if not 0.0 <= lam <= 2.0:
            raise ScenarioError(f"{mpath}.lambda: {lam} outside [0, 2]")
        entries.append((vertex, lam))
    try:
        marks = MarkedSet(tuple(entries))
        marks.validate_for(spec)
    except LatticeError as exc:
        raise ScenarioError(f"marks: {exc}")

    sc = raw.get("scenario")
    if not isinstance(sc, dict):
        raise _fail("scenario", "an object with at least a kind", sc)
    _check_keys(
        sc,
        "scenario",
        {"kind", "steps", "damping", "sender", "source", "lambdas", "initial_mode", "events"},
        strict,
    )
    kind = sc.get("kind")
    if kind not in ("search", "transfer", "continuous", "sweep"):
        raise _fail("scenario.kind", "search | transfer | continuous | sweep", kind)
    steps = _get_int(sc, "scenario", "steps", required=False)
    if steps is not None and steps < 1:
        raise ScenarioError(f"scenario.steps: must be >= 1, got {steps}")
    damping = _get_number(sc, "scenario", "damping", default=0.0)
    if not 0.0 <= damping < 1.0:
        raise ScenarioError(f"scenario.damping: {damping} outside [0, 1)")
    sender = _get_int(sc, "scenario", "sender", required=False)
    if sender is not None and not 0 <= sender < marks.m_targets:
        raise ScenarioError(f"scenario.sender: index {sender} out of range [0, {marks.m_targets})")
    initial_mode = sc.get("initial_mode", "auto")
    if initial_mode not in ("auto", "exact", "approx"):
        raise _fail("scenario.initial_mode", "auto | exact | approx", initial_mode)

    source = None
    if "source" in sc and sc["source"] is not None:
        so = sc["source"]
        if not isinstance(so, dict):
            raise _fail("scenario.source", "an object with mark_index and amplitude", so)
        _check_keys(so, "scenario.source", {"mark_index", "amplitude"}, strict)
        sidx = _get_int(so, "scenario.source", "mark_index")
        if not 0 <= sidx < marks.m_targets:
            raise ScenarioError(f"scenario.source.mark_index: {sidx} out of range")
        amp = so.get("amplitude", 1.0)
        if isinstance(amp, list) and len(amp) == 2:
            amp = complex(float(amp[0]), float(amp[1]))
        elif isinstance(amp, (int, float)) and not isinstance(amp, bool):
            amp = complex(float(amp), 0.0)
        else:
            raise _fail("scenario.source.amplitude", "a number or [re, im] pair", amp)
        source = (sidx, amp)

    lambdas = None
    if "lambdas" in sc and sc["lambdas"] is not None:
        lraw = sc["lambdas"]
        if not isinstance(lraw, list) or not lraw:
            raise _fail("scenario.lambdas", "a non-empty list of numbers", lraw)
        lambdas = []
        for i, lv in enumerate(lraw):
            if isinstance(lv, bool) or not isinstance(lv, (int, float)):
                raise _fail(f"scenario.lambdas[{i}]", "a number", lv)
            lambdas.append(float(lv))
        lambdas = tuple(lambdas)
    if kind == "sweep" and lambdas is None:
        raise ScenarioError("scenario.lambdas: required for sweep scenarios")

    events = []
    for i, ev in enumerate(sc.get("events", []) or []):
        epath = f"scenario.events[{i}]"
        if not isinstance(ev, dict):
            raise _fail(epath, "an event object", ev)
        _check_keys(ev, epath, {"step", "action", "mark_index", "vertex", "value"}, strict)
        estep = _get_int(ev, epath, "step")
        if estep < 0:
            raise ScenarioError(f"{epath}.step: must be >= 0, got {estep}")
        action = ev.get("action")
        if action not in ("move_mark", "set_lambda"):
            raise _fail(f"{epath}.action", "move_mark | set_lambda", action)
        midx = _get_int(ev, epath, "mark_index")
        if not 0 <= midx < marks.m_targets:
            raise ScenarioError(f"{epath}.mark_index: {midx} out of range")
        vertex = None
        value = None
        if action == "move_mark":
            vertex = _parse_vertex(ev.get("vertex"), f"{epath}.vertex", spec)
        else:
            value = _get_number(ev, epath, "value")
            if value is None or not 0.0 <= value <= 2.0:
                raise ScenarioError(f"{epath}.value: lambda {value} outside [0, 2]")
        events.append(MarkEvent(step=estep, action=action, mark_index=midx, vertex=vertex, value=value))

    out = raw.get("output", {}) or {}
    if not isinstance(out, dict):
        raise _fail("output", "an object", out)
    _check_keys(out, "output", {"probes", "heatmap_every", "out_path"}, strict)
    probes = []
    for i, pv in enumerate(out.get("probes", []) or []):
        probes.append(_parse_vertex(pv, f"output.probes[{i}]", spec))
    heatmap_every = _get_int(out, "output", "heatmap_every", required=False)
    if heatmap_every is not None and heatmap_every < 1:
        raise ScenarioError(f"output.heatmap_every: must be >= 1, got {heatmap_every}")
    out_path = out.get("out_path")
    if out_path is not None and not isinstance(out_path, str):
        raise _fail("output.out_path", "a string", out_path)

    if steps is None:
        steps = crossing_model(spec, marks.with_lambda(1.0)).T_s

    initial = "uniform"
    if kind in ("transfer", "sweep"):
        initial = ("localized", sender if sender is not None else marks.m_targets - 1)
    elif kind == "continuous":
        initial = "zero"

    config = ScenarioConfig(
        spec=spec,
        marks=marks,
        kind=kind,
        steps=steps,
        damping=damping,
        source=source,
        initial=initial,
        sender_index=sender,
        events=tuple(events),
        probes=tuple(probes),
        heatmap_every=heatmap_every,
        sweep_lambdas=lambdas,
        initial_mode=initial_mode,
    )
    config.validate()
    return ScenarioDoc(config=config, out_path=out_path, resolved=config_to_dict(config, out_path))


def config_to_dict(config: ScenarioConfig, out_path: str | None = None) -> dict:
    """Fully resolved scenario document; parse_scenario_dict on it round-trips."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "lattice": {"d": config.spec.d, "n": config.spec.n},
        "marks": [
            {"vertex": list(v), "lambda": lam} for v, lam in config.marks.entries
        ],
        "scenario": {
            "kind": config.kind,
            **({"steps": config.steps} if config.steps is not None else {}),
            "damping": config.damping,
            "initial_mode": config.initial_mode,
        },
        "output": {"probes": [list(v) for v in config.probes]},
    }
    if config.sender_index is not None:
        doc["scenario"]["sender"] = config.sender_index
    if config.source is not None:
        amp = config.source[1]
        doc["scenario"]["source"] = {
            "mark_index": config.source[0],
            "amplitude": [amp.real, amp.imag],
        }
    if config.sweep_lambdas is not None:
        doc["scenario"]["lambdas"] = list(config.sweep_lambdas)
    if config.events:
        doc["scenario"]["events"] = [
            {
                "step": ev.step,
                "action": ev.action,
                "mark_index": ev.mark_index,
                **({"vertex": list(ev.vertex)} if ev.vertex is not None else {}),
                **({"value": ev.value} if ev.value is not None else {}),
            }
            for ev in config.events
        ]
    if config.heatmap_every is not None:
        doc["output"]["heatmap_every"] = config.heatmap_every
    if out_path is not None:
        doc["output"]["out_path"] = out_path
    return doc
