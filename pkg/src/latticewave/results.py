"""Result bundles: manifest, probe series CSV, heatmap CSVs, spectral report.

Every run writes a ``manifest.json`` (even failed ones), a ``series.csv``
with one row per step, optional ``heatmaps/step_*.csv`` snapshots, and a
``spectral.json`` with the crossing-model quantities.  All floating-point
values are printed with 17 significant digits so they round-trip exactly.

Heatmap layout: n rows by n^(d-1) columns; rows follow axis 0, the remaining
axes are flattened row-major into the columns (for d = 2 the file is the
plain n x n probability grid).
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .protocols import RunRecord, ScenarioConfig

__all__ = ["fmt17", "write_bundle", "write_failure_manifest", "write_table_csv"]


def fmt17(value) -> str:
    """Format a float with 17 significant digits (round-trip exact)."""
    return f"{float(value):.17g}"


def _series_columns(record: RunRecord) -> list[str]:
    names = [k for k in record.series if k != "norm"]
    return ["norm"] + sorted(names)


def write_series_csv(path: Path, record: RunRecord) -> None:
    cols = _series_columns(record)
    with open(path, "w") as fh:
        fh.write(",".join(["step"] + cols) + "\n")
        for t in range(record.steps + 1):
            row = [str(t)] + [fmt17(record.series[c][t]) for c in cols]
            fh.write(",".join(row) + "\n")


def write_heatmaps(out_dir: Path, record: RunRecord, spec) -> list[str]:
    if not record.heatmaps:
        return []
    hm_dir = out_dir / "heatmaps"
    hm_dir.mkdir(exist_ok=True)
    written = []
    for step, flat in record.heatmaps:
        grid = np.asarray(flat).reshape(spec.n, -1)
        name = f"step_{step:06d}.csv"
        with open(hm_dir / name, "w") as fh:
            for row in grid:
                fh.write(",".join(fmt17(x) for x in row) + "\n")
        written.append(f"heatmaps/{name}")
    return written


def write_spectral_json(path: Path, record: RunRecord) -> None:
    model = record.model
    if model is None:
        return
    payload = {
        "epsilon": model.epsilon,
        "delta": model.delta,
        "T0": model.T0,
        "T_s": model.T_s,
        "m_targets": model.m_targets,
        "k_level": model.k_level,
        "model_eigenvalues": [float(v) for v in np.real(model.eigenvalues)],
    }
    if "eq3_residual" in record.summary:
        payload["eq3_residual"] = record.summary["eq3_residual"]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_manifest(
    out_dir: Path,
    resolved: dict,
    status: str,
    wall_time_s: float,
    threads: int = 1,
    seed: int | None = None,
    error: str | None = None,
    files: list[str] | None = None,
) -> None:
    manifest = {
        "schema_version": resolved.get("schema_version", 1),
        "software_version": __version__,
        "status": status,
        "config": resolved,
        "wall_time_s": wall_time_s,
        "threads": threads,
    }
    if seed is not None:
        manifest["seed"] = seed
    if error is not None:
        manifest["error"] = error
    if files is not None:
        manifest["files"] = files
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_bundle(
    out_dir,
    record: RunRecord,
    config: ScenarioConfig,
    resolved: dict,
    wall_time_s: float,
    threads: int = 1,
    seed: int | None = None,
) -> Path:
    """Write the complete result bundle for a finished run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = ["series.csv"]
    write_series_csv(out_dir / "series.csv", record)
    files += write_heatmaps(out_dir, record, config.spec)
    if record.model is not None:
        write_spectral_json(out_dir / "spectral.json", record)
        files.append("spectral.json")
    if record.summary:
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(_jsonable(record.summary), fh, indent=2, sort_keys=True)
            fh.write("\n")
        files.append("summary.json")
    write_manifest(
        out_dir,
        resolved,
        status="ok",
        wall_time_s=wall_time_s,
        threads=threads,
        seed=seed,
        files=files,
    )
    return out_dir


def write_failure_manifest(out_dir, resolved: dict, error: str, wall_time_s: float,
                           threads: int = 1, seed: int | None = None) -> None:
    """Record a failed run; every run leaves a manifest behind."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(
        out_dir, resolved, status="failed", wall_time_s=wall_time_s,
        threads=threads, seed=seed, error=error,
    )


def write_table_csv(path, header: list[str], rows) -> None:
    """Small numeric table with 17-significant-digit values."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) if isinstance(v, (int, str)) else fmt17(v) for v in row) + "\n")
