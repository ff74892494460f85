"""Command-line interface.

Subcommands:

* ``run <scenario.json>`` executes a scenario file and writes a result bundle.
* ``spectrum`` emits the closed-form band table and, optionally, a dense
  eigenphase table over a lambda sweep.
* ``sweep`` runs parameter sweeps: ``--kind lambda`` probes the transfer
  switch, ``--kind n`` tabulates spectral quantities against lattice size.
* ``selftest`` runs the fast oracle and invariant checks.

Common flags: ``--out`` (output directory; the LATTICEWAVE_OUT environment
variable overrides it), ``--threads`` (BLAS/OpenMP thread pins, default 1 for
bit-reproducible output), ``--dense-cap``, ``--strict`` (reject unknown
scenario keys), and ``--seed`` (recorded in the manifest; the algorithms
themselves are deterministic).

Numerical modules are imported only after the thread environment is set, so
``--threads`` takes effect on the linear-algebra backends.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _pin_threads(threads: int) -> None:
    for var in _THREAD_VARS:
        os.environ.setdefault(var, str(threads))


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory (env LATTICEWAVE_OUT overrides)")
    common.add_argument("--threads", type=int, default=1, help="thread count for numeric backends")
    common.add_argument("--dense-cap", type=int, default=8192, help="largest N for dense operators")
    common.add_argument("--seed", type=int, default=None, help="recorded in the manifest (reserved)")
    common.add_argument("--strict", action="store_true", help="reject unknown scenario keys")

    parser = argparse.ArgumentParser(prog="latticewave", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="execute a scenario file")
    p_run.add_argument("scenario", help="path to the scenario JSON file")

    p_spec = sub.add_parser("spectrum", parents=[common], help="band and lambda-sweep tables")
    p_spec.add_argument("--d", type=int, required=True)
    p_spec.add_argument("--n", type=int, required=True)
    p_spec.add_argument("--target", default=None, help="marked vertex as comma-separated coords")
    p_spec.add_argument("--lambda-sweep", default=None, metavar="A:B:STEP",
                        help="sweep the mark parameter, e.g. 0:2:0.02")
    p_spec.add_argument("--window", type=float, default=None,
                        help="phase window around 0 for sweep tables (default 4*epsilon)")

    p_sweep = sub.add_parser("sweep", parents=[common], help="parameter sweeps")
    p_sweep.add_argument("--kind", choices=("lambda", "n"), required=True)
    p_sweep.add_argument("--d", type=int, default=2)
    p_sweep.add_argument("--n", type=int, default=None, help="lattice size (lambda sweep)")
    p_sweep.add_argument("--n-list", default=None, help="comma-separated sizes (n sweep)")
    p_sweep.add_argument("--lambdas", default="0.8:1.2:0.05", metavar="A:B:STEP")
    p_sweep.add_argument("--sender", default=None, help="sender vertex, comma-separated")
    p_sweep.add_argument("--receiver", default=None, help="receiver vertex, comma-separated")

    sub.add_parser("selftest", parents=[common], help="run fast oracle/invariant checks")
    return parser


def _out_dir(args, default: str):
    from pathlib import Path

    env = os.environ.get("LATTICEWAVE_OUT")
    base = env if env else (args.out if args.out else default)
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_range(text: str) -> list[float]:
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise SystemExit(f"error: bad range {text!r}, expected A:B:STEP")
    if step <= 0 or b < a:
        raise SystemExit(f"error: bad range {text!r}")
    count = int(round((b - a) / step))
    return [a + i * step for i in range(count + 1)]


def _parse_vertex_arg(text: str, d: int) -> tuple[int, ...]:
    try:
        coords = tuple(int(c) for c in text.split(","))
    except ValueError:
        raise SystemExit(f"error: bad vertex {text!r}, expected comma-separated integers")
    if len(coords) != d:
        raise SystemExit(f"error: vertex {text!r} needs {d} coordinates")
    return coords


def _cmd_run(args) -> int:
    from .protocols import run_continuous, run_search, run_switch_probe, run_transfer
    from .results import write_bundle, write_failure_manifest, write_table_csv
    from .scenario import ScenarioError, parse_scenario

    t0 = time.time()
    try:
        doc = parse_scenario(args.scenario, strict=args.strict)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    config = doc.config
    config.dense_cap = args.dense_cap
    out_dir = _out_dir(args, doc.out_path or "latticewave-out")
    try:
        if config.kind == "search":
            record = run_search(config)
        elif config.kind == "transfer":
            record = run_transfer(config)
        elif config.kind == "continuous":
            record = run_continuous(config)
        else:
            result = run_switch_probe(config, config.sweep_lambdas)
            write_table_csv(
                out_dir / "switch_probe.csv",
                ["lambda", "fidelity"],
                zip(result.lambdas, result.fidelity),
            )
            record = run_transfer(config)
        write_bundle(out_dir, record, config, doc.resolved, time.time() - t0,
                     threads=args.threads, seed=args.seed)
    except Exception as exc:
        write_failure_manifest(out_dir, doc.resolved, f"{type(exc).__name__}: {exc}",
                               time.time() - t0, threads=args.threads, seed=args.seed)
        print(f"error: run failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out_dir}")
    return 0


def _cmd_spectrum(args) -> int:
    from .lattice import build_lattice
    from .results import write_table_csv
    from .spectral import bloch_eigenphases, lambda_sweep

    spec = build_lattice(args.d, args.n)
    out_dir = _out_dir(args, "latticewave-spectrum")
    modes = bloch_eigenphases(spec)
    write_table_csv(
        out_dir / "bloch_table.csv",
        [f"kappa_{i}" for i in range(spec.d)] + ["branch", "theta"],
        ([*m.kappa, m.branch, m.theta] for m in modes),
    )
    if args.lambda_sweep:
        if spec.state_dim > args.dense_cap:
            print(f"error: N={spec.state_dim} exceeds --dense-cap {args.dense_cap}",
                  file=sys.stderr)
            return 1
        target = (
            _parse_vertex_arg(args.target, spec.d)
            if args.target
            else (spec.n // 2,) * spec.d
        )
        sweep = lambda_sweep(spec, target, _parse_range(args.lambda_sweep),
                             window=args.window, cap=args.dense_cap)
        rows = []
        for lam, phases in zip(sweep.lambdas, sweep.phases):
            for ph in phases:
                rows.append([lam, ph])
        write_table_csv(out_dir / "lambda_sweep.csv", ["lambda", "eigenphase"], rows)
    print(f"wrote {out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    from .lattice import build_lattice, marked_set
    from .protocols import ScenarioConfig, run_switch_probe
    from .results import write_table_csv
    from .spectral import crossing_model, perturber_state

    out_dir = _out_dir(args, "latticewave-sweep")
    if args.kind == "lambda":
        if args.n is None:
            raise SystemExit("error: --kind lambda needs --n")
        spec = build_lattice(args.d, args.n)
        sender = (
            _parse_vertex_arg(args.sender, spec.d) if args.sender else (0,) * spec.d
        )
        receiver = (
            _parse_vertex_arg(args.receiver, spec.d)
            if args.receiver
            else (spec.n // 2,) * spec.d
        )
        config = ScenarioConfig(
            spec=spec,
            marks=marked_set([sender, receiver], 1.0),
            kind="sweep",
            sender_index=0,
            initial=("localized", 0),
            dense_cap=args.dense_cap,
        )
        result = run_switch_probe(config, _parse_range(args.lambdas))
        write_table_csv(
            out_dir / "switch_probe.csv",
            ["lambda", "fidelity"],
            zip(result.lambdas, result.fidelity),
        )
    else:
        if not args.n_list:
            raise SystemExit("error: --kind n needs --n-list")
        sizes = [int(x) for x in args.n_list.split(",")]
        rows = []
        for n in sizes:
            spec = build_lattice(args.d, n)
            model = crossing_model(spec, marked_set([(0,) * spec.d], 1.0))
            pert = perturber_state(spec, (0,) * spec.d)
            rows.append(
                [n, spec.state_dim, abs(pert.overlap_sv), model.epsilon,
                 model.delta, model.T0, model.T_s]
            )
        write_table_csv(
            out_dir / "size_sweep.csv",
            ["n", "N", "overlap_sv", "epsilon", "delta", "T0", "T_s"],
            rows,
        )
    print(f"wrote {out_dir}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _pin_threads(args.threads)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "spectrum":
        return _cmd_spectrum(args)
    if args.command == "sweep":
        return _cmd_sweep(args)
    if args.command == "selftest":
        from .selftest import run_selftest

        return 0 if run_selftest() else 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
