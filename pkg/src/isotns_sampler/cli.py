"""Command-line entry point: ``isotns-sampler {sample,topk,bench,validate}``.

Exit status is 0 on success, 2 when ``validate`` finds a grid that is not a
valid isoTNS and 1 when the requested configuration cannot be run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, harness, isotns
from .streams import ZeroProbabilityError

EXIT_OK, EXIT_INFEASIBLE, EXIT_INVALID = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isotns-sampler", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--state", choices=harness.STATES, default="ghz")
    common.add_argument("--L", type=int, nargs="+", default=[4], help="lattice side length(s)")
    common.add_argument("--chi", type=int, nargs="+", default=[2], help="row-contraction bond cap(s)")
    common.add_argument("--state-chi", type=int, default=4, help="bond dimension of random states")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    s = sub.add_parser("sample", parents=[common], help="empirical-distribution convergence")
    s.add_argument("--n-samples", type=int, nargs="+", default=list(harness.default_schedule()))
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--workers", type=int, default=1)

    t = sub.add_parser("topk", parents=[common], help="greedy top-K accuracy")
    t.add_argument("--k", type=int, help="number of strings (default: 2 for GHZ, L^2 for W, 10 for random)")

    b = sub.add_parser("bench", parents=[common], help="wall-time scaling")
    b.add_argument("--k", type=int, nargs="+", help="time top-K with these K instead of sampling")
    b.add_argument("--n-samples", type=int, default=20, help="samples (or top-K searches) per timed run")
    b.add_argument("--repeats", type=int, default=5)

    v = sub.add_parser("validate", parents=[common], help="check isometry residuals")
    v.add_argument("--grid", type=Path, help="grid JSON file (default: build --state)")
    v.add_argument("--tol", type=float, default=1e-10)
    return p


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _configs(args, mode: str):
    for L in args.L:
        for chi in args.chi:
            kw = dict(state=args.state, L=L, chi=chi, seed=args.seed, mode=mode, state_chi=args.state_chi)
            if mode == "sample":
                kw.update(n_samples=sorted(set(args.n_samples)), n_trials=args.trials, workers=args.workers)
            else:
                kw.update(k=args.k)
            yield harness.ExperimentConfig(**kw, out=str(args.out) if args.out else None)


def _run_records(args, mode: str) -> int:
    runner = harness.run_convergence if mode == "sample" else harness.run_topk
    records = [runner(cfg) for cfg in _configs(args, mode)]
    text = harness.records_to_csv(records) if args.format == "csv" else harness.records_to_json(records) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _run_bench(args) -> int:
    rec = harness.run_bench(
        args.state, args.L, args.chi, args.k or (None,), repeats=args.repeats, n_samples=args.n_samples, seed=args.seed
    )
    if args.format == "csv":
        text = harness.to_csv(rec.columns, rec.rows)
    else:
        text = json.dumps(rec.to_json(), indent=1) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _run_validate(args) -> int:
    if args.grid is not None:
        grid = isotns.IsoTnsGrid.loads(args.grid.read_text())
        name = str(args.grid)
    else:
        cfg = harness.ExperimentConfig(args.state, args.L[0], args.chi[0], args.seed, state_chi=args.state_chi)
        grid = harness.build_state(cfg)
        name = f"{args.state} L={args.L[0]}"
    rep = isotns.validate(grid, args.tol)
    doc = {
        "grid": name,
        "shape": list(grid.shape),
        "max_residual": rep.max_residual,
        "worst_site": list(rep.worst_site()),
        "center_norm": rep.center_norm,
        "tol": args.tol,
        "passed": rep.passed,
    }
    if args.format == "json":
        text = json.dumps(doc) + "\n"
    else:
        flat = {**doc, "shape": "x".join(map(str, grid.shape)), "worst_site": ":".join(map(str, rep.worst_site()))}
        text = harness.to_csv(tuple(flat), [tuple(flat.values())])
    _emit(text, args.out)
    return EXIT_OK if rep.passed else EXIT_INVALID


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _run_validate(args)
        if args.command == "bench":
            return _run_bench(args)
        return _run_records(args, args.command)
    except (ValueError, ZeroProbabilityError, OSError) as exc:
        print(f"isotns-sampler: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
