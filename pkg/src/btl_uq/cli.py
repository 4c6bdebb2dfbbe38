"""Command line entry point: ``btl-uq simulate | fit | validate | experiment``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import BTLError, DatasetFormatError, read_dataset, validate_dataset, write_dataset
from .harness import ConfigError, ExperimentConfig, run_experiment, write_outputs
from .mle import MleOptions, fit_mle
from .sim import SimConfig, resolve_p, simulate
from .spectral import fit_spectral

EXIT_OK, EXIT_CONFIG, EXIT_ESTIMATOR = 0, 2, 3


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(args) -> int:
    try:
        p = resolve_p(args.p, args.n)
        cfg = SimConfig(n=args.n, p=p, L=args.L, kappa=args.kappa, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    draw = simulate(cfg)
    write_dataset(draw.data, args.out, sidecar={
        "n": cfg.n, "p": cfg.p, "L": cfg.L, "kappa": cfg.kappa, "seed": cfg.seed,
    })
    if args.truth_out:
        _emit({"theta_star": draw.theta_star.tolist()}, args.truth_out)
    print(f"wrote {draw.data.n_edges} edges on {cfg.n} items to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        data = read_dataset(args.dataset, n=args.n)
        if args.p is not None:
            data = type(data)(n=data.n, i=data.i, j=data.j, ybar=data.ybar, count=data.count,
                              p=args.p, L=data.L)
    except (OSError, DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.estimator == "mle":
            report = fit_mle(data, MleOptions(grad_tol=args.grad_tol, max_iters=args.max_iters))
        else:
            report = fit_spectral(data, d=args.d)
    except DatasetFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BTLError, np.linalg.LinAlgError) as exc:
        print(f"estimator failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    _emit(report.to_dict(), args.out)
    if not report.converged:
        print(f"estimator failure: {report.message}", file=sys.stderr)
        return EXIT_ESTIMATOR
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        data = read_dataset(args.dataset, n=args.n)
    except (OSError, DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = validate_dataset(data)
    _emit(report.to_dict(), args.out)
    return EXIT_OK if report.ok else EXIT_ESTIMATOR


def cmd_experiment(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        for key in ("seed", "reps", "workers", "output_dir"):
            value = getattr(args, key)
            if value is not None:
                raw[key] = value
        if args.keep_data:
            raw["keep_data"] = True
        cfg = ExperimentConfig.from_dict(raw)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_experiment(cfg)
    out = write_outputs(result)
    for row in result.summary.rows:
        n, p, L, _, est, metric, value = row
        if not metric.startswith("quantile@"):
            print(f"n={n} p={p:.4g} L={L} {est:8s} {metric:22s} {value:.6g}")
    print(f"tables written to {out}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="btl-uq", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic comparison dataset")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", default="polylog:3", help="edge probability or polylog:<exponent>")
    s.add_argument("--L", type=int, default=1)
    s.add_argument("--kappa", type=float, default=2.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="dataset CSV path (sidecar written next to it)")
    s.add_argument("--truth-out", help="write the centered true merits as JSON")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit merits to a dataset CSV")
    f.add_argument("dataset")
    f.add_argument("--estimator", choices=("mle", "spectral"), default="mle")
    f.add_argument("--n", type=int, help="number of items (default: sidecar or max index + 1)")
    f.add_argument("--p", type=float, help="edge probability, sets d = 2np for spectral")
    f.add_argument("--d", type=float, help="spectral normalization override")
    f.add_argument("--grad-tol", type=float, default=1e-10)
    f.add_argument("--max-iters", type=int, default=100)
    f.add_argument("--out", help="report JSON path (default stdout)")
    f.set_defaults(func=cmd_fit)

    v = sub.add_parser("validate", help="report dataset problems and connectivity")
    v.add_argument("dataset")
    v.add_argument("--n", type=int)
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("experiment", help="run a Monte Carlo experiment from a JSON config")
    e.add_argument("--config", required=True)
    e.add_argument("--seed", type=int)
    e.add_argument("--reps", type=int)
    e.add_argument("--workers", type=int)
    e.add_argument("--output-dir", dest="output_dir")
    e.add_argument("--keep-data", action="store_true", help="persist every replication's dataset")
    e.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
