"""Shared argument handling for the experiment scripts."""

import argparse
from pathlib import Path

from btl_uq.harness import ExperimentConfig, run_experiment, write_outputs

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run_from_config(kind: str, description: str) -> None:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--config", default=str(CONFIGS / f"{kind}.json"))
    parser.add_argument("--reps", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--output-dir")
    args = parser.parse_args()

    cfg = ExperimentConfig.from_json(args.config)
    if args.reps is not None:
        cfg.reps = args.reps
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output_dir:
        cfg.output_dir = args.output_dir
    result = run_experiment(cfg, workers=args.workers)
    out = write_outputs(result)
    for n, p, L, _, est, metric, value in result.summary.rows:
        if not metric.startswith("quantile@"):
            print(f"n={n:5d} p={p:.4f} L={L:3d} {est:9s} {metric:24s} {value:.6g}")
    print(f"wall time {result.wall_time:.1f}s; tables in {out}")
