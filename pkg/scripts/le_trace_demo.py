#!/usr/bin/env python3
"""Train the exponent-aware optimizer next to plain SGD and dump the
per-epoch Lyapunov-exponent and learning-rate traces for plotting.

Writes <out>/<optimizer>/{metrics.csv,le_trace.csv,lr_trace.csv} and prints a
side-by-side summary of the final quarter of each run.
"""
import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from lesgd.harness import ExperimentConfig, SourceConfig, emit_metrics, emit_plot_data, run_training
from lesgd.mlp import ModelSpec


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="le_demo_out")
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--beta", type=float, default=0.1)
    args = ap.parse_args(argv)

    base = ExperimentConfig(
        model=ModelSpec((2, 8, 2)),
        source=SourceConfig(n=200),
        epochs=args.epochs,
        batch_size=25,
        lr=0.1,
        beta=args.beta,
        seed=args.seed,
    )
    out = Path(args.out)
    for name in ("leaware", "sgd"):
        result = run_training(dataclasses.replace(base, optimizer=name))
        run_dir = out / name
        run_dir.mkdir(parents=True, exist_ok=True)
        emit_metrics(result, run_dir / "metrics.csv")
        emit_plot_data(result, run_dir)
        q = len(result.metrics) * 3 // 4
        tail = np.mean([r.le for r in result.metrics[q:]])
        print(f"{name:8s} final lr={result.metrics[-1].lr:.6g} "
              f"tail-mean LE={tail:+.5f} "
              f"final loss={result.metrics[-1].train_loss:.4f}")
    print(f"traces written under {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
