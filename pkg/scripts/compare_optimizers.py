#!/usr/bin/env python3
"""Run the paired optimizer comparison on the synthetic shift benchmark.

Trains each optimizer over a common set of seeds on the two-moons source,
evaluates on the rotated targets, and prints a mean +- std table. Writes the
raw cells to CSV when --out is given.
"""
import argparse
import sys

from lesgd.augment import AugConfig
from lesgd.harness import ExperimentConfig, SourceConfig, format_comparison, run_comparison
from lesgd.mlp import ModelSpec


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--optimizers", default="leaware,sgd,adam,adamw,rmsprop")
    ap.add_argument("--seeds", type=int, default=10, help="number of seeds (0..n-1)")
    ap.add_argument("--epochs", type=int, default=12)
    ap.add_argument("--n", type=int, default=200, help="source dataset size")
    ap.add_argument("--data-fraction", type=float, default=1.0)
    ap.add_argument("--ascent-steps", type=int, default=3,
                    help="adversarial augmentation steps (0 disables ascent)")
    ap.add_argument("--out", default=None, help="CSV path for the raw cells")
    args = ap.parse_args(argv)

    cfg = ExperimentConfig(
        model=ModelSpec((2, 8, 2)),
        source=SourceConfig(n=args.n),
        epochs=args.epochs,
        batch_size=25,
        lr=0.1,
        data_fraction=args.data_fraction,
        aug=AugConfig(ascent_steps=args.ascent_steps, samples_per_input=1),
    )
    cells = run_comparison(cfg, args.optimizers.split(","), list(range(args.seeds)))
    print(format_comparison(cells))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("optimizer,target,mean,std,n_runs,n_failed\n")
            for c in cells:
                fh.write(f"{c.optimizer},{c.target},{c.mean:.17g},{c.std:.17g},"
                         f"{c.n_runs},{c.n_failed}\n")
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
