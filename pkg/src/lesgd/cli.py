"""Command-line entry points: gen-data, train, compare, le-map.

Configs are JSON files mirroring ExperimentConfig (see config_from_dict for
the schema and defaults). Exit status: 0 success, 1 invalid config,
2 diverged run.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import domains, harness, lyapunov
from .augment import AugConfig
from .harness import (
    DivergedRun,
    ExperimentConfig,
    SourceConfig,
    TargetShift,
    default_targets,
)
from .mlp import ModelSpec

EXIT_OK = 0
EXIT_BAD_CONFIG = 1
EXIT_DIVERGED = 2


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a plain dict (parsed JSON).

    Recognized keys (all optional, defaults in parentheses):
      model: {layer_sizes: [2,16,2], activation: "tanh", output: "softmax_xent"}
      optimizer ("leaware"), lr (0.1), momentum (0.9), weight_decay (5e-4),
      beta (0.1), lr_floor (1e-7)
      aug: null or {lam: 1.0, ascent_steps: 10, ascent_lr: 0.05,
                    samples_per_input: 1}
      source: {kind: "two_moons", n: 200, noise: 0.1, num_classes: 2,
               spread: 0.3}
      targets: [{tag, rotation_deg, scale, noise}, ...] (3 rotated/noised)
      epochs (10), batch_size (32), seed (0), data_fraction (1.0),
      delta_mag (1e-6), le_method ("two_trajectory"), le_window (null = epoch),
      reset_perturbation_per_epoch (false), verbose (false)
    """
    raw = dict(raw)
    kwargs = {}
    if "model" in raw:
        m = raw.pop("model")
        kwargs["model"] = ModelSpec(
            layer_sizes=tuple(m["layer_sizes"]),
            activation=m.get("activation", "tanh"),
            output=m.get("output", "softmax_xent"),
        )
    if "aug" in raw:
        a = raw.pop("aug")
        kwargs["aug"] = None if a is None else AugConfig(**a)
    if "source" in raw:
        kwargs["source"] = SourceConfig(**raw.pop("source"))
    if "targets" in raw:
        kwargs["targets"] = tuple(TargetShift(**t) for t in raw.pop("targets"))
    passthrough = (
        "optimizer", "lr", "momentum", "weight_decay", "beta", "lr_floor",
        "epochs", "batch_size", "seed", "data_fraction", "delta_mag",
        "le_method", "le_window", "reset_perturbation_per_epoch", "verbose",
        "output_dir",
    )
    for key in passthrough:
        if key in raw:
            kwargs[key] = raw.pop(key)
    if raw:
        raise ValueError(f"unknown config keys: {sorted(raw)}")
    return ExperimentConfig(**kwargs)


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "optimizer", None) is not None:
        updates["optimizer"] = args.optimizer
    if getattr(args, "data_fraction", None) is not None:
        updates["data_fraction"] = args.data_fraction
    if getattr(args, "verbose", False):
        updates["verbose"] = True
    if getattr(args, "reset_perturbation_per_epoch", False):
        updates["reset_perturbation_per_epoch"] = True
    return dataclasses.replace(cfg, **updates) if updates else cfg


def cmd_gen_data(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    source = harness.build_source(cfg)
    domains.save_csv(source, out / "source.csv")
    for target in harness.build_targets(cfg):
        domains.save_csv(target, out / f"target_{target.domain}.csv")
    print(f"wrote source + {len(cfg.targets)} targets to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = harness.run_training(cfg)
    except DivergedRun as exc:
        harness.emit_metrics(exc.result, out / "metrics.csv")
        print("run diverged; partial metrics flushed", file=sys.stderr)
        return EXIT_DIVERGED
    harness.emit_metrics(result, out / "metrics.csv")
    harness.emit_plot_data(result, out)
    np.save(out / "params.npy", result.params)
    counts = ",".join(f"{c}:{n}" for c, n in sorted(result.source_class_counts.items()))
    print(f"source class counts {counts}")
    final = result.metrics[-1]
    accs = " ".join(f"{tag}={acc:.4f}" for tag, acc in final.target_acc.items())
    print(f"final epoch {final.epoch}: loss={final.train_loss:.6f} lr={final.lr:.3e} "
          f"le={final.le:.5f} {accs}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    optimizers = args.optimizers.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    cells = harness.run_comparison(cfg, optimizers, seeds)
    table = harness.format_comparison(cells)
    print(table)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        lines = ["optimizer,target,mean,std,n_runs,n_failed"]
        for c in cells:
            lines.append(
                f"{c.optimizer},{c.target},{c.mean:.17g},{c.std:.17g},{c.n_runs},{c.n_failed}"
            )
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_le_map(args) -> int:
    est = lyapunov.map_le(args.map, args.param, args.x0, args.steps)
    print(f"{args.map}({args.param}) x0={args.x0} steps={est.steps}: le={est.value:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lesgd")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (see config_from_dict)")
        p.add_argument("--seed", type=int)
        p.add_argument("--optimizer", choices=harness.OPTIMIZERS)
        p.add_argument("--data-fraction", type=float, dest="data_fraction")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("gen-data", help="write the synthetic domain suite as CSV")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run one training experiment")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--reset-perturbation-per-epoch", action="store_true",
                   dest="reset_perturbation_per_epoch")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="optimizer comparison over seeds")
    common(p)
    p.add_argument("--optimizers", default="leaware,sgd,adam,adamw,rmsprop")
    p.add_argument("--seeds", default="0,1,2,3,4,5,6,7,8,9")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("le-map", help="1-D chaotic-map exponent validation")
    p.add_argument("--map", choices=("logistic", "tent", "linear"), required=True)
    p.add_argument("--param", type=float, required=True)
    p.add_argument("--x0", type=float, default=0.3)
    p.add_argument("--steps", type=int, default=100_000)
    p.set_defaults(func=cmd_le_map)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
