"""Experiment orchestration: training loop with exponent tracking, target
evaluation, optimizer comparisons, and metrics emission.

A single master seed expands into labeled sub-seeds (data, init,
perturbation, augmentation, batching, subsample), so changing one knob of an
ablation leaves every other random stream untouched.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import augment, domains, lyapunov, mlp, optim
from .augment import AugConfig
from .domains import DomainDataset
from .mlp import Batch, ModelSpec

OPTIMIZERS = ("leaware", "sgd", "adam", "adamw", "rmsprop")

DIVERGENCE_LOSS = 1e6

# Fixed labeled offsets for per-component seed streams.
_STREAMS = {
    "data": 1,
    "eval_data": 2,
    "init": 3,
    "perturbation": 4,
    "augment": 5,
    "batching": 6,
    "subsample": 7,
}


def stream_seed(master: int, label: str) -> int:
    return master * 1_000_003 + _STREAMS[label]


@dataclass(frozen=True)
class SourceConfig:
    kind: str = "two_moons"  # or "blobs"
    n: int = 200
    noise: float = 0.1
    num_classes: int = 2
    spread: float = 0.3


@dataclass(frozen=True)
class TargetShift:
    tag: str
    rotation_deg: float = 0.0
    scale: float = 1.0
    noise: float = 0.0


def default_targets() -> tuple[TargetShift, ...]:
    """Three targets of monotone difficulty: growing rotation plus noise."""
    return tuple(
        TargetShift(tag=f"rot{deg}", rotation_deg=deg, noise=0.2) for deg in (20, 40, 60)
    )


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec = ModelSpec(layer_sizes=(2, 16, 2))
    optimizer: str = "leaware"
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    beta: float = 0.1
    lr_floor: float = 1e-7
    aug: AugConfig | None = None
    source: SourceConfig = SourceConfig()
    targets: tuple[TargetShift, ...] = field(default_factory=default_targets)
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    data_fraction: float = 1.0
    delta_mag: float = 1e-6  # relative to ||theta_0||
    le_method: str = "two_trajectory"  # or "tangent"
    le_window: int | None = None  # iterations per exponent reading; None = one epoch
    reset_perturbation_per_epoch: bool = False
    verbose: bool = False
    output_dir: str | None = None

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not 0 < self.data_fraction <= 1:
            raise ValueError("data_fraction must be in (0, 1]")
        if self.le_method not in ("two_trajectory", "tangent"):
            raise ValueError(f"unknown le_method {self.le_method!r}")
        if self.lr <= 0 or self.delta_mag <= 0:
            raise ValueError("lr and delta_mag must be positive")


@dataclass(frozen=True)
class MetricsRow:
    epoch: int
    iteration: int
    train_loss: float
    lr: float
    le: float
    delta_le: float
    renorm_count: int
    target_acc: dict[str, float] = field(default_factory=dict)


@dataclass
class RunResult:
    config: ExperimentConfig
    params: np.ndarray
    metrics: list[MetricsRow]
    iter_metrics: list[MetricsRow]
    source_class_counts: dict[int, int]
    diverged: bool = False

    @property
    def target_tags(self) -> list[str]:
        return [t.tag for t in self.config.targets]


def build_source(cfg: ExperimentConfig) -> DomainDataset:
    seed = stream_seed(cfg.seed, "data")
    if cfg.source.kind == "two_moons":
        data = domains.gen_two_moons(cfg.source.n, cfg.source.noise, seed, domain="source")
    elif cfg.source.kind == "blobs":
        data = domains.gen_blobs(
            cfg.source.n, cfg.source.num_classes, cfg.source.spread, seed, domain="source"
        )
    else:
        raise ValueError(f"unknown source kind {cfg.source.kind!r}")
    if cfg.data_fraction < 1.0:
        data = domains.stratified_subsample(
            data, cfg.data_fraction, stream_seed(cfg.seed, "subsample")
        )
    return data


def build_targets(cfg: ExperimentConfig) -> list[DomainDataset]:
    """Targets are shifts of an independently drawn base set (no train leakage)."""
    seed = stream_seed(cfg.seed, "eval_data")
    if cfg.source.kind == "two_moons":
        base = domains.gen_two_moons(cfg.source.n, cfg.source.noise, seed, domain="eval")
    else:
        base = domains.gen_blobs(
            cfg.source.n, cfg.source.num_classes, cfg.source.spread, seed, domain="eval"
        )
    out = []
    for i, t in enumerate(cfg.targets):
        out.append(
            domains.shift_domain(
                base,
                rotation=np.deg2rad(t.rotation_deg),
                scale=t.scale,
                noise=t.noise,
                new_tag=t.tag,
                seed=seed + 13 * (i + 1),
            )
        )
    return out


def evaluate(spec: ModelSpec, params: np.ndarray, data: DomainDataset) -> float:
    """Argmax-prediction accuracy; argmax breaks ties toward the lower index."""
    if data.n < 1:
        raise ValueError("empty dataset")
    logits = mlp.forward(spec, params, Batch(inputs=data.features, labels=data.labels))
    preds = np.argmax(logits, axis=1)
    return float(np.mean(preds == data.labels))


def _make_optimizer(cfg: ExperimentConfig, dim: int):
    if cfg.optimizer == "leaware":
        oc = optim.LeAwareConfig(
            lr0=cfg.lr,
            beta=cfg.beta,
            momentum=cfg.momentum,
            weight_decay=cfg.weight_decay,
            delta_mag=cfg.delta_mag,
            lr_floor=cfg.lr_floor,
        )
        return oc, optim.leaware_init(oc, dim)
    if cfg.optimizer == "sgd":
        oc = optim.SgdConfig(lr=cfg.lr, momentum=cfg.momentum, weight_decay=cfg.weight_decay)
        return oc, optim.sgd_init(oc, dim)
    if cfg.optimizer == "adam":
        oc = optim.AdamConfig(lr=cfg.lr)
        return oc, optim.adam_init(oc, dim)
    if cfg.optimizer == "adamw":
        oc = optim.AdamConfig(lr=cfg.lr, weight_decay=cfg.weight_decay)
        return oc, optim.adam_init(oc, dim)
    oc = optim.RmspropConfig(lr=cfg.lr)
    return oc, optim.rmsprop_init(oc, dim)


class DivergedRun(RuntimeError):
    """Raised when training blows up; carries the partial result."""

    def __init__(self, result: RunResult):
        super().__init__("training diverged")
        self.result = result


def run_training(cfg: ExperimentConfig) -> RunResult:
    """The alternating loop: regenerate adversarial data (when enabled), then
    minibatch updates with perturbation propagation and the windowed exponent
    feedback; one metrics row per epoch."""
    source = build_source(cfg)
    targets = build_targets(cfg)
    counts = domains.class_counts(source)
    spec = cfg.model

    params = mlp.init_params(spec, stream_seed(cfg.seed, "init"))
    dim = params.size
    pert_mag = cfg.delta_mag * max(float(np.linalg.norm(params)), 1e-12)
    pert = lyapunov.init_perturbation(dim, pert_mag, stream_seed(cfg.seed, "perturbation"))
    opt_cfg, opt_state = _make_optimizer(cfg, dim)

    batch_rng = np.random.default_rng(stream_seed(cfg.seed, "batching"))
    result = RunResult(
        config=cfg,
        params=params,
        metrics=[],
        iter_metrics=[],
        source_class_counts=counts,
    )

    # Coupled decay goes through the gradient; AdamW decays inside its step.
    grad_decay = 0.0 if cfg.optimizer == "adamw" else cfg.weight_decay

    iteration = 0
    le_now = None
    prev_epoch_le = None
    for epoch in range(1, cfg.epochs + 1):
        train = source
        if cfg.aug is not None:
            aug_cfg = dataclasses.replace(
                cfg.aug, seed=stream_seed(cfg.seed, "augment") + epoch
            )
            train = augment.augment_dataset(spec, params, source, aug_cfg)
        if cfg.reset_perturbation_per_epoch and epoch > 1:
            pert = lyapunov.init_perturbation(
                dim, pert_mag, stream_seed(cfg.seed, "perturbation") + epoch
            )

        n = train.n
        order = batch_rng.permutation(n)
        n_batches = max(1, n // cfg.batch_size)
        window = cfg.le_window if cfg.le_window is not None else n_batches
        losses = []
        for b in range(n_batches):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            batch = Batch(inputs=train.features[idx], labels=train.labels[idx])
            batch_loss = mlp.loss(spec, params, batch, grad_decay)
            if not np.isfinite(batch_loss) or batch_loss > DIVERGENCE_LOSS:
                result.params = params
                result.diverged = True
                raise DivergedRun(result)
            losses.append(batch_loss)
            g = mlp.grad(spec, params, batch, grad_decay)

            lr_now = opt_state.lr if cfg.optimizer == "leaware" else opt_cfg.lr
            if cfg.le_method == "tangent":
                hv = mlp.hvp(spec, params, batch, pert.delta, grad_decay)
                pert = lyapunov.propagate_tangent(pert, hv, lr_now)
            else:
                _, _, pert = lyapunov.propagate_two_trajectory(
                    params,
                    params + pert.delta,
                    lambda th: mlp.grad(spec, th, batch, grad_decay),
                    lr_now,
                    pert,
                )
            le_now = lyapunov.le_estimate(pert, cfg.le_method).value
            iteration += 1

            if cfg.optimizer == "leaware":
                feed = le_now if iteration % window == 0 else None
                params, opt_state = optim.leaware_step(opt_state, g, params, feed, opt_cfg)
            elif cfg.optimizer == "sgd":
                params, opt_state = optim.sgd_step(opt_state, g, params, opt_cfg)
            elif cfg.optimizer == "adam":
                params, opt_state = optim.adam_step(opt_state, g, params, opt_cfg)
            elif cfg.optimizer == "adamw":
                params, opt_state = optim.adamw_step(opt_state, g, params, opt_cfg)
            else:
                params, opt_state = optim.rmsprop_step(opt_state, g, params, opt_cfg)

            if cfg.verbose:
                result.iter_metrics.append(
                    MetricsRow(
                        epoch=epoch,
                        iteration=iteration,
                        train_loss=batch_loss,
                        lr=lr_now,
                        le=le_now,
                        delta_le=np.nan,
                        renorm_count=pert.renorm_count,
                    )
                )

        accs = {d.domain: evaluate(spec, params, d) for d in targets}
        lr_after = opt_state.lr if cfg.optimizer == "leaware" else opt_cfg.lr
        delta_le = 0.0 if prev_epoch_le is None else le_now - prev_epoch_le
        result.metrics.append(
            MetricsRow(
                epoch=epoch,
                iteration=iteration,
                train_loss=float(np.mean(losses)),
                lr=lr_after,
                le=le_now,
                delta_le=delta_le,
                renorm_count=pert.renorm_count,
                target_acc=accs,
            )
        )
        prev_epoch_le = le_now

    result.params = params
    return result


@dataclass(frozen=True)
class ComparisonCell:
    optimizer: str
    target: str
    mean: float
    std: float
    n_runs: int
    n_failed: int


def run_comparison(
    base_cfg: ExperimentConfig, optimizers: list[str], seeds: list[int]
) -> list[ComparisonCell]:
    """Cross product of optimizers x seeds; final-epoch accuracy mean +- std per
    target. Aborted runs are counted per cell, never silently dropped."""
    if not optimizers or not seeds:
        raise ValueError("optimizers and seeds must be non-empty")
    cells = []
    for opt_name in optimizers:
        per_target: dict[str, list[float]] = {t.tag: [] for t in base_cfg.targets}
        failed = 0
        for seed in sorted(seeds):
            cfg = dataclasses.replace(base_cfg, optimizer=opt_name, seed=seed)
            try:
                result = run_training(cfg)
            except DivergedRun:
                failed += 1
                continue
            for tag, acc in result.metrics[-1].target_acc.items():
                per_target[tag].append(acc)
        for tag, vals in per_target.items():
            arr = np.asarray(vals)
            cells.append(
                ComparisonCell(
                    optimizer=opt_name,
                    target=tag,
                    mean=float(arr.mean()) if arr.size else np.nan,
                    std=float(arr.std()) if arr.size else np.nan,
                    n_runs=arr.size,
                    n_failed=failed,
                )
            )
    return cells


def format_comparison(cells: list[ComparisonCell]) -> str:
    lines = [f"{'optimizer':<10} {'target':<10} {'accuracy':<20} runs failed"]
    for c in cells:
        lines.append(
            f"{c.optimizer:<10} {c.target:<10} "
            f"{100 * c.mean:.2f} +- {100 * c.std:.2f}    {c.n_runs:4d} {c.n_failed:6d}"
        )
    return "\n".join(lines)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def metrics_header(result: RunResult) -> str:
    cols = ["epoch", "iteration", "train_loss", "lr", "le", "delta_le", "renorm_count"]
    cols += [f"acc_{tag}" for tag in result.target_tags]
    return ",".join(cols)


def emit_metrics(result: RunResult, path) -> None:
    """Per-epoch metrics CSV in declared column order."""
    lines = [metrics_header(result)]
    for row in result.metrics:
        fields = [
            str(row.epoch),
            str(row.iteration),
            _fmt(row.train_loss),
            _fmt(row.lr),
            _fmt(row.le),
            _fmt(row.delta_le),
            str(row.renorm_count),
        ]
        fields += [_fmt(row.target_acc.get(tag, np.nan)) for tag in result.target_tags]
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def emit_plot_data(result: RunResult, out_dir) -> None:
    """Per-series CSVs for exponent-vs-epoch and rate-vs-epoch curves."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    le_lines = ["epoch,le"] + [f"{r.epoch},{_fmt(r.le)}" for r in result.metrics]
    lr_lines = ["epoch,lr"] + [f"{r.epoch},{_fmt(r.lr)}" for r in result.metrics]
    (out_dir / "le_trace.csv").write_text("\n".join(le_lines) + "\n", encoding="utf-8")
    (out_dir / "lr_trace.csv").write_text("\n".join(lr_lines) + "\n", encoding="utf-8")
