"""Synthetic domain-shift datasets and CSV persistence.

The default suite uses two interleaved half-moons as the source and
rotated/noised copies as unseen target domains; Gaussian blobs provide a
multi-class variant. All generators are pure functions of their arguments
and a seed.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class DomainDataset:
    features: np.ndarray  # n x d
    labels: np.ndarray  # n integer class indices
    domain: str
    seed: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"features must be a non-empty n x d matrix, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite features")
        if y.shape != (x.shape[0],) or y.min() < 0:
            raise ValueError("labels must be non-negative ints, one per sample")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def _balanced_counts(n: int, k: int) -> np.ndarray:
    counts = np.full(k, n // k)
    counts[: n % k] += 1
    return counts


def gen_two_moons(n: int, noise: float, seed: int, domain: str = "moons") -> DomainDataset:
    """Two interleaved half-circles with additive Gaussian noise, balanced classes."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    n0, n1 = _balanced_counts(n, 2)
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    outer = np.column_stack([np.cos(t0), np.sin(t0)])
    inner = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    x = np.vstack([outer, inner])
    if noise > 0:
        x = x + noise * rng.standard_normal(x.shape)
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return DomainDataset(features=x, labels=y, domain=domain, seed=seed)


def gen_blobs(
    n: int, num_classes: int, spread: float, seed: int, domain: str = "blobs"
) -> DomainDataset:
    """Gaussian clusters at seeded angles on a circle of radius 3, balanced."""
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    if n < num_classes:
        raise ValueError("need n >= num_classes")
    if spread <= 0:
        raise ValueError("spread must be positive")
    rng = np.random.default_rng(seed)
    offset = rng.uniform(0.0, 2.0 * np.pi)
    angles = offset + 2.0 * np.pi * np.arange(num_classes) / num_classes
    centers = 3.0 * np.column_stack([np.cos(angles), np.sin(angles)])
    counts = _balanced_counts(n, num_classes)
    xs, ys = [], []
    for c, cnt in enumerate(counts):
        xs.append(centers[c] + spread * rng.standard_normal((cnt, 2)))
        ys.append(np.full(cnt, c, dtype=np.int64))
    return DomainDataset(
        features=np.vstack(xs), labels=np.concatenate(ys), domain=domain, seed=seed
    )


def blob_centers(num_classes: int, seed: int) -> np.ndarray:
    """Centers used by gen_blobs for the same (num_classes, seed)."""
    rng = np.random.default_rng(seed)
    offset = rng.uniform(0.0, 2.0 * np.pi)
    angles = offset + 2.0 * np.pi * np.arange(num_classes) / num_classes
    return 3.0 * np.column_stack([np.cos(angles), np.sin(angles)])


def shift_domain(
    data: DomainDataset,
    rotation: float = 0.0,
    translation=None,
    scale: float = 1.0,
    noise: float = 0.0,
    new_tag: str = "shifted",
    seed: int = 0,
) -> DomainDataset:
    """Affine covariate shift: rotate (first two feature dims), scale, translate,
    add seeded noise. Labels are untouched."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    x = data.features.copy()
    if rotation != 0.0:
        if data.dim < 2:
            raise ValueError("rotation needs at least 2 feature dims")
        c, s = np.cos(rotation), np.sin(rotation)
        rot = np.array([[c, -s], [s, c]])
        x[:, :2] = x[:, :2] @ rot.T
    x *= scale
    if translation is not None:
        t = np.asarray(translation, dtype=np.float64)
        if t.shape != (data.dim,):
            raise ValueError(f"translation has dim {t.shape}, expected ({data.dim},)")
        x += t
    if noise > 0:
        x += noise * np.random.default_rng(seed).standard_normal(x.shape)
    return DomainDataset(features=x, labels=data.labels.copy(), domain=new_tag, seed=seed)


def stratified_subsample(data: DomainDataset, fraction: float, seed: int) -> DomainDataset:
    """Keep floor(fraction * n_class) samples per class, seeded."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1.0:
        return data
    rng = np.random.default_rng(seed)
    keep = []
    for c in np.unique(data.labels):
        idx = np.flatnonzero(data.labels == c)
        take = int(np.floor(fraction * idx.size))
        if take < 1:
            raise ValueError(f"fraction {fraction} leaves class {c} empty")
        keep.append(rng.choice(idx, size=take, replace=False))
    keep = np.sort(np.concatenate(keep))
    return DomainDataset(
        features=data.features[keep], labels=data.labels[keep], domain=data.domain, seed=seed
    )


def class_counts(data: DomainDataset) -> dict[int, int]:
    vals, counts = np.unique(data.labels, return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


def save_csv(data: DomainDataset, path) -> None:
    """Write `f0,...,f{d-1},label,domain` rows with full-precision floats."""
    path = Path(path)
    header = ",".join([f"f{i}" for i in range(data.dim)] + ["label", "domain"])
    lines = [header]
    for row, label in zip(data.features, data.labels):
        feats = ",".join(format(v, ".17g") for v in row)
        lines.append(f"{feats},{label},{data.domain}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_csv(path) -> DomainDataset:
    """Parse a dataset written by save_csv; malformed rows are reported by line."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    cols = lines[0].split(",")
    if len(cols) < 3 or cols[-2] != "label" or cols[-1] != "domain":
        raise ValueError(f"{path}:1: bad header {lines[0]!r}")
    d = len(cols) - 2
    if [f"f{i}" for i in range(d)] != cols[:d]:
        raise ValueError(f"{path}:1: bad feature column names")
    feats, labels, domain = [], [], None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != d + 2:
            raise ValueError(f"{path}:{lineno}: expected {d + 2} fields, got {len(parts)}")
        try:
            feats.append([float(v) for v in parts[:d]])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad feature value ({exc})") from None
        try:
            label = int(parts[d])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad label {parts[d]!r}") from None
        if label < 0:
            raise ValueError(f"{path}:{lineno}: label out of range: {label}")
        labels.append(label)
        if domain is None:
            domain = parts[d + 1]
        elif parts[d + 1] != domain:
            raise ValueError(f"{path}:{lineno}: mixed domain tags {domain!r} / {parts[d+1]!r}")
    if not feats:
        raise ValueError(f"{path}: no data rows")
    return DomainDataset(
        features=np.array(feats), labels=np.array(labels, dtype=np.int64), domain=domain, seed=0
    )
