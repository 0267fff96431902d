"""Adversarial data augmentation by gradient ascent over a small family of
semantic input transformations.

The inner objective trades off prediction loss against a feature-consistency
penalty: J(omega) = mean[loss(transformed) - lam * feature_distance]. The
transformation parameter space is low-dimensional, so ascent uses central
finite differences with backtracking on the step size.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import mlp
from .domains import DomainDataset
from .mlp import Batch, ModelSpec

SCALE_RANGE = (0.1, 10.0)
CONTRAST_RANGE = (0.1, 10.0)
NOISE_MAX = 10.0

FD_STEP = 1e-4
MAX_BACKTRACKS = 5
_AUG_CHUNK = 64  # minibatch size for dataset-level augmentation


@dataclass(frozen=True, eq=False)  # ndarray field breaks generated __eq__
class TransformParams:
    """Parameters of the semantic transformation family.

    rotation (radians, plane rotation of the first two feature dims), uniform
    scale, per-dim shift, additive seeded noise magnitude, and contrast around
    the per-sample mean.
    """

    rotation: float
    scale: float
    shift: np.ndarray
    noise_scale: float
    contrast: float

    def __post_init__(self):
        object.__setattr__(self, "shift", np.asarray(self.shift, dtype=np.float64))
        if not SCALE_RANGE[0] <= self.scale <= SCALE_RANGE[1]:
            raise ValueError(f"scale {self.scale} outside {SCALE_RANGE}")
        if not CONTRAST_RANGE[0] <= self.contrast <= CONTRAST_RANGE[1]:
            raise ValueError(f"contrast {self.contrast} outside {CONTRAST_RANGE}")
        if not 0.0 <= self.noise_scale <= NOISE_MAX:
            raise ValueError(f"noise_scale {self.noise_scale} outside [0, {NOISE_MAX}]")

    @staticmethod
    def identity(dim: int) -> "TransformParams":
        return TransformParams(
            rotation=0.0, scale=1.0, shift=np.zeros(dim), noise_scale=0.0, contrast=1.0
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [[self.rotation, self.scale], self.shift, [self.noise_scale, self.contrast]]
        )

    @staticmethod
    def from_vector(vec: np.ndarray, dim: int) -> "TransformParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (dim + 4,):
            raise ValueError(f"expected vector of length {dim + 4}, got {vec.shape}")
        return TransformParams(
            rotation=float(vec[0]),
            scale=float(vec[1]),
            shift=vec[2:2 + dim].copy(),
            noise_scale=float(vec[2 + dim]),
            contrast=float(vec[3 + dim]),
        )


@dataclass(frozen=True)
class AugConfig:
    lam: float = 1.0  # feature-consistency weight
    ascent_steps: int = 10
    ascent_lr: float = 0.05
    samples_per_input: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0 or self.ascent_steps < 0:
            raise ValueError("lam and ascent_steps must be non-negative")
        if self.ascent_lr <= 0 or self.samples_per_input < 1:
            raise ValueError("need ascent_lr > 0 and samples_per_input >= 1")


def _clamp_vector(vec: np.ndarray, dim: int) -> np.ndarray:
    out = vec.copy()
    out[1] = np.clip(out[1], *SCALE_RANGE)
    out[2 + dim] = np.clip(out[2 + dim], 0.0, NOISE_MAX)
    out[3 + dim] = np.clip(out[3 + dim], *CONTRAST_RANGE)
    return out


def apply_transform(x: np.ndarray, omega: TransformParams, seed: int = 0) -> np.ndarray:
    """Transform a single input or an n x d batch; identity params are a no-op.

    The noise realization depends only on the seed and the input shape, so the
    map is a deterministic, noise_scale-differentiable function of omega.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xs = np.atleast_2d(x).copy()
    d = xs.shape[1]
    if omega.shift.shape != (d,):
        raise ValueError(f"shift has dim {omega.shift.shape}, expected ({d},)")
    if not np.all(np.isfinite(xs)):
        raise ValueError("non-finite input")
    if omega.rotation != 0.0 and d >= 2:
        c, s = np.cos(omega.rotation), np.sin(omega.rotation)
        rot = np.array([[c, -s], [s, c]])
        xs[:, :2] = xs[:, :2] @ rot.T
    xs *= omega.scale
    xs += omega.shift
    if omega.contrast != 1.0:
        mean = xs.mean(axis=1, keepdims=True)
        xs = mean + omega.contrast * (xs - mean)
    if omega.noise_scale != 0.0:
        eps = np.random.default_rng(seed).standard_normal(xs.shape)
        xs = xs + omega.noise_scale * eps
    return xs[0] if single else xs


def feature_distance(
    spec: ModelSpec, params: np.ndarray, x: np.ndarray, x_t: np.ndarray
) -> float:
    """Squared Euclidean distance between penultimate-layer activations."""
    fa = mlp.penultimate_features(spec, params, x)
    fb = mlp.penultimate_features(spec, params, x_t)
    return float(np.sum((fa - fb) ** 2))


def _batch_feature_distances(spec, params, x, x_t):
    fa = mlp.penultimate_features(spec, params, x)
    fb = mlp.penultimate_features(spec, params, x_t)
    return np.sum((fa - fb) ** 2, axis=1)


def inner_objective(
    spec: ModelSpec,
    params: np.ndarray,
    batch: Batch,
    omega: TransformParams,
    lam: float,
    seed: int = 0,
) -> float:
    """Mean transformed-sample loss minus lam * mean feature distance."""
    xt = apply_transform(batch.inputs, omega, seed=seed)
    data_loss = mlp.loss(spec, params, Batch(inputs=xt, labels=batch.labels), 0.0)
    penalty = float(np.mean(_batch_feature_distances(spec, params, batch.inputs, xt)))
    return data_loss - lam * penalty


def adversarial_maximize(
    spec: ModelSpec, params: np.ndarray, batch: Batch, cfg: AugConfig
) -> tuple[TransformParams, Batch]:
    """Inner maximization: ascent on the objective from the identity transform.

    Candidate steps that do not improve the objective trigger step-size
    backtracking (halving up to MAX_BACKTRACKS times, then stop), so accepted
    iterates are monotone in J. Returns the final transform and the
    transformed batch with labels carried over.
    """
    d = batch.inputs.shape[1]
    omega = TransformParams.identity(d)
    vec = omega.to_vector()

    def j_of(v):
        return inner_objective(spec, params, batch, TransformParams.from_vector(v, d),
                               cfg.lam, seed=cfg.seed)

    j_cur = j_of(vec)
    if not np.isfinite(j_cur):
        raise ValueError("inner objective non-finite at the identity transform")
    lr = cfg.ascent_lr
    for _ in range(cfg.ascent_steps):
        g = np.zeros_like(vec)
        for i in range(vec.size):
            probe = np.zeros_like(vec)
            probe[i] = FD_STEP
            g[i] = (j_of(_clamp_vector(vec + probe, d)) - j_of(_clamp_vector(vec - probe, d))) \
                / (2.0 * FD_STEP)
        if not np.all(np.isfinite(g)):
            break  # keep the last finite iterate
        accepted = False
        for _ in range(MAX_BACKTRACKS + 1):
            cand = _clamp_vector(vec + lr * g, d)
            j_cand = j_of(cand)
            if np.isfinite(j_cand) and j_cand >= j_cur:
                vec, j_cur = cand, j_cand
                accepted = True
                break
            lr *= 0.5
        if not accepted:
            break

    omega = TransformParams.from_vector(vec, d)
    xt = apply_transform(batch.inputs, omega, seed=cfg.seed)
    return omega, Batch(inputs=xt, labels=batch.labels)


def augment_dataset(
    spec: ModelSpec, params: np.ndarray, data: DomainDataset, cfg: AugConfig
) -> DomainDataset:
    """Append samples_per_input adversarial copies of every sample.

    Each (minibatch, copy) pair gets its own derived seed, so copies are
    distinct but the whole operation is deterministic in cfg.seed.
    """
    if data.n < 1:
        raise ValueError("empty dataset")
    feats = [data.features]
    labels = [data.labels]
    n_chunks = (data.n + _AUG_CHUNK - 1) // _AUG_CHUNK
    for k in range(cfg.samples_per_input):
        for c in range(n_chunks):
            sl = slice(c * _AUG_CHUNK, min((c + 1) * _AUG_CHUNK, data.n))
            batch = Batch(inputs=data.features[sl], labels=data.labels[sl])
            sub = dataclasses.replace(cfg, seed=cfg.seed + 7919 * k + 104729 * c + 1)
            _, aug_batch = adversarial_maximize(spec, params, batch, sub)
            feats.append(aug_batch.inputs)
            labels.append(aug_batch.labels)
    return DomainDataset(
        features=np.vstack(feats),
        labels=np.concatenate(labels),
        domain=data.domain + "_aug",
        seed=cfg.seed,
    )
