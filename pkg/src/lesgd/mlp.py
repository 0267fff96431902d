"""Minimal MLP differentiation engine over flat parameter vectors.

Forward pass, regularized loss, exact reverse-mode gradient, and
finite-difference Hessian-vector products. Parameters live in a single
flat float64 vector so the training update can be treated as a map on
one state vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("tanh", "relu")
OUTPUTS = ("softmax_xent", "mse")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description: layer sizes plus activation / output heads."""

    layer_sizes: tuple[int, ...]
    activation: str = "tanh"
    output: str = "softmax_xent"

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output layer sizes")
        if any(int(s) < 1 for s in self.layer_sizes):
            raise ValueError(f"layer sizes must be >= 1, got {self.layer_sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output not in OUTPUTS:
            raise ValueError(f"unknown output {self.output!r}")
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class Batch:
    """A minibatch: inputs n x d, integer class labels (or n x k targets for MSE)."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"inputs must be a non-empty n x d matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite inputs")
        object.__setattr__(self, "inputs", x)
        y = np.asarray(self.labels)
        if y.shape[0] != x.shape[0]:
            raise ValueError(f"labels length {y.shape[0]} != batch size {x.shape[0]}")
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]


def parameter_count(spec: ModelSpec) -> int:
    """Total parameters: (fan_in + 1) * fan_out per layer (weights + bias)."""
    sizes = spec.layer_sizes
    return sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1))


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Seeded Glorot-uniform weights (range +-sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed)
    chunks = []
    sizes = spec.layer_sizes
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def unpack(spec: ModelSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the flat vector into per-layer (W, b) views, W of shape (fan_in, fan_out)."""
    params = _check_params(spec, params)
    layers = []
    off = 0
    sizes = spec.layer_sizes
    for i in range(len(sizes) - 1):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        w = params[off:off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = params[off:off + fan_out]
        off += fan_out
        layers.append((w, b))
    return layers


def _check_params(spec: ModelSpec, params: np.ndarray) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.shape[0] != parameter_count(spec):
        raise ValueError(
            f"parameter vector has dim {params.shape}, expected ({parameter_count(spec)},)"
        )
    if not np.all(np.isfinite(params)):
        raise ValueError("non-finite parameters")
    return params


def _check_batch(spec: ModelSpec, batch: Batch) -> None:
    if batch.inputs.shape[1] != spec.n_in:
        raise ValueError(
            f"input dim {batch.inputs.shape[1]} does not match model input size {spec.n_in}"
        )
    if spec.output == "softmax_xent":
        y = batch.labels
        if y.ndim != 1 or not np.issubdtype(y.dtype, np.integer):
            raise ValueError("softmax_xent expects a vector of integer class labels")
        if y.min() < 0 or y.max() >= spec.n_out:
            raise ValueError(f"class label out of range [0, {spec.n_out})")
    else:
        y = np.asarray(batch.labels, dtype=np.float64)
        if y.shape != (batch.n, spec.n_out):
            raise ValueError(f"mse targets must have shape ({batch.n}, {spec.n_out})")


def _activate(spec: ModelSpec, z: np.ndarray) -> np.ndarray:
    if spec.activation == "tanh":
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _forward_all(spec, params, x):
    """Forward pass keeping all post-activation layer outputs (incl. input)."""
    layers = unpack(spec, params)
    acts = [x]
    a = x
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        a = z if i == len(layers) - 1 else _activate(spec, z)
        acts.append(a)
    return acts


def forward(spec: ModelSpec, params: np.ndarray, batch: Batch) -> np.ndarray:
    """Logits (or regression outputs), shape n x k."""
    _check_batch(spec, batch)
    out = _forward_all(spec, params, batch.inputs)[-1]
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite forward output")
    return out


def penultimate_features(spec: ModelSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Activations feeding the final linear layer (the input itself for 1-layer nets)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != spec.n_in:
        raise ValueError(f"input dim {x.shape[1]} does not match model input size {spec.n_in}")
    return _forward_all(spec, params, x)[-2]


def _data_loss_and_dlogits(spec, out, batch):
    n = batch.n
    if spec.output == "softmax_xent":
        m = out.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(out - m).sum(axis=1))
        loss = np.mean(lse - out[np.arange(n), batch.labels])
        p = np.exp(out - m)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(n), batch.labels] -= 1.0
        return loss, p / n
    y = np.asarray(batch.labels, dtype=np.float64)
    diff = out - y
    return 0.5 * np.mean(np.sum(diff * diff, axis=1)), diff / n


def loss(spec: ModelSpec, params: np.ndarray, batch: Batch, weight_decay: float = 0.0) -> float:
    """Mean data loss plus (weight_decay / 2) * ||params||^2."""
    if weight_decay < 0:
        raise ValueError("weight_decay must be non-negative")
    params = _check_params(spec, params)
    out = forward(spec, params, batch)
    value, _ = _data_loss_and_dlogits(spec, out, batch)
    if weight_decay:
        value = value + 0.5 * weight_decay * float(params @ params)
    return float(value)


def grad(spec: ModelSpec, params: np.ndarray, batch: Batch, weight_decay: float = 0.0) -> np.ndarray:
    """Exact reverse-mode gradient of `loss`, including the weight-decay term."""
    if weight_decay < 0:
        raise ValueError("weight_decay must be non-negative")
    params = _check_params(spec, params)
    _check_batch(spec, batch)
    acts = _forward_all(spec, params, batch.inputs)
    out = acts[-1]
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite forward output")
    _, delta = _data_loss_and_dlogits(spec, out, batch)

    layers = unpack(spec, params)
    grads = [None] * len(layers)
    for i in reversed(range(len(layers))):
        w, _ = layers[i]
        a_prev = acts[i]
        gw = a_prev.T @ delta
        gb = delta.sum(axis=0)
        grads[i] = (gw, gb)
        if i > 0:
            delta = delta @ w.T
            a = acts[i]  # post-activation output of layer i-1's nonlinearity
            if spec.activation == "tanh":
                delta = delta * (1.0 - a * a)
            else:
                delta = delta * (a > 0)

    flat = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
    if weight_decay:
        flat = flat + weight_decay * params
    return flat


def hvp(
    spec: ModelSpec,
    params: np.ndarray,
    batch: Batch,
    v: np.ndarray,
    weight_decay: float = 0.0,
    fd_step: float = 1e-4,
) -> np.ndarray:
    """Hessian-vector product by central differences of the exact gradient.

    Uses step h = fd_step / ||v||, so the probe displacement has magnitude
    fd_step regardless of the scale of v. The weight-decay contribution
    (weight_decay * v) comes out exactly because grad is linear in it.
    """
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    params = _check_params(spec, params)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != params.shape:
        raise ValueError(f"v has dim {v.shape}, expected {params.shape}")
    vnorm = float(np.linalg.norm(v))
    if vnorm == 0.0:
        return np.zeros_like(params)
    h = fd_step / vnorm
    gp = grad(spec, params + h * v, batch, weight_decay)
    gm = grad(spec, params - h * v, batch, weight_decay)
    out = (gp - gm) / (2.0 * h)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite Hessian-vector product")
    return out


def qloss(a: np.ndarray, theta: np.ndarray) -> float:
    """Analytic quadratic test fixture: 0.5 * theta' A theta."""
    a, theta = _check_quadratic(a, theta)
    return 0.5 * float(theta @ a @ theta)


def qgrad(a: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Gradient of the quadratic fixture: A theta."""
    a, theta = _check_quadratic(a, theta)
    return a @ theta


def _check_quadratic(a, theta):
    a = np.asarray(a, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"A must be square, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=1e-12, atol=1e-12):
        raise ValueError("A must be symmetric")
    if theta.shape != (a.shape[0],):
        raise ValueError(f"theta has dim {theta.shape}, expected ({a.shape[0]},)")
    return a, theta
