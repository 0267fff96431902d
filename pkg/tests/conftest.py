import numpy as np
import pytest

from lesgd import mlp
from lesgd.mlp import Batch, ModelSpec


def fd_grad(fn, theta, step=1e-5):
    """Central finite differences of a scalar function, coordinate by coordinate."""
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        g[i] = (fn(theta + e) - fn(theta - e)) / (2 * step)
    return g


def dense_hessian(grad_fn, theta, step=1e-5):
    """Dense Hessian built column by column from gradient finite differences."""
    n = theta.size
    h = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        h[:, i] = (grad_fn(theta + e) - grad_fn(theta - e)) / (2 * step)
    return h


def straight_line_forward(spec, params, x):
    """Independent forward pass: explicit loop, no shared helpers."""
    sizes = spec.layer_sizes
    off = 0
    a = np.atleast_2d(x)
    for i in range(len(sizes) - 1):
        fi, fo = sizes[i], sizes[i + 1]
        w = params[off:off + fi * fo].reshape(fi, fo)
        off += fi * fo
        b = params[off:off + fo]
        off += fo
        z = a @ w + b
        if i < len(sizes) - 2:
            a = np.tanh(z) if spec.activation == "tanh" else np.maximum(z, 0.0)
        else:
            a = z
    return a


def random_params(spec, seed, scale=0.1):
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal(mlp.parameter_count(spec))


def random_batch(spec, n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, spec.n_in))
    if spec.output == "softmax_xent":
        y = rng.integers(0, spec.n_out, size=n)
        return Batch(inputs=x, labels=y)
    return Batch(inputs=x, labels=rng.standard_normal((n, spec.n_out)))


# Architectures covering both activations and output heads, kept small enough
# for dense-Hessian oracles.
SPEC_MATRIX = [
    ModelSpec((2, 2)),
    ModelSpec((2, 4, 2)),
    ModelSpec((3, 5, 4, 2)),
    ModelSpec((2, 4, 3), activation="relu"),
    ModelSpec((2, 3, 1), output="mse"),
    ModelSpec((4, 6, 3), activation="relu", output="softmax_xent"),
]


@pytest.fixture
def small_spec():
    return ModelSpec((2, 4, 2))
