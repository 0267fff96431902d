"""Finite-time Lyapunov exponent estimation for discrete-time update maps.

Two propagation schemes are provided: tangent propagation through the
linearized map delta <- (I - lr * H) delta, and a two-trajectory scheme that
advances a nominal and a perturbed state under the same gradient-descent
update and tracks their separation. Both accumulate per-step log-stretch
with Benettin-style renormalization, so the running estimate is
log_stretch_sum / steps.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

# Renormalization band: rescale when ||delta|| drifts outside
# [LOW * delta0_norm, HIGH * delta0_norm].
RENORM_LOW = 1e-3
RENORM_HIGH = 1e3


@dataclass(frozen=True)
class PerturbationState:
    """Current perturbation vector plus accumulated log-stretch history."""

    delta: np.ndarray
    delta0_norm: float
    log_stretch_sum: float = 0.0
    steps: int = 0
    renorm_count: int = 0
    merged: bool = False  # trajectories collapsed to zero separation

    def __post_init__(self):
        if self.delta0_norm <= 0:
            raise ValueError("delta0_norm must be positive")


@dataclass(frozen=True)
class LeEstimate:
    value: float  # nats per step
    steps: int
    method: str  # "tangent" or "two_trajectory"


@dataclass(frozen=True)
class LeBounds:
    lower: float
    upper: float


def init_perturbation(dim: int, magnitude: float, seed: int) -> PerturbationState:
    """Seeded random direction scaled to ||delta|| = magnitude."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if magnitude <= 0:
        raise ValueError("magnitude must be positive")
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(dim)
    d *= magnitude / np.linalg.norm(d)
    return PerturbationState(delta=d, delta0_norm=float(magnitude))


def renormalize(state: PerturbationState) -> PerturbationState:
    """Rescale delta back to delta0_norm when it leaves the allowed band.

    The stretch bookkeeping happens before rescaling, so this never changes
    log_stretch_sum.
    """
    norm = float(np.linalg.norm(state.delta))
    if norm <= 0:
        raise ValueError("cannot renormalize a zero perturbation")
    ratio = norm / state.delta0_norm
    if RENORM_LOW <= ratio <= RENORM_HIGH:
        return state
    return dataclasses.replace(
        state,
        delta=state.delta * (state.delta0_norm / norm),
        renorm_count=state.renorm_count + 1,
    )


def _record_step(state: PerturbationState, new_delta: np.ndarray) -> PerturbationState:
    if not np.all(np.isfinite(new_delta)):
        raise ValueError(
            f"non-finite perturbation after step {state.steps + 1} "
            f"(||delta|| was {np.linalg.norm(state.delta):.3e})"
        )
    old_norm = float(np.linalg.norm(state.delta))
    new_norm = float(np.linalg.norm(new_delta))
    if new_norm == 0.0:
        # Trajectories merged; the finite-time exponent is -inf.
        return dataclasses.replace(
            state,
            delta=new_delta,
            log_stretch_sum=-np.inf,
            steps=state.steps + 1,
            merged=True,
        )
    state = dataclasses.replace(
        state,
        delta=new_delta,
        log_stretch_sum=state.log_stretch_sum + np.log(new_norm / old_norm),
        steps=state.steps + 1,
    )
    return renormalize(state)


def propagate_tangent(
    state: PerturbationState, hvp_of_delta: np.ndarray, lr: float
) -> PerturbationState:
    """One linearized step delta <- delta - lr * (H delta).

    The caller supplies H delta evaluated at the current parameters.
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    return _record_step(state, state.delta - lr * np.asarray(hvp_of_delta))


def propagate_two_trajectory(
    theta: np.ndarray,
    theta_pert: np.ndarray,
    grad_fn: Callable[[np.ndarray], np.ndarray],
    lr: float,
    state: PerturbationState,
) -> tuple[np.ndarray, np.ndarray, PerturbationState]:
    """Advance nominal and perturbed states by theta <- theta - lr * grad(theta).

    Returns the advanced nominal state, the perturbed state re-centered after
    renormalization, and the updated perturbation record.
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    theta_new = theta - lr * grad_fn(theta)
    pert_new = theta_pert - lr * grad_fn(theta_pert)
    state = _record_step(state, pert_new - theta_new)
    return theta_new, theta_new + state.delta, state


def le_estimate(state: PerturbationState, method: str = "two_trajectory") -> LeEstimate:
    """Running finite-time exponent: log_stretch_sum / steps."""
    if state.steps < 1:
        raise ValueError("need at least one propagation step")
    return LeEstimate(
        value=state.log_stretch_sum / state.steps, steps=state.steps, method=method
    )


def le_bounds(
    lrs: list[float],
    hessian_norms: list[float],
    update_map_norms: list[float] | None = None,
) -> LeBounds:
    """Analytic bounds on the exponent from per-step learning rates and norms.

    lower = mean ln(1 - lr_i * ||H_i||), -inf when any argument is <= 0.
    upper = mean ln of the supplied operator norms ||I - lr_i H_i||; when not
    supplied it falls back to the triangle-inequality bound ln(1 + lr_i ||H_i||).
    """
    if len(lrs) != len(hessian_norms) or len(lrs) < 1:
        raise ValueError("lrs and hessian_norms must have equal length >= 1")
    if update_map_norms is not None and len(update_map_norms) != len(lrs):
        raise ValueError("update_map_norms length mismatch")
    lrs = np.asarray(lrs, dtype=np.float64)
    hn = np.asarray(hessian_norms, dtype=np.float64)
    if np.any(lrs <= 0) or np.any(hn < 0):
        raise ValueError("lrs must be positive, hessian_norms non-negative")
    args = 1.0 - lrs * hn
    if np.any(args <= 0):
        lower = -np.inf
    else:
        lower = float(np.mean(np.log(args)))
    if update_map_norms is not None:
        upper = float(np.mean(np.log(np.asarray(update_map_norms, dtype=np.float64))))
    else:
        upper = float(np.mean(np.log1p(lrs * hn)))
    return LeBounds(lower=lower, upper=upper)


def update_map_norm(
    hvp_fn: Callable[[np.ndarray], np.ndarray],
    dim: int,
    lr: float,
    n_iter: int = 10,
    seed: int = 0,
) -> float:
    """Operator norm of I - lr * H estimated by power iteration (H symmetric)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(n_iter):
        w = v - lr * hvp_fn(v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return est


# 1-D map validation harness: (f, f') pairs with their natural domains.

def _logistic(r):
    return (lambda x: r * x * (1.0 - x), lambda x: r * (1.0 - 2.0 * x), (0.0, 1.0))


def _tent(mu):
    return (
        lambda x: mu * min(x, 1.0 - x),
        lambda x: mu if x < 0.5 else -mu,
        (0.0, 1.0),
    )


def _linear(a):
    return (lambda x: a * x, lambda x: a, (-np.inf, np.inf))


_MAPS = {"logistic": _logistic, "tent": _tent, "linear": _linear}


def map_le(kind: str, param: float, x0: float, n_steps: int) -> LeEstimate:
    """Orbit-averaged exponent (1/n) sum ln|f'(x_t)| for a 1-D map."""
    if kind not in _MAPS:
        raise ValueError(f"unknown map {kind!r}")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    f, df, (lo, hi) = _MAPS[kind](param)
    x = float(x0)
    if not lo <= x <= hi:
        raise ValueError(f"x0={x0} outside map domain [{lo}, {hi}]")
    total = 0.0
    with np.errstate(divide="ignore"):  # -inf at critical points is intended
        for t in range(n_steps):
            total += np.log(abs(df(x)))
            x = f(x)
            if not lo <= x <= hi or not np.isfinite(x):
                raise ValueError(f"orbit escaped map domain at step {t + 1} (x={x})")
    return LeEstimate(value=total / n_steps, steps=n_steps, method="tangent")
