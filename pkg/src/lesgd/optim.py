"""Optimizers: LE-aware SGD plus SGD/Adam/AdamW/RMSprop baselines.

All step functions are pure: they take (state, grad, params, config) and
return the updated params and a new state, which makes runs replayable
bit-for-bit from a seed.

Weight decay convention: the gradient passed to sgd/adam/rmsprop and the
LE-aware step already contains the decay term (coupled); AdamW applies its
decay decoupled inside the step, so it expects a decay-free gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LeAwareConfig:
    lr0: float = 0.1
    beta: float = 0.1  # sensitivity of the feedback rule
    momentum: float = 0.9
    weight_decay: float = 5e-4
    delta_mag: float = 1e-6  # initial perturbation magnitude, relative to ||theta_0||
    le_window: int = 1  # iterations between exponent readings fed to the rule
    lr_floor: float = 1e-7

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if not self.lr0 > self.lr_floor >= 0:
            raise ValueError("need lr0 > lr_floor >= 0")
        if self.weight_decay < 0 or self.delta_mag <= 0 or self.le_window < 1:
            raise ValueError("invalid LE-aware config")


@dataclass(frozen=True)
class LeAwareState:
    lr: float
    velocity: np.ndarray
    prev_le: float | None = None
    step: int = 0
    lr_history: tuple[tuple[int, float], ...] = ()


def leaware_init(cfg: LeAwareConfig, dim: int) -> LeAwareState:
    return LeAwareState(lr=cfg.lr0, velocity=np.zeros(dim))


def adjust_lr(lr: float, delta_le: float, beta: float, lr_floor: float = 0.0) -> float:
    """Feedback rule: shrink the rate by exp(-beta * delta_le) only when the
    exponent increased; otherwise leave it untouched."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    if not np.isfinite(delta_le):
        raise ValueError(f"non-finite delta_le: {delta_le}")
    if delta_le > 0:
        return max(lr * float(np.exp(-beta * delta_le)), lr_floor)
    return lr


def leaware_step(
    state: LeAwareState,
    grad: np.ndarray,
    params: np.ndarray,
    le_now: float | None,
    cfg: LeAwareConfig,
) -> tuple[np.ndarray, LeAwareState]:
    """Momentum-SGD update at the current rate, then the exponent feedback.

    The rate used for this step is state.lr; when a fresh exponent reading is
    supplied and a previous one exists, the rate for the *next* step is
    adjusted from their difference.
    """
    velocity = cfg.momentum * state.velocity + grad
    new_params = params - state.lr * velocity
    if not np.all(np.isfinite(new_params)):
        raise ValueError(f"non-finite parameters after step {state.step + 1} (lr={state.lr:.3e})")

    lr = state.lr
    prev_le = state.prev_le
    history = state.lr_history
    if le_now is not None:
        if prev_le is not None:
            lr = adjust_lr(lr, le_now - prev_le, cfg.beta, cfg.lr_floor)
            if lr != state.lr:
                history = history + ((state.step + 1, lr),)
        prev_le = le_now
    new_state = LeAwareState(
        lr=lr, velocity=velocity, prev_le=prev_le, step=state.step + 1, lr_history=history
    )
    return new_params, new_state


@dataclass(frozen=True)
class SgdConfig:
    lr: float = 0.1
    momentum: float = 0.0
    weight_decay: float = 0.0


@dataclass(frozen=True)
class SgdState:
    velocity: np.ndarray
    step: int = 0


def sgd_init(cfg: SgdConfig, dim: int) -> SgdState:
    return SgdState(velocity=np.zeros(dim))


def sgd_step(state, grad, params, cfg):
    velocity = cfg.momentum * state.velocity + grad
    new_params = params - cfg.lr * velocity
    _check(new_params, state.step)
    return new_params, SgdState(velocity=velocity, step=state.step + 1)


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0  # decoupled term, used by adamw_step only


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def adam_init(cfg: AdamConfig, dim: int) -> AdamState:
    return AdamState(m=np.zeros(dim), v=np.zeros(dim))


def _adam_direction(state, grad, cfg):
    t = state.step + 1
    m = cfg.beta1 * state.m + (1 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1 - cfg.beta2) * grad * grad
    m_hat = m / (1 - cfg.beta1 ** t)
    v_hat = v / (1 - cfg.beta2 ** t)
    return m_hat / (np.sqrt(v_hat) + cfg.eps), AdamState(m=m, v=v, step=t)


def adam_step(state, grad, params, cfg):
    direction, new_state = _adam_direction(state, grad, cfg)
    new_params = params - cfg.lr * direction
    _check(new_params, state.step)
    return new_params, new_state


def adamw_step(state, grad, params, cfg):
    direction, new_state = _adam_direction(state, grad, cfg)
    new_params = params - cfg.lr * (direction + cfg.weight_decay * params)
    _check(new_params, state.step)
    return new_params, new_state


@dataclass(frozen=True)
class RmspropConfig:
    lr: float = 1e-3
    rho: float = 0.99
    eps: float = 1e-8


@dataclass(frozen=True)
class RmspropState:
    sq: np.ndarray
    step: int = 0


def rmsprop_init(cfg: RmspropConfig, dim: int) -> RmspropState:
    return RmspropState(sq=np.zeros(dim))


def rmsprop_step(state, grad, params, cfg):
    sq = cfg.rho * state.sq + (1 - cfg.rho) * grad * grad
    new_params = params - cfg.lr * grad / (np.sqrt(sq) + cfg.eps)
    _check(new_params, state.step)
    return new_params, RmspropState(sq=sq, step=state.step + 1)


def _check(params, step):
    if not np.all(np.isfinite(params)):
        raise ValueError(f"non-finite parameters after step {step + 1}")
