"""AdamW, cosine annealing with warm restarts, gradient accumulation, early stopping.

Each piece is a small mutable state object plus a function that advances it, so
the training loops can compose them without a framework.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadConfig, LengthMismatch


@dataclass
class AdamWState:
    lr: float = 1e-4
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adamw_step(state: AdamWState, params, grads, lr_override: float | None = None) -> np.ndarray:
    """One decoupled-weight-decay Adam update. Returns new params; moments live in ``state``."""
    params = np.asarray(params, dtype=np.float64)
    g = np.asarray(grads, dtype=np.float64)
    if params.shape != g.shape:
        raise LengthMismatch(f"params {params.shape} and grads {g.shape} differ in shape")
    lr = state.lr if lr_override is None else float(lr_override)
    if lr <= 0:
        raise BadConfig(f"learning rate must be > 0, got {lr}")
    if state.m is None or state.m.shape != g.shape:
        state.m = np.zeros_like(g)
        state.v = np.zeros_like(g)

    state.step_count += 1
    t = state.step_count
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1**t)
    v_hat = state.v / (1.0 - state.beta2**t)
    return params - lr * (m_hat / (np.sqrt(v_hat) + state.eps) + state.weight_decay * params)


@dataclass
class CosineSchedule:
    """Per-epoch cosine annealing with warm restarts every ``T_i`` epochs."""

    eta_max: float = 1e-4
    T0: int = 3
    eta_min: float = 0.0
    mult: int = 1
    T_cur: float = 0
    T_i: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.T0 < 1 or self.mult < 1:
            raise BadConfig("T0 and mult must be >= 1")
        if self.eta_min > self.eta_max:
            raise BadConfig("eta_min must not exceed eta_max")
        if self.T_i is None:
            self.T_i = self.T0

    def step(self) -> None:
        """Advance one epoch, restarting the cycle once it is complete."""
        self.T_cur += 1
        if self.T_cur >= self.T_i:
            self.T_cur = 0
            self.T_i = self.T_i * self.mult


def cosine_lr(sched: CosineSchedule) -> float:
    frac = min(max(sched.T_cur / sched.T_i, 0.0), 1.0)
    lr = sched.eta_min + 0.5 * (sched.eta_max - sched.eta_min) * (1.0 + math.cos(math.pi * frac))
    return min(max(lr, sched.eta_min), sched.eta_max)


class Signal(enum.Enum):
    CONTINUE = "continue"
    STOP = "stop"


@dataclass
class EarlyStopState:
    patience: int = 7
    min_delta: float = 0.001
    min_epochs: int = 10
    best_loss: float = math.inf
    best_epoch: int = 0
    epochs_since_improve: int = 0
    improved: bool = False  # whether the most recent update was an improvement


def early_stop_update(state: EarlyStopState, epoch: int, val_loss: float) -> Signal:
    """Record one epoch's validation loss (epochs are 1-based).

    Improvement is strict: ``val_loss < best_loss - min_delta``.
    """
    if val_loss < state.best_loss - state.min_delta:
        state.best_loss = float(val_loss)
        state.best_epoch = epoch
        state.epochs_since_improve = 0
        state.improved = True
    else:
        state.epochs_since_improve += 1
        state.improved = False
    if state.epochs_since_improve >= state.patience and epoch >= state.min_epochs:
        return Signal.STOP
    return Signal.CONTINUE


@dataclass
class AccumulationState:
    steps: int = 2
    buffer: np.ndarray | None = None
    count: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise BadConfig("accumulation steps must be >= 1")


def accumulate(state: AccumulationState, grad) -> np.ndarray | None:
    """Buffer one micro-batch gradient; return the mean once ``steps`` have been seen, else None."""
    g = np.asarray(grad, dtype=np.float64)
    if state.buffer is None:
        state.buffer = np.zeros_like(g)
    elif state.buffer.shape != g.shape:
        raise LengthMismatch(f"gradient shape {g.shape} differs from buffered {state.buffer.shape}")
    state.buffer = state.buffer + g
    state.count += 1
    if state.count < state.steps:
        return None
    out = state.buffer / state.steps
    state.buffer = np.zeros_like(g)
    state.count = 0
    return out


def flush(state: AccumulationState) -> np.ndarray | None:
    """Mean of a partially filled buffer (end of epoch), or None when empty."""
    if state.count == 0:
        return None
    out = state.buffer / state.count
    state.buffer = np.zeros_like(out)
    state.count = 0
    return out
