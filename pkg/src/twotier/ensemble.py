"""Two-tier score fusion: instance averaging, softmax-weighted family fusion, and its gradient.

Scalar entry points return the validated domain types; the ``*_batch`` helpers
operate on float64 arrays and are what the training loops use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Probability
from .errors import EmptyInput, LengthMismatch

BCE_EPS = 1e-7


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(z):
    """Logistic function, evaluated sign-split so neither branch overflows.

    A scalar input returns a :class:`Probability`; arrays return float64 arrays.
    """
    if np.ndim(z) == 0:
        return Probability(_stable_sigmoid(np.array([z]))[0])
    return _stable_sigmoid(z)


def average_instances(scores) -> Probability:
    """Tier-1 fusion: arithmetic mean of one family's instance probabilities."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise EmptyInput("cannot average an empty set of instance scores")
    # clip guards the last-ulp overshoot of a mean of values at exactly 1.0
    return Probability(min(max(float(s.mean()), float(s.min())), float(s.max())))


def average_instances_batch(scores: np.ndarray) -> np.ndarray:
    """Mean over the last axis, e.g. (n_samples, M) -> (n_samples,)."""
    s = np.asarray(scores, dtype=np.float64)
    if s.shape[-1] == 0:
        raise EmptyInput("cannot average an empty set of instance scores")
    return s.mean(axis=-1)


def softmax_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    e = np.exp(w - w.max())
    return e / e.sum()


def _check_lengths(a, b):
    if len(a) != len(b):
        raise LengthMismatch(f"length mismatch: {len(a)} weights vs {len(b)} family predictions")


def fuse(alpha, p) -> Probability:
    """Tier-2 fusion: convex combination sum_i alpha_i * p_i."""
    alpha = np.asarray(alpha, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    _check_lengths(alpha, p)
    y = float(alpha @ p)
    # a convex combination stays inside [min p, max p]; clamp float rounding back in
    return Probability(min(max(y, float(p.min())), float(p.max())))


def fuse_batch(alpha, P: np.ndarray) -> np.ndarray:
    """Fuse a (n_samples, A) matrix of family predictions."""
    alpha = np.asarray(alpha, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if P.shape[-1] != alpha.shape[0]:
        raise LengthMismatch(f"length mismatch: {alpha.shape[0]} weights vs {P.shape[-1]} families")
    return P @ alpha


def _clamp(y):
    return np.clip(np.asarray(y, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)


def bce_loss(y, t):
    """Binary cross-entropy with the prediction clamped to [eps, 1 - eps]."""
    yh = _clamp(y)
    t = np.asarray(t, dtype=np.float64)
    out = -(t * np.log(yh) + (1.0 - t) * np.log1p(-yh))
    return float(out) if out.ndim == 0 else out


def bce_grad_y(y, t):
    """dL/dy of :func:`bce_loss`, using the same clamp."""
    yh = _clamp(y)
    t = np.asarray(t, dtype=np.float64)
    out = (yh - t) / (yh * (1.0 - yh))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FusionGradient:
    d_w: np.ndarray
    d_y: float


def fusion_gradient(w, p, dL_dy: float) -> FusionGradient:
    """Gradient of the loss with respect to the fusion logits ``w``.

    With alpha = softmax(w) and y = alpha . p, the softmax Jacobian
    d alpha_i / d w_j = alpha_i (delta_ij - alpha_j) collapses the sum over i to
    dL/dw_j = dL/dy * alpha_j * (p_j - y).
    """
    w = np.asarray(w, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    _check_lengths(w, p)
    alpha = softmax_weights(w)
    y = alpha @ p
    return FusionGradient(d_w=dL_dy * alpha * (p - y), d_y=float(dL_dy))


def fusion_gradient_batch(w, P: np.ndarray, dL_dy: np.ndarray) -> np.ndarray:
    """Sum of per-sample fusion gradients; the caller folds any 1/n into ``dL_dy``."""
    alpha = softmax_weights(w)
    P = np.asarray(P, dtype=np.float64)
    if P.shape[-1] != alpha.shape[0]:
        raise LengthMismatch(f"length mismatch: {alpha.shape[0]} weights vs {P.shape[-1]} families")
    y = P @ alpha
    return alpha * (np.asarray(dL_dy, dtype=np.float64) @ (P - y[:, None]))


def uniform_init(families: int) -> np.ndarray:
    """Fusion logits at their documented starting point, w = [1/A, ..., 1/A]."""
    return np.full(families, 1.0 / families)


@dataclass
class FusionWeights:
    """Learnable fusion logits ``w``; ``alpha`` is always derived, never stored."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if not np.all(np.isfinite(self.w)):
            raise ValueError("fusion logits must be finite")

    @classmethod
    def uniform(cls, families: int) -> "FusionWeights":
        return cls(uniform_init(families))

    @property
    def alpha(self) -> np.ndarray:
        return softmax_weights(self.w)

    def predict(self, P: np.ndarray) -> np.ndarray:
        return fuse_batch(self.alpha, P)
