"""Base learners: a trainable feed-forward scorer and a strict cache of precomputed scores."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .domain import Logit, Probability
from .errors import BadShape, DimMismatch, DuplicateKey, MissingPrediction


class BaseLearner(Protocol):
    """Anything that maps one feature vector to a raw logit, deterministically."""

    def score(self, x) -> Logit: ...


@dataclass
class ReferenceLearner:
    """Fully connected ReLU network ending in a single identity-activated logit.

    ``weights[k]`` has shape ``(layer_sizes[k + 1], layer_sizes[k])``.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    init_seed: int = 0

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def get_params(self) -> np.ndarray:
        return np.concatenate([a.ravel() for W, b in zip(self.weights, self.biases) for a in (W, b)])

    def set_params(self, flat) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise BadShape(f"expected {self.n_params} parameters, got {flat.shape}")
        k = 0
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = flat[k : k + W.size].reshape(W.shape).copy()
            k += W.size
            self.biases[i] = flat[k : k + b.size].copy()
            k += b.size

    def copy(self) -> "ReferenceLearner":
        return ReferenceLearner(
            list(self.layer_sizes),
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.init_seed,
        )

    def score(self, x) -> Logit:
        return forward(self, x)

    def score_batch(self, X) -> np.ndarray:
        return forward_batch(self, X)


def _check_sizes(layer_sizes):
    sizes = list(layer_sizes)
    if len(sizes) < 2 or sizes[-1] != 1 or any(int(s) != s or s < 1 for s in sizes):
        raise BadShape(f"layer_sizes must have >= 2 positive entries ending in 1, got {sizes}")
    return [int(s) for s in sizes]


def init_reference_learner(layer_sizes, seed: int) -> ReferenceLearner:
    """Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases."""
    sizes = _check_sizes(layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return ReferenceLearner(sizes, weights, biases, int(seed))


def _forward_cache(learner: ReferenceLearner, X: np.ndarray):
    if X.ndim != 2 or X.shape[1] != learner.layer_sizes[0]:
        raise DimMismatch(f"expected inputs of dim {learner.layer_sizes[0]}, got shape {X.shape}")
    acts = [X]
    pre = []
    h = X
    last = len(learner.weights) - 1
    for k, (W, b) in enumerate(zip(learner.weights, learner.biases)):
        z = h @ W.T + b
        pre.append(z)
        h = z if k == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts, pre


def forward_batch(learner: ReferenceLearner, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    acts, _ = _forward_cache(learner, X)
    return acts[-1][:, 0]


def forward(learner: ReferenceLearner, x) -> Logit:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimMismatch(f"forward expects one feature vector, got shape {x.shape}")
    return Logit(forward_batch(learner, x[None, :])[0])


def backward_batch(learner: ReferenceLearner, X, dL_dlogits) -> np.ndarray:
    """Reverse-mode gradient, summed over the batch, flattened like ``get_params``."""
    X = np.asarray(X, dtype=np.float64)
    acts, pre = _forward_cache(learner, X)
    delta = np.asarray(dL_dlogits, dtype=np.float64).reshape(-1, 1)
    if delta.shape[0] != X.shape[0]:
        raise DimMismatch(f"{X.shape[0]} inputs but {delta.shape[0]} upstream derivatives")
    grads = []
    for k in range(len(learner.weights) - 1, -1, -1):
        grads.append((delta.T @ acts[k], delta.sum(axis=0)))
        if k > 0:
            delta = (delta @ learner.weights[k]) * (pre[k - 1] > 0)
    grads.reverse()
    return np.concatenate([a.ravel() for gW, gb in grads for a in (gW, gb)])


def backward(learner: ReferenceLearner, x, dL_dlogit: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimMismatch(f"backward expects one feature vector, got shape {x.shape}")
    return backward_batch(learner, x[None, :], [dL_dlogit])


CacheKey = tuple  # (dataset, sample_id, family name, instance slot)


@dataclass
class CachedPredictor:
    """Frozen-model scores read from disk. Absent keys raise; duplicates are rejected."""

    table: dict = field(default_factory=dict)
    provenance: str = ""

    def add(self, dataset: str, sample_id: str, family: str, instance: int, score) -> None:
        key = (dataset, sample_id, family, int(instance))
        if key in self.table:
            raise DuplicateKey(f"duplicate prediction for {key}")
        self.table[key] = Probability(score)

    def __len__(self):
        return len(self.table)

    def lookup(self, sample_id, family, instance, dataset=None) -> Probability:
        return lookup(self, sample_id, family, instance, dataset)


def _family_name(family):
    return getattr(family, "display_name", family)


def _slot(instance):
    return getattr(instance, "slot", instance)


def lookup(cache: CachedPredictor, sample_id, family, instance, dataset=None) -> Probability:
    fam, slot = _family_name(family), int(_slot(instance))
    if dataset is not None:
        key = (dataset, sample_id, fam, slot)
        if key in cache.table:
            return cache.table[key]
        raise MissingPrediction(f"no prediction for dataset={dataset!r} sample_id={sample_id!r} "
                                f"family={fam!r} instance={slot}")
    hits = [v for (d, s, f, i), v in cache.table.items() if s == sample_id and f == fam and i == slot]
    if len(hits) == 1:
        return hits[0]
    if not hits:
        raise MissingPrediction(f"no prediction for sample_id={sample_id!r} family={fam!r} instance={slot}")
    raise MissingPrediction(f"sample_id={sample_id!r} is present in several datasets; pass dataset=")
