"""Two-phase training: independent base instances, then fusion weights over frozen instances."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .domain import EnsembleConfig
from .ensemble import (
    FusionWeights,
    average_instances,
    average_instances_batch,
    bce_grad_y,
    bce_loss,
    fuse,
    fuse_batch,
    fusion_gradient_batch,
    sigmoid,
    softmax_weights,
)
from .errors import BadConfig, EmptyData
from .learners import ReferenceLearner, backward_batch, forward_batch, init_reference_learner
from .optim import (
    AccumulationState,
    AdamWState,
    CosineSchedule,
    EarlyStopState,
    Signal,
    accumulate,
    adamw_step,
    cosine_lr,
    early_stop_update,
    flush,
)


@dataclass
class TrainingConfig:
    """Hyperparameters for one training phase. Defaults follow the base-model recipe."""

    phase: str = "base"
    batch_size: int = 32
    accumulation_steps: int = 2
    max_epochs: int = 30
    lr: float = 1e-4
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    T0: int = 3
    eta_min: float = 0.0
    mult: int = 1
    patience: int = 7
    min_delta: float = 0.001
    min_epochs: int = 10
    hidden: tuple = (16,)
    seed: int = 0

    def __post_init__(self):
        if self.phase not in ("base", "fusion"):
            raise BadConfig(f"phase must be 'base' or 'fusion', got {self.phase!r}")
        if self.batch_size < 1 or self.accumulation_steps < 1:
            raise BadConfig("batch_size and accumulation_steps must be >= 1")
        # max_epochs == 0 is the documented "initialize only" case
        if self.max_epochs != 0 and self.max_epochs < self.min_epochs:
            raise BadConfig(f"max_epochs ({self.max_epochs}) must be >= min_epochs ({self.min_epochs})")
        self.hidden = tuple(int(h) for h in self.hidden)

    def optimizer(self) -> AdamWState:
        return AdamWState(self.lr, self.weight_decay, self.beta1, self.beta2, self.eps)

    def schedule(self) -> CosineSchedule:
        return CosineSchedule(eta_max=self.lr, T0=self.T0, eta_min=self.eta_min, mult=self.mult)

    def early_stop(self) -> EarlyStopState:
        return EarlyStopState(self.patience, self.min_delta, self.min_epochs)


def fusion_defaults(**overrides) -> TrainingConfig:
    """Phase-2 config: only the fusion logits are trained, with a larger step and no decay."""
    return TrainingConfig(**{"phase": "fusion", "lr": 1e-2, "weight_decay": 0.0, **overrides})


@dataclass
class History:
    columns: list
    rows: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    best_epoch: int = 0

    def column(self, name) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    return [order[k : k + batch_size] for k in range(0, n, batch_size)]


def _mean_bce_of_logits(z, t) -> float:
    return float(np.mean(bce_loss(sigmoid(z), t)))


def train_instance(
    X_train, y_train, X_val, y_val, cfg: TrainingConfig, seed: int
) -> tuple[ReferenceLearner, History]:
    """Train one reference learner with BCE on its sigmoid output; keep best-validation params."""
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    X_val = np.asarray(X_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    if len(X_train) == 0:
        raise EmptyData("training split is empty")
    learner = init_reference_learner([X_train.shape[1], *cfg.hidden, 1], seed)
    history = History(["epoch", "train_loss", "val_loss", "lr"])
    if cfg.max_epochs == 0:
        history.warnings.append("max_epochs=0: learner left at its initialization")
        return learner, history

    rng = np.random.default_rng([seed, 1])
    opt, sched, stop = cfg.optimizer(), cfg.schedule(), cfg.early_stop()
    params = learner.get_params()
    best = params.copy()
    has_val = len(X_val) > 0
    for epoch in range(1, cfg.max_epochs + 1):
        lr = cosine_lr(sched)
        acc = AccumulationState(cfg.accumulation_steps)
        losses = []
        for idx in _batches(len(X_train), cfg.batch_size, rng):
            z = forward_batch(learner, X_train[idx])
            t = y_train[idx]
            p = sigmoid(z)
            losses.append(float(np.mean(bce_loss(p, t))))
            # d(mean BCE)/d logit, the sigmoid and log derivatives cancel to p - t
            g = backward_batch(learner, X_train[idx], (p - t) / len(idx))
            ready = accumulate(acc, g)
            if ready is not None:
                params = adamw_step(opt, params, ready, lr)
                learner.set_params(params)
        ready = flush(acc)
        if ready is not None:
            params = adamw_step(opt, params, ready, lr)
            learner.set_params(params)
        sched.step()
        train_loss = float(np.mean(losses))
        val_loss = _mean_bce_of_logits(forward_batch(learner, X_val), y_val) if has_val else train_loss
        history.rows.append([epoch, train_loss, val_loss, lr])
        signal = early_stop_update(stop, epoch, val_loss)
        if stop.improved:
            best = params.copy()
        if signal is Signal.STOP:
            break
    learner.set_params(best)
    history.best_epoch = stop.best_epoch
    return learner, history


def train_base_instances(ens: EnsembleConfig, cfg: TrainingConfig, dataset) -> tuple[list, list]:
    """Train every (family, slot) instance on its family's view of ``dataset``.

    ``dataset`` is a :class:`twotier.data.Dataset`. Returns ``(learners, histories)``,
    both nested ``[family][slot]``.
    """
    if len(dataset) == 0 or not np.any(dataset.mask("train")):
        raise EmptyData(f"dataset {dataset.name!r} has no training samples")
    if len(dataset.blocks) != ens.families:
        raise BadConfig(f"dataset has {len(dataset.blocks)} family blocks, ensemble has {ens.families}")
    y_tr, y_va = dataset.labels("train"), dataset.labels("val")
    learners, histories = [], []
    for f in range(ens.families):
        X_va = dataset.family_view(f, "val")
        fam_l, fam_h = [], []
        for i in range(ens.instances_per_family):
            X_tr = dataset.instance_view(f, i, "train")
            learner, hist = train_instance(X_tr, y_tr, X_va, y_va, cfg, ens.seed_for(f, i))
            fam_l.append(learner)
            fam_h.append(hist)
        learners.append(fam_l)
        histories.append(fam_h)
    return learners, histories


def instance_probabilities(family_learners, X) -> np.ndarray:
    """Sigmoid scores of each instance, shape (n_samples, M)."""
    return np.stack([sigmoid(forward_batch(l, X)) for l in family_learners], axis=1)


def predict_family(family_learners, x):
    """Tier-1 prediction. A single feature vector gives a Probability; a matrix gives an array."""
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        return average_instances([sigmoid(forward_batch(l, X[None, :])[0]) for l in family_learners])
    return average_instances_batch(instance_probabilities(family_learners, X))


def family_prediction_matrix(learners, dataset, split: str | None = None) -> np.ndarray:
    """(n_samples, A) tier-1 predictions of ``learners`` on a dataset's family views."""
    return np.stack(
        [predict_family(fam, dataset.family_view(f, split)) for f, fam in enumerate(learners)], axis=1
    )


def params_checksum(learners) -> str:
    h = hashlib.sha256()
    for fam in learners:
        for l in fam:
            h.update(np.ascontiguousarray(l.get_params()).tobytes())
    return h.hexdigest()


@dataclass
class FusionResult:
    weights: FusionWeights
    history: History


def _as_source(src):
    if callable(src):
        return src, None
    P = np.asarray(src, dtype=np.float64)
    return (lambda idx: P[idx]), len(P)


def train_fusion(P_train, y_train, P_val, y_val, cfg: TrainingConfig, n_train: int | None = None) -> FusionResult:
    """Learn fusion logits over frozen family predictions.

    ``P_train``/``P_val`` are (n, A) matrices of tier-1 predictions, or callables
    mapping an index array to those rows (the frozen models evaluated on demand;
    then ``n_train`` must be given). Logits start at ``[1/A, ..., 1/A]``.
    """
    get_tr, n_tr = _as_source(P_train)
    n_tr = n_train if n_tr is None else n_tr
    y_train = np.asarray(y_train, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    if not n_tr:
        raise EmptyData("fusion training split is empty")
    P_va = P_val(np.arange(len(y_val))) if callable(P_val) else np.asarray(P_val, dtype=np.float64)
    A = get_tr(np.arange(1)).shape[1]
    fw = FusionWeights.uniform(A)
    history = History(["epoch", "train_loss", "val_loss", "lr"] + [f"alpha_{k}" for k in range(A)])
    if cfg.max_epochs == 0:
        history.warnings.append("max_epochs=0: fusion weights left at their initialization")
        return FusionResult(fw, history)

    rng = np.random.default_rng([cfg.seed, 2])
    opt, sched, stop = cfg.optimizer(), cfg.schedule(), cfg.early_stop()
    w = fw.w.copy()
    best = w.copy()
    has_val = len(y_val) > 0
    for epoch in range(1, cfg.max_epochs + 1):
        lr = cosine_lr(sched)
        acc = AccumulationState(cfg.accumulation_steps)
        losses = []
        for idx in _batches(n_tr, cfg.batch_size, rng):
            Pb, t = get_tr(idx), y_train[idx]
            yb = fuse_batch(softmax_weights(w), Pb)
            losses.append(float(np.mean(bce_loss(yb, t))))
            g = fusion_gradient_batch(w, Pb, bce_grad_y(yb, t) / len(idx))
            ready = accumulate(acc, g)
            if ready is not None:
                w = adamw_step(opt, w, ready, lr)
        ready = flush(acc)
        if ready is not None:
            w = adamw_step(opt, w, ready, lr)
        sched.step()
        train_loss = float(np.mean(losses))
        alpha = softmax_weights(w)
        val_loss = float(np.mean(bce_loss(fuse_batch(alpha, P_va), y_val))) if has_val else train_loss
        history.rows.append([epoch, train_loss, val_loss, lr, *alpha.tolist()])
        signal = early_stop_update(stop, epoch, val_loss)
        if stop.improved:
            best = w.copy()
        if signal is Signal.STOP:
            break
    history.best_epoch = stop.best_epoch
    return FusionResult(FusionWeights(best), history)


@dataclass
class TrainedEnsemble:
    config: EnsembleConfig
    learners: list  # [family][slot] ReferenceLearner
    fusion: FusionWeights
    history: History | None = None

    def family_predictions(self, dataset, split: str | None = None) -> np.ndarray:
        return family_prediction_matrix(self.learners, dataset, split)


def predict(ensemble: TrainedEnsemble, x):
    """Final fused probability for one sample given as a list of per-family feature vectors,
    or a (n_samples, A) matrix of precomputed family predictions when ``x`` is an ndarray of ndim 2.
    """
    if isinstance(x, np.ndarray) and x.ndim == 2:
        return ensemble.fusion.predict(x)
    p = [predict_family(fam, xf) for fam, xf in zip(ensemble.learners, x)]
    return fuse(ensemble.fusion.alpha, p)


def train_two_phase(ens: EnsembleConfig, base_cfg: TrainingConfig, fusion_cfg: TrainingConfig, dataset):
    """Phase 1 then phase 2 on one dataset; returns the ensemble and the base histories."""
    learners, base_hist = train_base_instances(ens, base_cfg, dataset)
    P_tr = family_prediction_matrix(learners, dataset, "train")
    P_va = family_prediction_matrix(learners, dataset, "val")
    res = train_fusion(P_tr, dataset.labels("train"), P_va, dataset.labels("val"), fusion_cfg)
    return TrainedEnsemble(ens, learners, res.weights, res.history), base_hist
