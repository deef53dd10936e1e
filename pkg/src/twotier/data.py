"""Prediction-record files, split assignment, and the synthetic family-reliability generator."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadRatios,
    BadSpec,
    DuplicateKey,
    MissingPrediction,
    NonRectangular,
    ParseError,
    ScoreOutOfRange,
)
from .learners import CachedPredictor

RECORD_HEADER = ["sample_id", "dataset", "split", "family", "instance", "score", "label"]
SAMPLES_HEADER = ["sample_id", "dataset", "split", "label"]
SPLITS = ("train", "val", "test")


# --------------------------------------------------------------------------- records


@dataclass
class LabelIndex:
    """dataset -> sample_id -> (split, label), preserving file order."""

    entries: dict = field(default_factory=dict)

    def datasets(self) -> list[str]:
        return list(self.entries)

    def samples(self, dataset: str, split: str | None = None) -> list[str]:
        rows = self.entries[dataset]
        return [s for s, (sp, _) in rows.items() if split is None or sp == split]

    def labels(self, dataset: str, sample_ids) -> np.ndarray:
        rows = self.entries[dataset]
        return np.array([rows[s][1] for s in sample_ids], dtype=np.int64)


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    dataset: str
    split: str
    family: str
    instance: int
    score: float
    label: int


def write_prediction_records(path, records) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_HEADER)
        for r in records:
            w.writerow([r.sample_id, r.dataset, r.split, r.family, r.instance, repr(float(r.score)), r.label])


def load_prediction_records(path) -> tuple[CachedPredictor, LabelIndex]:
    """Strictly load a record CSV. Any violation aborts with the offending row number."""
    path = Path(path)
    cache = CachedPredictor(provenance=str(path))
    labels = LabelIndex()
    pairs: dict[str, set] = {}
    per_sample: dict[tuple, set] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != RECORD_HEADER:
            raise ParseError(f"header must be {','.join(RECORD_HEADER)}, got {header}", row=1)
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RECORD_HEADER):
                raise ParseError(f"expected {len(RECORD_HEADER)} fields, got {len(row)}", row=rownum)
            sid, ds, split, fam, inst, score, label = (c.strip() for c in row)
            if not sid or not ds or not fam:
                raise ParseError("sample_id, dataset and family must be non-empty", row=rownum)
            if split not in SPLITS:
                raise ParseError(f"split must be one of {SPLITS}, got {split!r}", row=rownum)
            try:
                inst_i = int(inst)
                score_f = float(score)
                label_i = int(label)
            except ValueError as exc:
                raise ParseError(str(exc), row=rownum) from None
            if inst_i < 0:
                raise ParseError(f"instance must be >= 0, got {inst_i}", row=rownum)
            if label_i not in (0, 1):
                raise ParseError(f"label must be 0 or 1, got {label}", row=rownum)
            if not (0.0 <= score_f <= 1.0):
                raise ScoreOutOfRange(f"score {score} outside [0, 1]", row=rownum)
            try:
                cache.add(ds, sid, fam, inst_i, score_f)
            except DuplicateKey:
                raise DuplicateKey(f"duplicate (sample_id, family, instance) = ({sid}, {fam}, {inst_i}) "
                                   f"in dataset {ds}", row=rownum) from None
            seen = labels.entries.setdefault(ds, {})
            if sid in seen and seen[sid] != (split, label_i):
                raise ParseError(f"sample {sid} has inconsistent split/label across rows", row=rownum)
            seen[sid] = (split, label_i)
            pairs.setdefault(ds, set()).add((fam, inst_i))
            per_sample.setdefault((ds, sid), set()).add((fam, inst_i))
    for ds, samples in labels.entries.items():
        expected = pairs[ds]
        for sid in samples:
            missing = expected - per_sample[(ds, sid)]
            if missing:
                fam, inst = sorted(missing)[0]
                raise NonRectangular(
                    f"dataset {ds}: sample {sid} lacks a score for family={fam} instance={inst}"
                )
    return cache, labels


def families_in(cache: CachedPredictor, dataset: str | None = None) -> dict[str, int]:
    """Family name -> instance count, in first-seen order."""
    out: dict[str, set] = {}
    for ds, _, fam, inst in cache.table:
        if dataset is None or ds == dataset:
            out.setdefault(fam, set()).add(inst)
    return {f: len(s) for f, s in out.items()}


def instance_scores(cache: CachedPredictor, dataset: str, sample_ids, families) -> np.ndarray:
    """Stack cached scores into an array of shape (n_samples, n_families, n_instances)."""
    counts = families_in(cache, dataset)
    for fam in families:
        if fam not in counts:
            raise MissingPrediction(f"dataset {dataset!r} has no predictions for family {fam!r}")
    m = max(counts[f] for f in families)
    out = np.empty((len(sample_ids), len(families), m))
    tab = cache.table
    for n, sid in enumerate(sample_ids):
        for f, fam in enumerate(families):
            for i in range(m):
                key = (dataset, sid, fam, i)
                if key not in tab:
                    raise MissingPrediction(f"no prediction for dataset={dataset!r} sample_id={sid!r} "
                                            f"family={fam!r} instance={i}")
                out[n, f, i] = tab[key]
    return out


# --------------------------------------------------------------------------- splits


@dataclass(frozen=True)
class SplitAssignment:
    ratios: tuple
    seed: int
    assignment: dict

    def __getitem__(self, sample_id):
        return self.assignment[sample_id]

    def members(self, split: str) -> list[str]:
        return [s for s, sp in self.assignment.items() if sp == split]


def _unit_hash(sample_id, seed: int) -> float:
    h = hashlib.blake2b(f"{seed}\x1f{sample_id}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "big") / 2.0**64


def assign_splits(sample_ids, ratios=(0.70, 0.15, 0.15), seed: int = 0) -> SplitAssignment:
    """Hash each id with the seed into [0, 1) and bucket by cumulative ratio."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 or not math.isfinite(r) for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise BadRatios(f"split ratios must be three non-negative reals summing to 1, got {ratios}")
    c_train, c_val = ratios[0], ratios[0] + ratios[1]
    out = {}
    for sid in sample_ids:
        u = _unit_hash(sid, seed)
        out[sid] = "train" if u < c_train else ("val" if u < c_val else "test")
    return SplitAssignment(ratios, seed, out)


# --------------------------------------------------------------------------- synthetic


@dataclass
class SyntheticSpec:
    """Generator knobs.

    Each family sees one contiguous block of the feature vector. For every
    sample, family f's block sits on the cluster centre (``+-1`` along the
    block diagonal) of the true label with probability ``r_f`` and of a fair
    coin-flip label otherwise, plus isotropic noise of std
    ``(1 - r_f) * feature_noise``. ``r_f = 0`` carries no signal and
    ``r_f = 1`` is noise-free and separable. Families err on independent
    subsets of samples, and because the noise widens as ``r_f`` falls, a scorer
    fitted at high reliability turns confidently unreliable when its family is
    evaluated at a lower one, which is the transfer failure the shifted twin
    dataset models.
    """

    n_train: int = 5000
    n_val: int = 1000
    n_test: int = 1000
    feature_dim: int = 12
    reliabilities: tuple = (0.9, 0.7, 0.5)
    sigma_inst: float = 0.1
    shifted_reliabilities: tuple = (0.9, 0.2, 0.2)
    fake_fraction: float = 0.5
    feature_noise: float = 2.0
    name: str = "d1"
    shifted_name: str = "d2"
    seed: int = 0

    def validate(self) -> None:
        if min(self.n_train, self.n_val, self.n_test) < 0 or self.n_train + self.n_val + self.n_test == 0:
            raise BadSpec("split sizes must be non-negative with at least one sample")
        if not self.reliabilities:
            raise BadSpec("need at least one family reliability")
        if self.feature_dim < len(self.reliabilities):
            raise BadSpec("feature_dim must give every family at least one component")
        for r in tuple(self.reliabilities) + tuple(self.shifted_reliabilities):
            if not (0.0 <= r <= 1.0):
                raise BadSpec(f"reliabilities must lie in [0, 1], got {r}")
        if self.shifted_reliabilities and len(self.shifted_reliabilities) != len(self.reliabilities):
            raise BadSpec("shifted_reliabilities must have one entry per family")
        if not (self.sigma_inst >= 0):
            raise BadSpec("sigma_inst must be >= 0")
        if not (self.feature_noise >= 0):
            raise BadSpec("feature_noise must be >= 0")
        if not (0.0 < self.fake_fraction < 1.0):
            raise BadSpec("fake_fraction must lie in (0, 1)")
        if self.name == self.shifted_name:
            raise BadSpec("dataset names must differ")


def imbalanced_preset(**overrides) -> SyntheticSpec:
    """Fake-heavy class balance for stress tests (a 2:1 fake:real ratio)."""
    return SyntheticSpec(**{"fake_fraction": 2.0 / 3.0, **overrides})


@dataclass
class Dataset:
    name: str
    sample_ids: list
    split: np.ndarray
    X: np.ndarray
    y: np.ndarray
    blocks: list  # per-family column index arrays
    reliabilities: tuple = ()
    sigma_inst: float = 0.0
    noise_seed: int = 0

    def __len__(self):
        return len(self.sample_ids)

    def mask(self, split: str) -> np.ndarray:
        return self.split == split

    def family_view(self, family: int, split: str | None = None) -> np.ndarray:
        rows = slice(None) if split is None else self.mask(split)
        return self.X[rows][:, self.blocks[family]]

    def instance_view(self, family: int, slot: int, split: str = "train") -> np.ndarray:
        """Family block of ``split`` with a fixed per-instance perturbation of std ``sigma_inst``.

        The perturbation is drawn for the whole dataset then subset, so it does
        not depend on which split is requested.
        """
        base = self.X[:, self.blocks[family]]
        if self.sigma_inst > 0:
            rng = np.random.default_rng([self.noise_seed, family, slot])
            base = base + self.sigma_inst * rng.standard_normal(base.shape)
        return base[self.mask(split)]

    def labels(self, split: str | None = None) -> np.ndarray:
        return self.y if split is None else self.y[self.mask(split)]

    def ids(self, split: str | None = None) -> list:
        if split is None:
            return list(self.sample_ids)
        return [s for s, m in zip(self.sample_ids, self.mask(split)) if m]


def family_blocks(feature_dim: int, families: int) -> list:
    return [np.asarray(b) for b in np.array_split(np.arange(feature_dim), families)]


def family_auc(r: float, feature_noise: float) -> float:
    """Best achievable AUC from one family's block alone.

    The block shows the true label with probability q = (1 + r) / 2. Clusters
    separated by 2 / sd give a clean AUC c = Phi(sqrt 2 / sd); mixing in the
    mislabelled mass gives q^2 c + q(1 - q) + (1 - q)^2 (1 - c).
    """
    q = 0.5 * (1.0 + r)
    sd = (1.0 - r) * feature_noise
    clean = 1.0 if sd == 0 else 0.5 * (1.0 + math.erf(1.0 / sd))
    return q * q * clean + q * (1.0 - q) + (1.0 - q) ** 2 * (1.0 - clean)


def _generate_one(spec: SyntheticSpec, name: str, rel, stream: int) -> Dataset:
    rng = np.random.default_rng([spec.seed, stream])
    sizes = {"train": spec.n_train, "val": spec.n_val, "test": spec.n_test}
    n = sum(sizes.values())
    split = np.concatenate([np.full(k, s, dtype=object) for s, k in sizes.items()]).astype(str)
    y = (rng.random(n) < spec.fake_fraction).astype(np.int64)
    blocks = family_blocks(spec.feature_dim, len(rel))
    X = np.empty((n, spec.feature_dim))
    for f, cols in enumerate(blocks):
        r, d = float(rel[f]), len(cols)
        shown = np.where(rng.random(n) < r, y, rng.integers(0, 2, size=n))
        centre = ((2 * shown - 1) / math.sqrt(d))[:, None]
        X[:, cols] = centre + (1.0 - r) * spec.feature_noise * rng.standard_normal((n, d))
    ids = [f"{name}-{k:06d}" for k in range(n)]
    return Dataset(name, ids, split, X, y, blocks, tuple(float(r) for r in rel), spec.sigma_inst,
                   noise_seed=2 * spec.seed + stream)


@dataclass
class SyntheticBundle:
    datasets: dict
    informativeness: dict  # dataset -> per-family Bayes AUC

    def __getitem__(self, name) -> Dataset:
        return self.datasets[name]


def generate_synthetic(spec: SyntheticSpec) -> SyntheticBundle:
    """Build the base dataset and, when shift reliabilities are given, its shifted twin."""
    spec.validate()
    datasets = {spec.name: _generate_one(spec, spec.name, spec.reliabilities, 0)}
    if spec.shifted_reliabilities:
        datasets[spec.shifted_name] = _generate_one(spec, spec.shifted_name, spec.shifted_reliabilities, 1)
    info = {k: [family_auc(r, spec.feature_noise) for r in d.reliabilities] for k, d in datasets.items()}
    return SyntheticBundle(datasets, info)


def augment(ds: Dataset, fraction: float = 0.3, jitter: float = 0.1, seed: int = 0) -> Dataset:
    """Append label-preserving jittered copies of ``fraction`` of the train split."""
    if fraction < 0 or jitter < 0:
        raise BadSpec("augmentation fraction and jitter must be >= 0")
    rng = np.random.default_rng([seed, 7])
    train_idx = np.flatnonzero(ds.mask("train"))
    k = int(round(fraction * len(train_idx)))
    pick = np.sort(rng.choice(train_idx, size=k, replace=False))
    X_new = ds.X[pick] + jitter * rng.standard_normal((k, ds.X.shape[1]))
    ids_new = [f"{ds.sample_ids[i]}-aug" for i in pick]
    return Dataset(
        ds.name,
        list(ds.sample_ids) + ids_new,
        np.concatenate([ds.split, np.full(k, "train")]),
        np.vstack([ds.X, X_new]),
        np.concatenate([ds.y, ds.y[pick]]),
        ds.blocks,
        ds.reliabilities,
        ds.sigma_inst,
        ds.noise_seed,
    )


def write_synthetic(ds: Dataset, directory) -> tuple[Path, Path]:
    """Write ``samples_<name>.csv`` and ``features_<name>.csv``."""
    directory = Path(directory)
    samples = directory / f"samples_{ds.name}.csv"
    feats = directory / f"features_{ds.name}.csv"
    with samples.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLES_HEADER)
        for sid, sp, lab in zip(ds.sample_ids, ds.split, ds.y):
            w.writerow([sid, ds.name, sp, int(lab)])
    with feats.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id"] + [f"x{j}" for j in range(ds.X.shape[1])])
        for sid, row in zip(ds.sample_ids, ds.X):
            w.writerow([sid] + [repr(float(v)) for v in row])
    return samples, feats


def read_synthetic(directory, spec: SyntheticSpec, name: str) -> Dataset:
    """Inverse of :func:`write_synthetic` for a dataset produced from ``spec``."""
    directory = Path(directory)
    if name == spec.name:
        stream, rel = 0, spec.reliabilities
    elif name == spec.shifted_name:
        stream, rel = 1, spec.shifted_reliabilities
    else:
        raise BadSpec(f"unknown dataset {name!r}; expected {spec.name!r} or {spec.shifted_name!r}")
    meta = {}
    with (directory / f"samples_{name}.csv").open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for sid, _, sp, lab in reader:
            meta[sid] = (sp, int(lab))
    ids, rows = [], []
    with (directory / f"features_{name}.csv").open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    X = np.asarray(rows, dtype=np.float64)
    split = np.array([meta[s][0] for s in ids])
    y = np.array([meta[s][1] for s in ids], dtype=np.int64)
    return Dataset(name, ids, split, X, y, family_blocks(X.shape[1], len(rel)),
                   tuple(float(r) for r in rel), spec.sigma_inst, noise_seed=2 * spec.seed + stream)
