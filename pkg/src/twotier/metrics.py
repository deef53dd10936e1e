"""AUC, threshold metrics, and the five-column result tables.

``auc`` uses the rank form of the Mann-Whitney statistic. ``auc_pairs`` (brute
force over every positive/negative pair) and ``auc_trapezoid`` (area under the
empirical ROC polyline) are independent implementations kept for cross-checks.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

import numpy as np

from .errors import DegenerateClasses, EmptyInput, IncompleteGrid, LengthMismatch
from .plots import heatmap_svg

METRIC_COLUMNS = ("AUC", "Accuracy", "Precision", "Recall", "F1")
MATRIX_COLUMNS = ("AUC", "Accuracy", "F1")


@dataclass(frozen=True)
class ScoredSet:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).ravel()
        t = np.asarray(self.labels).ravel().astype(np.int64)
        if s.shape != t.shape:
            raise LengthMismatch(f"{s.size} scores but {t.size} labels")
        if np.any((s < 0) | (s > 1) | np.isnan(s)):
            raise ValueError("scores must be probabilities in [0, 1]")
        if np.any((t != 0) & (t != 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", t)

    def __len__(self):
        return self.scores.size


def _split_classes(ss: ScoredSet):
    pos = ss.scores[ss.labels == 1]
    neg = ss.scores[ss.labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise DegenerateClasses(
            f"AUC needs both classes, got {pos.size} positive and {neg.size} negative samples"
        )
    return pos, neg


def _ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties given their average rank."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], xs.size]
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(x.size)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auc(ss: ScoredSet) -> float:
    pos, neg = _split_classes(ss)
    r = _ranks(np.concatenate([pos, neg]))
    n_pos, n_neg = pos.size, neg.size
    u = r[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_pairs(ss: ScoredSet) -> float:
    pos, neg = _split_classes(ss)
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return float(wins / diff.size)


def roc_curve(ss: ScoredSet):
    """Integer (FP, TP) counts at each distinct threshold, starting from (0, 0)."""
    order = np.argsort(-ss.scores, kind="mergesort")
    s, t = ss.scores[order], ss.labels[order]
    last = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(t)[last]
    fp = np.cumsum(1 - t)[last]
    return np.r_[0, fp], np.r_[0, tp]


def auc_trapezoid(ss: ScoredSet) -> float:
    _split_classes(ss)
    fp, tp = roc_curve(ss)
    # doubled trapezoid areas stay integral
    twice = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    return twice / (2.0 * fp[-1] * tp[-1])


@dataclass(frozen=True)
class MetricsReport:
    auc: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    threshold: float = 0.5
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    flags: tuple = ()

    def values(self) -> tuple:
        return (self.auc, self.accuracy, self.precision, self.recall, self.f1)

    def as_dict(self) -> dict:
        d = dict(zip(METRIC_COLUMNS, self.values()))
        d.update(threshold=self.threshold, TP=self.tp, FP=self.fp, TN=self.tn, FN=self.fn, flags=list(self.flags))
        return d


def _ratio(num, den, flag, flags):
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def confusion(ss: ScoredSet, threshold: float = 0.5, positive: int = 1) -> MetricsReport:
    """Threshold metrics with ``AUC`` left as NaN (see :func:`evaluate`).

    ``score >= threshold`` predicts fake. With ``positive=0`` the real class is
    treated as positive for precision/recall/F1; the prediction rule is unchanged.
    """
    if len(ss) == 0:
        raise EmptyInput("cannot score an empty set")
    pred_fake = ss.scores >= threshold
    truth_pos = ss.labels == positive
    pred_pos = pred_fake if positive == 1 else ~pred_fake
    tp = int(np.count_nonzero(pred_pos & truth_pos))
    fp = int(np.count_nonzero(pred_pos & ~truth_pos))
    fn = int(np.count_nonzero(~pred_pos & truth_pos))
    tn = int(np.count_nonzero(~pred_pos & ~truth_pos))
    flags: list = []
    precision = _ratio(tp, tp + fp, "precision_undefined", flags)
    recall = _ratio(tp, tp + fn, "recall_undefined", flags)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1_undefined", flags) if tp else 0.0
    accuracy = (tp + tn) / (tp + fp + tn + fn)
    return MetricsReport(float("nan"), accuracy, precision, recall, f1, threshold, tp, fp, tn, fn, tuple(flags))


def evaluate(ss: ScoredSet, threshold: float = 0.5, positive: int = 1) -> MetricsReport:
    c = confusion(ss, threshold, positive)
    a = auc(ss) if positive == 1 else auc(ScoredSet(1.0 - ss.scores, 1 - ss.labels))
    return MetricsReport(a, c.accuracy, c.precision, c.recall, c.f1, c.threshold, c.tp, c.fp, c.tn, c.fn, c.flags)


def percent(x: float) -> str:
    """0.98765 -> '98.76%', 0.98775 -> '98.78%' (round-half-even on the shortest decimal repr)."""
    if x != x:
        return "n/a"
    d = (Decimal(repr(float(x))) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN)
    return f"{d}%"


@dataclass
class Table:
    """Rows of five-metric cells, with one column group per evaluation dataset."""

    title: str = ""
    groups: list = field(default_factory=list)
    rows: list = field(default_factory=list)  # (model, {group: MetricsReport})

    def header(self) -> list:
        cols = ["Architectures"]
        for g in self.groups:
            cols += [f"{g} {m}".strip() for m in METRIC_COLUMNS]
        return cols

    def cells(self) -> list:
        out = []
        for model, by_group in self.rows:
            line = [model]
            for g in self.groups:
                rep = by_group.get(g)
                line += [percent(v) for v in rep.values()] if rep else [""] * len(METRIC_COLUMNS)
            out.append(line)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        w.writerows(self.cells())
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = []
        if self.title:
            lines += [f"### {self.title}", ""]
        top = [""]
        for g in self.groups:
            top += [g] + [""] * (len(METRIC_COLUMNS) - 1)
        second = ["Architectures"] + list(METRIC_COLUMNS) * len(self.groups)
        if any(self.groups):
            lines.append("| " + " | ".join(top) + " |")
            lines.append("|" + "---|" * len(top))
            lines.append("| " + " | ".join(second) + " |")
        else:
            lines.append("| " + " | ".join(second) + " |")
            lines.append("|" + "---|" * len(second))
        for line in self.cells():
            lines.append("| " + " | ".join(line) + " |")
        return "\n".join(lines) + "\n"


def report_table(rows, threshold: float = 0.5, title: str = "", group: str = "") -> Table:
    """One row per (model name, ScoredSet): AUC, Accuracy, Precision, Recall, F1 as percents."""
    table = Table(title, [group])
    for model, ss in rows:
        table.rows.append((model, {group: evaluate(ss, threshold)}))
    return table


def grouped_table(title: str, groups: dict) -> Table:
    """Merge per-dataset result lists ``{dataset: [(model, MetricsReport), ...]}`` side by side."""
    table = Table(title, list(groups))
    order: list = []
    merged: dict = {}
    for g, entries in groups.items():
        for model, rep in entries:
            if model not in merged:
                order.append(model)
                merged[model] = {}
            merged[model][g] = rep
    table.rows = [(m, merged[m]) for m in order]
    return table


def performance_matrix(cells: dict, out_dir, models=None, datasets=None, augmentations=None, stem="performance_matrix"):
    """Write the model x dataset x augmentation grid of AUC/Accuracy/F1 as CSV plus an SVG heatmap.

    ``cells`` maps ``(model, dataset, augmentation)`` to a MetricsReport, or to
    None for a cell that is deliberately absent. Keys missing from ``cells``
    raise IncompleteGrid.
    """
    models = list(models) if models is not None else list(dict.fromkeys(k[0] for k in cells))
    datasets = list(datasets) if datasets is not None else list(dict.fromkeys(k[1] for k in cells))
    augs = list(augmentations) if augmentations is not None else list(dict.fromkeys(k[2] for k in cells))
    keys = [(m, d, a) for a in augs for d in datasets for m in models]
    missing = [k for k in keys if k not in cells]
    if missing:
        raise IncompleteGrid(missing)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "dataset", "augmentation", *MATRIX_COLUMNS])
        for k in keys:
            rep = cells[k]
            vals = [rep.auc, rep.accuracy, rep.f1] if rep is not None else [None] * 3
            w.writerow([*k, *("" if v is None else repr(float(v)) for v in vals)])

    row_labels = [f"{m} | {d} | {a}" for (m, d, a) in keys]
    grid = []
    for k in keys:
        rep = cells[k]
        grid.append([rep.auc, rep.accuracy, rep.f1] if rep is not None else [None] * 3)
    svg_path = out_dir / f"{stem}.svg"
    svg_path.write_text(heatmap_svg(grid, row_labels, list(MATRIX_COLUMNS), title="Performance matrix"),
                        encoding="utf-8")
    return csv_path, svg_path
