"""File-based pipeline stages behind the CLI.

Layout of a run directory::

    data/                       samples_<ds>.csv, features_<ds>.csv, config.ini
    models/<tag>/base/          learners.json, history_base.csv, predictions.csv, config.ini
    models/<tag>/fusion/        fusion.json, history_fusion.csv, alpha_trajectory.svg, config.ini
    eval/<tag>__<ds>/           table.csv, table.md, metrics.json, config.ini
    eval/cross__<tag>__<ds>/    same files, one column group per transfer direction
    report/                     report.md, tables, performance_matrix.{csv,svg}

``<tag>`` is the training dataset name, suffixed ``-aug`` when the train split
was augmented. Stages read only files written by earlier stages.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
from pathlib import Path

import numpy as np

from .config import RunConfig, dump_config
from .data import (
    PredictionRecord,
    augment,
    families_in,
    generate_synthetic,
    instance_scores,
    load_prediction_records,
    read_synthetic,
    write_prediction_records,
    write_synthetic,
)
from .domain import EnsembleConfig
from .ensemble import FusionWeights, sigmoid
from .errors import BadConfig, MissingArtifacts
from .learners import ReferenceLearner, forward_batch
from .metrics import MetricsReport, ScoredSet, evaluate, grouped_table, performance_matrix
from .plots import line_chart_svg
from .training import History, train_base_instances, train_fusion

log = logging.getLogger(__name__)


def model_tag(dataset: str, augmented: bool = False) -> str:
    return f"{dataset}-aug" if augmented else dataset


def _mkdir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc.strerror or exc}") from None
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    return path


def _write_text(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def _snapshot(cfg: RunConfig, directory: Path) -> Path:
    return _write_text(directory / "config.ini", dump_config(cfg))


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def _dump_json(path: Path, obj) -> Path:
    return _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------- synth-data


def cmd_synth_data(cfg: RunConfig, out: Path) -> list[Path]:
    data_dir = _mkdir(Path(out) / "data")
    bundle = generate_synthetic(cfg.synthetic)
    written = []
    for ds in bundle.datasets.values():
        written += write_synthetic(ds, data_dir)
    info = {k: [round(v, 6) for v in vals] for k, vals in bundle.informativeness.items()}
    written.append(_dump_json(data_dir / "informativeness.json", {"bayes_family_auc": info}))
    written.append(_snapshot(cfg, data_dir))
    return written


def _synthetic_names(cfg: RunConfig) -> list[str]:
    names = [cfg.synthetic.name]
    if cfg.synthetic.shifted_reliabilities:
        names.append(cfg.synthetic.shifted_name)
    return names


def _load_synthetic(cfg: RunConfig, out: Path):
    data_dir = Path(out) / "data"
    datasets = {}
    for name in _synthetic_names(cfg):
        need = [data_dir / f"samples_{name}.csv", data_dir / f"features_{name}.csv"]
        missing = [str(p) for p in need if not p.exists()]
        if missing:
            raise MissingArtifacts(f"synthetic data not found ({', '.join(missing)}); run synth-data first")
        datasets[name] = read_synthetic(data_dir, cfg.synthetic, name)
    return datasets


# --------------------------------------------------------------------------- train


def _learners_to_json(ens: EnsembleConfig, learners) -> dict:
    return {
        "families": list(ens.family_names),
        "instances_per_family": ens.instances_per_family,
        "learners": [
            [
                {
                    "seed": l.init_seed,
                    "layer_sizes": l.layer_sizes,
                    "weights": [W.tolist() for W in l.weights],
                    "biases": [b.tolist() for b in l.biases],
                }
                for l in fam
            ]
            for fam in learners
        ],
    }


def learners_from_json(obj: dict) -> list:
    out = []
    for fam in obj["learners"]:
        out.append([
            ReferenceLearner(
                list(d["layer_sizes"]),
                [np.asarray(W, dtype=np.float64) for W in d["weights"]],
                [np.asarray(b, dtype=np.float64) for b in d["biases"]],
                d["seed"],
            )
            for d in fam
        ])
    return out


def _train_base(cfg: RunConfig, out: Path, dataset: str, augmented: bool) -> Path:
    datasets = _load_synthetic(cfg, out)
    if dataset not in datasets:
        raise BadConfig(f"unknown dataset {dataset!r}; available: {', '.join(datasets)}")
    ds = datasets[dataset]
    if augmented:
        ds = augment(ds, cfg.run.augment_fraction, cfg.run.augment_jitter, seed=cfg.run.seed)
    ens = cfg.ensemble_config(families=len(ds.blocks))
    learners, histories = train_base_instances(ens, cfg.train_base, ds)

    base_dir = _mkdir(Path(out) / "models" / model_tag(dataset, augmented) / "base")
    _dump_json(base_dir / "learners.json", _learners_to_json(ens, learners))
    rows = []
    for f, fam_h in enumerate(histories):
        for i, h in enumerate(fam_h):
            rows += [[ens.family_names[f], i, *r] for r in h.rows]
            for msg in h.warnings:
                log.warning("%s[%d]: %s", ens.family_names[f], i, msg)
    _write_csv(base_dir / "history_base.csv", ["family", "instance", "epoch", "train_loss", "val_loss", "lr"], rows)

    # score every sample of every known dataset with the frozen instances
    records = []
    for other in datasets.values():
        for f, fam in enumerate(learners):
            X = other.family_view(f)
            for i, learner in enumerate(fam):
                scores = sigmoid(forward_batch(learner, X))
                records += [
                    PredictionRecord(sid, other.name, sp, ens.family_names[f], i, float(s), int(t))
                    for sid, sp, s, t in zip(other.sample_ids, other.split, scores, other.y)
                ]
    write_prediction_records(base_dir / "predictions.csv", records)
    _snapshot(cfg, base_dir)
    return base_dir


def _resolve_predictions(cfg: RunConfig, out: Path, tag: str, override: str | None) -> Path:
    for candidate in (override, cfg.run.predictions):
        if candidate:
            p = Path(candidate)
            if not p.exists():
                raise MissingArtifacts(f"prediction cache {p} does not exist")
            return p
    p = Path(out) / "models" / tag / "base" / "predictions.csv"
    if not p.exists():
        raise MissingArtifacts(
            f"phase 'fusion' needs base artifacts ({p}) or a prediction cache (--predictions / run.predictions)"
        )
    return p


def _split_matrix(cache, labels, dataset, split, families):
    ids = labels.samples(dataset, split)
    S = instance_scores(cache, dataset, ids, families)
    return ids, S, labels.labels(dataset, ids)


def _history_csv(path: Path, hist: History) -> Path:
    return _write_csv(path, hist.columns, hist.rows)


def _train_fusion(cfg: RunConfig, out: Path, dataset: str, augmented: bool, predictions: str | None) -> Path:
    tag = model_tag(dataset, augmented)
    pred_path = _resolve_predictions(cfg, out, tag, predictions)
    cache, labels = load_prediction_records(pred_path)
    if dataset not in labels.datasets():
        raise BadConfig(f"dataset {dataset!r} not in {pred_path}; available: {', '.join(labels.datasets())}")
    families = list(families_in(cache, dataset))
    _, S_tr, y_tr = _split_matrix(cache, labels, dataset, "train", families)
    _, S_va, y_va = _split_matrix(cache, labels, dataset, "val", families)
    result = train_fusion(S_tr.mean(axis=2), y_tr, S_va.mean(axis=2), y_va, cfg.train_fusion)

    fusion_dir = _mkdir(Path(out) / "models" / tag / "fusion")
    for msg in result.history.warnings:
        log.warning("fusion: %s", msg)
    try:
        pred_ref = os.path.relpath(pred_path, Path(out))
    except ValueError:
        pred_ref = str(pred_path)
    _dump_json(fusion_dir / "fusion.json", {
        "families": families,
        "w": result.weights.w.tolist(),
        "alpha": result.weights.alpha.tolist(),
        "trained_on": dataset,
        "augmented": augmented,
        "predictions": pred_ref,
        "best_epoch": result.history.best_epoch,
        "warnings": result.history.warnings,
    })
    _history_csv(fusion_dir / "history_fusion.csv", result.history)
    epochs = result.history.column("epoch")
    series = {fam: result.history.column(f"alpha_{k}") for k, fam in enumerate(families)}
    _write_text(fusion_dir / "alpha_trajectory.svg",
                line_chart_svg(epochs, series, title=f"Fusion weights, trained on {tag}"))
    _snapshot(cfg, fusion_dir)
    return fusion_dir


def cmd_train(cfg: RunConfig, out: Path, phase: str, dataset: str | None = None, augmented: bool = False,
              predictions: str | None = None) -> Path:
    dataset = dataset or cfg.run.dataset
    if phase == "base":
        return _train_base(cfg, out, dataset, augmented)
    if phase == "fusion":
        return _train_fusion(cfg, out, dataset, augmented, predictions)
    raise BadConfig(f"phase must be 'base' or 'fusion', got {phase!r}")


# --------------------------------------------------------------------------- evaluate


def _load_model(out: Path, tag: str):
    fusion_file = Path(out) / "models" / tag / "fusion" / "fusion.json"
    if not fusion_file.exists():
        raise MissingArtifacts(f"no trained fusion model at {fusion_file}; run train --phase fusion first")
    model = json.loads(fusion_file.read_text(encoding="utf-8"))
    pred = Path(model["predictions"])
    if not pred.is_absolute():
        pred = Path(out) / pred
    if not pred.exists():
        raise MissingArtifacts(f"prediction cache {pred} referenced by {fusion_file} is missing")
    return model, pred


def _direction_rows(cfg: RunConfig, model: dict, pred: Path, eval_ds: str, positive: int):
    cache, labels = load_prediction_records(pred)
    if eval_ds not in labels.datasets():
        raise BadConfig(f"unknown dataset tag {eval_ds!r}; available: {', '.join(labels.datasets())}")
    families = model["families"]
    _, S, y = _split_matrix(cache, labels, eval_ds, "test", families)
    if len(y) == 0:
        raise BadConfig(f"dataset {eval_ds!r} has no test split")
    P = S.mean(axis=2)
    fused = FusionWeights(model["w"]).predict(P)
    thr = cfg.metrics.threshold
    rows = [(fam, evaluate(ScoredSet(P[:, f], y), thr, positive)) for f, fam in enumerate(families)]
    rows.append((cfg.ensemble.ensemble_name, evaluate(ScoredSet(fused, y), thr, positive)))
    return rows


def _positives(cfg: RunConfig):
    pc = cfg.metrics.positive_class
    return {"fake": [("", 1)], "real": [("", 0)], "both": [("", 1), ("_real_positive", 0)]}[pc]


def _report_to_json(rep: MetricsReport) -> dict:
    return rep.as_dict()


def _write_eval(cfg: RunConfig, directory: Path, title: str, meta: dict, directions) -> Path:
    """``directions`` is a list of (group label, trained tag, eval dataset, rows-by-suffix)."""
    _mkdir(directory)
    for suffix, _ in _positives(cfg):
        table = grouped_table(title, {label: rows[suffix] for label, _, _, rows in directions})
        _write_text(directory / f"table{suffix}.csv", table.to_csv())
        _write_text(directory / f"table{suffix}.md", table.to_markdown())
    meta = dict(meta)
    meta["title"] = title
    meta["groups"] = [
        {"label": label, "trained_on": tag, "eval_dataset": ds,
         "rows": [{"model": m, **_report_to_json(r)} for m, r in rows[""]]}
        for label, tag, ds, rows in directions
    ]
    _dump_json(directory / "metrics.json", meta)
    _snapshot(cfg, directory)
    return directory


def _rows_all(cfg, model, pred, eval_ds):
    return {suffix: _direction_rows(cfg, model, pred, eval_ds, pos) for suffix, pos in _positives(cfg)}


def cmd_evaluate(cfg: RunConfig, out: Path, dataset: str | None = None, augmented: bool = False,
                 eval_dataset: str | None = None) -> Path:
    dataset = dataset or cfg.run.dataset
    eval_ds = eval_dataset or dataset
    tag = model_tag(dataset, augmented)
    model, pred = _load_model(out, tag)
    rows = _rows_all(cfg, model, pred, eval_ds)
    kind = "intra" if eval_ds == model["trained_on"] else "cross"
    title = f"Evaluation on {eval_ds} (trained on {tag})"
    meta = {"kind": kind, "trained_on": model["trained_on"], "augmented": augmented}
    return _write_eval(cfg, Path(out) / "eval" / f"{tag}__{eval_ds}", title, meta,
                       [(eval_ds, tag, eval_ds, rows)])


def cmd_cross_eval(cfg: RunConfig, out: Path, dataset: str | None, eval_dataset: str,
                   augmented: bool = False) -> tuple[Path, list[str]]:
    """Evaluate the model trained on ``dataset`` against ``eval_dataset`` and, when a model
    trained on ``eval_dataset`` exists, the reverse direction too. Returns (dir, notices)."""
    dataset = dataset or cfg.run.dataset
    tag_a, tag_b = model_tag(dataset, augmented), model_tag(eval_dataset, augmented)
    notices = []
    model_a, pred_a = _load_model(out, tag_a)
    directions = [(eval_dataset, tag_a, eval_dataset, _rows_all(cfg, model_a, pred_a, eval_dataset))]
    if eval_dataset != dataset:
        try:
            model_b, pred_b = _load_model(out, tag_b)
        except MissingArtifacts as exc:
            notices.append(f"reverse direction {eval_dataset} -> {dataset} skipped: {exc}")
        else:
            directions.append((dataset, tag_b, dataset, _rows_all(cfg, model_b, pred_b, dataset)))
    if eval_dataset == dataset:
        title = f"Evaluation on {eval_dataset} (trained on {tag_a})"
        meta = {"kind": "intra", "trained_on": dataset, "augmented": augmented}
    else:
        title = "Cross-dataset evaluation" + (" (augmented training)" if augmented else "")
        meta = {"kind": "cross", "trained_on": dataset, "augmented": augmented}
    meta["notices"] = notices
    d = _write_eval(cfg, Path(out) / "eval" / f"cross__{tag_a}__{eval_dataset}", title, meta, directions)
    return d, notices


# --------------------------------------------------------------------------- report


def _report_from_json(d: dict) -> MetricsReport:
    return MetricsReport(d["AUC"], d["Accuracy"], d["Precision"], d["Recall"], d["F1"], d["threshold"],
                         d["TP"], d["FP"], d["TN"], d["FN"], tuple(d.get("flags", ())))


_TABLE_TITLES = {
    ("intra", False): "Intra-dataset evaluation, without augmentation",
    ("intra", True): "Intra-dataset evaluation, with augmentation",
    ("cross", False): "Cross-dataset evaluation, without augmentation",
    ("cross", True): "Cross-dataset evaluation, with augmentation",
}


def cmd_report(run_dir: Path) -> Path:
    run_dir = Path(run_dir)
    files = sorted((run_dir / "eval").glob("*/metrics.json")) if (run_dir / "eval").is_dir() else []
    if not files:
        raise MissingArtifacts(
            f"no completed evaluations under {run_dir}; expected eval/<tag>__<dataset>/metrics.json "
            "(from evaluate) or eval/cross__<tag>__<dataset>/metrics.json (from cross-eval)"
        )
    # (kind, augmented) -> group label -> rows; later files never silently replace earlier groups
    buckets: dict = {}
    matrix: dict = {}
    for path in files:
        meta = json.loads(path.read_text(encoding="utf-8"))
        key = (meta["kind"], bool(meta["augmented"]))
        for g in meta["groups"]:
            rows = [(r["model"], _report_from_json(r)) for r in g["rows"]]
            buckets.setdefault(key, {}).setdefault(g["label"], rows)
            if meta["kind"] == "intra":
                for model, rep in rows:
                    matrix[(model, g["eval_dataset"], "with" if meta["augmented"] else "without")] = rep

    report_dir = _mkdir(run_dir / "report")
    parts = ["# Results", ""]
    tables = []
    for key in sorted(buckets, key=lambda k: (k[0] != "intra", k[1])):
        table = grouped_table(_TABLE_TITLES[key], buckets[key])
        stem = f"{key[0]}_{'with' if key[1] else 'without'}_augmentation"
        _write_text(report_dir / f"{stem}.csv", table.to_csv())
        parts.append(table.to_markdown())
        tables.append(table)

    if matrix:
        # an incomplete model x dataset x augmentation grid raises IncompleteGrid
        augs = [a for a in ("without", "with") if any(k[2] == a for k in matrix)]
        performance_matrix(matrix, report_dir, augmentations=augs)
        parts += ["## Performance matrix", "", "![performance matrix](performance_matrix.svg)", "",
                  "Machine-readable: `performance_matrix.csv`.", ""]
    svgs = sorted((run_dir / "models").glob("*/fusion/alpha_trajectory.svg")) if (run_dir / "models").is_dir() else []
    if svgs:
        parts += ["## Fusion weight trajectories", ""]
        for svg in svgs:
            tag = svg.parent.parent.name
            target = report_dir / f"alpha_trajectory_{tag}.svg"
            shutil.copyfile(svg, target)
            parts += [f"![alpha trajectory {tag}]({target.name})", ""]
    _write_text(report_dir / "report.md", "\n".join(parts))
    return report_dir
