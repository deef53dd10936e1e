"""The run configuration and its INI-style file format.

Every knob lives in one file with a section per component. ``dump_config``
writes values with ``repr`` so that ``load_config(dump_config(cfg)) == cfg``
exactly.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

from .data import SyntheticSpec
from .domain import EnsembleConfig
from .errors import BadConfig
from .training import TrainingConfig, fusion_defaults

OUT_ENV = "TWOTIER_OUT"


@dataclass
class EnsembleSection:
    families: int = 3
    instances_per_family: int = 3
    family_names: tuple = ()
    seeds: tuple = ()
    ensemble_name: str = "Ensemble"


@dataclass
class SplitSection:
    ratios: tuple = (0.70, 0.15, 0.15)
    seed: int = 0


@dataclass
class MetricsSection:
    threshold: float = 0.5
    # "fake", "real", or "both"
    positive_class: str = "fake"


@dataclass
class RunSection:
    out_dir: str = "runs/default"
    seed: int = 0
    dataset: str = "d1"
    augment_fraction: float = 0.3
    augment_jitter: float = 0.1
    predictions: str = ""


@dataclass
class RunConfig:
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    split: SplitSection = field(default_factory=SplitSection)
    train_base: TrainingConfig = field(default_factory=TrainingConfig)
    train_fusion: TrainingConfig = field(default_factory=fusion_defaults)
    metrics: MetricsSection = field(default_factory=MetricsSection)
    run: RunSection = field(default_factory=RunSection)

    def ensemble_config(self, families: int | None = None, names=None) -> EnsembleConfig:
        e = self.ensemble
        fam = families if families is not None else e.families
        return EnsembleConfig(
            families=fam,
            instances_per_family=e.instances_per_family,
            seeds=tuple(e.seeds),
            family_names=tuple(names) if names is not None else tuple(e.family_names),
            base_seed=self.run.seed,
        )

    def with_seed(self, seed: int) -> "RunConfig":
        """Apply one global seed to every seeded component."""
        return dataclasses.replace(
            self,
            synthetic=dataclasses.replace(self.synthetic, seed=seed),
            split=dataclasses.replace(self.split, seed=seed),
            train_base=dataclasses.replace(self.train_base, seed=seed),
            train_fusion=dataclasses.replace(self.train_fusion, seed=seed),
            run=dataclasses.replace(self.run, seed=seed),
        )


_COMMENTS = {
    "ensemble": "architecture families, instances per family, optional per-instance seeds",
    "synthetic": "desk-scale synthetic data; reliabilities are per family, in [0, 1]",
    "split": "hash-based train/val/test assignment for user data without splits",
    "train_base": "phase 1: each instance trained independently (AdamW, cosine warm restarts, early stopping)",
    "train_fusion": "phase 2: frozen instances, only the fusion logits are learned",
    "metrics": "decision threshold; positive_class is fake, real or both",
    "run": "output directory (overridable by $%s), global seed, dataset tag" % OUT_ENV,
}


# element type for tuple fields whose default is empty
_EMPTY_TUPLE_PROTOS = {"seeds": (0,), "family_names": ("",), "shifted_reliabilities": (0.0,)}


def _fmt(value) -> str:
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, default):
    text = text.strip()
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        if not text:
            return ()
        parts = [p.strip() for p in text.split(",")]
        proto = default[0] if default else ""
        return tuple(_parse(p, proto) for p in parts)
    return text


def dump_config(cfg: RunConfig) -> str:
    buf = io.StringIO()
    for section in dataclasses.fields(cfg):
        obj = getattr(cfg, section.name)
        buf.write(f"# {_COMMENTS[section.name]}\n[{section.name}]\n")
        for f in dataclasses.fields(obj):
            buf.write(f"{f.name} = {_fmt(getattr(obj, f.name))}\n")
        buf.write("\n")
    return buf.getvalue()


def load_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise BadConfig(f"cannot parse config: {exc}") from None
    base = RunConfig()
    unknown = set(parser.sections()) - {f.name for f in dataclasses.fields(base)}
    if unknown:
        raise BadConfig(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    for section in dataclasses.fields(base):
        default_obj = getattr(base, section.name)
        values = {}
        if parser.has_section(section.name):
            known = {f.name: f for f in dataclasses.fields(default_obj)}
            for key, raw in parser.items(section.name):
                if key not in known:
                    raise BadConfig(f"unknown key {key!r} in section [{section.name}]")
                dflt = getattr(default_obj, key)
                if isinstance(dflt, tuple) and not dflt:
                    dflt = _EMPTY_TUPLE_PROTOS.get(key, dflt)
                try:
                    values[key] = _parse(raw, dflt)
                except ValueError as exc:
                    raise BadConfig(f"[{section.name}] {key}: {exc}") from None
        try:
            kwargs[section.name] = dataclasses.replace(default_obj, **values)
        except (TypeError, ValueError) as exc:
            raise BadConfig(f"[{section.name}]: {exc}") from None
    cfg = RunConfig(**kwargs)
    cfg.synthetic.validate()
    if cfg.metrics.positive_class not in ("fake", "real", "both"):
        raise BadConfig("metrics.positive_class must be fake, real or both")
    return cfg


def read_config(path) -> RunConfig:
    return load_config(Path(path).read_text(encoding="utf-8"))


def resolve_out_dir(cfg: RunConfig, flag: str | None) -> Path:
    """--out beats $TWOTIER_OUT beats the config file."""
    if flag:
        return Path(flag)
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    return Path(cfg.run.out_dir)
