import dataclasses

import pytest

from twotier.config import OUT_ENV, RunConfig, dump_config, load_config, resolve_out_dir
from twotier.errors import BadConfig, BadSpec


def test_default_round_trip():
    cfg = RunConfig()
    text = dump_config(cfg)
    assert load_config(text) == cfg
    assert dump_config(load_config(text)) == text


def test_round_trip_with_overrides():
    cfg = RunConfig().with_seed(7)
    cfg = dataclasses.replace(
        cfg, ensemble=dataclasses.replace(cfg.ensemble, family_names=("a", "b", "c"), seeds=tuple(range(9))))
    assert load_config(dump_config(cfg)) == cfg


def test_seed_reaches_every_component():
    cfg = RunConfig().with_seed(11)
    assert cfg.synthetic.seed == cfg.train_base.seed == cfg.train_fusion.seed == cfg.run.seed == 11
    assert cfg.ensemble_config().base_seed == 11


def test_fusion_section_defaults():
    cfg = RunConfig()
    assert cfg.train_fusion.phase == "fusion"
    assert cfg.train_base.lr == 1e-4 and cfg.train_base.weight_decay == 1e-5


@pytest.mark.parametrize(
    "text, err",
    [
        ("[nope]\nx = 1\n", BadConfig),
        ("[run]\nbogus = 1\n", BadConfig),
        ("[train_base]\nlr = fast\n", BadConfig),
        ("[train_base]\nmax_epochs = 5\n", BadConfig),
        ("[metrics]\npositive_class = both_ways\n", BadConfig),
        ("[synthetic]\nreliabilities = 0.9, 1.5, 0.1\n", BadSpec),
    ],
)
def test_invalid_configs(text, err):
    with pytest.raises(err):
        load_config(text)


def test_out_dir_precedence(monkeypatch, tmp_path):
    cfg = load_config("[run]\nout_dir = from_config\n")
    monkeypatch.delenv(OUT_ENV, raising=False)
    assert str(resolve_out_dir(cfg, None)) == "from_config"
    monkeypatch.setenv(OUT_ENV, str(tmp_path))
    assert resolve_out_dir(cfg, None) == tmp_path
    assert str(resolve_out_dir(cfg, "flag")) == "flag"
