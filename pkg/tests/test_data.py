import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twotier.data import (
    PredictionRecord,
    SyntheticSpec,
    assign_splits,
    augment,
    family_auc,
    generate_synthetic,
    imbalanced_preset,
    instance_scores,
    load_prediction_records,
    read_synthetic,
    write_prediction_records,
    write_synthetic,
)
from twotier.domain import EnsembleConfig
from twotier.errors import (
    BadRatios,
    BadSpec,
    DuplicateKey,
    NonRectangular,
    ParseError,
    ScoreOutOfRange,
)
from twotier.learners import lookup
from twotier.metrics import ScoredSet, auc
from twotier.training import TrainingConfig, family_prediction_matrix, train_base_instances

HEADER = "sample_id,dataset,split,family,instance,score,label\n"


def _write(tmp_path, body):
    p = tmp_path / "preds.csv"
    p.write_text(HEADER + body)
    return p


def test_records_round_trip(tmp_path):
    p = _write(tmp_path, "s1,D,test,Xception,0,0.7,1\ns2,D,test,Xception,0,0.2,0\n")
    cache, labels = load_prediction_records(p)
    assert len(cache) == 2
    assert lookup(cache, "s1", "Xception", 0) == 0.7
    assert labels.samples("D", "test") == ["s1", "s2"]
    np.testing.assert_array_equal(labels.labels("D", ["s2", "s1"]), [0, 1])


def test_writer_reader_agree(tmp_path):
    recs = [PredictionRecord(f"s{k}", "D", "train", fam, i, k / 10 + i / 100, k % 2)
            for k in range(4) for fam in ("A", "B") for i in range(2)]
    write_prediction_records(tmp_path / "r.csv", recs)
    cache, _ = load_prediction_records(tmp_path / "r.csv")
    S = instance_scores(cache, "D", ["s0", "s1", "s2", "s3"], ["A", "B"])
    assert S.shape == (4, 2, 2)
    assert S[3, 1, 1] == 0.31


@pytest.mark.parametrize(
    "body, err, row",
    [
        ("s1,D,test,X,0,0.7,1\ns1,D,test,X,0,0.6,1\n", DuplicateKey, 3),
        ("s1,D,test,X,0,1.2,1\n", ScoreOutOfRange, 2),
        ("s1,D,test,X,0,abc,1\n", ParseError, 2),
        ("s1,D,holdout,X,0,0.5,1\n", ParseError, 2),
        ("s1,D,test,X,0,0.5,2\n", ParseError, 2),
        ("s1,D,test,X,0,0.5\n", ParseError, 2),
        ("s1,D,test,X,0,0.5,1\ns1,D,train,X,1,0.5,1\n", ParseError, 3),
    ],
)
def test_records_strictness(tmp_path, body, err, row):
    with pytest.raises(err) as exc:
        load_prediction_records(_write(tmp_path, body))
    assert exc.value.row == row
    assert f"row {row}" in str(exc.value)


def test_records_must_be_rectangular(tmp_path):
    body = "s1,D,test,X,0,0.5,1\ns1,D,test,X,1,0.5,1\ns2,D,test,X,0,0.5,0\n"
    with pytest.raises(NonRectangular, match="s2"):
        load_prediction_records(_write(tmp_path, body))


def test_bad_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("id,score\n")
    with pytest.raises(ParseError):
        load_prediction_records(p)


# splits

def test_degenerate_ratios_put_everything_in_train():
    a = assign_splits([f"s{k}" for k in range(100)], (1, 0, 0))
    assert len(a.members("train")) == 100


def test_default_ratios_are_respected():
    ids = [f"id{k}" for k in range(10_000)]
    a = assign_splits(ids, seed=3)
    frac = len(a.members("train")) / len(ids)
    assert 0.68 <= frac <= 0.72
    assert a.assignment == assign_splits(ids, seed=3).assignment


@given(st.lists(st.text(min_size=1, max_size=8), unique=True, max_size=40), st.integers(0, 99))
def test_split_of_an_id_ignores_the_other_ids(ids, seed):
    full = assign_splits(ids, seed=seed)
    for sid in ids[::3]:
        assert assign_splits([sid], seed=seed)[sid] == full[sid]


@pytest.mark.parametrize("ratios", [(0.5, 0.5), (0.8, 0.3, -0.1), (0.5, 0.2, 0.2)])
def test_bad_ratios(ratios):
    with pytest.raises(BadRatios):
        assign_splits(["a"], ratios)


# synthetic generator

SMALL = dict(n_train=600, n_val=200, n_test=400, seed=4)


def test_generator_is_deterministic():
    a, b = generate_synthetic(SyntheticSpec(**SMALL)), generate_synthetic(SyntheticSpec(**SMALL))
    for name in ("d1", "d2"):
        np.testing.assert_array_equal(a[name].X, b[name].X)
        np.testing.assert_array_equal(a[name].y, b[name].y)
        assert a[name].sample_ids == b[name].sample_ids


def test_generator_sizes_and_balance():
    ds = generate_synthetic(SyntheticSpec(**SMALL))["d1"]
    assert [int(ds.mask(s).sum()) for s in ("train", "val", "test")] == [600, 200, 400]
    assert abs(ds.y.mean() - 0.5) < 0.06
    fake_heavy = generate_synthetic(imbalanced_preset(**SMALL))["d1"]
    assert abs(fake_heavy.y.mean() - 2 / 3) < 0.06


def test_bayes_family_auc_is_monotone_with_known_ends():
    vals = [family_auc(r, 2.0) for r in (0.0, 0.2, 0.5, 0.7, 0.9, 1.0)]
    assert vals[0] == 0.5 and vals[-1] == 1.0
    assert all(a < b for a, b in zip(vals, vals[1:]))


def _trained_test_auc(spec, seed=0):
    ds = generate_synthetic(spec)["d1"]
    ens = EnsembleConfig(families=1, instances_per_family=1, base_seed=seed)
    learners, _ = train_base_instances(ens, TrainingConfig(lr=1e-2, max_epochs=15), ds)
    P = family_prediction_matrix(learners, ds, "test")
    return auc(ScoredSet(P[:, 0], ds.labels("test")))


def test_no_signal_gives_chance_auc():
    spec = SyntheticSpec(n_train=2000, n_val=400, n_test=2000, feature_dim=4, reliabilities=(0.0,),
                         shifted_reliabilities=(), seed=1)
    assert abs(_trained_test_auc(spec) - 0.5) <= 0.05


def test_full_reliability_is_separable():
    spec = SyntheticSpec(n_train=1000, n_val=200, n_test=1000, feature_dim=4, reliabilities=(1.0,),
                         shifted_reliabilities=(), sigma_inst=0.0, seed=1)
    assert _trained_test_auc(spec) > 0.99


def test_spec_validation():
    with pytest.raises(BadSpec):
        SyntheticSpec(reliabilities=(1.2, 0.5, 0.5)).validate()
    with pytest.raises(BadSpec):
        SyntheticSpec(shifted_reliabilities=(0.5,)).validate()
    with pytest.raises(BadSpec):
        SyntheticSpec(fake_fraction=1.0).validate()


def test_instance_views_differ_but_are_reproducible():
    ds = generate_synthetic(SyntheticSpec(**SMALL))["d1"]
    a, b = ds.instance_view(0, 0), ds.instance_view(0, 1)
    assert a.shape == ds.family_view(0, "train").shape
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, ds.instance_view(0, 0))


def test_augment_appends_train_copies():
    ds = generate_synthetic(SyntheticSpec(**SMALL))["d1"]
    aug = augment(ds, fraction=0.5, jitter=0.1, seed=0)
    assert len(aug) == len(ds) + 300
    assert int(aug.mask("test").sum()) == 400
    assert all(s.endswith("-aug") for s in aug.sample_ids[len(ds):])


def test_synthetic_files_round_trip(tmp_path):
    spec = SyntheticSpec(**SMALL)
    ds = generate_synthetic(spec)["d2"]
    write_synthetic(ds, tmp_path)
    back = read_synthetic(tmp_path, spec, "d2")
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)
    np.testing.assert_array_equal(back.split, ds.split)
    np.testing.assert_array_equal(back.instance_view(1, 2), ds.instance_view(1, 2))
