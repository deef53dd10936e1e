import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from twotier.domain import BinaryLabel, EnsembleConfig, FamilyId, InstanceId, Logit, make_probability
from twotier.errors import BadConfig, OutOfRange


@pytest.mark.parametrize("x", [0.0, 1.0, 0.25])
def test_probability_boundaries_accepted(x):
    assert make_probability(x) == x


@pytest.mark.parametrize("x", [1.5, -1e-12, math.nan, math.inf])
def test_probability_rejects(x):
    with pytest.raises(OutOfRange):
        make_probability(x)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_probability_accepts_exactly_unit_interval(x):
    if 0.0 <= x <= 1.0:
        assert float(make_probability(x)) == x
    else:
        with pytest.raises(OutOfRange):
            make_probability(x)


def test_logit_must_be_finite():
    assert Logit(-3.5) == -3.5
    with pytest.raises(OutOfRange):
        Logit(math.inf)


def test_label_values():
    assert (BinaryLabel.REAL, BinaryLabel.FAKE) == (0, 1)


def test_family_default_names():
    assert [f.display_name for f in EnsembleConfig().family_ids] == ["Xception", "Res2Net101", "EfficientNetB7"]
    assert FamilyId(4).display_name == "Family4"


def test_ensemble_config_seeds_distinct_and_family_major():
    ens = EnsembleConfig(families=2, instances_per_family=3, base_seed=5)
    assert len(set(ens.seeds)) == 6
    assert ens.seed_for(1, 0) == ens.seeds[3]
    assert [i.slot for i in ens.instance_ids(1)] == [0, 1, 2]
    assert isinstance(ens.instance_ids(0)[0], InstanceId)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(families=0),
        dict(instances_per_family=0),
        dict(families=1, instances_per_family=2, seeds=(3, 3)),
        dict(families=1, instances_per_family=2, seeds=(1,)),
        dict(families=2, family_names=("a", "a")),
    ],
)
def test_ensemble_config_rejects(kwargs):
    with pytest.raises(BadConfig):
        EnsembleConfig(**kwargs)
