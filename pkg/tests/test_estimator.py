import pytest
from sklearn.base import clone

from moocsd import SubgroupDiscovery, SubgroupMiner
from moocsd.exceptions import ConfigError
from moocsd.ingest import select_and_rename
from moocsd.prep import Category, prepare_courses
from moocsd.synth import synthetic_tables


@pytest.fixture(scope="module")
def tables():
    return synthetic_tables(21, 3, 1500)


def test_params_round_trip():
    est = SubgroupDiscovery(min_confidence=0.7, min_courses=2, targets=["Certified"])
    params = est.get_params()
    assert params["min_confidence"] == 0.7 and params["targets"] == ["Certified"]
    again = clone(est)
    assert again.get_params() == params
    est.set_params(max_antecedent=2)
    assert est.max_antecedent == 2


def test_fit_raw_and_encoded_agree(tables):
    raw = SubgroupDiscovery(min_courses=2).fit(tables)
    encoded = prepare_courses([select_and_rename(t) for t in tables])
    enc = SubgroupDiscovery(min_courses=2).fit(encoded)
    assert {t: [r.key for r in rs] for t, rs in raw.rules_.items()} == \
           {t: [r.key for r in rs] for t, rs in enc.rules_.items()}
    assert raw.n_courses_ == 3 and raw.min_courses_ == 2


def test_get_rules(tables):
    est = SubgroupDiscovery(targets="Certified").fit(tables)
    assert est.get_rules("Certified") == est.rules_[Category.CERTIFIED]
    assert all(r.target is Category.CERTIFIED for r in est.get_rules())


def test_unfitted_get_rules():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        SubgroupDiscovery().get_rules()


@pytest.mark.parametrize("params", [dict(min_confidence=2.0), dict(min_courses=4), dict(max_antecedent=0),
                                    dict(redundancy="nope"), dict(n_jobs=0), dict(targets=["Nobody"])])
def test_validation_in_fit(tables, params):
    with pytest.raises(ConfigError):
        SubgroupDiscovery(**params).fit(tables)


def test_bad_input_type():
    with pytest.raises(ConfigError):
        SubgroupDiscovery().fit([1, 2])
    with pytest.raises(ConfigError):
        SubgroupDiscovery().fit([])


def test_miner_single_course(tables):
    m = SubgroupMiner(min_support_target=0.05, max_antecedent=2).fit(tables[0])
    assert m.course_id_ == tables[0].course_id
    assert set(m.rules_) == set(Category)
    with pytest.raises(ConfigError):
        SubgroupMiner().fit(tables)
