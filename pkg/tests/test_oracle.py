from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import T, F, random_course
from moocsd.exceptions import ConfigError
from moocsd.mine import MiningConfig, mine_course, mine_courses
from moocsd.oracle import (MAX_ITEMS, OracleConfig, discover_reference, enumerate_subgroups,
                           prune_redundant_reference)
from moocsd.postprocess import filter_confidence, postprocess
from moocsd.prep import CATEGORIES, CourseDataset, ItemVocabulary


def test_toy_a_exhaustive(toy_a):
    out = enumerate_subgroups(toy_a, OracleConfig(max_antecedent=2, targets=(T,)))
    assert list(out) == [T]
    got = {tuple(str(i) for i in r.antecedent): (r.support_target, r.confidence) for r in out[T]}
    assert got[("d=H",)] == (Fraction(3, 3), Fraction(3, 4))
    assert got[("d=H", "g=H")] == (Fraction(2, 3), Fraction(2, 3))
    assert len(got) == 8


def test_singletons_only(toy_a):
    out = enumerate_subgroups(toy_a, OracleConfig(max_antecedent=1))
    assert all(len(r.antecedent) == 1 for rs in out.values() for r in rs)


def test_perfect_separation():
    ds = CourseDataset.from_transactions("p", [({"x=1", "y=0"}, T), ({"x=1", "y=1"}, T), ({"x=0", "y=0"}, F)])
    (r,) = [r for r in enumerate_subgroups(ds, OracleConfig(1))[T] if str(r.antecedent[0]) == "x=1"]
    assert (r.support_target, r.confidence) == (1, 1)


def test_output_sorted(toy_a):
    for rs in enumerate_subgroups(toy_a).values():
        assert [r.antecedent for r in rs] == sorted(r.antecedent for r in rs)


def test_guard():
    rows = [({f"a{k}={k}"}, T) for k in range(MAX_ITEMS + 1)]
    with pytest.raises(ConfigError, match="oracle limited"):
        enumerate_subgroups(CourseDataset.from_transactions("big", rows))


def test_reference_prune_trivial():
    assert prune_redundant_reference([]) == []


def test_oracle_does_not_import_engine():
    import moocsd.oracle as oracle
    src = open(oracle.__file__).read()
    assert "from .mine" not in src and "import mine" not in src


def _engine(ds, ms, mc, ma):
    rules = mine_course(ds, MiningConfig(ms, mc, ma))
    return {t: [(r.antecedent, r.joint, r.ant_total, r.target_total) for r in filter_confidence(rs, mc)]
            for t, rs in rules.items()}


def _oracle(ds, ms, mc, ma):
    return {t: [(r.antecedent, r.joint, r.ant_total, r.target_total) for r in rs]
            for t, rs in enumerate_subgroups(ds, OracleConfig(ma, ms, mc)).items()}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.01, 0.1, 0.3]),
       st.sampled_from([0.0, 0.5, 0.8, 1.0]), st.integers(1, 3))
def test_engine_equals_oracle(seed, ms, mc, ma):
    ds = random_course(np.random.default_rng(seed), max_rows=200)
    assert _engine(ds, ms, mc, ma) == _oracle(ds, ms, mc, ma)


def test_exact_threshold_boundary():
    # confidence exactly 4/5 passes 0.8; support exactly 1/10 passes 0.1
    rows = [({"x=1"}, T)] * 4 + [({"x=1"}, F)] + [({"x=0"}, T)] * 36
    ds = CourseDataset.from_transactions("b", rows)
    assert _engine(ds, 0.1, 0.8, 1) == _oracle(ds, 0.1, 0.8, 1)
    assert any(str(a[0][0]) == "x=1" for a in _oracle(ds, 0.1, 0.8, 1)[T])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_full_pipeline_equals_reference(seed, min_courses):
    rng = np.random.default_rng(seed)
    vocab = ItemVocabulary()
    courses = [random_course(rng, f"c{k}", vocab, max_attributes=5, max_values=3, max_rows=150) for k in range(3)]
    cfg = OracleConfig(max_antecedent=2, min_support_target=0.05, min_confidence=0.4)
    ref = discover_reference(courses, cfg, min_courses)
    mined = mine_courses(courses, MiningConfig(0.05, 0.4, 2))
    pruned, _ = postprocess(mined, 0.4, min_courses)
    for t in CATEGORIES:
        assert sorted(r.key for r in pruned[t]) == sorted(r.key for r in ref[t])
        got = {r.key: (r.mean_support_target, r.mean_confidence) for r in pruned[t]}
        assert got == {r.key: (r.mean_support_target, r.mean_confidence) for r in ref[t]}
