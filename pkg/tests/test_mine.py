from collections import Counter
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import F, T, random_course
from moocsd.exceptions import ConfigError, RoutingError, UndefinedMeasureError
from moocsd.mine import (CandidateSubgroup, MiningConfig, ShardInstance, build_local_fptree, count_items,
                         mine_course, mine_shard, pack_counts, project_transaction, score, sort_flist,
                         unpack_counts)
from moocsd.prep import CATEGORIES, DEMOGRAPHIC_ATTRIBUTES, Category, CourseDataset, build_transactions
from moocsd.ingest import select_and_rename
from moocsd.synth import synthetic_tables

GH, DH, GL, DL = 0, 1, 2, 3  # Toy-A item ids
ANY = MiningConfig(min_support_target=0.0, min_confidence=0.0, max_antecedent=3)


def _names(ds, ids):
    return frozenset(str(ds.vocabulary.item(i)) for i in ids)


def _shards(ds, flist):
    instances = [inst for items, t in zip(ds.item_sets(), ds.targets.tolist())
                 for inst in project_transaction(items, CATEGORIES[t], flist)]
    by_key = {}
    for inst in instances:
        by_key.setdefault(inst.key_item, []).append(inst)
    return by_key


# ---- Toy-A golden values -------------------------------------------------

def test_toy_a_flist(toy_a):
    fl = count_items(toy_a)
    assert fl.entries == [(GH, 4), (DH, 4), (GL, 2), (DL, 2)]
    assert fl.target_totals[T] == 3 and fl.target_totals[F] == 3
    assert sum(fl.target_totals.values()) == 6


def test_sort_flist_ties_by_id():
    fl = sort_flist({5: 2, 1: 2, 3: 2, 4: 7, 9: 0}, {})
    assert fl.items == [4, 1, 3, 5]
    assert sort_flist({2: 1}, {}).entries == [(2, 1)]


def test_empty_transactions_flist():
    ds = CourseDataset.from_transactions("e", [(set(), T), (set(), F)])
    fl = count_items(ds)
    assert len(fl) == 0
    assert fl.target_totals[T] == 1 and fl.target_totals[F] == 1


def test_project_transaction():
    out = project_transaction([GH, DH], T)
    assert set(out) == {ShardInstance(GH, (GH,), T), ShardInstance(DH, (GH, DH), T)}
    assert project_transaction([], T) == []


def test_toy_a_projection_counts(toy_a):
    shards = _shards(toy_a, count_items(toy_a))
    assert len(shards[DH]) == 4
    assert len(shards[DL]) == 2


def test_toy_a_shard_tree(toy_a):
    fl = count_items(toy_a)
    tree = build_local_fptree(_shards(toy_a, fl)[DH], DH)
    gh = tree.root.children[GH]
    assert (gh.total, gh.per_target[T.index], gh.per_target[F.index]) == (3, 2, 1)
    child = gh.children[DH]
    assert (child.total, child.per_target[T.index], child.per_target[F.index]) == (3, 2, 1)
    alone = tree.root.children[DH]
    assert (alone.total, alone.per_target[T.index]) == (1, 1)
    assert len(tree.root.children) == 2
    for _, node in tree.walk():
        assert node.total == sum(node.per_target)
        assert sum(c.total for c in node.children.values()) <= node.total


def test_single_path_insertion():
    tree = build_local_fptree([ShardInstance(GH, (GH,), T)] * 4, GH)
    (only,) = tree.root.children.values()
    assert only.total == 4


def test_toy_a_mine_shard(toy_a):
    fl = count_items(toy_a)
    shards = _shards(toy_a, fl)
    gh = mine_shard(build_local_fptree(shards[GH], GH), GH, cfg=ANY)
    assert [(set(c.antecedent), c.ant_total, c.joint_per_target[T.index], c.joint_per_target[F.index])
            for c in gh] == [({GH}, 4, 2, 2)]
    dh = {frozenset(c.antecedent): c for c in mine_shard(build_local_fptree(shards[DH], DH), DH, cfg=ANY)}
    assert set(dh) == {frozenset({DH}), frozenset({GH, DH})}
    assert (dh[frozenset({DH})].ant_total, dh[frozenset({DH})].joint_per_target[T.index],
            dh[frozenset({DH})].joint_per_target[F.index]) == (4, 3, 1)
    pair = dh[frozenset({GH, DH})]
    assert (pair.ant_total, pair.joint_per_target[T.index], pair.joint_per_target[F.index]) == (3, 2, 1)


def test_toy_a_scores(toy_a):
    fl = count_items(toy_a)
    dh = CandidateSubgroup((DH,), tuple(3 if c is T else 1 if c is F else 0 for c in CATEGORIES))
    assert score(dh, T, fl) == (Fraction(3, 3), Fraction(3, 4))
    pair = CandidateSubgroup((GH, DH), tuple(2 if c is T else 1 if c is F else 0 for c in CATEGORIES))
    assert score(pair, T, fl) == (Fraction(2, 3), Fraction(2, 3))


def test_perfect_separation_scores():
    ds = CourseDataset.from_transactions("p", [({"x=1"}, T), ({"x=1"}, T), ({"x=0"}, F)])
    rules = {(_names(ds, []) | {str(i) for i in r.antecedent}): r for r in mine_course(ds, ANY)[T]}
    r = rules[frozenset({"x=1"})]
    assert (r.support_target, r.confidence) == (1, 1)


def test_score_undefined():
    with pytest.raises(UndefinedMeasureError):
        score(CandidateSubgroup((0,), (0, 0, 0, 0)), T, {T: 3})
    with pytest.raises(UndefinedMeasureError):
        score(CandidateSubgroup((0,), (1, 0, 0, 0)), F, {T: 1, F: 0})


TOY_A_CERTIFIED = {
    # antecedent: (joint, ant_total)
    ("d=H",): (3, 4), ("d=H", "g=H"): (2, 3), ("d=H", "g=L"): (1, 1), ("d=L",): (0, 2),
    ("d=L", "g=H"): (0, 1), ("d=L", "g=L"): (0, 1), ("g=H",): (2, 4), ("g=L",): (1, 2),
}


def test_toy_a_mine_course(toy_a):
    cfg = MiningConfig(min_support_target=0.0, min_confidence=0.0, max_antecedent=2, targets=(T,))
    rules = mine_course(toy_a, cfg)
    assert list(rules) == [T]
    got = {tuple(str(i) for i in r.antecedent): (r.joint, r.ant_total) for r in rules[T]}
    assert got == TOY_A_CERTIFIED
    assert all(r.target_total == 3 for r in rules[T])


def test_max_antecedent_one(toy_a):
    rules = mine_course(toy_a, MiningConfig(0.0, 0.0, 1))
    assert all(len(r.antecedent) == 1 for rs in rules.values() for r in rs)


def test_certified_excludes_certified_flag():
    ds = build_transactions(select_and_rename(synthetic_tables(11, 1, 3000)[0]))
    rules = mine_course(ds, MiningConfig(0.05, 0.0, 2))
    assert not any(it.attribute == "certified" for r in rules[Category.CERTIFIED] for it in r.antecedent)
    assert any(it.attribute == "certified" for r in rules[Category.ONLY_EXPLORED] for it in r.antecedent)


def test_registered_allowlist():
    ds = build_transactions(select_and_rename(synthetic_tables(11, 1, 3000)[0]))
    cfg = MiningConfig(0.01, 0.0, 3, per_target_attribute_allowlist={Category.ONLY_REGISTERED: DEMOGRAPHIC_ATTRIBUTES})
    rules = mine_course(ds, cfg)
    assert rules[Category.ONLY_REGISTERED]
    assert all(it.attribute in DEMOGRAPHIC_ATTRIBUTES for r in rules[Category.ONLY_REGISTERED] for it in r.antecedent)
    assert any(it.attribute not in DEMOGRAPHIC_ATTRIBUTES for r in rules[Category.ONLY_VIEWED] for it in r.antecedent)


def test_partitions_one_vs_eight():
    ds = build_transactions(select_and_rename(synthetic_tables(12, 1, 2000)[0]))
    base = MiningConfig(0.02, 0.0, 3)
    eight = MiningConfig(0.02, 0.0, 3, partitions=8)
    assert mine_course(ds, base) == mine_course(ds, eight)
    assert count_items(ds, 1).entries == count_items(ds, 7).entries


def test_routing_errors():
    with pytest.raises(RoutingError):
        ShardInstance(DH, (GH,), T)
    with pytest.raises(RoutingError):
        build_local_fptree([ShardInstance(GH, (GH,), T), ShardInstance(DH, (GH, DH), T)], GH)


def test_config_validation():
    with pytest.raises(ConfigError):
        MiningConfig(min_support_target=1.5).validate()
    with pytest.raises(ConfigError):
        MiningConfig(max_antecedent=0).validate()
    with pytest.raises(ConfigError):
        MiningConfig(targets=()).validate()


@given(st.lists(st.integers(0, 2**39 - 1), min_size=4, max_size=4))
def test_pack_round_trip(counts):
    assert list(unpack_counts(pack_counts(counts))) == counts


# ---- properties over random small courses --------------------------------

seeds = st.integers(0, 2**32 - 1)


def _small(seed, rows=80):
    return random_course(np.random.default_rng(seed), max_attributes=6, max_rows=rows)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 9))
def test_partition_invariance(seed, partitions):
    ds = _small(seed)
    assert count_items(ds, 1).entries == count_items(ds, partitions).entries
    assert count_items(ds, 1).target_totals == count_items(ds, partitions).target_totals
    cfg = MiningConfig(0.0, 0.0, 3)
    assert mine_course(ds, cfg) == mine_course(ds, MiningConfig(0.0, 0.0, 3, partitions=partitions))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_counter_conservation(seed):
    ds = _small(seed)
    rules = mine_course(ds, MiningConfig(0.0, 0.0, 3))
    joints: dict = {}
    totals = {}
    for t, rs in rules.items():
        for r in rs:
            joints.setdefault(r.antecedent, {})[t] = r.joint
            totals.setdefault(r.antecedent, set()).add(r.ant_total)
            assert r.confidence * r.ant_total == r.joint == r.support_target * r.target_total
    mined = set(rules)
    for ant, per in joints.items():
        (ant_total,) = totals[ant]
        covered = sum(1 for t in ds.transactions if set(ant) <= t.items)
        assert ant_total == covered
        if mined == {c for c in CATEGORIES if ds.target_totals[c]}:
            assert sum(per.values()) == ant_total


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_anti_monotonicity(seed):
    ds = _small(seed)
    rules = mine_course(ds, MiningConfig(0.0, 0.0, 3))
    for rs in rules.values():
        ant_total = {r.antecedent: r.ant_total for r in rs}
        for ant, n in ant_total.items():
            for sub in combinations(ant, len(ant) - 1):
                if sub:
                    assert n <= ant_total[tuple(sub)]


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_shard_disjointness_and_headers(seed):
    ds = _small(seed)
    fl = count_items(ds)
    emitted = Counter()
    for key, instances in _shards(ds, fl).items():
        tree = build_local_fptree(instances, key)
        for item in tree.header:
            assert tree.header_total(item) == sum(1 for inst in instances if item in inst.prefix)
        for cand in mine_shard(tree, key, cfg=ANY):
            assert cand.antecedent[-1] == key
            emitted[frozenset(cand.antecedent)] += 1
    assert all(n == 1 for n in emitted.values())
    expected = {frozenset(c) for items in ds.item_sets() for k in (1, 2, 3) for c in combinations(items, k)}
    assert set(emitted) == expected
