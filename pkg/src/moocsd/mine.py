"""Partition-parallel FP-Tree subgroup miner.

The dataflow per course:

1. *count*  - each partition of records tallies item frequencies and
   collapses duplicate records (a combiner); tallies merge by addition.
2. *sort*   - the merged tallies become the F-list (frequency descending,
   item id ascending on ties).
3. *project* - each record, with items in F-list order ``a[0..n-1]``,
   emits ``(a[j], a[0..j])`` to the shard keyed by ``a[j]``.
4. *build/mine* - every shard builds its own FP-Tree, whose nodes carry one
   counter per learner category, and mines it recursively.

Shards never share state, so they can run in any order on any worker; the
final collection sorts canonically, which makes the output independent of
the number of partitions and workers.

Per-category counters are packed into a single Python int, ``FIELD_BITS``
bits per category, so that updating a node is one integer addition.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .exceptions import ConfigError, RoutingError, UndefinedMeasureError
from .prep import CATEGORIES, N_CATEGORIES, Category, CourseDataset
from .rules import CourseRule, threshold

logger = logging.getLogger(__name__)

FIELD_BITS = 40
_FIELD_MASK = (1 << FIELD_BITS) - 1
_PAD = np.iinfo(np.int32).max  # padding after the last rank of a record

#: Raw flag attributes that restate a target; dropped when mining that target.
TARGET_EXCLUSIONS: dict[Category, frozenset] = {Category.CERTIFIED: frozenset({"certified"})}


def pack_counts(counts: Sequence[int]) -> int:
    packed = 0
    for i, c in enumerate(counts):
        packed |= int(c) << (FIELD_BITS * i)
    return packed


def unpack_counts(packed: int) -> tuple[int, ...]:
    return tuple((packed >> (FIELD_BITS * i)) & _FIELD_MASK for i in range(N_CATEGORIES))


def _one(target: Category) -> int:
    return 1 << (FIELD_BITS * target.index)


@dataclass(frozen=True)
class MiningConfig:
    min_support_target: float = 0.01
    min_confidence: float = 0.8
    max_antecedent: int = 3
    targets: tuple = CATEGORIES
    per_target_attribute_allowlist: Optional[Mapping] = None
    partitions: int = 1

    def validate(self) -> "MiningConfig":
        for name in ("min_support_target", "min_confidence"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if int(self.max_antecedent) < 1:
            raise ConfigError(f"max_antecedent must be >= 1, got {self.max_antecedent}")
        if int(self.partitions) < 1:
            raise ConfigError(f"partitions must be >= 1, got {self.partitions}")
        if not self.targets:
            raise ConfigError("at least one target is required")
        for t in self.targets:
            if not isinstance(t, Category):
                raise ConfigError(f"unknown target {t!r}")
        return self

    def min_joint(self, target_totals: Mapping[Category, int]) -> tuple:
        """Smallest joint count meeting ``min_support_target`` per configured target.

        ``None`` marks targets that are not mined (or have no records).
        """
        s = threshold(self.min_support_target)
        out = []
        for c in CATEGORIES:
            total = target_totals.get(c, 0)
            out.append(math.ceil(s * total) if c in self.targets and total > 0 else None)
        return tuple(out)


@dataclass
class FList:
    """Item frequencies in mining order plus per-target record totals."""

    entries: list
    target_totals: dict
    rank: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.rank = {item: pos for pos, (item, _) in enumerate(self.entries)}

    def __len__(self):
        return len(self.entries)

    @property
    def items(self) -> list[int]:
        return [item for item, _ in self.entries]

    def frequency(self, item: int) -> int:
        return self.entries[self.rank[item]][1]

    def restricted(self, allowed) -> "FList":
        return FList([(i, f) for i, f in self.entries if i in allowed], dict(self.target_totals))


@dataclass(frozen=True)
class ShardInstance:
    key_item: int
    prefix: tuple
    target: Category

    def __post_init__(self):
        if not self.prefix or self.prefix[-1] != self.key_item:
            raise RoutingError(f"prefix {self.prefix} does not end at shard key {self.key_item}")


@dataclass(frozen=True)
class CandidateSubgroup:
    antecedent: tuple
    joint_per_target: tuple

    @property
    def ant_total(self) -> int:
        return sum(self.joint_per_target)


class FPNode:
    __slots__ = ("item", "counts", "parent", "children")

    def __init__(self, item, parent):
        self.item = item
        self.counts = 0
        self.parent = parent
        self.children = {}

    @property
    def per_target(self) -> tuple[int, ...]:
        return unpack_counts(self.counts)

    @property
    def total(self) -> int:
        return sum(self.per_target)

    def __repr__(self):
        return f"FPNode(item={self.item!r}, total={self.total}, per_target={self.per_target})"


class FPTree:
    """Prefix tree with a header table ``item -> nodes carrying that item``."""

    def __init__(self, key=None):
        self.key = key
        self.root = FPNode(None, None)
        self.header: dict = {}

    def insert(self, prefix: Iterable, counts: int) -> None:
        node = self.root
        header = self.header
        for item in prefix:
            child = node.children.get(item)
            if child is None:
                child = node.children[item] = FPNode(item, node)
                header.setdefault(item, []).append(child)
            child.counts += counts
            node = child

    def header_total(self, item) -> int:
        return sum(sum(unpack_counts(n.counts)) for n in self.header.get(item, ()))

    def walk(self):
        """Pre-order ``(depth, node)`` pairs, children visited by ascending item."""
        stack = [(0, child) for _, child in sorted(self.root.children.items(), reverse=True)]
        while stack:
            depth, node = stack.pop()
            yield depth, node
            stack.extend((depth + 1, c) for _, c in sorted(node.children.items(), reverse=True))

    def dump(self, label=str) -> str:
        """Indented text form, one node per line: item, total, per-target counts."""
        lines = []
        for depth, node in self.walk():
            counts = " ".join(str(c) for c in node.per_target)
            lines.append(f"{'  ' * depth}{label(node.item)}\t{node.total}\t{counts}")
        return "\n".join(lines)


def sort_flist(tallies: Mapping[int, int], target_totals: Mapping[Category, int]) -> FList:
    """Order items by frequency descending, item id ascending; drop zeros."""
    entries = sorted(((int(i), int(f)) for i, f in tallies.items() if f > 0), key=lambda e: (-e[1], e[0]))
    return FList(entries, {c: int(target_totals.get(c, 0)) for c in CATEGORIES})


def _partition_bounds(n: int, partitions: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n, partitions + 1).round().astype(int)
    return list(zip(edges[:-1].tolist(), edges[1:].tolist()))


def _combine_rows(rows: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse identical rows, summing their per-target counts."""
    if len(rows) == 0:
        return rows, counts
    if rows.shape[1] == 0:
        return rows[:1], counts.sum(axis=0, keepdims=True)
    # column-wise lexsort is much cheaper than np.unique(axis=0) on wide rows
    order = np.lexsort(rows.T[::-1])
    ordered = rows[order]
    fresh = np.ones(len(ordered), dtype=bool)
    fresh[1:] = (ordered[1:] != ordered[:-1]).any(axis=1)
    starts = np.flatnonzero(fresh)
    return ordered[starts], np.add.reduceat(counts[order], starts, axis=0).astype(np.int64)


def _map_partition(items: np.ndarray, targets: np.ndarray, n_items: int):
    """Count items in one partition and collapse its duplicate records."""
    present = items[items >= 0]
    tallies = np.bincount(present, minlength=n_items).astype(np.int64)
    onehot = np.zeros((len(targets), N_CATEGORIES), dtype=np.int64)
    onehot[np.arange(len(targets)), targets] = 1
    rows, counts = _combine_rows(items, onehot)
    return tallies, rows, counts


def _call(task):
    fn, args = task
    return fn(*args)


def _run(fn, arg_list, executor: Optional[Executor]):
    tasks = [(fn, args) for args in arg_list]
    if executor is None:
        return [_call(t) for t in tasks]
    return list(executor.map(_call, tasks))


def _course_partitions(dataset: CourseDataset, partitions: int):
    n_items = len(dataset.vocabulary)
    return [
        (dataset.items[lo:hi], dataset.targets[lo:hi], n_items)
        for lo, hi in _partition_bounds(len(dataset), partitions)
    ]


def _merge_partitions(results, width: int):
    tallies = None
    rows, counts = [], []
    for t, r, c in results:
        tallies = t if tallies is None else tallies + t
        rows.append(r)
        counts.append(c)
    rows = np.concatenate(rows) if rows else np.zeros((0, width), dtype=np.int32)
    counts = np.concatenate(counts) if counts else np.zeros((0, N_CATEGORIES), dtype=np.int64)
    rows, counts = _combine_rows(rows.reshape(len(counts), width), counts)
    return tallies, rows, counts


def count_items(dataset: CourseDataset, partitions: int = 1, executor: Optional[Executor] = None) -> FList:
    """Global item frequencies from per-partition tallies merged by addition."""
    if partitions < 1:
        raise ConfigError(f"partitions must be >= 1, got {partitions}")
    results = _run(_map_partition, _course_partitions(dataset, partitions), executor)
    tallies, _, _ = _merge_partitions(results, len(dataset.attributes))
    if tallies is None:
        tallies = np.zeros(len(dataset.vocabulary), dtype=np.int64)
    return sort_flist(dict(enumerate(tallies.tolist())), dataset.target_totals)


def project_transaction(items: Sequence[int], target: Category, flist: Optional[FList] = None) -> list[ShardInstance]:
    """Emit ``(a[j], a[0..j])`` for every position of the F-list-ordered items.

    With ``flist`` given, items outside it are dropped and the rest sorted
    by rank first; otherwise ``items`` must already be in F-list order.
    """
    if flist is not None:
        items = sorted((i for i in items if i in flist.rank), key=flist.rank.__getitem__)
    a = tuple(items)
    return [ShardInstance(a[j], a[: j + 1], target) for j in range(len(a) - 1, -1, -1)]


def build_local_fptree(instances: Iterable[ShardInstance], key=None) -> FPTree:
    """Insert every shard instance, bumping total and its target's counter."""
    instances = list(instances)
    if key is None and instances:
        key = instances[0].key_item
    tree = FPTree(key)
    for inst in instances:
        if inst.key_item != key or inst.prefix[-1] != key:
            raise RoutingError(f"instance for {inst.key_item} routed to shard {key}")
        tree.insert(inst.prefix, _one(inst.target))
    return tree


def _below(counts: int, min_joint: Optional[tuple]) -> bool:
    """True when no mined target can still reach its minimum joint count."""
    if min_joint is None:
        return False
    for i, m in enumerate(min_joint):
        if m is not None and ((counts >> (FIELD_BITS * i)) & _FIELD_MASK) >= m:
            return False
    return True


def _path_items(node: FPNode) -> list:
    path = []
    p = node.parent
    while p is not None and p.item is not None:
        path.append(p.item)
        p = p.parent
    path.reverse()
    return path


def _grow(header: dict, suffix: tuple, depth_left: int, min_joint, out: list) -> None:
    for item in sorted(header):
        nodes = header[item]
        counts = 0
        for n in nodes:
            counts += n.counts
        if _below(counts, min_joint):
            continue
        pattern = (item,) + suffix
        out.append((pattern, counts))
        if depth_left <= 1:
            continue
        if depth_left == 2:
            # last level: extension counts straight from the pattern base
            acc: dict = {}
            for n in nodes:
                c = n.counts
                p = n.parent
                while p.item is not None:
                    acc[p.item] = acc.get(p.item, 0) + c
                    p = p.parent
            for other in sorted(acc):
                if not _below(acc[other], min_joint):
                    out.append(((other,) + pattern, acc[other]))
        else:
            cond = FPTree()
            for n in nodes:
                path = _path_items(n)
                if path:
                    cond.insert(path, n.counts)
            _grow(cond.header, pattern, depth_left - 1, min_joint, out)


def _mine_tree(tree: FPTree, key, max_antecedent: int, min_joint) -> list[tuple[tuple, int]]:
    key_nodes = tree.header.get(key, [])
    counts = 0
    for n in key_nodes:
        counts += n.counts
    if not key_nodes or _below(counts, min_joint):
        return []
    out = [((key,), counts)]
    if max_antecedent > 1:
        # every prefix ends at key, so the tree minus its key leaves is
        # already the conditional tree of key
        header = {i: nodes for i, nodes in tree.header.items() if i != key}
        _grow(header, (key,), max_antecedent - 1, min_joint, out)
    return out


def mine_shard(tree: FPTree, key=None, flist: Optional[FList] = None, cfg: Optional[MiningConfig] = None) -> list[CandidateSubgroup]:
    """All itemsets whose last item (in F-list order) is the shard key.

    Itemsets are bounded by ``cfg.max_antecedent``. When both ``flist`` and
    ``cfg`` are given, branches whose joint count for every configured target
    is already below ``min_support_target`` are cut; joint counts only shrink
    as itemsets grow, so no qualifying itemset is lost.
    """
    key = tree.key if key is None else key
    cfg = cfg or MiningConfig(min_support_target=0.0)
    min_joint = cfg.min_joint(flist.target_totals) if flist is not None else None
    return [
        CandidateSubgroup(pattern, unpack_counts(counts))
        for pattern, counts in _mine_tree(tree, key, int(cfg.max_antecedent), min_joint)
    ]


def score(candidate: CandidateSubgroup, target: Category, flist) -> tuple[Fraction, Fraction]:
    """``(support_target, confidence)`` of ``candidate -> target`` as exact fractions."""
    totals = flist.target_totals if isinstance(flist, FList) else flist
    total = totals.get(target, 0)
    if total <= 0:
        raise UndefinedMeasureError(f"target {target} has no records")
    if candidate.ant_total <= 0:
        raise UndefinedMeasureError("antecedent covers no records")
    joint = candidate.joint_per_target[target.index]
    return Fraction(joint, total), Fraction(joint, candidate.ant_total)


def _mine_shard_group(enc: np.ndarray, counts: np.ndarray, keys: Sequence[int],
                      max_antecedent: int, min_joint) -> list[tuple[tuple, int]]:
    """Reducer: project records onto the given shard keys, build and mine each tree."""
    if enc.size == 0:
        return []
    packed = [pack_counts(row) for row in counts.tolist()]
    rows = enc.tolist()
    wanted = np.isin(enc, np.asarray(keys, dtype=enc.dtype))
    r_idx, c_idx = np.nonzero(wanted)
    vals = enc[r_idx, c_idx]
    order = np.argsort(vals, kind="stable")
    r_idx, c_idx, vals = r_idx[order], c_idx[order], vals[order]
    bounds = np.flatnonzero(np.diff(vals)) + 1
    out = []
    for start, stop in zip(np.r_[0, bounds].tolist(), np.r_[bounds, len(vals)].tolist()):
        if start == stop:
            continue
        key = int(vals[start])
        shard: dict = {}
        for r, c in zip(r_idx[start:stop].tolist(), c_idx[start:stop].tolist()):
            prefix = tuple(rows[r][: c + 1])
            shard[prefix] = shard.get(prefix, 0) + packed[r]
        tree = FPTree(key)
        for prefix in sorted(shard):
            tree.insert(prefix, shard[prefix])
        out.extend(_mine_tree(tree, key, max_antecedent, min_joint))
    return out


def _allowed_attributes(target: Category, cfg: MiningConfig, attributes: Iterable[str]) -> frozenset:
    allowed = set(attributes)
    allowlist = cfg.per_target_attribute_allowlist or {}
    if target in allowlist and allowlist[target] is not None:
        allowed &= set(allowlist[target])
    allowed -= TARGET_EXCLUSIONS.get(target, frozenset())
    return frozenset(allowed)


def _encode_group(rows: np.ndarray, counts: np.ndarray, flist: FList, n_items: int):
    """Map item ids to F-list ranks, sort each record, collapse duplicates."""
    big = _PAD
    rank_of = np.full(n_items + 1, big, dtype=np.int32)  # slot -1 (missing) stays big
    for pos, item in enumerate(flist.items):
        rank_of[item] = pos
    enc = np.sort(rank_of[rows], axis=1) if rows.size else rows.astype(np.int32)
    keep = (enc != big).any(axis=1) if enc.size else np.zeros(len(enc), dtype=bool)
    enc, cnt = enc[keep], counts[keep]
    width = int((enc != big).sum(axis=1).max()) if len(enc) else 0
    enc = np.ascontiguousarray(enc[:, :width])
    return _combine_rows(enc, cnt)


@dataclass
class _CourseState:
    dataset: CourseDataset
    flist: FList
    rows: np.ndarray
    counts: np.ndarray


def _course_rules(state: _CourseState, group_targets, group_flist: FList, results, cfg: MiningConfig):
    ds = state.dataset
    vocab = ds.vocabulary
    totals = state.flist.target_totals
    thresholds = cfg.min_joint(totals)
    items_of = group_flist.items
    per_target = {t: [] for t in group_targets}
    for pattern, counts in results:
        joint_per_target = unpack_counts(counts)
        ant_total = sum(joint_per_target)
        antecedent = tuple(sorted(vocab.item(items_of[r]) for r in pattern))
        for t in group_targets:
            joint = joint_per_target[t.index]
            if joint >= thresholds[t.index]:
                per_target[t].append(CourseRule(antecedent, t, joint, ant_total, totals[t], ds.course_id))
    for t in per_target:
        per_target[t].sort(key=lambda r: r.antecedent)
    return per_target


def _shard_blocks(enc: np.ndarray, n_keys: int, n_groups: int) -> list[tuple[int, int]]:
    """Split ranks ``0..n_keys-1`` into contiguous blocks of similar projection cost.

    A key's cost is the total length of the prefixes ending at it, which is
    what its shard tree has to absorb.
    """
    if n_keys == 0:
        return []
    if n_groups <= 1 or enc.size == 0:
        return [(0, n_keys)]
    valid = enc != _PAD
    pos = np.broadcast_to(np.arange(1, enc.shape[1] + 1), enc.shape)
    cost = np.bincount(enc[valid], weights=pos[valid], minlength=n_keys)
    cum = np.cumsum(cost)
    marks = np.searchsorted(cum, cum[-1] * np.arange(1, n_groups) / n_groups, side="left") + 1
    cuts = sorted({int(c) for c in marks if 0 < c < n_keys})
    edges = [0, *cuts, n_keys]
    return list(zip(edges[:-1], edges[1:]))


def _block_rows(enc: np.ndarray, counts: np.ndarray, lo: int, hi: int):
    """Records holding a key in ``[lo, hi)``, cut after the block and deduplicated."""
    hit = ((enc >= lo) & (enc < hi)).any(axis=1)
    sub = np.where(enc[hit] < hi, enc[hit], _PAD)
    width = int((sub != _PAD).sum(axis=1).max()) if len(sub) else 0
    return _combine_rows(np.ascontiguousarray(sub[:, :width]), counts[hit])


def mine_courses(datasets: Sequence[CourseDataset], cfg: MiningConfig, workers: int = 1,
                 executor: Optional[Executor] = None) -> dict[str, dict[Category, list[CourseRule]]]:
    """Mine several courses; returns ``course_id -> target -> rules``.

    Rules carry exact counts and satisfy ``min_support_target``; confidence
    filtering is left to post-processing. With ``workers > 1`` and no
    ``executor``, a process pool of that size is created for the call.
    """
    cfg.validate()
    workers = max(1, int(workers))
    if executor is None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return mine_courses(datasets, cfg, workers, pool)

    # phase 1: partitioned counting with a combiner
    tasks, owners = [], []
    for ci, ds in enumerate(datasets):
        for args in _course_partitions(ds, int(cfg.partitions)):
            tasks.append(args)
            owners.append(ci)
    partial = _run(_map_partition, tasks, executor)
    states = []
    for ci, ds in enumerate(datasets):
        tallies, rows, counts = _merge_partitions(
            [p for p, o in zip(partial, owners) if o == ci], len(ds.attributes))
        if tallies is None:
            tallies = np.zeros(len(ds.vocabulary), dtype=np.int64)
        flist = sort_flist(dict(enumerate(tallies.tolist())), ds.target_totals)
        states.append(_CourseState(ds, flist, rows, counts))

    # phase 2: shard mining, grouped by the item filter each target needs
    jobs, plan = [], []
    fan_out = workers * 2 if executor is not None else 1
    for ci, state in enumerate(states):
        ds = state.dataset
        groups: dict[frozenset, list[Category]] = {}
        for t in CATEGORIES:
            if t not in cfg.targets:
                continue
            if state.flist.target_totals.get(t, 0) == 0:
                logger.warning("course %s: no %s records, target skipped", ds.course_id, t.value)
                continue
            groups.setdefault(_allowed_attributes(t, cfg, ds.attributes), []).append(t)
        for allowed, targets in groups.items():
            allowed_ids = {i for i in state.flist.items if ds.vocabulary.item(i).attribute in allowed}
            gflist = state.flist.restricted(allowed_ids)
            enc, cnt = _encode_group(state.rows, state.counts, gflist, len(ds.vocabulary))
            # only the group's own targets may keep a branch alive
            group_cfg = MiningConfig(cfg.min_support_target, cfg.min_confidence, cfg.max_antecedent, tuple(targets))
            min_joint = group_cfg.min_joint(state.flist.target_totals)
            first = len(jobs)
            blocks = _shard_blocks(enc, len(gflist), fan_out)
            for lo, hi in blocks:
                sub_enc, sub_cnt = (enc, cnt) if len(blocks) == 1 else _block_rows(enc, cnt, lo, hi)
                jobs.append((sub_enc, sub_cnt, list(range(lo, hi)), int(cfg.max_antecedent), min_joint))
            plan.append((ci, tuple(targets), gflist, first, len(jobs)))
    results = _run(_mine_shard_group, jobs, executor)

    out: dict[str, dict[Category, list[CourseRule]]] = {ds.course_id: {} for ds in datasets}
    for ci, targets, gflist, first, last in plan:
        found = [c for part in results[first:last] for c in part]
        state = states[ci]
        out[state.dataset.course_id].update(_course_rules(state, targets, gflist, found, cfg))
    for ds in datasets:
        per = out[ds.course_id]
        out[ds.course_id] = {t: per[t] for t in CATEGORIES if t in per}
    return out


def mine_course(dataset: CourseDataset, cfg: MiningConfig, workers: int = 1,
                executor: Optional[Executor] = None) -> dict[Category, list[CourseRule]]:
    """Mine one course; see :func:`mine_courses`."""
    return mine_courses([dataset], cfg, workers, executor)[dataset.course_id]
