"""Brute-force reference for certifying the miner and the post-processor.

Nothing here touches the FP-Tree code: subgroups are enumerated as item
combinations and counted by scanning every record (coverage sets are held
as Python int bitsets, one bit per record).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Optional, Sequence

from .exceptions import ConfigError
from .prep import CATEGORIES, Category, CourseDataset
from .rules import CourseRule, Rule, threshold

MAX_ITEMS = 64
MAX_TRANSACTIONS = 10_000


@dataclass(frozen=True)
class OracleConfig:
    max_antecedent: int = 3
    min_support_target: float = 0.0
    min_confidence: float = 0.0
    targets: tuple = CATEGORIES
    per_target_attribute_allowlist: Optional[Mapping] = None


def _allowed(target: Category, cfg: OracleConfig, attribute: str) -> bool:
    if target is Category.CERTIFIED and attribute == "certified":
        return False
    allow = (cfg.per_target_attribute_allowlist or {}).get(target)
    return allow is None or attribute in allow


def enumerate_subgroups(dataset: CourseDataset, cfg: OracleConfig = OracleConfig()) -> dict[Category, list[CourseRule]]:
    """Every antecedent of size 1..max (one item per attribute) scored by full scan.

    Antecedents that cover no record are skipped. Raises ConfigError past
    ``MAX_ITEMS`` distinct items or ``MAX_TRANSACTIONS`` records.
    """
    transactions = dataset.transactions
    universe = sorted({it for t in transactions for it in t.items})
    if len(universe) > MAX_ITEMS or len(transactions) > MAX_TRANSACTIONS:
        raise ConfigError(
            f"oracle limited to {MAX_ITEMS} items and {MAX_TRANSACTIONS} records, "
            f"got {len(universe)} items and {len(transactions)} records")

    cover = {it: 0 for it in universe}
    target_mask = {c: 0 for c in CATEGORIES}
    for row, t in enumerate(transactions):
        bit = 1 << row
        target_mask[t.target] |= bit
        for it in t.items:
            cover[it] |= bit
    totals = {c: m.bit_count() for c, m in target_mask.items()}

    min_sup, min_conf = threshold(cfg.min_support_target), threshold(cfg.min_confidence)
    cache: dict[tuple, int] = {}
    out: dict[Category, list[CourseRule]] = {}
    for target in CATEGORIES:
        if target not in cfg.targets or totals[target] == 0:
            continue
        items = [it for it in universe if _allowed(target, cfg, it.attribute)]
        rules = []
        for size in range(1, cfg.max_antecedent + 1):
            for combo in combinations(items, size):
                if len({it.attribute for it in combo}) < size:
                    continue
                mask = cache.get(combo)
                if mask is None:
                    mask = -1
                    for it in combo:
                        mask &= cover[it]
                    cache[combo] = mask
                ant_total = mask.bit_count() if mask != -1 else 0
                if ant_total == 0:
                    continue
                joint = (mask & target_mask[target]).bit_count()
                if Fraction(joint, totals[target]) < min_sup:
                    continue
                if Fraction(joint, ant_total) < min_conf:
                    continue
                rules.append(CourseRule(combo, target, joint, ant_total, totals[target], dataset.course_id))
        out[target] = sorted(rules, key=lambda r: r.antecedent)
    return out


def _confidence(rule) -> Fraction:
    return rule.mean_confidence if isinstance(rule, Rule) else rule.confidence


def prune_redundant_reference(rules: Sequence) -> list:
    """All-pairs redundancy removal; input order is preserved."""
    rules = list(rules)
    keep = []
    for r in rules:
        ant = set(r.antecedent)
        redundant = any(
            g.target == r.target and set(g.antecedent) < ant and _confidence(g) >= _confidence(r)
            for g in rules
        )
        if not redundant:
            keep.append(r)
    return keep


def discover_reference(datasets: Sequence[CourseDataset], cfg: OracleConfig, min_courses: int) -> dict[Category, list[Rule]]:
    """Whole pipeline by brute force: enumerate, threshold, join, prune."""
    found: dict[tuple, dict[str, CourseRule]] = {}
    for ds in datasets:
        for rules in enumerate_subgroups(ds, cfg).values():
            for r in rules:
                found.setdefault((r.antecedent, r.target), {})[ds.course_id] = r
    joined = [Rule(a, t, dict(sorted(m.items()))) for (a, t), m in found.items() if len(m) >= min_courses]
    survivors = prune_redundant_reference(joined)
    out = {c: [] for c in CATEGORIES}
    for r in sorted(survivors, key=lambda r: r.antecedent):
        out[r.target].append(r)
    return out
