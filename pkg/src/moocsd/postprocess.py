"""Confidence filtering, cross-course joining, redundancy pruning and ranking."""

from __future__ import annotations

from collections import defaultdict
from itertools import combinations
from typing import Iterable, Mapping

from .exceptions import ConfigError
from .prep import CATEGORIES, Category
from .rules import CourseRule, Rule, threshold

REDUNDANCY_MODES = ("mean", "per_course")


def filter_confidence(rules: Iterable[CourseRule], tau: float) -> list[CourseRule]:
    """Keep rules with confidence >= ``tau`` (inclusive)."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"confidence threshold must lie in [0, 1], got {tau}")
    tau = threshold(tau)
    return [r for r in rules if r.confidence >= tau]


def cross_course_join(per_course_rulesets: Mapping[str, Iterable[CourseRule]], min_courses: int) -> list[Rule]:
    """Join rules by ``(antecedent, target)``; keep those found in >= ``min_courses`` courses."""
    n_courses = len(per_course_rulesets)
    if not 1 <= min_courses <= max(n_courses, 1) or n_courses == 0:
        raise ConfigError(f"min_courses must lie in [1, {n_courses}], got {min_courses}")
    joined: dict[tuple, dict[str, CourseRule]] = defaultdict(dict)
    for course_id in sorted(per_course_rulesets):
        for r in per_course_rulesets[course_id]:
            joined[r.key][course_id] = r
    return [
        Rule(antecedent, target, dict(sorted(matches.items())))
        for (antecedent, target), matches in sorted(joined.items(), key=lambda kv: (kv[0][1].index, kv[0][0]))
        if len(matches) >= min_courses
    ]


def rank_key(rule: Rule):
    return (-rule.mean_confidence, -rule.mean_support_target, len(rule.antecedent), rule.antecedent)


def rank(rules: Iterable[Rule]) -> list[Rule]:
    """Confidence desc, support desc, shorter antecedent, then lexicographic."""
    return sorted(rules, key=rank_key)


def _dominates(general: Rule, specific: Rule, by: str) -> bool:
    if by == "mean":
        return general.mean_confidence >= specific.mean_confidence
    for course_id, r in specific.per_course.items():
        g = general.per_course.get(course_id)
        if g is None or g.confidence < r.confidence:
            return False
    return True


def prune_redundant(rules: Iterable[Rule], by: str = "mean") -> list[Rule]:
    """Drop every rule that a kept, strictly more general rule matches or beats.

    ``X -> Y`` is redundant when some kept ``X' -> Y`` with ``X'`` a proper
    subset of ``X`` has confidence >= that of ``X -> Y``. Rules are visited by
    ascending antecedent size, so only already-kept generals are consulted.
    ``by="per_course"`` requires the general rule to dominate in every course
    of the specific one instead of comparing mean confidences.
    """
    if by not in REDUNDANCY_MODES:
        raise ConfigError(f"redundancy mode must be one of {REDUNDANCY_MODES}, got {by!r}")
    kept: dict[tuple, Rule] = {}
    survivors = []
    for rule in sorted(rules, key=lambda r: (len(r.antecedent), r.target.index, r.antecedent)):
        redundant = False
        ant = rule.antecedent
        for size in range(1, len(ant)):
            for sub in combinations(ant, size):
                general = kept.get((sub, rule.target))
                if general is not None and _dominates(general, rule, by):
                    redundant = True
                    break
            if redundant:
                break
        if not redundant:
            kept[(ant, rule.target)] = rule
            survivors.append(rule)
    return rank(survivors)


def split_by_target(rules: Iterable[Rule]) -> dict[Category, list[Rule]]:
    out: dict[Category, list[Rule]] = {c: [] for c in CATEGORIES}
    for r in rules:
        out[r.target].append(r)
    return out


def postprocess(per_course: Mapping[str, Mapping[Category, Iterable[CourseRule]]], min_confidence: float = 0.8,
                min_courses: int | None = None, by: str = "mean") -> tuple[dict, dict]:
    """Run filter, join, prune and rank over mined per-course rules.

    Returns ``(rules, unpruned)``: pruned, ranked rules per target and the
    joined rules per target before redundancy removal.
    """
    min_courses = len(per_course) if min_courses is None else min_courses
    filtered = {
        cid: filter_confidence((r for rs in by_target.values() for r in rs), min_confidence)
        for cid, by_target in per_course.items()
    }
    joined = split_by_target(cross_course_join(filtered, min_courses))
    pruned = {t: prune_redundant(rs, by) for t, rs in joined.items()}
    return pruned, {t: rank(rs) for t, rs in joined.items()}
