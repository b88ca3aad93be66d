"""Rule records shared by the miner, the post-processor and the oracle.

Measures are exact :class:`fractions.Fraction` values built from integer
counts; floats only appear when rules are rendered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .prep import Category, Item


def threshold(value) -> Fraction:
    """Exact rational for a user threshold: ``0.8`` means 4/5, not the nearest double."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class CourseRule:
    """One scored subgroup ``antecedent -> target`` within one course.

    ``joint`` counts records matching antecedent and target, ``ant_total``
    records matching the antecedent, ``target_total`` records of the target.
    """

    antecedent: tuple
    target: Category
    joint: int
    ant_total: int
    target_total: int
    course_id: str = ""

    @property
    def support_target(self) -> Fraction:
        return Fraction(self.joint, self.target_total)

    @property
    def confidence(self) -> Fraction:
        return Fraction(self.joint, self.ant_total)

    @property
    def key(self) -> tuple:
        return (self.antecedent, self.target)


def canonical_antecedent(items) -> tuple:
    return tuple(sorted(items))


def render_antecedent(antecedent) -> str:
    return " AND ".join(str(it) for it in antecedent)


@dataclass
class Rule:
    """A rule joined across the courses where it passed the confidence filter."""

    antecedent: tuple
    target: Category
    per_course: Mapping[str, CourseRule] = field(default_factory=dict)

    @property
    def courses_matched(self) -> int:
        return len(self.per_course)

    @property
    def mean_support_target(self) -> Fraction:
        return sum((r.support_target for r in self.per_course.values()), Fraction(0)) / len(self.per_course)

    @property
    def mean_confidence(self) -> Fraction:
        return sum((r.confidence for r in self.per_course.values()), Fraction(0)) / len(self.per_course)

    @property
    def key(self) -> tuple:
        return (self.antecedent, self.target)

    def render(self) -> str:
        return f"IF {render_antecedent(self.antecedent)} THEN {self.target.rule_label}"

    def to_dict(self) -> dict:
        return {
            "rule": self.render(),
            "antecedent": [str(it) for it in self.antecedent],
            "target": self.target.value,
            "support_target": float(self.mean_support_target),
            "confidence": float(self.mean_confidence),
            "courses_matched": self.courses_matched,
            "per_course": {
                cid: {
                    "support_target": float(r.support_target),
                    "confidence": float(r.confidence),
                    "joint": r.joint,
                    "ant_total": r.ant_total,
                    "target_total": r.target_total,
                }
                for cid, r in sorted(self.per_course.items())
            },
        }


__all__ = ["CourseRule", "Rule", "Item", "canonical_antecedent", "render_antecedent"]
