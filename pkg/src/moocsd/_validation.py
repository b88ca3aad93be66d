"""Small argument checks shared by the estimators and the CLI."""

from __future__ import annotations

import numbers

from .exceptions import ConfigError
from .ingest import RawCourseTable
from .prep import CATEGORIES, Category, CourseDataset


def check_fraction(name: str, value) -> float:
    if not isinstance(value, numbers.Real) or isinstance(value, bool) or not 0.0 <= float(value) <= 1.0:
        raise ConfigError(f"{name} must be a number in [0, 1], got {value!r}")
    return float(value)


def check_positive_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_targets(targets) -> tuple[Category, ...]:
    if targets is None:
        return CATEGORIES
    if isinstance(targets, (str, Category)):
        targets = [targets]
    out = []
    for t in targets:
        out.append(t if isinstance(t, Category) else Category.parse(str(t)))
    if not out:
        raise ConfigError("at least one target is required")
    return tuple(c for c in CATEGORIES if c in out)


def check_allowlist(allowlist) -> dict | None:
    if allowlist is None:
        return None
    return {(k if isinstance(k, Category) else Category.parse(k)): frozenset(v) for k, v in allowlist.items()}


def check_courses(X) -> list:
    """Accept one course or a sequence of courses; reject anything else."""
    if isinstance(X, (CourseDataset, RawCourseTable)):
        X = [X]
    courses = list(X)
    if not courses:
        raise ConfigError("at least one course is required")
    for c in courses:
        if not isinstance(c, (CourseDataset, RawCourseTable)):
            raise ConfigError(f"expected CourseDataset or RawCourseTable, got {type(c).__name__}")
    ids = [c.course_id for c in courses]
    if len(set(ids)) != len(ids):
        raise ConfigError("course ids must be unique")
    return courses


def check_min_courses(min_courses, n_courses: int) -> int:
    if min_courses is None:
        return n_courses
    min_courses = check_positive_int("min_courses", min_courses)
    if min_courses > n_courses:
        raise ConfigError(f"min_courses ({min_courses}) exceeds the number of courses ({n_courses})")
    return min_courses
