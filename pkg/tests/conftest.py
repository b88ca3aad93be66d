"""Shared fixtures: the six-record toy course and random small courses."""

from __future__ import annotations

import numpy as np
import pytest

from moocsd.prep import CATEGORIES, Category, CourseDataset, Item, ItemVocabulary

T, F = Category.CERTIFIED, Category.ONLY_VIEWED

TOY_A = [
    ({"g=H", "d=H"}, T),
    ({"g=H", "d=H"}, T),
    ({"g=H", "d=L"}, F),
    ({"g=L", "d=L"}, F),
    ({"g=L", "d=H"}, T),
    ({"g=H", "d=H"}, F),
]


def toy_a_vocabulary() -> ItemVocabulary:
    # id order g=H < d=H < g=L < d=L
    return ItemVocabulary(Item.parse(s) for s in ("g=H", "d=H", "g=L", "d=L"))


@pytest.fixture
def toy_a() -> CourseDataset:
    return CourseDataset.from_transactions("toyA", TOY_A, toy_a_vocabulary())


def random_course(rng: np.random.Generator, course_id: str = "c", vocabulary=None,
                  max_attributes: int = 12, max_values: int = 4, max_rows: int = 500,
                  missing: float = 0.2) -> CourseDataset:
    """Random course with at most one item per attribute and some missing cells."""
    n_attr = int(rng.integers(1, max_attributes + 1))
    n_rows = int(rng.integers(1, max_rows + 1))
    card = rng.integers(1, max_values + 1, size=n_attr)
    skew = rng.dirichlet(np.ones(len(CATEGORIES)))
    rows = []
    for _ in range(n_rows):
        items = {Item(f"a{a}", str(rng.integers(card[a]))) for a in range(n_attr) if rng.random() >= missing}
        rows.append((items, CATEGORIES[rng.choice(len(CATEGORIES), p=skew)]))
    return CourseDataset.from_transactions(course_id, rows, vocabulary)


# one line per acceptance criterion, shown after the test session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
