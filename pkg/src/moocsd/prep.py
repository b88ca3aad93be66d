"""Target derivation, discretization and transaction encoding.

Every learner record becomes one transaction: a set of ``attribute=value``
items plus exactly one learner category. Items are interned into dense
integer ids by an :class:`ItemVocabulary` that can be shared across
courses, so the same item has the same id in every course of a run.
"""

from __future__ import annotations

import bisect
import enum
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, FitError, InvalidRecordError, SpecError
from .ingest import RawCourseTable


class Category(str, enum.Enum):
    """The four mutually exclusive learner categories.

    Definition order doubles as the per-target counter index.
    """

    CERTIFIED = "Certified"
    ONLY_EXPLORED = "OnlyExplored"
    ONLY_VIEWED = "OnlyViewed"
    ONLY_REGISTERED = "OnlyRegistered"

    @property
    def index(self) -> int:
        return _CATEGORY_INDEX[self]

    @property
    def rule_label(self) -> str:
        """Consequent as rendered in rule tables, e.g. ``onlyviewed=True``."""
        if self is Category.CERTIFIED:
            return "certified=True"
        return f"{self.value.lower()}=True"

    @classmethod
    def parse(cls, text: str) -> "Category":
        key = text.strip().replace("_", "").replace("-", "").lower()
        for c in cls:
            if c.value.lower() == key or c.name.replace("_", "").lower() == key:
                return c
        raise ConfigError(f"unknown category {text!r}")

    def __str__(self):
        return self.value


CATEGORIES: tuple[Category, ...] = tuple(Category)
_CATEGORY_INDEX = {c: i for i, c in enumerate(CATEGORIES)}
N_CATEGORIES = len(CATEGORIES)


@dataclass(frozen=True, order=True)
class Item:
    attribute: str
    value: str

    def __str__(self):
        return f"{self.attribute}={self.value}"

    @classmethod
    def parse(cls, text: str) -> "Item":
        attribute, sep, value = text.partition("=")
        if not sep:
            raise ValueError(f"item must look like attribute=value, got {text!r}")
        return cls(attribute.strip(), value.strip())


class ItemVocabulary:
    """Bijective interning of items to dense ids ``0..n-1``."""

    def __init__(self, items: Iterable[Item] = ()):
        self._items: list[Item] = []
        self._ids: dict[Item, int] = {}
        for item in items:
            self.intern(item)

    def intern(self, item: Item) -> int:
        try:
            return self._ids[item]
        except KeyError:
            self._ids[item] = len(self._items)
            self._items.append(item)
            return self._ids[item]

    def id_of(self, item: Item) -> int:
        return self._ids[item]

    def get(self, item: Item, default=None):
        return self._ids.get(item, default)

    def item(self, item_id: int) -> Item:
        return self._items[item_id]

    @property
    def items(self) -> tuple[Item, ...]:
        return tuple(self._items)

    def __len__(self):
        return len(self._items)

    def __contains__(self, item):
        return item in self._ids

    def __eq__(self, other):
        return isinstance(other, ItemVocabulary) and self._items == other._items

    def to_json(self) -> list:
        return [[i, it.attribute, it.value] for i, it in enumerate(self._items)]

    @classmethod
    def from_json(cls, rows) -> "ItemVocabulary":
        vocab = cls()
        for i, attribute, value in sorted(rows, key=lambda r: r[0]):
            if vocab.intern(Item(attribute, value)) != i:
                raise ValueError("vocabulary ids must be dense and unique")
        return vocab


@dataclass(frozen=True)
class Transaction:
    items: frozenset
    target: Category

    def __post_init__(self):
        attrs = [it.attribute for it in self.items]
        if len(set(attrs)) != len(attrs):
            raise ValueError(f"transaction has two items for one attribute: {sorted(self.items)}")


DEFAULT_AGE_CUTS = (1999, 1993, 1983, 1973, 1963)
DEFAULT_AGE_LABELS = ("<18", "18-24", "25-34", "35-44", "45-54", ">54")
DEFAULT_GRADE_CUTS = (0.5,)
DEFAULT_GRADE_LABELS = ("low", "high")
DEFAULT_AUTO_ATTRIBUTES = ("nevents", "ndays_act", "nplay_video", "nchapters", "nforum_posts")
DEFAULT_CATEGORICAL = ("countryName", "LoE", "gender")
FLAG_ATTRIBUTES = ("viewed", "explored", "certified")
DEFAULT_ITEM_NAMES = {
    "nevents": "NEvents",
    "ndays_act": "NDaysAct",
    "nplay_video": "NPlayVideo",
    "nchapters": "NChapter",
    "nforum_posts": "NumberOfPosts",
}
DEMOGRAPHIC_ATTRIBUTES = frozenset({"countryName", "LoE", "age", "gender"})


def _default_manual_cuts():
    return {
        "age": (DEFAULT_AGE_CUTS, DEFAULT_AGE_LABELS),
        "grade": (DEFAULT_GRADE_CUTS, DEFAULT_GRADE_LABELS),
    }


@dataclass
class DiscretizerSpec:
    """How each column of a renamed table turns into items."""

    manual_cuts: dict = field(default_factory=_default_manual_cuts)
    auto_attributes: tuple = DEFAULT_AUTO_ATTRIBUTES
    bins: int = 3
    bin_labels: tuple = ("low", "medium", "high")
    categorical_attributes: tuple = DEFAULT_CATEGORICAL
    flag_attributes: tuple = FLAG_ATTRIBUTES
    item_names: dict = field(default_factory=lambda: dict(DEFAULT_ITEM_NAMES))

    def validate(self) -> "DiscretizerSpec":
        for attribute, (cuts, labels) in self.manual_cuts.items():
            check_cuts(cuts)
            if len(labels) != len(cuts) + 1:
                raise SpecError(f"{attribute}: {len(cuts)} cuts need {len(cuts) + 1} labels, got {len(labels)}")
        if self.bins < 2:
            raise SpecError(f"bins must be >= 2, got {self.bins}")
        if len(self.bin_labels) != self.bins:
            raise SpecError(f"{self.bins} bins need {self.bins} labels, got {len(self.bin_labels)}")
        return self

    def item_name(self, column: str) -> str:
        return self.item_names.get(column, column)


def derive_category(registered: bool, viewed: bool, explored: bool, certified: bool) -> Category:
    """Map the four raw flags onto a category, highest flag wins."""
    if not registered:
        raise InvalidRecordError(-1, "record is not a registrant")
    if certified:
        return Category.CERTIFIED
    if explored:
        return Category.ONLY_EXPLORED
    if viewed:
        return Category.ONLY_VIEWED
    return Category.ONLY_REGISTERED


def derive_categories(frame: pd.DataFrame) -> np.ndarray:
    """Vectorised :func:`derive_category`; returns category indices as int8."""
    registered = frame["registered"].to_numpy(dtype=bool)
    if not registered.all():
        raise InvalidRecordError(int(np.flatnonzero(~registered)[0]), "record is not a registrant")
    codes = np.full(len(frame), Category.ONLY_REGISTERED.index, dtype=np.int8)
    codes[frame["viewed"].to_numpy(dtype=bool)] = Category.ONLY_VIEWED.index
    codes[frame["explored"].to_numpy(dtype=bool)] = Category.ONLY_EXPLORED.index
    codes[frame["certified"].to_numpy(dtype=bool)] = Category.CERTIFIED.index
    return codes


def check_cuts(cuts: Sequence[float]) -> bool:
    """Return True for ascending cuts, False for descending; raise otherwise."""
    if len(cuts) == 0:
        raise SpecError("at least one cut point is required")
    diffs = np.diff(np.asarray(cuts, dtype=float))
    if (diffs > 0).all():
        return True
    if (diffs < 0).all():
        return False
    raise SpecError(f"cut points must be strictly ordered: {tuple(cuts)}")


def _manual_codes(values: np.ndarray, cuts: Sequence[float]) -> np.ndarray:
    # A value equal to a cut belongs to the interval the cut opens.
    if check_cuts(cuts):
        return np.searchsorted(np.asarray(cuts, dtype=float), values, side="right")
    return np.searchsorted(-np.asarray(cuts, dtype=float), -values, side="left")


def discretize_manual(value: float, cuts: Sequence[float], labels: Sequence[str]) -> str:
    """Label of the half-open interval holding ``value``.

    Cuts may be ascending (``grade``: 0.5 -> high) or descending (year of
    birth: 1993 falls in ``18-24``).
    """
    if len(labels) != len(cuts) + 1:
        raise SpecError(f"{len(cuts)} cuts need {len(cuts) + 1} labels")
    if check_cuts(cuts):
        return labels[bisect.bisect_right(cuts, value)]
    return labels[sum(1 for c in cuts if value < c)]


def fit_equal_width(values: Iterable[float], bins: int = 3) -> tuple[float, ...]:
    """Interior edges ``min + k*(max-min)/bins`` for ``k = 1..bins-1``."""
    if bins < 2:
        raise ConfigError(f"bins must be >= 2, got {bins}")
    arr = np.asarray([v for v in values if v is not None and v is not pd.NA], dtype=float)
    arr = arr[~np.isnan(arr)]
    if arr.size == 0:
        raise FitError("values")
    lo, hi = float(arr.min()), float(arr.max())
    width = (hi - lo) / bins
    return tuple(lo + k * width for k in range(1, bins))


class Edges(tuple):
    """Equal-width edges that remember whether the fitted range was empty."""

    degenerate = False


def _is_degenerate(edges) -> bool:
    return getattr(edges, "degenerate", False) or (len(edges) > 1 and edges[0] == edges[-1])


def _equal_width_codes(values: np.ndarray, edges: Sequence[float]) -> np.ndarray:
    if _is_degenerate(edges):
        return np.zeros(len(values), dtype=np.int64)
    return np.searchsorted(np.asarray(edges, dtype=float), values, side="right")


def apply_equal_width(value: float, edges: Sequence[float], labels: Sequence[str]) -> str:
    """Bin label for ``value``; the top bin is closed so the maximum is ``high``.

    A degenerate fit (all values equal) sends everything to the lowest bin.
    """
    if _is_degenerate(edges):
        return labels[0]
    return labels[bisect.bisect_right(list(edges), value)]


def _fit_edges(values: np.ndarray, bins: int, attribute: str) -> Edges:
    try:
        raw = fit_equal_width(values, bins)
    except FitError:
        raise FitError(attribute) from None
    edges = Edges(raw)
    present = values[~np.isnan(values)]
    edges.degenerate = bool(present.min() == present.max())
    return edges


def _column_floats(frame: pd.DataFrame, column: str) -> np.ndarray:
    return frame[column].astype("Float64").to_numpy(dtype=float, na_value=np.nan)


class CourseDataset:
    """Encoded transactions of one course.

    ``items`` is an ``(n_records, n_attributes)`` int32 matrix holding the
    item id each record carries for each attribute, or -1 when the value is
    missing; ``targets`` holds category indices.
    """

    def __init__(self, course_id, attributes, items, targets, vocabulary, bin_edges=None):
        self.course_id = str(course_id)
        self.attributes = tuple(attributes)
        self.items = np.ascontiguousarray(items, dtype=np.int32).reshape(len(targets), len(self.attributes))
        self.targets = np.ascontiguousarray(targets, dtype=np.int8)
        self.vocabulary = vocabulary
        self.bin_edges = dict(bin_edges or {})

    def __len__(self):
        return len(self.targets)

    @property
    def target_totals(self) -> dict[Category, int]:
        counts = np.bincount(self.targets, minlength=N_CATEGORIES)
        return {c: int(counts[c.index]) for c in CATEGORIES}

    @property
    def transactions(self) -> list[Transaction]:
        vocab = self.vocabulary
        return [
            Transaction(frozenset(vocab.item(i) for i in row if i >= 0), CATEGORIES[t])
            for row, t in zip(self.items.tolist(), self.targets.tolist())
        ]

    def item_sets(self) -> list[tuple[int, ...]]:
        """Per-record sorted item ids (missing slots removed)."""
        return [tuple(sorted(i for i in row if i >= 0)) for row in self.items.tolist()]

    @classmethod
    def from_transactions(cls, course_id, transactions, vocabulary=None) -> "CourseDataset":
        """Build a dataset from :class:`Transaction` objects (or ``(items, target)`` pairs)."""
        vocabulary = ItemVocabulary() if vocabulary is None else vocabulary
        rows = []
        attributes: dict[str, int] = {}
        for t in transactions:
            items, target = (t.items, t.target) if isinstance(t, Transaction) else t
            items = [Item.parse(i) if isinstance(i, str) else i for i in items]
            tx = Transaction(frozenset(items), Category(target) if not isinstance(target, Category) else target)
            for it in sorted(tx.items):
                attributes.setdefault(it.attribute, len(attributes))
            rows.append(tx)
        matrix = np.full((len(rows), len(attributes)), -1, dtype=np.int32)
        for r, tx in enumerate(rows):
            for it in sorted(tx.items):
                matrix[r, attributes[it.attribute]] = vocabulary.intern(it)
        targets = np.array([tx.target.index for tx in rows], dtype=np.int8)
        return cls(course_id, tuple(attributes), matrix, targets, vocabulary)

    def __eq__(self, other):
        if not isinstance(other, CourseDataset):
            return NotImplemented
        return (
            self.course_id == other.course_id
            and self.attributes == other.attributes
            and np.array_equal(self.items, other.items)
            and np.array_equal(self.targets, other.targets)
            and self.vocabulary == other.vocabulary
            and {k: tuple(v) for k, v in self.bin_edges.items()} == {k: tuple(v) for k, v in other.bin_edges.items()}
        )

    def __repr__(self):
        return f"CourseDataset(course_id={self.course_id!r}, records={len(self)}, attributes={len(self.attributes)})"


class CourseDiscretizer(TransformerMixin, BaseEstimator):
    """Fit per-course equal-width edges and encode a course as transactions.

    Parameters
    ----------
    manual_cuts : dict, optional
        ``attribute -> (cuts, labels)``; defaults to the age and grade cuts.
    auto_attributes : tuple of str, optional
        Count columns discretised by equal width, fitted on this course only.
    bins : int, default 3
    bin_labels : tuple of str, optional
        Defaults to ``("low", "medium", "high")``.
    vocabulary : ItemVocabulary, optional
        Shared interning table; a private one is created when omitted.

    Attributes
    ----------
    bin_edges_ : dict
        ``attribute -> edges`` for every auto attribute with data.
    course_id_ : str
    """

    def __init__(self, manual_cuts=None, auto_attributes=None, bins=3, bin_labels=None,
                 categorical_attributes=None, item_names=None, vocabulary=None):
        self.manual_cuts = manual_cuts
        self.auto_attributes = auto_attributes
        self.bins = bins
        self.bin_labels = bin_labels
        self.categorical_attributes = categorical_attributes
        self.item_names = item_names
        self.vocabulary = vocabulary

    @classmethod
    def from_spec(cls, spec: DiscretizerSpec, vocabulary=None) -> "CourseDiscretizer":
        return cls(manual_cuts=spec.manual_cuts, auto_attributes=spec.auto_attributes, bins=spec.bins,
                   bin_labels=spec.bin_labels, categorical_attributes=spec.categorical_attributes,
                   item_names=spec.item_names, vocabulary=vocabulary)

    def _spec(self) -> DiscretizerSpec:
        spec = DiscretizerSpec()
        if self.manual_cuts is not None:
            spec.manual_cuts = dict(self.manual_cuts)
        if self.auto_attributes is not None:
            spec.auto_attributes = tuple(self.auto_attributes)
        spec.bins = self.bins
        spec.bin_labels = tuple(self.bin_labels) if self.bin_labels is not None else (
            ("low", "medium", "high") if self.bins == 3 else tuple(f"bin{k}" for k in range(self.bins)))
        if self.categorical_attributes is not None:
            spec.categorical_attributes = tuple(self.categorical_attributes)
        if self.item_names is not None:
            spec.item_names = dict(self.item_names)
        return spec.validate()

    def fit(self, X: RawCourseTable, y=None):
        spec = self._spec()
        frame = X.frame
        self.bin_edges_ = {}
        for column in spec.auto_attributes:
            if column not in frame.columns:
                continue
            try:
                self.bin_edges_[column] = _fit_edges(_column_floats(frame, column), spec.bins, column)
            except FitError:
                # no usable values: the attribute emits no items in this course
                pass
        self.course_id_ = X.course_id
        self.spec_ = spec
        return self

    def transform(self, X: RawCourseTable) -> CourseDataset:
        check_is_fitted(self, "bin_edges_")
        spec = self.spec_
        vocab = self.vocabulary if self.vocabulary is not None else getattr(self, "vocabulary_", None)
        if vocab is None:
            vocab = self.vocabulary_ = ItemVocabulary()
        frame = X.frame
        targets = derive_categories(frame)

        columns: list[tuple[str, np.ndarray, Sequence[str]]] = []
        n = len(frame)
        for column in spec.categorical_attributes:
            if column not in frame.columns:
                continue
            values = frame[column].astype("string")
            codes, uniques = pd.factorize(values, use_na_sentinel=True)
            columns.append((spec.item_name(column), codes, [str(u) for u in uniques]))
        for column, (cuts, labels) in spec.manual_cuts.items():
            if column not in frame.columns:
                continue
            values = _column_floats(frame, column)
            codes = np.where(np.isnan(values), -1, _manual_codes(np.nan_to_num(values), cuts))
            columns.append((spec.item_name(column), codes, list(labels)))
        for column in spec.auto_attributes:
            if column not in frame.columns:
                continue
            if column not in self.bin_edges_:
                codes = np.full(n, -1)
            else:
                values = _column_floats(frame, column)
                codes = np.where(np.isnan(values), -1,
                                 _equal_width_codes(np.nan_to_num(values), self.bin_edges_[column]))
            columns.append((spec.item_name(column), codes, list(spec.bin_labels)))
        for column in spec.flag_attributes:
            if column not in frame.columns:
                continue
            codes = frame[column].to_numpy(dtype=bool).astype(np.int64)
            columns.append((spec.item_name(column), codes, ["False", "True"]))

        matrix = np.full((n, len(columns)), -1, dtype=np.int32)
        for j, (attribute, codes, labels) in enumerate(columns):
            codes = np.asarray(codes)
            lookup = np.full(len(labels), -1, dtype=np.int32)
            for code in np.unique(codes[codes >= 0]):
                lookup[code] = vocab.intern(Item(attribute, labels[code]))
            present = codes >= 0
            matrix[present, j] = lookup[codes[present]]
        edges = {spec.item_name(c): tuple(float(e) for e in v) for c, v in self.bin_edges_.items()}
        return CourseDataset(X.course_id, [c[0] for c in columns], matrix, targets, vocab, edges)


def build_transactions(table: RawCourseTable, spec: Optional[DiscretizerSpec] = None,
                       vocabulary: Optional[ItemVocabulary] = None) -> CourseDataset:
    """Discretize one renamed course table and encode it."""
    spec = (spec or DiscretizerSpec()).validate()
    return CourseDiscretizer.from_spec(spec, vocabulary).fit_transform(table)


def prepare_courses(tables: Iterable[RawCourseTable], spec: Optional[DiscretizerSpec] = None,
                    vocabulary: Optional[ItemVocabulary] = None) -> list[CourseDataset]:
    """Encode several courses against one shared vocabulary, each fitted on itself."""
    vocabulary = ItemVocabulary() if vocabulary is None else vocabulary
    return [build_transactions(t, spec, vocabulary) for t in tables]


def save_dataset(dataset: CourseDataset, path: str | os.PathLike) -> tuple[str, str]:
    """Write ``<path>.tsv`` (target + item ids per row) and ``<path>.json`` sidecar."""
    base = os.fspath(path)
    rows_path, meta_path = base + ".tsv", base + ".json"
    with open(rows_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("target\titems\n")
        for row, t in zip(dataset.items.tolist(), dataset.targets.tolist()):
            ids = " ".join(str(i) for i in row if i >= 0)
            fh.write(f"{CATEGORIES[t].value}\t{ids}\n")
    meta = {
        "course_id": dataset.course_id,
        "attributes": list(dataset.attributes),
        "vocabulary": dataset.vocabulary.to_json(),
        "bin_edges": {k: list(v) for k, v in dataset.bin_edges.items()},
        "target_totals": {c.value: n for c, n in dataset.target_totals.items()},
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rows_path, meta_path


def load_dataset(path: str | os.PathLike, vocabulary: Optional[ItemVocabulary] = None) -> CourseDataset:
    """Read a dataset written by :func:`save_dataset` (``path`` without suffix).

    With ``vocabulary`` given, items are re-interned into it so several
    saved courses can be mined together.
    """
    base = os.fspath(path)
    for suffix in (".json", ".tsv"):
        if base.endswith(suffix):
            base = base[: -len(suffix)]
    with open(base + ".json", encoding="utf-8") as fh:
        meta = json.load(fh)
    own = ItemVocabulary.from_json(meta["vocabulary"])
    vocab = own if vocabulary is None else vocabulary
    attributes = list(meta["attributes"])
    column_of = {a: j for j, a in enumerate(attributes)}
    remap = np.array([vocab.intern(it) for it in own.items], dtype=np.int32)
    rows, targets = [], []
    with open(base + ".tsv", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            target, _, ids = line.rstrip("\n").partition("\t")
            row = [-1] * len(attributes)
            for tok in ids.split():
                i = int(tok)
                row[column_of[own.item(i).attribute]] = int(remap[i])
            rows.append(row)
            targets.append(Category(target).index)
    matrix = np.array(rows, dtype=np.int32).reshape(len(rows), len(attributes))
    edges = {k: tuple(v) for k, v in meta.get("bin_edges", {}).items()}
    return CourseDataset(meta["course_id"], attributes, matrix, np.array(targets, dtype=np.int8), vocab, edges)
