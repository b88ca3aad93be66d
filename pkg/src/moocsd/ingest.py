"""Loading and cleaning of per-course learner tables.

Input files follow the public MOOC person-course release: one row per
(learner, course), comma separated, with a header.
Blank cells are missing values and are carried as ``pd.NA`` in nullable
pandas dtypes, never as numeric sentinels.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import IO, Iterator, Mapping, Union

import numpy as np
import pandas as pd

from .exceptions import ParseError, SchemaError

FLAG = "flag"
INTEGER = "int"
COUNT = "count"
REAL = "real"
CATEGORY = "category"
TEXT = "text"

#: Column name -> kind, for the raw file and for the renamed table.
COLUMN_KINDS: dict[str, str] = {
    "course_id": TEXT,
    "userid_DI": TEXT,
    "registered": FLAG,
    "viewed": FLAG,
    "explored": FLAG,
    "certified": FLAG,
    "final_cc_cname_DI": CATEGORY,
    "LoE": CATEGORY,
    "YoB": INTEGER,
    "gender": CATEGORY,
    "grade": REAL,
    "start_time_DI": TEXT,
    "last_event_DI": TEXT,
    "nevents": COUNT,
    "ndays_act": COUNT,
    "nplay_video": COUNT,
    "nchapters": COUNT,
    "nforum_posts": COUNT,
    "roles": TEXT,
    # names after select_and_rename
    "countryName": CATEGORY,
    "age": INTEGER,
}

#: The nineteen columns every raw input must carry.
REQUIRED_COLUMNS: tuple[str, ...] = (
    "course_id", "userid_DI", "registered", "viewed", "explored", "certified",
    "final_cc_cname_DI", "LoE", "YoB", "gender", "grade", "start_time_DI",
    "last_event_DI", "nevents", "ndays_act", "nplay_video", "nchapters",
    "nforum_posts", "roles",
)

#: Header spellings seen in the wild, mapped onto the canonical names.
COLUMN_ALIASES: dict[str, str] = {"LoE_DI": "LoE"}

DROPPED_COLUMNS: tuple[str, ...] = ("userid_DI", "start_time_DI", "last_event_DI", "roles")
RENAMED_COLUMNS: dict[str, str] = {"final_cc_cname_DI": "countryName", "YoB": "age"}

_FLAG_VALUES = {"0": False, "1": True, "false": False, "true": True}

Source = Union[str, os.PathLike, bytes, IO[bytes], IO[str]]


@dataclass(eq=False)
class RawCourseTable:
    """All learner records of one course.

    Values live in ``frame`` using nullable dtypes (``boolean``, ``Int64``,
    ``Float64``, ``string``), so a missing cell is ``pd.NA``.
    """

    course_id: str
    frame: pd.DataFrame

    def __post_init__(self):
        if not self.course_id:
            raise ValueError("course_id must be non-empty")

    @property
    def column_names(self) -> list[str]:
        return list(self.frame.columns)

    @property
    def rows(self) -> Iterator[dict]:
        """Records as plain dicts, with ``None`` for missing cells."""
        for rec in self.frame.to_dict(orient="records"):
            yield {k: (None if v is pd.NA else v) for k, v in rec.items()}

    def __len__(self) -> int:
        return len(self.frame)

    def __eq__(self, other):
        if not isinstance(other, RawCourseTable):
            return NotImplemented
        return (
            self.course_id == other.course_id
            and self.column_names == other.column_names
            and self.frame.reset_index(drop=True).equals(other.frame.reset_index(drop=True))
        )

    def __repr__(self):
        return f"RawCourseTable(course_id={self.course_id!r}, rows={len(self)}, columns={len(self.column_names)})"


def _read_text_frame(source: Source) -> pd.DataFrame:
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    return pd.read_csv(
        source,
        dtype=str,
        keep_default_na=False,
        na_filter=False,
        encoding="utf-8",
        skipinitialspace=False,
    )


def _first_bad(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


def _parse_flag(name: str, col: pd.Series) -> pd.Series:
    lowered = col.str.strip().str.lower()
    parsed = lowered.map(_FLAG_VALUES)
    bad = parsed.isna().to_numpy()
    if bad.any():
        i = _first_bad(bad)
        raise ParseError(i, name, col.iat[i], "flag must be 0/1 or false/true")
    return parsed.astype("boolean")


def _parse_number(name: str, col: pd.Series, missing: np.ndarray, kind: str) -> pd.Series:
    numeric = pd.to_numeric(col.where(~missing, None), errors="coerce")
    bad = numeric.isna().to_numpy() & ~missing
    if bad.any():
        i = _first_bad(bad)
        raise ParseError(i, name, col.iat[i], "not a number")
    values = numeric.to_numpy(dtype=float, na_value=np.nan)
    present = ~missing
    if kind in (INTEGER, COUNT):
        frac = present & (np.mod(np.nan_to_num(values), 1.0) != 0)
        if frac.any():
            i = _first_bad(frac)
            raise ParseError(i, name, col.iat[i], "not an integer")
        if kind == COUNT:
            neg = present & (np.nan_to_num(values) < 0)
            if neg.any():
                i = _first_bad(neg)
                raise ParseError(i, name, col.iat[i], "count must be non-negative")
        out = pd.array(np.where(present, np.nan_to_num(values), 0).astype(np.int64), dtype="Int64")
    else:
        if name == "grade":
            out_of_range = present & ((np.nan_to_num(values) < 0) | (np.nan_to_num(values) > 1))
            if out_of_range.any():
                i = _first_bad(out_of_range)
                raise ParseError(i, name, col.iat[i], "grade must lie in [0, 1]")
        out = pd.array(np.where(present, values, 0.0), dtype="Float64")
    out[missing] = pd.NA
    return pd.Series(out, index=col.index, name=name)


def parse_frame(
    raw: pd.DataFrame,
    required: tuple[str, ...] = REQUIRED_COLUMNS,
    kinds: Mapping[str, str] = COLUMN_KINDS,
    missing_tokens: tuple[str, ...] = (),
) -> pd.DataFrame:
    """Validate and type an all-string frame.

    Whitespace-only cells, plus any of ``missing_tokens``, become missing.
    Columns not listed in ``kinds`` pass through as strings.
    """
    raw = raw.rename(columns={a: c for a, c in COLUMN_ALIASES.items() if a in raw.columns})
    for column in required:
        if column not in raw.columns:
            raise SchemaError(column)

    typed = {}
    for name in raw.columns:
        col = raw[name].astype(str)
        stripped = col.str.strip()
        missing = (stripped == "").to_numpy()
        if missing_tokens:
            missing |= stripped.isin(missing_tokens).to_numpy()
        kind = kinds.get(name, TEXT)
        if kind == FLAG:
            if missing.any():
                i = _first_bad(missing)
                raise ParseError(i, name, col.iat[i], "flag is missing")
            typed[name] = _parse_flag(name, col)
        elif kind in (INTEGER, COUNT, REAL):
            typed[name] = _parse_number(name, stripped, missing, kind)
        else:
            s = stripped.astype("string")
            s[missing] = pd.NA
            typed[name] = s
    return pd.DataFrame(typed, index=raw.index)


def load_course_table(
    source: Source,
    required: tuple[str, ...] = REQUIRED_COLUMNS,
    kinds: Mapping[str, str] = COLUMN_KINDS,
    missing_tokens: tuple[str, ...] = (),
) -> dict[str, RawCourseTable]:
    """Read a delimited learner file and split it by ``course_id``.

    Returns tables keyed by course id in order of first appearance. Rows
    keep their file order within each course.

    Raises
    ------
    SchemaError
        If a required column is absent.
    ParseError
        For an unparseable flag or number; ``row`` is the 0-based data row.
    """
    frame = parse_frame(_read_text_frame(source), required, kinds, missing_tokens)
    course = frame["course_id"]
    if course.isna().any():
        i = _first_bad(course.isna().to_numpy())
        raise ParseError(i, "course_id", "", "course_id is missing")
    tables = {}
    for course_id in pd.unique(course.to_numpy(dtype=object)):
        part = frame[(course == course_id).to_numpy()].reset_index(drop=True)
        tables[str(course_id)] = RawCourseTable(str(course_id), part)
    return tables


def select_and_rename(table: RawCourseTable) -> RawCourseTable:
    """Drop identifier/date columns and apply the display renames.

    Idempotent: absent droppable columns are ignored.
    """
    frame = table.frame.drop(columns=[c for c in DROPPED_COLUMNS if c in table.frame.columns])
    frame = frame.rename(columns=RENAMED_COLUMNS)
    return RawCourseTable(table.course_id, frame)


def _serialize_column(col: pd.Series) -> pd.Series:
    if str(col.dtype) == "boolean":
        out = col.map({True: "1", False: "0"}).astype(object)
    elif str(col.dtype) == "Float64":
        out = col.astype(object).map(lambda v: "" if v is pd.NA else repr(float(v)))
    else:
        out = col.astype(object).map(lambda v: "" if v is pd.NA else str(v))
    return out.where(col.notna(), "")


def dump_table(table: RawCourseTable, dest: Union[str, os.PathLike, IO[str]]) -> None:
    """Write a table back out with the input conventions (0/1 flags, blanks)."""
    frame = pd.DataFrame({c: _serialize_column(table.frame[c]) for c in table.frame.columns})
    frame.to_csv(dest, index=False, lineterminator="\n")


def dump_tables(tables, dest) -> None:
    """Write several course tables into one file (used for round trips)."""
    frames = [pd.DataFrame({c: _serialize_column(t.frame[c]) for c in t.frame.columns}) for t in tables]
    pd.concat(frames, ignore_index=True).to_csv(dest, index=False, lineterminator="\n")
