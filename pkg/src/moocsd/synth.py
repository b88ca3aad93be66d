"""Deterministic synthetic person-course tables for tests and benchmarks.

Category shares per course are drawn near the ranges observed in the
public release: viewed-only learners dominate, registered-only learners
come next, certified and explored-only learners are a few percent each.
Activity columns depend on the category, so the usual rules show up
(certified learners have high grades and many active days, and so on).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .ingest import REQUIRED_COLUMNS, RawCourseTable, parse_frame

COUNTRIES = (
    "United States", "India", "Unknown/Other", "Other Europe", "Other Africa", "United Kingdom",
    "Brazil", "Spain", "Other Asia", "Canada", "Germany", "Egypt",
)
_COUNTRY_P = np.array([0.30, 0.18, 0.16, 0.08, 0.05, 0.05, 0.04, 0.04, 0.03, 0.03, 0.02, 0.02])
LEVELS = ("Bachelor's", "Secondary", "Master's", "Less than Secondary", "Doctorate")
_LEVEL_P = np.array([0.40, 0.30, 0.22, 0.05, 0.03])
GENDERS = ("m", "f", "o")
_GENDER_P = np.array([0.70, 0.28, 0.02])

# per category: (mean log nevents, mean days, chapter share, forum rate)
_ACTIVITY = {
    0: (7.0, 40.0, 0.85, 0.6),   # certified
    1: (5.5, 14.0, 0.60, 0.3),   # explored only
    2: (3.0, 3.0, 0.12, 0.05),   # viewed only
}


def _course_frame(rng: np.random.Generator, course_id: str, n: int, offset: int) -> pd.DataFrame:
    p_cert = rng.uniform(0.01, 0.08)
    p_expl = rng.uniform(0.005, 0.06)
    p_reg = rng.uniform(0.10, 0.40)
    shares = np.array([p_cert, p_expl, 1.0 - p_cert - p_expl - p_reg, p_reg])
    cat = rng.choice(4, size=n, p=shares)
    n_chapters = int(rng.integers(8, 40))

    certified = cat == 0
    explored = (cat == 1) | (certified & (rng.random(n) < 0.9))
    viewed = cat <= 2
    registered_only = cat == 3

    country = rng.choice(len(COUNTRIES), size=n, p=_COUNTRY_P)
    unknown = registered_only & (rng.random(n) < 0.35)
    country[unknown] = COUNTRIES.index("Unknown/Other")

    level = np.array(LEVELS, dtype=object)[rng.choice(len(LEVELS), size=n, p=_LEVEL_P)]
    level[rng.random(n) < 0.12] = ""
    gender = np.array(GENDERS, dtype=object)[rng.choice(3, size=n, p=_GENDER_P)]
    gender[rng.random(n) < 0.08] = ""
    yob = np.clip(np.round(rng.normal(1984, 9, size=n)), 1931, 2001).astype(int).astype(str).astype(object)
    yob[rng.random(n) < 0.1] = ""

    grade = np.where(certified, rng.uniform(0.55, 1.0, n),
                     np.where(cat == 1, rng.uniform(0.0, 0.55, n), rng.uniform(0.0, 0.2, n)))
    grade = np.round(grade, 2)
    grade_s = grade.astype(str).astype(object)
    grade_s[registered_only & (rng.random(n) < 0.7)] = ""
    grade_s[registered_only & (grade_s != "")] = "0.0"

    cols = {name: np.full(n, "", dtype=object) for name in ("nevents", "ndays_act", "nplay_video", "nchapters", "nforum_posts")}
    for code, (log_ev, days, share, forum) in _ACTIVITY.items():
        m = cat == code
        k = int(m.sum())
        if not k:
            continue
        cols["nevents"][m] = np.maximum(1, np.round(rng.lognormal(log_ev, 0.8, k))).astype(int).astype(str)
        cols["ndays_act"][m] = np.clip(np.round(rng.gamma(2.0, days / 2.0, k)), 1, 205).astype(int).astype(str)
        cols["nplay_video"][m] = np.maximum(1, np.round(rng.lognormal(log_ev - 1.5, 0.9, k))).astype(int).astype(str)
        chapters = np.clip(np.round(rng.normal(share * n_chapters, 0.15 * n_chapters, k)), 1, n_chapters)
        cols["nchapters"][m] = chapters.astype(int).astype(str)
        cols["nforum_posts"][m] = np.minimum(rng.poisson(forum, k), 20).astype(int).astype(str)
    # viewers sometimes never open a chapter or play a video
    sparse = (cat == 2) & (rng.random(n) < 0.3)
    cols["nplay_video"][sparse] = ""
    cols["nchapters"][sparse & (rng.random(n) < 0.5)] = ""

    ids = np.char.add("MHxPC13", np.char.zfill(np.arange(offset, offset + n).astype(str), 7)).astype(object)
    start = np.array(["2012-09-%02d" % d for d in range(1, 29)], dtype=object)[rng.integers(0, 28, n)]
    last = np.where(registered_only, "", "2013-05-30").astype(object)

    def flag(a):
        return np.where(a, "1", "0").astype(object)

    frame = pd.DataFrame({
        "course_id": np.full(n, course_id, dtype=object),
        "userid_DI": ids,
        "registered": np.full(n, "1", dtype=object),
        "viewed": flag(viewed),
        "explored": flag(explored),
        "certified": flag(certified),
        "final_cc_cname_DI": np.array(COUNTRIES, dtype=object)[country],
        "LoE": level,
        "YoB": yob,
        "gender": gender,
        "grade": grade_s,
        "start_time_DI": start,
        "last_event_DI": last,
        **cols,
        "roles": np.full(n, "", dtype=object),
    })
    return frame[list(REQUIRED_COLUMNS)]


def course_ids(courses: int) -> list[str]:
    return [f"SynthX/C{c:02d}/2013" for c in range(1, courses + 1)]


def synthetic_text_frames(seed: int, courses: int, rows_per_course: int) -> list[pd.DataFrame]:
    """All-string frames, one per course, exactly as they would be written."""
    if rows_per_course < 1:
        raise ValueError("rows_per_course must be >= 1")
    rng = np.random.default_rng(seed)
    frames = []
    for i, cid in enumerate(course_ids(courses)):
        child = np.random.default_rng(rng.integers(2**63))
        frames.append(_course_frame(child, cid, rows_per_course, i * rows_per_course))
    return frames


def synthetic_tables(seed: int, courses: int, rows_per_course: int) -> list[RawCourseTable]:
    """In-memory course tables, typed as if loaded from disk."""
    return [
        RawCourseTable(f["course_id"].iat[0], parse_frame(f.reset_index(drop=True)))
        for f in synthetic_text_frames(seed, courses, rows_per_course)
    ]


def generate_synthetic(seed: int, courses: int, rows_per_course: int, out_dir) -> list[Path]:
    """Write one CSV per course; identical seeds give byte-identical files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for frame in synthetic_text_frames(seed, courses, rows_per_course):
        cid = frame["course_id"].iat[0]
        path = out_dir / (cid.replace("/", "_") + ".csv")
        frame.to_csv(path, index=False, lineterminator="\n")
        paths.append(path)
    return paths

