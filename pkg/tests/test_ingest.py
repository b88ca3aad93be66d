import io

import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from moocsd.exceptions import ParseError, SchemaError
from moocsd.ingest import (DROPPED_COLUMNS, REQUIRED_COLUMNS, RawCourseTable, dump_tables, load_course_table,
                           select_and_rename)

HEADER = ",".join(REQUIRED_COLUMNS)


def _row(course="MITx/6.00x/2012_Fall", uid="u1", flags="1,1,0,0", country="India", loe="Bachelor's",
         yob="1990", gender="m", grade="0.1", nevents="12", ndays="3", nplay="", nch="2", nforum="0"):
    return ",".join([course, uid, flags, country, loe, yob, gender, grade, "2012-12-19", "2013-11-17",
                     nevents, ndays, nplay, nch, nforum, ""])


def _csv(*rows) -> bytes:
    return ("\n".join([HEADER, *rows]) + "\n").encode()


def test_single_course_three_rows():
    tables = load_course_table(_csv(_row(uid="a"), _row(uid="b"), _row(uid="c")))
    assert list(tables) == ["MITx/6.00x/2012_Fall"]
    t = tables["MITx/6.00x/2012_Fall"]
    assert len(t) == 3
    assert [r["userid_DI"] for r in t.rows] == ["a", "b", "c"]
    assert t.column_names == list(REQUIRED_COLUMNS)


def test_blank_count_is_missing():
    (t,) = load_course_table(_csv(_row(nevents=""))).values()
    rec = next(t.rows)
    assert rec["nevents"] is None
    assert rec["nplay_video"] is None
    assert rec["ndays_act"] == 3


def test_whitespace_cell_is_missing():
    (t,) = load_course_table(_csv(_row(grade="  ", gender=" "))).values()
    rec = next(t.rows)
    assert rec["grade"] is None and rec["gender"] is None


def test_missing_certified_column_names_it():
    header = ",".join(c for c in REQUIRED_COLUMNS if c != "certified")
    data = (header + "\n" + "x," * (len(REQUIRED_COLUMNS) - 2) + "x\n").encode()
    with pytest.raises(SchemaError) as err:
        load_course_table(data)
    assert err.value.column == "certified"
    assert "certified" in str(err.value)


@pytest.mark.parametrize("flags", ["1,yes,0,0", "1,,0,0", "1,2,0,0"])
def test_bad_flag_reports_row(flags):
    with pytest.raises(ParseError) as err:
        load_course_table(_csv(_row(), _row(flags=flags)))
    assert err.value.row == 1
    assert err.value.column == "viewed"


def test_flags_accept_true_false_text():
    (t,) = load_course_table(_csv(_row(flags="true,false,FALSE,0"))).values()
    rec = next(t.rows)
    assert (rec["registered"], rec["viewed"], rec["explored"], rec["certified"]) == (True, False, False, False)


@pytest.mark.parametrize("field,value", [("nevents", "3.5"), ("nevents", "abc"), ("nevents", "-1"),
                                         ("grade", "1.5"), ("grade", "x"), ("yob", "19x0")])
def test_malformed_numbers_are_row_errors(field, value):
    with pytest.raises(ParseError) as err:
        load_course_table(_csv(_row(), _row(), _row(**{field: value})))
    assert err.value.row == 2


def test_missing_tokens_option():
    (t,) = load_course_table(_csv(_row(grade="NA")), missing_tokens=("NA",)).values()
    assert next(t.rows)["grade"] is None
    with pytest.raises(ParseError):
        load_course_table(_csv(_row(grade="NA")))


def test_multi_course_split_keeps_order():
    tables = load_course_table(_csv(_row(course="B", uid="1"), _row(course="A", uid="2"), _row(course="B", uid="3")))
    assert list(tables) == ["B", "A"]
    assert [r["userid_DI"] for r in tables["B"].rows] == ["1", "3"]


def test_loe_alias_header():
    data = _csv(_row()).replace(b",LoE,", b",LoE_DI,", 1)
    (t,) = load_course_table(data).values()
    assert "LoE" in t.column_names


def test_select_and_rename_drops_and_renames():
    (t,) = load_course_table(_csv(_row(), _row(uid="u2"))).values()
    r = select_and_rename(t)
    assert len(r.column_names) == 15
    assert not set(DROPPED_COLUMNS) & set(r.column_names)
    assert "countryName" in r.column_names and "age" in r.column_names
    assert "final_cc_cname_DI" not in r.column_names and "YoB" not in r.column_names
    assert len(r) == len(t)
    assert select_and_rename(r) == r


def test_select_and_rename_without_roles():
    (t,) = load_course_table(_csv(_row())).values()
    partial = RawCourseTable(t.course_id, t.frame.drop(columns=["roles"]))
    assert select_and_rename(partial) == select_and_rename(t)


def test_deterministic_load():
    data = _csv(_row(), _row(uid="x", grade=""))
    assert load_course_table(data) == load_course_table(data)


_cells = st.fixed_dictionaries({
    "flags": st.sampled_from(["1,0,0,0", "1,1,0,0", "1,1,1,0", "1,1,1,1", "1,0,1,1"]),
    "grade": st.one_of(st.just(""), st.floats(0, 1).map(repr)),
    "nevents": st.one_of(st.just(""), st.integers(0, 10**6).map(str)),
    "yob": st.one_of(st.just(""), st.integers(1931, 2001).map(str)),
    "gender": st.sampled_from(["", "m", "f", "o"]),
    "country": st.sampled_from(["India", "United States", "Unknown/Other"]),
})


@settings(max_examples=50, deadline=None)
@given(st.lists(_cells, min_size=1, max_size=8), st.booleans())
def test_round_trip(rows, two_courses):
    lines = [_row(course="C2" if two_courses and i % 2 else "C1", uid=f"u{i}", **r) for i, r in enumerate(rows)]
    tables = load_course_table(_csv(*lines))
    buf = io.StringIO()
    dump_tables(tables.values(), buf)
    again = load_course_table(buf.getvalue().encode())
    assert again == tables


def test_path_and_file_sources(tmp_path):
    p = tmp_path / "x.csv"
    p.write_bytes(_csv(_row()))
    assert load_course_table(p) == load_course_table(str(p)) == load_course_table(io.BytesIO(_csv(_row())))


def test_frame_uses_missing_marker_not_sentinel():
    (t,) = load_course_table(_csv(_row(nevents=""))).values()
    assert t.frame["nevents"].isna().iloc[0]
    assert str(t.frame["nevents"].dtype) == "Int64"
    assert pd.isna(t.frame["nplay_video"].iloc[0])
