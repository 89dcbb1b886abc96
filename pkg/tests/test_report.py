import math

from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from pwadyn.report import fmt_value, format_table, parse_record_line, record_line, render


def test_value_formats():
    assert fmt_value(True) == "true" and fmt_value(False) == "false"
    assert fmt_value(None) == "none"
    assert fmt_value(mpq(-3, 4)) == "-3/4"
    assert fmt_value(mpq(5)) == "5"
    assert fmt_value(1 / 3) == "0.333333333333"
    assert fmt_value(math.inf) == "inf" and fmt_value(-math.inf) == "-inf"
    assert fmt_value(math.nan) == "nan"
    assert fmt_value((mpq(1, 2), mpq(0))) == "(1/2,0)"
    assert fmt_value(("a", "b")) == "a,b"
    assert fmt_value("two words") == "two;words"


def test_float_has_twelve_significant_digits():
    assert fmt_value(math.pi) == "3.14159265359"
    assert fmt_value(123456.789e10) == "1.23456789e+15"


def test_record_line_keeps_key_order():
    assert record_line({"b": 1, "a": mpq(1, 3)}) == "b=1 a=1/3"


@given(st.dictionaries(st.from_regex(r"[a-z_]{1,8}", fullmatch=True),
                       st.one_of(st.integers(), st.booleans(), st.floats(allow_nan=False),
                                 st.fractions().map(lambda f: mpq(f.numerator, f.denominator))),
                       max_size=6))
def test_record_round_trip(rec):
    back = parse_record_line(record_line(rec))
    assert list(back) == list(rec)
    assert all(back[k] == fmt_value(v) for k, v in rec.items())


def test_table_groups_by_key_set():
    out = format_table([{"n": 1, "c": 4}, {"n": 10, "c": 16}, {"total": 20}])
    lines = out.splitlines()
    assert lines[0].split() == ["n", "c"]
    assert lines[2].split() == ["10", "16"]
    assert lines[3] == ""
    assert lines[4] == "total"
    # columns are aligned
    assert lines[1].index("4") == lines[2].index("16")


def test_render_modes():
    recs = [{"k": 1}]
    assert render(recs) == "k=1\n"
    assert render(recs, "table") == "k\n1\n"
    assert render([]) == ""
