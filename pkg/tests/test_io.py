import math

import pytest
from hypothesis import given, strategies as st

from shubin import io
from shubin.errors import ParseError


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_roundtrip(x):
    assert float(io.fmt(x)) == x


def test_fmt_types():
    assert io.fmt(3) == "3"
    assert io.fmt(True) == "1"
    assert io.fmt(0.1) == "0.10000000000000001"
    assert io.fmt("abc") == "abc"
    assert io.fmt(math.inf) == "inf"


def test_csv_text_lf_and_header():
    text = io.csv_text(("a", "b"), [(1, 2.5), ("x,y", -0.0)])
    assert text == 'a,b\n1,2.5\n"x,y",-0\n'


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "t.csv"
    io.write_csv(p, ("j", "v"), [(1, 0.25), (2, 1e-300)])
    header, rows = io.read_csv(p)
    assert header == ["j", "v"]
    assert rows == [["1", "0.25"], ["2", "1e-300"]]


def test_read_empty_csv(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.raises(ParseError):
        io.read_csv(p)


def test_keyvalue_roundtrip(tmp_path):
    p = tmp_path / "k.txt"
    io.write_keyvalue(p, [("t_hat", 1.5), ("verdict", "consistent")])
    assert p.read_text() == "t_hat=1.5\nverdict=consistent\n"
    assert io.read_keyvalue(p) == {"t_hat": "1.5", "verdict": "consistent"}


def test_keyvalue_comments_and_equals():
    kv = io.parse_keyvalue("# c\n\n a = 1 \nb=x=y\n")
    assert kv == {"a": "1", "b": "x=y"}


@pytest.mark.parametrize("text,line", [("a=1\nnope\n", 2), ("=3\n", 1)])
def test_keyvalue_errors(text, line):
    with pytest.raises(ParseError) as exc:
        io.parse_keyvalue(text)
    assert exc.value.line == line


def test_atomic_write_creates_parent(tmp_path):
    p = tmp_path / "deep" / "dir" / "f.txt"
    io.atomic_write_text(p, "x\n")
    assert p.read_text() == "x\n"
    assert [q.name for q in p.parent.iterdir()] == ["f.txt"]
