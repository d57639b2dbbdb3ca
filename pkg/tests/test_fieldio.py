import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coupled_extremal.errors import FormatError
from coupled_extremal.fieldio import dump_field, format_field, load_field, parse_field
from coupled_extremal.grid import Grid


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_round_trip_bitwise(seed):
    g = Grid(1, 8)
    vals = np.random.default_rng(seed).standard_normal(g.shape) * 10.0 ** np.random.default_rng(seed).integers(-300, 300)
    f = g.field(vals)
    back = parse_field(format_field(f))
    assert back.values.tobytes() == f.values.tobytes()


def test_round_trip_file_nd(tmp_path):
    g = Grid(2, 8)
    f = g.field(np.random.default_rng(0).standard_normal(g.shape))
    dump_field(f, tmp_path / "sub" / "f.txt")
    back = load_field(tmp_path / "sub" / "f.txt", g)
    assert np.array_equal(back.values, f.values)
    assert (tmp_path / "sub" / "f.txt").read_text().startswith("field,v1,ndim=2,N=8\n")


def test_wrong_header():
    with pytest.raises(FormatError) as exc:
        parse_field("field,v2,ndim=1,N=8\n")
    assert exc.value.offset == 0


def test_n_mismatch_names_both(tmp_path):
    g = Grid(1, 8)
    dump_field(g.zeros(), tmp_path / "f.txt")
    with pytest.raises(FormatError, match="N=16.*N=8"):
        load_field(tmp_path / "f.txt", Grid(1, 16))


def test_bad_number_offset():
    g = Grid(1, 8)
    text = format_field(g.zeros())
    lines = text.split("\n")
    lines[2] = "0,abc" + lines[2][3:]
    text = "\n".join(lines)
    with pytest.raises(FormatError) as exc:
        parse_field(text)
    assert text[exc.value.offset:].startswith("abc")


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_field(tmp_path / "nope.txt")
