import numpy as np
import pytest

from extracop import ParticleSystem
from extracop.generators import lattice
from extracop.xyz import XYZParseError, format_xyz, parse_xyz, read_xyz, write_xyz


def test_round_trip_periodic_3d(tmp_path):
    s = lattice("hcp", 3)
    path = tmp_path / "hcp.xyz"
    write_xyz(s, path, comment="hcp test")
    back = read_xyz(path)
    assert np.array_equal(back.positions, s.positions)
    assert np.array_equal(back.box, s.box)


def test_round_trip_2d_open():
    s = ParticleSystem([[0.1, 0.2], [1.0 / 3.0, 2.5]], species=["A", "B"])
    text = format_xyz(s)
    assert "dim=2" in text.splitlines()[1]
    back = parse_xyz(text)
    assert back.dimension == 2 and back.box is None
    assert np.array_equal(back.positions, s.positions)
    assert back.species == ("A", "B") or list(back.species) == ["A", "B"]


def test_diagonal_nine_number_lattice():
    text = '2\nLattice="4 0 0 0 5 0 0 0 6"\nX 0 0 0\nX 1 1 1\n'
    assert np.array_equal(parse_xyz(text).box, [4, 5, 6])


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("abc\n\n", 1),
    ("2\n\nX 0 0 0\n", 4),
    ("2\n\nX 0 0 0\nX 1 q 0\n", 4),
    ("1\n\nX 0 0\n", 3),
    ('1\nLattice="1 2 3 4"\nX 0 0 0\n', 2),
    ('1\ndim=4\nX 0 0 0\n', 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(XYZParseError) as info:
        parse_xyz(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)
