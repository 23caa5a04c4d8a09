import math

import numpy as np
import pytest

from extracop import (
    DomainError,
    NeighborMap,
    ParticleSystem,
    analyze,
    bond_angles,
    coefficient,
    discretize_angles,
    max_coefficient,
    polygon_coefficient,
)
from extracop.coefficient import CSV_HEADER, partition_angles
from extracop.validation import REFERENCE_GEOMETRIES, reference_bonds

from conftest import icosahedron


def test_icosahedral_angles():
    ang = bond_angles(icosahedron())
    vals, counts = np.unique(np.round(ang, 2), return_counts=True)
    assert list(vals) == [63.43, 116.57, 180.0]
    assert list(counts) == [30, 30, 6]


def test_opposite_bonds():
    assert np.allclose(bond_angles([[1, 0, 0], [-2, 0, 0]]), [180.0])


def test_cube_angles():
    ang = bond_angles(reference_bonds("regular hexahedral"))
    vals = np.unique(np.round(ang, 2))
    assert list(vals) == [70.53, 109.47, 180.0]


def test_fewer_than_two_bonds():
    assert len(bond_angles(np.zeros((1, 3)) + 1)) == 0


def test_single_class():
    p = discretize_angles([90.0] * 7)
    assert p.n_classes == 1 and p.rmse == 0 and p.t == 1


def test_icosahedral_partition_and_jitter():
    ang = bond_angles(icosahedron())
    assert discretize_angles(ang).n_classes == 3
    rng = np.random.default_rng(3)
    for _ in range(20):
        jit = ang + rng.uniform(-1, 1, ang.shape)
        assert discretize_angles(jit).n_classes == 3


def test_partition_is_greedy_from_class_minimum():
    labels = partition_angles([10, 14, 19, 21, 40], 10.0)
    assert list(labels) == [0, 0, 0, 1, 2]


def test_rmse_threshold_coarsens():
    ang = bond_angles(icosahedron())
    assert discretize_angles(ang, rmse_threshold=90).n_classes < 3


def test_discretize_errors():
    with pytest.raises(DomainError):
        discretize_angles([])
    with pytest.raises(DomainError):
        discretize_angles([1.0], rmse_threshold=0)


@pytest.mark.parametrize("k,u,e", [(12, 3, 4.459), (12, 4, 4.044), (1, 0, 0.0), (2, 1, 0.0)])
def test_coefficient_values(k, u, e):
    assert coefficient(k, u) == pytest.approx(e, abs=5e-4)


def test_coefficient_domain():
    with pytest.raises(DomainError):
        coefficient(4, 0)
    with pytest.raises(DomainError):
        coefficient(4, 7)


def test_table_values():
    expected = {"regular tetrahedral": 2.585, "regular octahedral": 2.907, "regular hexahedral": 3.222,
                "anticuboctahedral": 3.459, "cuboctahedral": 4.044, "regular icosahedral": 4.459,
                "regular dodecahedral": 5.248}
    for name, k, u, _ in REFERENCE_GEOMETRIES:
        assert coefficient(k, u) == pytest.approx(expected[name], abs=5e-4)
        assert len(reference_bonds(name)) == k
        # exact distinct angle count of the ideal geometry
        ang = np.sort(bond_angles(reference_bonds(name)))
        assert 1 + np.count_nonzero(np.diff(ang) > 1e-6) == u


def test_polygon_closed_form():
    assert polygon_coefficient(6) == pytest.approx(math.log2(5))
    assert polygon_coefficient(5) == pytest.approx(math.log2(5))
    assert polygon_coefficient(4) == pytest.approx(math.log2(3))


def test_max_coefficient():
    assert max_coefficient(4) == pytest.approx(math.log2(6))
    assert max_coefficient(3) == pytest.approx(math.log2(3))
    assert max_coefficient(2) == 0.0


def test_analyze_triangle_attains_bound():
    t = 2 * np.pi * np.arange(3) / 3
    s = ParticleSystem(np.vstack([[0, 0], np.column_stack([np.cos(t), np.sin(t)])]))
    r = analyze(s, NeighborMap.from_lists([[1, 2, 3], [0], [0], [0]]))
    assert r.E[0] == pytest.approx(max_coefficient(3))
    assert list(r.k) == [3, 1, 1, 1]
    assert list(r.E[1:]) == [0, 0, 0]


def test_result_serialization():
    s = ParticleSystem([[0, 0], [1, 0], [0, 1]])
    r = analyze(s, NeighborMap.from_lists([[1, 2], [0], [0]]))
    text = r.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    rows = [line.split(",") for line in text.splitlines()[1:]]
    for rec, row in zip(r.to_records(), rows):
        assert float(row[3]) == rec["E"]
        assert int(row[1]) == rec["k"]


def test_coincident_particles_rejected():
    s = ParticleSystem([[0, 0], [0, 0], [1, 0]])
    with pytest.raises(DomainError):
        analyze(s, NeighborMap.from_lists([[1, 2], [0], [0]]))
