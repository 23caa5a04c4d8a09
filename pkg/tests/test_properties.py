"""Property-based checks of the invariants."""

import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from extracop import (
    NeighborMap,
    ParticleSystem,
    PerturbationConfig,
    analyze,
    bond_angles,
    coefficient,
    discretize_angles,
    max_coefficient,
    robust_voronoi_neighborhood,
)
from extracop.analysis import local_mean_field, spearman
from extracop.coefficient import partition_angles
from extracop.thermal import nearest_psd

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def bond_sets(draw, dim=3):
    k = draw(st.integers(2, 16))
    b = draw(arrays(np.float64, (k, dim), elements=st.floats(-10, 10, allow_nan=False)))
    norms = np.linalg.norm(b, axis=1)
    if np.any(norms < 1e-3):
        b = b + np.eye(dim)[0] * 20
    return b


@given(bond_sets())
@settings(max_examples=200, deadline=None)
def test_coefficient_bounds(bonds):
    k = len(bonds)
    part = discretize_angles(bond_angles(bonds))
    E = coefficient(k, part.n_classes)
    assert 0.0 <= E <= max_coefficient(k) + 1e-12
    assert part.rmse <= 5.0 or part.t == 64
    assert np.all((bond_angles(bonds) >= 0) & (bond_angles(bonds) <= 180))


@given(st.lists(st.floats(0, 180), min_size=1, max_size=80), st.floats(0.01, 180))
@settings(max_examples=200, deadline=None)
def test_partition_classes_within_delta(angles, delta):
    a = np.sort(np.asarray(angles))
    labels = partition_angles(a, delta)
    assert labels[0] == 0 and np.all(np.diff(labels) >= 0)
    for c in np.unique(labels):
        members = a[labels == c]
        assert members.max() - members.min() <= delta + 1e-9


@given(st.lists(st.floats(0, 180), min_size=1, max_size=60), st.floats(0.5, 60))
@settings(max_examples=100, deadline=None)
def test_discretize_monotone_in_threshold(angles, thr):
    assert discretize_angles(angles, thr * 2).n_classes <= discretize_angles(angles, thr).n_classes


@given(st.integers(3, 40))
def test_polygon_rotation_invariant(k):
    t = 2 * np.pi * np.arange(k) / k + 0.3
    bonds = np.column_stack([np.cos(t), np.sin(t)])
    n = discretize_angles(bond_angles(bonds)).n_classes
    assert n == k // 2 or k > 24


@given(arrays(np.float64, st.integers(3, 30), elements=finite), st.data())
@settings(max_examples=100, deadline=None)
def test_spearman_monotone_invariance(x, data):
    y = data.draw(arrays(np.float64, len(x), elements=finite))
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return
    rho = spearman(x, y)
    assert -1 <= rho <= 1
    # strictly increasing map that cannot merge distinct floats
    squashed = 3.0 * np.searchsorted(np.unique(x), x) - 7.0
    assert math.isclose(spearman(squashed, y), rho, abs_tol=1e-12)
    assert math.isclose(spearman(x, -y), -rho, abs_tol=1e-12)


@given(st.integers(5, 40), st.floats(0.5, 3), st.floats(-5, 5), st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_local_mean_of_constant(n, R, c, seed):
    s = ParticleSystem(np.random.default_rng(seed).uniform(0, 4, (n, 2)))
    means, empty = local_mean_field(s, np.full(n, c), R)
    assert np.allclose(means[~empty], c)


@given(arrays(np.float64, (6, 6), elements=st.floats(-1, 1)))
@settings(max_examples=100, deadline=None)
def test_nearest_psd_properties(a):
    sym = (a + a.T) / 2
    np.fill_diagonal(sym, 1.0)
    out = nearest_psd(sym)
    assert np.linalg.eigvalsh(out).min() >= -1e-10
    assert np.allclose(np.diag(out), 1.0)
    assert np.allclose(out, out.T)


@given(st.integers(0, 2**32 - 1), st.integers(8, 60))
@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_robust_neighbors_rigid_invariance(seed, n):
    rng = np.random.default_rng(seed)
    s = ParticleSystem(rng.uniform(0, 5, (n, 3)))
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    moved = ParticleSystem(2.5 * s.positions @ q.T + rng.uniform(-9, 9, 3))
    cfg = PerturbationConfig(seed=seed % 97)
    a = robust_voronoi_neighborhood(s, cfg)
    b = robust_voronoi_neighborhood(moved, cfg)
    assert np.array_equal(a.votes, b.votes)
    ea = analyze(s, a).E
    eb = analyze(moved, b).E
    assert np.abs(ea - eb).max() <= 1e-9


@given(st.lists(st.lists(st.integers(0, 9), max_size=9), min_size=10, max_size=10))
def test_neighbor_map_from_lists(lists):
    lists = [[j for j in nb if j != i] for i, nb in enumerate(lists)]
    nm = NeighborMap.from_lists(lists)
    for i, nb in enumerate(lists):
        assert list(nm.neighbors(i)) == sorted(set(nb))
