import numpy as np
import pytest

from extracop import (
    DegeneracyError,
    DomainError,
    NeighborMap,
    ParticleSystem,
    PerturbationConfig,
    naive_neighborhood,
    robust_voronoi_neighborhood,
    voronoi_neighborhood,
)
from extracop.generators import COORDINATION_NUMBERS, lattice
from extracop.neighborhoods import isotropic_displacements, naive_neighborhoods


def test_naive_bcc_and_fcc(fcc, bcc):
    assert len(naive_neighborhood(bcc, 0, 1 / 3)) == 14
    assert len(naive_neighborhood(fcc, 0, 1 / 3)) == 12


def test_naive_tau_zero_keeps_ties(fcc):
    assert len(naive_neighborhood(fcc, 5, 0.0)) == 12


def test_naive_batch_matches_single(bcc):
    ptr, idx = naive_neighborhoods(bcc, 1 / 3)
    for i in (0, 7, 100):
        assert np.array_equal(idx[ptr[i]:ptr[i + 1]], np.sort(naive_neighborhood(bcc, i, 1 / 3)))


def test_voronoi_two_particles():
    s = ParticleSystem([[0.0, 0.0], [1.0, 0.5]])
    nb = voronoi_neighborhood(s)
    assert list(nb[0]) == [1] and list(nb[1]) == [0]


def test_voronoi_five_points():
    s = ParticleSystem([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5]])
    nb = voronoi_neighborhood(s)
    assert sorted(nb[4]) == [0, 1, 2, 3]
    # opposite corners meet only at a vertex of the diagram
    assert 3 not in nb[0]


def test_voronoi_collinear():
    s = ParticleSystem([[0.0, 0.0], [2.0, 0.0], [1.0, 0.0]])
    nb = voronoi_neighborhood(s)
    assert sorted(nb[2]) == [0, 1] and list(nb[0]) == [2]


def test_voronoi_degenerate_square_lattice():
    with pytest.raises(DegeneracyError):
        voronoi_neighborhood(ParticleSystem(lattice("square", 4).positions))


@pytest.mark.parametrize("kind", ["fcc", "hcp", "simple-cubic"])
def test_voronoi_degenerate_3d_lattices(kind):
    s = lattice(kind, 4)
    with pytest.raises(DegeneracyError):
        voronoi_neighborhood(s)
    # the unchecked tie-break is arbitrary but must not crash on flat simplices
    k = {len(v) for v in voronoi_neighborhood(s, check_degeneracy=False)}
    assert min(k) >= COORDINATION_NUMBERS[kind] and max(k) > COORDINATION_NUMBERS[kind]


def test_voronoi_bcc_is_not_degenerate(bcc):
    assert {len(v) for v in voronoi_neighborhood(bcc)} == {14}


def test_voronoi_periodic_random_matches_tiling():
    rng = np.random.default_rng(1)
    box = np.array([6.0, 5.0])
    pts = rng.uniform(0, 1, (40, 2)) * box
    periodic = voronoi_neighborhood(ParticleSystem(pts, box))
    # brute force: triangulate a full 3x3 tiling and read off the central copy
    shifts = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)]) * box
    tiled = ParticleSystem(np.concatenate([pts + s for s in shifts]))
    center = next(k for k, s in enumerate(shifts) if not s.any())
    full = voronoi_neighborhood(tiled)
    for i in range(40):
        expect = sorted(set(int(j) % 40 for j in full[center * 40 + i]))
        assert sorted(periodic[i]) == expect


def test_isotropic_displacements_stats():
    rng = np.random.default_rng(0)
    v = isotropic_displacements(rng, 200_000, 3, 0.5)
    mag = np.linalg.norm(v, axis=1)
    # half-normal magnitude: mean sigma * sqrt(2 / pi)
    assert mag.mean() == pytest.approx(0.5 * np.sqrt(2 / np.pi), rel=0.01)
    assert np.abs(v.mean(axis=0)).max() < 0.01


@pytest.mark.parametrize("kind,k", [("fcc", 12), ("bcc", 14), ("hcp", 12), ("simple-cubic", 6),
                                    ("hexagonal", 6), ("square", 4)])
def test_robust_lattices(kind, k):
    s = lattice(kind, 4)
    nm = robust_voronoi_neighborhood(s, PerturbationConfig(seed=3))
    assert np.all(nm.coordination_numbers == k)
    assert nm.converged and nm.samples <= 8


def test_robust_fcc_two_samples(fcc):
    assert robust_voronoi_neighborhood(fcc, PerturbationConfig(seed=0)).samples == 2


def test_robust_is_subset_of_candidates(fcc):
    nm = robust_voronoi_neighborhood(fcc, PerturbationConfig(seed=1))
    for i in (0, 10):
        assert set(nm.neighbors(i)) <= set(nm.candidates(i))


def test_robust_deterministic_and_mutual_where_both_candidates():
    rng = np.random.default_rng(4)
    s = ParticleSystem(rng.uniform(0, 10, (300, 3)))
    a = robust_voronoi_neighborhood(s, PerturbationConfig(seed=9))
    b = robust_voronoi_neighborhood(s, PerturbationConfig(seed=9))
    assert np.array_equal(a.votes, b.votes) and a.samples == b.samples
    # candidate sets use each particle's own r_p, so only pairs that are
    # candidates both ways must agree
    adj = {(i, int(j)) for i in range(s.n) for j in a.neighbors(i)}
    cand = {(i, int(j)) for i in range(s.n) for j in a.candidates(i)}
    assert all((j, i) in adj for i, j in adj if (j, i) in cand)


def test_two_particle_system():
    s = ParticleSystem([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    nm = robust_voronoi_neighborhood(s)
    assert list(nm.coordination_numbers) == [1, 1]


def test_vote_fraction_api(fcc):
    nm = robust_voronoi_neighborhood(fcc, PerturbationConfig(seed=0))
    j = nm.neighbors(0)[0]
    assert nm.vote_fraction(0, j) == 1.0
    assert nm.vote_fraction(0, 0) == 0.0
    assert len(nm.undecided_particles()) == 0


def test_from_lists_rejects_self():
    with pytest.raises(DomainError):
        NeighborMap.from_lists([[0], [0]])


def test_config_validation():
    with pytest.raises(DomainError):
        PerturbationConfig(sigma_fraction=0)
    with pytest.raises(DomainError):
        PerturbationConfig(max_samples=1)
