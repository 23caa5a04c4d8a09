import math

import numpy as np
import pytest

from extracop import (
    DomainError,
    ParticleSystem,
    SeedPolicy,
    median_nearest_neighbor_distance,
    nearest_neighbor_distance,
    pairwise_distance,
)
from extracop.core import canonical_frame
from extracop.generators import lattice


def test_distance_345():
    s = ParticleSystem([[0.0, 0.0], [3.0, 4.0]])
    assert pairwise_distance(s, 0, 1) == 5.0


def test_minimum_image_wraps():
    s = ParticleSystem([[0.5, 0.5], [9.5, 0.5]], box=[10, 10])
    assert pairwise_distance(s, 0, 1) == pytest.approx(1.0)


def test_fcc_nearest_pair():
    a = 1.7
    s = lattice("fcc", 3, a)
    assert nearest_neighbor_distance(s, 0) == pytest.approx(a / math.sqrt(2))
    assert median_nearest_neighbor_distance(lattice("fcc", 3)) == pytest.approx(1 / math.sqrt(2))


def test_simple_cubic_rp():
    s = lattice("simple-cubic", 4)
    assert np.allclose(s.nearest_neighbor_distances, 1.0)


def test_two_particles_rp():
    s = ParticleSystem([[0, 0, 0], [0.3, 0.4, 1.2]])
    assert np.allclose(s.nearest_neighbor_distances, 1.3)


def test_distance_errors():
    s = ParticleSystem([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(IndexError):
        pairwise_distance(s, 0, 5)
    with pytest.raises(DomainError):
        pairwise_distance(s, 1, 1)


def test_invalid_systems():
    with pytest.raises(DomainError):
        ParticleSystem(np.zeros((3, 4)))
    with pytest.raises(DomainError):
        ParticleSystem([[0, 0], [1, 1]], box=[1, 2, 3])
    with pytest.raises(DomainError):
        ParticleSystem([[0, 0], [np.nan, 1]])


def test_wrapping_and_readonly():
    s = ParticleSystem([[-0.5, 10.5], [3, 3]], box=[10, 10])
    assert np.allclose(s.positions[0], [9.5, 0.5])
    assert np.all((s.positions >= 0) & (s.positions < s.box))
    with pytest.raises(ValueError):
        s.positions[0, 0] = 1.0


def test_periodic_rotation_rejected():
    s = lattice("square", 3)
    with pytest.raises(DomainError):
        s.transformed(rotation=np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_interior_mask():
    s = ParticleSystem(lattice("square", 5).positions)
    assert s.interior_mask(1.0).sum() == 9
    assert s.interior_mask(1.5).sum() == 1
    assert lattice("square", 5).interior_mask(1.5).all()


def test_seed_policy_streams():
    a = SeedPolicy(5).generator(SeedPolicy.PERTURBATION, 1).random(4)
    b = SeedPolicy(5).generator(SeedPolicy.PERTURBATION, 1).random(4)
    c = SeedPolicy(5).generator(SeedPolicy.PERTURBATION, 2).random(4)
    d = SeedPolicy(6).generator(SeedPolicy.PERTURBATION, 1).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_canonical_frame_is_rigid_invariant():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 3)) * [3, 2, 1]
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    y = x @ q.T + [5, -1, 2]
    c1, a1 = canonical_frame(x)
    c2, a2 = canonical_frame(y)
    assert np.allclose((x - c1) @ a1, (y - c2) @ a2)
