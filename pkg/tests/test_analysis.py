import numpy as np
import pytest

from extracop import DomainError, NeighborMap, ParticleSystem, PerturbationConfig, robust_voronoi_neighborhood
from extracop.analysis import (
    UndefinedCorrelationError,
    autocorrelation_report,
    classify_meshiness,
    local_mean_field,
    separability,
    spearman,
)
from extracop.coefficient import analyze
from extracop.generators import lattice


def test_spearman_examples():
    x = np.arange(10.0)
    assert spearman(x, x) == pytest.approx(1.0)
    assert spearman(x, -x**3) == pytest.approx(-1.0)
    assert spearman([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6)


def test_spearman_ties_match_pearson_of_average_ranks():
    from scipy.stats import pearsonr, rankdata
    x = [1, 1, 2, 3, 3, 3, 7]
    y = [2, 5, 5, 1, 0, 9, 9]
    assert spearman(x, y) == pytest.approx(pearsonr(rankdata(x), rankdata(y))[0])


def test_spearman_errors():
    with pytest.raises(UndefinedCorrelationError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(DomainError):
        spearman([1, 2], [1, 2])
    with pytest.raises(DomainError):
        spearman([1, 2, 3], [1, 2])


def test_local_mean_empty_balls():
    s = lattice("square", 4)
    means, empty = local_mean_field(s, np.arange(s.n), 0.5)
    assert empty.all() and np.isnan(means).all()


def test_local_mean_constant():
    s = ParticleSystem(np.random.default_rng(0).uniform(0, 5, (60, 2)))
    means, empty = local_mean_field(s, np.full(s.n, 2.5), 2.0)
    assert np.allclose(means[~empty], 2.5)


def test_local_mean_two_particles():
    s = ParticleSystem([[0.0, 0.0], [2.0, 0.0]])
    means, empty = local_mean_field(s, [3.0, 7.0], 1.0)
    assert list(means) == [7.0, 3.0] and not empty.any()


def test_autocorrelation_on_lattice_is_undefined():
    s = lattice("fcc", 3)
    r = analyze(s, robust_voronoi_neighborhood(s, PerturbationConfig(seed=0)))
    with pytest.raises(UndefinedCorrelationError):
        autocorrelation_report(s, r)


def test_autocorrelation_picks_maximum():
    rng = np.random.default_rng(5)
    s = ParticleSystem(rng.uniform(0, 20, (400, 2)))
    r = analyze(s, robust_voronoi_neighborhood(s, PerturbationConfig(seed=0)))
    grid = (2.0, 3.0, 4.0, 5.0)
    rep = autocorrelation_report(s, r, grid)
    finite = [x for x in rep.rho_by_radius if np.isfinite(x)]
    assert rep.rho_E_localmean == max(finite)
    assert rep.best_radius in grid


def test_meshiness_regular_and_non_mesh():
    s = lattice("fcc", 3)
    nm = robust_voronoi_neighborhood(s, PerturbationConfig(seed=0))
    assert classify_meshiness(s, nm).kind == "regular mesh"
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 1, (200, 2))
    clusters = ParticleSystem(np.vstack([a, a + 50]))
    nm = robust_voronoi_neighborhood(clusters, PerturbationConfig(seed=0))
    rep = classify_meshiness(clusters, nm)
    assert rep.kind == "non-mesh" and not rep.uniform


def test_meshiness_bimodal_histogram():
    s = ParticleSystem([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    nm = NeighborMap.from_lists([[1], [0], [0, 1, 3], [0, 1, 2]])
    assert not classify_meshiness(s, nm).unimodal


def test_separability_examples():
    assert separability([1, 2, 3], [4, 5, 6]) == pytest.approx(-3.0)
    assert separability([1, 2, 3], [1, 2, 3]) == 0.0
    assert separability([4.04] * 5, [3.46] * 5) == np.inf
    with pytest.raises(DomainError):
        separability([2.0, 2.0], [2.0, 2.0])
    with pytest.raises(DomainError):
        separability([], [1.0])
