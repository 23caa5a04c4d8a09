"""Statistics over per-particle results: rank correlations, spatial
autocorrelation of E, mesh-likeness and fcc/hcp separability."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .core import DomainError, ParticleSystem
from .neighborhoods import NeighborMap

__all__ = [
    "UndefinedCorrelationError",
    "AutocorrelationReport",
    "MeshReport",
    "DEFAULT_RADIUS_GRID",
    "spearman",
    "local_mean_field",
    "autocorrelation_report",
    "classify_meshiness",
    "separability",
]

DEFAULT_RADIUS_GRID = tuple(np.round(np.arange(0.1, 3.0 + 1e-9, 0.05), 2))


class UndefinedCorrelationError(ValueError):
    """Raised when a correlation has no defined value (constant input)."""


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(x) != len(y):
        raise DomainError("spearman needs equally long inputs")
    if len(x) < 3:
        raise DomainError("spearman needs at least 3 observations")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    den = np.sqrt(np.dot(rx, rx) * np.dot(ry, ry))
    if den == 0:
        raise UndefinedCorrelationError("rank correlation of a constant vector is undefined")
    return float(np.clip(np.dot(rx, ry) / den, -1.0, 1.0))


def local_mean_field(system: ParticleSystem, values, R: float):
    """Mean of ``values`` over other particles within ``R * <r_p>``.

    Returns ``(means, empty)``; ``empty`` flags particles whose ball holds no
    other particle, where the mean is NaN.
    """
    if R <= 0:
        raise DomainError("R must be positive")
    v = np.asarray(values, dtype=np.float64)
    if len(v) != system.n:
        raise DomainError("one value per particle required")
    i, j, _ = system.pairs_within(R * system.median_nn_distance * (1 + 1e-12))
    sums = np.bincount(i, weights=v[j], minlength=system.n) + np.bincount(j, weights=v[i], minlength=system.n)
    counts = np.bincount(i, minlength=system.n) + np.bincount(j, minlength=system.n)
    empty = counts == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    means[empty] = np.nan
    return means, empty


@dataclass(frozen=True)
class AutocorrelationReport:
    rho_E_k: float
    rho_E_localmean: float
    best_radius: float
    radius_grid: tuple[float, ...]
    rho_by_radius: tuple[float, ...]

    def to_dict(self) -> dict:
        return asdict(self)


def autocorrelation_report(system: ParticleSystem, results, radius_grid=DEFAULT_RADIUS_GRID,
                           mask=None) -> AutocorrelationReport:
    """Spearman correlation of E with k and with its local ball mean.

    ``mask`` restricts which particles enter the correlations (e.g. interior
    particles); ball means always draw on every particle. Radii whose balls
    are empty for some masked particle, or whose correlation is undefined,
    score NaN and cannot be selected.
    """
    E = np.asarray(results.E, dtype=np.float64)
    k = np.asarray(results.k, dtype=np.float64)
    sel = np.ones(system.n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    grid = tuple(float(r) for r in radius_grid)
    if not grid:
        raise DomainError("radius grid must be nonempty")
    rho_k = spearman(E[sel], k[sel])
    rhos = []
    for R in grid:
        means, empty = local_mean_field(system, E, R)
        use = sel & ~empty
        if np.any(sel & empty) or use.sum() < 3:
            rhos.append(float("nan"))
            continue
        try:
            rhos.append(spearman(E[use], means[use]))
        except UndefinedCorrelationError:
            rhos.append(float("nan"))
    arr = np.array(rhos)
    if np.all(np.isnan(arr)):
        raise UndefinedCorrelationError("no radius in the grid gives a defined correlation")
    best = int(np.nanargmax(arr))
    return AutocorrelationReport(rho_k, float(arr[best]), grid[best], grid, tuple(rhos))


@dataclass(frozen=True)
class MeshReport:
    kind: str  # "regular mesh", "irregular mesh" or "non-mesh"
    density_cv: float
    uniform: bool
    unimodal: bool
    k_histogram: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _is_unimodal(hist: np.ndarray, rel: float = 0.1) -> bool:
    h = np.concatenate([[0], hist, [0]]).astype(float)
    peak = h.max()
    # a plateau counts once: compare against the previous distinct value
    maxima = []
    i = 1
    while i < len(h) - 1:
        j = i
        while j + 1 < len(h) - 1 and h[j + 1] == h[i]:
            j += 1
        if h[i] > h[i - 1] and h[i] > h[j + 1]:
            maxima.append(h[i])
        i = j + 1
    big = [m for m in maxima if m > rel * peak]
    return len(big) <= 1


def classify_meshiness(system: ParticleSystem, neighbors: NeighborMap, mask=None,
                       max_cv: float = 0.5, per_cell: float = 10.0) -> MeshReport:
    """Mesh-likeness: uniform density plus a unimodal coordination histogram.

    Density is judged by the coefficient of variation of particle counts on a
    coarse grid averaging ``per_cell`` particles per cell.
    """
    n, d = system.n, system.dimension
    pos = system.positions
    if system.box is not None:
        lo, hi = np.zeros(d), system.box
    else:
        lo, hi = pos.min(axis=0), pos.max(axis=0)
    span = np.maximum(hi - lo, 1e-300)
    # cells per axis proportional to the span so cells are roughly cubic
    vol = np.prod(span)
    side = (vol * per_cell / n) ** (1.0 / d)
    shape = np.maximum(1, np.floor(span / side)).astype(int)
    idx = np.clip(np.floor((pos - lo) / span * shape).astype(int), 0, shape - 1)
    counts = np.bincount(np.ravel_multi_index(idx.T, shape), minlength=int(np.prod(shape)))
    cv = float(counts.std() / counts.mean()) if counts.mean() > 0 else float("inf")
    uniform = cv <= max_cv

    k = neighbors.coordination_numbers
    if mask is not None:
        k = k[np.asarray(mask, dtype=bool)]
    hist = np.bincount(k)
    unimodal = _is_unimodal(hist)
    if not (uniform and unimodal):
        kind = "non-mesh"
    elif np.count_nonzero(hist) == 1:
        kind = "regular mesh"
    else:
        kind = "irregular mesh"
    return MeshReport(kind, cv, bool(uniform), bool(unimodal),
                      {int(i): int(c) for i, c in enumerate(hist) if c})


def separability(group_a, group_b) -> float:
    """Signed effect size ``(mean A - mean B) / pooled sd``.

    Returns +/-inf when the pooled deviation is zero but the means differ
    (perfectly separated constants).
    """
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise DomainError("both groups must be nonempty")
    diff = a.mean() - b.mean()
    dof = len(a) + len(b) - 2
    if dof > 0:
        pooled = np.sqrt(((len(a) - 1) * a.var(ddof=1 if len(a) > 1 else 0)
                          + (len(b) - 1) * b.var(ddof=1 if len(b) > 1 else 0)) / dof)
    else:
        pooled = 0.0
    if pooled == 0:
        if diff == 0:
            raise DomainError("degenerate data: identical constant groups")
        return float(np.sign(diff) * np.inf)
    return float(diff / pooled)
