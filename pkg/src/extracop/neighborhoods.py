"""Neighborhood models: naive, Voronoi and the robustified Voronoi model.

The robustified model decides membership by majority vote over random
whole-system perturbations. Each perturbation moves every particle by a
vector with uniformly random direction and half-normal magnitude of scale
``sigma_fraction * <r_p>``; candidate ``q`` earns a vote for ``p`` whenever the
perturbed pair shares a Voronoi facet, i.e. is joined by a Delaunay edge.
Candidates are restricted to the naive neighborhood ``N_tau(p)``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError, cKDTree

from .core import DomainError, ParticleSystem, SeedPolicy, canonical_frame

__all__ = [
    "DegeneracyError",
    "PerturbationConfig",
    "NeighborMap",
    "naive_neighborhood",
    "naive_neighborhoods",
    "voronoi_neighborhood",
    "robust_voronoi_neighborhood",
    "isotropic_displacements",
]

log = logging.getLogger(__name__)

# relative slack so that exact geometric ties (``d == (tau + 1) r_p``) survive rounding
_TIE_RTOL = 1e-9


class DegeneracyError(RuntimeError):
    """Raised when a Voronoi diagram has co-spherical (degenerate) vertices."""


@dataclass(frozen=True)
class PerturbationConfig:
    sigma_fraction: float = 0.1
    tau: float = 1.0 / 3.0
    max_samples: int = 128
    convergence_window: int = 2
    seed: SeedPolicy = field(default_factory=SeedPolicy)
    # ghost layer / block halo thickness, in units of <r_p>
    ghost_margin: float = 1.5
    # systems above twice this size are triangulated in blocks of about this many particles
    block_size: int | None = 100_000
    workers: int = 1

    def __post_init__(self):
        if not (0.0 < self.sigma_fraction < 0.5):
            raise DomainError("sigma_fraction must lie in (0, 0.5)")
        if self.tau < 0:
            raise DomainError("tau must be nonnegative")
        if not (self.max_samples >= self.convergence_window >= 2):
            raise DomainError("need max_samples >= convergence_window >= 2")
        if isinstance(self.seed, int):
            object.__setattr__(self, "seed", SeedPolicy(self.seed))


@dataclass(frozen=True, eq=False)
class NeighborMap:
    """Per-particle candidate lists with Monte Carlo vote counts.

    Candidates of particle ``i`` are ``candidate_indices[candidate_indptr[i]:
    candidate_indptr[i + 1]]`` (sorted); ``votes`` holds the matching vote
    counts out of ``samples`` draws. A candidate is a neighbor iff its vote
    fraction is strictly above one half.

    Maps built from deterministic adjacency (``from_lists``) have
    ``samples == 0`` and every listed candidate is a neighbor.
    """

    candidate_indptr: np.ndarray
    candidate_indices: np.ndarray
    votes: np.ndarray
    samples: int
    converged: bool = True

    @classmethod
    def from_lists(cls, neighbor_lists) -> "NeighborMap":
        lists = [np.unique(np.asarray(nb, dtype=np.intp)) for nb in neighbor_lists]
        indptr = np.zeros(len(lists) + 1, dtype=np.intp)
        indptr[1:] = np.cumsum([len(nb) for nb in lists])
        indices = np.concatenate(lists) if lists else np.empty(0, dtype=np.intp)
        for i, nb in enumerate(lists):
            if np.any(nb == i):
                raise DomainError(f"particle {i} lists itself as a neighbor")
        return cls(indptr, indices.astype(np.intp), np.ones(len(indices), dtype=np.int64), 0)

    @property
    def n(self) -> int:
        return len(self.candidate_indptr) - 1

    @cached_property
    def candidate_owner(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.candidate_indptr))

    @cached_property
    def vote_fractions(self) -> np.ndarray:
        if self.samples == 0:
            return np.ones(len(self.votes))
        return self.votes / self.samples

    @cached_property
    def member(self) -> np.ndarray:
        if self.samples == 0:
            return np.ones(len(self.votes), dtype=bool)
        return 2 * self.votes > self.samples

    @cached_property
    def undecided(self) -> np.ndarray:
        """Candidates too close to the 1/2 boundary after a non-converged run."""
        if self.converged or self.samples == 0:
            return np.zeros(len(self.votes), dtype=bool)
        margin = 1.0 / (2 * self.samples)
        return np.abs(self.vote_fractions - 0.5) <= margin

    @cached_property
    def indptr(self) -> np.ndarray:
        counts = np.bincount(self.candidate_owner[self.member], minlength=self.n)
        ptr = np.zeros(self.n + 1, dtype=np.intp)
        np.cumsum(counts, out=ptr[1:])
        return ptr

    @cached_property
    def indices(self) -> np.ndarray:
        return self.candidate_indices[self.member]

    @property
    def coordination_numbers(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def candidates(self, i: int) -> np.ndarray:
        return self.candidate_indices[self.candidate_indptr[i]:self.candidate_indptr[i + 1]]

    def vote_fraction(self, i: int, j: int) -> float:
        lo, hi = self.candidate_indptr[i], self.candidate_indptr[i + 1]
        pos = lo + np.searchsorted(self.candidate_indices[lo:hi], j)
        if pos < hi and self.candidate_indices[pos] == j:
            return float(self.vote_fractions[pos])
        return 0.0

    def undecided_particles(self) -> np.ndarray:
        return np.unique(self.candidate_owner[self.undecided])

    def as_lists(self) -> list[np.ndarray]:
        return [self.neighbors(i) for i in range(self.n)]


# ---------------------------------------------------------------------------
# naive model


def naive_neighborhood(system: ParticleSystem, i: int, tau: float) -> np.ndarray:
    """Sorted indices ``j != i`` with ``d(i, j) <= (tau + 1) r_p``."""
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    if system.n < 2:
        raise DomainError("naive neighborhood needs at least 2 particles")
    if not (-system.n <= i < system.n):
        raise IndexError(f"particle index {i} out of range")
    i = i % system.n
    r = (tau + 1.0) * system.nearest_neighbor_distances[i] * (1 + _TIE_RTOL)
    nb = np.asarray(system.tree.query_ball_point(system.positions[i], r), dtype=np.intp)
    nb = np.sort(nb[nb != i])
    return nb


def naive_neighborhoods(system: ParticleSystem, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """``N_tau`` for every particle as CSR arrays ``(indptr, indices)``."""
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    if system.n < 2:
        raise DomainError("naive neighborhood needs at least 2 particles")
    radii = (tau + 1.0) * system.nearest_neighbor_distances * (1 + _TIE_RTOL)
    lists = system.tree.query_ball_point(system.positions, radii, return_sorted=True)
    counts = np.fromiter((len(x) for x in lists), dtype=np.intp, count=len(lists))
    flat = np.fromiter((j for x in lists for j in x), dtype=np.intp, count=int(counts.sum()))
    owner = np.repeat(np.arange(system.n), counts)
    keep = flat != owner
    indptr = np.zeros(system.n + 1, dtype=np.intp)
    np.cumsum(counts - 1, out=indptr[1:])
    return indptr, flat[keep]


# ---------------------------------------------------------------------------
# Voronoi model (Delaunay dual)


def _with_ghosts(points: np.ndarray, box: np.ndarray, margin: float) -> tuple[np.ndarray, np.ndarray]:
    """Append periodic images lying within ``margin`` of the box faces."""
    pts = points
    orig = np.arange(len(points))
    for axis, length in enumerate(box):
        reps = int(np.ceil(margin / length))
        new_pts, new_orig = [pts], [orig]
        for m in range(1, reps + 1):
            reach = margin - (m - 1) * length
            lo = pts[:, axis] < reach
            hi = pts[:, axis] >= length - reach
            shifted = pts[lo].copy()
            shifted[:, axis] += m * length
            new_pts.append(shifted)
            new_orig.append(orig[lo])
            shifted = pts[hi].copy()
            shifted[:, axis] -= m * length
            new_pts.append(shifted)
            new_orig.append(orig[hi])
        pts = np.concatenate(new_pts)
        orig = np.concatenate(new_orig)
    return pts, orig


def _low_rank_edges(points: np.ndarray) -> np.ndarray | None:
    """Adjacency for point sets whose affine hull is lower-dimensional.

    Returns ``None`` if the set is full rank.
    """
    n, d = points.shape
    x = points - points.mean(axis=0)
    _, s, vt = np.linalg.svd(x, full_matrices=False)
    scale = s[0] if len(s) and s[0] > 0 else 1.0
    rank = int(np.sum(s > 1e-10 * scale))
    if rank == d and n > d + 1:
        return None
    if n == 2 or rank <= 1:
        order = np.argsort(x @ vt[0])
        return np.stack([order[:-1], order[1:]], axis=1)
    if rank == d:
        # n == d + 1 points in general position form one simplex
        i, j = np.triu_indices(n, 1)
        return np.stack([i, j], axis=1)
    return _delaunay_edges(x @ vt[:rank].T)


def _delaunay_edges(points: np.ndarray) -> np.ndarray:
    low = _low_rank_edges(points)
    if low is not None:
        return low
    try:
        tri = Delaunay(points)
    except QhullError as exc:
        raise DegeneracyError(f"Delaunay construction failed: {exc}") from exc
    indptr, indices = tri.vertex_neighbor_vertices
    rows = np.repeat(np.arange(len(points)), np.diff(indptr))
    return np.stack([rows, indices], axis=1)


def _spheres_clear(points, simplices, lo, hi, tree, box) -> bool:
    """True if no circumsphere of ``simplices`` can hold an unseen point.

    Spheres inside the box ``[lo, hi]`` (whose bounds may be infinite) are
    covered by the local point set; the others are checked for emptiness
    against ``tree``, which indexes the full (possibly periodic) set.
    """
    centers, radii = _circumspheres(points, simplices)
    # flat simplices only arise inside co-spherical cells, whose tie-break is arbitrary
    finite = np.isfinite(radii)
    centers, radii = centers[finite], radii[finite]
    outside = np.any((centers - radii[:, None] < lo) | (centers + radii[:, None] > hi), axis=1)
    if not outside.any():
        return True
    if box is not None and not np.all(2 * radii[outside] < box.min()):
        return False
    q = centers[outside] if box is None else np.mod(centers[outside], box)
    inside = tree().query_ball_point(q, radii[outside] * (1 - 1e-7), return_length=True)
    return not np.any(inside)


def _lazy_tree(points, box):
    cache = []

    def get():
        if not cache:
            cache.append(cKDTree(points, boxsize=box))
        return cache[0]
    return get


def _periodic_delaunay(points, box, margin, tree=None):
    """Delaunay of the ghost-padded point set and the ghost -> real map.

    Simplices touching a real point whose circumsphere pokes out of the ghost
    layer are the only ones a truncated layer can corrupt. Each of those is
    checked for emptiness against the full periodic point set; if any fails
    the layer is thickened and the triangulation rebuilt.
    """
    n = len(points)
    tree = tree or _lazy_tree(points, box)
    while True:
        pts, orig = _with_ghosts(points, box, margin)
        try:
            tri = Delaunay(pts)
        except QhullError as exc:
            raise DegeneracyError(f"Delaunay construction failed: {exc}") from exc
        if margin >= 2 * box.max():
            # two full periodic images on every side; thicker layers add nothing
            return tri, orig
        simp = tri.simplices[np.any(tri.simplices < n, axis=1)]
        if _spheres_clear(pts, simp, -margin, box + margin, tree, box):
            return tri, orig
        margin *= 1.5
        log.debug("ghost layer too thin, retrying with margin %.3g", margin)


def _rows_to_keys(tri, core_local, local_ids, n):
    indptr, indices = tri.vertex_neighbor_vertices
    starts = indptr[core_local]
    counts = indptr[core_local + 1] - starts
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    take = indices[np.repeat(starts, counts) + offsets]
    rows = np.repeat(local_ids[core_local], counts)
    return rows.astype(np.int64) * n + local_ids[take]


def _facet_keys(facets: np.ndarray, n: int) -> np.ndarray:
    f = np.sort(facets, axis=1).astype(np.int64)
    key = f[:, 0]
    for c in range(1, f.shape[1]):
        key = key * n + f[:, c]
    return key


def _block_keys(points, box, margin, lo, hi, glo, ghi, tree, hull_keys=None):
    """Directed adjacency keys of the points whose cell is ``[lo, hi)``.

    In open systems a block point on the local convex hull has an unclosed
    star, so every local hull facet through a block point must also be a
    facet of the global hull (``hull_keys``).
    """
    n, d = points.shape
    m = margin
    while True:
        if box is not None:
            center = 0.5 * (lo + hi)
            if np.any(hi - lo + 2 * m >= box):
                return None
            x = center + (points - center - box * np.round((points - center) / box))
        else:
            x = points
        sel = np.nonzero(np.all((x >= lo - m) & (x <= hi + m), axis=1))[0]
        local = x[sel]
        core = np.nonzero(np.all((local >= lo) & (local < hi), axis=1))[0]
        if len(core) == 0:
            return np.empty(0, dtype=np.int64)
        if len(local) <= d + 1:
            return None
        try:
            tri = Delaunay(local)
        except QhullError:
            return None
        is_core = np.zeros(len(local), dtype=bool)
        is_core[core] = True
        simp = tri.simplices[np.any(is_core[tri.simplices], axis=1)]
        # open systems: nothing lies beyond the global bounding box
        blo = np.where(lo <= glo, -np.inf, lo - m) if box is None else lo - m
        bhi = np.where(hi >= ghi, np.inf, hi + m) if box is None else hi + m
        ok = _spheres_clear(local, simp, blo, bhi, tree, box)
        if ok and hull_keys is not None:
            facets = tri.convex_hull[np.any(is_core[tri.convex_hull], axis=1)]
            keys = _facet_keys(sel[facets], n)
            pos = np.minimum(np.searchsorted(hull_keys, keys), len(hull_keys) - 1)
            ok = bool(np.all(hull_keys[pos] == keys))
        if ok:
            return _rows_to_keys(tri, core, sel, n)
        m *= 1.5
        log.debug("block halo too thin, retrying with margin %.3g", m)


def _blocked_edge_keys(points, box, margin, target, workers):
    """Adjacency from independent triangulations of spatial blocks.

    Each block is triangulated together with a halo of width ``margin``;
    simplices touching the block are certified with the same circumsphere
    test as the periodic ghost layer. Returns ``None`` when the system is too
    small to split.
    """
    n, d = points.shape
    if box is not None:
        glo, ghi = np.zeros(d), np.asarray(box, dtype=np.float64)
    else:
        glo, ghi = points.min(axis=0), points.max(axis=0)
    span = np.maximum(ghi - glo, 1e-300)
    side = (np.prod(span) * target / n) ** (1.0 / d)
    shape = np.maximum(1, np.round(span / side)).astype(int)
    if np.prod(shape) < 2:
        return None
    edges = [np.linspace(glo[a], ghi[a], shape[a] + 1) for a in range(d)]
    for a in range(d):
        edges[a][-1] = np.inf if box is None else ghi[a]
    tree = _lazy_tree(points, box)
    tree()  # build once before any worker threads start
    hull_keys = None
    if box is None:
        try:
            hull_keys = np.unique(_facet_keys(ConvexHull(points).simplices, n))
        except QhullError:
            return None
    cells = list(np.ndindex(*shape))

    def run(cell):
        lo = np.array([edges[a][c] for a, c in enumerate(cell)])
        hi = np.array([edges[a][c + 1] for a, c in enumerate(cell)])
        return _block_keys(points, box, margin, lo, hi, glo, ghi, tree, hull_keys)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, cells))
    else:
        parts = [run(c) for c in cells]
    if any(p is None for p in parts):
        return None
    return np.unique(np.concatenate(parts))


def _edge_keys(points: np.ndarray, box, margin: float, block_target: int | None = None,
               workers: int = 1) -> np.ndarray:
    """Sorted int64 keys ``i * n + j`` of directed Voronoi adjacency."""
    n = len(points)
    if block_target and n > 2 * block_target:
        keys = _blocked_edge_keys(points, box, margin, block_target, workers)
        if keys is not None:
            return keys
    if box is None:
        e = _delaunay_edges(points)
        keys = np.concatenate([e[:, 0] * n + e[:, 1], e[:, 1] * n + e[:, 0]])
    else:
        tri, orig = _periodic_delaunay(points, box, margin)
        indptr, indices = tri.vertex_neighbor_vertices
        rows = np.repeat(np.arange(n), np.diff(indptr[:n + 1]))
        cols = orig[indices[:indptr[n]]]
        keys = rows.astype(np.int64) * n + cols
    return np.unique(keys)


def _circumspheres(points: np.ndarray, simplices: np.ndarray):
    x0 = points[simplices[:, 0]]
    a = points[simplices[:, 1:]] - x0[:, None, :]
    b = 0.5 * np.sum(a * a, axis=2)
    # flat simplices get an infinite sphere instead of failing the whole batch
    scale = np.max(np.abs(a), axis=(1, 2)) ** a.shape[-1]
    flat = ~(np.abs(np.linalg.det(a)) > 1e-12 * scale)
    c = np.full(x0.shape, np.inf)
    if not flat.all():
        c[~flat] = np.linalg.solve(a[~flat], b[~flat][..., None])[..., 0]
    return x0 + c, np.linalg.norm(c, axis=1)


def _degenerate(tri: Delaunay, consider=None, rtol: float = 1e-9) -> bool:
    """True if some simplex's circumsphere passes through a neighbor's apex."""
    pts = tri.points
    simp = tri.simplices
    centers, radii = _circumspheres(pts, simp)
    nbrs = tri.neighbors
    s_idx, f_idx = np.nonzero(nbrs >= 0)
    if consider is not None:
        keep = np.any(consider[simp[s_idx]], axis=1)
        s_idx, f_idx = s_idx[keep], f_idx[keep]
    t_idx = nbrs[s_idx, f_idx]
    # apex of t opposite the shared facet is the vertex of t not in s
    ts = simp[t_idx]
    in_s = np.any(ts[:, :, None] == simp[s_idx][:, None, :], axis=2)
    apex = ts[~in_s]
    if len(apex) != len(s_idx):
        return True
    dist = np.linalg.norm(pts[apex] - centers[s_idx], axis=1)
    r = radii[s_idx]
    with np.errstate(invalid="ignore"):
        bad = ~np.isfinite(r) | (np.abs(dist - r) <= rtol * r)
    return bool(np.any(bad))


def voronoi_neighborhood(system: ParticleSystem, check_degeneracy: bool = True,
                         ghost_margin: float = 1.5) -> list[np.ndarray]:
    """Conventional Voronoi neighbors of every particle.

    ``q`` is a neighbor of ``p`` iff their Voronoi cells share a facet of
    positive measure, computed as Delaunay adjacency. When
    ``check_degeneracy`` is set, co-spherical configurations (where the
    facet set depends on an arbitrary tie-break) raise
    :class:`DegeneracyError`; perturb the system first to resolve them.
    """
    n = system.n
    if n < 2:
        raise DomainError("Voronoi neighborhoods need at least 2 particles")
    pts = system.positions
    if system.box is None:
        if _low_rank_edges(pts) is None:
            try:
                tri = Delaunay(pts)
            except QhullError as exc:
                raise DegeneracyError(str(exc)) from exc
            if check_degeneracy and (len(tri.coplanar) or _degenerate(tri)):
                raise DegeneracyError("co-spherical points: Voronoi facets are ambiguous")
        keys = _edge_keys(pts, None, 0.0)
    else:
        margin = ghost_margin * system.median_nn_distance
        if check_degeneracy:
            tri, orig = _periodic_delaunay(pts, system.box, margin)
            consider = np.zeros(len(tri.points), dtype=bool)
            consider[:n] = True
            if len(tri.coplanar) or _degenerate(tri, consider):
                raise DegeneracyError("co-spherical points: Voronoi facets are ambiguous")
        keys = _edge_keys(pts, system.box, margin)
    rows, cols = np.divmod(keys, n)
    keep = rows != cols
    rows, cols = rows[keep], cols[keep]
    split = np.searchsorted(rows, np.arange(1, n))
    return [np.asarray(c, dtype=np.intp) for c in np.split(cols, split)]


# ---------------------------------------------------------------------------
# robustified model


def isotropic_displacements(rng: np.random.Generator, n: int, d: int, scale: float) -> np.ndarray:
    """``n`` vectors with uniform direction and half-normal magnitude."""
    g = rng.standard_normal((n, d))
    norm = np.linalg.norm(g, axis=1)
    # a zero-length Gaussian draw has probability zero; guard anyway
    norm[norm == 0] = 1.0
    mag = np.abs(rng.standard_normal(n)) * scale
    return g * (mag / norm)[:, None]


def robust_voronoi_neighborhood(system: ParticleSystem, config: PerturbationConfig | None = None) -> NeighborMap:
    """Majority-vote Voronoi neighborhoods under random perturbations.

    Sampling stops once the decided memberships have stayed identical for
    ``config.convergence_window`` consecutive cumulative sample counts (never
    before two samples), or at ``config.max_samples``. A candidate whose vote
    fraction is exactly 1/2 counts as undecided for this test, so a single
    early miss cannot freeze it out; in the returned map ties are
    non-members.
    """
    config = config or PerturbationConfig()
    n, d = system.n, system.dimension
    if n < 2:
        raise DomainError("neighborhoods need at least 2 particles")
    cand_ptr, cand_idx = naive_neighborhoods(system, config.tau)
    owner = np.repeat(np.arange(n), np.diff(cand_ptr))
    cand_keys = owner.astype(np.int64) * n + cand_idx

    rp = system.median_nn_distance
    sigma = config.sigma_fraction * rp
    if system.box is None:
        # perturb in a frame attached to the points so that rigid motions of the
        # input leave every vote unchanged
        c, axes = canonical_frame(system.positions)
        base = (system.positions - c) @ axes
        box = None
    else:
        base = system.positions
        box = system.box
    margin = config.ghost_margin * rp

    votes = np.zeros(len(cand_keys), dtype=np.int64)
    prev = None
    run = 0
    converged = False
    m = 0
    for m in range(1, config.max_samples + 1):
        rng = config.seed.generator(SeedPolicy.PERTURBATION, m)
        pts = base + isotropic_displacements(rng, n, d, sigma)
        if box is not None:
            pts = np.mod(pts, box)
            pts[pts >= box] = 0.0
        edges = _edge_keys(pts, box, margin, config.block_size, config.workers)
        pos = np.searchsorted(edges, cand_keys)
        pos[pos == len(edges)] = 0
        votes += edges[pos] == cand_keys
        # three states per candidate: in (+1), out (-1), tied at exactly 1/2 (0)
        state = np.sign(2 * votes - m)
        run = run + 1 if prev is not None and np.array_equal(state, prev) else 1
        prev = state
        if m >= 2 and run >= config.convergence_window:
            converged = True
            break
    if not converged:
        log.warning("robust Voronoi neighborhoods did not converge in %d samples", m)
    return NeighborMap(cand_ptr, cand_idx, votes, m, converged)
