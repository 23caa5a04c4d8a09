"""Procedural test systems: Bravais lattices, a faulted fcc crystal, Penrose
tiling vertices and Poisson-disk packings."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, ParticleSystem, SeedPolicy

__all__ = [
    "LATTICE_TYPES",
    "COORDINATION_NUMBERS",
    "LatticeSpec",
    "PackingSpec",
    "generate_lattice",
    "lattice",
    "packing_factor",
    "generate_fcc_with_extrinsic_stacking_fault",
    "generate_penrose_vertices",
    "generate_poisson_disk",
]

LATTICE_TYPES = (
    "hexagonal", "square", "centered-rectangular", "rectangular", "oblique",
    "fcc", "hcp", "bcc", "simple-cubic", "primitive-monoclinic",
)

# expected robustified-Voronoi coordination numbers
COORDINATION_NUMBERS = {
    "hexagonal": 6, "square": 4, "centered-rectangular": 6, "rectangular": 4,
    "oblique": 6, "fcc": 12, "hcp": 12, "bcc": 14, "simple-cubic": 6,
    "primitive-monoclinic": 6,
}

_DEFAULT_PARAMS = {
    "centered-rectangular": {"ratio": 2.0},
    "rectangular": {"ratio": 2.0},
    "oblique": {"ratio": 2.0, "angle": 60.0},
    "hcp": {"c_over_a": math.sqrt(8.0 / 3.0)},
    "primitive-monoclinic": {"b_over_a": 4.0 / 3.0, "c_over_a": 1.5, "beta": 60.0},
}


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice type, shape parameters and number of conventional cells per axis.

    ``a`` is the length of the first lattice vector (the cubic edge for the
    cubic lattices). ``params`` overrides the defaults in ``_DEFAULT_PARAMS``.
    """

    kind: str
    extent: int | tuple[int, ...] = 6
    a: float = 1.0
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PackingSpec:
    dimension: int
    min_distance: float
    extent: tuple[float, ...]
    attempts: int = 30
    seed: SeedPolicy = field(default_factory=SeedPolicy)
    # candidates are drawn from the shell [r, (1 + shell_width) r); 1 gives
    # textbook Bridson, small widths give near-contact, denser packings
    shell_width: float = 1e-3


def _orthogonal_supercell(basis: np.ndarray, max_mult: int = 12, tol: float = 1e-9):
    """Find an integer combination of 2D/3D lattice vectors spanning an axis-aligned cell.

    Only used for lattices whose vectors lie in coordinate planes.
    """
    d = basis.shape[0]
    cell = np.zeros(d)
    for axis in range(d):
        best = None
        for coeffs in itertools.product(range(-max_mult, max_mult + 1), repeat=d):
            if not any(coeffs):
                continue
            v = np.asarray(coeffs) @ basis
            off = np.delete(v, axis)
            if np.all(np.abs(off) < tol) and v[axis] > tol:
                if best is None or v[axis] < best - tol:
                    best = v[axis]
        if best is None:
            raise DomainError("lattice has no small orthogonal supercell")
        cell[axis] = best
    return cell


def _cell_from_basis(basis: np.ndarray):
    """Axis-aligned cell lengths and the lattice points inside one cell."""
    cell = _orthogonal_supercell(basis)
    d = len(cell)
    n_per_cell = round(np.prod(cell) / abs(np.linalg.det(basis)))
    inv = np.linalg.inv(basis)
    # enumerate lattice points in a bounding region, keep those in [0, cell)
    reach = int(np.ceil(np.abs(np.diag(cell) @ inv).sum())) + 2
    pts = []
    for coeffs in itertools.product(range(-reach, reach + 1), repeat=d):
        v = np.asarray(coeffs, dtype=np.float64) @ basis
        if np.all(v >= -1e-9) and np.all(v < cell - 1e-9):
            pts.append(v)
    pts = np.array(pts)
    pts[np.abs(pts) < 1e-9] = 0.0
    if len(pts) != n_per_cell:
        raise DomainError("failed to enumerate the conventional cell")
    return cell, pts


def _unit_cell(kind: str, params: dict):
    """Conventional axis-aligned cell and motif for lattice constant 1."""
    p = {**_DEFAULT_PARAMS.get(kind, {}), **params}
    s3 = math.sqrt(3.0)
    if kind == "hexagonal":
        return np.array([1.0, s3]), np.array([[0.0, 0.0], [0.5, s3 / 2]])
    if kind == "square":
        return np.array([1.0, 1.0]), np.zeros((1, 2))
    if kind == "rectangular":
        return np.array([1.0, p["ratio"]]), np.zeros((1, 2))
    if kind == "centered-rectangular":
        b = p["ratio"]
        return np.array([1.0, b]), np.array([[0.0, 0.0], [0.5, b / 2]])
    if kind == "oblique":
        phi = math.radians(p["angle"])
        basis = np.array([[1.0, 0.0], [p["ratio"] * math.cos(phi), p["ratio"] * math.sin(phi)]])
        return _cell_from_basis(basis)
    if kind == "simple-cubic":
        return np.ones(3), np.zeros((1, 3))
    if kind == "bcc":
        return np.ones(3), np.array([[0, 0, 0], [0.5, 0.5, 0.5]], dtype=float)
    if kind == "fcc":
        return np.ones(3), np.array([[0, 0, 0], [0.5, 0.5, 0], [0.5, 0, 0.5], [0, 0.5, 0.5]], dtype=float)
    if kind == "hcp":
        c = p["c_over_a"]
        return np.array([1.0, s3, c]), np.array([
            [0.0, 0.0, 0.0],
            [0.5, s3 / 2, 0.0],
            [0.5, s3 / 6, c / 2],
            [0.0, 2 * s3 / 3, c / 2],
        ])
    if kind == "primitive-monoclinic":
        beta = math.radians(p["beta"])
        basis = np.array([
            [1.0, 0.0, 0.0],
            [0.0, p["b_over_a"], 0.0],
            [p["c_over_a"] * math.cos(beta), 0.0, p["c_over_a"] * math.sin(beta)],
        ])
        return _cell_from_basis(basis)
    raise DomainError(f"unknown lattice type {kind!r}; choose from {', '.join(LATTICE_TYPES)}")


def generate_lattice(spec: LatticeSpec) -> ParticleSystem:
    """Periodic Bravais lattice built from repeated conventional cells."""
    cell, motif = _unit_cell(spec.kind, spec.params)
    d = len(cell)
    extent = (spec.extent,) * d if np.isscalar(spec.extent) else tuple(spec.extent)
    if len(extent) != d or min(extent) < 3:
        raise DomainError("lattice extent must be >= 3 along every axis")
    if spec.a <= 0:
        raise DomainError("lattice constant must be positive")
    grid = np.stack(np.meshgrid(*[np.arange(e) for e in extent], indexing="ij"), axis=-1).reshape(-1, d)
    pos = (grid[:, None, :] * cell + motif[None]).reshape(-1, d)
    return ParticleSystem(pos * spec.a, np.asarray(extent) * cell * spec.a)


def lattice(kind: str, extent=6, a: float = 1.0, **params) -> ParticleSystem:
    """Shorthand for ``generate_lattice(LatticeSpec(kind, extent, a, params))``."""
    return generate_lattice(LatticeSpec(kind, extent, a, params))


def packing_factor(system: ParticleSystem) -> float:
    """Fraction of the periodic box filled by spheres of radius ``r_p / 2``."""
    if system.box is None:
        raise DomainError("packing factor needs a periodic box")
    r = system.nearest_neighbor_distances / 2
    d = system.dimension
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return float(np.sum(ball * r**d) / np.prod(system.box))


# ---------------------------------------------------------------------------
# stacking fault


_STACK_OFFSETS = {"A": (0.0, 0.0), "B": (0.5, math.sqrt(3) / 6), "C": (0.0, math.sqrt(3) / 3)}


def _close_packed_layer(letter, nx, ny, z):
    s3 = math.sqrt(3.0)
    ox, oy = _STACK_OFFSETS[letter]
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    base = np.stack([i.ravel() + 0.0, j.ravel() * s3], axis=1)
    row = np.concatenate([base, base + [0.5, s3 / 2]])
    x = np.mod(row[:, 0] + ox, nx)
    y = np.mod(row[:, 1] + oy, ny * s3)
    return np.column_stack([x, y, np.full(len(x), z)])


def generate_fcc_with_extrinsic_stacking_fault(extent=(6, 4), layers: int = 15, fault_plane: int = 7,
                                               a: float = 1.0) -> ParticleSystem:
    """Periodic fcc crystal stacked along [111] with one extra close-packed plane.

    ``extent`` gives in-plane repetitions of the rectangular (1, sqrt 3) cell
    and ``layers`` the number of regular planes (a multiple of 3, so the
    stacking closes on itself across the periodic boundary). The extra plane
    goes in after regular plane ``fault_plane`` and takes the only letter
    differing from both of its neighbors, e.g. ``ABCA|C|BCABC``.

    Species labels read ``"<role>:<layer><letter>"`` with role ``fault`` (the
    inserted plane), ``adjacent`` (the two planes touching it) or ``bulk``.
    ``a`` is the nearest-neighbor distance.
    """
    nx, ny = extent
    if nx < 3 or ny < 3:
        raise DomainError("in-plane extent must be >= 3")
    if layers % 3 or layers < 9:
        raise DomainError("layers must be a multiple of 3 and at least 9")
    if not (3 <= fault_plane <= layers - 4):
        raise DomainError("fault plane needs >= 3 bulk layers on each side")
    letters = ["ABC"[i % 3] for i in range(layers)]
    before, after = letters[fault_plane], letters[fault_plane + 1]
    extra = ({"A", "B", "C"} - {before, after}).pop()
    seq = letters[:fault_plane + 1] + [extra] + letters[fault_plane + 1:]
    fault_idx = fault_plane + 1
    spacing = math.sqrt(2.0 / 3.0)
    blocks, species = [], []
    for li, letter in enumerate(seq):
        layer = _close_packed_layer(letter, nx, ny, li * spacing)
        role = "fault" if li == fault_idx else "adjacent" if abs(li - fault_idx) == 1 else "bulk"
        blocks.append(layer)
        species += [f"{role}:{li}{letter}"] * len(layer)
    box = np.array([nx, ny * math.sqrt(3.0), len(seq) * spacing])
    return ParticleSystem(np.concatenate(blocks) * a, box * a, species)


# ---------------------------------------------------------------------------
# Penrose rhombus tiling


def generate_penrose_vertices(size: int = 6, offsets=None, radius: float | None = None) -> ParticleSystem:
    """Vertices of a rhombus (P3) Penrose tiling by de Bruijn's pentagrid method.

    Every intersection of grid lines ``x . e_r + g_r = k_r`` and
    ``x . e_s + g_s = k_s`` (|k| <= size) yields one rhombus whose corners are
    ``sum_j K_j e_j``. Offsets ``g`` must sum to an integer (zero by default)
    and be generic. Vertices are kept inside a disk where the patch is
    complete; edges have unit length.
    """
    if size < 1:
        raise DomainError("size must be >= 1")
    gam = np.array([0.1, 0.3, -0.2, 0.45, -0.65]) if offsets is None else np.asarray(offsets, float)
    if abs(gam.sum() - round(gam.sum())) > 1e-9:
        raise DomainError("pentagrid offsets must sum to an integer")
    ang = 2 * np.pi * np.arange(5) / 5
    e = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    ks = np.arange(-size, size + 1)
    verts = []
    for r, s in itertools.combinations(range(5), 2):
        kr, kss = np.meshgrid(ks, ks, indexing="ij")
        kr, kss = kr.ravel(), kss.ravel()
        # solve x.e_r = kr - g_r, x.e_s = ks - g_s
        m = np.array([e[r], e[s]])
        rhs = np.stack([kr - gam[r], kss - gam[s]], axis=1)
        x = np.linalg.solve(m, rhs.T).T
        K = np.ceil(x @ e.T + gam)
        for dr, ds in ((0, 0), (1, 0), (1, 1), (0, 1)):
            Kc = K.copy()
            Kc[:, r] = kr + dr
            Kc[:, s] = kss + ds
            verts.append(Kc @ e)
    v = np.concatenate(verts)
    key = np.round(v * 1e8).astype(np.int64)
    _, first = np.unique(key, axis=0, return_index=True)
    v = v[np.sort(first)]
    # the pentagrid with |k| <= size covers a disk of radius ~ size around the origin
    keep_r = 2.0 * size if radius is None else radius
    v = v[np.linalg.norm(v, axis=1) <= keep_r]
    return ParticleSystem(v)


# ---------------------------------------------------------------------------
# Poisson-disk packing


def generate_poisson_disk(spec: PackingSpec) -> ParticleSystem:
    """Bridson-style dart throwing with an active list inside ``[0, extent)``.

    Each step picks a random active point and tries ``attempts`` candidates
    uniformly distributed in the shell ``[r, (1 + shell_width) r)`` around it;
    the first candidate at least ``r`` from every accepted point is accepted,
    and an active point with no successful candidate is retired. The default
    near-contact shell packs about 0.83 points per ``r**2`` in 2D, against 0.62
    for the classic ``[r, 2r)`` shell.
    """
    d = spec.dimension
    r = float(spec.min_distance)
    ext = np.asarray(spec.extent, dtype=np.float64).reshape(-1)
    if d not in (2, 3) or ext.shape != (d,):
        raise DomainError("packing dimension must be 2 or 3 with one extent per axis")
    if r <= 0 or np.any(ext <= r):
        raise DomainError("extent must exceed the minimum distance, which must be positive")
    if not spec.shell_width > 0 or spec.attempts < 1:
        raise DomainError("shell_width must be positive and attempts at least 1")
    seed = spec.seed if isinstance(spec.seed, SeedPolicy) else SeedPolicy(spec.seed)
    rng = seed.generator(SeedPolicy.PACKING)

    cell = r / math.sqrt(d)
    shape = tuple(int(np.ceil(x / cell)) for x in ext)
    grid = np.full(shape, -1, dtype=np.intp)
    reach = int(np.ceil(3 * math.sqrt(d))) + 1
    cap = int(np.prod(ext) / (0.3 * r**d)) + 16
    pts = np.empty((cap, d))
    n = 0

    def insert(x):
        nonlocal n, pts
        if n == len(pts):
            pts = np.concatenate([pts, np.empty_like(pts)])
        pts[n] = x
        grid[tuple((x / cell).astype(int))] = n
        n += 1

    insert(rng.uniform(0, ext))
    active = [0]
    r2 = r * r
    while active:
        slot = int(rng.integers(len(active)))
        p = pts[active[slot]]
        g = rng.standard_normal((spec.attempts, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        # radius density proportional to rho^(d-1) on the shell
        u = rng.random(spec.attempts)
        outer = (1 + spec.shell_width) * r
        rho = (r**d + u * (outer**d - r**d)) ** (1.0 / d)
        cand = p + g * rho[:, None]
        inside = np.all((cand >= 0) & (cand < ext), axis=1)
        c0 = (p / cell).astype(int)
        sl = tuple(slice(max(0, c - reach), min(s, c + reach + 1)) for c, s in zip(c0, shape))
        near = grid[sl].ravel()
        near = near[near >= 0]
        ok = inside.copy()
        if len(near):
            d2 = np.sum((cand[:, None, :] - pts[near][None]) ** 2, axis=2)
            ok &= np.all(d2 >= r2, axis=1)
        hits = np.nonzero(ok)[0]
        if len(hits):
            insert(cand[hits[0]])
            active.append(n - 1)
        else:
            active[slot] = active[-1]
            active.pop()
    return ParticleSystem(pts[:n].copy())
