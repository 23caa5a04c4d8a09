"""Particle-system data model, distances and seeding.

A :class:`ParticleSystem` is an immutable set of points in two or three
dimensions, optionally inside an axis-aligned periodic box. Operations that
"modify" a system (perturbation, thermal noise, rigid motions) return new
systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "ParticleSystem",
    "SeedPolicy",
    "DomainError",
    "pairwise_distance",
    "nearest_neighbor_distance",
    "median_nearest_neighbor_distance",
    "canonical_frame",
]


class DomainError(ValueError):
    """Raised when an input lies outside an operation's domain."""


@dataclass(frozen=True, eq=False)
class ParticleSystem:
    """Positions of ``n`` particles in 2D or 3D.

    Parameters
    ----------
    positions : array_like, shape (n, d)
        Particle coordinates, ``d`` in {2, 3}.
    box : array_like, shape (d,), optional
        Edge lengths of a periodic axis-aligned box with its origin at zero.
        Coordinates are wrapped into ``[0, box)`` on construction.
    species : sequence of str, optional
        Per-particle labels carried through XYZ files (layer tags, etc.).
    """

    positions: np.ndarray
    box: np.ndarray | None = None
    species: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] not in (2, 3):
            raise DomainError(f"positions must have shape (n, 2) or (n, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise DomainError("positions must be finite")
        box = self.box
        if box is not None:
            box = np.array(box, dtype=np.float64).reshape(-1)
            if box.shape != (pos.shape[1],):
                raise DomainError(f"box must have {pos.shape[1]} edge lengths")
            if np.any(box <= 0):
                raise DomainError("box edges must be positive")
            pos = np.mod(pos, box)
            # mod can return exactly box for tiny negative inputs
            pos[pos >= box] -= box[np.nonzero(pos >= box)[1]]
            box.setflags(write=False)
        species = self.species
        if species is not None:
            species = tuple(str(s) for s in species)
            if len(species) != len(pos):
                raise DomainError("species must have one entry per particle")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "species", species)

    def __len__(self):
        return self.positions.shape[0]

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def periodic(self) -> bool:
        return self.box is not None

    # -- geometry ---------------------------------------------------------

    def minimum_image(self, vectors):
        """Wrap displacement vectors to their minimum image (no-op if open)."""
        v = np.asarray(vectors, dtype=np.float64)
        if self.box is None:
            return v
        return v - self.box * np.round(v / self.box)

    def displacement(self, i, j):
        """Vector from particle ``i`` to particle ``j`` (minimum image)."""
        return self.minimum_image(self.positions[j] - self.positions[i])

    @cached_property
    def tree(self) -> cKDTree:
        if self.box is None:
            return cKDTree(self.positions)
        return cKDTree(self.positions, boxsize=self.box)

    @cached_property
    def nearest_neighbor_distances(self) -> np.ndarray:
        """``r_p`` for every particle."""
        if self.n < 2:
            raise DomainError("nearest-neighbor distance needs at least 2 particles")
        d, _ = self.tree.query(self.positions, k=2)
        r = d[:, 1]
        r.setflags(write=False)
        return r

    @cached_property
    def median_nn_distance(self) -> float:
        """Median nearest-neighbor distance over all particles."""
        return float(np.median(self.nearest_neighbor_distances))

    def pairs_within(self, radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All unordered pairs ``i < j`` closer than ``radius``.

        Returns index arrays ``i``, ``j`` and the (minimum-image) distances.
        """
        pairs = self.tree.query_pairs(radius, output_type="ndarray")
        if len(pairs) == 0:
            empty = np.empty(0, dtype=np.intp)
            return empty, empty, np.empty(0)
        i, j = pairs[:, 0], pairs[:, 1]
        d = np.linalg.norm(self.minimum_image(self.positions[j] - self.positions[i]), axis=1)
        return i, j, d

    # -- derived systems --------------------------------------------------

    def with_positions(self, positions) -> "ParticleSystem":
        return ParticleSystem(positions, self.box, self.species)

    def scaled(self, factor: float) -> "ParticleSystem":
        if factor <= 0:
            raise DomainError("scale factor must be positive")
        box = None if self.box is None else self.box * factor
        return ParticleSystem(self.positions * factor, box, self.species)

    def transformed(self, rotation=None, translation=None) -> "ParticleSystem":
        """Apply ``x -> R x + t``. Periodic systems only accept translations."""
        pos = self.positions
        if rotation is not None:
            if self.box is not None:
                raise DomainError("rotating a periodic system breaks its axis-aligned box")
            pos = pos @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            pos = pos + np.asarray(translation, dtype=np.float64)
        return ParticleSystem(pos, self.box, self.species)

    def subset(self, index) -> "ParticleSystem":
        index = np.asarray(index)
        species = None if self.species is None else tuple(np.asarray(self.species, dtype=object)[index])
        return ParticleSystem(self.positions[index], self.box, species)

    def interior_mask(self, margin: float) -> np.ndarray:
        """Particles at least ``margin`` away from the bounding box faces.

        Periodic systems have no boundary, so every particle is interior.
        """
        if self.box is not None or margin <= 0:
            return np.ones(self.n, dtype=bool)
        lo = self.positions.min(axis=0)
        hi = self.positions.max(axis=0)
        return np.all((self.positions - lo >= margin) & (hi - self.positions >= margin), axis=1)


def _check_index(system: ParticleSystem, i) -> int:
    if not (-system.n <= int(i) < system.n) or int(i) != i:
        raise IndexError(f"particle index {i} out of range for {system.n} particles")
    return int(i) % system.n


def pairwise_distance(system: ParticleSystem, i: int, j: int) -> float:
    """Euclidean (minimum-image, if periodic) distance between two particles."""
    i = _check_index(system, i)
    j = _check_index(system, j)
    if i == j:
        raise DomainError("pairwise_distance needs two distinct particles")
    return float(np.linalg.norm(system.displacement(i, j)))


def nearest_neighbor_distance(system: ParticleSystem, i: int) -> float:
    """Distance ``r_p`` from particle ``i`` to its closest other particle."""
    if system.n < 2:
        raise DomainError("nearest-neighbor distance needs at least 2 particles")
    return float(system.nearest_neighbor_distances[_check_index(system, i)])


def median_nearest_neighbor_distance(system: ParticleSystem) -> float:
    if system.n < 2:
        raise DomainError("nearest-neighbor distance needs at least 2 particles")
    return system.median_nn_distance


def canonical_frame(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centroid and orthonormal axes fixed by the point cloud itself.

    Axes are the principal axes of the coordinate covariance, each signed so
    that the third moment of the projected coordinates is nonnegative. The
    frame moves with the points under rotations, reflections and
    translations, so ``(x - c) @ axes`` is invariant to those motions
    whenever the covariance spectrum is simple and the skews are nonzero.
    """
    pos = np.asarray(positions, dtype=np.float64)
    c = pos.mean(axis=0)
    x = pos - c
    _, vecs = np.linalg.eigh(x.T @ x)
    proj = x @ vecs
    skew = np.sum(proj**3, axis=0)
    sign = np.where(skew < 0, -1.0, 1.0)
    return c, vecs * sign


@dataclass(frozen=True)
class SeedPolicy:
    """Deterministic random streams derived from one master seed.

    Every stochastic step asks for a generator keyed by a small tuple of
    integers (a stream tag plus e.g. a sample index); particle ``i`` then
    consumes row ``i`` of the draws, so each random vector is a fixed function
    of ``(master seed, stream, sample, particle)``.
    """

    seed: int = 0

    # stream tags
    PERTURBATION = 1
    THERMAL = 2
    PACKING = 3
    MISC = 4

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError("seed must be a 64-bit unsigned integer")

    def generator(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.PCG64(ss))
