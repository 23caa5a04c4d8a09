"""Bond angles, adaptive angle discretization and the extracopularity coefficient.

For a particle with ``k`` bonds there are ``(k**2 - k) / 2`` bond pairs. After
grouping the pairwise bond angles into ``|Theta|`` classes, the coefficient

    E = log2((k**2 - k) / (2 |Theta|))

is the number of bits saved by enumerating distinct angles instead of pairs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .core import DomainError, ParticleSystem
from .neighborhoods import NeighborMap

__all__ = [
    "AnglePartition",
    "ExtracopResult",
    "bond_vectors",
    "bond_angles",
    "partition_angles",
    "discretize_angles",
    "coefficient",
    "polygon_coefficient",
    "max_coefficient",
    "analyze",
    "CSV_HEADER",
]

CSV_HEADER = ("index", "k", "unique_angles", "E", "delta")

# exact ties |a - b| == delta must stay in tolerance despite rounding
_DELTA_ATOL = 1e-9
_MAX_T = 64


@dataclass(frozen=True)
class AnglePartition:
    """A delta-tolerance partition of one neighborhood's bond angles.

    ``labels[i]`` is the class of ``angles[i]``; classes are numbered in
    ascending order of their smallest angle.
    """

    angles: np.ndarray
    labels: np.ndarray
    class_means: np.ndarray
    delta: float
    t: int
    rmse: float

    @property
    def n_classes(self) -> int:
        return len(self.class_means)


def bond_vectors(system: ParticleSystem, center: int, neighbors) -> np.ndarray:
    """Bonds ``q_i - p`` (minimum image) from ``center`` to each neighbor."""
    nb = np.asarray(neighbors, dtype=np.intp)
    b = system.minimum_image(system.positions[nb] - system.positions[center])
    if len(b) and np.any(np.linalg.norm(b, axis=1) == 0):
        raise DomainError(f"particle {center} has a zero-length bond")
    return b


def _pair_cosines(bonds: np.ndarray) -> np.ndarray:
    """Cosines of all bond pairs, ``bonds`` shaped ``(m, k, d)`` -> ``(m, P)``."""
    k = bonds.shape[1]
    unit = bonds / np.linalg.norm(bonds, axis=2, keepdims=True)
    i, j = np.triu_indices(k, 1)
    return np.einsum("mpd,mpd->mp", unit[:, i], unit[:, j])


def _angles_deg(cosines: np.ndarray) -> np.ndarray:
    return np.degrees(np.arccos(np.clip(cosines, -1.0, 1.0)))


def bond_angles(bonds) -> np.ndarray:
    """Smaller angle (degrees) between every pair of bonds, ordered by ``(i, j)``."""
    b = np.asarray(bonds, dtype=np.float64)
    if b.ndim != 2 or len(b) < 2:
        return np.empty(0)
    if np.any(np.linalg.norm(b, axis=1) == 0):
        raise DomainError("zero-length bond")
    return _angles_deg(_pair_cosines(b[None]))[0]


def _greedy_labels(sorted_angles: np.ndarray, delta) -> np.ndarray:
    """Sweep each row left to right, opening a class when an angle exceeds
    the current class minimum by more than ``delta``."""
    m, p = sorted_angles.shape
    delta = np.broadcast_to(np.asarray(delta, dtype=np.float64), (m,)) + _DELTA_ATOL
    labels = np.zeros((m, p), dtype=np.intp)
    if p == 0:
        return labels
    cur_min = sorted_angles[:, 0].copy()
    lab = np.zeros(m, dtype=np.intp)
    for j in range(1, p):
        a = sorted_angles[:, j]
        new = a - cur_min > delta
        lab += new
        cur_min = np.where(new, a, cur_min)
        labels[:, j] = lab
    return labels


def _class_stats(sorted_angles: np.ndarray, labels: np.ndarray):
    """Class means broadcast per angle, class counts and RMSE for each row."""
    m, p = sorted_angles.shape
    flat = (np.arange(m)[:, None] * p + labels).ravel()
    sums = np.bincount(flat, weights=sorted_angles.ravel(), minlength=m * p)
    counts = np.bincount(flat, minlength=m * p)
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    resid = sorted_angles - means[flat].reshape(m, p)
    rmse = np.sqrt(np.mean(resid**2, axis=1))
    n_classes = labels[:, -1] + 1
    return means.reshape(m, p), n_classes, rmse


def _discretize_rows(angles: np.ndarray, rmse_threshold: float):
    """Adaptive discretization of many equally long angle lists at once.

    Returns per-row class count, delta, t and RMSE, plus the sorted angles and
    their final labels.
    """
    s = np.sort(angles, axis=1)
    m = len(s)
    n_classes = np.zeros(m, dtype=np.intp)
    deltas = np.zeros(m)
    ts = np.zeros(m, dtype=np.intp)
    rmses = np.zeros(m)
    labels = np.zeros(s.shape, dtype=np.intp)
    active = np.arange(m)
    t = 0
    while len(active) and t < _MAX_T:
        t += 1
        delta = 180.0 / 2**t
        sub = s[active]
        lab = _greedy_labels(sub, delta)
        _, nc, err = _class_stats(sub, lab)
        done = err <= rmse_threshold
        idx = active[done]
        n_classes[idx] = nc[done]
        deltas[idx] = delta
        ts[idx] = t
        rmses[idx] = err[done]
        labels[idx] = lab[done]
        active = active[~done]
    return n_classes, deltas, ts, rmses, s, labels


def partition_angles(angles, delta: float) -> np.ndarray:
    """Class label of every angle under the greedy delta-tolerance partition."""
    a = np.asarray(angles, dtype=np.float64)
    order = np.argsort(a, kind="stable")
    lab_sorted = _greedy_labels(a[order][None], delta)[0]
    labels = np.empty_like(lab_sorted)
    labels[order] = lab_sorted
    return labels


def discretize_angles(angles, rmse_threshold: float = 5.0) -> AnglePartition:
    """Coarsest partition at ``delta = 180 / 2**t`` whose RMSE is within threshold.

    Starting at ``t = 1`` the tolerance is halved until the root-mean-square
    deviation of angles from their class means drops to ``rmse_threshold``
    degrees or below.
    """
    a = np.asarray(angles, dtype=np.float64).reshape(-1)
    if len(a) == 0:
        raise DomainError("cannot discretize an empty angle list")
    if rmse_threshold <= 0:
        raise DomainError("rmse_threshold must be positive")
    order = np.argsort(a, kind="stable")
    nc, deltas, ts, rmses, s, lab = _discretize_rows(a[order][None], rmse_threshold)
    labels = np.empty(len(a), dtype=np.intp)
    labels[order] = lab[0]
    means = np.array([a[labels == c].mean() for c in range(nc[0])])
    return AnglePartition(a, labels, means, float(deltas[0]), int(ts[0]), float(rmses[0]))


def coefficient(k: int, unique_angles: int) -> float:
    """Extracopularity coefficient in bits; zero when ``k <= 1``."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k <= 1:
        return 0.0
    pairs = (k * k - k) // 2
    if not (1 <= unique_angles <= pairs):
        raise DomainError(f"unique angle count {unique_angles} outside [1, {pairs}] for k={k}")
    return math.log2(pairs / unique_angles)


def polygon_coefficient(k: int) -> float:
    """Closed form of E for a regular ``k``-gon neighborhood."""
    if k < 3:
        raise DomainError("a polygon needs k >= 3")
    return math.log2(k - 1) if k % 2 == 0 else math.log2(k)


def max_coefficient(k: int) -> float:
    """Upper bound ``log2((k**2 - k) / 2)``, reached by regular simplices."""
    if k < 2:
        raise DomainError("max_coefficient needs k >= 2")
    return math.log2((k * k - k) / 2)


@dataclass(frozen=True)
class ExtracopResult:
    """Per-particle coordination number, class count, coefficient and delta."""

    k: np.ndarray
    unique_angles: np.ndarray
    E: np.ndarray
    delta: np.ndarray

    def __len__(self):
        return len(self.k)

    def __getitem__(self, i):
        return {
            "index": int(i),
            "k": int(self.k[i]),
            "unique_angles": int(self.unique_angles[i]),
            "E": float(self.E[i]),
            "delta": float(self.delta[i]),
        }

    def classes(self) -> np.ndarray:
        """``(k, unique_angles)`` pairs, shape ``(n, 2)``."""
        return np.stack([self.k, self.unique_angles], axis=1)

    def to_records(self) -> list[dict]:
        return [self[i] for i in range(len(self))]

    def to_csv(self, fh=None) -> str | None:
        """Write CSV with header ``index,k,unique_angles,E,delta``.

        Returns the text when ``fh`` is None.
        """
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(len(self)):
            w.writerow([i, int(self.k[i]), int(self.unique_angles[i]),
                        repr(float(self.E[i])), repr(float(self.delta[i]))])
        return out.getvalue() if fh is None else None


def analyze(system: ParticleSystem, neighbors: NeighborMap, rmse_threshold: float = 5.0,
            chunk: int = 20000) -> ExtracopResult:
    """Extracopularity of every particle given its neighborhood.

    Particles are processed in groups of equal coordination number so the
    angle discretization runs as array operations.
    """
    n = system.n
    if neighbors.n != n:
        raise DomainError("neighbor map and system sizes differ")
    if rmse_threshold <= 0:
        raise DomainError("rmse_threshold must be positive")
    kk = neighbors.coordination_numbers.astype(np.intp)
    uniq = np.zeros(n, dtype=np.intp)
    E = np.zeros(n)
    delta = np.zeros(n)
    indptr, indices = neighbors.indptr, neighbors.indices
    pos = system.positions
    for k in np.unique(kk):
        if k < 2:
            continue
        members = np.nonzero(kk == k)[0]
        pairs = (k * k - k) // 2
        for start in range(0, len(members), chunk):
            rows = members[start:start + chunk]
            nb = indices[indptr[rows][:, None] + np.arange(k)]
            bonds = system.minimum_image(pos[nb] - pos[rows][:, None, :])
            if np.any(np.linalg.norm(bonds, axis=2) == 0):
                raise DomainError("zero-length bond: coincident particles")
            ang = _angles_deg(_pair_cosines(bonds))
            nc, dl, _, _, _, _ = _discretize_rows(ang, rmse_threshold)
            uniq[rows] = nc
            delta[rows] = dl
            E[rows] = np.log2(pairs / nc)
    return ExtracopResult(kk, uniq, E, delta)
