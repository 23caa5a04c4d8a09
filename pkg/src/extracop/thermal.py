"""Thermal noise: correlated Gaussian displacements.

Displacement components along each axis are drawn from a multivariate normal
whose correlation between particles at normalized distance ``r`` is
``0.8 exp(-r)`` (unit on the diagonal). The matrix implied by that function is
generally indefinite, so it is replaced by its nearest positive
semidefinite correlation matrix before sampling.

Temperatures map onto displacement amplitude through a copper calibration:
the rms displacement is 3.6 % of the nearest-neighbor distance at 300 K and
grows with the square root of temperature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, ParticleSystem, SeedPolicy

__all__ = [
    "CapacityError",
    "ThermalSpec",
    "correlation_function",
    "correlation_matrix",
    "nearest_psd",
    "rms_fraction_at",
    "apply_thermal_displacements",
    "COPPER_MELTING_K",
]

REFERENCE_TEMPERATURE = 300.0
REFERENCE_RMS_FRACTION = 0.036
COPPER_MELTING_K = 1085.0

# largest system sampled with one dense factorization
DENSE_LIMIT = 5000
# correlations beyond this normalized distance are below 3e-4 and may be dropped
DEFAULT_CUTOFF = 8.0


class CapacityError(RuntimeError):
    """Raised when a dense correlated draw would be too large."""


def rms_fraction_at(temperature: float) -> float:
    """Copper-calibrated rms displacement, as a fraction of ``<r_p>``."""
    if temperature < 0:
        raise DomainError("temperature must be nonnegative")
    return REFERENCE_RMS_FRACTION * np.sqrt(temperature / REFERENCE_TEMPERATURE)


@dataclass(frozen=True)
class ThermalSpec:
    """How to displace particles.

    Give either ``temperature`` (kelvin) or ``rms_fraction``. ``cutoff``
    enables the block approximation for systems above ``DENSE_LIMIT``.
    """

    mode: str = "correlated"
    temperature: float | None = None
    rms_fraction: float | None = None
    seed: SeedPolicy = field(default_factory=SeedPolicy)
    cutoff: float | None = None

    def __post_init__(self):
        if self.mode not in ("correlated", "uncorrelated"):
            raise DomainError("mode must be 'correlated' or 'uncorrelated'")
        if (self.temperature is None) == (self.rms_fraction is None):
            raise DomainError("give exactly one of temperature or rms_fraction")
        if self.rms_fraction is not None and self.rms_fraction < 0:
            raise DomainError("rms_fraction must be nonnegative")
        if isinstance(self.seed, int):
            object.__setattr__(self, "seed", SeedPolicy(self.seed))

    @property
    def fraction(self) -> float:
        if self.rms_fraction is not None:
            return float(self.rms_fraction)
        return rms_fraction_at(self.temperature)


def correlation_function(r):
    """``0.8 exp(-r)`` for ``r > 0`` and 1 at ``r == 0``."""
    r = np.asarray(r, dtype=np.float64)
    return np.where(r > 0, 0.8 * np.exp(-r), 1.0)


def correlation_matrix(system: ParticleSystem, cutoff: float | None = None) -> np.ndarray:
    """Dense matrix of ``C(d_ij / <r_p>)``.

    With ``cutoff`` set, entries beyond that normalized distance are zero.
    """
    if system.n < 2:
        raise DomainError("correlation matrix needs at least 2 particles")
    rp = system.median_nn_distance
    x = system.positions
    n = system.n
    c = np.empty((n, n))
    step = max(1, 2_000_000 // n)
    for start in range(0, n, step):
        rows = slice(start, min(n, start + step))
        diff = system.minimum_image(x[rows, None, :] - x[None, :, :])
        r = np.linalg.norm(diff, axis=2) / rp
        block = correlation_function(r)
        if cutoff is not None:
            block[r > cutoff] = 0.0
        c[rows] = block
    np.fill_diagonal(c, 1.0)
    return c


def nearest_psd(matrix) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm, rescaled to a unit diagonal.

    Negative eigenvalues are clipped to zero; the congruence
    ``D^-1/2 X D^-1/2`` then restores unit self-correlation without leaving
    the PSD cone.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("matrix must be square")
    a = 0.5 * (a + a.T)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigendecomposition failed: {exc}") from exc
    if w.min() >= 0:
        return a
    x = (v * np.clip(w, 0, None)) @ v.T
    d = np.sqrt(np.clip(np.diag(x), 1e-300, None))
    x = x / d[:, None] / d[None, :]
    x = 0.5 * (x + x.T)
    np.fill_diagonal(x, 1.0)
    return x


def _psd_sqrt(c: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(c)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.T


def _blocks(system: ParticleSystem, target: int) -> list[np.ndarray]:
    """Split particles into spatial cells holding roughly ``target`` each."""
    d = system.dimension
    pos = system.positions
    lo = pos.min(axis=0) if system.box is None else np.zeros(d)
    hi = pos.max(axis=0) if system.box is None else system.box
    per_axis = max(1, int(np.ceil((system.n / target) ** (1.0 / d))))
    idx = np.floor((pos - lo) / np.maximum(hi - lo, 1e-300) * per_axis).astype(int)
    idx = np.clip(idx, 0, per_axis - 1)
    flat = np.ravel_multi_index(idx.T, (per_axis,) * d)
    order = np.argsort(flat, kind="stable")
    bounds = np.searchsorted(flat[order], np.arange(1, per_axis**d))
    return [b for b in np.split(order, bounds) if len(b)]


def correlated_normals(system: ParticleSystem, rng: np.random.Generator,
                       cutoff: float | None = None) -> np.ndarray:
    """Unit-variance draws, shape ``(n, d)``, correlated across particles.

    Every axis gets an independent draw with the same PSD-corrected
    correlation matrix. Above ``DENSE_LIMIT`` particles a cutoff is required
    and particles are sampled in independent spatial blocks.
    """
    n, d = system.n, system.dimension
    z = rng.standard_normal((n, d))
    if n <= DENSE_LIMIT:
        root = _psd_sqrt(nearest_psd(correlation_matrix(system, cutoff)))
        return root @ z
    if cutoff is None:
        raise CapacityError(f"{n} particles exceed the dense limit {DENSE_LIMIT}; set a cutoff")
    out = np.empty_like(z)
    for block in _blocks(system, DENSE_LIMIT // 2):
        sub = system.subset(block)
        root = _psd_sqrt(nearest_psd(correlation_matrix(sub, cutoff)))
        out[block] = root @ z[block]
    return out


def apply_thermal_displacements(system: ParticleSystem, spec: ThermalSpec) -> ParticleSystem:
    """Return a copy of ``system`` with Gaussian thermal displacements.

    Each displacement component has standard deviation
    ``fraction * <r_p> / sqrt(d)``, so the expected squared displacement
    magnitude is ``(fraction * <r_p>)**2``.
    """
    frac = spec.fraction
    if frac == 0:
        return system.with_positions(system.positions)
    rng = spec.seed.generator(SeedPolicy.THERMAL)
    if spec.mode == "uncorrelated":
        z = rng.standard_normal((system.n, system.dimension))
    else:
        z = correlated_normals(system, rng, spec.cutoff)
    scale = frac * system.median_nn_distance / np.sqrt(system.dimension)
    return system.with_positions(system.positions + scale * z)
