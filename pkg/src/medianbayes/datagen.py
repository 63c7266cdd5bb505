"""Reproducible samplers for the simulation families.

Gaussian and t families are elliptical about their location. The gamma family has
Ga(s, r) marginals tied by a Gaussian copula with correlation V; its "location" is a
rigid shift, optionally applied after re-centering the distribution at its spatial
median.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import rng as rng_mod
from .errors import DomainError
from .numerics import check_symmetric, cholesky_factor, gamma_quantile, normal_cdf
from .spatial import spatial_median

LOGGER = logging.getLogger(__name__)

FAMILIES = ("mvn", "mvt", "gamma_copula")
CENTERING_DRAWS = 1_000_000
CENTERING_SEED = 20_240_611
DEFAULT_GAMMA_SHAPE = 2.0
DEFAULT_GAMMA_RATE = 1.0


def _vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).ravel()
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be a finite nonempty vector")
    return arr


def _pd_matrix(value, dim: int, name: str) -> np.ndarray:
    arr = check_symmetric(np.atleast_2d(np.asarray(value, dtype=float)))
    if arr.shape != (dim, dim):
        raise DomainError(f"{name} must be {dim}x{dim}, got {arr.shape}")
    if np.linalg.eigvalsh(arr)[0] <= 0.0:
        raise DomainError(f"{name} must be positive definite")
    return arr


def _correlation(value, dim: int) -> np.ndarray:
    arr = _pd_matrix(value, dim, "V")
    if np.max(np.abs(np.diag(arr) - 1.0)) > 1e-10:
        raise DomainError("V must be a correlation matrix (unit diagonal)")
    return arr


@dataclass(frozen=True)
class DistributionSpec:
    family: str
    location: Tuple[float, ...]
    scatter: Tuple[Tuple[float, ...], ...]
    df: Optional[float] = None
    shape: Optional[float] = None
    rate: Optional[float] = None
    centered: bool = True
    center: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        dim = len(self.location)
        if self.family == "gamma_copula":
            _correlation(self.scatter, dim)
            if not (self.shape and self.shape > 0 and self.rate and self.rate > 0):
                raise DomainError("gamma shape and rate must be positive")
        else:
            _pd_matrix(self.scatter, dim, "Sigma")
        if self.family == "mvt" and not (self.df is not None and self.df >= 1.0):
            raise DomainError(f"t degrees of freedom must be >= 1, got {self.df}")

    @property
    def dim(self) -> int:
        return len(self.location)

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.location, dtype=float)

    @property
    def scatter_matrix(self) -> np.ndarray:
        return np.asarray(self.scatter, dtype=float)

    def with_location(self, location) -> "DistributionSpec":
        return dataclasses.replace(self, location=tuple(float(v) for v in np.ravel(location)))

    @property
    def label(self) -> str:
        if self.family == "mvn":
            return "gaussian"
        if self.family == "mvt":
            return f"t{self.df:g}"
        return f"gamma(s={self.shape:g},r={self.rate:g})"


def _matrix_tuple(matrix) -> Tuple[Tuple[float, ...], ...]:
    return tuple(tuple(float(v) for v in row) for row in np.atleast_2d(np.asarray(matrix, dtype=float)))


def mvn(theta, Sigma) -> DistributionSpec:
    return DistributionSpec("mvn", tuple(_vector(theta, "theta")), _matrix_tuple(Sigma))


def mvt(theta, Sigma, nu: float) -> DistributionSpec:
    return DistributionSpec("mvt", tuple(_vector(theta, "theta")), _matrix_tuple(Sigma), df=float(nu))


def gamma_copula(
    s: float = DEFAULT_GAMMA_SHAPE,
    r: float = DEFAULT_GAMMA_RATE,
    V=None,
    shift=(0.0, 0.0),
    *,
    centered: bool = True,
) -> DistributionSpec:
    loc = _vector(shift, "shift")
    corr = np.eye(loc.size) if V is None else V
    return DistributionSpec(
        "gamma_copula", tuple(loc), _matrix_tuple(corr), shape=float(s), rate=float(r), centered=centered
    )


def sample_mvn(theta, Sigma, n: int, rng: rng_mod.SeedLike) -> np.ndarray:
    loc = _vector(theta, "theta")
    factor = cholesky_factor(_pd_matrix(Sigma, loc.size, "Sigma"))
    gen = rng_mod.as_generator(rng)
    return loc + gen.standard_normal((int(n), loc.size)) @ factor.T


def sample_mvt(theta, Sigma, nu: float, n: int, rng: rng_mod.SeedLike) -> np.ndarray:
    if not nu >= 1.0:
        raise DomainError(f"t degrees of freedom must be >= 1, got {nu}")
    loc = _vector(theta, "theta")
    factor = cholesky_factor(_pd_matrix(Sigma, loc.size, "Sigma"))
    gen = rng_mod.as_generator(rng)
    z = gen.standard_normal((int(n), loc.size)) @ factor.T
    w = gen.chisquare(nu, size=int(n))
    return loc + z / np.sqrt(w / nu)[:, None]


def sample_gamma_copula(s: float, r: float, V, shift, n: int, rng: rng_mod.SeedLike) -> np.ndarray:
    """Gaussian-copula draw with Ga(s, r) marginals, rigidly shifted by ``shift``."""
    loc = _vector(shift, "shift")
    corr = _correlation(V, loc.size)
    z = sample_mvn(np.zeros(loc.size), corr, n, rng)
    # Survival-side inversion keeps the right tail exact where Phi(z) rounds to 1.
    return loc + gamma_quantile(s, r, normal_cdf(-z), upper_tail=True)


@functools.lru_cache(maxsize=32)
def _gamma_spatial_center(
    s: float, r: float, V: Tuple[Tuple[float, ...], ...], draws: int
) -> Tuple[float, ...]:
    dim = len(V)
    sample = sample_gamma_copula(s, r, np.asarray(V), np.zeros(dim), draws, CENTERING_SEED)
    center = spatial_median(sample)
    LOGGER.info("Gamma copula s=%s r=%s spatial median %s (%s draws)", s, r, center, draws)
    return tuple(float(v) for v in center)


def spatial_center(spec: DistributionSpec, draws: int = CENTERING_DRAWS) -> np.ndarray:
    """Spatial median of the unshifted distribution (zero for the elliptical families)."""
    if spec.family != "gamma_copula":
        return np.zeros(spec.dim)
    if spec.center is not None:
        return np.asarray(spec.center, dtype=float)
    return np.asarray(_gamma_spatial_center(spec.shape, spec.rate, spec.scatter, draws))


def resolve_center(spec: DistributionSpec, draws: int = CENTERING_DRAWS) -> DistributionSpec:
    """Pin the re-centering offset so workers do not recompute it."""
    if spec.family != "gamma_copula" or not spec.centered or spec.center is not None:
        return spec
    return dataclasses.replace(spec, center=tuple(spatial_center(spec, draws)))


def sample(spec: DistributionSpec, n: int, rng: rng_mod.SeedLike) -> np.ndarray:
    if spec.family == "mvn":
        return sample_mvn(spec.theta, spec.scatter_matrix, n, rng)
    if spec.family == "mvt":
        return sample_mvt(spec.theta, spec.scatter_matrix, spec.df, n, rng)
    offset = spec.theta
    if spec.centered:
        offset = offset - spatial_center(spec)
    return sample_gamma_copula(spec.shape, spec.rate, spec.scatter_matrix, offset, n, rng)


__all__ = [
    "DistributionSpec",
    "gamma_copula",
    "mvn",
    "mvt",
    "resolve_center",
    "sample",
    "sample_gamma_copula",
    "sample_mvn",
    "sample_mvt",
    "spatial_center",
]
