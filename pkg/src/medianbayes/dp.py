"""Dirichlet-process posterior draws of the spatial median.

Posterior of P under a DP(M G) prior given n observations is DP(M G + n P_n); draws
use truncated stick-breaking with Be(1, M + n) sticks. The M -> 0 limit (Bayesian
bootstrap) reweights the observations by flat Dirichlet weights.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Union

import numpy as np

from . import rng as rng_mod
from .errors import ConvergenceError, DomainError
from .numerics import cholesky_factor
from .spatial import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    WeightedPointSet,
    as_sample,
    weighted_spatial_median,
)

LOGGER = logging.getLogger(__name__)

RESIDUAL_MASS = 1e-4
AtomMode = Literal["per_atom", "block"]
Truncation = Union[int, Literal["auto"]]


@dataclass(frozen=True)
class BaseMeasure:
    """Base distribution G of the prior. Only the Gaussian kind is implemented."""

    mean: np.ndarray
    covariance: np.ndarray
    kind: str = "gaussian"
    _factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind != "gaussian":
            raise DomainError(f"unsupported base measure kind: {self.kind}")
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DomainError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_factor", cholesky_factor(cov))

    @classmethod
    def gaussian(cls, mean, covariance) -> "BaseMeasure":
        return cls(np.asarray(mean, dtype=float), np.asarray(covariance, dtype=float))

    @classmethod
    def isotropic(cls, dim: int, variance: float = 10.0) -> "BaseMeasure":
        return cls(np.zeros(dim), variance * np.eye(dim))

    @property
    def dim(self) -> int:
        return int(self.mean.size)

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        z = gen.standard_normal((size, self.dim))
        return self.mean + z @ self._factor.T

    def shifted(self, offset) -> "BaseMeasure":
        return BaseMeasure(self.mean + np.asarray(offset, dtype=float), self.covariance, self.kind)


@dataclass(frozen=True)
class DPPrior:
    mass: float
    base: BaseMeasure

    def __post_init__(self) -> None:
        if not self.mass > 0.0:
            raise DomainError(f"DP mass must be positive, got {self.mass}")

    @classmethod
    def default(cls, dim: int, mass: float = 2.0, variance: float = 10.0) -> "DPPrior":
        return cls(mass, BaseMeasure.isotropic(dim, variance))


def auto_truncation(mass: float, n: int) -> int:
    return int(math.ceil((mass + n + 1) * math.log(1.0 / RESIDUAL_MASS)))


def _resolve_truncation(truncation: Truncation, mass: float, n: int) -> int:
    if truncation == "auto":
        return auto_truncation(mass, n)
    value = int(truncation)
    if value < 1:
        raise DomainError(f"truncation N must be >= 1, got {truncation}")
    return value


def stick_break_weights(N: int, concentration: float, rng: rng_mod.SeedLike) -> np.ndarray:
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if not concentration > 0.0:
        raise DomainError(f"concentration must be positive, got {concentration}")
    gen = rng_mod.as_generator(rng)
    sticks = np.ones(N)
    sticks[: N - 1] = gen.beta(1.0, concentration, size=N - 1)
    remaining = np.concatenate(([1.0], np.cumprod(1.0 - sticks[: N - 1])))
    return sticks * remaining


def _atom_sources(
    N: int, n: int, mass: float, gen: np.random.Generator, atom_mode: AtomMode
) -> tuple[np.ndarray, np.ndarray]:
    """Mask of atoms taken from G and data-row indices for the others."""
    p_base = mass / (mass + n)
    if atom_mode == "per_atom":
        from_base = gen.random(N) < p_base
    elif atom_mode == "block":
        from_base = np.full(N, bool(gen.random() < p_base))
    else:
        raise DomainError(f"unknown atom mode: {atom_mode}")
    rows = gen.integers(0, n, size=N)
    return from_base, rows


def draw_posterior_atoms(
    N: int,
    data,
    prior: DPPrior,
    rng: rng_mod.SeedLike,
    *,
    atom_mode: AtomMode = "per_atom",
) -> np.ndarray:
    sample = as_sample(data)
    if prior.base.dim != sample.shape[1]:
        raise DomainError(f"base measure dimension {prior.base.dim} != data dimension {sample.shape[1]}")
    gen = rng_mod.as_generator(rng)
    from_base, rows = _atom_sources(N, sample.shape[0], prior.mass, gen, atom_mode)
    atoms = sample[rows].copy()
    count = int(from_base.sum())
    if count:
        atoms[from_base] = prior.base.sample(gen, count)
    return atoms


def _solve(points: np.ndarray, weights: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    solution = weighted_spatial_median(WeightedPointSet.normalized(points, weights), tol, max_iter)
    if not solution.converged:
        raise ConvergenceError(
            f"posterior median solve did not converge in {solution.iterations} iterations",
            {"iterations": solution.iterations, **solution.diagnostics},
        )
    return solution.location


def _check_draw_input(data) -> np.ndarray:
    sample = as_sample(data)
    n, k = sample.shape
    if n < k + 1:
        raise DomainError(f"need n >= k + 1 observations, got n={n}, k={k}")
    return sample


def draw_posterior_median(
    data,
    prior: DPPrior,
    N: Truncation = "auto",
    rng: rng_mod.SeedLike = None,
    *,
    atom_mode: AtomMode = "per_atom",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """One posterior draw of theta(P)."""
    sample = _check_draw_input(data)
    n = sample.shape[0]
    if prior.base.dim != sample.shape[1]:
        raise DomainError(f"base measure dimension {prior.base.dim} != data dimension {sample.shape[1]}")
    gen = rng_mod.as_generator(rng)
    size = _resolve_truncation(N, prior.mass, n)
    weights = stick_break_weights(size, prior.mass + n, gen)
    from_base, rows = _atom_sources(size, n, prior.mass, gen, atom_mode)
    # Data atoms collapse onto their rows; the solution is unchanged by merging duplicates.
    row_weights = np.bincount(rows[~from_base], weights=weights[~from_base], minlength=n)
    points = [sample]
    masses = [row_weights]
    count = int(from_base.sum())
    if count:
        points.append(prior.base.sample(gen, count))
        masses.append(weights[from_base])
    return _solve(np.vstack(points), np.concatenate(masses), tol, max_iter)


def bayesian_bootstrap_weights(n: int, rng: rng_mod.SeedLike) -> np.ndarray:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    gen = rng_mod.as_generator(rng)
    draws = gen.standard_exponential(n)
    return draws / draws.sum()


def draw_bootstrap_median(
    data,
    rng: rng_mod.SeedLike = None,
    *,
    weights: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Spatial median of the data under Bayesian-bootstrap weights (or supplied ones)."""
    sample = _check_draw_input(data)
    if weights is None:
        weights = bayesian_bootstrap_weights(sample.shape[0], rng)
    return _solve(sample, np.asarray(weights, dtype=float), tol, max_iter)


def posterior_median_draws(
    data,
    prior: Optional[DPPrior],
    B: int,
    seed: rng_mod.SeedLike,
    *,
    truncation: Truncation = "auto",
    atom_mode: AtomMode = "per_atom",
) -> np.ndarray:
    """B posterior draws; draw b uses the substream (seed, b). ``prior=None`` is the bootstrap."""
    sample = _check_draw_input(data)
    if B < 1:
        raise DomainError(f"B must be >= 1, got {B}")
    root = rng_mod.as_seed_sequence(seed)
    draws = np.empty((B, sample.shape[1]))
    for b in range(B):
        gen = rng_mod.substream(root, b)
        if prior is None:
            draws[b] = draw_bootstrap_median(sample, gen)
        else:
            draws[b] = draw_posterior_median(sample, prior, truncation, gen, atom_mode=atom_mode)
    return draws


def bootstrap_median_draws(data, B: int, seed: rng_mod.SeedLike) -> np.ndarray:
    return posterior_median_draws(data, None, B, seed)


__all__ = [
    "BaseMeasure",
    "DPPrior",
    "auto_truncation",
    "bayesian_bootstrap_weights",
    "bootstrap_median_draws",
    "draw_bootstrap_median",
    "draw_posterior_atoms",
    "draw_posterior_median",
    "posterior_median_draws",
    "stick_break_weights",
]
