"""Plug-in U/V matrices and local asymptotic power of the NPBayes tests.

U = E[u u'] and V = E[||Y - theta||^{-1} (I - u u')] with u the spatial sign of
Y - theta. The posterior of the spatial median is asymptotically normal with
covariance V^{-1} U V^{-1} / n, and under theta0 + h / sqrt(n) the test statistic is
noncentral chi-square.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Union

import numpy as np

from . import datagen
from . import rng as rng_mod
from .errors import DomainError
from .numerics import chi2_quantile, noncentral_chi2_sf, quad_form, sym_inverse, symmetrize
from .spatial import as_sample

LOGGER = logging.getLogger(__name__)

ATOM_TOL = 1e-12
MIN_MODEL_DRAWS = 1000
DEFAULT_MC_SIZE = 1_000_000

Sampler = Callable[[np.random.Generator, int, np.ndarray], np.ndarray]
Score = Callable[[np.ndarray, np.ndarray], np.ndarray]
Fisher = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """Parametric location family: sampler at theta, score l-dot_theta(y), information I_theta."""

    family: str
    dim: int
    sampler: Sampler
    score: Score
    fisher: Fisher
    params: Dict[str, Any] = field(default_factory=dict)

    def sample(self, gen: np.random.Generator, size: int, theta) -> np.ndarray:
        return self.sampler(gen, size, np.asarray(theta, dtype=float))


@dataclass
class SandwichPair:
    U: np.ndarray
    V: np.ndarray
    mc_size: int
    theta: np.ndarray
    skipped: int = 0

    @property
    def covariance(self) -> np.ndarray:
        """V^{-1} U V^{-1}."""
        v_inv = sym_inverse(self.V)
        return symmetrize(v_inv @ self.U @ v_inv)


def gaussian_model(Sigma) -> ModelSpec:
    scatter = np.atleast_2d(np.asarray(Sigma, dtype=float))
    precision = sym_inverse(scatter)

    def sampler(gen: np.random.Generator, size: int, theta: np.ndarray) -> np.ndarray:
        return datagen.sample_mvn(theta, scatter, size, gen)

    def score(theta: np.ndarray, y: np.ndarray) -> np.ndarray:
        return (y - theta) @ precision

    return ModelSpec("gaussian_location", scatter.shape[0], sampler, score, lambda theta: precision, {"Sigma": scatter})


def t_model(Sigma, nu: float) -> ModelSpec:
    """Multivariate t location family.

    Score: (nu + k) / (nu + d) Sigma^{-1} (y - theta) with d the squared Mahalanobis
    distance; information: (nu + k) / (nu + k + 2) Sigma^{-1}.
    """
    scatter = np.atleast_2d(np.asarray(Sigma, dtype=float))
    precision = sym_inverse(scatter)
    dim = scatter.shape[0]
    information = (nu + dim) / (nu + dim + 2.0) * precision

    def sampler(gen: np.random.Generator, size: int, theta: np.ndarray) -> np.ndarray:
        return datagen.sample_mvt(theta, scatter, nu, size, gen)

    def score(theta: np.ndarray, y: np.ndarray) -> np.ndarray:
        centered = y - theta
        scaled = centered @ precision
        dist = np.einsum("ij,ij->i", scaled, centered)
        return ((nu + dim) / (nu + dist))[:, None] * scaled

    return ModelSpec("t_location", dim, sampler, score, lambda theta: information, {"Sigma": scatter, "nu": nu})


def model_for(spec: datagen.DistributionSpec) -> ModelSpec:
    if spec.family == "mvn":
        return gaussian_model(spec.scatter_matrix)
    if spec.family == "mvt":
        return t_model(spec.scatter_matrix, spec.df)
    raise DomainError(f"no parametric location model for family {spec.family!r}")


def _signs_and_radii(sample: np.ndarray, theta: np.ndarray):
    centered = sample - theta
    radii = np.linalg.norm(centered, axis=1)
    keep = radii > ATOM_TOL
    if not np.any(keep):
        raise DomainError("every observation coincides with theta; U and V are undefined")
    signs = np.zeros_like(centered)
    signs[keep] = centered[keep] / radii[keep, None]
    return signs, radii, keep


def _sandwich_from_sample(sample: np.ndarray, theta: np.ndarray) -> SandwichPair:
    signs, radii, keep = _signs_and_radii(sample, theta)
    kept = signs[keep]
    weight = 1.0 / np.sqrt(radii[keep])
    m = kept.shape[0]
    U = kept.T @ kept / m
    scaled = kept * weight[:, None]
    V = np.mean(1.0 / radii[keep]) * np.eye(sample.shape[1]) - scaled.T @ scaled / m
    skipped = int(sample.shape[0] - m)
    if skipped:
        LOGGER.info("Skipped %s observations at theta when estimating U and V", skipped)
    return SandwichPair(symmetrize(U), symmetrize(V), sample.shape[0], theta, skipped)


def _model_draws(model: ModelSpec, theta: np.ndarray, mc_size: int, rng: rng_mod.SeedLike) -> np.ndarray:
    if mc_size < MIN_MODEL_DRAWS:
        raise DomainError(f"mc_size must be >= {MIN_MODEL_DRAWS} for model mode, got {mc_size}")
    return model.sample(rng_mod.as_generator(rng), mc_size, theta)


def estimate_sandwich(
    model_or_sample: Union[ModelSpec, np.ndarray],
    theta,
    mc_size: int = DEFAULT_MC_SIZE,
    rng: rng_mod.SeedLike = None,
) -> SandwichPair:
    """Monte Carlo (model) or plug-in (sample) estimates of U and V at theta."""
    point = np.asarray(theta, dtype=float).ravel()
    if isinstance(model_or_sample, ModelSpec):
        sample = _model_draws(model_or_sample, point, mc_size, rng)
    else:
        sample = as_sample(model_or_sample)
        if sample.shape[0] <= sample.shape[1]:
            raise DomainError(f"need n > k, got shape {sample.shape}")
    if sample.shape[1] != point.size:
        raise DomainError(f"theta has dimension {point.size}, sample has {sample.shape[1]}")
    return _sandwich_from_sample(sample, point)


def _drift(model: ModelSpec, theta0: np.ndarray, h: np.ndarray, sample: np.ndarray, pair: SandwichPair):
    """E[-V^{-1} u(Y) (l-dot(Y)' I^{-1} h)] with the bracket read as a scalar weight."""
    signs, _, _ = _signs_and_radii(sample, theta0)
    direction = sym_inverse(model.fisher(theta0)) @ h
    weights = model.score(theta0, sample) @ direction
    expectation = (signs * weights[:, None]).mean(axis=0)
    return -sym_inverse(pair.V) @ expectation


def _check_inputs(model: ModelSpec, theta0, h, alpha: float):
    point = np.asarray(theta0, dtype=float).ravel()
    shift = np.asarray(h, dtype=float).ravel()
    if point.size != model.dim or shift.size != model.dim:
        raise DomainError(f"theta0 and h must have dimension {model.dim}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return point, shift


def _power(noncentrality: float, k: int, alpha: float) -> float:
    critical = chi2_quantile(k, alpha)
    return min(max(noncentral_chi2_sf(critical, k, max(noncentrality, 0.0)), 0.0), 1.0)


def drift_and_covariance(
    model: ModelSpec, theta0, h, mc_size: int = DEFAULT_MC_SIZE, rng: rng_mod.SeedLike = None
):
    point = np.asarray(theta0, dtype=float).ravel()
    shift = np.asarray(h, dtype=float).ravel()
    sample = _model_draws(model, point, mc_size, rng)
    pair = _sandwich_from_sample(sample, point)
    return _drift(model, point, shift, sample, pair), pair.covariance


def one_sample_local_power(
    model: ModelSpec,
    theta0,
    h,
    alpha: float = 0.05,
    mc_size: int = DEFAULT_MC_SIZE,
    rng: rng_mod.SeedLike = None,
) -> float:
    """Limiting rejection rate under theta0 + h / sqrt(n)."""
    point, shift = _check_inputs(model, theta0, h, alpha)
    delta, covariance = drift_and_covariance(model, point, shift, mc_size, rng)
    noncentrality = quad_form(delta, sym_inverse(covariance))
    return _power(noncentrality, model.dim, alpha)


def two_sample_local_power(
    model1: ModelSpec,
    model2: ModelSpec,
    theta0,
    h1,
    h2,
    lam: float,
    alpha: float = 0.05,
    mc_size: int = DEFAULT_MC_SIZE,
    rng: rng_mod.SeedLike = None,
) -> float:
    """Limiting rejection rate under theta0 + h_j / sqrt(n_j), with n1 / n -> lam.

    Noncentrality: d' (C1 / lam + C2 / (1 - lam))^{-1} d with
    d = delta(model1, h1) / sqrt(lam) - delta(model2, h2) / sqrt(1 - lam) and C_j the
    sandwich V^{-1} U V^{-1} of each model.
    """
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    if model1.dim != model2.dim:
        raise DomainError("models differ in dimension")
    point, shift1 = _check_inputs(model1, theta0, h1, alpha)
    _, shift2 = _check_inputs(model2, theta0, h2, alpha)
    root = rng_mod.as_seed_sequence(rng)
    delta1, cov1 = drift_and_covariance(model1, point, shift1, mc_size, rng_mod.substream(root, 1))
    delta2, cov2 = drift_and_covariance(model2, point, shift2, mc_size, rng_mod.substream(root, 2))
    drift = delta1 / np.sqrt(lam) - delta2 / np.sqrt(1.0 - lam)
    covariance = cov1 / lam + cov2 / (1.0 - lam)
    return _power(quad_form(drift, sym_inverse(covariance)), model1.dim, alpha)


__all__ = [
    "ModelSpec",
    "SandwichPair",
    "drift_and_covariance",
    "estimate_sandwich",
    "gaussian_model",
    "model_for",
    "one_sample_local_power",
    "t_model",
    "two_sample_local_power",
]
