"""Shared numerical primitives: chi-square family, gamma quantiles, symmetric matrices."""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np
from scipy import linalg, special, stats

from .errors import DomainError, SingularMatrixError

ArrayLike = Union[Sequence[float], np.ndarray]

MAX_CONDITION = 1e12
POISSON_TAIL = 1e-12
MAX_DIM = 16


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def chi2_cdf(x: float, k: int) -> float:
    if x <= 0.0:
        return 0.0
    return float(special.chdtr(k, x))


def chi2_sf(x: float, k: int) -> float:
    if x <= 0.0:
        return 1.0
    return float(special.chdtrc(k, x))


def chi2_quantile(k: int, alpha: float) -> float:
    """Upper-alpha point of chi-square with k degrees of freedom."""
    if k < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {k}")
    _check_alpha(alpha)
    return float(stats.chi2.isf(alpha, k))


def noncentral_chi2_cdf(x: float, k: int, delta: float) -> float:
    """CDF of the noncentral chi-square as a Poisson(delta/2) mixture of central CDFs.

    Terms are summed over the Poisson index range holding all but POISSON_TAIL of the
    mixing mass, on both sides of the mode.
    """
    if x < 0.0 or delta < 0.0:
        raise DomainError(f"x and delta must be nonnegative, got x={x}, delta={delta}")
    if k < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {k}")
    if x == 0.0:
        return 0.0
    if delta == 0.0:
        return chi2_cdf(x, k)
    mixing = stats.poisson(delta / 2.0)
    lo = max(int(mixing.ppf(POISSON_TAIL / 2.0)), 0)
    hi = int(mixing.isf(POISSON_TAIL / 2.0)) + 1
    index = np.arange(lo, hi + 1)
    weights = mixing.pmf(index)
    central = special.chdtr(k + 2.0 * index, x)
    value = float(np.dot(weights, central))
    return min(max(value, 0.0), 1.0)


def noncentral_chi2_sf(x: float, k: int, delta: float) -> float:
    return 1.0 - noncentral_chi2_cdf(x, k, delta)


def gamma_cdf(x: ArrayLike, shape: float, rate: float) -> np.ndarray:
    return special.gammainc(shape, rate * np.maximum(np.asarray(x, dtype=float), 0.0))


def gamma_quantile(
    shape: float,
    rate: float,
    p: Union[float, np.ndarray],
    *,
    upper_tail: bool = False,
) -> Union[float, np.ndarray]:
    """Inverse of the Ga(shape, rate) CDF.

    With ``upper_tail`` the argument is the survival probability, which keeps full
    relative accuracy deep in the right tail (used by the copula sampler).
    """
    if shape <= 0.0 or rate <= 0.0:
        raise DomainError(f"shape and rate must be positive, got {shape}, {rate}")
    prob = np.asarray(p, dtype=float)
    if upper_tail:
        if np.any((prob <= 0.0) | (prob > 1.0)):
            raise DomainError("upper-tail probability must lie in (0, 1]")
        out = special.gammainccinv(shape, prob) / rate
    else:
        if np.any((prob < 0.0) | (prob >= 1.0)):
            raise DomainError("probability must lie in [0, 1); p = 1 has no finite quantile")
        out = special.gammaincinv(shape, prob) / rate
    if np.ndim(out) == 0:
        return float(out)
    return out


def normal_cdf(z: ArrayLike) -> np.ndarray:
    return special.ndtr(np.asarray(z, dtype=float))


def empirical_quantile(values: ArrayLike, p: float) -> float:
    """Order-statistic quantile: the ceil(p*B)-th smallest value, the minimum at p = 0."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("empirical_quantile needs at least one value")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if p == 0.0:
        return float(arr.min())
    rank = math.ceil(p * arr.size - 1e-12)
    rank = min(max(rank, 1), arr.size)
    return float(np.partition(arr, rank - 1)[rank - 1])


def symmetrize(matrix: ArrayLike) -> np.ndarray:
    arr = np.asarray(matrix, dtype=float)
    return 0.5 * (arr + arr.T)


def check_symmetric(matrix: ArrayLike, tol: float = 1e-10) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(matrix, dtype=float))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {arr.shape}")
    if arr.shape[0] > MAX_DIM:
        raise DomainError(f"dimension {arr.shape[0]} exceeds the supported maximum {MAX_DIM}")
    scale = max(1.0, float(np.max(np.abs(arr))))
    if np.max(np.abs(arr - arr.T)) > tol * scale:
        raise DomainError("matrix is not symmetric")
    return symmetrize(arr)


def sym_inverse(matrix: ArrayLike, ridge: float = 0.0) -> np.ndarray:
    """Inverse of ``matrix + ridge*I`` through a Cholesky factorization."""
    if ridge < 0.0:
        raise DomainError(f"ridge must be nonnegative, got {ridge}")
    arr = check_symmetric(matrix)
    dim = arr.shape[0]
    shifted = arr + ridge * np.eye(dim)
    eig = np.linalg.eigvalsh(shifted)
    if eig[0] <= 0.0 or eig[-1] / eig[0] > MAX_CONDITION:
        cond = math.inf if eig[0] <= 0.0 else eig[-1] / eig[0]
        raise SingularMatrixError(
            f"matrix is numerically singular (condition estimate {cond:.3g}); "
            "use a positive ridge"
        )
    factor = linalg.cho_factor(shifted, lower=True)
    inverse = linalg.cho_solve(factor, np.eye(dim))
    return symmetrize(inverse)


def sym_sqrt(matrix: ArrayLike, *, inverse: bool = False) -> np.ndarray:
    """Symmetric (inverse) square root of a positive definite matrix."""
    arr = check_symmetric(matrix)
    eigval, eigvec = np.linalg.eigh(arr)
    if eigval[0] <= 0.0 or eigval[-1] / eigval[0] > MAX_CONDITION:
        raise SingularMatrixError("matrix is not positive definite")
    power = -0.5 if inverse else 0.5
    return symmetrize((eigvec * eigval**power) @ eigvec.T)


def cholesky_factor(matrix: ArrayLike) -> np.ndarray:
    arr = check_symmetric(matrix)
    try:
        return np.linalg.cholesky(arr)
    except np.linalg.LinAlgError as exc:
        raise DomainError("matrix is not positive definite") from exc


def quad_form(vector: ArrayLike, precision: np.ndarray) -> float:
    vec = np.asarray(vector, dtype=float)
    return float(vec @ precision @ vec)


__all__ = [
    "chi2_cdf",
    "chi2_quantile",
    "chi2_sf",
    "cholesky_factor",
    "empirical_quantile",
    "gamma_cdf",
    "gamma_quantile",
    "noncentral_chi2_cdf",
    "noncentral_chi2_sf",
    "normal_cdf",
    "quad_form",
    "sym_inverse",
    "sym_sqrt",
    "symmetrize",
]
