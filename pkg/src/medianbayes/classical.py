"""Classical comparators: spatial sign/rank score tests, resampling p-values, Hotelling.

One-sample score tests use outer standardization (Sigma-hat = mean of T T'); the
two-sample test uses inner standardization Z = H (Y - h) of the pooled sample.
"""

from __future__ import annotations

import itertools
import logging
import math
from enum import Enum
from typing import Iterator, NamedTuple, Optional, Tuple

import numpy as np

from . import rng as rng_mod
from .bnp_tests import TestOutcome
from .errors import ConvergenceError, DomainError
from .numerics import chi2_quantile, chi2_sf, sym_inverse, sym_sqrt
from .spatial import as_sample, rank_scores, signed_rank_scores, spatial_median, spatial_signs

LOGGER = logging.getLogger(__name__)

DEFAULT_RESAMPLES = 2000
EXACT_LIMIT = 4096
BATCH_SIZE = 512
TIE_TOL = 1e-12


class ScoreKind(str, Enum):
    SIGN = "sign"
    RANK = "rank"
    SIGNED_RANK = "signed_rank"


def _as_kind(kind) -> ScoreKind:
    try:
        return ScoreKind(kind)
    except ValueError as exc:
        raise DomainError(f"unknown score kind: {kind}") from exc


def _centered(data, theta0) -> np.ndarray:
    sample = as_sample(data)
    point = np.asarray(theta0, dtype=float).ravel()
    if point.size != sample.shape[1]:
        raise DomainError(f"theta0 has dimension {point.size}, data has {sample.shape[1]}")
    n, k = sample.shape
    if n <= k:
        raise DomainError(f"need n > k, got n={n}, k={k}")
    return sample - point


def one_sample_scores(centered: np.ndarray, kind) -> np.ndarray:
    """Scores of an already centered sample. ``rank`` means signed rank for one sample."""
    kind = _as_kind(kind)
    if kind is ScoreKind.SIGN:
        return spatial_signs(centered)
    return signed_rank_scores(centered)


def _precision_of(scores: np.ndarray) -> np.ndarray:
    n = scores.shape[0]
    return sym_inverse(scores.T @ scores / n)


def _q2_batch(sums: np.ndarray, precision: np.ndarray, n: int) -> np.ndarray:
    """n * m' P m for rows m = sums / n."""
    means = sums / n
    return n * np.einsum("ri,ij,rj->r", means, precision, means)


def score_statistic(data, theta0, kind=ScoreKind.SIGN) -> Tuple[float, np.ndarray]:
    """Q^2 = n * mean(T)' Sigma-hat^{-1} mean(T) and the scores T(Y_i - theta0)."""
    scores = one_sample_scores(_centered(data, theta0), kind)
    precision = _precision_of(scores)
    q2 = float(_q2_batch(scores.sum(axis=0)[None, :], precision, scores.shape[0])[0])
    return max(q2, 0.0), scores


def chi2_pvalue(Q_sq: float, k: int) -> float:
    return chi2_sf(Q_sq, k)


def _exceeds(values: np.ndarray, observed: float) -> int:
    return int(np.count_nonzero(values >= observed - TIE_TOL * max(1.0, observed)))


def _all_sign_patterns(n: int) -> np.ndarray:
    codes = np.arange(2**n)[:, None]
    bits = (codes >> np.arange(n)[None, :]) & 1
    return 1.0 - 2.0 * bits


def _batches(total: int) -> Iterator[Tuple[int, int]]:
    for index, start in enumerate(range(0, total, BATCH_SIZE)):
        yield index, min(BATCH_SIZE, total - start)


def sign_flip_pvalue(
    data,
    theta0,
    kind=ScoreKind.SIGN,
    flips: int = DEFAULT_RESAMPLES,
    rng: rng_mod.SeedLike = None,
    *,
    exact: Optional[bool] = None,
) -> float:
    """Conditional p-value under directional symmetry: P_delta(Q^2_delta >= Q^2).

    Flipping delta_i (Y_i - theta0) flips the sign and signed-rank scores of the
    same observation and leaves Sigma-hat unchanged, so flipped statistics reuse the
    observed scores. Exact enumeration is used when 2^n <= 4096 unless ``exact`` says
    otherwise; Monte Carlo uses the add-one correction.
    """
    if flips < 1:
        raise DomainError(f"flips must be >= 1, got {flips}")
    observed, scores = score_statistic(data, theta0, kind)
    n = scores.shape[0]
    precision = _precision_of(scores)
    if exact is None:
        exact = 2**n <= EXACT_LIMIT
    if exact:
        if 2**n > 1 << 20:
            raise DomainError(f"exact sign-flip enumeration over 2^{n} patterns is too large")
        patterns = _all_sign_patterns(n)
        values = _q2_batch(patterns @ scores, precision, n)
        return _exceeds(values, observed) / patterns.shape[0]
    root = rng_mod.as_seed_sequence(rng)
    count = 0
    for batch, size in _batches(flips):
        gen = rng_mod.substream(root, batch)
        patterns = 1.0 - 2.0 * gen.integers(0, 2, size=(size, n))
        count += _exceeds(_q2_batch(patterns @ scores, precision, n), observed)
    return (count + 1) / (flips + 1)


class Standardization(NamedTuple):
    H: np.ndarray
    h: np.ndarray
    Z: np.ndarray
    iterations: int
    location_residual: float
    scatter_residual: float


def _pooled(data1, data2) -> Tuple[np.ndarray, int]:
    first = as_sample(data1, name="data1")
    second = as_sample(data2, name="data2")
    if first.shape[1] != second.shape[1]:
        raise DomainError(f"samples differ in dimension: {first.shape[1]} vs {second.shape[1]}")
    return np.vstack([first, second]), first.shape[0]


def _two_sample_kind(kind) -> ScoreKind:
    kind = _as_kind(kind)
    if kind is ScoreKind.SIGNED_RANK:
        raise DomainError("signed-rank scores are defined for one-sample tests only")
    return kind


def pooled_scores(Z: np.ndarray, kind) -> np.ndarray:
    if _two_sample_kind(kind) is ScoreKind.SIGN:
        return spatial_signs(Z)
    return rank_scores(Z, Z)


def _unit_determinant(H: np.ndarray) -> np.ndarray:
    sign, logdet = np.linalg.slogdet(H)
    if sign <= 0:
        raise DomainError("transformation lost positive determinant")
    return H / math.exp(logdet / H.shape[0])


def inner_standardize_two_sample(
    data1,
    data2,
    kind=ScoreKind.SIGN,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> Standardization:
    """Find H (det 1) and h so pooled scores of Z = H(Y - h) have zero mean and scatter
    proportional to the identity.

    Alternates a Weiszfeld-type shift step on the score mean (sign scores only; rank
    scores do not depend on h) with the update H <- C^{-1/2} H, where C is the
    trace-normalized score scatter.
    """
    kind = _two_sample_kind(kind)
    pooled, _ = _pooled(data1, data2)
    n, k = pooled.shape
    if n <= k:
        raise DomainError(f"need pooled n > k, got n={n}, k={k}")
    H = np.eye(k)
    h = spatial_median(pooled) if kind is ScoreKind.SIGN else np.zeros(k)
    loc_res = scat_res = math.inf
    for iteration in range(1, max_iter + 1):
        Z = (pooled - h) @ H.T
        scores = pooled_scores(Z, kind)
        mean = scores.mean(axis=0)
        norms_sq = float(np.mean(np.sum(scores**2, axis=1)))
        if norms_sq == 0.0:
            raise DomainError("all pooled scores vanish; data are degenerate")
        scatter = k * (scores.T @ scores / n) / norms_sq
        loc_res = float(np.linalg.norm(mean))
        scat_res = float(np.max(np.abs(scatter - np.eye(k))))
        if loc_res <= tol and scat_res <= tol:
            LOGGER.debug("Inner standardization converged in %s iterations", iteration)
            return Standardization(H, h, Z, iteration, loc_res, scat_res)
        if kind is ScoreKind.SIGN:
            radii = np.linalg.norm(Z, axis=1)
            inv_radius = np.mean(1.0 / radii[radii > 0.0])
            h = h + np.linalg.solve(H, mean / inv_radius)
        H = _unit_determinant(sym_sqrt(scatter, inverse=True) @ H)
    raise ConvergenceError(
        f"inner standardization did not converge in {max_iter} iterations",
        {"location_residual": loc_res, "scatter_residual": scat_res, "iterations": max_iter},
    )


def _outer_standardize(pooled: np.ndarray, kind: ScoreKind) -> np.ndarray:
    centered = pooled - pooled.mean(axis=0)
    cov = centered.T @ centered / pooled.shape[0]
    H = _unit_determinant(sym_sqrt(cov, inverse=True))
    h = spatial_median(pooled) if kind is ScoreKind.SIGN else np.zeros(pooled.shape[1])
    return (pooled - h) @ H.T


def _two_sample_q2(scores: np.ndarray, membership: np.ndarray, n1: int) -> np.ndarray:
    """Q^2 for each row of the 0/1 membership matrix marking sample 1."""
    n, k = scores.shape
    n2 = n - n1
    total = scores.sum(axis=0)
    sums1 = membership @ scores
    sums2 = total - sums1
    numerator = np.sum(sums1**2, axis=1) / n1 + np.sum(sums2**2, axis=1) / n2
    denominator = float(np.mean(np.sum(scores**2, axis=1)))
    if denominator == 0.0:
        raise DomainError("all pooled scores vanish; data are degenerate")
    return k * numerator / denominator


def _standardized_scores(data1, data2, kind, standardize: bool) -> Tuple[np.ndarray, int]:
    kind = _two_sample_kind(kind)
    pooled, n1 = _pooled(data1, data2)
    k = pooled.shape[1]
    if min(n1, pooled.shape[0] - n1) <= k:
        raise DomainError(f"need n1, n2 > k={k}")
    if standardize:
        Z = inner_standardize_two_sample(data1, data2, kind).Z
    else:
        Z = _outer_standardize(pooled, kind)
    return pooled_scores(Z, kind), n1


def two_sample_score_test(
    data1,
    data2,
    kind=ScoreKind.SIGN,
    standardize: bool = True,
    alpha: float = 0.05,
) -> TestOutcome:
    scores, n1 = _standardized_scores(data1, data2, kind, standardize)
    n, k = scores.shape
    membership = np.zeros((1, n))
    membership[0, :n1] = 1.0
    q2 = float(_two_sample_q2(scores, membership, n1)[0])
    threshold = chi2_quantile(k, alpha)
    return TestOutcome(
        method=_as_kind(kind).value,
        statistic=q2,
        threshold=threshold,
        reject=q2 > threshold,
        p_value=chi2_pvalue(q2, k),
        diagnostics={"standardize": standardize},
    )


def permutation_pvalue(
    data1,
    data2,
    kind=ScoreKind.SIGN,
    perms: int = DEFAULT_RESAMPLES,
    rng: rng_mod.SeedLike = None,
    *,
    exact: Optional[bool] = None,
    standardize: bool = True,
) -> float:
    """Label-permutation p-value for the two-sample Q^2.

    The pooled standardization and pooled scores do not depend on the labels, so each
    permutation only regroups the observed scores.
    """
    if perms < 1:
        raise DomainError(f"perms must be >= 1, got {perms}")
    scores, n1 = _standardized_scores(data1, data2, kind, standardize)
    n = scores.shape[0]
    observed_mask = np.zeros((1, n))
    observed_mask[0, :n1] = 1.0
    observed = float(_two_sample_q2(scores, observed_mask, n1)[0])
    if exact is None:
        exact = math.comb(n, n1) <= EXACT_LIMIT
    if exact:
        combos = list(itertools.combinations(range(n), n1))
        membership = np.zeros((len(combos), n))
        for row, combo in enumerate(combos):
            membership[row, list(combo)] = 1.0
        return _exceeds(_two_sample_q2(scores, membership, n1), observed) / len(combos)
    root = rng_mod.as_seed_sequence(rng)
    count = 0
    for batch, size in _batches(perms):
        gen = rng_mod.substream(root, batch)
        order = np.argsort(gen.random((size, n)), axis=1)
        membership = (order < n1).astype(float)
        count += _exceeds(_two_sample_q2(scores, membership, n1), observed)
    return (count + 1) / (perms + 1)


def one_sample_score_test(
    data,
    theta0,
    kind=ScoreKind.SIGN,
    alpha: float = 0.05,
    *,
    resampling: bool = False,
    flips: int = DEFAULT_RESAMPLES,
    rng: rng_mod.SeedLike = None,
) -> TestOutcome:
    q2, scores = score_statistic(data, theta0, kind)
    k = scores.shape[1]
    if resampling:
        p_value = sign_flip_pvalue(data, theta0, kind, flips, rng)
        return TestOutcome(_as_kind(kind).value, q2, alpha, p_value <= alpha, p_value, {"pvalue": "sign_flip"})
    threshold = chi2_quantile(k, alpha)
    return TestOutcome(_as_kind(kind).value, q2, threshold, q2 > threshold, chi2_pvalue(q2, k), {"pvalue": "chi2"})


def two_sample_resampling_test(
    data1,
    data2,
    kind=ScoreKind.SIGN,
    alpha: float = 0.05,
    *,
    perms: int = DEFAULT_RESAMPLES,
    rng: rng_mod.SeedLike = None,
) -> TestOutcome:
    outcome = two_sample_score_test(data1, data2, kind, True, alpha)
    p_value = permutation_pvalue(data1, data2, kind, perms, rng)
    return TestOutcome(
        outcome.method, outcome.statistic, alpha, p_value <= alpha, p_value, {"pvalue": "permutation"}
    )


def _covariance(sample: np.ndarray) -> np.ndarray:
    centered = sample - sample.mean(axis=0)
    return centered.T @ centered / sample.shape[0]


def _hotelling_outcome(statistic: float, k: int, alpha: float, **diagnostics) -> TestOutcome:
    threshold = chi2_quantile(k, alpha)
    return TestOutcome("hotelling", statistic, threshold, statistic > threshold, chi2_sf(statistic, k), diagnostics)


def hotelling_chi2(data, theta0, alpha: float = 0.05) -> TestOutcome:
    """n (ybar - theta0)' Sigma-hat^{-1} (ybar - theta0) against chi-square(k)."""
    centered = _centered(data, theta0)
    n, k = centered.shape
    diff = centered.mean(axis=0)
    precision = sym_inverse(_covariance(centered))
    statistic = max(float(n * diff @ precision @ diff), 0.0)
    return _hotelling_outcome(statistic, k, alpha, n=n)


def hotelling_chi2_two_sample(data1, data2, alpha: float = 0.05) -> TestOutcome:
    first = as_sample(data1, name="data1")
    second = as_sample(data2, name="data2")
    k = first.shape[1]
    if second.shape[1] != k:
        raise DomainError(f"samples differ in dimension: {k} vs {second.shape[1]}")
    n1, n2 = first.shape[0], second.shape[0]
    if min(n1, n2) <= k:
        raise DomainError(f"need n1, n2 > k={k}")
    diff = first.mean(axis=0) - second.mean(axis=0)
    precision = sym_inverse(_covariance(first) / n1 + _covariance(second) / n2)
    statistic = max(float(diff @ precision @ diff), 0.0)
    return _hotelling_outcome(statistic, k, alpha, n1=n1, n2=n2)


__all__ = [
    "ScoreKind",
    "Standardization",
    "chi2_pvalue",
    "hotelling_chi2",
    "hotelling_chi2_two_sample",
    "inner_standardize_two_sample",
    "one_sample_score_test",
    "one_sample_scores",
    "permutation_pvalue",
    "pooled_scores",
    "score_statistic",
    "sign_flip_pvalue",
    "two_sample_resampling_test",
    "two_sample_score_test",
]
