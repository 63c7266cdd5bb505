"""Spatial signs, ranks, signed ranks and the weighted spatial-median solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from .errors import DomainError

LOGGER = logging.getLogger(__name__)

ATOM_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
STALL_RATIO = 0.5
NEWTON_RADIUS = 1e-3
NEWTON_HALVINGS = 40

Vector = Union[Sequence[float], np.ndarray]


def as_sample(data: Any, *, name: str = "data") -> np.ndarray:
    """Coerce to an n x k float matrix; a 1-D input is read as n points in R^1."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DomainError(f"{name} must be an n x k matrix, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise DomainError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def spatial_sign(y: Vector) -> np.ndarray:
    vec = np.asarray(y, dtype=float)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return np.zeros_like(vec)
    return vec / norm


def spatial_signs(points: np.ndarray) -> np.ndarray:
    """Row-wise spatial signs; zero rows map to zero."""
    pts = np.asarray(points, dtype=float)
    norms = np.linalg.norm(pts, axis=-1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return np.where(norms > 0.0, pts / safe, 0.0)


def spatial_rank(y: Vector, sample: Any) -> np.ndarray:
    pts = as_sample(sample, name="sample")
    return spatial_signs(np.asarray(y, dtype=float)[None, :] - pts).mean(axis=0)


def spatial_signed_rank(y: Vector, sample: Any) -> np.ndarray:
    pts = as_sample(sample, name="sample")
    return 0.5 * (spatial_rank(y, pts) + spatial_rank(y, -pts))


def rank_scores(points: Any, sample: Any) -> np.ndarray:
    """R(p, sample) for every row p of ``points``."""
    pts = as_sample(points, name="points")
    ref = as_sample(sample, name="sample")
    return spatial_signs(pts[:, None, :] - ref[None, :, :]).mean(axis=1)


def signed_rank_scores(points: Any) -> np.ndarray:
    """Q(Y_i) for every row of an already centered sample."""
    pts = as_sample(points, name="points")
    return 0.5 * (rank_scores(pts, pts) + rank_scores(pts, -pts))


@dataclass(frozen=True)
class WeightedPointSet:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        pts = as_sample(self.points, name="points")
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.shape[0] != pts.shape[0]:
            raise DomainError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if np.any(w < 0.0) or not np.any(w > 0.0):
            raise DomainError("weights must be nonnegative with at least one positive entry")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL * max(1, w.shape[0]):
            raise DomainError(f"weights must sum to 1, got {w.sum():.15g}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, points: Any, weights: Any) -> "WeightedPointSet":
        w = np.asarray(weights, dtype=float).ravel()
        total = w.sum()
        if not total > 0.0:
            raise DomainError("weights must have a positive total")
        return cls(points, w / total)

    @classmethod
    def uniform(cls, points: Any) -> "WeightedPointSet":
        pts = as_sample(points, name="points")
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])


@dataclass
class MedianSolution:
    location: np.ndarray
    objective: float
    iterations: int
    converged: bool
    at_data_point: bool
    diagnostics: Dict[str, Any] = field(default_factory=dict)


def weighted_objective(points: np.ndarray, weights: np.ndarray, location: Vector) -> float:
    return float(weights @ np.linalg.norm(points - np.asarray(location, dtype=float), axis=1))


def _line_median(pts: np.ndarray, w: np.ndarray, direction: np.ndarray) -> tuple[np.ndarray, bool]:
    """Exact weighted median of points lying on one line; midpoint when it is an interval."""
    origin = pts[0]
    t = (pts - origin) @ direction
    order = np.argsort(t, kind="mergesort")
    t_sorted = t[order]
    cum = np.cumsum(w[order])
    m = int(np.searchsorted(cum, 0.5 - WEIGHT_SUM_TOL))
    m = min(m, t_sorted.size - 1)
    interval = abs(cum[m] - 0.5) <= WEIGHT_SUM_TOL and m + 1 < t_sorted.size
    if interval and t_sorted[m + 1] > t_sorted[m]:
        t_star = 0.5 * (t_sorted[m] + t_sorted[m + 1])
    else:
        interval = False
        t_star = t_sorted[m]
    return origin + t_star * direction, interval


def _pull(
    pts: np.ndarray, w: np.ndarray, y: np.ndarray, atom_tol: float
) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
    """Weighted sum of unit vectors from y to the other points, the weight sitting on y,
    and the per-point w / d for the points away from y."""
    diff = pts - y
    dist = np.linalg.norm(diff, axis=1)
    far = dist > atom_tol
    wd = w[far] / dist[far]
    return wd @ diff[far], float(w[~far].sum()), far, wd


def _gradient_norm(pts: np.ndarray, w: np.ndarray, y: np.ndarray, atom_tol: float) -> float:
    pull, eta, _, _ = _pull(pts, w, y, atom_tol)
    return max(float(np.linalg.norm(pull)) - eta, 0.0)


def _newton_step(
    pts: np.ndarray, w: np.ndarray, y: np.ndarray, grad_norm: float, atom_tol: float
) -> Optional[np.ndarray]:
    """Damped Newton step on the objective, or None when no step lowers the gradient.

    A candidate must cut the gradient norm without raising the objective beyond rounding.
    """
    diff = y - pts
    dist = np.linalg.norm(diff, axis=1)
    if np.min(dist) <= atom_tol:
        return None
    units = diff / dist[:, None]
    scale = w / dist
    gradient = w @ units
    hessian = scale.sum() * np.eye(pts.shape[1]) - (units * scale[:, None]).T @ units
    try:
        direction = np.linalg.solve(hessian, -gradient)
    except np.linalg.LinAlgError:
        return None
    current = weighted_objective(pts, w, y)
    slack = 4.0 * np.finfo(float).eps * max(1.0, current)
    t = 1.0
    for _ in range(NEWTON_HALVINGS):
        candidate = y + t * direction
        if (
            weighted_objective(pts, w, candidate) <= current + slack
            and _gradient_norm(pts, w, candidate, atom_tol) < grad_norm
        ):
            return candidate
        t *= 0.5
    return None


def _optimal_at_point(pts: np.ndarray, w: np.ndarray, index: int, atom_tol: float) -> bool:
    """Kuhn's condition: data point ``index`` is the minimizer iff ||pull|| <= its own weight."""
    pull, eta, _, _ = _pull(pts, w, pts[index], atom_tol)
    return float(np.linalg.norm(pull)) <= eta


def weighted_spatial_median(
    ps: WeightedPointSet,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    track: bool = False,
) -> MedianSolution:
    """Minimize sum_j w_j ||y_j - theta|| by Weiszfeld iteration with the Vardi-Zhang step.

    When progress stalls or the iterate comes close to a support point, a damped Newton
    step on the smooth part of the objective takes over until the gradient norm is below
    ``tol``.

    Collinear support (always the case for k = 1) is solved exactly on the line; an
    interval of minimizers resolves to its midpoint and is flagged as non-unique.
    """
    if tol <= 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    keep = ps.weights > 0.0
    pts = ps.points[keep]
    w = ps.weights[keep]
    w = w / w.sum()
    dim = pts.shape[1]
    spread = float(np.max(np.abs(pts - pts[0]))) if pts.shape[0] > 1 else 0.0
    atom_tol = ATOM_TOL * max(1.0, spread)
    diagnostics: Dict[str, Any] = {"collinear": False, "non_unique": False}

    if spread <= atom_tol:
        location = pts[0].copy()
        return MedianSolution(location, 0.0, 0, True, True, diagnostics)

    centered = pts - pts[0]
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    if dim == 1 or singular[1] <= 1e-12 * singular[0]:
        location, interval = _line_median(pts, w, vt[0])
        diagnostics.update(collinear=dim > 1, non_unique=interval)
        if dim > 1:
            LOGGER.warning("Collinear support in dimension %s; minimizer may not be unique", dim)
        at_point = bool(np.min(np.linalg.norm(pts - location, axis=1)) <= atom_tol)
        return MedianSolution(
            location, weighted_objective(pts, w, location), 0, True, at_point, diagnostics
        )

    y = w @ pts
    trace = [weighted_objective(pts, w, y)] if track else None
    converged = False
    at_point = False
    grad_norm = np.inf
    previous = np.inf
    newton_steps = 0
    iteration = 0
    for iteration in range(1, max_iter + 1):
        pull, eta, far, wd = _pull(pts, w, y, atom_tol)
        grad_norm = max(float(np.linalg.norm(pull)) - eta, 0.0)
        if grad_norm <= tol:
            converged = True
            at_point = eta > 0.0
            break
        # Weiszfeld crawls when the minimizer sits next to a heavy point.
        stalled = grad_norm > STALL_RATIO * previous
        previous = grad_norm
        dist = np.linalg.norm(pts - y, axis=1)
        nearest = int(np.argmin(dist))
        if stalled and _optimal_at_point(pts, w, nearest, atom_tol):
            y = pts[nearest].copy()
            converged = at_point = True
            grad_norm = 0.0
            break
        y_new = None
        if eta == 0.0 and (stalled or dist[nearest] < NEWTON_RADIUS * spread):
            y_new = _newton_step(pts, w, y, grad_norm, atom_tol)
        newton = y_new is not None
        if newton:
            newton_steps += 1
        else:
            target = (wd @ pts[far]) / wd.sum()
            if eta > 0.0:
                gamma = min(1.0, eta / float(np.linalg.norm(pull)))
                y_new = (1.0 - gamma) * target + gamma * y
            else:
                y_new = target
        step = float(np.linalg.norm(y_new - y))
        y = y_new
        if trace is not None:
            trace.append(weighted_objective(pts, w, y))
        if not (stalled or newton) and step <= tol * max(1.0, float(np.linalg.norm(y))):
            converged = True
            grad_norm = _gradient_norm(pts, w, y, atom_tol)
            break

    nearest = int(np.argmin(np.linalg.norm(pts - y, axis=1)))
    if _optimal_at_point(pts, w, nearest, atom_tol):
        y = pts[nearest].copy()
        converged = at_point = True
        grad_norm = 0.0
    if not converged:
        LOGGER.warning(
            "Spatial median did not converge in %s iterations (gradient norm %.3g)",
            max_iter,
            grad_norm,
        )
    if not at_point:
        at_point = bool(np.min(np.linalg.norm(pts - y, axis=1)) <= atom_tol)
    diagnostics["gradient_norm"] = grad_norm
    diagnostics["newton_steps"] = newton_steps
    if trace is not None:
        diagnostics["trace"] = trace
    return MedianSolution(y, weighted_objective(pts, w, y), iteration, converged, at_point, diagnostics)


def spatial_median(data: Any, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Sample spatial median (uniform weights)."""
    return weighted_spatial_median(WeightedPointSet.uniform(data), tol, max_iter).location


__all__ = [
    "MedianSolution",
    "WeightedPointSet",
    "as_sample",
    "rank_scores",
    "signed_rank_scores",
    "spatial_median",
    "spatial_rank",
    "spatial_sign",
    "spatial_signed_rank",
    "spatial_signs",
    "weighted_objective",
    "weighted_spatial_median",
]
