from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from medianbayes import asymptotics, datagen
from medianbayes.dp import bootstrap_median_draws
from medianbayes.errors import DomainError
from medianbayes.numerics import chi2_quantile
from medianbayes.spatial import spatial_median

from tests.helpers import slow

MC = 200_000
RAYLEIGH_MEAN = math.sqrt(math.pi / 2.0)


def test_gaussian_sandwich_matches_closed_form():
    model = asymptotics.gaussian_model(np.eye(2))
    pair = asymptotics.estimate_sandwich(model, [0.0, 0.0], MC, 1)
    assert np.allclose(pair.U, 0.5 * np.eye(2), atol=0.01)
    assert np.allclose(pair.V, 0.5 * RAYLEIGH_MEAN * np.eye(2), atol=0.025)
    assert np.allclose(pair.covariance, 0.5 / (0.5 * RAYLEIGH_MEAN) ** 2 * np.eye(2), atol=0.1)
    assert pair.skipped == 0


def test_sandwich_from_sample_and_degenerate_inputs():
    data = datagen.sample_mvn([1.0, 1.0], np.eye(2), 50_000, 2)
    pair = asymptotics.estimate_sandwich(data, [1.0, 1.0])
    assert np.trace(pair.U) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        asymptotics.estimate_sandwich(np.zeros((5, 2)), [0.0, 0.0])
    with pytest.raises(DomainError):
        asymptotics.estimate_sandwich(asymptotics.gaussian_model(np.eye(2)), [0.0, 0.0], 100, 0)


def test_points_at_theta_are_skipped():
    data = np.vstack([np.zeros((3, 2)), datagen.sample_mvn([0.0, 0.0], np.eye(2), 100, 3)])
    assert asymptotics.estimate_sandwich(data, [0.0, 0.0]).skipped == 3


def test_t_model_information_matches_score_variance():
    sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
    model = asymptotics.t_model(sigma, 3.0)
    draws = model.sample(np.random.default_rng(4), MC, [0.0, 0.0])
    scores = model.score(np.zeros(2), draws)
    assert np.allclose(scores.mean(axis=0), 0.0, atol=0.02)
    assert np.allclose(scores.T @ scores / MC, model.fisher(np.zeros(2)), atol=0.03)


def test_null_direction_gives_alpha():
    model = asymptotics.gaussian_model(np.eye(2))
    assert asymptotics.one_sample_local_power(model, [0.0, 0.0], [0.0, 0.0], 0.05, MC, 5) == pytest.approx(
        0.05, abs=1e-12
    )
    two = asymptotics.two_sample_local_power(model, model, [0.0, 0.0], [0, 0], [0, 0], 0.5, 0.05, MC, 5)
    assert two == pytest.approx(0.05, abs=1e-12)


def test_gaussian_local_power_closed_form():
    model = asymptotics.gaussian_model(np.eye(2))
    h = np.array([2.0, -2.0])
    # drift is -h and the sandwich is (2 / RAYLEIGH_MEAN^2) I, so delta = |h|^2 RAYLEIGH_MEAN^2 / 2
    delta = float(h @ h) * RAYLEIGH_MEAN**2 / 2.0
    expected = stats.ncx2.sf(chi2_quantile(2, 0.05), 2, delta)
    assert asymptotics.one_sample_local_power(model, [0.0, 0.0], h, 0.05, MC, 6) == pytest.approx(
        expected, abs=0.03
    )


def test_local_power_increases_along_a_ray():
    model = asymptotics.t_model(np.eye(2), 3.0)
    powers = [
        asymptotics.one_sample_local_power(model, [0.0, 0.0], [t, -t], 0.05, MC, 7)
        for t in (0.0, 0.5, 1.0, 2.0, 3.0)
    ]
    assert all(a < b for a, b in zip(powers, powers[1:]))


def test_two_sample_local_power_closed_form_and_swap():
    model = asymptotics.gaussian_model(np.eye(2))
    lam = 100 / 190
    h1, h2 = np.array([0.0, 0.0]), np.array([1.0, 2.0])
    drift = -h1 / math.sqrt(lam) + h2 / math.sqrt(1 - lam)
    scale = 2.0 / RAYLEIGH_MEAN**2 * (1 / lam + 1 / (1 - lam))
    expected = stats.ncx2.sf(chi2_quantile(2, 0.05), 2, float(drift @ drift) / scale)
    forward = asymptotics.two_sample_local_power(model, model, [0.0, 0.0], h1, h2, lam, 0.05, MC, 8)
    swapped = asymptotics.two_sample_local_power(model, model, [0.0, 0.0], h2, h1, 1 - lam, 0.05, MC, 8)
    assert forward == pytest.approx(expected, abs=0.03)
    assert swapped == pytest.approx(forward, abs=0.03)
    with pytest.raises(DomainError):
        asymptotics.two_sample_local_power(model, model, [0.0, 0.0], h1, h2, 1.0)


def test_model_for_families():
    assert asymptotics.model_for(datagen.mvn((0.0, 0.0), np.eye(2))).family == "gaussian_location"
    assert asymptotics.model_for(datagen.mvt((0.0, 0.0), np.eye(2), 1.0)).family == "t_location"
    with pytest.raises(DomainError):
        asymptotics.model_for(datagen.gamma_copula())


@slow
def test_bootstrap_scatter_matches_sandwich():
    data = datagen.sample_mvn([0.0, 0.0], np.eye(2), 1000, 9)
    draws = bootstrap_median_draws(data, 2000, 10)
    scaled = 1000 * np.cov(draws.T, bias=True)
    plug_in = asymptotics.estimate_sandwich(data, spatial_median(data)).covariance
    assert np.max(np.abs(scaled - plug_in)) <= 0.15 * np.mean(np.diag(plug_in))
