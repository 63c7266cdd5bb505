from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from medianbayes import rng as rng_mod
from medianbayes.dp import (
    BaseMeasure,
    DPPrior,
    auto_truncation,
    bayesian_bootstrap_weights,
    bootstrap_median_draws,
    draw_bootstrap_median,
    draw_posterior_atoms,
    draw_posterior_median,
    posterior_median_draws,
    stick_break_weights,
)
from medianbayes.errors import DomainError
from medianbayes.spatial import spatial_median

from tests.helpers import binomial_band


def _gaussian(n, seed=1, shift=(0.0, 0.0)):
    return np.random.default_rng(seed).normal(size=(n, 2)) + np.asarray(shift)


def test_auto_truncation_leaves_small_residual_mass():
    assert auto_truncation(2.0, 100) == 949
    assert auto_truncation(2.0, 0) == 28


def test_stick_break_weights_shape_and_mass():
    weights = stick_break_weights(500, 102.0, 3)
    assert weights.shape == (500,)
    assert np.all(weights > 0.0)
    assert weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(stick_break_weights(1, 5.0, 0), [1.0])
    with pytest.raises(DomainError):
        stick_break_weights(0, 1.0, 0)


def test_default_prior():
    prior = DPPrior.default(2)
    assert prior.mass == 2.0
    assert np.array_equal(prior.base.covariance, 10.0 * np.eye(2))
    with pytest.raises(DomainError):
        DPPrior(0.0, BaseMeasure.isotropic(2))


def test_posterior_atoms_come_from_data_or_base():
    data = _gaussian(30)
    prior = DPPrior(1e-9, BaseMeasure.isotropic(2))
    atoms = draw_posterior_atoms(200, data, prior, 4)
    rows = {tuple(row) for row in data}
    assert all(tuple(atom) in rows for atom in atoms)
    block = draw_posterior_atoms(50, data, DPPrior(1e9, BaseMeasure.isotropic(2)), 4, atom_mode="block")
    assert not any(tuple(atom) in rows for atom in block)


def test_draws_are_reproducible_and_addressed_by_index():
    data = _gaussian(40)
    prior = DPPrior.default(2)
    first = posterior_median_draws(data, prior, 5, 123)
    again = posterior_median_draws(data, prior, 5, 123)
    assert np.array_equal(first, again)
    single = draw_posterior_median(data, prior, "auto", rng_mod.substream(123, 3))
    assert np.array_equal(first[3], single)
    other = posterior_median_draws(data, prior, 5, 124)
    assert not np.array_equal(first, other)


def test_posterior_draws_concentrate_near_sample_median():
    data = _gaussian(200, seed=2, shift=(1.0, -1.0))
    draws = posterior_median_draws(data, DPPrior.default(2), 100, 8)
    assert np.linalg.norm(draws.mean(axis=0) - spatial_median(data)) < 0.1
    assert np.all(draws.std(axis=0) < 0.2)


def test_bootstrap_weights_and_draws():
    weights = bayesian_bootstrap_weights(50, 1)
    assert weights.sum() == pytest.approx(1.0)
    assert np.all(weights > 0.0)
    data = _gaussian(30, seed=4)
    uniform = np.full(30, 1.0 / 30)
    assert np.allclose(draw_bootstrap_median(data, weights=uniform), spatial_median(data))
    draws = bootstrap_median_draws(data, 20, 9)
    assert draws.shape == (20, 2)
    assert np.array_equal(draws, posterior_median_draws(data, None, 20, 9))


def test_identical_rows_give_that_row():
    data = np.tile([0.3, -1.7], (25, 1))
    draws = posterior_median_draws(data, DPPrior.default(2), 10, 5)
    assert np.all(draws == np.array([0.3, -1.7]))


def test_draw_preconditions():
    prior = DPPrior.default(2)
    with pytest.raises(DomainError):
        draw_posterior_median(np.zeros((2, 2)), prior, "auto", 0)
    with pytest.raises(DomainError):
        draw_posterior_median(_gaussian(10), DPPrior.default(3), "auto", 0)
    with pytest.raises(DomainError):
        posterior_median_draws(_gaussian(10), prior, 5, 0, truncation=0)


def test_first_stick_mean():
    gen = np.random.default_rng(40)
    concentration = 102.0
    first = np.array([stick_break_weights(2, concentration, gen)[0] for _ in range(20_000)])
    sd = np.sqrt(concentration / ((1 + concentration) ** 2 * (2 + concentration)))
    assert abs(first.mean() - 1.0 / (1.0 + concentration)) <= 4.0 * sd / np.sqrt(first.size)


def test_auto_truncation_residual_stick_mass():
    size = auto_truncation(2.0, 100)
    gen = np.random.default_rng(41)
    residual = np.array([stick_break_weights(size, 102.0, gen)[-1] for _ in range(500)])
    # E[residual] = (c / (1 + c))^(N - 1)
    assert (102.0 / 103.0) ** (size - 1) <= 1e-4
    assert residual.mean() < 2e-4


def test_base_atom_fraction():
    data = _gaussian(100, seed=42)
    rows = {tuple(row) for row in data}
    atoms = draw_posterior_atoms(20_000, data, DPPrior.default(2), 43)
    fraction = np.mean([tuple(atom) not in rows for atom in atoms])
    expected = 2.0 / 102.0
    assert abs(fraction - expected) <= binomial_band(expected, 20_000, sigmas=4)


def test_bootstrap_weight_marginal_is_beta():
    gen = np.random.default_rng(44)
    first = np.array([bayesian_bootstrap_weights(5, gen)[0] for _ in range(5000)])
    assert stats.kstest(first, stats.beta(1, 4).cdf).pvalue > 1e-3


def test_vanishing_mass_matches_bayesian_bootstrap():
    data = _gaussian(20, seed=45)
    prior = DPPrior(1e-300, BaseMeasure.isotropic(2))
    gen = np.random.default_rng(46)
    dp = np.array([draw_posterior_median(data, prior, "auto", gen) for _ in range(400)])
    bb = np.array([draw_bootstrap_median(data, gen) for _ in range(400)])
    for column in range(2):
        assert stats.ks_2samp(dp[:, column], bb[:, column]).pvalue > 1e-3


def test_posterior_draw_is_translation_equivariant():
    data = _gaussian(40, seed=47)
    shift = np.array([3.0, -1.5])
    prior = DPPrior.default(2)
    moved = DPPrior(prior.mass, prior.base.shifted(shift))
    for seed in range(3):
        base = draw_posterior_median(data, prior, "auto", seed)
        assert np.allclose(draw_posterior_median(data + shift, moved, "auto", seed), base + shift, atol=1e-8)


def test_bootstrap_median_just_off_a_heavy_point():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    weights = np.array([0.0366, 0.2500025, 0.2133975, 0.25, 0.25])
    location = draw_bootstrap_median(points, weights=weights)
    assert 0.0 < location[0] < 2e-5
    assert abs(location[1]) < 1e-12
