from __future__ import annotations

import numpy as np

from medianbayes import rng as rng_mod
from medianbayes.bnp_tests import one_sample_test
from medianbayes.classical import permutation_pvalue, sign_flip_pvalue
from medianbayes.dp import DPPrior, posterior_median_draws


def _data(n=30, seed=0):
    return np.random.default_rng(seed).normal(size=(n, 2)) + [0.2, 0.0]


def test_key_of_is_stable_and_nonnegative():
    assert rng_mod.key_of("gaussian") == rng_mod.key_of("gaussian")
    assert rng_mod.key_of("gaussian") != rng_mod.key_of("t1")
    assert 0 <= rng_mod.key_of("gamma") < 2**63


def test_child_seed_depends_only_on_keys():
    a = rng_mod.substream(7, 1, 2).random(3)
    b = rng_mod.substream(7, 1, 2).random(3)
    c = rng_mod.substream(7, 2, 1).random(3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_reused_generator_advances_between_calls():
    gen = np.random.default_rng(5)
    first = rng_mod.as_seed_sequence(gen)
    second = rng_mod.as_seed_sequence(gen)
    assert first.entropy != second.entropy
    assert rng_mod.as_seed_sequence(np.random.default_rng(5)).entropy == first.entropy


def test_posterior_draws_with_one_generator_differ_across_calls():
    data = _data()
    prior = DPPrior.default(2)
    gen = np.random.default_rng(12)
    first = posterior_median_draws(data, prior, 5, gen)
    second = posterior_median_draws(data, prior, 5, gen)
    assert not np.array_equal(first, second)
    fresh_a = posterior_median_draws(data, prior, 5, np.random.default_rng(12))
    fresh_b = posterior_median_draws(data, prior, 5, np.random.default_rng(12))
    assert np.array_equal(fresh_a, fresh_b)
    assert np.array_equal(fresh_a, first)


def test_generator_draws_stay_addressed_by_index():
    data = _data()
    prior = DPPrior.default(2)
    seq = rng_mod.as_seed_sequence(np.random.default_rng(3))
    full = posterior_median_draws(data, prior, 4, np.random.default_rng(3))
    assert np.array_equal(full, posterior_median_draws(data, prior, 4, seq))


def test_resampling_pvalues_with_one_generator_differ_across_calls():
    data = _data(n=25, seed=1)
    gen = np.random.default_rng(8)
    flips = [sign_flip_pvalue(data, [0.0, 0.0], "sign", flips=199, rng=gen, exact=False) for _ in range(4)]
    assert len(set(flips)) > 1
    other = _data(n=20, seed=2)
    perms = [permutation_pvalue(data, other, "rank", perms=199, rng=gen, exact=False) for _ in range(4)]
    assert len(set(perms)) > 1
    again = [
        sign_flip_pvalue(data, [0.0, 0.0], "sign", flips=199, rng=np.random.default_rng(8), exact=False)
        for _ in range(2)
    ]
    assert again[0] == again[1] == flips[0]


def test_one_sample_test_thresholds_vary_with_shared_generator():
    data = _data(n=40, seed=4)
    gen = np.random.default_rng(9)
    thresholds = {one_sample_test(data, [0.0, 0.0], None, B=30, rng=gen).threshold for _ in range(3)}
    assert len(thresholds) == 3
