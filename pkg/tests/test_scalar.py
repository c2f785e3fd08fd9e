import numpy as np
import pytest
from scipy.stats import binom

from pbm.scalar import (
    ScalarParams,
    decode_sum,
    encode,
    rescale,
    sample_count,
    variance_bound,
)


def test_rescale_known_values():
    assert rescale(-1.0, ScalarParams(c=2.0, theta=0.1, m=1)) == pytest.approx(0.45)
    assert rescale(0.0, ScalarParams(c=1.0, theta=0.25, m=1)) == 0.5
    assert rescale(1.0, ScalarParams(c=1.0, theta=0.25, m=1)) == 0.75
    assert rescale(-1.0, ScalarParams(c=1.0, theta=0.25, m=1)) == 0.25


def test_rescale_monotone_and_symmetric():
    params = ScalarParams(c=3.0, theta=0.2, m=2)
    xs = np.linspace(-3.0, 3.0, 41)
    ps = [rescale(x, params) for x in xs]
    assert np.all(np.diff(ps) > 0)
    for x in xs:
        assert rescale(-x, params) == pytest.approx(1.0 - rescale(x, params), abs=1e-15)


def test_rescale_rejects_out_of_range():
    params = ScalarParams(c=1.0, theta=0.1, m=1)
    with pytest.raises(ValueError):
        rescale(1.5, params)
    with pytest.raises(ValueError):
        rescale(-1.0000001, params)


def test_params_validation():
    with pytest.raises(ValueError):
        ScalarParams(c=0.0, theta=0.1, m=1)
    with pytest.raises(ValueError):
        ScalarParams(c=1.0, theta=0.3, m=1)
    with pytest.raises(ValueError):
        ScalarParams(c=1.0, theta=-0.1, m=1)
    with pytest.raises(ValueError):
        ScalarParams(c=1.0, theta=0.1, m=0)


def test_degenerate_probabilities():
    rng = np.random.default_rng(0)
    assert all(sample_count(5, 0.0, rng) == 0 for _ in range(200))
    assert all(sample_count(5, 1.0, rng) == 5 for _ in range(200))


def test_theta_zero_encodes_fair_coin():
    params = ScalarParams(c=1.0, theta=0.0, m=1)
    rng = np.random.default_rng(7)
    draws = [encode(-1.0, params, rng) for _ in range(20000)]
    assert np.mean(draws) == pytest.approx(0.5, abs=0.02)
    with pytest.raises(ValueError):
        decode_sum(1, 1, params)
    with pytest.raises(ValueError):
        variance_bound(1, params)


def test_encode_matches_binomial_law():
    params = ScalarParams(c=1.0, theta=0.25, m=5)
    x = 0.4  # p = 0.6
    rng = np.random.default_rng(123)
    draws = np.array([encode(x, params, rng) for _ in range(20000)])
    counts = np.bincount(draws, minlength=6) / len(draws)
    expected = binom.pmf(np.arange(6), 5, 0.6)
    # each frequency within 4 sigma of its binomial cell probability
    sigma = np.sqrt(expected * (1 - expected) / len(draws))
    assert np.all(np.abs(counts - expected) < 4 * sigma + 1e-12)


def test_encode_deterministic_for_fixed_seed():
    params = ScalarParams(c=1.0, theta=0.2, m=8)
    a = [encode(0.3, params, np.random.default_rng(5)) for _ in range(3)]
    b = [encode(0.3, params, np.random.default_rng(5)) for _ in range(3)]
    assert a == b


def test_decode_sum_known_values():
    assert decode_sum(4, 1, ScalarParams(c=1.0, theta=0.25, m=4)) == pytest.approx(2.0)
    assert decode_sum(2, 2, ScalarParams(c=1.0, theta=0.25, m=2)) == pytest.approx(0.0)


def test_decode_sum_validation():
    params = ScalarParams(c=1.0, theta=0.25, m=4)
    with pytest.raises(ValueError):
        decode_sum(-1, 2, params)
    with pytest.raises(ValueError):
        decode_sum(9, 2, params)
    with pytest.raises(ValueError):
        decode_sum(1, 0, params)


def test_variance_bound_known_values():
    assert variance_bound(1, ScalarParams(c=1.0, theta=0.25, m=1)) == pytest.approx(4.0)
    assert variance_bound(1000, ScalarParams(c=1.0, theta=0.25, m=16)) == pytest.approx(
        1.0 / 4000.0
    )


def test_mean_estimate_unbiased_and_within_variance_bound():
    n, runs = 30, 20000
    params = ScalarParams(c=2.0, theta=0.25, m=3)
    rng = np.random.default_rng(42)
    xs = rng.uniform(-2.0, 2.0, size=n)
    true_mean = xs.mean()
    probs = np.array([rescale(x, params) for x in xs])
    sums = rng.binomial(params.m, probs, size=(runs, n)).sum(axis=1)
    estimates = np.array([decode_sum(int(s), n, params) for s in sums])
    bound = variance_bound(n, params)
    assert abs(estimates.mean() - true_mean) < 4 * np.sqrt(bound / runs)
    assert estimates.var() <= bound * (1 + 5 / np.sqrt(runs))
