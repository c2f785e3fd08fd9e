"""Independent reference implementations used to cross-check the package.

Everything here works in plain probability space with scipy.stats and
np.convolve, deliberately sharing no code with the log-space accountant.
"""

from __future__ import annotations

import itertools
from math import log, sqrt

import numpy as np
from scipy.stats import binom


def poisson_binomial_pmf(ps, m: int) -> np.ndarray:
    """pmf of a sum of independent Binom(m, p) draws, by direct convolution."""
    out = np.ones(1)
    support = np.arange(m + 1)
    for p in ps:
        out = np.convolve(out, binom.pmf(support, m, p))
    return out


def renyi_from_probs(p: np.ndarray, q: np.ndarray, alpha: float) -> float:
    mask = p > 0
    return float(np.log(np.sum(p[mask] ** alpha * q[mask] ** (1.0 - alpha)))) / (
        alpha - 1.0
    )


def brute_force_extreme_rdp(n: int, m: int, theta: float, alpha: float) -> float:
    """Max divergence over every extreme assignment of n probabilities plus
    the replaced client's alternative, both orderings included."""
    lo, hi = 0.5 - theta, 0.5 + theta
    best = 0.0
    for bits in itertools.product((lo, hi), repeat=n + 1):
        ps, alt = bits[:n], bits[n]
        p_pmf = poisson_binomial_pmf(ps, m)
        q_pmf = poisson_binomial_pmf((alt,) + ps[1:], m)
        best = max(best, renyi_from_probs(p_pmf, q_pmf, alpha))
    return best


def interior_grid_max_rdp(theta: float, alpha: float, step: float) -> float:
    """Max D_alpha over a full grid of 3-client probability assignments.

    Clients 2 and 3 share their probabilities across the pair; client 1
    takes every (p1, p1') combination. Bernoulli encodings (m = 1).
    """
    grid = np.arange(0.5 - theta, 0.5 + theta + step / 2, step)
    grid = np.clip(grid, 0.5 - theta, 0.5 + theta)
    best = 0.0
    for p2 in grid:
        for p3 in grid:
            tail = np.convolve([1 - p2, p2], [1 - p3, p3])
            pmfs = np.array([np.convolve([1 - p1, p1], tail) for p1 in grid])
            for i in range(len(grid)):
                for j in range(len(grid)):
                    if i == j:
                        continue
                    best = max(best, renyi_from_probs(pmfs[i], pmfs[j], alpha))
    return best


def linear_curve_dp_oracle(rho: float, delta: float) -> float:
    """Conversion value for eps(alpha) = rho*alpha at the closed-form
    minimizer alpha* = 1 + sqrt(log(1/delta)/rho) of the dominant terms."""
    big_l = log(1.0 / delta)
    alpha_star = 1.0 + sqrt(big_l / rho)
    return (
        rho * alpha_star
        + log(1.0 / (alpha_star * delta)) / (alpha_star - 1.0)
        + log(1.0 - 1.0 / alpha_star)
    )
