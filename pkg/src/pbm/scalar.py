"""Scalar binomial encoding of bounded reals.

A client holding x in [-c, c] re-scales it to a success probability
p = (theta/c) * x + 1/2 in [1/2 - theta, 1/2 + theta] and reports one draw
from Binom(m, p). The server sees only the sum of the reports and inverts
the affine map to get an unbiased estimate of the mean of the inputs.
Shares are plain integers in {0, ..., m}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScalarParams:
    """Encoder parameters.

    c: magnitude bound on inputs (|x| <= c).
    theta: encoding strength in [0, 1/4]; larger theta means less noise.
    m: binomial trials per input; the share alphabet is {0, ..., m}.
    """

    c: float
    theta: float
    m: int

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not 0.0 <= self.theta <= 0.25:
            raise ValueError(f"theta must lie in [0, 1/4], got {self.theta}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")


def rescale(x: float, params: ScalarParams) -> float:
    """Map x in [-c, c] to the success probability (theta/c) * x + 1/2."""
    if abs(x) > params.c * (1.0 + 1e-12):
        raise ValueError(f"|x| = {abs(x)} exceeds the bound c = {params.c}")
    p = (params.theta / params.c) * x + 0.5
    # guard float fuzz at the interval ends
    return min(max(p, 0.5 - params.theta), 0.5 + params.theta)


def sample_count(m: int, p: float, rng: np.random.Generator) -> int:
    """One draw from Binom(m, p)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"success probability must lie in [0, 1], got {p}")
    return int(rng.binomial(m, p))


def encode(x: float, params: ScalarParams, rng: np.random.Generator) -> int:
    """Privatize x as one draw from Binom(m, rescale(x))."""
    return sample_count(params.m, rescale(x, params), rng)


def decode_sum(sum_z: int, n: int, params: ScalarParams) -> float:
    """Unbiased mean estimate from the sum of n encoded shares.

    Inverts the re-scaling: mu_hat = c/(n*m*theta) * (sum_z - m*n/2). The
    estimate is returned as-is, never truncated to [-c, c].
    """
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if params.theta == 0:
        raise ValueError("theta = 0 encodes no signal; the sum cannot be decoded")
    if not 0 <= sum_z <= n * params.m:
        raise ValueError(f"sum_z = {sum_z} outside [0, {n * params.m}]")
    return params.c / (n * params.m * params.theta) * (sum_z - params.m * n / 2.0)


def variance_bound(n: int, params: ScalarParams) -> float:
    """Worst-case variance of decode_sum: c^2 / (4*n*m*theta^2).

    Tight when every client sits at p = 1/2; the true variance is lower
    whenever inputs push p toward the ends of its range.
    """
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if params.theta == 0:
        raise ValueError("variance is unbounded at theta = 0")
    return params.c**2 / (4.0 * n * params.m * params.theta**2)
