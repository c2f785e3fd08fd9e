"""Vector mechanism: per-coordinate binomial encoding of client vectors.

Each client encodes its vector coordinate-by-coordinate with the scalar
binomial encoder and ships the counts through secure aggregation; the
server decodes an unbiased mean from the aggregate alone. Two geometries:

* use_kashin=False: inputs are L-infinity bounded and c is the
  per-coordinate bound; coordinates are encoded directly.
* use_kashin=True: inputs are L2 bounded by c; a shared tight frame
  spreads each vector into coords = D coefficients with per-coordinate
  bound c' = c * level_k / sqrt(D), and the server maps the decoded
  coefficient mean back through the frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from . import secagg
from .kashin import KashinFrame, represent


@dataclass(frozen=True)
class MechanismParams:
    """Shared client/server configuration for one round.

    n: number of clients, d: input dimension, c: norm bound (L2 when
    use_kashin, per-coordinate otherwise), theta: encoding strength,
    m: binomial trials per coordinate.
    """

    n: int
    d: int
    c: float
    theta: float
    m: int
    use_kashin: bool = False
    frame: KashinFrame | None = None

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError(f"n and d must be positive, got n={self.n}, d={self.d}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not 0.0 <= self.theta <= 0.25:
            raise ValueError(f"theta must lie in [0, 1/4], got {self.theta}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if self.use_kashin:
            if self.frame is None:
                raise ValueError("use_kashin=True needs a shared frame")
            if self.frame.d != self.d:
                raise ValueError(
                    f"frame dimension {self.frame.d} does not match d = {self.d}"
                )

    @property
    def coords(self) -> int:
        """Encoded coordinates per client: D with the frame, d without."""
        return self.frame.big_d if self.use_kashin else self.d

    @property
    def c_prime(self) -> float:
        """Per-coordinate magnitude bound after the optional spreading step."""
        if self.use_kashin:
            return self.c * self.frame.level_k / sqrt(self.frame.big_d)
        return self.c


def coordinate_probs(y: np.ndarray, params: MechanismParams) -> np.ndarray:
    """Re-scale spread coordinates to success probabilities, guarding fuzz."""
    p = (params.theta / params.c_prime) * y + 0.5
    return np.clip(p, 0.5 - params.theta, 0.5 + params.theta)


def client_encode(
    x: np.ndarray, params: MechanismParams, rng: np.random.Generator
) -> np.ndarray:
    """Encode one client vector into integer shares in {0, ..., m}^coords."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.d,):
        raise ValueError(f"expected shape ({params.d},), got {x.shape}")
    if params.use_kashin:
        if np.linalg.norm(x) > params.c * (1.0 + 1e-9):
            raise ValueError(f"||x||_2 = {np.linalg.norm(x)} exceeds c = {params.c}")
        y = represent(x, params.frame)
    else:
        if np.abs(x).max(initial=0.0) > params.c * (1.0 + 1e-9):
            raise ValueError(
                f"||x||_inf = {np.abs(x).max()} exceeds the coordinate bound {params.c}"
            )
        y = x
    return rng.binomial(params.m, coordinate_probs(y, params))


def server_decode(agg_sum: np.ndarray, params: MechanismParams) -> np.ndarray:
    """Mean estimate from the coordinate-wise sum of all n clients' shares."""
    agg_sum = np.asarray(agg_sum)
    if agg_sum.shape != (params.coords,):
        raise ValueError(f"expected shape ({params.coords},), got {agg_sum.shape}")
    if agg_sum.min(initial=0) < 0 or agg_sum.max(initial=0) > params.n * params.m:
        raise ValueError(f"aggregate outside [0, {params.n * params.m}]")
    if params.theta == 0:
        raise ValueError("theta = 0 encodes no signal; the sum cannot be decoded")
    nm = params.n * params.m
    mu = params.c_prime / (nm * params.theta) * (agg_sum - nm / 2.0)
    if params.use_kashin:
        return params.frame.u @ mu
    return mu


def mse_bound(params: MechanismParams) -> float:
    """Worst-case decode MSE: coords * c'^2 / (4*n*m*theta^2).

    With the frame this also bounds the error after mapping back to R^d,
    since the frame map is non-expansive.
    """
    if params.theta == 0:
        raise ValueError("MSE is unbounded at theta = 0")
    return params.coords * params.c_prime**2 / (
        4.0 * params.n * params.m * params.theta**2
    )


def communication_bits(params: MechanismParams) -> int:
    """Uplink bits per client under the default power-of-two group."""
    spec = secagg.GroupSpec(
        modulus=secagg.default_modulus(params.n, params.m), coords=params.coords
    )
    return params.coords * spec.bits_per_coord


def client_rngs(master_seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-client generators derived from one master seed."""
    seq = np.random.SeedSequence(master_seed)
    return [np.random.default_rng(child) for child in seq.spawn(n)]
