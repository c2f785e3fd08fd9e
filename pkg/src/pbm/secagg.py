"""Simulated secure aggregation over (Z_M)^coords.

Models the server-side view of a secure-aggregation round: clients submit
vectors of residues mod M and the server learns only their coordinate-wise
sum mod M. No cryptography here; the point is the finite-group arithmetic,
its communication cost, and the modular-clipping variant that shrinks M
below the worst-case sum range at a controlled risk of wraparound.

Share files: a binary format with a fixed header (n, coords, M, mode,
offset, seed) followed by all residues packed as ceil(log2 M)-bit
little-endian integers, so file size reflects the true communication cost.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import ceil, floor, sqrt
from typing import Sequence

import numpy as np

# default headroom multiplier for the clipped field, sqrt(30) standard
# deviations on each side of the sum's expected range
DEFAULT_SAFETY = sqrt(30.0)

MODE_PLAIN = 0
MODE_CLIPPED = 1

_MAGIC = b"PBMS"
_VERSION = 1
_HEADER = struct.Struct("<4sBBQQQqQ")  # magic, version, mode, n, coords, M, offset, seed


@dataclass(frozen=True)
class GroupSpec:
    """The aggregation group (Z_modulus)^coords."""

    modulus: int
    coords: int

    def __post_init__(self):
        if self.modulus < 2:
            raise ValueError(f"modulus must be >= 2, got {self.modulus}")
        if self.coords < 1:
            raise ValueError(f"coords must be >= 1, got {self.coords}")

    @property
    def bits_per_coord(self) -> int:
        return (self.modulus - 1).bit_length()


@dataclass(frozen=True)
class GroupVector:
    """One group element: residues in [0, modulus) per coordinate."""

    residues: np.ndarray
    spec: GroupSpec

    def __post_init__(self):
        r = np.asarray(self.residues)
        if r.shape != (self.spec.coords,):
            raise ValueError(f"expected {self.spec.coords} residues, got {r.shape}")
        if r.min(initial=0) < 0 or r.max(initial=0) >= self.spec.modulus:
            raise ValueError("residues outside [0, modulus)")
        object.__setattr__(self, "residues", r.astype(np.int64))


def default_modulus(n: int, m: int) -> int:
    """Smallest power of two strictly greater than the max sum n*m."""
    if n < 1 or m < 1:
        raise ValueError(f"n and m must be positive, got n={n}, m={m}")
    return 1 << (n * m).bit_length()


def encode_shares(shares: np.ndarray, spec: GroupSpec) -> GroupVector:
    """Reduce one client's share vector into the group."""
    return GroupVector(np.asarray(shares, dtype=np.int64) % spec.modulus, spec)


def aggregate(updates: Sequence[GroupVector], spec: GroupSpec) -> GroupVector:
    """Coordinate-wise sum mod M. The per-client inputs are not retained."""
    if len(updates) == 0:
        raise ValueError("nothing to aggregate")
    total = np.zeros(spec.coords, dtype=np.int64)
    for upd in updates:
        if upd.spec != spec:
            raise ValueError(f"update group {upd.spec} does not match {spec}")
        total = (total + upd.residues) % spec.modulus
    return GroupVector(total, spec)


def clipped_spec(
    n: int, m: int, theta: float, safety_c: float = DEFAULT_SAFETY, coords: int = 1
) -> tuple[GroupSpec, int]:
    """Reduced-modulus group sized to the sum's likely range, plus its offset.

    Honest sums concentrate in n*m*(1 +- theta)/2 +- safety_c*sqrt(n*m/4),
    a window of width n*m*theta + safety_c*sqrt(n*m). The modulus covers
    that window and the server lifts each aggregate residue into
    [offset, offset + modulus); sums landing outside the window wrap and
    decode incorrectly. Larger safety_c trades bits for wrap probability.
    """
    if theta <= 0 or theta > 0.25:
        raise ValueError(f"theta must lie in (0, 1/4], got {theta}")
    if safety_c < 0:
        raise ValueError(f"safety_c must be nonnegative, got {safety_c}")
    nm = n * m
    modulus = ceil(nm * theta + safety_c * sqrt(nm)) + 1
    offset = floor(nm * (1.0 - theta) / 2.0 - safety_c * sqrt(nm / 4.0))
    return GroupSpec(modulus=modulus, coords=coords), offset


def lift_sum(agg: GroupVector, offset: int) -> np.ndarray:
    """Map aggregate residues into the integer window [offset, offset + M)."""
    m = agg.spec.modulus
    return offset + (agg.residues - offset) % m


def count_wraps(true_sums: np.ndarray, spec: GroupSpec, offset: int) -> int:
    """Simulator-only check: how many coordinates fell outside the window.

    A real server cannot observe this; the simulator tracks it to validate
    the safety margin.
    """
    s = np.asarray(true_sums)
    return int(np.sum((s < offset) | (s >= offset + spec.modulus)))


def _pack_residues(residues: np.ndarray, width: int) -> bytes:
    """Concatenate width-bit little-endian integers, padded to a whole byte."""
    vals = residues.astype(np.uint64).reshape(-1)
    bits = ((vals[:, None] >> np.arange(width, dtype=np.uint64)) & 1).astype(np.uint8)
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def _unpack_residues(payload: bytes, count: int, width: int) -> np.ndarray:
    bits = np.unpackbits(
        np.frombuffer(payload, dtype=np.uint8), bitorder="little", count=count * width
    )
    weights = (1 << np.arange(width, dtype=np.int64))
    return (bits.reshape(count, width) * weights).sum(axis=1)


def write_shares(
    path,
    updates: Sequence[GroupVector],
    mode: int = MODE_PLAIN,
    offset: int = 0,
    seed: int = 0,
) -> int:
    """Write all client updates to a share file; returns payload bytes.

    Payload size is exactly ceil(n * coords * bits_per_coord / 8), so the
    file length is an honest per-round communication measurement.
    """
    if not updates:
        raise ValueError("no updates to write")
    spec = updates[0].spec
    for upd in updates:
        if upd.spec != spec:
            raise ValueError("all updates must share one group spec")
    stacked = np.stack([u.residues for u in updates])
    payload = _pack_residues(stacked, spec.bits_per_coord)
    header = _HEADER.pack(
        _MAGIC, _VERSION, mode, len(updates), spec.coords, spec.modulus, offset, seed
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    return len(payload)


def read_shares(path) -> tuple[list[GroupVector], dict]:
    """Read a share file back; returns the updates and the header fields."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, mode, n, coords, modulus, offset, seed = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError("not a share file (bad magic)")
    if version != _VERSION:
        raise ValueError(f"unsupported share-file version {version}")
    spec = GroupSpec(modulus=modulus, coords=coords)
    flat = _unpack_residues(raw[_HEADER.size :], n * coords, spec.bits_per_coord)
    updates = [GroupVector(row, spec) for row in flat.reshape(n, coords)]
    meta = {
        "n": n, "coords": coords, "modulus": modulus,
        "mode": mode, "offset": offset, "seed": seed,
    }
    return updates, meta
