"""Deterministic, seed-addressable Brownian increments on nested dyadic grids.

Each path is a counter-mode Philox stream keyed by (master seed, path index),
mapped to Gaussians through the inverse normal CDF.  Any path at any level is
therefore reproducible in isolation, independent of scheduling, and coarse
grids are obtained by summing the finest increments so that coupled runs see
exactly the same Brownian path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

__all__ = [
    "PathKey",
    "IncrementArray",
    "CapacityError",
    "generate_increments",
    "coarsen",
]

MAX_STEPS = 2**31
_U64 = np.uint64
_SHIFT = _U64(11)
_SCALE = 2.0**-53


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class PathKey:
    """Identity of one Brownian path; determines all increments at every level."""

    master_seed: int
    path_index: int

    def __post_init__(self):
        for name in ("master_seed", "path_index"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2**64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer")


@dataclass
class IncrementArray:
    """Increments W_(j+1) - W_j on the grid with base_steps * 2**level steps."""

    level: int
    base_steps: int
    T: float
    values: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.values)

    @property
    def delta(self) -> float:
        return self.T / self.n_steps


def _uniforms(master_seed: int, path_index: int, n: int) -> np.ndarray:
    """First n outputs of the keyed counter stream, mapped into (0, 1)."""
    bitgen = np.random.Philox(key=np.array([master_seed, path_index], dtype=_U64))
    raw = bitgen.random_raw(n)
    # (r >> 11) + 0.5 scaled by 2^-53: open interval, symmetric around 1/2
    return ((raw >> _SHIFT).astype(np.float64) + 0.5) * _SCALE


def gaussian_matrix(master_seed: int, path_indices, n: int, T: float) -> np.ndarray:
    """Increment rows for several paths at once (one ndtri call for the block)."""
    u = np.empty((len(path_indices), n), dtype=np.float64)
    for i, p in enumerate(path_indices):
        u[i] = _uniforms(master_seed, int(p), n)
    scale = math.sqrt(T / n)
    return ndtri(u) * scale


def generate_increments(
    key: PathKey, finest_level: int, base_steps: int = 1, T: float = 1.0
) -> IncrementArray:
    """Materialize the finest-level increments for one path.

    Increment j is ndtri(u_j) * sqrt(T/N) where u_j is the j-th output of the
    path's counter stream, so any entry is a pure function of (key, level).
    """
    if base_steps < 1:
        raise ValueError("base_steps must be >= 1")
    if finest_level < 0:
        raise ValueError("finest_level must be >= 0")
    if not T > 0:
        raise ValueError("T must be positive")
    n = base_steps << finest_level
    if n > MAX_STEPS:
        raise CapacityError(f"{n} steps exceed the {MAX_STEPS} step capacity")
    values = gaussian_matrix(key.master_seed, [key.path_index], n, T)[0]
    return IncrementArray(level=finest_level, base_steps=base_steps, T=T, values=values)


def coarsen_matrix(values: np.ndarray, factor: int) -> np.ndarray:
    """Group-sum along the last axis by repeated halving.

    Halving makes the grouping exactly associative across levels:
    coarsening by 2 twice is bitwise the same as coarsening by 4.
    """
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"factor must be a power of two, got {factor}")
    if values.shape[-1] % factor:
        raise ValueError(f"factor {factor} does not divide {values.shape[-1]} steps")
    out = values
    while factor > 1:
        out = out[..., 0::2] + out[..., 1::2]
        factor //= 2
    return out if out is not values else values.copy()


def coarsen(fine: IncrementArray, factor: int) -> IncrementArray:
    """Coarse increments: entry j sums the fine increments [j*factor, (j+1)*factor)."""
    values = coarsen_matrix(fine.values, factor)
    j = factor.bit_length() - 1
    if j > fine.level:
        raise ValueError(f"cannot coarsen level {fine.level} by factor {factor}")
    return IncrementArray(
        level=fine.level - j, base_steps=fine.base_steps, T=fine.T, values=values
    )
