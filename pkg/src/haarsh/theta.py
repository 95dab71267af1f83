"""Lazily evaluated IID Unif[0,1) coefficients theta_{n,k}.

The infinite family is never stored: each value is a keyed hash of
``(seed, n, k)`` pushed through the SplitMix64 finalizer, so any
coefficient can be read in O(1) and in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .torus import CellIndex

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB


def _mix_int(z: int) -> int:
    z &= _M64
    z = ((z ^ (z >> 30)) * _C1) & _M64
    z = ((z ^ (z >> 27)) * _C2) & _M64
    return z ^ (z >> 31)


def _mix_arr(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
        return z ^ (z >> np.uint64(31))


def _chunks(n: int) -> int:
    return max(1, -(-n // 64))


def _to_unit(h):
    return (h >> 11) * 2.0**-53


@dataclass(frozen=True)
class ThetaField:
    master_seed: int
    overrides: Mapping[tuple[int, tuple[int, ...]], float] = field(
        default_factory=lambda: MappingProxyType({}), compare=False, repr=False,
    )

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & _M64)
        frozen = {}
        for (n, k), val in dict(self.overrides).items():
            if not 0.0 <= float(val) <= 1.0:
                raise ValueError("theta overrides must lie in [0, 1]")
            frozen[(int(n), tuple(int(v) for v in k))] = float(val)
        object.__setattr__(self, "overrides", MappingProxyType(frozen))

    def with_overrides(self, values: Mapping) -> ThetaField:
        """Copy with some coefficients pinned; keys are (n, 1-based k tuple) or CellIndex."""
        merged = dict(self.overrides)
        for key, val in values.items():
            if isinstance(key, CellIndex):
                key = (key.n, key.k)
            merged[key] = val
        return ThetaField(self.master_seed, merged)

    def _base(self, n: int) -> int:
        return _mix_int(self.master_seed + _GOLDEN * (n + 1))

    def value(self, n: int, k) -> float:
        """theta_{n,k} for a CellIndex or a 1-based per-axis tuple."""
        if isinstance(k, CellIndex):
            n, k = k.n, k.k
        k = tuple(int(v) for v in k)
        hit = self.overrides.get((n, k))
        if hit is not None:
            return hit
        h = self._base(n)
        for axis, kj in enumerate(k):
            rest = kj - 1
            for _ in range(_chunks(n)):
                h = _mix_int(h ^ ((rest & _M64) + _GOLDEN * (axis + 1)))
                rest >>= 64
        return float(_to_unit(h))

    def values(self, n: int, k0) -> np.ndarray:
        """Vectorized lookup; ``k0`` holds ZERO-based per-axis coordinates
        (as returned by :func:`cell_coordinates`), last axis nu."""
        k0 = np.asarray(k0)
        if n > 63:
            flat = k0.reshape(-1, k0.shape[-1])
            out = np.array([self.value(n, tuple(int(v) + 1 for v in row)) for row in flat])
            return out.reshape(k0.shape[:-1])
        h = np.full(k0.shape[:-1], self._base(n), dtype=np.uint64)
        kk = k0.astype(np.uint64)
        with np.errstate(over="ignore"):
            for axis in range(k0.shape[-1]):
                salt = np.uint64((_GOLDEN * (axis + 1)) & _M64)
                h = _mix_arr(h ^ (kk[..., axis] + salt))
        out = _to_unit(h).astype(float)
        if self.overrides:
            for (on, ok), val in self.overrides.items():
                if on != n or len(ok) != k0.shape[-1]:
                    continue
                mask = np.all(k0 == (np.asarray(ok) - 1), axis=-1)
                out = np.where(mask, val, out)
        return out
