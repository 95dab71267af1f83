"""The haarsh hull v(omega; theta) and the lattice potential it generates.

v is a lacunary Haar series: generation n carries amplitude
a_n = 2**(-c_a * b * n**2) and one IID coefficient per dyadic cell.  At any
point only the cell containing omega contributes, so a truncation through
generation N costs N + 1 coefficient lookups.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .logmag import LogMagnitude
from .theta import ThetaField
from .torus import cell_coordinates, haar_sign, haar_value, shift

# generations whose amplitude is below this contribute exactly 0.0 in doubles
_NEGLIGIBLE_LOG2 = -1100.0


@dataclass(frozen=True)
class HullParams:
    b: float = 2.0
    c_a: int = 2  # a_n = 2**(-c_a * b * n**2)
    nu: int = 1

    def __post_init__(self):
        if self.c_a not in (1, 2):
            raise ValueError("amplitude exponent factor must be 1 or 2")
        if self.b <= 0:
            raise ValueError("decay exponent b must be positive")
        if self.nu < 1:
            raise ValueError("torus dimension must be >= 1")

    def log2_amplitude(self, n: int) -> float:
        return -self.c_a * self.b * n * n


def amplitude(n: int, p: HullParams) -> LogMagnitude:
    if n < 0:
        raise ValueError("generation must be non-negative")
    return LogMagnitude.pow2(p.log2_amplitude(n))


def tail_bound(N: int, p: HullParams) -> LogMagnitude:
    """Upper bound 1/2 * 2**(-2bN) * a_N on sup |v - v_N|."""
    if N < 0:
        raise ValueError("generation must be non-negative")
    return LogMagnitude.pow2(-1.0 - 2.0 * p.b * N + p.log2_amplitude(N))


def truncation_level(p: HullParams, tol: float = 1e-15) -> int:
    """Smallest N whose tail bound is below ``tol``."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    target = LogMagnitude.from_float(tol)
    N = 0
    while tail_bound(N, p) >= target:
        N += 1
    return N


def _points(omega, nu: int) -> np.ndarray:
    pts = np.asarray(omega, dtype=float)
    if pts.ndim == 0 or pts.shape[-1] != nu:
        pts = pts.reshape(*pts.shape, 1) if nu == 1 else pts
    if pts.shape[-1] != nu:
        raise ValueError(f"points must have last axis {nu}")
    return pts


def _squeeze(val: np.ndarray):
    return float(val) if val.ndim == 0 else val


def hull_truncated(omega, theta: ThetaField, N: int, p: HullParams):
    """v_N(omega) = sum_{n<=N} a_n theta_{n, k_n(omega)} sign_n(omega).

    ``omega`` is one point or a stack of points (last axis nu); for nu = 1
    a bare scalar or 1-d array of coordinates is accepted as well.
    """
    if N < 0:
        raise ValueError("generation must be non-negative")
    pts = _points(omega, p.nu)
    total = np.zeros(pts.shape[:-1])
    for n in range(N + 1):
        la = p.log2_amplitude(n)
        if la < _NEGLIGIBLE_LOG2:
            break
        coeff = theta.values(n, cell_coordinates(pts, n))
        total = total + 2.0**la * coeff * haar_sign(pts, n)
    return _squeeze(total)


def hull(omega, theta: ThetaField, p: HullParams, tol: float = 1e-15):
    """Hull value and the truncation level used, as ``(value, N)``."""
    N = truncation_level(p, tol)
    return hull_truncated(omega, theta, N, p), N


def hull_full_sum(omega, theta: ThetaField, N: int, p: HullParams):
    """Reference v_N: every cell of every generation, K_n terms each.

    Exponential in nu * N; meant for cross-checking small cases only.
    """
    pts = _points(omega, p.nu)
    total = np.zeros(pts.shape[:-1])
    for n in range(N + 1):
        side = 1 << n
        ks = np.array(list(itertools.product(range(1, side + 1), repeat=p.nu)), dtype=float)
        coeff = theta.values(n, ks - 1.0)
        a = 2.0 ** p.log2_amplitude(n)
        phi = haar_value(pts[..., None, :], n, ks)  # (..., K_n): every basis function
        total = total + a * (phi @ coeff)
    return _squeeze(total)


def hull_range(p: HullParams, terms: int = 64) -> tuple[float, float]:
    """Interval containing every hull value: [-sum_{n>=1} a_n, sum_{n>=0} a_n]."""
    tail = sum(2.0 ** p.log2_amplitude(n) for n in range(1, terms))
    return -tail, 1.0 + tail


def potential(x, omega, theta: ThetaField, alpha, p: HullParams,
              truncation: int | None = None, tol: float = 1e-15):
    """V(x) = v(T^x omega); ``x`` is a site or an ``(M, d)`` array of sites."""
    pts = shift(omega, x, alpha)
    N = truncation_level(p, tol) if truncation is None else truncation
    return hull_truncated(pts, theta, N, p)


def min_pairwise_gap(values) -> float:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size < 2:
        raise ValueError("need at least two values")
    return float(np.min(np.diff(v)))


def potential_separation(sites, omega, theta: ThetaField, alpha, p: HullParams,
                         truncation: int | None = None) -> float:
    """min_{x != y} |V(x) - V(y)| over the given sites."""
    sites = np.atleast_2d(np.asarray(sites))
    if sites.shape[0] < 2:
        raise ValueError("need at least two sites")
    return min_pairwise_gap(potential(sites, omega, theta, alpha, p, truncation))
