"""The phase space T^nu: metric, shifts, dyadic cells and Diophantine scans.

Points are float arrays whose last axis has length ``nu``; every function
accepts a single point or a stack of points.  Frequency matrices have shape
``(d, nu)``: row ``j`` is the rotation vector for lattice direction ``j``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


class RationalOrbitError(ValueError):
    """A scanned orbit returned exactly to its starting point."""


def wrap(x) -> np.ndarray:
    """Reduce coordinates mod 1 into [0, 1)."""
    x = np.asarray(x, dtype=float)
    y = x - np.floor(x)
    # x - floor(x) can round up to 1.0 for tiny negative x
    return np.where(y >= 1.0, 0.0, y)


def torus_point(coords) -> np.ndarray:
    return wrap(np.atleast_1d(np.asarray(coords, dtype=float)))


def frequency_matrix(alphas, d: int | None = None) -> np.ndarray:
    """Normalize frequencies to a ``(d, nu)`` array.

    A scalar means ``d = nu = 1``; a flat vector is read as one row
    (``d = 1``) unless ``d`` says otherwise.
    """
    a = np.asarray(alphas, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1) if d in (None, 1) else a.reshape(d, -1)
    if not np.all(np.isfinite(a)):
        raise ValueError("frequency matrix has non-finite entries")
    return a


def circle_distance(a, b) -> np.ndarray:
    delta = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % 1.0
    return np.minimum(delta, 1.0 - delta)


def torus_distance(a, b) -> np.ndarray | float:
    """Max over coordinates of the circle distance; values lie in [0, 1/2]."""
    dist = np.max(circle_distance(a, b), axis=-1)
    return float(dist) if np.ndim(dist) == 0 else dist


def shift(omega, x, alpha) -> np.ndarray:
    """T^x omega = omega + sum_j x_j alpha_j (mod 1).

    ``x`` may be a single lattice vector of length d or an ``(M, d)`` stack,
    in which case the result has shape ``(M, nu)``.
    """
    alpha = frequency_matrix(alpha)
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    return wrap(np.asarray(omega, dtype=float) + x @ alpha)


def orbit(omega, sites, alpha) -> np.ndarray:
    """Points T^x omega for every row x of ``sites``."""
    return shift(omega, np.atleast_2d(sites), alpha)


@dataclass(frozen=True)
class CellIndex:
    """Cell C_{n,k} of the dyadic partition C_n; ``k`` is 1-based per axis."""

    n: int
    k: tuple[int, ...]

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("generation must be non-negative")
        hi = 1 << self.n
        if any(not 1 <= kj <= hi for kj in self.k):
            raise ValueError(f"cell index {self.k} outside 1..{hi} at generation {self.n}")

    @property
    def nu(self) -> int:
        return len(self.k)

    def flat(self) -> int:
        """Row-major 1-based index in 1..K_n, K_n = 2**(nu*n)."""
        side = 1 << self.n
        idx = 0
        for kj in self.k:
            idx = idx * side + (kj - 1)
        return idx + 1

    def parent(self, generation: int) -> CellIndex:
        if not 0 <= generation <= self.n:
            raise ValueError("parent generation must lie in 0..n")
        drop = self.n - generation
        return CellIndex(generation, tuple(((kj - 1) >> drop) + 1 for kj in self.k))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = (np.asarray(self.k, dtype=float) - 1.0) / 2.0**self.n
        return lo, lo + 2.0**-self.n


def cell_coordinates(omega, n: int) -> np.ndarray:
    """Zero-based per-axis cell coordinates floor(omega * 2**n), as floats.

    Multiplication by a power of two is exact, so the floor is exact for
    every representable point; floats are used so that n may exceed 63.
    """
    return np.floor(np.asarray(omega, dtype=float) * 2.0**n)


def cell_index(omega, n: int) -> CellIndex:
    if n < 0:
        raise ValueError("generation must be non-negative")
    k = cell_coordinates(torus_point(omega), n)
    return CellIndex(n, tuple(int(kj) + 1 for kj in k))


def haar_value(omega, n, k) -> np.ndarray | int:
    """phi_{n,k}(omega) in {-1, 0, +1}.

    For n >= 1 the value is the tensor product over axes of +1 on the lower
    half of the cell and -1 on the upper half, and 0 off the cell.  ``k`` may
    be a CellIndex, a 1-based tuple, or an integer array with last axis nu.
    Broadcasting over omega and k is supported.
    """
    if isinstance(k, CellIndex):
        n, k = k.n, k.k
    omega = np.asarray(omega, dtype=float)
    if n == 0:
        val = np.ones(np.broadcast_shapes(omega.shape[:-1], np.shape(k)[:-1]), dtype=int)
        return int(val) if val.ndim == 0 else val
    k0 = np.asarray(k, dtype=float) - 1.0
    scaled = omega * 2.0**n
    inside = np.all((scaled >= k0) & (scaled < k0 + 1.0), axis=-1)
    upper = (scaled - k0) >= 0.5
    sign = np.prod(np.where(upper, -1, 1), axis=-1)
    val = np.where(inside, sign, 0)
    return int(val) if val.ndim == 0 else val


def haar_sign(omega, n: int) -> np.ndarray:
    """Sign of phi_{n, k_hat_n(omega)} at omega (the cell containing omega)."""
    if n == 0:
        return np.ones(np.shape(omega)[:-1])
    bits = np.floor(np.asarray(omega, dtype=float) * 2.0 ** (n + 1)) % 2.0
    return np.prod(1.0 - 2.0 * bits, axis=-1)


# -- dynamics constants ------------------------------------------------------

@dataclass(frozen=True)
class DiophantineScan:
    A: int
    radius: int
    C_A: int
    ratio: float  # max |z|^-A / dist(T^z w, w)
    argmax: tuple[int, ...]


def _lattice_half_ball(d: int, X: int) -> np.ndarray:
    """Nonzero z with |z|_inf <= X, one representative of each pair {z, -z}."""
    if d == 1:
        return np.arange(1, X + 1, dtype=np.int64).reshape(-1, 1)
    pts = np.array(list(itertools.product(range(-X, X + 1), repeat=d)), dtype=np.int64)
    # keep z whose first nonzero coordinate is positive
    nz = pts != 0
    first = np.argmax(nz, axis=1)
    lead = pts[np.arange(len(pts)), first]
    return pts[nz.any(axis=1) & (lead > 0)]


def diophantine_scan(alpha, A: float, X: int, omega=None) -> DiophantineScan:
    """Empirical aperiodicity constant for a toral shift.

    Returns the smallest integer C with dist(T^z w, w) >= C^-1 |z|^-A for all
    0 < |z| <= X.  For shifts the distance depends on z only, so ``omega``
    is accepted for interface symmetry and otherwise ignored.
    """
    if X < 1:
        raise ValueError("scan radius must be >= 1")
    alpha = frequency_matrix(alpha)
    d = alpha.shape[0]
    z = _lattice_half_ball(d, int(X))
    base = np.zeros(alpha.shape[1]) if omega is None else torus_point(omega)
    dist = np.asarray(torus_distance(shift(base, z, alpha), base))
    if np.any(dist == 0.0):
        bad = z[np.argmax(dist == 0.0)]
        raise RationalOrbitError(f"zero return distance at z={tuple(int(v) for v in bad)}")
    norm = np.max(np.abs(z), axis=1).astype(float)
    ratio = norm ** (-float(A)) / dist
    i = int(np.argmax(ratio))
    return DiophantineScan(
        A=A, radius=int(X), C_A=int(math.ceil(ratio[i])), ratio=float(ratio[i]),
        argmax=tuple(int(v) for v in z[i]),
    )


def divergence_constants(alpha) -> tuple[int, int]:
    """(A', C_A') for the tempered-divergence condition.

    Shifts are isometries of the torus, so the exponent is 0 and the
    constant 1.  Other dynamics would override this.
    """
    frequency_matrix(alpha)
    return 0, 1


def golden_mean() -> float:
    return (math.sqrt(5.0) - 1.0) / 2.0
