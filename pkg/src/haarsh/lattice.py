"""Finite lattice cubes and the Dirichlet restriction H = adjacency + gV.

Sites of a cube are enumerated lexicographically (C order, first coordinate
slowest); that order is fixed and every matrix, vector and report uses it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .hull import HullParams, potential
from .theta import ThetaField

DEFAULT_SITE_CAP = 8192


class SpectrumError(RuntimeError):
    """Eigensolve refused (too large) or failed its residual checks."""


class SingularEnergyError(ArithmeticError):
    """The energy is an eigenvalue to working precision."""


@dataclass(frozen=True)
class LatticeCube:
    """Max-norm cube B_L(u) = {x in Z^d : |x - u| <= L}."""

    center: tuple[int, ...]
    L: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))
        if self.L < 0:
            raise ValueError("cube radius must be non-negative")
        if not self.center:
            raise ValueError("cube needs at least one dimension")

    @classmethod
    def at(cls, L: int, center=None, d: int = 1) -> LatticeCube:
        return cls(tuple(center) if center is not None else (0,) * d, int(L))

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def side(self) -> int:
        return 2 * self.L + 1

    @property
    def size(self) -> int:
        return self.side**self.d

    def sites(self) -> np.ndarray:
        return _cube_sites(self.d, self.L) + np.asarray(self.center, dtype=np.int64)

    def contains(self, x) -> bool:
        return int(np.max(np.abs(np.asarray(x) - self.center))) <= self.L

    def contains_cube(self, other: LatticeCube) -> bool:
        gap = np.max(np.abs(np.asarray(other.center) - self.center))
        return int(gap) + other.L <= self.L

    def disjoint(self, other: LatticeCube) -> bool:
        return int(np.max(np.abs(np.asarray(other.center) - self.center))) > self.L + other.L

    def index_of(self, x) -> int:
        rel = np.asarray(x, dtype=np.int64) - np.asarray(self.center) + self.L
        if rel.shape != (self.d,) or np.any(rel < 0) or np.any(rel >= self.side):
            raise IndexError(f"site {tuple(np.atleast_1d(x))} is not in {self}")
        idx = 0
        for r in rel:
            idx = idx * self.side + int(r)
        return idx

    def distance_from(self, x) -> np.ndarray:
        """Max-norm distance of each site to ``x``, in site order."""
        return np.max(np.abs(self.sites() - np.asarray(x)), axis=1)

    def subcube_centers(self, L: int) -> np.ndarray:
        """Centers of every radius-L cube inside this one, in site order."""
        if L > self.L:
            return np.zeros((0, self.d), dtype=np.int64)
        return LatticeCube(self.center, self.L - L).sites()

    def __str__(self) -> str:
        return f"B_{self.L}{self.center}"


@lru_cache(maxsize=64)
def _cube_sites(d: int, L: int) -> np.ndarray:
    axis = np.arange(-L, L + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    out = np.stack([g.ravel() for g in grids], axis=1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BoundarySet:
    inner: np.ndarray  # sites of the cube with a neighbour outside
    outer: np.ndarray  # sites outside with a neighbour inside
    edges: np.ndarray  # (k, 2, d): (inside, outside) nearest-neighbour pairs


def boundaries(c: LatticeCube, ambient: LatticeCube | None = None) -> BoundarySet:
    if ambient is not None:
        if ambient.d != c.d or not ambient.contains_cube(c):
            raise ValueError("cube must lie inside the ambient cube")
        if ambient.contains_cube(c) and c.contains_cube(ambient):
            raise ValueError("cube equals its ambient set: boundary is empty")
    sites = c.sites()
    inner, edges = [], []
    seen_outer: set[tuple[int, ...]] = set()
    for x in sites:
        has_out = False
        for axis in range(c.d):
            for step in (-1, 1):
                y = x.copy()
                y[axis] += step
                if c.contains(y) or (ambient is not None and not ambient.contains(y)):
                    continue
                has_out = True
                edges.append((x, y))
                key = tuple(int(v) for v in y)
                seen_outer.add(key)
        if has_out:
            inner.append(x)
    return BoundarySet(
        inner=np.array(inner, dtype=np.int64).reshape(-1, c.d),
        outer=np.array(sorted(seen_outer), dtype=np.int64).reshape(-1, c.d),
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2, c.d),
    )


def inner_boundary_mask(c: LatticeCube) -> np.ndarray:
    """Boolean mask (site order) of the sites at distance exactly L from the center."""
    return c.distance_from(c.center) == c.L


@lru_cache(maxsize=32)
def _adjacency(d: int, L: int) -> np.ndarray:
    n = 2 * L + 1
    path = np.eye(n, k=1) + np.eye(n, k=-1)
    eye = np.eye(n)
    total = np.zeros((n**d, n**d))
    for axis in range(d):
        term = np.ones((1, 1))
        for j in range(d):
            term = np.kron(term, path if j == axis else eye)
        total += term
    total.setflags(write=False)
    return total


def adjacency(c: LatticeCube) -> np.ndarray:
    """Nearest-neighbour adjacency restricted to the cube (Dirichlet)."""
    return _adjacency(c.d, c.L)


@dataclass(frozen=True)
class LocalOperator:
    cube: LatticeCube
    diagonal: np.ndarray  # gV(x), site order
    g: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        diag = np.array(self.diagonal, dtype=float).reshape(-1)
        if diag.size != self.cube.size:
            raise ValueError("diagonal length does not match the cube")
        diag.setflags(write=False)
        object.__setattr__(self, "diagonal", diag)

    @property
    def matrix(self) -> np.ndarray:
        return adjacency(self.cube) + np.diag(self.diagonal)

    @property
    def size(self) -> int:
        return self.cube.size

    def restrict(self, sub: LatticeCube) -> LocalOperator:
        """Dirichlet restriction to a sub-cube."""
        if not self.cube.contains_cube(sub):
            raise ValueError(f"{sub} is not inside {self.cube}")
        idx = [self.cube.index_of(x) for x in sub.sites()]
        return LocalOperator(sub, self.diagonal[idx], self.g, dict(self.meta))

    @classmethod
    def from_potential(cls, cube: LatticeCube, V, g: float = 1.0, **meta) -> LocalOperator:
        return cls(cube, g * np.asarray(V, dtype=float), g, meta)


def assemble(c: LatticeCube, omega, theta: ThetaField, alpha, params: HullParams,
             g: float, truncation: int | None = None) -> LocalOperator:
    """H_Lambda(omega; theta) = adjacency + gV on the cube."""
    if g < 0:
        raise ValueError("coupling g must be non-negative")
    V = np.atleast_1d(potential(c.sites(), omega, theta, alpha, params, truncation))
    return LocalOperator.from_potential(
        c, V, g, seed=theta.master_seed, truncation=truncation,
    )


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    residuals: np.ndarray | None
    cube: LatticeCube | None = None

    def to_json(self, include_vectors: bool = False, **meta) -> str:
        doc = {
            "cube": None if self.cube is None else {"center": list(self.cube.center), "L": self.cube.L},
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "max_residual": None if self.residuals is None else float(np.max(self.residuals, initial=0.0)),
            "meta": meta,
        }
        if include_vectors and self.eigenvectors is not None:
            doc["eigenvectors"] = self.eigenvectors.T.tolist()
        return json.dumps(doc, sort_keys=True)


def eigensystem(H: LocalOperator, cap: int = DEFAULT_SITE_CAP, vectors: bool = True,
                check: bool = True) -> SpectrumReport:
    """Full dense eigendecomposition; columns of ``eigenvectors`` are the states."""
    if H.size > cap:
        raise SpectrumError(f"{H.size} sites exceeds the eigensolve cap {cap}")
    M = H.matrix
    if not vectors:
        return SpectrumReport(sla.eigvalsh(M), None, None, H.cube)
    lam, vec = sla.eigh(M)
    res = np.linalg.norm(M @ vec - vec * lam, axis=0)
    if check:
        scale = max(1.0, float(np.max(np.abs(lam), initial=0.0)))
        ortho = np.max(np.abs(vec.T @ vec - np.eye(len(lam))), initial=0.0)
        if np.max(res, initial=0.0) > 1e-10 * scale or ortho > 1e-10:
            raise SpectrumError(
                f"eigensolve failed checks: residual {np.max(res):.3e}, orthogonality {ortho:.3e}"
            )
    return SpectrumReport(lam, vec, res, H.cube)


@dataclass(frozen=True)
class GreenValue:
    value: float
    rcond: float  # reciprocal 1-norm condition estimate of H - E


def _factor(H: LocalOperator, E: float):
    A = H.matrix - E * np.eye(H.size)
    anorm = float(np.max(np.sum(np.abs(A), axis=0)))
    lu, piv, info = sla.lapack.dgetrf(A)
    if info > 0:
        raise SingularEnergyError(f"H - E is exactly singular at E={E!r}")
    rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
    if rcond < np.finfo(float).eps:
        raise SingularEnergyError(f"E={E!r} is an eigenvalue to machine precision (rcond={rcond:.2e})")
    return (lu, piv), float(rcond)


def _site_index(H: LocalOperator, x) -> int:
    if isinstance(x, (int, np.integer)):
        return int(x)
    return H.cube.index_of(x)


def green_column(H: LocalOperator, y, E: float) -> tuple[np.ndarray, float]:
    """Column G(., y; E) of (H - E)^-1 by one LU solve, plus rcond."""
    lu, rcond = _factor(H, E)
    rhs = np.zeros(H.size)
    rhs[_site_index(H, y)] = 1.0
    return sla.lu_solve(lu, rhs), rcond


def green(H: LocalOperator, x, y, E: float) -> GreenValue:
    col, rcond = green_column(H, y, E)
    return GreenValue(float(col[_site_index(H, x)]), rcond)


def resolvent(H: LocalOperator, E: float) -> tuple[np.ndarray, float]:
    """The full matrix (H - E)^-1, for small cubes."""
    lu, rcond = _factor(H, E)
    return sla.lu_solve(lu, np.eye(H.size)), rcond


def _values(s) -> np.ndarray:
    return np.sort(np.asarray(s.eigenvalues if isinstance(s, SpectrumReport) else s, dtype=float).ravel())


def spectral_separation(s) -> float:
    """Smallest gap between consecutive eigenvalues (0 for a degenerate pair)."""
    lam = _values(s)
    if lam.size < 2:
        raise ValueError("need at least two eigenvalues")
    return float(np.min(np.diff(lam)))


def spectra_distance(s1, s2) -> float:
    """min |E - E'| over E in s1, E' in s2, by a merge of the sorted lists."""
    a, b = _values(s1), _values(s2)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty spectrum")
    i = j = 0
    best = math.inf
    while i < a.size and j < b.size:
        gap = a[i] - b[j]
        best = min(best, abs(gap))
        if gap < 0:
            i += 1
        else:
            j += 1
    return float(best)


def subcube_spectra(op: LocalOperator, L: int, vectors: bool = False):
    """Spectra of every radius-L sub-cube of ``op.cube`` by one batched solve.

    Returns ``(centers, eigenvalues)`` or ``(centers, eigenvalues, eigenvectors)``
    with shapes ``(M, d)``, ``(M, n)``, ``(M, n, n)``.
    """
    centers = op.cube.subcube_centers(L)
    if len(centers) == 0:
        empty = np.zeros((0, (2 * L + 1) ** op.cube.d))
        return (centers, empty, empty[..., None]) if vectors else (centers, empty)
    offs = _cube_sites(op.cube.d, L)
    rel = centers[:, None, :] + offs[None, :, :] - np.asarray(op.cube.center) + op.cube.L
    idx = np.ravel_multi_index(tuple(np.moveaxis(rel, -1, 0)), (op.cube.side,) * op.cube.d)
    diag = op.diagonal[idx]
    adj = _adjacency(op.cube.d, L)
    mats = np.broadcast_to(adj, (len(centers),) + adj.shape).copy()
    mats[:, np.arange(adj.shape[0]), np.arange(adj.shape[0])] = diag
    if vectors:
        lam, vec = np.linalg.eigh(mats)
        return centers, lam, vec
    return centers, np.linalg.eigvalsh(mats)


@dataclass(frozen=True)
class PairDistance:
    value: float
    pair: tuple[tuple[int, ...], tuple[int, ...]] | None
    energies: tuple[float, float] | None
    cubes_used: int
    stride: int
    exhaustive: bool


def _disjoint_owner_scan(centers: np.ndarray, lam: np.ndarray, L: int):
    """Exact min |E - E'| over eigenvalues of disjoint sub-cubes.

    For the optimal pair in the sorted merged list, any eigenvalue of a cube
    disjoint from the first one that sits in between would be at least as
    good, so it suffices to pair each entry with its nearest disjoint
    successor.  Offsets grow until every entry is resolved or pruned.
    """
    M, n = lam.shape
    flat = lam.ravel()
    owner = np.repeat(np.arange(M), n)
    order = np.argsort(flat, kind="stable")
    e, own = flat[order], owner[order]
    best, arg = math.inf, None
    live = np.arange(e.size - 1)
    k = 1
    while live.size:
        live = live[live + k < e.size]
        if not live.size:
            break
        gap = e[live + k] - e[live]
        keep = gap < best
        live, gap = live[keep], gap[keep]
        cx, cy = centers[own[live]], centers[own[live + k]]
        dis = np.max(np.abs(cx - cy), axis=1) > 2 * L
        if np.any(dis):
            hit = np.flatnonzero(dis)
            j = hit[np.argmin(gap[hit])]
            if gap[j] < best:
                best = float(gap[j])
                arg = (int(live[j]), int(live[j] + k))
            live = live[~dis]
        k += 1
    if arg is None:
        return math.inf, None, None
    a, b = arg
    pair = (tuple(int(v) for v in centers[own[a]]), tuple(int(v) for v in centers[own[b]]))
    return best, pair, (float(e[a]), float(e[b]))


def min_pair_spectra_distance(L: int, super_cube: LatticeCube, omega=None, theta=None,
                              alpha=None, params: HullParams | None = None, g: float = 1.0,
                              truncation: int | None = None, pair_budget: int | None = None,
                              operator: LocalOperator | None = None) -> PairDistance:
    """D = min over disjoint radius-L sub-cube pairs of their spectra distance.

    Pass either ``operator`` on ``super_cube`` or the ingredients to assemble
    it.  When the number of cubes would give more than ``pair_budget`` pairs,
    every ``stride``-th cube (site order) is used and the plan is reported.
    """
    if super_cube.L < L:
        raise ValueError("super cube radius must be >= L")
    if operator is None:
        operator = assemble(super_cube, omega, theta, alpha, params, g, truncation)
    centers = super_cube.subcube_centers(L)
    stride = 1
    if pair_budget is not None:
        while (len(centers[::stride]) * (len(centers[::stride]) - 1)) // 2 > pair_budget:
            stride += 1
    use = np.arange(len(centers))[::stride]
    cs, lam = subcube_spectra(operator, L)
    cs, lam = cs[use], lam[use]
    value, pair, energies = _disjoint_owner_scan(cs, lam, L)
    if pair is None:
        raise ValueError(f"no disjoint pair of radius-{L} cubes fits in {super_cube}")
    return PairDistance(value, pair, energies, len(use), stride, stride == 1)
