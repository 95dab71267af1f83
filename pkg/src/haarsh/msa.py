"""Certification predicates for the multi-scale analysis.

Thresholds are compared in the natural-log domain so that widths far below
double precision still give meaningful verdicts.  Green-function values
are obtained from LU solves; batched scans over many sub-cubes first use
the spectral resolution and re-check anything near a threshold by LU.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    LatticeCube, LocalOperator, SingularEnergyError, _adjacency, _cube_sites, eigensystem,
    green_column, inner_boundary_mask, min_pair_spectra_distance, resolvent,
)
from .logmag import LogMagnitude
from .schedule import ModelParams, ScaleSchedule, gamma

# absolute error allowance on computed eigenvector entries when bounding
# Green functions through the spectral resolution
_VECTOR_SLACK = 1e-14
# log-distance to a threshold below which batched verdicts are redone by LU
_RECHECK_BAND = 1e-3


def _as_width(width) -> LogMagnitude:
    return width if isinstance(width, LogMagnitude) else LogMagnitude.from_float(float(width))


def ln_ns_threshold(m: float, L: int, d: int) -> float:
    """ln of the non-singularity threshold for a cube of radius L."""
    if L == 0:
        return -math.log(2 * d) - gamma(m, 0)
    return -d * math.log(3 * L) - gamma(m, L)


@dataclass(frozen=True)
class ResonanceCheck:
    resonant: bool
    distance: float  # min_i |lambda_i - E|
    log2_width: float


def is_E_resonant(H, E: float, width) -> ResonanceCheck:
    """E-resonant iff the spectrum comes closer to E than ``width``.

    ``H`` may be a LocalOperator, a SpectrumReport or an eigenvalue array.
    """
    if isinstance(H, LocalOperator):
        lam = eigensystem(H, vectors=False).eigenvalues
    else:
        lam = np.asarray(getattr(H, "eigenvalues", H), dtype=float)
    w = _as_width(width)
    dist = float(np.min(np.abs(lam - E)))
    return ResonanceCheck(LogMagnitude.from_float(dist) < w, dist, w.log2_abs)


@dataclass(frozen=True)
class NSCheck:
    nonsingular: bool
    ln_max_green: float
    ln_threshold: float
    witness: tuple[int, ...] | None  # boundary site attaining the max
    note: str = ""


def is_EmNS(H: LocalOperator, E: float, m: float) -> NSCheck:
    """(E, m)-non-singular iff max_{|y-x|=L} |G(x, y; E)| is below threshold."""
    cube = H.cube
    ln_t = ln_ns_threshold(m, cube.L, cube.d)
    try:
        col, _ = green_column(H, cube.center, E)
    except SingularEnergyError:
        return NSCheck(False, math.inf, ln_t, None, "resonant: E is an eigenvalue")
    mask = inner_boundary_mask(cube)
    vals = np.abs(col[mask])
    j = int(np.argmax(vals))
    top = float(vals[j])
    ln_g = math.log(top) if top > 0 else -math.inf
    witness = tuple(int(v) for v in cube.sites()[mask][j])
    return NSCheck(ln_g <= ln_t, ln_g, ln_t, witness)


@dataclass(frozen=True)
class CubeVerdict:
    cube: LatticeCube
    E: float
    is_ER: bool
    is_EmNS: bool
    min_distance: float
    ln_max_green: float
    ln_threshold: float
    log2_width: float

    def to_dict(self) -> dict:
        return {
            "center": list(self.cube.center), "L": self.cube.L, "E": self.E,
            "is_ER": self.is_ER, "is_EmNS": self.is_EmNS,
            "min_distance": self.min_distance, "ln_max_green": self.ln_max_green,
            "ln_threshold": self.ln_threshold, "log2_width": self.log2_width,
        }


def cube_verdict(H: LocalOperator, E: float, m: float, width) -> CubeVerdict:
    res = is_E_resonant(H, E, width)
    ns = is_EmNS(H, E, m)
    return CubeVerdict(H.cube, float(E), res.resonant, ns.nonsingular, res.distance,
                       ns.ln_max_green, ns.ln_threshold, res.log2_width)


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class CombesThomasResult:
    satisfied: bool
    worst_ratio: float  # max |G(x,y)| / (2/eta e^{-mu|x-y|})
    mu: float
    eta: float
    distance: float


def combes_thomas_check(H: LocalOperator, E: float, eta: float,
                        slack: float = 1e-9) -> CombesThomasResult:
    """Check |G(x,y;E)| <= 2/eta exp(-mu |x-y|) for every pair of sites.

    Requires dist(E, spectrum) >= eta > 4d; otherwise PreconditionError.
    """
    d = H.cube.d
    if eta <= 4 * d:
        raise PreconditionError(f"eta = {eta:g} must exceed 4d = {4 * d}")
    lam = eigensystem(H, vectors=False).eigenvalues
    dist = float(np.min(np.abs(lam - E)))
    if dist < eta:
        raise PreconditionError(f"dist(E, spectrum) = {dist:g} < eta = {eta:g}")
    mu = 0.5 * math.log(eta / (4 * d))
    G, _ = resolvent(H, E)
    sites = H.cube.sites()
    sep = np.max(np.abs(sites[:, None, :] - sites[None, :, :]), axis=2)
    bound = (2.0 / eta) * np.exp(-mu * sep)
    ratio = np.abs(G) / bound
    worst = float(np.max(ratio))
    return CombesThomasResult(worst <= 1.0 + slack, worst, mu, eta, dist)


def dominated_bound(q: float, ell: int, L: int, M: float) -> float:
    """q**floor((L+1)/(ell+1)) * M."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if not 0 <= ell <= L:
        raise ValueError("need 0 <= ell <= L")
    return q ** ((L + 1) // (ell + 1)) * M


@dataclass(frozen=True)
class DominationCheck:
    dominated: bool
    witness: tuple[int, ...] | None  # first violating center, site order
    worst_ratio: float  # max |f(x)| / max_{|y-x|=ell+1} |f(y)|


def is_dominated(f, ell: int, q: float, cube: LatticeCube,
                 ambient: LatticeCube) -> DominationCheck:
    """Check |f(x)| <= q max_{|y-x|=ell+1} |f(y)| for every B_ell(x) inside ``cube``.

    ``f`` holds values on ``ambient`` in site order; ``ambient`` must
    contain the cube of radius L+1 around the center of ``cube``.
    """
    if not ambient.contains_cube(LatticeCube(cube.center, cube.L + 1)):
        raise ValueError("ambient set must contain the cube of radius L+1")
    if not 0 <= ell <= cube.L:
        raise ValueError("need 0 <= ell <= L")
    f = np.abs(np.asarray(f, dtype=float)).reshape(-1)
    if f.size != ambient.size:
        raise ValueError("f must be given on every site of the ambient cube")
    shell = _cube_sites(cube.d, ell + 1)
    shell = shell[np.max(np.abs(shell), axis=1) == ell + 1]
    worst, witness = 0.0, None
    for x in LatticeCube(cube.center, cube.L - ell).sites():
        top = max(f[ambient.index_of(x + s)] for s in shell)
        fx = f[ambient.index_of(x)]
        with np.errstate(over="ignore"):  # subnormal shells give an honest inf
            ratio = math.inf if top == 0 and fx > 0 else (0.0 if fx == 0 else fx / top)
        if ratio > worst:
            worst = ratio
        if fx > q * top and witness is None:
            witness = tuple(int(v) for v in x)
    return DominationCheck(witness is None, witness, worst)


class SubcubeBank:
    """Spectral data of every radius-L sub-cube of an operator's cube.

    Sub-cubes with bit-identical potentials share one eigendecomposition
    (a "pattern").  A sub-cube is (E, m)-singular only if E lies in one of
    its windows |lambda_i - E| < h_i, with h_i = 2 n c_i / t where c_i
    bounds |psi_i(center) psi_i(y)| over the inner boundary and t is the
    threshold; the windows prune the energies that need Green evaluation.
    """

    def __init__(self, op: LocalOperator, L: int, m: float):
        self.op, self.L, self.m = op, L, m
        d = op.cube.d
        self.centers = op.cube.subcube_centers(L)
        offs = _cube_sites(d, L)
        n = len(offs)
        if len(self.centers):
            rel = self.centers[:, None, :] + offs[None, :, :] - np.asarray(op.cube.center) + op.cube.L
            idx = np.ravel_multi_index(tuple(np.moveaxis(rel, -1, 0)), (op.cube.side,) * d)
            diag = op.diagonal[idx]
            patterns, self.first, self.pattern = np.unique(
                diag, axis=0, return_index=True, return_inverse=True)
            self.pattern = self.pattern.reshape(-1)
            adj = _adjacency(d, L)
            mats = np.broadcast_to(adj, (len(patterns), n, n)).copy()
            mats[:, np.arange(n), np.arange(n)] = patterns
            self.lam, self.vec = np.linalg.eigh(mats)
        else:
            self.first = self.pattern = np.zeros(0, dtype=np.int64)
            self.lam, self.vec = np.zeros((0, n)), np.zeros((0, n, n))
        self.center_row = int(np.flatnonzero(np.all(offs == 0, axis=1))[0])
        self.boundary_rows = np.flatnonzero(np.max(np.abs(offs), axis=1) == L)
        self.ln_t = ln_ns_threshold(m, L, d)
        px = np.abs(self.vec[:, self.center_row, :]) + _VECTOR_SLACK
        pb = np.max(np.abs(self.vec[:, self.boundary_rows, :]), axis=1, initial=0.0) + _VECTOR_SLACK
        with np.errstate(over="ignore"):
            self.half = np.exp(np.log(2.0 * n * px * pb) - self.ln_t)
        self._members = None

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def n_patterns(self) -> int:
        return len(self.lam)

    def members(self, pattern: int) -> np.ndarray:
        if self._members is None:
            order = np.argsort(self.pattern, kind="stable")
            cuts = np.flatnonzero(np.diff(self.pattern[order])) + 1
            self._members = np.split(order, cuts)
        return self._members[pattern]

    def cube(self, k: int) -> LatticeCube:
        return LatticeCube(tuple(int(v) for v in self.centers[k]), self.L)

    def energy_set(self, width: float) -> np.ndarray:
        """Every sub-cube eigenvalue shifted by +-width, sorted and unique."""
        lam = self.lam.ravel()
        return np.unique(np.concatenate([lam - width, lam + width]))

    def ln_green(self, pats: np.ndarray, Es: np.ndarray) -> np.ndarray:
        """ln max_{|y-x|=L} |G(x,y;E)| for pattern pats[i] at energy Es[i]."""
        out = np.empty(len(pats))
        step = 20000
        for lo in range(0, len(pats), step):
            k, E = pats[lo:lo + step], Es[lo:lo + step]
            V = self.vec[k]
            den = self.lam[k] - E[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                coef = V[:, self.center_row, :] / den
                G = np.einsum("cbn,cn->cb", V[:, self.boundary_rows, :], coef)
                val = np.log(np.max(np.abs(G), axis=1))
            val[np.any(den == 0, axis=1)] = math.inf
            out[lo:lo + step] = val
        near = np.abs(out - self.ln_t) < _RECHECK_BAND
        near |= np.isnan(out) | (out == math.inf)
        for i in np.flatnonzero(near):
            sub = self.op.restrict(self.cube(int(self.first[pats[i]])))
            out[i] = is_EmNS(sub, float(Es[i]), self.m).ln_max_green
        return out

    def singular_hits(self, energies: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """All (pattern, energy-index) pairs singular at that energy."""
        E = np.asarray(energies, dtype=float)
        if E.size == 0 or self.n_patterns == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        lam, half = self.lam.ravel(), self.half.ravel()
        lo = np.searchsorted(E, lam - half, side="right")
        hi = np.searchsorted(E, lam + half, side="left")
        count = np.maximum(hi - lo, 0)
        owner = np.repeat(np.arange(lam.size) // self.lam.shape[1], count)
        eidx = np.repeat(lo, count) + np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count)
        if owner.size == 0:
            return owner, eidx
        key = np.unique(owner * E.size + eidx)
        owner, eidx = key // E.size, key % E.size
        sing = self.ln_green(owner, E[eidx]) > self.ln_t
        return owner[sing], eidx[sing]

    def _spread_pair(self, cubes: np.ndarray):
        """A pair of disjoint cubes among ``cubes`` if one exists.

        Two cubes of radius L are disjoint iff their centers differ by more
        than 2L along some axis, so the extreme centers per axis decide.
        """
        c = self.centers[cubes]
        for axis in range(c.shape[1]):
            lo, hi = int(np.argmin(c[:, axis])), int(np.argmax(c[:, axis]))
            if c[hi, axis] - c[lo, axis] > 2 * self.L:
                return int(cubes[lo]), int(cubes[hi])
        return None

    def singular_pair(self, energies: np.ndarray):
        """``((E, k1, k2) or None, number of singular sub-cubes seen)``."""
        E = np.asarray(energies, dtype=float)
        pats, eidx = self.singular_hits(E)
        seen = np.unique(pats)
        n_sing = int(sum(len(self.members(int(q))) for q in seen))
        if pats.size == 0:
            return None, n_sing
        order = np.lexsort((pats, eidx))
        pats, eidx = pats[order], eidx[order]
        cuts = np.flatnonzero(np.diff(eidx)) + 1
        for group_p, group_e in zip(np.split(pats, cuts), np.split(eidx, cuts)):
            cubes = np.concatenate([self.members(int(q)) for q in group_p])
            found = self._spread_pair(cubes)
            if found is not None:
                return (float(E[group_e[0]]),) + found, n_sing
        return None, n_sing


@dataclass(frozen=True)
class GoodBadVerdict:
    good: bool
    witness: tuple[float, tuple[int, ...], tuple[int, ...]] | None
    energies_tested: int
    singular_subcubes: int
    degenerate: bool = False  # empty energy set: vacuously good

    def to_dict(self) -> dict:
        w = None if self.witness is None else {
            "E": self.witness[0], "x": list(self.witness[1]), "y": list(self.witness[2])}
        return {"good": self.good, "witness": w, "energies_tested": self.energies_tested,
                "singular_subcubes": self.singular_subcubes, "degenerate": self.degenerate}


def classify_good_bad(op: LocalOperator, L_sub: int, energies, m: float,
                      bank: SubcubeBank | None = None) -> GoodBadVerdict:
    """m-bad iff some tested E admits two disjoint (E, m)-S sub-cubes of radius L_sub."""
    E = np.unique(np.asarray(energies, dtype=float).ravel())
    if E.size == 0:
        return GoodBadVerdict(True, None, 0, 0, degenerate=True)
    bank = SubcubeBank(op, L_sub, m) if bank is None else bank
    hit, n_sing = bank.singular_pair(E)
    if hit is None:
        return GoodBadVerdict(True, None, int(E.size), n_sing)
    e, k1, k2 = hit
    return GoodBadVerdict(False, (e, bank.cube(k1).center, bank.cube(k2).center), int(E.size), n_sing)


@dataclass(frozen=True)
class SparsenessCertificate:
    j: int
    super_cube: LatticeCube
    passed: bool
    log2_width: float
    energies_tested: int
    singular_subcubes: int
    resonant_pair_possible: bool  # min spectra distance over disjoint pairs < 2 width
    min_pair_distance: float
    witness: dict | None
    sampling: dict = field(default_factory=dict)
    proximity_passed: bool | None = None  # single-site double-proximity route (j = -1)

    def to_dict(self) -> dict:
        return {
            "j": self.j, "super_center": list(self.super_cube.center), "super_L": self.super_cube.L,
            "passed": self.passed, "log2_width": self.log2_width,
            "energies_tested": self.energies_tested, "singular_subcubes": self.singular_subcubes,
            "resonant_pair_possible": self.resonant_pair_possible,
            "min_pair_distance": self.min_pair_distance, "witness": self.witness,
            "sampling": self.sampling, "proximity_passed": self.proximity_passed,
        }


def _site_sparseness(j: int, op: LocalOperator, m: float, w: LogMagnitude) -> SparsenessCertificate:
    d = op.cube.d
    gv = op.diagonal
    order = np.argsort(gv, kind="stable")
    gaps = np.diff(gv[order])
    i = int(np.argmin(gaps))
    sep = float(gaps[i])
    # two single sites are singular at a common E iff their values are
    # closer than 2 / threshold = 4d e^{2m}
    ln_pair = math.log(4 * d) + gamma(m, 0)
    exact_fail = sep <= 0.0 or math.log(sep) < ln_pair
    # double proximity: both within 2w of a common E iff |gV(x) - gV(y)| < 4w
    proximity_fail = LogMagnitude.from_float(sep) < LogMagnitude.from_float(4.0) * w
    sites = op.cube.sites()
    x, y = sites[order[i]], sites[order[i + 1]]
    witness = None
    if exact_fail:
        witness = {"E": float(0.5 * (gv[order[i]] + gv[order[i + 1]])),
                   "x": [int(v) for v in x], "y": [int(v) for v in y], "gap": sep}
    return SparsenessCertificate(
        j=j, super_cube=op.cube, passed=not exact_fail, log2_width=w.log2_abs,
        energies_tested=-1, singular_subcubes=-1, resonant_pair_possible=proximity_fail,
        min_pair_distance=sep, witness=witness, sampling={"mode": "exact"},
        proximity_passed=not proximity_fail,
    )


def verify_sparseness(j: int, op: LocalOperator, schedule: ScaleSchedule,
                      width=None, m: float | None = None, energies=None,
                      pair_budget: int | None = None) -> SparsenessCertificate:
    """Check the sparseness property at scale j on ``op.cube``.

    ``op`` lives on the super-cube of radius L_j**4 (L_0**4 for j = -1).
    ``width`` overrides the exact g delta_j.  For j = -1 the check is exact
    over all energies.  For j >= 0 singular pairs are searched over
    ``energies`` (default: every sub-cube eigenvalue +- width) and the
    spectra-distance criterion rules out pairs of resonant cubes.
    """
    p = schedule.params
    m = p.m if m is None else m
    w = schedule.width(max(j, 0), op.g) if width is None else _as_width(width)
    if j == -1:
        return _site_sparseness(j, op, m, w)
    Lj = schedule.L(j)
    bank = SubcubeBank(op, Lj, m)
    if energies is None:
        wf = float(w)
        E = bank.energy_set(wf)
    else:
        E = np.unique(np.asarray(energies, dtype=float))
    hit, n_sing = bank.singular_pair(E)
    pair = min_pair_spectra_distance(Lj, op.cube, operator=op, pair_budget=pair_budget)
    two_w = LogMagnitude.from_float(2.0) * w
    witness = None
    if hit is not None:
        e, k1, k2 = hit
        witness = {"E": e, "x": list(bank.cube(k1).center), "y": list(bank.cube(k2).center)}
    return SparsenessCertificate(
        j=j, super_cube=op.cube, passed=hit is None, log2_width=w.log2_abs,
        energies_tested=int(E.size), singular_subcubes=n_sing,
        resonant_pair_possible=LogMagnitude.from_float(pair.value) < two_w,
        min_pair_distance=pair.value, witness=witness,
        sampling={"mode": "energy-set", "pair_stride": pair.stride, "cubes_used": pair.cubes_used},
    )


def _bad_supercubes(bank: SubcubeBank, energies: np.ndarray, super_L: int,
                    super_centers: np.ndarray) -> np.ndarray:
    """m-bad flags for radius-``super_L`` cubes, from the bank's singular hits."""
    bad = np.zeros(len(super_centers), dtype=bool)
    pats, eidx = bank.singular_hits(energies)
    if pats.size == 0:
        return bad
    order = np.argsort(eidx, kind="stable")
    pats, eidx = pats[order], eidx[order]
    cuts = np.flatnonzero(np.diff(eidx)) + 1
    reach = super_L - bank.L
    for group in np.split(pats, cuts):
        cubes = np.concatenate([bank.members(int(q)) for q in group])
        if cubes.size < 2:
            continue
        c = bank.centers[cubes]
        for s, u in enumerate(super_centers):
            if bad[s]:
                continue
            inside = cubes[np.max(np.abs(c - u), axis=1) <= reach]
            if inside.size >= 2 and bank._spread_pair(inside) is not None:
                bad[s] = True
    return bad


@dataclass(frozen=True)
class InductionStepCheck:
    """Outcome of testing "m-good and E-NR implies (E, m)-NS" on one super-cube."""

    j: int
    super_cube: LatticeCube
    energies: int
    nonresonant: int
    good: bool
    premises_met: int
    counterexamples: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "j": self.j, "center": list(self.super_cube.center), "L": self.super_cube.L,
            "energies": self.energies, "nonresonant": self.nonresonant, "good": self.good,
            "premises_met": self.premises_met, "counterexamples": list(self.counterexamples),
        }


def induction_step_check(op: LocalOperator, j: int, schedule: ScaleSchedule, center,
                         widths: tuple[float, float], m: float,
                         energies=None, slack: float = 1e-9) -> InductionStepCheck:
    """Check "m-good and E-NR implies (E, m)-NS" on B_{L_{j+1}}(center) inside ``op.cube``.

    ``widths`` are the practical widths (w_j, w_{j+1}).  Default energies
    sit just outside the resonance width around every eigenvalue of the
    super-cube, which is the hardest place for the implication.  m-goodness is
    tested over the sub-cube energy set plus those energies.
    """
    Lj, Lk = schedule.L(j), schedule.L(j + 1)
    sup = op.restrict(LatticeCube(tuple(center), Lk))
    lam = eigensystem(sup, vectors=False).eigenvalues
    w_sub, w_sup = widths
    if energies is None:
        bump = w_sup * (1.0 + 1e-6)
        energies = np.concatenate([lam - bump, lam + bump])
    energies = np.asarray(energies, dtype=float)
    bank = SubcubeBank(sup, Lj, m)
    verdict = classify_good_bad(sup, Lj, np.concatenate([bank.energy_set(w_sub), energies]), m, bank=bank)
    nonres, met, bad = 0, 0, []
    for E in energies:
        if is_E_resonant(lam, E, w_sup).resonant:
            continue
        nonres += 1
        if not verdict.good:
            continue
        met += 1
        ns = is_EmNS(sup, float(E), m)
        if ns.ln_max_green > ns.ln_threshold + math.log1p(slack):
            bad.append({"E": float(E), "ln_max_green": ns.ln_max_green, "ln_threshold": ns.ln_threshold})
    return InductionStepCheck(j, sup.cube, len(energies), nonres, verdict.good, met, tuple(bad))


@dataclass(frozen=True)
class ScaleRecord:
    j: int
    samples: int
    ss_passed: int
    resonant_pairs: int
    mean_singular_subcubes: float
    bad_supercubes: int
    supercubes_checked: int
    certificates: tuple[dict, ...]

    @property
    def pass_rate(self) -> float:
        return self.ss_passed / self.samples if self.samples else float("nan")

    def to_dict(self) -> dict:
        return {
            "j": self.j, "samples": self.samples, "ss_passed": self.ss_passed,
            "pass_rate": self.pass_rate, "resonant_pairs": self.resonant_pairs,
            "mean_singular_subcubes": self.mean_singular_subcubes,
            "bad_supercubes": self.bad_supercubes, "supercubes_checked": self.supercubes_checked,
            "certificates": list(self.certificates),
        }


def scale_induction_report(j_max: int, samples, schedule: ScaleSchedule, alpha,
                           widths=None, m: float | None = None,
                           supercubes_per_sample: int = 8) -> dict:
    """Sparseness statistics per scale over (omega, theta) samples.

    ``samples`` is a sequence of ``(omega, ThetaField)`` pairs.  Scale j
    uses the cube B_{L_j**4}(0) (B_{L_0**4}(0) for j = -1); ``widths`` maps
    j to a practical width (default: the exact g delta_j).  Up to
    ``supercubes_per_sample`` radius-L_{j+1} cubes per sample are also
    classified good or bad over the same energy set.
    """
    from .lattice import assemble

    if j_max < 0:
        raise ValueError("j_max must be >= 0")
    p = schedule.params
    m = p.m if m is None else m
    hp = p.hull_params()
    scales = []
    for j in range(-1, j_max + 1):
        R = schedule.L0**4 if j == -1 else schedule.L(j) ** 4
        passed = res_pairs = bad_total = checked = 0
        sing = []
        certs = []
        for omega, theta in samples:
            op = assemble(LatticeCube.at(R, d=p.d), omega, theta, alpha, hp, p.g)
            w = None if widths is None else widths.get(j)
            cert = verify_sparseness(j, op, schedule, width=w, m=m)
            passed += cert.passed
            res_pairs += cert.resonant_pair_possible
            sing.append(max(cert.singular_subcubes, 0))
            certs.append(cert.to_dict())
            if j >= 0:
                Lj, Lk = schedule.L(j), schedule.L(j + 1)
                bank = SubcubeBank(op, Lj, m)
                wf = float(schedule.width(j, p.g)) if w is None else float(w)
                pool = LatticeCube(op.cube.center, R - Lk).sites()
                step = max(1, len(pool) // supercubes_per_sample)
                centers = pool[::step][:supercubes_per_sample]
                flags = _bad_supercubes(bank, bank.energy_set(wf), Lk, centers)
                bad_total += int(flags.sum())
                checked += len(centers)
        scales.append(ScaleRecord(j, len(samples), passed, res_pairs,
                                  float(np.mean(sing)) if sing else 0.0,
                                  bad_total, checked, tuple(certs)).to_dict())
    return {"j_max": j_max, "L0": schedule.L0, "m": m, "g": p.g, "scales": scales}
