"""Eigenstate diagnostics: localization centers, uniform decay, the
center-to-site bijection, spectral simplicity and the dynamical kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeCube, SpectrumReport, spectral_separation
from .logmag import LogMagnitude


def _normalized(psi) -> np.ndarray:
    psi = np.asarray(psi)
    norm = float(np.linalg.norm(psi))
    if norm == 0.0:
        raise ValueError("zero vector has no localization center")
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"state is not normalized (norm {norm:.12g})")
    return psi


def localization_centers(psi, rel_tol: float = 1e-12) -> np.ndarray:
    """Site indices where |psi| attains its maximum, ties within ``rel_tol``."""
    a = np.abs(_normalized(psi))
    top = float(np.max(a))
    return np.flatnonzero(a >= top * (1.0 - rel_tol))


@dataclass(frozen=True)
class LocalizationCheck:
    localized: bool
    center: int | None  # site index
    peak_mass: float
    witness: int | None = None  # violating site index
    reason: str = ""


def is_uniformly_localized(psi, m: float, cube: LatticeCube) -> LocalizationCheck:
    """Peak mass > 1/2 at a center x and |psi(y)| <= exp(-m |y - x|) for y != x."""
    psi = _normalized(psi)
    centers = localization_centers(psi)
    c = int(centers[0])
    peak = float(abs(psi[c]) ** 2)
    if not peak > 0.5:
        return LocalizationCheck(False, c, peak, None, "peak mass not above 1/2")
    # by normalization a peak mass above 1/2 forces a single center
    assert len(centers) == 1
    dist = cube.distance_from(cube.sites()[c])
    a = np.abs(psi)
    excess = a - np.exp(-m * dist)
    excess[c] = -np.inf
    j = int(np.argmax(excess))
    if excess[j] > 0:
        return LocalizationCheck(False, c, peak, j, "decay bound violated")
    return LocalizationCheck(True, c, peak)


def radial_profile(psi, cube: LatticeCube, center: int) -> np.ndarray:
    """max |psi(y)| over |y - x| = r, for r = 0..max distance."""
    dist = cube.distance_from(cube.sites()[center])
    out = np.zeros(int(dist.max()) + 1)
    np.maximum.at(out, dist, np.abs(psi))
    return out


@dataclass(frozen=True)
class DecayFit:
    m_fit: float
    intercept: float  # ln of the fitted prefactor
    residual: float  # rms of the log-linear fit
    radii: int
    ok: bool


def decay_exponent_fit(psi, cube: LatticeCube, center: int, floor: float = 1e-14) -> DecayFit:
    """Least-squares slope of ln max_{|y-x|=r} |psi| against -r, center excluded."""
    prof = radial_profile(psi, cube, center)
    r = np.arange(len(prof))
    use = (r >= 1) & (prof > floor)
    if use.sum() < 3:
        return DecayFit(math.nan, math.nan, math.nan, int(use.sum()), False)
    x, y = r[use].astype(float), np.log(prof[use])
    slope, icpt = np.polyfit(x, y, 1)
    res = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return DecayFit(float(-slope), float(icpt), res, int(use.sum()), True)


def uniform_exponent(psi, cube: LatticeCube, center: int) -> float:
    """Largest m with |psi(y)| <= exp(-m |y - x|) for every y != x."""
    a = np.abs(psi)
    dist = cube.distance_from(cube.sites()[center]).astype(float)
    use = dist > 0
    if not use.any():
        return math.inf
    with np.errstate(divide="ignore"):
        rates = -np.log(a[use]) / dist[use]
    return float(np.min(rates))


@dataclass(frozen=True)
class EigenstateProfile:
    index: int
    eigenvalue: float
    centers: tuple[int, ...]
    peak_mass: float
    localized: bool
    fit: DecayFit
    interior: bool
    m_uniform: float = math.nan

    def to_dict(self) -> dict:
        return {
            "index": self.index, "eigenvalue": self.eigenvalue, "centers": list(self.centers),
            "peak_mass": self.peak_mass, "localized": self.localized, "interior": self.interior,
            "m_fit": self.fit.m_fit, "m_uniform": self.m_uniform,
            "fit_residual": self.fit.residual, "fit_ok": self.fit.ok,
        }


@dataclass(frozen=True)
class BasisReport:
    profiles: tuple[EigenstateProfile, ...]
    center_map: dict  # site index -> state index, uniformly localized states only
    injective: bool
    bijection: bool  # injective and every site of the box is a center
    interior_bijection: bool  # every interior site is the center of exactly one such state
    nonlocalized: tuple[int, ...]
    interior_sites: np.ndarray = field(repr=False)
    min_gap: float = math.nan
    m: float = math.nan

    def interior_states(self) -> list[EigenstateProfile]:
        return [p for p in self.profiles if p.interior]

    @property
    def interior_localized(self) -> bool:
        return all(p.localized for p in self.interior_states())

    @property
    def interior_m_fit(self) -> float:
        """Decay rate shared by all interior states: min of their uniform exponents.

        This is the best constant m for which every interior state obeys
        |psi(y)| <= exp(-m |y - x|); per-state log-linear slopes are kept in
        the profiles.
        """
        rates = [p.m_uniform for p in self.interior_states()]
        return min(rates) if rates else math.nan

    @property
    def interior_m_slope(self) -> float:
        fits = [p.fit.m_fit for p in self.interior_states() if p.fit.ok]
        return min(fits) if fits else math.nan

    def to_dict(self) -> dict:
        return {
            "m": self.m, "injective": self.injective, "bijection": self.bijection,
            "interior_bijection": self.interior_bijection,
            "interior_localized": self.interior_localized, "interior_m_fit": self.interior_m_fit,
            "interior_m_slope": self.interior_m_slope,
            "nonlocalized": list(self.nonlocalized), "min_gap": self.min_gap,
            "states": [p.to_dict() for p in self.profiles],
        }


def interior_mask(cube: LatticeCube, fraction: float = 0.25) -> np.ndarray:
    """Sites farther than ``fraction * L`` from the outside of the cube."""
    to_edge = cube.L - cube.distance_from(cube.center) + 1
    return to_edge > fraction * cube.L


def center_bijection(spec: SpectrumReport, m: float, cube: LatticeCube | None = None,
                     fraction: float = 0.25) -> BasisReport:
    """Match uniformly m-localized eigenstates with their centers."""
    cube = spec.cube if cube is None else cube
    if spec.eigenvectors is None or cube is None:
        raise ValueError("need eigenvectors and the cube")
    inner = interior_mask(cube, fraction)
    profiles, cmap, clash, nonloc = [], {}, False, []
    for i in range(len(spec.eigenvalues)):
        psi = spec.eigenvectors[:, i]
        chk = is_uniformly_localized(psi, m, cube)
        cs = tuple(int(c) for c in localization_centers(psi))
        fit = decay_exponent_fit(psi, cube, cs[0])
        profiles.append(EigenstateProfile(i, float(spec.eigenvalues[i]), cs, chk.peak_mass,
                                          chk.localized, fit, bool(inner[cs[0]]),
                                          uniform_exponent(psi, cube, cs[0])))
        if chk.localized:
            if chk.center in cmap:
                clash = True
            cmap[chk.center] = i
        else:
            nonloc.append(i)
    injective = not clash
    covered = set(cmap)
    n = cube.size
    inner_sites = np.flatnonzero(inner)
    return BasisReport(
        profiles=tuple(profiles), center_map=cmap, injective=injective,
        bijection=injective and len(covered) == n,
        interior_bijection=injective and all(int(x) in covered for x in inner_sites),
        nonlocalized=tuple(nonloc), interior_sites=inner_sites,
        min_gap=spectral_separation(spec) if len(spec.eigenvalues) > 1 else math.nan, m=m,
    )


@dataclass(frozen=True)
class SimplicityReport:
    min_gap: float
    simple: bool  # min gap > 0 in double precision
    log2_width: float | None
    above_width: bool | None  # min gap >= g delta_j
    km_threshold: float | None  # C f(L) L^{d/2}
    above_km: bool | None
    certified: "CertifiedGap | None" = None

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in
               ("min_gap", "simple", "log2_width", "above_width", "km_threshold", "above_km")}
        out["certified"] = None if self.certified is None else self.certified.to_dict()
        return out


def simplicity_report(spec: SpectrumReport, width=None, decay: tuple[float, float] | None = None,
                      L: int | None = None, d: int = 1,
                      certified: "CertifiedGap | None" = None) -> SimplicityReport:
    """Minimal spacing against the resonance width and the Klein-Molchanov scale.

    ``decay`` is ``(C, m)`` for f(r) = C exp(-m r); the threshold is
    C exp(-m L) L^{d/2}.
    """
    gap = spectral_separation(spec)
    log2_w = above_w = km = above_km = None
    if width is not None:
        w = width if isinstance(width, LogMagnitude) else LogMagnitude.from_float(width)
        log2_w = w.log2_abs
        above_w = LogMagnitude.from_float(gap) >= w
    if decay is not None and L is not None:
        C, m = decay
        km = C * math.exp(-m * L) * L ** (d / 2)
        above_km = gap > km
    return SimplicityReport(gap, gap > 0.0, log2_w, above_w, km, above_km, certified)


def dynamical_kernel(spec: SpectrumReport, x: int, y: int, t=None, phi=None):
    """|<1_x| phi(H) |1_y>| by the spectral expansion.

    Give either times ``t`` (phi = exp(-i lambda t); scalar or array) or
    ``phi`` sampled on the eigenvalues with |phi| <= 1.
    """
    vec = spec.eigenvectors
    w = vec[x, :] * vec[y, :]
    if phi is not None:
        phi = np.asarray(phi)
        if np.max(np.abs(phi)) > 1.0 + 1e-12:
            raise ValueError("phi must be bounded by 1")
        return float(abs(np.sum(w * phi)))
    t = np.asarray(0.0 if t is None else t, dtype=float)
    vals = np.abs(np.exp(-1j * np.multiply.outer(t, spec.eigenvalues)) @ w)
    return float(vals) if vals.ndim == 0 else vals


def kernel_matrix(spec: SpectrumReport, t: float) -> np.ndarray:
    """|<1_x| exp(-iHt) |1_y>| for all x, y."""
    vec = spec.eigenvectors
    return np.abs((vec * np.exp(-1j * spec.eigenvalues * t)) @ vec.T)


def kernel_constant(m: float, d: int = 1) -> float:
    """Const with sum_z exp(-m|x-z| - m|z-y|) <= Const |x-y| exp(-m|x-y|) in d = 1, x != y."""
    if d != 1:
        raise NotImplementedError("explicit constant only derived for d = 1")
    return 2.0 + 2.0 / math.expm1(2.0 * m)


@dataclass(frozen=True)
class KernelCheck:
    passed: bool
    m: float
    constant: float
    worst_ratio: float  # max kernel / bound over checked pairs and times
    floor: float


def kernel_decay_check(spec: SpectrumReport, sites: np.ndarray, m: float, times,
                       floor: float = 1e-12) -> KernelCheck:
    """sup_t |<1_x|e^{-iHt}|1_y>| <= Const |x-y| e^{-m|x-y|} + floor for x != y.

    ``floor`` absorbs the absolute rounding error of the spectral sum;
    ``sites`` are the site indices to pair up (d = 1 distances).
    """
    cube = spec.cube
    pos = cube.sites()[sites][:, 0]
    R = np.abs(pos[:, None] - pos[None, :]).astype(float)
    off = R > 0
    const = kernel_constant(m, cube.d)
    bound = const * R * np.exp(-m * R)
    worst = 0.0
    for t in np.asarray(times, dtype=float):
        K = kernel_matrix(spec, t)[np.ix_(sites, sites)]
        ratio = np.max(K[off] / (bound[off] + floor))
        worst = max(worst, float(ratio))
    return KernelCheck(worst <= 1.0, m, const, worst, floor)


# -- certified simplicity for d = 1 ------------------------------------------

@dataclass(frozen=True)
class CertifiedGap:
    """Rigorous lower bound on the spacing of a one-dimensional box spectrum.

    ``gap_lower`` bounds the spacing of the operator whose potential is the
    hull truncated at ``generation``; ``perturbation`` bounds how far each
    eigenvalue of the full-hull operator can sit from the truncated one
    (g times the tail bound, plus rounding of the Sturm recurrence).  The
    full spectrum is certified simple when gap_lower > 2 * perturbation.
    """

    simple: bool
    log2_gap_lower: float
    log2_perturbation: float
    generation: int
    precision: int
    clusters: int  # eigenvalue groups unresolved in double precision
    unresolved: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class _Sturm:
    """Eigenvalue counts for the tridiagonal matrix diag(a) + off-diagonal ones."""

    def __init__(self, diag, ctx):
        import gmpy2

        self.gmpy2 = gmpy2
        self.ctx = ctx
        self.a = diag
        self.tiny = gmpy2.mpfr(2) ** (-(ctx.precision + 20))
        self.calls = 0

    def count(self, E) -> int:
        """Number of eigenvalues strictly below E."""
        self.calls += 1
        with self.gmpy2.context(self.ctx):
            neg = 0
            q = None
            tiny = self.tiny
            for ai in self.a:
                q = ai - E if q is None else ai - E - 1 / q
                if q == 0:
                    q = -tiny
                if q < 0:
                    neg += 1
            return neg


def _exact_potential(points: np.ndarray, theta, N: int, p, ctx):
    """v_N at each point as an mpfr, exact when the precision covers every term."""
    import gmpy2

    from .torus import cell_coordinates, haar_sign

    with gmpy2.context(ctx):
        total = [gmpy2.mpfr(0) for _ in range(len(points))]
        for n in range(N + 1):
            amp = gmpy2.exp2(gmpy2.mpfr(p.log2_amplitude(n)))
            coeff = theta.values(n, cell_coordinates(points, n))
            sign = haar_sign(points, n)
            for i in range(len(points)):
                total[i] += amp * gmpy2.mpfr(float(coeff[i] * sign[i]))
        return total


def certify_simple_spectrum(cube: LatticeCube, omega, theta, alpha, params, g: float,
                            eigenvalues=None, generation: int | None = None,
                            max_generation: int = 16) -> CertifiedGap:
    """Certify simplicity of the d = 1 box spectrum by Sturm bisection.

    The potential is recomputed exactly to ``generation`` (default: start
    at 10 and deepen while the resolved gap is below the truncation error),
    every eigenvalue is enclosed by two Sturm counts, and clusters that are
    indistinguishable in double precision are split by bisection in
    multiprecision.
    """
    import gmpy2

    from .hull import tail_bound
    from .lattice import LocalOperator, eigensystem
    from .torus import shift

    if cube.d != 1:
        raise NotImplementedError("Sturm certification is for d = 1 boxes")
    points = shift(omega, cube.sites(), alpha)
    N = 10 if generation is None else generation
    while True:
        span = -params.log2_amplitude(N)
        prec = int(span + 2 * params.b * N + 160)
        ctx = gmpy2.context(precision=prec)
        v = _exact_potential(points, theta, N, params, ctx)
        with gmpy2.context(ctx):
            gm = gmpy2.mpfr(g)
            diag = [gm * vi for vi in v]
        if eigenvalues is None:
            lam = eigensystem(LocalOperator.from_potential(cube, [float(x) for x in v], g),
                              vectors=False).eigenvalues
        else:
            lam = np.sort(np.asarray(eigenvalues, dtype=float))
        gap_lower, clusters, unresolved = _certify(diag, lam, ctx)
        scale = float(max(abs(lam[0]), abs(lam[-1]))) + 2.0
        log2_round = -prec + math.log2(8.0 * scale)
        log2_tail = math.log2(g) + tail_bound(N, params).log2_abs if g > 0 else -math.inf
        log2_pert = max(log2_round, log2_tail) + 1.0
        if gap_lower > 0:
            log2_gap = float(gmpy2.log2(gap_lower))
        else:
            log2_gap = -math.inf
        simple = unresolved == 0 and log2_gap > log2_pert + 1.0
        if simple or generation is not None or N >= max_generation or unresolved:
            return CertifiedGap(simple, log2_gap, log2_pert, N, prec, clusters, unresolved)
        N += 2


def _certify(diag, lam: np.ndarray, ctx):
    """Enclose every eigenvalue; return (gap lower bound, clusters, unresolved)."""
    import gmpy2

    n = len(diag)
    st = _Sturm(diag, ctx)
    with gmpy2.context(ctx):
        mp = gmpy2.mpfr
        scale = max(1.0, float(np.max(np.abs(lam))))
        sep_tol = 1e-6 * scale
        res = mp(2) ** (-(ctx.precision - 40)) * scale
        # split the double spectrum into groups separated by > sep_tol
        groups = [[0]]
        for k in range(1, n):
            if lam[k] - lam[k - 1] > sep_tol:
                groups.append([k])
            else:
                groups[-1].append(k)
        enclosures = [None] * n
        clusters = sum(len(gr) > 1 for gr in groups)
        unresolved = 0
        for gr in groups:
            k0, k1 = gr[0], gr[-1]
            r = mp(sep_tol) / 4
            lo, hi = mp(float(lam[k0])) - r, mp(float(lam[k1])) + r
            c_lo, c_hi = st.count(lo), st.count(hi)
            if c_lo != k0 or c_hi != k1 + 1:
                # double eigenvalues misplaced beyond sep_tol/4: fall back to a wider bracket
                lo, hi = mp(float(lam[k0])) - 2 * r, mp(float(lam[k1])) + 2 * r
                c_lo, c_hi = st.count(lo), st.count(hi)
                if c_lo != k0 or c_hi != k1 + 1:
                    unresolved += len(gr)
                    continue
            stack = [(lo, c_lo, hi, c_hi)]
            while stack:
                a, ca, b, cb = stack.pop()
                if cb - ca == 0:
                    continue
                if cb - ca == 1 and (enclosures[ca] is None):
                    enclosures[ca] = (a, b)
                    continue
                if b - a < res:
                    unresolved += cb - ca
                    continue
                mid = (a + b) / 2
                cm = st.count(mid)
                stack.append((a, ca, mid, cm))
                stack.append((mid, cm, b, cb))
        # shrink enclosures of clustered eigenvalues until they separate clearly
        for gr in groups:
            if len(gr) < 2:
                continue
            for _ in range(8):
                widths = [enclosures[k][1] - enclosures[k][0] for k in gr if enclosures[k] is not None]
                gaps = [enclosures[k + 1][0] - enclosures[k][1] for k in gr[:-1]
                        if enclosures[k] is not None and enclosures[k + 1] is not None]
                if not gaps or min(gaps) > max(widths):
                    break
                for k in gr:
                    if enclosures[k] is None:
                        continue
                    a, b = enclosures[k]
                    mid = (a + b) / 2
                    enclosures[k] = (a, mid) if st.count(mid) == k + 1 else (mid, b)
        if unresolved or any(e is None for e in enclosures):
            return mp(0), clusters, max(unresolved, sum(e is None for e in enclosures))
        gap = min(enclosures[k + 1][0] - enclosures[k][1] for k in range(n - 1))
        return gap, clusters, 0


def _pivots(diag, mu):
    """LDL^T pivots of diag(a) - mu + off-diagonal ones, None on a zero pivot."""
    q = []
    prev = None
    for ai in diag:
        qi = ai - mu if prev is None else ai - mu - 1 / prev
        if qi == 0:
            return None
        q.append(qi)
        prev = qi
    return q


def _rayleigh_iteration(diag, x, ctx, sweeps: int, stop):
    """Rayleigh quotient iteration for diag(a) + off-diagonal ones.

    Returns (mu, x, residual) with x normalized and residual the 2-norm of
    (T - mu) x.  Solves use the LDL^T factorization whose pivots are the
    Sturm sequence.
    """
    import gmpy2

    n = len(diag)
    nudge = gmpy2.mpfr(2) ** (-(ctx.precision // 2))

    def apply(x):
        tx = [diag[i] * x[i] for i in range(n)]
        for i in range(n - 1):
            tx[i] += x[i + 1]
            tx[i + 1] += x[i]
        return tx

    with gmpy2.context(ctx):
        norm = gmpy2.sqrt(sum(v * v for v in x))
        x = [v / norm for v in x]
        tx = apply(x)
        mu = sum(x[i] * tx[i] for i in range(n))
        res = gmpy2.sqrt(sum((tx[i] - mu * x[i]) ** 2 for i in range(n)))
        for _ in range(sweeps):
            if res <= stop:
                break
            q = _pivots(diag, mu)
            if q is None:
                # an exact zero pivot; nudge the shift instead of the pivot
                q = _pivots(diag, mu + nudge * (1 + abs(mu)))
            y = list(x)
            for i in range(1, n):
                y[i] = y[i] - y[i - 1] / q[i - 1]
            z = [y[i] / q[i] for i in range(n)]
            x = list(z)
            for i in range(n - 2, -1, -1):
                x[i] = z[i] - x[i + 1] / q[i]
            norm = gmpy2.sqrt(sum(v * v for v in x))
            x = [v / norm for v in x]
            tx = apply(x)
            mu = sum(x[i] * tx[i] for i in range(n))
            res = gmpy2.sqrt(sum((tx[i] - mu * x[i]) ** 2 for i in range(n)))
        return mu, x, res


@dataclass(frozen=True)
class ResolvedSpectrum:
    """Eigensystem of a d = 1 box resolved beyond double precision.

    Each eigenpair is polished by Rayleigh quotient iteration on the exact
    truncated potential.  The intervals mu_k +- residual_k each hold an
    eigenvalue; when they are pairwise disjoint they hold exactly one each,
    which certifies simplicity and bounds every eigenvector's error by
    residual / gap.
    """

    report: SpectrumReport
    certificate: CertifiedGap
    refined_states: tuple[int, ...]  # states seeded from a site rather than LAPACK
    log2_vector_error: float


def resolve_spectrum(cube: LatticeCube, omega, theta, alpha, params, g: float,
                     report: SpectrumReport | None = None, m: float = 3.0,
                     generation: int = 10, sweeps: int = 10) -> ResolvedSpectrum:
    """Eigenpairs of a d = 1 box with near-degenerate clusters resolved.

    Eigenvalues closer than double precision can separate are degenerate
    for LAPACK, which then returns an arbitrary basis of the cluster.  For
    such a cluster the sites carrying its weight seed Rayleigh iterations
    at a precision fine enough to resolve decay at rate ``m`` across the box.
    """
    import gmpy2

    from .hull import tail_bound
    from .lattice import assemble, eigensystem
    from .torus import shift

    if cube.d != 1:
        raise NotImplementedError("resolution is implemented for d = 1 boxes")
    if report is None:
        report = eigensystem(assemble(cube, omega, theta, alpha, params, g))
    lam, vec = report.eigenvalues, report.eigenvectors
    n = len(lam)
    scale = float(np.max(np.abs(lam))) + 2.0
    N = generation
    span = -params.log2_amplitude(N)
    prec = int(span + 2 * params.b * N + 160 + m * cube.side * math.log2(math.e))
    ctx = gmpy2.context(precision=prec)
    points = shift(omega, cube.sites(), alpha)
    v = _exact_potential(points, theta, N, params, ctx)

    # runs of eigenvalues LAPACK cannot separate; its vectors are accurate to eps |H| / gap
    close = np.zeros(n, dtype=bool)
    near = np.diff(lam) <= 1e-8 * scale
    close[:-1] |= near
    close[1:] |= near
    seeds: list[tuple[int, int | None]] = []  # (state, seed site)
    k = 0
    while k < n:
        if not close[k]:
            seeds.append((k, None))
            k += 1
            continue
        k1 = k
        while k1 + 1 < n and close[k1 + 1] and lam[k1 + 1] - lam[k1] <= 1e-8 * scale:
            k1 += 1
        weight = np.sum(vec[:, k:k1 + 1] ** 2, axis=1)
        sites = np.sort(np.argsort(-weight, kind="stable")[:k1 - k + 1])
        seeds.extend(zip(range(k, k1 + 1), (int(x) for x in sites)))
        k = k1 + 1

    with gmpy2.context(ctx):
        mp = gmpy2.mpfr
        diag = [mp(g) * vi for vi in v]
        stop = mp(2) ** (-(prec - 40)) * scale
        pairs = []
        for state, site in seeds:
            if site is None:
                x0 = [mp(float(t)) for t in vec[:, state]]
            else:
                x0 = [mp(0)] * n
                x0[site] = mp(1)
            pairs.append(_rayleigh_iteration(diag, x0, ctx, sweeps, stop))
        pairs.sort(key=lambda t: t[0])
        slack = mp(2) ** (-(prec - 40)) * scale  # rounding in mu and the residual
        lo = [mu - r - slack for mu, _, r in pairs]
        hi = [mu + r + slack for mu, _, r in pairs]
        gaps = [lo[i + 1] - hi[i] for i in range(n - 1)]
        overlaps = sum(gp <= 0 for gp in gaps)
        gap_lower = min(gaps) if gaps else mp("inf")
        log2_gap = float(gmpy2.log2(gap_lower)) if gap_lower > 0 else -math.inf
        # Davis-Kahan: sin angle <= residual / distance to the rest of the spectrum
        err = -math.inf
        if overlaps == 0:
            for i, (_, _, r) in enumerate(pairs):
                dist = min(gaps[i - 1] if i > 0 else mp("inf"), gaps[i] if i < n - 1 else mp("inf"))
                if r > 0:
                    err = max(err, float(gmpy2.log2((r + slack) / dist)))
        out_vec = np.empty_like(vec)
        out_val = np.empty(n)
        for i, (mu, x, _) in enumerate(pairs):
            out_vec[:, i] = [float(t) for t in x]
            out_val[i] = float(mu)
    out_vec /= np.linalg.norm(out_vec, axis=0)
    log2_round = -prec + math.log2(8.0 * scale)
    log2_tail = math.log2(g) + tail_bound(N, params).log2_abs if g > 0 else -math.inf
    log2_pert = max(log2_round, log2_tail) + 1.0
    simple = overlaps == 0 and log2_gap > log2_pert + 1.0
    cert = CertifiedGap(simple, log2_gap, log2_pert, N, prec, int(close.sum()), overlaps)
    refined = tuple(st for st, site in seeds if site is not None)
    return ResolvedSpectrum(SpectrumReport(out_val, out_vec, report.residuals, cube), cert, refined, err)
