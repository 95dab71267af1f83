"""Length scales, generation counts, widths and the parameter table."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

from .hull import HullParams
from .logmag import LogMagnitude

_LN2 = math.log(2.0)
_INT_LIMIT = 2**63


class RegimeUnreachable(ValueError):
    """No admissible initial scale L0 >= 2 exists for the given coupling."""


class BracketingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ModelParams:
    d: int = 1
    nu: int = 1
    A: int = 1
    C_A: int = 1
    A_prime: int = 0
    C_A_prime: int = 1
    b: float = 2.0
    g: float = 1.0
    m: float = 1.0
    c_a: int = 2

    @property
    def B(self) -> float:
        return 800.0 * self.b * self.A**2 / _LN2

    @property
    def c1(self) -> float:
        return 1.0 / (58.0 * self.A * math.sqrt(self.b))

    @property
    def c2_min(self) -> float:
        return 68.0 * self.A * self.b

    @property
    def b_floor(self) -> float:
        return max((8 * self.d + 4 * self.A + 4 * self.A_prime) / (10 * self.A), 2.0)

    @property
    def b_star(self) -> float:
        nu = self.nu
        return (8 * self.d + 4 * nu * self.A + 4 * nu * self.A_prime) / (10 * self.A)

    def hull_params(self) -> HullParams:
        return HullParams(b=self.b, c_a=self.c_a, nu=self.nu)

    def to_dict(self) -> dict:
        return asdict(self)


def length_scale(j: int, L0: int) -> int:
    """L_j = L0**(2**j), with L_{-1} = 0."""
    if L0 < 2:
        raise ValueError("L0 must be >= 2")
    if j < -1:
        raise ValueError("scale index must be >= -1")
    if j == -1:
        return 0
    if (2**j) * math.log2(L0) >= 63:
        raise OverflowError(f"L_{j} = {L0}**{2**j} exceeds 2**63")
    return L0 ** (2**j)


def _n_tilde_from_ln(lnL: float, A: float, C_A: float) -> int:
    return 1 + math.floor((4 * A * lnL - math.log(C_A / 2.0)) / _LN2)


def bracketing_holds(L: float, A: float, C_A: float) -> bool:
    return A * math.log(L) > abs(math.log(C_A)) + 2 * _LN2


def n_tilde(L: float, A: float, C_A: float, warn: bool = True) -> int:
    """Generation whose cells separate the orbit segment of length L."""
    if L < 2:
        raise ValueError("L must be >= 2")
    if warn and not bracketing_holds(L, A, C_A):
        warnings.warn(f"A ln L <= |ln C_A| + 2 ln 2 at L={L}: bracketing not guaranteed",
                      BracketingWarning, stacklevel=2)
    return _n_tilde_from_ln(math.log(L), A, C_A)


def N_tilde(L: float, A: float, C_A: float, warn: bool = True) -> int:
    """n_tilde(L**4), computed from 4 ln L so that large L cannot overflow."""
    if L < 2:
        raise ValueError("L must be >= 2")
    if warn and not (A * 4 * math.log(L) > abs(math.log(C_A)) + 2 * _LN2):
        warnings.warn(f"bracketing precondition fails at L**4, L={L}",
                      BracketingWarning, stacklevel=2)
    return _n_tilde_from_ln(4 * math.log(L), A, C_A)


def gamma(m: float, L: float) -> float:
    if L < 0:
        raise ValueError("L must be >= 0")
    if L == 0:
        return 2.0 * m
    return m * (1.0 + L ** (-0.125)) * L


def _log2_delta(Nt: int, b: float, c_a: int) -> tuple[float, float]:
    log2_beta = -2.0 * b * Nt
    return log2_beta, log2_beta - c_a * b * Nt * Nt


@dataclass(frozen=True)
class ScaleSchedule:
    L0: int
    params: ModelParams

    def __post_init__(self):
        if self.L0 < 2:
            raise ValueError("L0 must be >= 2")

    def L(self, j: int) -> int:
        return length_scale(j, self.L0)

    def N(self, j: int) -> int:
        """Generation count for scale j; j = -1 reuses L0."""
        Lj = self.L0 if j == -1 else self.L(j)
        return N_tilde(Lj, self.params.A, self.params.C_A, warn=False)

    def beta(self, j: int) -> LogMagnitude:
        return delta_beta(j, self, self.params)[1]

    def delta(self, j: int) -> LogMagnitude:
        return delta_beta(j, self, self.params)[0]

    def width(self, j: int, g: float | None = None) -> LogMagnitude:
        """g * delta_j in log domain."""
        g = self.params.g if g is None else g
        return LogMagnitude.from_float(g) * self.delta(j)


def delta_beta(j: int, schedule: ScaleSchedule, params: ModelParams | None = None
               ) -> tuple[LogMagnitude, LogMagnitude]:
    """(delta_j, beta_j) with beta_j = 2**(-2b N_j), delta_j = beta_j * a_{N_j}."""
    params = schedule.params if params is None else params
    Nt = schedule.N(max(j, 0))
    lb, ld = _log2_delta(Nt, params.b, params.c_a)
    return LogMagnitude.pow2(ld), LogMagnitude.pow2(lb)


@dataclass(frozen=True)
class InitialScale:
    L0: int
    closed_form: int  # floor(exp(c1 sqrt(ln g))), a lower-bound estimate
    log2_margin: float  # log2(g delta_0 / (4d e^{4m})) at the chosen L0


def _admissible(L0: int, log2_g: float, m: float, params: ModelParams) -> float:
    Nt = N_tilde(L0, params.A, params.C_A, warn=False)
    _, ld = _log2_delta(Nt, params.b, params.c_a)
    return log2_g + ld - math.log2(4 * params.d) - 4 * m / _LN2


def L0_of_g(g: float | LogMagnitude, m: float, params: ModelParams) -> InitialScale:
    """Largest L0 with g delta_0(L0) >= 4d e^{4m}, by exact integer search.

    ``g`` may be a LogMagnitude: admissible couplings are usually far
    beyond double range.
    """
    g = g if isinstance(g, LogMagnitude) else LogMagnitude.from_float(g)
    if g.sign <= 0:
        raise ValueError("g must be positive")
    log2_g = g.log2_abs
    closed = math.floor(math.exp(params.c1 * math.sqrt(g.ln_abs))) if log2_g > 0 else 0
    if _admissible(2, log2_g, m, params) < 0:
        raise RegimeUnreachable(f"no L0 >= 2 satisfies the coupling condition at g={g!r}")
    lo, hi = 2, 4
    while _admissible(hi, log2_g, m, params) >= 0:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _admissible(mid, log2_g, m, params) >= 0:
            lo = mid
        else:
            hi = mid
    return InitialScale(lo, closed, _admissible(lo, log2_g, m, params))


def m_of_g(g: float, delta0: LogMagnitude | float, d: int) -> float:
    """Mass (1/4) ln(g delta_0 / (4d)), computed in log domain."""
    if g <= 0:
        raise ValueError("g must be positive")
    if not isinstance(delta0, LogMagnitude):
        delta0 = LogMagnitude.from_float(delta0)
    if delta0.sign <= 0:
        raise ValueError("delta_0 must be positive")
    ln_arg = math.log(g) + delta0.ln_abs - math.log(4 * d)
    if ln_arg <= 0:
        raise ValueError("g delta_0 must exceed 4d")
    return 0.25 * ln_arg


@dataclass(frozen=True)
class CoverRadii:
    R: LogMagnitude
    r: LogMagnitude
    count: int  # number of r-balls in the redundant cover of the torus

    @property
    def log2_count(self) -> float:
        return math.log2(self.count)


def cover_radii(j: int, params: ModelParams, L0: int) -> CoverRadii:
    Lj = L0 if j == -1 else length_scale(j, L0)
    A, Ap = params.A, params.A_prime
    R = LogMagnitude.from_float(1.0 / (6.0 * params.C_A)) * LogMagnitude.pow2(-4 * A * math.log2(Lj))
    r = R / (LogMagnitude.from_float(params.C_A_prime) * LogMagnitude.pow2(4 * Ap * math.log2(Lj)))
    count = (12 * params.C_A * params.C_A_prime) ** params.nu * Lj ** (4 * params.nu * (A + Ap))
    return CoverRadii(R, r, count)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": [asdict(c) for c in self.checks]}


def min_L0(A: float, C_A: float) -> int:
    """Smallest integer L0 with A ln L0 > |ln C_A| + 2 ln 2."""
    L = 2
    while not bracketing_holds(L, A, C_A):
        L += 1
    return L


def validate_params(params: ModelParams, schedule: ScaleSchedule | None = None) -> ValidationReport:
    """Report-only check of every parameter constraint; nothing is adjusted."""
    p = params
    checks = [
        Check("decay_exponent_floor", p.b >= p.b_floor,
              f"b >= max((8d+4A+4A')/(10A), 2) = {p.b_floor:g}; b = {p.b:g}"),
        Check("decay_exponent_measure", p.b > p.b_star,
              f"b > (8d+4nuA+4nuA')/(10A) = {p.b_star:g}; b = {p.b:g}"),
    ]
    minami = 4 * p.A**2 * p.b - 2 * (p.B + 4 * p.A + 4 * p.A_prime)
    checks.append(Check("minami_exponent", minami > 1,
                        f"4A^2 b - 2(B + 4A + 4A') = {minami:.6g} must exceed 1 (B = {p.B:.6g})"))
    checks.append(Check("coupling_nonnegative", p.g >= 0, f"g = {p.g:g}"))
    checks.append(Check("mass_at_least_one", p.m >= 1, f"m = {p.m:g}"))
    if schedule is not None:
        lhs = p.A * math.log(schedule.L0)
        rhs = abs(math.log(p.C_A)) + 2 * _LN2
        checks.append(Check("initial_scale_bracketing", lhs > rhs,
                            f"A ln L0 = {lhs:.6g} > |ln C_A| + 2 ln 2 = {rhs:.6g}; "
                            f"smallest admissible L0 = {min_L0(p.A, p.C_A)}"))
    return ValidationReport(tuple(checks))


def schedule_table(schedule: ScaleSchedule, j_max: int, m: float | None = None) -> list[dict]:
    """One row per scale j = -1..j_max; rows stop early if L_j overflows."""
    p = schedule.params
    m = p.m if m is None else m
    rows = []
    for j in range(-1, j_max + 1):
        try:
            Lj = schedule.L(j)
        except OverflowError:
            break
        delta, beta = delta_beta(j, schedule, p)
        cov = cover_radii(j, p, schedule.L0)
        rows.append({
            "j": j,
            "L": Lj,
            "N_tilde": schedule.N(j),
            "log2_beta": beta.log2_abs,
            "log2_delta": delta.log2_abs,
            "gamma": gamma(m, Lj),
            "log2_R": cov.R.log2_abs,
            "log2_r": cov.r.log2_abs,
            "log2_cover_count": cov.log2_count,
        })
    return rows
