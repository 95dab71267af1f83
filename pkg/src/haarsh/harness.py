"""Monte Carlo experiments over theta ensembles, configs and on-disk bundles.

Every trial draws its randomness from ``SeedSequence([master, trial])`` so a
trial can be re-run alone and reproduce exactly.  Outputs are written once,
atomically, and are byte-identical for identical configs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.stats import binomtest

from .eigenstates import (
    center_bijection, kernel_decay_check, resolve_spectrum,
)
from .hull import HullParams
from .lattice import LatticeCube, assemble, eigensystem, min_pair_spectra_distance
from .logmag import LogMagnitude
from .schedule import (
    ModelParams, ScaleSchedule, N_tilde, delta_beta, schedule_table, validate_params,
)
from .theta import ThetaField
from .torus import frequency_matrix, golden_mean, shift

SCHEMA_VERSION = 1
SEED_ENV = "HAARSH_SEED"
ENDPOINT_SLACK = 1e-12


# -- seeding -----------------------------------------------------------------

def trial_seed(master: int, trial: int) -> int:
    """64-bit theta seed of a trial; a pure function of (master, trial)."""
    state = np.random.SeedSequence([int(master), int(trial)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def trial_rng(master: int, trial: int, stream: int = 1) -> np.random.Generator:
    """Generator for everything in a trial that is not theta (omega draws, synthetic V)."""
    return np.random.default_rng(np.random.SeedSequence([int(master), int(trial), int(stream)]))


def _map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    if threads <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- ledgers -----------------------------------------------------------------

@dataclass(frozen=True)
class TrialRow:
    trial: int
    seed: int
    statistic: float
    bound_log2: float
    flag: bool
    omega: tuple[float, ...] = ()


def binomial_se(p: float, n: int) -> float:
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / n) if n else math.nan


@dataclass(frozen=True)
class TrialLedger:
    """Per-trial rows plus the flagged frequency and its 95% Wilson interval."""

    name: str
    rows: tuple[TrialRow, ...]
    bound_log2: float = math.nan  # reference bound on the frequency, when one applies
    meta: Mapping[str, Any] = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return len(self.rows)

    @property
    def hits(self) -> int:
        return sum(r.flag for r in self.rows)

    @property
    def frequency(self) -> float:
        return self.hits / self.trials if self.rows else math.nan

    @property
    def ci95(self) -> tuple[float, float]:
        if not self.rows:
            return (math.nan, math.nan)
        ci = binomtest(self.hits, self.trials).proportion_ci(0.95, method="wilson")
        return (float(ci.low), float(ci.high))

    @property
    def bound(self) -> float:
        return 2.0**self.bound_log2 if self.bound_log2 < 1024 else math.inf

    def within_bound(self, n_se: float = 3.0) -> bool:
        """frequency <= bound + n_se binomial standard errors taken at the bound."""
        b = min(self.bound, 1.0)
        return self.frequency <= b + n_se * binomial_se(b, self.trials)

    def summary(self) -> dict:
        lo, hi = self.ci95
        return {
            "name": self.name, "trials": self.trials, "hits": self.hits,
            "frequency": self.frequency, "ci95": [lo, hi],
            "bound_log2": self.bound_log2, "meta": dict(self.meta),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "seed", "omega", "statistic", "bound_log2", "flag"])
        for r in self.rows:
            w.writerow([r.trial, r.seed, " ".join(repr(float(o)) for o in r.omega),
                        repr(float(r.statistic)), repr(float(r.bound_log2)), int(r.flag)])
        return buf.getvalue()


# -- Wegner / Minami -----------------------------------------------------------

def minami_log2_bound(rho_log2: float, width: float, J: int) -> float:
    """log2 of (pi ||rho||)^J / J! * |I|^J."""
    if J < 1 or width <= 0:
        raise ValueError("need J >= 1 and |I| > 0")
    return J * (math.log2(math.pi) + rho_log2 + math.log2(width)) - math.lgamma(J + 1) / math.log(2)


def count_in_interval(eigenvalues: np.ndarray, lo: float, hi: float,
                      slack: float = ENDPOINT_SLACK) -> np.ndarray:
    """Eigenvalue counts in the closed interval [lo - slack, hi + slack], per row."""
    lam = np.atleast_2d(eigenvalues)
    return np.sum((lam >= lo - slack) & (lam <= hi + slack), axis=-1)


def synthetic_spectra(sites: int, n_samples: int, master: int, g: float = 1.0) -> np.ndarray:
    """Spectra of adjacency + g*diag(V), V IID Unif[0,1), on a segment of ``sites`` sites."""
    A = np.diag(np.ones(sites - 1), 1)
    A = A + A.T
    V = np.stack([trial_rng(master, i).random(sites) for i in range(n_samples)])
    H = A[None, :, :] + g * V[:, :, None] * np.eye(sites)[None]
    return np.linalg.eigvalsh(H)


def haarsh_spectra(L: int, n_samples: int, master: int, params: ModelParams,
                   alpha, omega=None) -> tuple[np.ndarray, list[tuple[float, ...]]]:
    """Spectra of H_{B_L(0)}(omega; theta) over theta samples; omega fixed or per trial."""
    cube = LatticeCube.at(L, d=params.d)
    hp = params.hull_params()
    out, omegas = [], []
    for i in range(n_samples):
        om = trial_rng(master, i).random(params.nu) if omega is None else np.atleast_1d(omega)
        op = assemble(cube, om, ThetaField(trial_seed(master, i)), alpha, hp, params.g)
        out.append(eigensystem(op, vectors=False).eigenvalues)
        omegas.append(tuple(float(x) for x in om))
    return np.stack(out), omegas


def wegner_minami_trial(L: int, interval: tuple[float, float], J: int, n_samples: int,
                        master: int = 0, model: str = "synthetic", g: float = 1.0,
                        params: ModelParams | None = None, alpha=None, omega=None,
                        spectra: np.ndarray | None = None) -> TrialLedger:
    """Frequency of Tr 1_I(H) >= J over theta samples, against (pi rho)^J/J! |I|^J.

    ``model="synthetic"`` is the IID-uniform segment of L sites with
    density 1/g; ``model="haarsh"`` uses the box B_L(0) with the conditional
    density bound 1/(g a_N) at N = N_tilde(L).  Pass precomputed
    ``spectra`` to share eigensolves across (I, J) cells.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise ValueError("interval must have positive length")
    omegas: list[tuple[float, ...]] = [()] * n_samples
    if model == "synthetic":
        rho_log2 = -math.log2(g)
        if spectra is None:
            spectra = synthetic_spectra(L, n_samples, master, g)
    elif model == "haarsh":
        params = ModelParams() if params is None else params
        alpha = golden_mean() if alpha is None else alpha
        Nt = N_tilde(L, params.A, params.C_A, warn=False)
        rho_log2 = -math.log2(params.g) - params.hull_params().log2_amplitude(Nt)
        if spectra is None:
            spectra, omegas = haarsh_spectra(L, n_samples, master, params, alpha, omega)
    else:
        raise ValueError(f"unknown model {model!r}")
    bound = minami_log2_bound(rho_log2, hi - lo, J)
    counts = count_in_interval(spectra, lo, hi)
    rows = tuple(
        TrialRow(i, trial_seed(master, i), float(counts[i]), bound, bool(counts[i] >= J), omegas[i])
        for i in range(len(counts))
    )
    meta = {"model": model, "L": L, "J": J, "interval": [lo, hi], "rho_log2": rho_log2,
            "endpoint_slack": ENDPOINT_SLACK, "master": master}
    return TrialLedger(f"minami_J{J}_w{hi - lo:g}", rows, bound, meta)


def scaling_exponent(widths: Sequence[float], frequencies: Sequence[float]) -> float:
    """Slope of log frequency against log |I| (least squares)."""
    w, f = np.log(np.asarray(widths, float)), np.asarray(frequencies, float)
    if np.any(f <= 0):
        raise ValueError("all frequencies must be positive to fit a power law")
    return float(np.polyfit(w, np.log(f), 1)[0])


# -- separation of the potential ------------------------------------------------

def exact_separation_log2(sites: np.ndarray, omega, theta: ThetaField, alpha,
                          params: HullParams, N: int, g: float = 1.0) -> float:
    """log2 of g * min_{x != y} |v_N(T^x w) - v_N(T^y w)|, computed in multiprecision.

    Double precision keeps only a few generations of the hull, so boxes of
    more than a few dozen sites show exact ties; the truncated hull is
    evaluated exactly instead.
    """
    import gmpy2

    from .eigenstates import _exact_potential

    if g == 0:
        return -math.inf
    prec = int(-params.log2_amplitude(N) + 64)
    ctx = gmpy2.context(precision=prec)
    pts = shift(omega, sites, alpha)
    v = _exact_potential(pts, theta, N, params, ctx)
    with gmpy2.context(ctx):
        v = sorted(v)
        gap = min(v[i + 1] - v[i] for i in range(len(v) - 1))
        if gap == 0:
            return -math.inf
        return float(gmpy2.log2(gap)) + math.log2(g)


def separation_probability_trial(L0: int, g: float, n_samples: int, width_log2: float,
                                 master: int = 0, params: ModelParams | None = None,
                                 alpha=None, box_L: int | None = None) -> TrialLedger:
    """Frequency of Sep(gV, B_{L0^4}(0)) < width over (omega, theta) samples.

    The statistic is log2 Sep of the hull truncated at N_tilde(L0); the
    reported bound is the shape L0^{8d} beta_0 with its unknown constant
    left out.
    """
    params = ModelParams() if params is None else params
    alpha = golden_mean() if alpha is None else alpha
    R = L0**4 if box_L is None else box_L
    sites = LatticeCube.at(R, d=params.d).sites()
    sched = ScaleSchedule(max(L0, 2), params)
    N = sched.N(-1)
    shape = 8 * params.d * math.log2(L0) + delta_beta(0, sched, params)[1].log2_abs
    hp = params.hull_params()
    rows = []
    for i in range(n_samples):
        om = trial_rng(master, i).random(params.nu)
        th = ThetaField(trial_seed(master, i))
        s = exact_separation_log2(sites, om, th, alpha, hp, N, g)
        rows.append(TrialRow(i, th.master_seed, s, shape, bool(s < width_log2),
                             tuple(float(x) for x in om)))
    meta = {"L0": L0, "box_L": R, "g": g, "width_log2": width_log2, "generation": N,
            "bound": "shape only: C * L0^(8d) * beta_0, C unknown", "master": master}
    return TrialLedger(f"separation_L0{L0}", tuple(rows), shape, meta)


def flag_frequencies(ledger: TrialLedger, width_log2: Sequence[float]) -> list[float]:
    """Re-threshold a ledger's log2 statistics at several widths."""
    s = np.array([r.statistic for r in ledger.rows])
    return [float(np.mean(s < w)) for w in width_log2]


# -- spectral spacing ------------------------------------------------------------

def box_gap_log2(cube: LatticeCube, omega, theta: ThetaField, alpha, params: ModelParams,
                 g: float) -> tuple[float, float]:
    """(log2 certified lower bound on the min gap, double-precision min gap).

    In d = 1 the gap is bounded rigorously through multiprecision eigenpair
    enclosures; otherwise the double-precision gap is used for both.
    """
    op = assemble(cube, omega, theta, alpha, params.hull_params(), g)
    rep = eigensystem(op)
    dgap = float(np.min(np.diff(rep.eigenvalues))) if cube.size > 1 else math.inf
    if cube.d != 1 or cube.size < 2:
        return (math.log2(dgap) if dgap > 0 else -math.inf), dgap
    res = resolve_spectrum(cube, omega, theta, alpha, params.hull_params(), g, report=rep, m=0.0)
    return res.certificate.log2_gap_lower, dgap


def spacing_probability_trial(j: int, g: float, n_samples: int, omega_samples: int,
                              width_log2: float, master: int = 0,
                              params: ModelParams | None = None, alpha=None, L0: int = 3,
                              L: int | None = None) -> TrialLedger:
    """Per theta: min over sampled omega of the box's min gap, flagged below the width.

    A theta whose flag is down is counted as a member of the spacing set at
    this scale; ``meta["membership_frequency"]`` is their share.
    """
    params = ModelParams() if params is None else params
    alpha = golden_mean() if alpha is None else alpha
    Lj = ScaleSchedule(L0, params).L(j) if L is None else L
    cube = LatticeCube.at(Lj, d=params.d)
    rows = []
    for i in range(n_samples):
        th = ThetaField(trial_seed(master, i))
        rng = trial_rng(master, i)
        best = math.inf
        for _ in range(omega_samples):
            om = rng.random(params.nu)
            best = min(best, box_gap_log2(cube, om, th, alpha, params, g)[0])
        rows.append(TrialRow(i, th.master_seed, best, width_log2, bool(best < width_log2)))
    led = TrialLedger(f"spacing_j{j}", tuple(rows), math.nan,
                      {"j": j, "L": Lj, "g": g, "width_log2": width_log2,
                       "omega_samples": omega_samples, "master": master})
    meta = dict(led.meta, membership_frequency=1.0 - led.frequency)
    return TrialLedger(led.name, led.rows, led.bound_log2, meta)


# -- theta goodness ----------------------------------------------------------------

@dataclass(frozen=True)
class GoodnessRecord:
    j: int
    L: int
    min_distance: float
    width: float
    log2_width: float
    member: bool
    witness: tuple
    omega: tuple[float, ...]


def theta_goodness_profile(theta_seed: int, j_max: int, omega_samples: int, g: float,
                           params: ModelParams | None = None, alpha=None, L0: int = 3,
                           widths: Mapping[int, float] | None = None, master: int = 0,
                           super_L: Mapping[int, int] | None = None,
                           pair_budget: int | None = 200_000) -> dict:
    """Per scale: min over sampled omega of D(L_j) against 4 g delta_j (or an override).

    D(L_j) is the least spectra distance between disjoint radius-L_j cubes
    inside B_{L_j^4}(0) (``super_L`` may shrink the super-cube).  The
    Theta_infinity proxy is the conjunction over scales.
    """
    params = ModelParams() if params is None else params
    alpha = golden_mean() if alpha is None else alpha
    sched = ScaleSchedule(L0, params)
    th = ThetaField(theta_seed)
    rng = np.random.default_rng(np.random.SeedSequence([int(master), int(theta_seed) & 0xFFFFFFFF]))
    omegas = [rng.random(params.nu) for _ in range(omega_samples)]
    records = []
    for j in range(j_max + 1):
        Lj = sched.L(j)
        R = Lj**4 if super_L is None or j not in super_L else super_L[j]
        if widths is not None and j in widths:
            lw = LogMagnitude.from_float(float(widths[j]))
        else:
            lw = LogMagnitude.from_float(4 * g) * sched.delta(j)
        w, log2_w = float(lw), lw.log2_abs
        best, wit, best_om = math.inf, (), ()
        for om in omegas:
            pd = min_pair_spectra_distance(Lj, LatticeCube.at(R, d=params.d), om, th, alpha,
                                           params.hull_params(), g, pair_budget=pair_budget)
            if pd.value < best:
                best, best_om = pd.value, tuple(float(x) for x in om)
                wit = tuple(tuple(int(c) for c in p) for p in pd.pair)
        # a double-precision tie (D = 0) cannot certify any positive width
        member = best > 0 and (math.log2(best) >= log2_w if math.isfinite(best) else True)
        records.append(GoodnessRecord(j, Lj, best, w, log2_w, member, wit, best_om))
    return {
        "theta_seed": theta_seed, "g": g, "L0": L0,
        "scales": [asdict(r) for r in records],
        "theta_infinity_proxy": all(r.member for r in records),
    }


# -- localization suite ----------------------------------------------------------

@dataclass(frozen=True)
class LocalizationSample:
    trial: int
    seed: int
    omega: float
    localized: bool  # (a) every interior state uniformly m-localized and m_fit >= m
    bijection: bool  # (b)
    gap_positive: bool  # (c)
    kernel: bool  # (d)
    m_fit: float
    m_slope: float
    log2_gap: float
    double_gap: float
    kernel_ratio: float
    resolved: bool

    @property
    def passed(self) -> bool:
        return self.localized and self.bijection and self.gap_positive and self.kernel


def localization_sample(trial: int, master: int, g: float, L: int = 100, m: float = 3.0,
                        params: HullParams | None = None, alpha=None,
                        times=None, fraction: float = 0.25) -> LocalizationSample:
    """Localization checks (a)-(d) on the d = 1 box B_L(0) for one (omega, theta).

    LAPACK vectors are used as they are unless the double spectrum has
    eigenvalues closer than 1e-8 * |H|; then the spectrum is resolved in
    multiprecision and the gap is the certified lower bound.
    """
    params = HullParams() if params is None else params
    alpha = golden_mean() if alpha is None else alpha
    times = np.linspace(0.0, 100.0, 50) if times is None else np.asarray(times, float)
    cube = LatticeCube.at(L)
    th = ThetaField(trial_seed(master, trial))
    om = float(trial_rng(master, trial).random())
    rep = eigensystem(assemble(cube, om, th, alpha, params, g))
    lam = rep.eigenvalues
    dgap = float(np.min(np.diff(lam)))
    scale = float(np.max(np.abs(lam))) + 2.0
    resolved = g > 0 and dgap <= 1e-8 * scale
    if resolved:
        res = resolve_spectrum(cube, om, th, alpha, params, g, report=rep, m=m)
        rep = res.report
        log2_gap = res.certificate.log2_gap_lower if res.certificate.simple else -math.inf
    else:
        log2_gap = math.log2(dgap) if dgap > 0 else -math.inf
    br = center_bijection(rep, m, cube, fraction)
    m_fit = br.interior_m_fit
    a = br.interior_localized and m_fit >= m
    b = br.interior_bijection
    km = m_fit if math.isfinite(m_fit) and m_fit > 0 else m
    kc = kernel_decay_check(rep, br.interior_sites, km, times)
    return LocalizationSample(trial, th.master_seed, om, bool(a), bool(b), log2_gap > -math.inf,
                              bool(kc.passed), float(m_fit), float(br.interior_m_slope),
                              float(log2_gap), dgap, float(kc.worst_ratio), bool(resolved))


def localization_suite(n_samples: int, g: float, master: int = 0, L: int = 100, m: float = 3.0,
                       params: HullParams | None = None, threads: int = 1, **kw) -> list[LocalizationSample]:
    return _map(lambda i: localization_sample(i, master, g, L, m, params, **kw),
                list(range(n_samples)), threads)


# -- configs and bundles ----------------------------------------------------------

KINDS = ("wegner", "separation", "spacing", "goodness", "localization", "induction")


class ConfigError(ValueError):
    """Invalid experiment config; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# validator checks that reject a config, with the field each one constrains;
# the rest (e.g. the initial-scale bracketing, unmet at desk-scale L0) are recorded only
BLOCKING_CHECKS = {
    "decay_exponent_floor": "model.b",
    "decay_exponent_measure": "model.b",
    "coupling_nonnegative": "model.g",
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: ModelParams = ModelParams()
    L0: int = 3
    alpha: tuple[tuple[float, ...], ...] = ((golden_mean(),),)
    seed: int = 0
    samples: int = 100
    knobs: Mapping[str, Any] = field(default_factory=dict)
    out_dir: str = "out"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "model": self.model.to_dict(), "L0": self.L0,
            "alpha": [list(r) for r in self.alpha], "seed": self.seed, "samples": self.samples,
            "knobs": dict(self.knobs), "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> ExperimentConfig:
        if not isinstance(doc, Mapping):
            raise ConfigError("config", "must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(f"config.{key}", "unknown field")
        if "kind" not in doc:
            raise ConfigError("config.kind", "required")
        kind = doc["kind"]
        if kind not in KINDS:
            raise ConfigError("config.kind", f"must be one of {', '.join(KINDS)}")
        mdoc = doc.get("model", {})
        if not isinstance(mdoc, Mapping):
            raise ConfigError("config.model", "must be an object")
        mfields = {f.name: f for f in fields(ModelParams)}
        kw = {}
        for key, val in mdoc.items():
            if key not in mfields:
                raise ConfigError(f"config.model.{key}", "unknown field")
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"config.model.{key}", "must be a number")
            kw[key] = val
        model = ModelParams(**kw)
        for key in ("L0", "seed", "samples"):
            if key in doc and (not isinstance(doc[key], int) or isinstance(doc[key], bool)):
                raise ConfigError(f"config.{key}", "must be an integer")
        L0 = doc.get("L0", 3)
        if L0 < 2:
            raise ConfigError("config.L0", "must be >= 2")
        samples = doc.get("samples", 100)
        if samples < 1:
            raise ConfigError("config.samples", "must be >= 1")
        alpha = doc.get("alpha", [[golden_mean()]])
        try:
            a = frequency_matrix(alpha, model.d)
        except (ValueError, TypeError) as exc:
            raise ConfigError("config.alpha", str(exc)) from None
        if a.shape != (model.d, model.nu):
            raise ConfigError("config.alpha", f"expected shape ({model.d}, {model.nu}), got {a.shape}")
        knobs = doc.get("knobs", {})
        if not isinstance(knobs, Mapping):
            raise ConfigError("config.knobs", "must be an object")
        cfg = cls(kind, model, L0, tuple(tuple(float(x) for x in r) for r in a),
                  int(doc.get("seed", 0)), samples, dict(knobs), str(doc.get("out_dir", "out")))
        report = validate_params(model, ScaleSchedule(L0, model))
        for chk in report.failures():
            if chk.name in BLOCKING_CHECKS:
                raise ConfigError(f"config.{BLOCKING_CHECKS[chk.name]}", f"{chk.name}: {chk.detail}")
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike) -> ExperimentConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, seed: int | None = None, out_dir: str | None = None) -> ExperimentConfig:
        env = os.environ.get(SEED_ENV)
        if seed is None and env is not None:
            seed = int(env)
        return ExperimentConfig(self.kind, self.model, self.L0, self.alpha,
                                self.seed if seed is None else int(seed), self.samples,
                                self.knobs, self.out_dir if out_dir is None else out_dir)


def quickstart_config(out_dir: str = "out/quickstart") -> ExperimentConfig:
    """Small Wegner/Minami run on the synthetic model; finishes in seconds."""
    return ExperimentConfig.from_dict({
        "kind": "wegner", "seed": 2024, "samples": 2000, "out_dir": out_dir,
        "knobs": {"model": "synthetic", "L": 8, "J": [1, 2], "widths": [0.05, 0.1, 0.2],
                  "center": 0.5},
    })


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dumps(doc) -> str:
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _alpha(cfg: ExperimentConfig) -> np.ndarray:
    return np.asarray(cfg.alpha, dtype=float)


def _run_wegner(cfg: ExperimentConfig, threads: int):
    k = cfg.knobs
    model = k.get("model", "synthetic")
    L = int(k.get("L", 8))
    Js = [int(j) for j in np.atleast_1d(k.get("J", [1, 2]))]
    widths = [float(w) for w in np.atleast_1d(k.get("widths", [0.05, 0.1, 0.2]))]
    center = float(k.get("center", 0.5))
    if model == "synthetic":
        g = float(k.get("g", 1.0))
        spectra = synthetic_spectra(L, cfg.samples, cfg.seed, g)
        kw = {"g": g}
    else:
        spectra, _ = haarsh_spectra(L, cfg.samples, cfg.seed, cfg.model, _alpha(cfg))
        kw = {"params": cfg.model, "alpha": _alpha(cfg)}
    ledgers = []
    for J in Js:
        for w in widths:
            led = wegner_minami_trial(L, (center - w / 2, center + w / 2), J, cfg.samples,
                                      cfg.seed, model, spectra=spectra, **kw)
            ledgers.append(led)
    result = {"cells": [dict(l.summary(), within_bound=l.within_bound()) for l in ledgers]}
    return result, ledgers


def _run_separation(cfg: ExperimentConfig, threads: int):
    k = cfg.knobs
    led = separation_probability_trial(cfg.L0, cfg.model.g, cfg.samples,
                                       float(k.get("width_log2", -40.0)), cfg.seed, cfg.model,
                                       _alpha(cfg), k.get("box_L"))
    grid = [float(w) for w in k.get("width_grid_log2", [])]
    res = {"ledger": led.summary()}
    if grid:
        res["width_sweep"] = {"width_log2": grid, "frequency": flag_frequencies(led, grid)}
    return res, [led]


def _run_spacing(cfg: ExperimentConfig, threads: int):
    k = cfg.knobs
    led = spacing_probability_trial(int(k.get("j", 0)), cfg.model.g, cfg.samples,
                                    int(k.get("omega_samples", 4)),
                                    float(k.get("width_log2", -20 / math.log(2))), cfg.seed,
                                    cfg.model, _alpha(cfg), cfg.L0, k.get("L"))
    return {"ledger": led.summary()}, [led]


def _run_goodness(cfg: ExperimentConfig, threads: int):
    k = cfg.knobs
    j_max = int(k.get("j_max", 0))
    widths = {int(j): float(w) for j, w in k.get("widths", {}).items()}
    super_L = {int(j): int(r) for j, r in k.get("super_L", {}).items()}

    def one(i):
        return theta_goodness_profile(trial_seed(cfg.seed, i), j_max, int(k.get("omega_samples", 2)),
                                      cfg.model.g, cfg.model, _alpha(cfg), cfg.L0,
                                      widths or None, cfg.seed, super_L or None)
    profiles = _map(one, list(range(cfg.samples)), threads)
    rows = []
    for i, prof in enumerate(profiles):
        s = prof["scales"][-1]
        rows.append(TrialRow(i, prof["theta_seed"], s["min_distance"],
                             s["log2_width"],
                             not prof["theta_infinity_proxy"], tuple(s["omega"])))
    led = TrialLedger("goodness", tuple(rows), math.nan, {"j_max": j_max})
    return {"profiles": profiles, "ledger": led.summary(),
            "membership_frequency": 1.0 - led.frequency}, [led]


def _run_localization(cfg: ExperimentConfig, threads: int):
    k = cfg.knobs
    g = float(k.get("g", cfg.model.g))
    samples = localization_suite(cfg.samples, g, cfg.seed, int(k.get("L", 100)),
                                 float(k.get("m", 3.0)), cfg.model.hull_params(), threads,
                                 alpha=_alpha(cfg))
    rows = tuple(TrialRow(s.trial, s.seed, s.m_fit, math.nan, not s.passed, (s.omega,))
                 for s in samples)
    led = TrialLedger("localization", rows, math.nan, {"g": g})
    return {"samples": [asdict(s) for s in samples],
            "pass_fraction": float(np.mean([s.passed for s in samples]))}, [led]


def _run_induction(cfg: ExperimentConfig, threads: int):
    from .msa import scale_induction_report

    k = cfg.knobs
    pairs = [(trial_rng(cfg.seed, i).random(cfg.model.nu), ThetaField(trial_seed(cfg.seed, i)))
             for i in range(cfg.samples)]
    widths = {int(j): float(w) for j, w in k.get("widths", {}).items()} or None
    rep = scale_induction_report(int(k.get("j_max", 0)), pairs, ScaleSchedule(cfg.L0, cfg.model),
                                 _alpha(cfg), widths, k.get("m"),
                                 int(k.get("supercubes_per_sample", 8)))
    rows = []
    for sc in rep["scales"]:
        for i, c in enumerate(sc["certificates"]):
            rows.append(TrialRow(i, pairs[i][1].master_seed, float(c["singular_subcubes"]),
                                 math.nan, not c["passed"]))
    return rep, [TrialLedger("induction", tuple(rows), math.nan, {})]


_RUNNERS = {
    "wegner": _run_wegner, "separation": _run_separation, "spacing": _run_spacing,
    "goodness": _run_goodness, "localization": _run_localization, "induction": _run_induction,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> Path:
    """Run a config and write summary.json, one CSV per ledger, and schedule.json."""
    from . import __version__

    result, ledgers = _RUNNERS[cfg.kind](cfg, threads)
    out = Path(cfg.out_dir)
    sched = ScaleSchedule(cfg.L0, cfg.model)
    checks = validate_params(cfg.model, sched)
    summary = {
        "schema_version": SCHEMA_VERSION, "code_version": __version__,
        "config": cfg.to_dict(), "validation": checks.to_dict(), "result": result,
        "ledgers": [f"{l.name}.csv" for l in ledgers],
    }
    for led in ledgers:
        atomic_write(out / f"{led.name}.csv", led.to_csv())
    atomic_write(out / "schedule.json", dumps({"L0": cfg.L0, "model": cfg.model.to_dict(),
                                               "rows": schedule_table(sched, 3, cfg.model.m)}))
    atomic_write(out / "summary.json", dumps(summary))
    return out
