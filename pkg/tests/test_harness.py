import json
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from haarsh.harness import (
    SEED_ENV, ConfigError, ExperimentConfig, TrialLedger, TrialRow, _jsonable, box_gap_log2,
    count_in_interval, dumps, flag_frequencies, localization_sample, minami_log2_bound,
    quickstart_config, run_experiment, scaling_exponent, separation_probability_trial,
    spacing_probability_trial, synthetic_spectra, theta_goodness_profile, trial_rng, trial_seed,
    wegner_minami_trial,
)
from haarsh.lattice import LatticeCube
from haarsh.schedule import ModelParams
from haarsh.theta import ThetaField
from haarsh.torus import cell_index, golden_mean, haar_sign, shift

ALPHA = golden_mean()


# -- seeding ------------------------------------------------------------------

def test_trial_seed_is_pure():
    assert trial_seed(5, 17) == trial_seed(5, 17)
    assert trial_seed(5, 17) != trial_seed(5, 18)
    assert trial_seed(5, 17) != trial_seed(6, 17)
    assert 0 <= trial_seed(0, 0) < 2**64
    a = trial_rng(3, 4).random(5)
    assert np.array_equal(a, trial_rng(3, 4).random(5))
    assert not np.array_equal(a, trial_rng(3, 4, stream=2).random(5))


def test_subset_of_trials_reproduces():
    full = synthetic_spectra(6, 20, master=9)
    for i in (0, 7, 19):
        V = trial_rng(9, i).random(6)
        H = np.diag(np.ones(5), 1) + np.diag(np.ones(5), -1) + np.diag(V)
        assert np.allclose(np.linalg.eigvalsh(H), full[i], atol=1e-13)


# -- Wegner / Minami ----------------------------------------------------------

def test_minami_bound_examples():
    assert 2 ** minami_log2_bound(0.0, 0.1, 1) == pytest.approx(0.31416, abs=5e-6)
    assert 2 ** minami_log2_bound(0.0, 0.1, 2) == pytest.approx(0.04935, abs=5e-6)
    with pytest.raises(ValueError):
        minami_log2_bound(0.0, 0.0, 1)
    with pytest.raises(ValueError):
        minami_log2_bound(0.0, 0.1, 0)


def test_count_in_interval_uses_closed_slack():
    lam = np.array([[0.0, 1.0, 2.0], [0.5, 1.0 + 5e-13, 3.0]])
    assert count_in_interval(lam, 0.0, 1.0).tolist() == [2, 2]
    assert count_in_interval(lam, 0.0, 1.0, slack=0.0).tolist() == [2, 1]


def test_synthetic_minami_within_bound():
    sp = synthetic_spectra(8, 2000, master=0)
    for J in (1, 2):
        for w in (0.05, 0.1, 0.2):
            led = wegner_minami_trial(8, (0.5 - w / 2, 0.5 + w / 2), J, 2000, spectra=sp)
            assert led.trials == 2000 and 0.0 <= led.frequency <= 1.0
            assert led.within_bound(), (J, w, led.frequency, led.bound)


def test_wegner_scaling_exponents_strong_disorder():
    # eigenvalues sit near g V_x, so their density is smooth on scales >> hopping
    g, n = 1000.0, 5000
    sp = synthetic_spectra(8, n, master=0, g=g)
    widths = (10.0, 20.0, 50.0, 100.0)
    for J, nominal in ((1, 1.0), (2, 2.0)):
        f = [wegner_minami_trial(8, (g / 2 - w / 2, g / 2 + w / 2), J, n, g=g, spectra=sp).frequency
             for w in widths]
        assert all(a <= b for a, b in zip(f, f[1:]))
        assert abs(scaling_exponent(widths, f) - nominal) <= 0.25 * nominal, (J, f)


def test_scaling_exponent_recovers_power_law():
    w = np.array([0.01, 0.02, 0.05, 0.1])
    assert scaling_exponent(w, 3 * w**2) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        scaling_exponent(w, [0.0, 0.1, 0.2, 0.3])


def test_haarsh_model_density_reference():
    p = ModelParams(g=10.0)
    led = wegner_minami_trial(3, (-0.5, 0.5), 1, 5, model="haarsh", params=p)
    assert led.meta["rho_log2"] > 0  # conditional density 1 / (g a_N) is huge
    assert len(led.rows[0].omega) == 1
    with pytest.raises(ValueError):
        wegner_minami_trial(3, (0.5, 0.5), 1, 5)
    with pytest.raises(ValueError):
        wegner_minami_trial(3, (0.0, 1.0), 1, 5, model="other")


# -- ledgers -----------------------------------------------------------------

def _ledger(flags, bound_log2=-1.0):
    rows = tuple(TrialRow(i, i, float(f), bound_log2, bool(f)) for i, f in enumerate(flags))
    return TrialLedger("t", rows, bound_log2)


def test_ledger_frequency_and_wilson_interval():
    led = _ledger([1] * 3 + [0] * 7)
    assert led.trials == 10 and led.hits == 3 and led.frequency == 0.3
    lo, hi = led.ci95
    assert lo == pytest.approx(0.1078, abs=1e-4) and hi == pytest.approx(0.6032, abs=1e-4)
    assert led.within_bound()  # 0.3 <= 0.5 + 3 * sqrt(0.025)
    assert not _ledger([1] * 10, bound_log2=-4.0).within_bound()


def test_ledger_csv_roundtrip():
    led = _ledger([1, 0, 1])
    lines = led.to_csv().splitlines()
    assert lines[0] == "trial,seed,omega,statistic,bound_log2,flag"
    assert lines[1] == "0,0,,1.0,-1.0,1"
    assert len(lines) == 4


@settings(max_examples=50, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=60))
def test_ledger_interval_brackets_frequency(flags):
    led = _ledger(flags)
    lo, hi = led.ci95
    assert 0.0 <= lo <= led.frequency <= hi <= 1.0


# -- separation --------------------------------------------------------------

def test_separation_width_extremes():
    led = separation_probability_trial(3, 1.0, 20, 0.0, master=1, box_L=3)
    assert led.trials == 20
    stats = [r.statistic for r in led.rows]
    assert all(math.isfinite(s) for s in stats)
    assert flag_frequencies(led, [-math.inf, max(stats) + 1.0]) == [0.0, 1.0]
    assert led.meta["generation"] == 27


def test_separation_frequency_linear_in_width():
    # the lowest generation band: gaps there are uniform multiples of one amplitude
    led = separation_probability_trial(3, 1.0, 1000, -10.0, master=0, box_L=5)
    grid = [-70.0, -69.0, -68.0, -67.0, -66.0, -65.0, -64.0]
    f = flag_frequencies(led, grid)
    assert all(a <= b for a, b in zip(f, f[1:]))
    assert abs(scaling_exponent([2.0**w for w in grid], f) - 1.0) <= 0.25


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-80, 0), min_size=2, max_size=8))
def test_separation_sweep_monotone(widths):
    led = separation_probability_trial(3, 1.0, 10, -40.0, master=2, box_L=2)
    widths = sorted(widths)
    f = flag_frequencies(led, widths)
    assert all(a <= b for a, b in zip(f, f[1:]))


def test_separation_zero_coupling():
    led = separation_probability_trial(3, 0.0, 3, -1e9, box_L=2)
    assert led.frequency == 1.0


# -- spacing ---------------------------------------------------------------------

def test_spacing_diagonal_dominant_membership():
    led = spacing_probability_trial(0, 1e6, 200, 1, -20 / math.log(2), master=0,
                                    params=ModelParams(c_a=1), L=9)
    assert led.trials == 200
    assert led.meta["membership_frequency"] >= 0.95


def test_spacing_free_laplacian_control():
    led = spacing_probability_trial(0, 0.0, 5, 1, -20 / math.log(2), params=ModelParams(c_a=1), L=9)
    free_gap = 2 * math.cos(math.pi / 20) - 2 * math.cos(2 * math.pi / 20)  # smallest, at the band edge
    for r in led.rows:
        assert r.statistic == pytest.approx(math.log2(free_gap), abs=1e-9)
    assert led.frequency == 0.0


def _mirror(theta, p, q, N):
    """Pin coefficients so that v_N agrees at the two torus points p and q."""
    pins = {}
    for n in range(N + 1):
        cp, cq = cell_index(p, n), cell_index(q, n)
        sp, sq = float(haar_sign(p, n)), float(haar_sign(q, n))
        if cp == cq:
            if sp != sq:
                pins[cp] = 0.0
        elif sp == sq:
            pins[cq] = theta.value(cp.n, cp.k)
        else:
            pins[cp] = pins[cq] = 0.0
    return theta.with_overrides(pins)


def test_spacing_detects_engineered_collision():
    # a reflection-symmetric potential gives even/odd pairs split only by tunneling
    L, omega, params = 3, 0.3, ModelParams(c_a=1)
    th = ThetaField(7)
    for _ in range(3):
        for k in range(1, L + 1):
            p, q = shift([omega], np.array([[-k], [k]]), ALPHA)
            th = _mirror(th, p, q, 40)
    cube = LatticeCube.at(L)
    log2_gap, _ = box_gap_log2(cube, omega, th, ALPHA, params, 1e6)
    assert log2_gap < -20 / math.log(2)
    log2_gap, _ = box_gap_log2(cube, omega, ThetaField(7), ALPHA, params, 1e6)
    assert log2_gap > -20 / math.log(2)


# -- theta goodness --------------------------------------------------------------

def test_goodness_profile_verdict_with_witness():
    seed = trial_seed(0, 0)
    kw = dict(params=ModelParams(c_a=1), super_L={0: 8})
    prof = theta_goodness_profile(seed, 0, 2, 1e6, widths={0: 1e-4}, **kw)
    rec = prof["scales"][0]
    assert rec["member"] and prof["theta_infinity_proxy"]
    assert rec["min_distance"] > 1e-4
    x, y = rec["witness"]
    assert abs(x[0] - y[0]) > 2 * rec["L"]
    assert not theta_goodness_profile(seed, 0, 2, 1e6, widths={0: 1e-3}, **kw)["scales"][0]["member"]


def test_goodness_double_tie_is_not_membership():
    # golden-mean windows 89 apart have bit-identical potentials in doubles
    prof = theta_goodness_profile(trial_seed(0, 0), 0, 2, 1e6)
    rec = prof["scales"][0]
    assert rec["min_distance"] == 0.0 and rec["width"] == 0.0
    assert rec["log2_width"] < -1000
    assert not rec["member"]


@settings(max_examples=15, deadline=None)
@given(st.floats(-30, 0), st.floats(-30, 0))
def test_goodness_widths_nest(a, b):
    lo, hi = sorted((a, b))
    kw = dict(params=ModelParams(c_a=1), super_L={0: 8})
    at = lambda lw: theta_goodness_profile(11, 0, 1, 1e6, widths={0: 2.0**lw}, **kw)["scales"][0]["member"]
    if at(hi):
        assert at(lo)


# -- localization sample ----------------------------------------------------------

def test_localization_sample_small_box():
    s = localization_sample(0, 0, 1e6, L=20)
    assert s.passed and s.m_fit >= 3.0
    c = localization_sample(0, 0, 0.0, L=20)
    assert not c.localized and not c.bijection


# -- configs and bundles ----------------------------------------------------------

def test_config_rejects_with_field_paths():
    cases = [
        ({"kind": "wegner", "model": {"b": 1.5}}, "config.model.b"),
        ({"kind": "nope"}, "config.kind"),
        ({}, "config.kind"),
        ({"kind": "wegner", "extra": 1}, "config.extra"),
        ({"kind": "wegner", "model": {"q": 1}}, "config.model.q"),
        ({"kind": "wegner", "model": {"g": "x"}}, "config.model.g"),
        ({"kind": "wegner", "model": {"g": -1.0}}, "config.model.g"),
        ({"kind": "wegner", "L0": 1}, "config.L0"),
        ({"kind": "wegner", "samples": 0}, "config.samples"),
        ({"kind": "wegner", "alpha": [[0.5, 0.3]]}, "config.alpha"),
    ]
    for doc, path in cases:
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_dict(doc)
        assert exc.value.path == path, doc
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict({"kind": "wegner", "model": {"b": 1.5}})
    assert "decay_exponent_floor" in str(exc.value)


def test_config_roundtrip_and_overrides(monkeypatch):
    cfg = quickstart_config("x")
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    monkeypatch.setenv(SEED_ENV, "77")
    assert cfg.with_overrides().seed == 77
    assert cfg.with_overrides(seed=5, out_dir="y").seed == 5
    monkeypatch.delenv(SEED_ENV)
    assert cfg.with_overrides().seed == cfg.seed


def test_jsonable_encodes_nonfinite():
    doc = {"a": math.nan, "b": np.float64(math.inf), "c": -math.inf, 1: np.arange(2), "d": np.bool_(True)}
    assert json.loads(dumps(doc)) == {"a": "nan", "b": "inf", "c": "-inf", "1": [0, 1], "d": True}
    assert _jsonable((1, 2.5)) == [1, 2.5]


def _bundle(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_quickstart_runs_and_is_byte_identical(tmp_path):
    t0 = time.perf_counter()
    out1 = run_experiment(quickstart_config(str(tmp_path / "a")))
    assert time.perf_counter() - t0 < 60
    out2 = run_experiment(quickstart_config(str(tmp_path / "b")), threads=4)
    b1, b2 = _bundle(out1), _bundle(out2)
    assert set(b1) == {"summary.json", "schedule.json"} | {f"minami_J{J}_w{w:g}.csv"
                                                            for J in (1, 2) for w in (0.05, 0.1, 0.2)}
    # the out_dir is echoed in the config, so compare with it removed
    s1, s2 = json.loads(b1.pop("summary.json")), json.loads(b2.pop("summary.json"))
    s1["config"].pop("out_dir"), s2["config"].pop("out_dir")
    assert s1 == s2 and b1 == b2
    assert all(c["within_bound"] for c in s1["result"]["cells"])
    assert s1["schema_version"] == 1 and "code_version" in s1


@pytest.mark.parametrize("doc", [
    {"kind": "separation", "samples": 3, "knobs": {"box_L": 2, "width_grid_log2": [-60, -30]}},
    {"kind": "spacing", "samples": 2, "model": {"g": 1e6, "c_a": 1}, "knobs": {"L": 4, "omega_samples": 1}},
    {"kind": "goodness", "samples": 2, "model": {"g": 1e6}, "knobs": {"super_L": {"0": 8}}},
    {"kind": "localization", "samples": 2, "knobs": {"g": 1e6, "L": 10}},
    {"kind": "induction", "samples": 2, "model": {"g": 1e4},
     "knobs": {"widths": {"0": 1.0}, "supercubes_per_sample": 2, "m": 1.0}},
])
def test_every_kind_is_deterministic(tmp_path, doc):
    out = []
    for tag in ("a", "a"):
        cfg = ExperimentConfig.from_dict(dict(doc, out_dir=str(tmp_path / tag)))
        out.append(_bundle(run_experiment(cfg, threads=2)))
    assert out[0] == out[1]
    assert json.loads(out[0]["summary.json"])["config"]["kind"] == doc["kind"]
