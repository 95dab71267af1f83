"""Command-line entry point: ``haarsh <command> [options]``.

Every command writes its results under ``--out-dir`` (JSON, plus CSV where
a table is natural) and prints the path of the main output.  The master
seed comes from ``--seed``, else the HAARSH_SEED environment variable,
else the config or 0.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .eigenstates import center_bijection, dynamical_kernel, radial_profile, resolve_spectrum
from .harness import (
    BLOCKING_CHECKS, SEED_ENV, ConfigError, ExperimentConfig, atomic_write, dumps, quickstart_config,
    run_experiment,
)
from .hull import HullParams, hull, hull_truncated
from .lattice import LatticeCube, assemble, eigensystem
from .msa import verify_sparseness
from .schedule import ModelParams, ScaleSchedule, schedule_table, validate_params
from .theta import ThetaField
from .torus import golden_mean


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    return int(env) if env is not None else 0


def _model(args) -> ModelParams:
    return ModelParams(d=args.d, nu=1, A=args.A, C_A=args.C_A, b=args.b, g=args.g, m=args.m,
                       c_a=args.c_a)


def _omega(args, seed: int) -> float:
    if args.omega is not None:
        return args.omega
    return float(np.random.default_rng(np.random.SeedSequence([seed, 0, 1])).random())


def _write(args, name: str, doc) -> Path:
    path = Path(args.out_dir) / name
    atomic_write(path, dumps(doc))
    print(path)
    return path


def _alpha(d: int) -> np.ndarray:
    # golden mean along axis 0, further axes get independent quadratic irrationals
    base = [golden_mean(), math.sqrt(2) - 1, math.sqrt(3) - 1]
    if d > len(base):
        raise SystemExit("d > 3 needs an explicit frequency config")
    return np.array(base[:d]).reshape(d, 1)


def cmd_hull_eval(args) -> int:
    seed = _seed(args)
    p = HullParams(b=args.b, c_a=args.c_a)
    th = ThetaField(seed)
    omegas = [float(x) for x in args.points] if args.points else [_omega(args, seed)]
    if args.N is None:
        vals = [hull(w, th, p, args.tol) for w in omegas]
        rows = [{"omega": w, "value": v, "N": N} for w, (v, N) in zip(omegas, vals)]
    else:
        rows = [{"omega": w, "value": hull_truncated(w, th, args.N, p), "N": args.N} for w in omegas]
    _write(args, "hull.json", {"seed": seed, "b": args.b, "c_a": args.c_a, "points": rows})
    return 0


def _operator(args, seed: int):
    mp = _model(args)
    cube = LatticeCube.at(args.L, d=args.d)
    om = _omega(args, seed)
    op = assemble(cube, om, ThetaField(seed), _alpha(args.d), mp.hull_params(), args.g)
    return cube, om, op, mp


def cmd_spectrum(args) -> int:
    seed = _seed(args)
    cube, om, op, _ = _operator(args, seed)
    rep = eigensystem(op, vectors=args.vectors)
    doc = json.loads(rep.to_json(include_vectors=args.vectors, seed=seed, omega=om, g=args.g))
    _write(args, "spectrum.json", doc)
    return 0


def cmd_msa_certify(args) -> int:
    seed = _seed(args)
    mp = _model(args)
    sched = ScaleSchedule(args.L0, mp)
    R = args.L0**4 if args.j == -1 else sched.L(args.j) ** 4
    om = _omega(args, seed)
    op = assemble(LatticeCube.at(R, d=args.d), om, ThetaField(seed), _alpha(args.d),
                  mp.hull_params(), args.g)
    cert = verify_sparseness(args.j, op, sched, width=args.width, m=args.m)
    _write(args, "certificate.json", {"seed": seed, "omega": om, "certificate": cert.to_dict()})
    return 0


def _resolved(args, seed: int):
    cube, om, op, mp = _operator(args, seed)
    rep = eigensystem(op)
    cert = None
    lam = rep.eigenvalues
    if args.d == 1 and args.g > 0 and np.min(np.diff(lam)) <= 1e-8 * (np.max(np.abs(lam)) + 2):
        res = resolve_spectrum(cube, om, ThetaField(seed), _alpha(1), mp.hull_params(), args.g,
                               report=rep, m=args.m)
        rep, cert = res.report, res.certificate
    return cube, om, rep, cert


def cmd_eigenstates(args) -> int:
    seed = _seed(args)
    cube, om, rep, cert = _resolved(args, seed)
    br = center_bijection(rep, args.m, cube)
    doc = {"seed": seed, "omega": om, "g": args.g, "basis": br.to_dict(),
           "certified_gap": None if cert is None else cert.to_dict()}
    _write(args, "eigenstates.json", doc)
    lines = ["state,radius,max_abs_psi"]
    for p in br.profiles:
        prof = radial_profile(rep.eigenvectors[:, p.index], cube, p.centers[0])
        lines += [f"{p.index},{r},{float(v)!r}" for r, v in enumerate(prof)]
    atomic_write(Path(args.out_dir) / "profiles.csv", "\n".join(lines) + "\n")
    return 0


def cmd_dynamics(args) -> int:
    seed = _seed(args)
    cube, om, rep, _ = _resolved(args, seed)
    times = np.linspace(0.0, args.t_max, args.t_points)
    x, y = cube.index_of((args.x,)), cube.index_of((args.y,))
    vals = dynamical_kernel(rep, x, y, t=times)
    doc = {"seed": seed, "omega": om, "x": args.x, "y": args.y, "times": times,
           "kernel": np.atleast_1d(vals), "sup": float(np.max(vals))}
    _write(args, "dynamics.json", doc)
    return 0


def _run_config(cfg: ExperimentConfig, args) -> int:
    cfg = cfg.with_overrides(seed=args.seed, out_dir=args.out_dir)
    out = run_experiment(cfg, threads=args.threads)
    print(out / "summary.json")
    return 0


def cmd_wegner(args) -> int:
    cfg = ExperimentConfig.from_dict({
        "kind": "wegner", "samples": args.samples, "seed": 0,
        "model": {"g": args.g, "c_a": args.c_a, "b": args.b},
        "knobs": {"model": args.model, "L": args.L, "J": args.J, "widths": args.widths,
                  "center": args.center, "g": args.g},
    })
    return _run_config(cfg, args)


def cmd_spacing(args) -> int:
    cfg = ExperimentConfig.from_dict({
        "kind": "spacing", "samples": args.samples, "seed": 0, "L0": args.L0,
        "model": {"g": args.g, "c_a": args.c_a, "b": args.b},
        "knobs": {"j": args.j, "omega_samples": args.omega_samples,
                  "width_log2": args.width_log2, **({"L": args.L} if args.L else {})},
    })
    return _run_config(cfg, args)


def cmd_sweep(args) -> int:
    cfg = quickstart_config() if args.config == "quickstart" else ExperimentConfig.load(args.config)
    return _run_config(cfg, args)


def cmd_schedule_dump(args) -> int:
    mp = _model(args)
    sched = ScaleSchedule(args.L0, mp)
    _write(args, "schedule.json", {"L0": args.L0, "model": mp.to_dict(),
                                   "rows": schedule_table(sched, args.j_max, args.m)})
    return 0


def cmd_validate(args) -> int:
    if args.config:
        try:
            cfg = ExperimentConfig.load(args.config)
        except ConfigError as exc:
            _write(args, "validation.json", {"ok": False, "path": exc.path, "error": str(exc)})
            return 1
        mp, L0 = cfg.model, cfg.L0
    else:
        mp, L0 = _model(args), args.L0
    rep = validate_params(mp, ScaleSchedule(L0, mp))
    blocking = [c.name for c in rep.failures() if c.name in BLOCKING_CHECKS]
    _write(args, "validation.json", dict(rep.to_dict(), blocking=blocking))
    return 1 if blocking else 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"master seed (else ${SEED_ENV}, else 0)")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--threads", type=int, default=1)


def _model_flags(p: argparse.ArgumentParser, g: float = 1.0) -> None:
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--A", type=int, default=1)
    p.add_argument("--C-A", dest="C_A", type=int, default=1)
    p.add_argument("--b", type=float, default=2.0)
    p.add_argument("--c-a", dest="c_a", type=int, choices=(1, 2), default=2)
    p.add_argument("--g", type=float, default=g)
    p.add_argument("--m", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="haarsh", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hull-eval", help="evaluate the hull at points of the circle")
    _common(p)
    p.add_argument("points", nargs="*", type=float)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--N", type=int, default=None, help="truncation level (default: from --tol)")
    p.add_argument("--tol", type=float, default=1e-15)
    p.add_argument("--b", type=float, default=2.0)
    p.add_argument("--c-a", dest="c_a", type=int, choices=(1, 2), default=2)
    p.set_defaults(func=cmd_hull_eval)

    for name, func, helptext in (("spectrum", cmd_spectrum, "eigensystem of a box"),
                                 ("eigenstates", cmd_eigenstates, "localization centers and decay"),
                                 ("dynamics", cmd_dynamics, "|<x|exp(-iHt)|y>| on a time grid")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _model_flags(p, g=1e6)
        p.add_argument("--L", type=int, default=10)
        p.add_argument("--omega", type=float, default=None)
        if name == "spectrum":
            p.add_argument("--vectors", action="store_true")
        if name == "dynamics":
            p.add_argument("--x", type=int, default=0)
            p.add_argument("--y", type=int, default=1)
            p.add_argument("--t-max", type=float, default=100.0)
            p.add_argument("--t-points", type=int, default=50)
        p.set_defaults(func=func)

    p = sub.add_parser("msa-certify", help="sparseness certificate at one scale")
    _common(p)
    _model_flags(p, g=1e4)
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--L0", type=int, default=3)
    p.add_argument("--width", type=float, default=None, help="practical width (default g delta_j)")
    p.add_argument("--omega", type=float, default=None)
    p.set_defaults(func=cmd_msa_certify)

    p = sub.add_parser("wegner", help="Wegner/Minami frequencies against the explicit bound")
    _common(p)
    p.add_argument("--model", choices=("synthetic", "haarsh"), default="synthetic")
    p.add_argument("--L", type=int, default=8)
    p.add_argument("--J", type=int, nargs="+", default=[1, 2])
    p.add_argument("--widths", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    p.add_argument("--center", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--b", type=float, default=2.0)
    p.add_argument("--c-a", dest="c_a", type=int, choices=(1, 2), default=2)
    p.set_defaults(func=cmd_wegner)

    p = sub.add_parser("spacing", help="min spectral gap per theta against a width")
    _common(p)
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--L0", type=int, default=3)
    p.add_argument("--L", type=int, default=None, help="box radius (default L_j)")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--omega-samples", type=int, default=2)
    p.add_argument("--width-log2", type=float, default=-20 / math.log(2))
    p.add_argument("--g", type=float, default=1e6)
    p.add_argument("--b", type=float, default=2.0)
    p.add_argument("--c-a", dest="c_a", type=int, choices=(1, 2), default=2)
    p.set_defaults(func=cmd_spacing)

    p = sub.add_parser("sweep", help="run an experiment config (or 'quickstart')")
    _common(p)
    p.add_argument("config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("schedule-dump", help="scales, generations and widths per j")
    _common(p)
    _model_flags(p)
    p.add_argument("--L0", type=int, default=10)
    p.add_argument("--j-max", type=int, default=3)
    p.set_defaults(func=cmd_schedule_dump)

    p = sub.add_parser("validate", help="check model parameters or a config file")
    _common(p)
    _model_flags(p)
    p.add_argument("--L0", type=int, default=10)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
