"""Command-line front end: design, simulate, phase-portrait, verify."""
import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import config_hash, load_config
from .estimator import ICPMController
from .exceptions import ConfigError, ICPMError, InvalidInputError, OrbitEscapeError
from .export import (
    design_report,
    ensure_dir,
    events_table,
    portrait_table,
    trajectory_table,
    write_csv,
    write_json,
)
from .reduction import orbit_distance, orbit_samples

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_UNSTABLE, EXIT_DIVERGED = 0, 1, 2, 3, 4, 5


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc}") from None


def _key_value(text):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


# flag dest -> dotted config key
FLAG_KEYS = {
    "model": "model",
    "g": "params.g",
    "vhc_coefficients": "vhc.coefficients",
    "kp": "vhc.kp",
    "kd": "vhc.kd",
    "anchor": "orbit.anchor",
    "c_d": "orbit.c_d",
    "section": "section.q2_star",
    "direction": "section.direction",
    "mode": "impulse.mode",
    "lam": "impulse.Lam",
    "mu": "impulse.mu",
    "eps3": "impulse.eps3",
    "Q": "lqr.Q",
    "R": "lqr.R",
    "gain": "lqr.gain",
    "rtol": "tolerances.rtol",
    "atol": "tolerances.atol",
    "tol_reg": "tolerances.tol_reg",
    "eps1": "tolerances.eps1",
    "eps2": "tolerances.eps2",
    "t_end": "t_end",
    "divergence_bound": "divergence_bound",
    "x0": "x0",
    "q2_range": "q2_range",
    "q2_grid": "portrait.q2",
    "q2dot_grid": "portrait.q2dot",
    "out_dir": "out_dir",
    "seed": "seed",
}


def _add_config_flags(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--model", choices=["cart-pendulum", "tiptoebot"])
    p.add_argument("--g", type=float, help="gravity (cart-pendulum)")
    p.add_argument("--param", action="append", type=_key_value, default=[], metavar="KEY=VALUE",
                   help="model parameter override (repeatable)")
    p.add_argument("--vhc-coefficients", type=float, nargs="+")
    p.add_argument("--kp", type=_json_arg)
    p.add_argument("--kd", type=_json_arg)
    p.add_argument("--anchor", type=float, nargs=2, metavar=("Q2", "Q2DOT"))
    p.add_argument("--c-d", type=float)
    p.add_argument("--section", type=float, metavar="Q2_STAR")
    p.add_argument("--direction", type=int, choices=[1, -1])
    p.add_argument("--mode", choices=["jump", "high-gain"])
    p.add_argument("--lam", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--eps3", type=float)
    p.add_argument("--Q", type=_json_arg)
    p.add_argument("--R", type=_json_arg)
    p.add_argument("--gain", type=_json_arg)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--tol-reg", type=float)
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--divergence-bound", type=float)
    p.add_argument("--x0", type=float, nargs="+", help="initial [q; qd] in natural order")
    p.add_argument("--q2-range", type=float, nargs=2)
    p.add_argument("--q2-grid", type=float, nargs=3, metavar=("LO", "HI", "N"))
    p.add_argument("--q2dot-grid", type=float, nargs=3, metavar=("LO", "HI", "N"))
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="icpm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"icpm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("design", help="fixed point, linearization and impulse gain")
    _add_config_flags(p)
    p = sub.add_parser("simulate", help="closed-loop run with impulses on the section")
    _add_config_flags(p)
    p.add_argument("--report", help="design report whose gain is used")
    p = sub.add_parser("phase-portrait", help="zero-dynamics energy on a grid")
    _add_config_flags(p)
    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--only", nargs="+", help="check keys, e.g. 1 5 8g")
    return parser


def _overrides(args):
    out = {}
    for dest, key in FLAG_KEYS.items():
        val = getattr(args, dest, None)
        if val is None:
            continue
        if dest in ("q2_grid", "q2dot_grid"):
            lo, hi, num = val
            if num != int(num):
                raise ConfigError(f"--{dest.replace('_', '-')} count must be an integer")
            val = [lo, hi, int(num)]
        out[key] = list(val) if isinstance(val, tuple) else val
    for key, val in getattr(args, "param", []):
        out[f"params.{key}"] = val
    return out


def _meta(cfg, command):
    return {
        "command": command,
        "config_hash": config_hash(cfg),
        "model": cfg.model,
        "tolerances": cfg.tolerances.model_dump(),
    }


def _fit(cfg):
    try:
        est = ICPMController(**cfg.estimator_kwargs())
        est._build()
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    return est.fit()


def cmd_design(cfg):
    est = _fit(cfg)
    out = ensure_dir(cfg.out_dir)
    meta = _meta(cfg, "design")
    write_json(os.path.join(out, "design_report.json"), design_report(est, cfg.tolerances.model_dump()), meta)
    red = est.reduced_
    write_csv(os.path.join(out, "reduced_table.csv"), ["q2", "mass", "potential"], red.table(), meta)
    print(f"z* = {np.array2string(est.z_star_, precision=6)}")
    print(f"closed-loop spectral radius {est.spectral_radius_:.6f}")
    if not (est.stable_ and est.stabilizability_["stabilizable"]):
        return EXIT_UNSTABLE
    return EXIT_OK


def _load_report_gain(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        return np.atleast_2d(np.asarray(doc["K"], dtype=float)).tolist()
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read design report {path}: {exc}") from None


def _simulation_summary(est, traj, cfg, x_start):
    samples = orbit_samples(est.reduced_, est.orbit_)
    dist = orbit_distance(est.reduced_, est.orbit_, traj.x, samples=samples)
    tol = cfg.tolerances.orbit_tol
    bad = np.flatnonzero(dist >= tol)
    if bad.size == 0:
        settle = float(traj.t[0])
    elif bad[-1] == len(dist) - 1:
        settle = None
    else:
        settle = float(traj.t[bad[-1] + 1])
    return {
        "status": traj.status,
        "x0_natural": x_start,
        "crossings": {"k": [c[0] for c in traj.crossings], "t": [c[1] for c in traj.crossings],
                      "error_norm": traj.error_norms},
        "dist_to_orbit": {"t": traj.t, "distance": dist},
        "convergence_time": settle,
        "orbit_tol": tol,
        "z_star": est.z_star_,
        "K": est.K_,
    }


def cmd_simulate(cfg, report=None):
    if report is not None:
        cfg = cfg.model_copy(update={"lqr": cfg.lqr.model_copy(update={"gain": _load_report_gain(report)})})
    if cfg.x0 is not None and len(cfg.x0) != (4 if cfg.model == "cart-pendulum" else 6):
        raise ConfigError("x0 length does not match the model")
    est = _fit(cfg)
    out = ensure_dir(cfg.out_dir)
    meta = _meta(cfg, "simulate")
    imp = cfg.impulse
    code = EXIT_OK
    try:
        traj = est.simulate(cfg.x0, cfg.t_end, mode=imp.mode, Lam=imp.Lam, mu=imp.mu, eps3=imp.eps3,
                            divergence_bound=cfg.divergence_bound)
    except ICPMError as exc:
        traj = getattr(exc, "trajectory", None)
        if traj is None:
            raise
        code = EXIT_DIVERGED if isinstance(exc, OrbitEscapeError) else EXIT_NUMERIC
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    x_start = est.system_.to_natural(traj.x[0])
    write_csv(os.path.join(out, "trajectory.csv"), *trajectory_table(est.system_, est.vhc_, est.reduced_, traj), meta)
    write_csv(os.path.join(out, "events.csv"), *events_table(est.system_, traj), meta)
    write_json(os.path.join(out, "summary.json"), _simulation_summary(est, traj, cfg, x_start), meta)
    return code


def cmd_phase_portrait(cfg):
    from .models import DEFAULT_ANCHORS, DEFAULT_Q2_RANGES, build_model
    from .reduction import build_reduced, orbit_from_anchor, orbit_from_energy

    try:
        sys_, vhc = build_model(cfg.model, cfg.model_params())
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    q2_range = cfg.q2_range if cfg.q2_range is not None else DEFAULT_Q2_RANGES.get(cfg.model)
    red = build_reduced(sys_, vhc, q2_range, quad_tol=cfg.tolerances.quad_tol, tol_reg=cfg.tolerances.tol_reg)
    if cfg.orbit.c_d is not None:
        orbit = orbit_from_energy(red, cfg.orbit.c_d)
    else:
        orbit = orbit_from_anchor(red, *(cfg.orbit.anchor or DEFAULT_ANCHORS[cfg.model]))
    a, b = cfg.portrait.q2, cfg.portrait.q2dot
    header, rows = portrait_table(red, np.linspace(a[0], a[1], a[2]), np.linspace(b[0], b[1], b[2]), orbit.c_d)
    meta = dict(_meta(cfg, "phase-portrait"), c_d=orbit.c_d)
    out = ensure_dir(cfg.out_dir)
    write_csv(os.path.join(out, "phase_portrait.csv"), header, rows, meta)
    return EXIT_OK


def cmd_verify(only=None):
    from .verify import CHECKS, run_checks

    keys = only or list(CHECKS)
    unknown = [k for k in keys if k not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown check keys {unknown}; choose from {list(CHECKS)}")
    results = run_checks(keys, stream=sys.stdout)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} checks passed")
    return EXIT_OK if n_pass == len(results) else EXIT_FAIL


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.only)
        cfg = load_config(args.config, _overrides(args))
        if args.command == "design":
            return cmd_design(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.report)
        return cmd_phase_portrait(cfg)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except ICPMError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
