"""Deterministic CSV/JSON writers with a commented metadata header."""
import csv
import json
import os

import numpy as np

from . import __version__
from .dynamics import wrap_angle

__all__ = [
    "format_float",
    "write_csv",
    "write_json",
    "trajectory_table",
    "events_table",
    "design_report",
    "portrait_table",
]


def format_float(v):
    return f"{float(v):.17g}"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def _meta_lines(meta):
    lines = [f"# tool: icpm {__version__}"]
    for key in sorted(meta or {}):
        val = meta[key]
        if not isinstance(val, str):
            val = json.dumps(val, sort_keys=True, default=_jsonable)
        lines.append(f"# {key}: {val}")
    return lines


def write_csv(path, header, rows, meta=None):
    """Write ``rows`` under ``header`` with 17 significant digits and LF endings."""
    with open(path, "w", newline="") as fh:
        for line in _meta_lines(meta):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return [[float(z.real), float(z.imag)] for z in obj.ravel()]
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, doc, meta=None):
    out = dict(doc)
    out["_meta"] = dict(meta or {}, tool=f"icpm {__version__}")
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(out, sort_keys=True, indent=2, default=_jsonable))
        fh.write("\n")


def _natural_names(sys):
    return [sys.names[i] for i in sys.natural_order]


def trajectory_table(sys, vhc, red, traj):
    """Header and rows ``t, q, qd, rho, E, event_flag`` in natural order."""
    from .vhc import rho

    names = _natural_names(sys)
    n, m = sys.n, sys.n - 1
    header = ["t", *names, *[f"{s}_dot" for s in names], *[f"rho{i + 1}" for i in range(m)], "E", "event_flag"]
    flags = traj.event_flag if traj.event_flag is not None else np.zeros(len(traj.t), dtype=int)
    nat = sys.to_natural(traj.x)
    rows = []
    for t, x, xn, f in zip(traj.t, traj.x, nat, flags):
        r = np.atleast_1d(rho(vhc, x[:n]))
        E = float(red.energy(x[n - 1], x[-1])) if red is not None else float("nan")
        rows.append([t, *xn, *r, E, int(f)])
    return header, rows


def events_table(sys, traj):
    d = 2 * sys.n - 1
    m = sys.n - 1
    header = (["k", "t_k"] + [f"z_minus{i + 1}" for i in range(d)] + [f"z_plus{i + 1}" for i in range(d)]
              + [f"impulse{i + 1}" for i in range(m)] + ["clamped", "duration"])
    rows = [[e.k, e.t, *e.z_minus, *e.z_plus, *np.atleast_1d(e.impulse), bool(e.clamped), e.duration]
            for e in traj.events]
    return header, rows


def design_report(est, tolerances=None):
    """JSON-ready summary of a fitted :class:`ICPMController`."""
    from .lqr import certify

    lin = est.linearization_
    closed = certify(est.A_, est.B_, est.K_)
    return {
        "model": est.system_.label,
        "z_star": est.z_star_,
        "A": est.A_,
        "B": est.B_,
        "K": est.K_,
        "floquet_open_loop": est.floquet_,
        "floquet_closed_loop": closed["eigenvalues"],
        "spectral_radius_closed_loop": closed["spectral_radius"],
        "stable": bool(closed["stable"]),
        "controllable": bool(est.stabilizability_["controllable"]),
        "stabilizable": bool(est.stabilizability_["stabilizable"]),
        "orbit": {"c_d": est.orbit_.c_d, "anchor": est.orbit_.anchor, "kind": est.orbit_.orbit_kind},
        "eps1": lin.eps1,
        "eps2": lin.eps2,
        "tolerances": dict(tolerances or {}),
    }


def portrait_table(red, q2_grid, q2dot_grid, c_d=None):
    """Energy of the zero dynamics on a ``(q2, q2')`` grid.

    ``level_offset`` is ``E - c_d`` so the desired orbit is its zero contour.
    Points outside a non-periodic tabulation range are skipped.
    """
    header = ["q2", "q2dot", "E"] + (["level_offset"] if c_d is not None else [])
    rows = []
    lo, hi = red.q2_range
    for a in np.asarray(q2_grid, dtype=float):
        if not red.periodic and not lo <= a <= hi:
            continue
        a_eval = wrap_angle(a) if red.periodic else a
        for b in np.asarray(q2dot_grid, dtype=float):
            E = float(red.energy(a_eval, b))
            rows.append([a, b, E] + ([E - c_d] if c_d is not None else []))
    return header, rows


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
