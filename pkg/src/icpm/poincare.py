"""Impulse-controlled return map on the section: fixed point and linearization."""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ICPMError,
    LinearizationError,
    SectionInfeasibleError,
    SectionMismatchError,
)
from .hybrid_sim import (
    ATOL,
    RTOL,
    apply_impulse_jump,
    integrate_to_section,
    lift_section_state,
)
from .vhc import TOL_REG

__all__ = [
    "LinearizedMap",
    "poincare_map",
    "find_fixed_point",
    "linearize",
    "floquet",
    "fixed_point_residual",
]


@dataclass(frozen=True)
class LinearizedMap:
    """``e(k+1) = A e(k) + B I(k)`` about the fixed point ``z_star``."""

    z_star: np.ndarray
    A: np.ndarray
    B: np.ndarray
    floquet: np.ndarray
    eps1: float
    eps2: float
    central: bool = False


def poincare_map(sys, vhc, section, z, impulse=None, t_max=50.0, rtol=RTOL, atol=ATOL, tol_reg=TOL_REG):
    """Apply ``impulse`` at section state ``z`` and return the next section state."""
    x = lift_section_state(sys, section, z)
    n = sys.n
    if impulse is not None:
        qd = apply_impulse_jump(sys, x[:n], x[n:], impulse)
        if section.direction * qd[-1] < 0.0:
            raise SectionInfeasibleError(
                f"impulse {np.atleast_1d(impulse)} reverses the passive velocity off the section")
        x = np.concatenate([x[:n], qd])
    elif section.direction * x[-1] < 0.0:
        raise SectionInfeasibleError("section state violates the crossing direction")
    return integrate_to_section(sys, vhc, section, x, t_max=t_max, rtol=rtol, atol=atol, tol_reg=tol_reg).z


def fixed_point_residual(sys, vhc, section, z, **kw):
    return float(np.linalg.norm(poincare_map(sys, vhc, section, z, **kw) - np.asarray(z)))


def _threads():
    try:
        return max(1, int(os.environ.get("ICPM_THREADS", "1")))
    except ValueError:
        return 1


def linearize(sys, vhc, section, z_star, eps1=1e-5, eps2=1e-5, central=False, threads=None, **kw):
    """Finite-difference Jacobians of the return map at ``(z_star, 0)``.

    Column ``i`` of ``A`` comes from perturbing ``z_star`` by ``eps1`` along
    axis ``i``; column ``i`` of ``B`` from adding ``M^-1 [eps2 e_i; 0]`` to
    the velocities, i.e. the jump produced by a small impulse on actuator
    ``i``. ``central=True`` uses symmetric differences instead.
    """
    z_star = np.asarray(z_star, dtype=float)
    n = sys.n
    dim, m = 2 * n - 1, n - 1
    x_star = lift_section_state(sys, section, z_star)
    Minv = np.linalg.inv(np.asarray(sys.mass_matrix(x_star[:n]), dtype=float))
    order = list(sys.natural_order)

    def velocity_kick(i, eps):
        dv = Minv[:, i] * eps  # M^-1 [eta_i; 0]
        S = np.zeros(dim)
        S[n - 1:] = dv[order]
        return S

    probes = []
    for i in range(dim):
        probes.append(("A", i, +1, z_star + eps1 * np.eye(dim)[i]))
        if central:
            probes.append(("A", i, -1, z_star - eps1 * np.eye(dim)[i]))
    for i in range(m):
        probes.append(("B", i, +1, z_star + velocity_kick(i, eps2)))
        if central:
            probes.append(("B", i, -1, z_star + velocity_kick(i, -eps2)))

    def run(probe):
        kind, i, sign, z = probe
        try:
            return poincare_map(sys, vhc, section, z, **kw)
        except ICPMError as exc:
            raise LinearizationError(f"probe {kind}[{i}] ({'+' if sign > 0 else '-'}) failed: {exc}",
                                     probe=(kind, i, sign)) from exc

    workers = _threads() if threads is None else max(1, int(threads))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, probes))
    else:
        results = [run(p) for p in probes]

    A = np.zeros((dim, dim))
    B = np.zeros((dim, m))
    plus = {(k, i): r for (k, i, s, _), r in zip(probes, results) if s > 0}
    minus = {(k, i): r for (k, i, s, _), r in zip(probes, results) if s < 0}
    for (kind, i), r in plus.items():
        target, eps = (A, eps1) if kind == "A" else (B, eps2)
        if central:
            target[:, i] = (r - minus[(kind, i)]) / (2.0 * eps)
        else:
            target[:, i] = (r - z_star) / eps
    return LinearizedMap(z_star.copy(), A, B, floquet(A), float(eps1), float(eps2), bool(central))


def floquet(A):
    """Eigenvalues of the return-map Jacobian, largest modulus first."""
    if isinstance(A, LinearizedMap):
        A = A.A
    ev = np.linalg.eigvals(np.asarray(A, dtype=float))
    return ev[np.lexsort((-ev.imag, -np.abs(ev)))]


def find_fixed_point(sys, vhc, section, red, orbit, refine=True, tol=1e-9, max_iter=5, eps=1e-5, **kw):
    """Section state where the desired orbit pierces the section.

    The analytic lift of ``(q2*, q2*')`` through the constraint is refined by
    damped Newton steps on ``P(z) - z`` if its residual exceeds ``tol``.
    """
    q2s = section.q2_star
    lo, hi = red.q2_range
    if not red.periodic and not lo <= q2s <= hi:
        raise SectionMismatchError(f"section q2*={q2s} lies outside the reduced range {red.q2_range}")
    P = float(red.reduced_potential(q2s))
    if orbit.c_d < P:
        raise SectionMismatchError(f"orbit with E={orbit.c_d:.6g} does not reach q2*={q2s} (P={P:.6g})")
    v = section.direction * np.sqrt(2.0 * (orbit.c_d - P) / float(red.reduced_mass(q2s)))
    x = vhc.lift(q2s, v)
    n = sys.n
    z = np.concatenate([x[: n - 1], x[n:][list(sys.natural_order)]])
    if not refine:
        return z
    r = poincare_map(sys, vhc, section, z, **kw) - z
    for _ in range(max_iter):
        if np.linalg.norm(r) < tol:
            break
        lin = linearize(sys, vhc, section, z, eps1=eps, eps2=eps, **kw)
        step = np.linalg.lstsq(lin.A - np.eye(len(z)), -r, rcond=1e-8)[0]
        lam = 1.0
        for _ in range(10):
            z_try = z + lam * step
            r_try = poincare_map(sys, vhc, section, z_try, **kw) - z_try
            if np.linalg.norm(r_try) < np.linalg.norm(r):
                z, r = z_try, r_try
                break
            lam *= 0.5
        else:
            break
    return z
