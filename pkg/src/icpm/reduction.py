"""Zero dynamics on the constraint manifold and the orbits it carries."""
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import minimize_scalar

from .exceptions import InvalidOrbitError, NumericError, SingularVHCError
from .vhc import TOL_REG

__all__ = [
    "ReducedSystem",
    "OrbitSpec",
    "zero_dynamics_coeffs",
    "build_reduced",
    "orbit_from_anchor",
    "orbit_from_energy",
    "orbit_samples",
    "orbit_distance",
    "zero_dynamics_period",
]


def zero_dynamics_coeffs(sys, vhc, q2, tol_reg=TOL_REG):
    """Coefficients of ``q2'' = alpha1(q2) + alpha2(q2) q2'^2``.

    The passive row of the equations of motion is evaluated on the
    constraint at ``q2' = 0`` and ``q2' = 1``; it is affine in ``q2'^2``.
    """
    q2 = float(q2)
    m = sys.n - 1
    p = np.atleast_1d(vhc.dphi(q2))
    pp = np.atleast_1d(vhc.d2phi(q2))
    q = np.concatenate([np.atleast_1d(vhc.phi(q2)), [q2]])
    M = np.asarray(sys.mass_matrix(q), dtype=float)
    M12, M22 = M[:m, m], M[m, m]
    den = M12 @ p + M22
    if abs(den) < tol_reg:
        raise SingularVHCError(f"zero dynamics undefined at q2={q2:.6g}", q2=q2)
    h2_0 = sys.bias(q, np.zeros(sys.n))[m]
    h2_1 = sys.bias(q, np.concatenate([p, [1.0]]))[m]
    alpha1 = -h2_0 / den
    alpha2 = -(M12 @ pp + (h2_1 - h2_0)) / den
    return float(alpha1), float(alpha2)


@dataclass(frozen=True)
class ReducedSystem:
    """Zero dynamics with its integral of motion ``E = M q2'^2 / 2 + P``.

    ``reduced_mass`` and ``reduced_potential`` are Hermite interpolants on a
    dense grid over ``q2_range`` with exact nodal slopes.
    """

    alpha1: Callable
    alpha2: Callable
    coeffs: Callable
    vhc: object
    reduced_mass: Callable
    reduced_potential: Callable
    pmin: float
    pmax: float
    q2_at_pmin: float
    q2_range: Tuple[float, float]
    periodic: bool
    grid: np.ndarray

    def energy(self, q2, q2dot):
        q2, q2dot = np.asarray(q2, dtype=float), np.asarray(q2dot, dtype=float)
        return 0.5 * self.reduced_mass(q2) * q2dot**2 + self.reduced_potential(q2)

    def table(self):
        """Rows ``(q2, M, P)`` on the memoization grid."""
        return np.column_stack([self.grid, self.reduced_mass(self.grid), self.reduced_potential(self.grid)])


def build_reduced(sys, vhc, q2_range=None, quad_tol=1e-10, nodes_per_2pi=2001, tol_reg=TOL_REG):
    """Tabulate the reduced mass and potential.

    The integrals are evaluated with an adaptive embedded Runge-Kutta
    quadrature (absolute tolerance ``quad_tol``) started at ``q2 = 0``.
    ``q2_range`` defaults to one full turn ``(-pi, pi)``; give a narrower
    range when the constraint is singular somewhere on the circle.
    """
    lo, hi = (-np.pi, np.pi) if q2_range is None else (float(q2_range[0]), float(q2_range[1]))
    if not lo <= 0.0 <= hi or lo == hi:
        raise ValueError("q2_range must contain 0 and have positive length")
    periodic = q2_range is None
    n_nodes = max(int(np.ceil((hi - lo) / (2 * np.pi) * (nodes_per_2pi - 1))) + 1, 5)
    grid = np.linspace(lo, hi, n_nodes)
    grid[np.argmin(np.abs(grid))] = 0.0
    grid = np.unique(np.concatenate([grid, [0.0]]))

    def a1(s):
        return zero_dynamics_coeffs(sys, vhc, s, tol_reg)[0]

    def a2(s):
        return zero_dynamics_coeffs(sys, vhc, s, tol_reg)[1]

    def rhs(s, y):
        al1, al2 = zero_dynamics_coeffs(sys, vhc, s, tol_reg)
        return [al2, -al1 * np.exp(-2.0 * y[0])]

    # y = (int_0^s alpha2, P(s)); M = exp(-2 y0)
    vals = {}
    for end in (lo, hi):
        pts = grid[(grid <= 0.0)][::-1] if end == lo else grid[grid >= 0.0]
        if end == 0.0 or pts.size < 2:
            vals[end] = (pts, np.zeros((2, pts.size)))
            continue
        sol = solve_ivp(rhs, (0.0, end), [0.0, 0.0], method="DOP853", t_eval=pts,
                        rtol=1e-12, atol=quad_tol * 1e-2)
        if not sol.success:
            raise NumericError(f"reduced-potential quadrature failed on [0, {end:.6g}]: {sol.message}")
        vals[end] = (sol.t, sol.y)
    s_lo, y_lo = vals[lo]
    s_hi, y_hi = vals[hi]
    s = np.concatenate([s_lo[::-1][:-1], s_hi])
    y = np.concatenate([y_lo[:, ::-1][:, :-1], y_hi], axis=1)
    alphas = np.array([zero_dynamics_coeffs(sys, vhc, si, tol_reg) for si in s])
    Mg = np.exp(-2.0 * y[0])
    Pg = y[1]
    M_spl = CubicHermiteSpline(s, Mg, -2.0 * alphas[:, 1] * Mg)
    P_spl = CubicHermiteSpline(s, Pg, -alphas[:, 0] * Mg)

    if periodic:
        def mass(q2):
            return M_spl(_fold(q2))

        def pot(q2):
            return P_spl(_fold(q2))
    else:
        mass, pot = M_spl, P_spl

    # extrema: dense scan then bounded refinement
    scan = np.linspace(lo, hi, 10001)
    pv = P_spl(scan)
    extrema = []
    for sign in (1.0, -1.0):
        i = int(np.argmin(sign * pv))
        a, b = scan[max(i - 1, 0)], scan[min(i + 1, scan.size - 1)]
        if b > a:
            res = minimize_scalar(lambda u: sign * float(P_spl(u)), bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-12})
            best = (res.x, sign * res.fun) if sign * res.fun <= sign * pv[i] else (scan[i], pv[i])
        else:
            best = (scan[i], pv[i])
        extrema.append(best)
    (q2min, pmin), (_, pmax) = extrema
    return ReducedSystem(
        alpha1=a1,
        alpha2=a2,
        coeffs=lambda q2: zero_dynamics_coeffs(sys, vhc, q2, tol_reg),
        vhc=vhc,
        reduced_mass=mass,
        reduced_potential=pot,
        pmin=float(pmin),
        pmax=float(pmax),
        q2_at_pmin=float(q2min),
        q2_range=(lo, hi),
        periodic=periodic,
        grid=s,
    )


def _fold(q2):
    return np.mod(np.asarray(q2, dtype=float) + np.pi, 2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class OrbitSpec:
    """Energy level ``E = c_d`` of the zero dynamics."""

    c_d: float
    anchor: Optional[Tuple[float, float]] = None
    orbit_kind: str = "oscillation"


def _classify(red, c_d):
    if not c_d > red.pmin:
        raise InvalidOrbitError(f"energy level {c_d:.6g} must exceed the potential minimum {red.pmin:.6g}")
    return "oscillation" if c_d < red.pmax else "rotation"


def orbit_from_anchor(red, q2, q2dot):
    """Orbit through the passive state ``(q2, q2dot)``."""
    c_d = float(red.energy(q2, q2dot))
    if np.isclose(c_d, red.pmin, rtol=0.0, atol=1e-12):
        raise InvalidOrbitError("anchor sits at the potential minimum; this is an equilibrium, not an orbit")
    return OrbitSpec(c_d, (float(q2), float(q2dot)), _classify(red, c_d))


def orbit_from_energy(red, c_d):
    return OrbitSpec(float(c_d), None, _classify(red, float(c_d)))


def _start_point(red, orbit):
    if orbit.anchor is not None and orbit.anchor[1] != 0.0:
        return orbit.anchor
    q2 = red.q2_at_pmin
    v = np.sqrt(2.0 * (orbit.c_d - float(red.reduced_potential(q2))) / float(red.reduced_mass(q2)))
    return q2, v


def zero_dynamics_period(red, orbit, rtol=1e-11, atol=1e-12, n_samples=None):
    """Integrate the zero dynamics once around the orbit.

    Returns ``(period, samples)`` where ``samples`` is ``(n_samples, 2)``
    with columns ``(q2, q2dot)`` uniformly spaced in time (or ``None``).
    """
    q20, v0 = _start_point(red, orbit)
    sgn = 1.0 if v0 > 0 else -1.0

    def f(t, y):
        a1, a2 = red.coeffs(y[0])
        return [y[1], a1 + a2 * y[1] ** 2]

    shift = 2.0 * np.pi if orbit.orbit_kind == "rotation" else 0.0

    def back(t, y):
        return sgn * (y[0] - q20) - shift

    back.direction = 1
    t_max = 5.0
    while True:
        sol = solve_ivp(f, (0.0, t_max), [q20, v0], method="DOP853", rtol=rtol, atol=atol,
                        events=back, dense_output=True)
        # skip the trivial root at t = 0 and returns with the wrong heading
        times = [t for t in sol.t_events[0] if t > 1e-6 and sgn * sol.sol(t)[1] > 0]
        if times:
            break
        if t_max > 1e4:
            raise NumericError("zero dynamics did not close the orbit")
        t_max *= 4.0
    T = float(times[0])
    if n_samples is None:
        return T, None
    ts = np.linspace(0.0, T, int(n_samples), endpoint=False)
    return T, sol.sol(ts).T


def orbit_samples(red, orbit, n_samples=2000):
    """Dense samples of the desired orbit lifted to internal full states."""
    _, pts = zero_dynamics_period(red, orbit, n_samples=n_samples)
    return np.array([red.vhc.lift(q2, v) for q2, v in pts])


def orbit_distance(red, orbit, x, n_samples=2000, samples=None):
    """Euclidean distance from full state(s) ``x`` to the desired orbit.

    The orbit is sampled densely and the distance is measured to the closed
    polyline through the samples. ``x`` may be a single state or ``(N, 2n)``.
    """
    if samples is None:
        samples = orbit_samples(red, orbit, n_samples)
    P = np.asarray(samples, dtype=float)
    Q = np.roll(P, -1, axis=0)
    d = Q - P
    dd = np.einsum("ij,ij->i", d, d)
    dd[dd == 0.0] = 1.0
    X = np.atleast_2d(np.asarray(x, dtype=float)).copy()
    if P.shape[1] == X.shape[1]:
        # unwrap the passive angle of x to the orbit's sheet when the orbit is an oscillation
        n = P.shape[1] // 2
        X[:, n - 1] = P[0, n - 1] + _fold(X[:, n - 1] - P[0, n - 1])
    out = np.empty(len(X))
    for i, xi in enumerate(X):
        s = np.clip(np.einsum("ij,ij->i", xi - P, d) / dd, 0.0, 1.0)
        proj = P + s[:, None] * d
        out[i] = np.sqrt(np.min(np.einsum("ij,ij->i", xi - proj, xi - proj)))
    return out if np.ndim(x) == 2 else float(out[0])
