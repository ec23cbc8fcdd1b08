"""Closed-loop simulation with section crossings and impulsive inputs."""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from .dynamics import _terms_from, wrap_angle
from .exceptions import (
    ConvergenceError,
    ICPMError,
    InvalidInputError,
    ModelError,
    NoCrossingError,
    NumericError,
    OrbitEscapeError,
)
from .vhc import TOL_REG, _control, closed_loop_accel, rho, rho_dot

__all__ = [
    "SectionSpec",
    "Crossing",
    "ImpulseEvent",
    "HybridTrajectory",
    "closed_loop_rhs",
    "integrate_to_section",
    "apply_impulse_jump",
    "high_gain_burst",
    "simulate_closed_loop",
    "section_state",
    "lift_section_state",
    "RTOL",
    "ATOL",
]

RTOL = 1e-10
ATOL = 1e-12
REARM_BAND = 1e-3
ON_SECTION_TOL = 1e-8


@dataclass(frozen=True)
class SectionSpec:
    """Section ``{q2 = q2_star, direction * q2' >= 0}``."""

    q2_star: float = 0.0
    direction: int = 1

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise InvalidInputError("direction must be +1 or -1")

    def signed_offset(self, q2):
        """``direction * wrap(q2 - q2_star)``; crossings go from negative to positive."""
        return self.direction * float(wrap_angle(q2 - self.q2_star))

    def contains(self, x, n, tol=ON_SECTION_TOL):
        return abs(self.signed_offset(x[n - 1])) <= tol and self.direction * x[2 * n - 1] >= 0.0


def section_state(sys, x):
    """Section coordinates ``z = [q1; qd]`` with ``qd`` in the natural order."""
    x = np.asarray(x, dtype=float)
    n = sys.n
    return np.concatenate([x[: n - 1], x[n:][list(sys.natural_order)]])


def lift_section_state(sys, section, z):
    """Full internal state for section coordinates ``z``."""
    z = np.asarray(z, dtype=float)
    n = sys.n
    if z.shape != (2 * n - 1,):
        raise InvalidInputError(f"section state must have shape ({2 * n - 1},)")
    qd = np.empty(n)
    qd[list(sys.natural_order)] = z[n - 1:]
    return np.concatenate([z[: n - 1], [section.q2_star], qd])


@dataclass
class Crossing:
    t: float
    x: np.ndarray
    z: np.ndarray


@dataclass
class ImpulseEvent:
    k: int
    t: float
    z_minus: np.ndarray
    z_plus: np.ndarray
    impulse: np.ndarray
    mode: str
    clamped: bool = False
    duration: float = 0.0


@dataclass
class HybridTrajectory:
    """Sampled closed-loop history.

    ``x`` rows are internal full states. At an impulse time the stored sample
    is the post-impulse state; the pre-impulse state is in ``events``.
    """

    t: np.ndarray
    x: np.ndarray
    events: List[ImpulseEvent] = field(default_factory=list)
    crossings: List[tuple] = field(default_factory=list)
    event_flag: Optional[np.ndarray] = None
    status: str = "ok"
    z_star: Optional[np.ndarray] = None

    @property
    def error_norms(self):
        """``||e(k)||`` at every section crossing."""
        return np.array([np.linalg.norm(z - self.z_star) for _, _, z in self.crossings])

    def rho(self, vhc, n):
        return np.array([rho(vhc, xi[:n]) for xi in self.x])

    def rho_dot(self, vhc, n):
        return np.array([rho_dot(vhc, xi[:n], xi[n:]) for xi in self.x])


class _Recorder:
    def __init__(self):
        self.t, self.x, self.flag = [], [], []

    def add(self, t, x, flag=0):
        if self.t and t <= self.t[-1]:
            if flag and t == self.t[-1]:
                self.x[-1], self.flag[-1] = np.array(x, dtype=float), flag
            return
        self.t.append(float(t))
        self.x.append(np.array(x, dtype=float))
        self.flag.append(flag)


def closed_loop_rhs(sys, vhc, tol_reg=TOL_REG):
    """Vector field of the system under the constraint controller alone."""
    n = sys.n

    def f(t, x):
        q, qd = x[:n], x[n:]
        qdd, _, _ = closed_loop_accel(sys, vhc, q, qd, tol_reg)
        return np.concatenate([qd, qdd])

    return f


def _step_until(f, t0, x0, t_bound, event, rtol, atol, recorder=None, max_step=np.inf):
    """Integrate until ``event(t_old, x_old, t_new, x_new, dense)`` returns a hit time.

    Returns the hit time, or ``None`` when ``t_bound`` is reached first. The
    event callback stores the hit state itself.
    """
    if t_bound <= t0:
        return None
    solver = DOP853(f, t0, np.asarray(x0, dtype=float), t_bound, rtol=rtol, atol=atol, max_step=max_step)
    t_old, x_old = t0, solver.y.copy()
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise NumericError(f"integration failed at t={solver.t:.6g}: {msg}")
        t_new, x_new = solver.t, solver.y.copy()
        hit = event(t_old, x_old, t_new, x_new, solver.dense_output)
        if hit is not None:
            if recorder is not None:
                dense = solver.dense_output()
                recorder.add(hit, dense(hit))
            return hit
        if recorder is not None:
            recorder.add(t_new, x_new)
        t_old, x_old = t_new, x_new
    return None


def _section_event(sys, section, x0, skip_initial=True):
    n = sys.n
    g0 = section.signed_offset(x0[n - 1])
    state = {"armed": not (skip_initial and -ON_SECTION_TOL <= g0 < REARM_BAND)}

    def g(x):
        return section.signed_offset(x[n - 1])

    def event(t_old, x_old, t_new, x_new, dense_factory):
        g_old, g_new = g(x_old), g(x_new)
        if not state["armed"]:
            state["armed"] = abs(g_new) > REARM_BAND
            return None
        if g_old < 0.0 <= g_new and g_new - g_old < np.pi:
            dense = dense_factory()
            if g_new == 0.0:
                th = t_new
            else:
                th = brentq(lambda s: g(dense(s)), t_old, t_new, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            xh = dense(th)
            # polish so that |q2 - q2*| is at round-off level
            for _ in range(3):
                gd = g(xh)
                v = section.direction * xh[2 * n - 1]
                if v <= 0.0 or abs(gd) < 1e-13:
                    break
                th = th - gd / v
                xh = dense(th)
            if section.direction * xh[2 * n - 1] < 0.0:
                return None
            event.x = xh
            return th
        return None

    return event


def integrate_to_section(sys, vhc, section, x0, t_max=50.0, t0=0.0, rtol=RTOL, atol=ATOL,
                         skip_initial=True, recorder=None, tol_reg=TOL_REG):
    """Integrate the constraint-controlled system to the next section crossing.

    A start on the section is not reported; the next crossing is.
    Raises NoCrossingError if no crossing happens before ``t0 + t_max``.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (2 * sys.n,) or not np.all(np.isfinite(x0)):
        raise InvalidInputError(f"invalid initial state {x0}")
    hit = _crossing(sys, vhc, section, x0, t0, t0 + t_max, rtol, atol, skip_initial, recorder, tol_reg)
    if hit is None:
        raise NoCrossingError(f"no section crossing within {t_max} s")
    return hit


def _crossing(sys, vhc, section, x0, t0, t_bound, rtol, atol, skip_initial, recorder, tol_reg):
    f = closed_loop_rhs(sys, vhc, tol_reg)
    event = _section_event(sys, section, x0, skip_initial)
    th = _step_until(f, t0, x0, t_bound, event, rtol, atol, recorder)
    if th is None:
        return None
    x = event.x.copy()
    # snap onto the section sheet the state is on
    turns = np.round((x[sys.n - 1] - section.q2_star) / (2.0 * np.pi))
    x[sys.n - 1] = section.q2_star + 2.0 * np.pi * turns
    return Crossing(th, x, section_state(sys, x))


def apply_impulse_jump(sys, q, qd_minus, impulse):
    """Post-impulse velocities ``qd + M(q)^-1 [I; 0]``."""
    q = np.asarray(q, dtype=float)
    M = np.asarray(sys.mass_matrix(q), dtype=float)
    rhs = np.zeros(sys.n)
    rhs[:-1] = np.atleast_1d(impulse)
    try:
        c = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ModelError(f"mass matrix is not positive definite at q={q}") from None
    dv = np.linalg.solve(c.T, np.linalg.solve(c, rhs))
    return np.asarray(qd_minus, dtype=float) + dv


def high_gain_burst(sys, vhc, x, q1d_des, Lam=1.0, mu=0.005, eps3=1e-4, t0=0.0,
                    rtol=RTOL, atol=ATOL, recorder=None, tol_reg=TOL_REG):
    """Drive the active velocities to ``q1d_des`` with a short high-gain input.

    Returns ``(x_after, duration)``.
    """
    n = sys.n
    m = n - 1
    x = np.asarray(x, dtype=float)
    q1d_des = np.atleast_1d(np.asarray(q1d_des, dtype=float))
    lam = np.broadcast_to(np.asarray(Lam, dtype=float).reshape(-1) if np.ndim(Lam) < 2 else np.diag(Lam), (m,)).copy()
    if not mu > 0.0 or np.any(lam <= 0.0):
        raise InvalidInputError("mu and Lambda must be positive")
    if np.linalg.norm(q1d_des - x[n:n + m]) < eps3:
        return x.copy(), 0.0
    gain = lam / mu

    def f(t, y):
        q, qd = y[:n], y[n:]
        M = np.asarray(sys.mass_matrix(q), dtype=float)
        terms = _terms_from(M, np.asarray(sys.bias(q, qd), dtype=float), m)
        _control(vhc, terms, M, q, qd, tol_reg)  # regularity guard
        # u = u_c + u_hg collapses to B^-1 [gain (q1d_des - q1d) - A]
        u = np.linalg.solve(terms.B, gain * (q1d_des - qd[:m]) - terms.A)
        qdd = np.empty(n)
        qdd[:m] = terms.A + terms.B @ u
        qdd[m] = terms.C + terms.D @ u
        return np.concatenate([qd, qdd])

    def event(t_old, x_old, t_new, x_new, dense_factory):
        def r(y):
            return np.linalg.norm(q1d_des - y[n:n + m]) - eps3

        if r(x_new) <= 0.0:
            dense = dense_factory()
            th = brentq(lambda s: r(dense(s)), t_old, t_new, xtol=1e-15) if r(x_old) > 0.0 else t_old
            event.x = dense(th)
            return th
        return None

    t_limit = 100.0 * mu * float(np.max(1.0 / lam))
    th = _step_until(f, t0, x, t0 + t_limit, event, rtol, atol, recorder)
    if th is None:
        raise ConvergenceError(f"high-gain burst did not converge within {t_limit:.3g} s")
    return event.x.copy(), th - t0


def _clamped_impulse(sys, section, x, impulse, max_halvings=40):
    """Scale the impulse back until the post-jump passive velocity stays on the section."""
    n = sys.n
    q, qd = x[:n], x[n:]
    scale = 1.0
    for _ in range(max_halvings + 1):
        qd_plus = apply_impulse_jump(sys, q, qd, scale * impulse)
        if section.direction * qd_plus[-1] >= 0.0:
            return scale * impulse, qd_plus, scale < 1.0
        scale *= 0.5
    return np.zeros_like(impulse), qd.copy(), True


def simulate_closed_loop(sys, vhc, section, K, z_star, x0, t_end, mode="jump", Lam=1.0, mu=0.005,
                         eps3=1e-4, divergence_bound=10.0, rtol=RTOL, atol=ATOL, tol_reg=TOL_REG):
    """Simulate the constraint controller plus impulses ``I(k) = K e(k)`` on the section.

    ``mode`` is ``"jump"`` (instantaneous velocity change) or ``"high-gain"``
    (continuous burst). An initial state lying on the section counts as
    crossing ``k = 0``. Errors raised mid-run carry the partial history in
    their ``trajectory`` attribute.
    """
    if mode not in ("jump", "high-gain"):
        raise InvalidInputError(f"unknown impulse mode {mode!r}")
    n = sys.n
    K = np.atleast_2d(np.asarray(K, dtype=float))
    z_star = np.asarray(z_star, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (2 * n,) or not np.all(np.isfinite(x)):
        raise InvalidInputError(f"invalid initial state {x0}")
    rec = _Recorder()
    rec.add(0.0, x)
    events, crossings = [], []
    t, k = 0.0, 0
    pending = Crossing(0.0, x.copy(), section_state(sys, x)) if section.contains(x, n) else None
    if pending is None:
        k = 1

    def finish(status):
        return HybridTrajectory(np.array(rec.t), np.array(rec.x), events, crossings,
                                np.array(rec.flag), status, z_star)

    try:
        while True:
            if pending is None:
                pending = _crossing(sys, vhc, section, x, t, t_end, rtol, atol, True, rec, tol_reg)
                if pending is None:
                    break
            t, x, z = pending.t, pending.x, pending.z
            pending = None
            crossings.append((k, t, z.copy()))
            e = z - z_star
            if np.linalg.norm(e) > divergence_bound:
                traj = finish("diverged")
                raise OrbitEscapeError(f"section error {np.linalg.norm(e):.3g} exceeds bound at k={k}", traj)
            impulse = K @ e
            impulse, qd_plus, clamped = _clamped_impulse(sys, section, x, impulse)
            if mode == "jump":
                x_plus = np.concatenate([x[:n], qd_plus])
                duration = 0.0
            else:
                q1d_des = qd_plus[: n - 1]  # equals q1d + B K e
                x_plus, duration = high_gain_burst(sys, vhc, x, q1d_des, Lam, mu, eps3, t, rtol, atol, rec, tol_reg)
            events.append(ImpulseEvent(k, t, z, section_state(sys, x_plus), impulse, mode, clamped, duration))
            t = t + duration
            x = x_plus
            rec.add(t, x, 1)
            k += 1
            if t >= t_end:
                break
    except OrbitEscapeError:
        raise
    except ICPMError as exc:
        # keep what was simulated so callers can still write it out
        exc.trajectory = finish("failed")
        raise
    return finish("ok")
