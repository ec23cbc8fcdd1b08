"""Virtual holonomic constraints ``q1 = Phi(q2)`` and their linearizing controller."""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import _as_config, _terms_from
from .exceptions import InvalidInputError, SingularVHCError

__all__ = [
    "VhcSpec",
    "linear_vhc",
    "rho",
    "rho_dot",
    "regularity",
    "vhc_controller",
    "closed_loop_accel",
    "check_vhc",
    "TOL_REG",
]

TOL_REG = 1e-6


def _spd(name, K, m):
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape == (1, 1) and m > 1:
        K = K[0, 0] * np.eye(m)
    if K.shape != (m, m):
        raise InvalidInputError(f"{name} must be ({m}, {m}), got {K.shape}")
    if not np.allclose(K, K.T) or np.min(np.linalg.eigvalsh(K)) <= 0.0:
        raise InvalidInputError(f"{name} must be symmetric positive definite")
    return K


@dataclass(frozen=True)
class VhcSpec:
    """Constraint ``rho(q) = q1 - Phi(q2)`` together with its PD gains."""

    phi: Callable
    dphi: Callable
    d2phi: Callable
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(self.phi(0.0)).size
        object.__setattr__(self, "kp", _spd("kp", self.kp, m))
        object.__setattr__(self, "kd", _spd("kd", self.kd, m))

    @property
    def m(self):
        return self.kp.shape[0]

    def lift(self, q2, q2dot):
        """Full state on the constraint manifold for passive state ``(q2, q2dot)``."""
        q2 = float(q2)
        q1 = np.atleast_1d(self.phi(q2))
        q1d = np.atleast_1d(self.dphi(q2)) * q2dot
        return np.concatenate([q1, [q2], q1d, [q2dot]])


def linear_vhc(slopes, kp, kd):
    """VHC ``q1 = slopes * q2``."""
    s = np.atleast_1d(np.asarray(slopes, dtype=float))
    zero = np.zeros_like(s)
    return VhcSpec(lambda q2: s * q2, lambda q2: s.copy(), lambda q2: zero.copy(), kp, kd)


def rho(vhc, q):
    q = np.asarray(q, dtype=float)
    return q[:-1] - np.atleast_1d(vhc.phi(q[-1]))


def rho_dot(vhc, q, qd):
    q, qd = np.asarray(q, dtype=float), np.asarray(qd, dtype=float)
    return qd[:-1] - np.atleast_1d(vhc.dphi(q[-1])) * qd[-1]


def regularity(sys, vhc, q2):
    """``M12' Phi'(q2) + M22`` evaluated on the constraint ``q1 = Phi(q2)``.

    The controller is undefined where this vanishes.
    """
    q = np.concatenate([np.atleast_1d(vhc.phi(q2)), [q2]])
    M = np.asarray(sys.mass_matrix(q), dtype=float)
    m = sys.n - 1
    return float(M[:m, m] @ np.atleast_1d(vhc.dphi(q2)) + M[m, m])


def _control(vhc, terms, M, q, qd, tol_reg):
    m = q.size - 1
    q2, q2d = q[-1], qd[-1]
    p = np.atleast_1d(vhc.dphi(q2))
    reg = M[:m, m] @ p + M[m, m]
    if abs(reg) < tol_reg:
        raise SingularVHCError(f"constraint controller is singular at q2={q2:.6g} (M12'Phi'+M22={reg:.3g})", q2=q2)
    pp = np.atleast_1d(vhc.d2phi(q2))
    r = q[:-1] - np.atleast_1d(vhc.phi(q2))
    rd = qd[:-1] - p * q2d
    rhs = -terms.A + pp * q2d**2 + p * terms.C - vhc.kp @ r - vhc.kd @ rd
    return np.linalg.solve(terms.B - np.outer(p, terms.D), rhs)


def vhc_controller(sys, vhc, q, qd, tol_reg=TOL_REG):
    """Feedback-linearizing input giving ``rho'' + kd rho' + kp rho = 0``.

    Raises SingularVHCError within ``tol_reg`` of the singular surface.
    """
    q = _as_config(sys, q)
    qd = np.asarray(qd, dtype=float)
    M = np.asarray(sys.mass_matrix(q), dtype=float)
    terms = _terms_from(M, np.asarray(sys.bias(q, qd), dtype=float), sys.n - 1)
    return _control(vhc, terms, M, q, qd, tol_reg)


def closed_loop_accel(sys, vhc, q, qd, tol_reg=TOL_REG):
    """Return ``(qdd, u_c, terms)`` for the constraint-controlled system."""
    M = np.asarray(sys.mass_matrix(q), dtype=float)
    terms = _terms_from(M, np.asarray(sys.bias(q, qd), dtype=float), sys.n - 1)
    u = _control(vhc, terms, M, q, qd, tol_reg)
    qdd = np.empty(q.size)
    qdd[:-1] = terms.A + terms.B @ u
    qdd[-1] = terms.C + terms.D @ u
    return qdd, u, terms


def check_vhc(vhc, center=0.0, n_samples=100, rng=None, h=1e-5):
    """Worst-case periodicity, oddness and derivative-consistency errors."""
    rng = np.random.default_rng(rng)
    out = dict(periodicity=0.0, oddness=0.0, dphi_rel=0.0, d2phi_rel=0.0)
    for q2 in rng.uniform(-np.pi, np.pi, n_samples):
        phi = np.atleast_1d(vhc.phi(q2))
        out["periodicity"] = max(out["periodicity"], np.max(np.abs(np.atleast_1d(vhc.phi(q2 + 2 * np.pi)) - phi)))
        odd = np.atleast_1d(vhc.phi(center + q2)) + np.atleast_1d(vhc.phi(center - q2))
        out["oddness"] = max(out["oddness"], np.max(np.abs(odd)))
        for key, f, df in (("dphi_rel", vhc.phi, vhc.dphi), ("d2phi_rel", vhc.dphi, vhc.d2phi)):
            fd = (np.atleast_1d(f(q2 + h)) - np.atleast_1d(f(q2 - h))) / (2 * h)
            exact = np.atleast_1d(df(q2))
            err = np.max(np.abs(fd - exact)) / max(1.0, np.max(np.abs(exact)))
            out[key] = max(out[key], err)
    return out
