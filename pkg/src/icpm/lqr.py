"""Discrete LQR synthesis for the impulse gain and stability certification."""
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError, InvalidWeightsError, NumericError

__all__ = [
    "LqrProblem",
    "controllability_matrix",
    "stabilizability_check",
    "dare_residual",
    "dare_solve",
    "certify",
]


@dataclass(frozen=True)
class LqrProblem:
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray = None
    R: np.ndarray = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        nx, nu = B.shape
        if A.shape != (nx, nx):
            raise InvalidInputError(f"A has shape {A.shape}, B has shape {B.shape}")
        Q = np.eye(nx) if self.Q is None else np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.eye(nu) if self.R is None else np.atleast_2d(np.asarray(self.R, dtype=float))
        if Q.shape != (nx, nx) or R.shape != (nu, nu):
            raise InvalidInputError("weight shapes do not match the system")
        if not np.allclose(Q, Q.T) or np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise InvalidWeightsError("Q must be symmetric positive semidefinite")
        if not np.allclose(R, R.T) or np.min(np.linalg.eigvalsh(R)) <= 0.0:
            raise InvalidWeightsError("R must be symmetric positive definite")
        for name, val in (("A", A), ("B", B), ("Q", Q), ("R", R)):
            object.__setattr__(self, name, val)


def controllability_matrix(A, B):
    A = np.atleast_2d(A)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def _rank(X, tol):
    s = np.linalg.svd(X, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def stabilizability_check(A, B, tol_rank=1e-8):
    """Controllability by numeric rank and stabilizability by the PBH test.

    Returns a dict with ``controllable``, ``stabilizable`` and the list of
    ``uncontrollable_modes`` (eigenvalues failing the PBH rank test).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    nx = A.shape[0]
    controllable = _rank(controllability_matrix(A, B), tol_rank) == nx
    bad = []
    for lam in np.linalg.eigvals(A):
        pbh = np.hstack([lam * np.eye(nx) - A, B])
        if _rank(pbh, tol_rank) < nx:
            bad.append(complex(lam))
    stabilizable = all(abs(lam) < 1.0 for lam in bad)
    return {"controllable": controllable, "stabilizable": stabilizable, "uncontrollable_modes": bad}


def dare_residual(A, B, Q, R, P):
    G = R + B.T @ P @ B
    return P - (A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(G, B.T @ P @ A) + Q)


def _sda(A, B, Q, R, max_iter=100, tol=1e-14):
    # structure-preserving doubling; H_k converges quadratically to P
    nx = A.shape[0]
    Ak, Gk, Hk = A.copy(), B @ np.linalg.solve(R, B.T), Q.copy()
    I = np.eye(nx)
    for _ in range(max_iter):
        W = I + Gk @ Hk
        WA = np.linalg.solve(W, Ak)
        WG = np.linalg.solve(W, Gk)
        H_new = Hk + Ak.T @ Hk @ WA
        Gk = Gk + Ak @ WG @ Ak.T
        Ak = Ak @ WA
        H_new = 0.5 * (H_new + H_new.T)
        done = np.linalg.norm(H_new - Hk, 1) <= tol * max(1.0, np.linalg.norm(H_new, 1))
        Hk = H_new
        if not np.all(np.isfinite(Hk)):
            return None
        if done:
            return Hk
    return Hk


def _riccati_step(A, B, Q, R, P):
    G = R + B.T @ P @ B
    P = A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(G, B.T @ P @ A) + Q
    return 0.5 * (P + P.T)


def dare_solve(prob, tol=1e-9, max_iter=10_000):
    """Solve the discrete Riccati equation and return ``(P, K)``.

    ``K = -(R + B'PB)^-1 B'PA`` so the closed loop is ``A + B K``.
    Doubling is tried first; plain Riccati iteration is the fallback.
    Convergence assumes ``(A, B)`` stabilizable and ``(A, Q^1/2)`` detectable.
    """
    A, B, Q, R = prob.A, prob.B, prob.Q, prob.R
    with np.errstate(over="ignore", invalid="ignore"):
        P = _sda(A, B, Q, R)
    if P is None or not np.all(np.isfinite(P)) or np.linalg.norm(dare_residual(A, B, Q, R, P)) > tol:
        P = Q.copy()
        for _ in range(max_iter):
            with np.errstate(over="ignore", invalid="ignore"):
                P_new = _riccati_step(A, B, Q, R, P)
            if not np.all(np.isfinite(P_new)):
                raise NumericError("Riccati iteration diverged")
            if np.linalg.norm(P_new - P) <= 1e-14 * max(1.0, np.linalg.norm(P_new)):
                P = P_new
                break
            P = P_new
        else:
            raise NumericError(f"Riccati iteration did not converge in {max_iter} steps")
    # a couple of fixed-point sweeps polish round-off from doubling
    for _ in range(3):
        if np.linalg.norm(dare_residual(A, B, Q, R, P)) <= tol * 1e-3:
            break
        P = _riccati_step(A, B, Q, R, P)
    G = R + B.T @ P @ B
    if np.min(np.linalg.eigvalsh(0.5 * (G + G.T))) <= 0.0:
        raise InvalidWeightsError("R + B'PB is not positive definite")
    res = np.linalg.norm(dare_residual(A, B, Q, R, P))
    if res > tol:
        raise NumericError(f"Riccati residual {res:.3g} exceeds {tol:g}")
    K = -np.linalg.solve(G, B.T @ P @ A)
    return P, K


def certify(A, B, K):
    """Closed-loop spectrum of ``A + B K`` and the Schur-stability verdict."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    ev = np.linalg.eigvals(A + B @ K)
    ev = ev[np.lexsort((-ev.imag, -np.abs(ev)))]
    radius = float(np.max(np.abs(ev)))
    return {"eigenvalues": ev, "spectral_radius": radius, "stable": radius < 1.0}
