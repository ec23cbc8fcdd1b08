"""Euler-Lagrange models with a single passive revolute joint.

Coordinates are ordered ``q = [q1; q2]``: the ``n - 1`` actuated coordinates
first and the passive angle ``q2`` last. The equations of motion are::

    M11 q1'' + M12 q2'' + h1 = u
    M12' q1'' + M22 q2'' + h2 = 0

``potential`` is the physical potential energy, i.e. the bias vector contains
``+dF/dq`` and ``T + F`` is conserved when ``u = 0``.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import InvalidInputError, ModelError

__all__ = [
    "MechanicalSystem",
    "DynamicsTerms",
    "partition_mass",
    "dynamics_terms",
    "forward_accel",
    "lagrangian_bias",
    "total_energy",
    "wrap_angle",
    "check_model",
]


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


@dataclass(frozen=True)
class MechanicalSystem:
    """Underactuated mechanical system with the passive joint last.

    Parameters
    ----------
    n : int
        Number of degrees of freedom (``>= 2``).
    mass_matrix : callable
        ``q -> M(q)``, symmetric positive definite ``(n, n)``.
    bias : callable
        ``(q, qd) -> h``, Coriolis, centrifugal and gravity forces.
    potential : callable
        ``q -> F(q)``.
    symmetry_center : array_like
        Point about which ``M`` and ``F`` are even.
    natural_order : sequence of int, optional
        Permutation listing internal coordinate indices in the order the
        model is usually written in. Used for section states and for
        user-facing initial conditions. Defaults to the identity.
    names : sequence of str, optional
        Coordinate names in internal order.
    """

    n: int
    mass_matrix: Callable
    bias: Callable
    potential: Callable
    symmetry_center: np.ndarray
    natural_order: Optional[Sequence[int]] = None
    names: Optional[Sequence[str]] = None
    label: str = "system"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidInputError(f"n must be an integer >= 2, got {self.n}")
        center = np.asarray(self.symmetry_center, dtype=float)
        if center.shape != (self.n,):
            raise InvalidInputError("symmetry_center must have shape (n,)")
        object.__setattr__(self, "symmetry_center", center)
        order = tuple(range(self.n)) if self.natural_order is None else tuple(int(i) for i in self.natural_order)
        if sorted(order) != list(range(self.n)):
            raise InvalidInputError(f"natural_order must be a permutation of range({self.n})")
        object.__setattr__(self, "natural_order", order)
        if self.names is None:
            names = tuple(f"q{i}" for i in range(self.n))
        else:
            names = tuple(self.names)
            if len(names) != self.n:
                raise InvalidInputError("names must have length n")
        object.__setattr__(self, "names", names)

    @property
    def n_active(self):
        return self.n - 1

    def to_natural(self, x):
        """Reorder a full state ``[q; qd]`` from internal to natural order."""
        x = np.asarray(x, dtype=float)
        idx = np.asarray(self.natural_order)
        return np.concatenate([x[..., idx], x[..., self.n + idx]], axis=-1)

    def from_natural(self, x):
        """Inverse of :meth:`to_natural`."""
        x = np.asarray(x, dtype=float)
        inv = np.argsort(self.natural_order)
        return np.concatenate([x[..., inv], x[..., self.n + inv]], axis=-1)


@dataclass(frozen=True)
class DynamicsTerms:
    """Reduced coefficients with ``q1'' = A + B u`` and ``q2'' = C + D u``."""

    A: np.ndarray
    B: np.ndarray
    C: float
    D: np.ndarray


def _as_config(sys, q):
    q = np.asarray(q, dtype=float)
    if q.shape != (sys.n,):
        raise InvalidInputError(f"expected configuration of shape ({sys.n},), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InvalidInputError(f"non-finite configuration {q}")
    return q


def partition_mass(sys, q):
    """Return the blocks ``(M11, M12, M22)`` of ``M(q)``.

    Raises ModelError when ``M(q)`` is not symmetric positive definite.
    """
    q = _as_config(sys, q)
    M = np.asarray(sys.mass_matrix(q), dtype=float)
    if M.shape != (sys.n, sys.n):
        raise ModelError(f"mass matrix has shape {M.shape}, expected ({sys.n}, {sys.n})")
    if np.max(np.abs(M - M.T)) > 1e-10 * max(1.0, np.max(np.abs(M))):
        raise ModelError(f"mass matrix is not symmetric at q={q}")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ModelError(f"mass matrix is not positive definite at q={q}") from None
    m = sys.n - 1
    return M[:m, :m], M[:m, m], float(M[m, m])


def _terms_from(M, h, m):
    M11, M12, M22 = M[:m, :m], M[:m, m], M[m, m]
    h1, h2 = h[:m], h[m]
    if not M22 > 0.0:
        raise ModelError(f"M22 must be positive, got {M22}")
    try:
        B = np.linalg.inv(M11 - np.outer(M12, M12) / M22)
    except np.linalg.LinAlgError:
        raise ModelError("singular Schur complement of the mass matrix") from None
    A = B @ (M12 * h2 - h1 * M22) / M22
    D = -(M12 @ B) / M22
    C = -(M12 @ A + h2) / M22
    return DynamicsTerms(A, B, float(C), D)


def dynamics_terms(sys, q, qd):
    """Evaluate ``A, B, C, D`` at ``(q, qd)``."""
    q = _as_config(sys, q)
    qd = np.asarray(qd, dtype=float)
    M = np.asarray(sys.mass_matrix(q), dtype=float)
    h = np.asarray(sys.bias(q, qd), dtype=float)
    return _terms_from(M, h, sys.n - 1)


def forward_accel(sys, q, qd, u):
    """Generalized accelerations under actuator input ``u``."""
    t = dynamics_terms(sys, q, qd)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return np.concatenate([t.A + t.B @ u, [t.C + t.D @ u]])


def lagrangian_bias(mass_partials, potential_gradient):
    """Build ``h(q, qd)`` from the partial derivatives of ``M`` and ``F``.

    ``mass_partials(q)`` returns an array ``dM`` of shape ``(n, n, n)`` with
    ``dM[k] = dM/dq_k``. Uses Christoffel symbols of the first kind.
    """

    def bias(q, qd):
        dM = mass_partials(q)
        qd = np.asarray(qd, dtype=float)
        # h_i = sum_jk (dM_ij/dq_k - 1/2 dM_jk/dq_i) qd_j qd_k
        c = np.einsum("kij,j,k->i", dM, qd, qd) - 0.5 * np.einsum("ijk,j,k->i", dM, qd, qd)
        return c + potential_gradient(q)

    return bias


def total_energy(sys, q, qd):
    """Kinetic plus potential energy; conserved when ``u = 0``."""
    qd = np.asarray(qd, dtype=float)
    return 0.5 * qd @ np.asarray(sys.mass_matrix(q)) @ qd + float(sys.potential(q))


def check_model(sys, n_samples=100, rng=None, scale=np.pi):
    """Sample configurations and report worst-case model consistency errors.

    Returns a dict with the maximum asymmetry of ``M``, the minimum
    eigenvalue of ``M``, the worst even-symmetry violation of ``M`` and
    ``F`` about ``symmetry_center`` and the worst ``2 pi`` periodicity
    violation in ``q2``.
    """
    rng = np.random.default_rng(rng)
    qbar = sys.symmetry_center
    shift = np.zeros(sys.n)
    shift[-1] = 2.0 * np.pi
    out = dict(asymmetry=0.0, min_eig=np.inf, mass_even=0.0, potential_even=0.0, periodicity=0.0)
    for _ in range(n_samples):
        q = rng.uniform(-scale, scale, sys.n)
        qd = rng.uniform(-1.0, 1.0, sys.n)
        M = np.asarray(sys.mass_matrix(q))
        out["asymmetry"] = max(out["asymmetry"], np.max(np.abs(M - M.T)))
        out["min_eig"] = min(out["min_eig"], np.min(np.linalg.eigvalsh(0.5 * (M + M.T))))
        Mp, Mm = sys.mass_matrix(qbar + q), sys.mass_matrix(qbar - q)
        out["mass_even"] = max(out["mass_even"], np.max(np.abs(Mp - Mm)))
        out["potential_even"] = max(
            out["potential_even"], abs(sys.potential(qbar + q) - sys.potential(qbar - q))
        )
        per = max(
            np.max(np.abs(sys.mass_matrix(q + shift) - M)),
            np.max(np.abs(sys.bias(q + shift, qd) - sys.bias(q, qd))),
            abs(sys.potential(q + shift) - sys.potential(q)),
        )
        out["periodicity"] = max(out["periodicity"], per)
    return out
