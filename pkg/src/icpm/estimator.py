"""Scikit-learn style front end for the impulse-controlled return-map design."""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidInputError
from .hybrid_sim import ATOL, RTOL, SectionSpec, lift_section_state, simulate_closed_loop
from .lqr import LqrProblem, certify, dare_solve, stabilizability_check
from .models import DEFAULT_ANCHORS, DEFAULT_Q2_RANGES, build_model
from .poincare import find_fixed_point, floquet, linearize
from .reduction import build_reduced, orbit_from_anchor, orbit_from_energy
from .vhc import TOL_REG

__all__ = ["ICPMController"]


class ICPMController(TransformerMixin, BaseEstimator):
    """Orbit stabilizer built from impulses applied on a Poincare section.

    ``fit`` runs the whole design: reduced dynamics, fixed point of the
    return map, finite-difference linearization and an LQR gain. Training
    data are not needed; ``X`` is accepted and ignored so the estimator can
    sit in a pipeline. ``transform`` maps section states to impulses
    ``K (z - z*)``.

    Parameters
    ----------
    model : str or tuple
        Registered model name, or a ``(system, vhc)`` pair.
    params : dict, optional
        Parameter overrides for a named model.
    anchor : (float, float), optional
        Passive state ``(q2, q2')`` on the desired orbit. Ignored when
        ``c_d`` is given; defaults to the model's registered anchor.
    c_d : float, optional
        Energy level of the desired orbit.
    q2_star, direction : float, int
        Section ``q2 = q2_star`` crossed with ``sign(q2') = direction``.
    q2_range : (float, float), None or "auto"
        Interval for the reduced dynamics tables. ``None`` means one full
        turn; ``"auto"`` takes the model's registered range.
    Q, R : array-like, optional
        LQR weights, identity by default.
    gain : array-like, optional
        Use this impulse gain instead of solving the Riccati equation.
    eps1, eps2 : float
        Finite-difference steps for the state and impulse Jacobians.
    """

    def __init__(self, model="cart-pendulum", params=None, anchor=None, c_d=None, q2_star=0.0,
                 direction=1, q2_range="auto", Q=None, R=None, gain=None, eps1=1e-5, eps2=1e-5,
                 central=False, rtol=RTOL, atol=ATOL, tol_reg=TOL_REG, quad_tol=1e-10,
                 dare_tol=1e-9, tol_rank=1e-8, fixed_point_tol=1e-9):
        self.model = model
        self.params = params
        self.anchor = anchor
        self.c_d = c_d
        self.q2_star = q2_star
        self.direction = direction
        self.q2_range = q2_range
        self.Q = Q
        self.R = R
        self.gain = gain
        self.eps1 = eps1
        self.eps2 = eps2
        self.central = central
        self.rtol = rtol
        self.atol = atol
        self.tol_reg = tol_reg
        self.quad_tol = quad_tol
        self.dare_tol = dare_tol
        self.tol_rank = tol_rank
        self.fixed_point_tol = fixed_point_tol

    def _build(self):
        if isinstance(self.model, str):
            system, vhc = build_model(self.model, self.params)
            anchor = DEFAULT_ANCHORS.get(self.model)
            q2_range = DEFAULT_Q2_RANGES.get(self.model)
        else:
            try:
                system, vhc = self.model
            except (TypeError, ValueError):
                raise InvalidInputError("model must be a name or a (system, vhc) pair") from None
            anchor, q2_range = None, None
        if self.anchor is not None:
            anchor = tuple(float(a) for a in self.anchor)
        if not (isinstance(self.q2_range, str) and self.q2_range == "auto"):
            q2_range = self.q2_range
        return system, vhc, anchor, q2_range

    def fit(self, X=None, y=None):
        system, vhc, anchor, q2_range = self._build()
        kw = dict(rtol=self.rtol, atol=self.atol, tol_reg=self.tol_reg)
        self.system_, self.vhc_ = system, vhc
        self.section_ = SectionSpec(float(self.q2_star), int(self.direction))
        self.reduced_ = build_reduced(system, vhc, q2_range, quad_tol=self.quad_tol, tol_reg=self.tol_reg)
        if self.c_d is not None:
            self.orbit_ = orbit_from_energy(self.reduced_, self.c_d)
        elif anchor is not None:
            self.orbit_ = orbit_from_anchor(self.reduced_, *anchor)
        else:
            raise InvalidInputError("either anchor or c_d must be given")
        self.z_star_ = find_fixed_point(system, vhc, self.section_, self.reduced_, self.orbit_,
                                        tol=self.fixed_point_tol, **kw)
        lin = linearize(system, vhc, self.section_, self.z_star_, self.eps1, self.eps2, self.central, **kw)
        self.linearization_ = lin
        self.A_, self.B_ = lin.A, lin.B
        self.floquet_ = floquet(lin.A)
        self.stabilizability_ = stabilizability_check(lin.A, lin.B, self.tol_rank)
        if self.gain is None:
            self.P_, self.K_ = dare_solve(LqrProblem(lin.A, lin.B, self.Q, self.R), tol=self.dare_tol)
        else:
            K = np.atleast_2d(np.asarray(self.gain, dtype=float))
            if K.shape != (lin.B.shape[1], lin.A.shape[0]):
                raise InvalidInputError(f"gain has shape {K.shape}, expected {(lin.B.shape[1], lin.A.shape[0])}")
            self.P_, self.K_ = None, K
        cert = certify(lin.A, lin.B, self.K_)
        self.closed_loop_eigvals_ = cert["eigenvalues"]
        self.spectral_radius_ = cert["spectral_radius"]
        self.stable_ = cert["stable"]
        self.n_features_in_ = len(self.z_star_)
        return self

    def transform(self, X):
        """Impulses for section states ``X`` (rows in natural order)."""
        check_is_fitted(self, "K_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"expected {self.n_features_in_} section coordinates, got {X.shape[1]}")
        return (X - self.z_star_) @ self.K_.T

    def predict(self, X):
        """Next section state under the linearized closed loop."""
        check_is_fitted(self, "K_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"expected {self.n_features_in_} section coordinates, got {X.shape[1]}")
        E = X - self.z_star_
        return self.z_star_ + E @ (self.A_ + self.B_ @ self.K_).T

    def simulate(self, x0=None, t_end=30.0, mode="jump", Lam=1.0, mu=0.005, eps3=1e-4,
                 divergence_bound=10.0, natural=True):
        """Closed-loop run from ``x0`` (full state, natural order by default).

        Without ``x0`` the run starts on the fixed point.
        """
        check_is_fitted(self, "K_")
        sys = self.system_
        if x0 is None:
            x = lift_section_state(sys, self.section_, self.z_star_)
        else:
            x = np.asarray(x0, dtype=float)
            if x.shape != (2 * sys.n,):
                raise InvalidInputError(f"initial state must have {2 * sys.n} entries")
            x = sys.from_natural(x) if natural else x
        return simulate_closed_loop(sys, self.vhc_, self.section_, self.K_, self.z_star_, x, t_end, mode=mode,
                                    Lam=Lam, mu=mu, eps3=eps3, divergence_bound=divergence_bound,
                                    rtol=self.rtol, atol=self.atol, tol_reg=self.tol_reg)
