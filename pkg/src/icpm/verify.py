"""Acceptance checks: reference matrices, closed-loop behaviour and property suite.

Each check returns a :class:`CheckResult`; :func:`run_checks` runs a
selection and is what the ``verify`` command prints.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import linear_sum_assignment

from .dynamics import check_model, forward_accel
from .estimator import ICPMController
from .exceptions import ICPMError
from .hybrid_sim import apply_impulse_jump, closed_loop_rhs, high_gain_burst, lift_section_state
from .lqr import LqrProblem, certify, dare_residual, dare_solve, stabilizability_check
from .models import cart_pendulum, tiptoebot
from .poincare import fixed_point_residual, linearize
from .reduction import orbit_distance, orbit_samples
from .vhc import check_vhc, closed_loop_accel, rho, rho_dot

# reference design values, section coordinates in natural order
REFERENCE_TIPTOEBOT_A = np.array([
    [-0.380, -0.080, 1.530, 0.800, 0.050],
    [0.000, -0.460, -0.080, -0.003, 0.730],
    [1.230, 1.890, 6.120, 2.770, 4.050],
    [-3.210, -3.770, -13.360, -6.090, -8.100],
    [0.120, -0.560, 0.670, 0.280, 0.100],
])
REFERENCE_TIPTOEBOT_B = np.array([
    [1.525, -3.700, -17.700, 34.325, 0.875],
    [4.875, -8.650, 22.650, -43.850, -0.325],
]).T
REFERENCE_TIPTOEBOT_K = np.array([
    [0.028, 0.024, 0.197, 0.094, 0.138],
    [-0.034, -0.051, 0.116, -0.049, -0.055],
])
REFERENCE_TIPTOEBOT_EIGS = np.array([0.14, -0.47 + 0.73j, -0.47 - 0.73j, -0.12 + 0.56j, -0.12 - 0.56j])
REFERENCE_TIPTOEBOT_Z_STAR = np.array([0.0, 0.0, 3.0, -6.0, 0.3])

REFERENCE_CART_A = np.array([
    [0.115, 0.435, 0.600],
    [-0.510, -0.640, -2.465],
    [-0.145, 0.215, 1.325],
])
REFERENCE_CART_B = np.array([[-0.06], [1.80], [-1.09]])
REFERENCE_CART_K = np.array([[0.163, 0.288, 1.198]])
REFERENCE_CART_EIGS = np.array([0.13, -0.06 + 0.48j, -0.06 - 0.48j])

CART_OFFSET_X0 = np.array([0.1, 0.4, -0.1, -0.2])
CART_ORIGIN_X0 = np.zeros(4)
TIPTOEBOT_X0 = np.array([-0.1, 0.2, 0.05, 3.3, -6.0, 0.4])

A_TOL = 0.05
B_ABS_TOL, B_REL_TOL = 0.1, 0.02
EIG_TOL = 0.05
ORBIT_TOL = 0.05


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    detail: str = ""
    data: dict = field(default_factory=dict)

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.key} {self.title}: {self.detail}"


@lru_cache(maxsize=None)
def _design(model, g=None):
    params = {"g": g} if g is not None else None
    return ICPMController(model=model, params=params).fit()


def _b_bound(ref):
    return np.maximum(B_ABS_TOL, B_REL_TOL * np.abs(ref))


def match_spectra(computed, expected):
    """Largest distance of an optimal one-to-one pairing of two spectra."""
    computed, expected = np.asarray(computed), np.asarray(expected)
    cost = np.abs(computed[:, None] - expected[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def _fmt_eigs(ev):
    return "{" + ", ".join(f"{z.real:+.3f}{z.imag:+.3f}i" for z in np.sort_complex(np.asarray(ev))) + "}"


def check_tiptoebot_A():
    est = _design("tiptoebot")
    diff = np.abs(est.A_ - REFERENCE_TIPTOEBOT_A)
    i, j = np.unravel_index(np.argmax(diff), diff.shape)
    return CheckResult("1", "tiptoebot state Jacobian", bool(diff.max() <= A_TOL),
                       f"max|dA| = {diff.max():.4f} at ({i},{j}) (tol {A_TOL})",
                       {"A": est.A_, "max_diff": float(diff.max())})


def check_tiptoebot_B():
    est = _design("tiptoebot")
    diff = np.abs(est.B_ - REFERENCE_TIPTOEBOT_B)
    ratio = diff / _b_bound(REFERENCE_TIPTOEBOT_B)
    i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
    return CheckResult("2", "tiptoebot impulse Jacobian", bool(ratio.max() <= 1.0),
                       f"worst |dB| = {diff[i, j]:.4f} at ({i},{j}), {ratio.max():.2f}x its bound",
                       {"B": est.B_, "max_ratio": float(ratio.max())})


def check_reference_spectra():
    ev_t = np.linalg.eigvals(REFERENCE_TIPTOEBOT_A + REFERENCE_TIPTOEBOT_B @ REFERENCE_TIPTOEBOT_K)
    ev_c = np.linalg.eigvals(REFERENCE_CART_A + REFERENCE_CART_B @ REFERENCE_CART_K)
    d_t = match_spectra(ev_t, REFERENCE_TIPTOEBOT_EIGS)
    d_c = match_spectra(ev_c, REFERENCE_CART_EIGS)
    # diagnostic: the tiptoebot gain with entry (1, 2) negated
    K_flip = REFERENCE_TIPTOEBOT_K.copy()
    K_flip[1, 2] = -K_flip[1, 2]
    d_flip = match_spectra(np.linalg.eigvals(REFERENCE_TIPTOEBOT_A + REFERENCE_TIPTOEBOT_B @ K_flip),
                           REFERENCE_TIPTOEBOT_EIGS)
    detail = (f"tiptoebot {_fmt_eigs(ev_t)} dist {d_t:.3f}; cart {_fmt_eigs(ev_c)} dist {d_c:.3f} "
              f"(tol {EIG_TOL}); tiptoebot with K[1,2] negated: dist {d_flip:.3f}")
    return CheckResult("3", "closed-loop spectra of reference matrices", bool(d_t <= EIG_TOL and d_c <= EIG_TOL),
                       detail, {"tiptoebot": d_t, "cart": d_c, "tiptoebot_sign_flipped": d_flip})


def check_cart_matrices(g_values=(9.81, 1.0)):
    rows, winner, best = [], None, None
    for g in g_values:
        try:
            est = _design("cart-pendulum", g)
        except ICPMError as exc:
            rows.append(f"g={g}: design failed ({exc})")
            continue
        dA = float(np.abs(est.A_ - REFERENCE_CART_A).max())
        rB = float((np.abs(est.B_ - REFERENCE_CART_B) / _b_bound(REFERENCE_CART_B)).max())
        ok = dA <= A_TOL and rB <= 1.0
        score = max(dA / A_TOL, rB)
        if ok and winner is None:
            winner = g
        if best is None or score < best[1]:
            best = (g, score)
        rows.append(f"g={g}: max|dA| {dA:.3f}, B {rB:.2f}x bound")
    detail = "; ".join(rows)
    detail += f"; match g={winner}" if winner is not None else f"; no match, closest g={best[0]}"
    return CheckResult("4", "cart-pendulum Jacobians", winner is not None, detail,
                       {"winner": winner, "closest": best[0] if best else None})


def _settle_time(t, dist, tol=ORBIT_TOL):
    """Earliest time after which the distance stays below ``tol``."""
    bad = np.flatnonzero(dist >= tol)
    if bad.size == 0:
        return float(t[0])
    if bad[-1] == len(t) - 1:
        return np.inf
    return float(t[bad[-1] + 1])


def check_cart_from_offset(mode="high-gain", t_end=30.0):
    est = _design("cart-pendulum")
    traj = est.simulate(CART_OFFSET_X0, t_end, mode=mode, Lam=1.0, mu=0.005)
    dist = orbit_distance(est.reduced_, est.orbit_, traj.x)
    late = dist[traj.t >= 12.0]
    ok = late.size > 0 and bool(late.max() < ORBIT_TOL)
    return CheckResult("5", "cart-pendulum convergence from offset start", ok,
                       f"{mode}: max dist for t>=12 s is {late.max():.2e}, settles at "
                       f"{_settle_time(traj.t, dist):.2f} s", {"traj": traj, "dist": dist})


def check_cart_from_origin(mode="high-gain", t_end=60.0):
    est = _design("cart-pendulum")
    traj = est.simulate(CART_ORIGIN_X0, t_end, mode=mode, Lam=1.0, mu=0.005)
    dist = orbit_distance(est.reduced_, est.orbit_, traj.x)
    settle = _settle_time(traj.t, dist)
    theta_max = float(np.abs(traj.x[:, 1]).max())
    ok = settle <= t_end and theta_max < 0.61
    return CheckResult("6", "cart-pendulum convergence from the origin", bool(ok),
                       f"{mode}: settles at {settle:.2f} s, max|theta| = {theta_max:.3f} rad",
                       {"traj": traj, "dist": dist, "theta_max": theta_max})


def contraction_rate(err, start, stop):
    """Geometric-mean per-step ratio of ``err`` between two indices."""
    return float((err[stop] / err[start]) ** (1.0 / (stop - start)))


def check_tiptoebot_convergence(mode="jump", mu=1e-4, t_end=75.0, k_min=15, k_stop=30):
    est = _design("tiptoebot")
    traj = est.simulate(TIPTOEBOT_X0, t_end, mode=mode, mu=mu)
    ks = np.array([c[0] for c in traj.crossings])
    err = traj.error_norms
    tail = err[ks >= k_min]
    i0 = int(np.flatnonzero(ks == k_min)[0])
    i1 = int(np.flatnonzero(ks == k_stop)[0])
    rate = contraction_rate(err, i0, i1)
    worst_step = float(np.max(err[i0 + 1:i1 + 1] / err[i0:i1]))
    bound = est.spectral_radius_ + 0.2
    decreasing = bool(err[i1] < err[i0] and np.all(err[i0 + 1:i1 + 1] <= err[i0]))
    ok = bool(tail.max() < 1e-2 and decreasing and rate <= bound)
    return CheckResult("7", "tiptoebot section error decay", ok,
                       f"{mode}: max ||e(k)|| for k>={k_min} is {tail.max():.2e}; mean contraction over "
                       f"k={k_min}..{k_stop} is {rate:.3f} (bound {bound:.3f}); worst single step {worst_step:.3f}",
                       {"traj": traj, "errors": err, "rate": rate})


# property suite

def _models():
    return {"cart-pendulum": cart_pendulum(), "tiptoebot": tiptoebot()}


def prop_forward_dynamics(n_samples=1000, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for sys, _ in _models().values():
        for _ in range(n_samples):
            q = rng.uniform(-np.pi, np.pi, sys.n)
            qd = rng.uniform(-3.0, 3.0, sys.n)
            u = rng.normal(size=sys.n - 1)
            qdd = forward_accel(sys, q, qd, u)
            r = sys.mass_matrix(q) @ qdd + sys.bias(q, qd) - np.append(u, 0.0)
            worst = max(worst, float(np.abs(r).max()))
    return CheckResult("8a", "equations-of-motion residual", worst < 1e-9, f"max residual {worst:.2e}")


def prop_symmetry(seed=0):
    worst = 0.0
    msgs = []
    for name, (sys, vhc) in _models().items():
        rep = check_model(sys, 200, seed)
        odd = check_vhc(vhc, n_samples=200, rng=seed)["oddness"]
        err = max(rep["asymmetry"], rep["mass_even"], rep["potential_even"], odd)
        worst = max(worst, err)
        if rep["min_eig"] <= 0:
            worst = np.inf
        msgs.append(f"{name} {err:.1e} (min eig {rep['min_eig']:.3f})")
    return CheckResult("8b", "symmetry assumptions", worst < 1e-12, "; ".join(msgs))


def _rho_ddot(vhc, q, qd, qdd):
    q2, v = q[-1], qd[-1]
    return qdd[:-1] - np.atleast_1d(vhc.dphi(q2)) * qdd[-1] - np.atleast_1d(vhc.d2phi(q2)) * v * v


def prop_constraint_dynamics(seed=0):
    rng = np.random.default_rng(seed)
    starts = {
        "cart-pendulum": np.array([0.05, 0.2, 0.1, 0.3]),
        "tiptoebot": np.array([0.1, -0.05, 0.05, -5.0, 0.5, 2.5]),
    }
    worst = 0.0
    for name, (sys, vhc) in _models().items():
        x0 = starts[name] + 0.01 * rng.normal(size=2 * sys.n)
        sol = solve_ivp(closed_loop_rhs(sys, vhc), (0.0, 1.0), x0, method="DOP853", rtol=1e-10, atol=1e-12,
                        t_eval=np.linspace(0.0, 1.0, 101))
        for x in sol.y.T:
            q, qd = x[:sys.n], x[sys.n:]
            qdd, _, _ = closed_loop_accel(sys, vhc, q, qd)
            r = _rho_ddot(vhc, q, qd, qdd) + vhc.kd @ rho_dot(vhc, q, qd) + vhc.kp @ rho(vhc, q)
            worst = max(worst, float(np.abs(r).max()))
    return CheckResult("8c", "constraint error dynamics residual", worst < 1e-6, f"max residual {worst:.2e}")


def prop_energy_and_impulse(seed=0):
    rng = np.random.default_rng(seed)
    drift = 0.0
    for model in ("cart-pendulum", "tiptoebot"):
        est = _design(model)
        red, orb = est.reduced_, est.orbit_
        from .reduction import zero_dynamics_period

        T, pts = zero_dynamics_period(red, orb, n_samples=400)
        E = red.energy(pts[:, 0], pts[:, 1])
        drift = max(drift, float(np.abs(E - orb.c_d).max()))
    manifold = 0.0
    for sys, _ in _models().values():
        m = sys.n - 1
        for _ in range(200):
            q = rng.uniform(-np.pi, np.pi, sys.n)
            qd = rng.normal(size=sys.n)
            dv = apply_impulse_jump(sys, q, qd, rng.normal(size=m)) - qd
            M = sys.mass_matrix(q)
            r = dv[m] + M[:m, m] @ dv[:m] / M[m, m]
            manifold = max(manifold, abs(float(r)))
    ok = drift < 1e-6 and manifold < 1e-10
    return CheckResult("8d", "zero-dynamics invariant and impulse manifold", ok,
                       f"energy drift {drift:.2e}, manifold residual {manifold:.2e}")


def prop_fixed_point():
    res = {}
    for model in ("cart-pendulum", "tiptoebot"):
        est = _design(model)
        res[model] = fixed_point_residual(est.system_, est.vhc_, est.section_, est.z_star_)
    worst = max(res.values())
    return CheckResult("8e", "fixed-point residual", worst < 1e-7,
                       ", ".join(f"{k} {v:.2e}" for k, v in res.items()))


def prop_richardson(eps=1e-5):
    worst = 0.0
    for model in ("cart-pendulum", "tiptoebot"):
        est = _design(model)
        half = linearize(est.system_, est.vhc_, est.section_, est.z_star_, eps / 2, eps / 2)
        worst = max(worst, float(np.abs(half.A - est.A_).max()))
    return CheckResult("8f", "finite-difference step halving", worst < 1e-3, f"max change in A {worst:.2e}")


def random_stabilizable(rng, nx=None, nu=None):
    """Random ``(A, B)`` passing the PBH stabilizability test."""
    while True:
        n = int(rng.integers(2, 7)) if nx is None else nx
        m = int(rng.integers(1, n + 1)) if nu is None else nu
        A = rng.normal(size=(n, n)) * 1.5 / np.sqrt(n)
        B = rng.normal(size=(n, m))
        if stabilizability_check(A, B)["stabilizable"]:
            return A, B


def prop_dare(n_random=100, seed=0):
    rng = np.random.default_rng(seed)
    worst_res, worst_rad = 0.0, 0.0
    for model in ("cart-pendulum", "tiptoebot"):
        est = _design(model)
        prob = LqrProblem(est.A_, est.B_)
        worst_res = max(worst_res, float(np.linalg.norm(dare_residual(prob.A, prob.B, prob.Q, prob.R, est.P_))))
        worst_rad = max(worst_rad, est.spectral_radius_)
    for _ in range(n_random):
        A, B = random_stabilizable(rng)
        prob = LqrProblem(A, B)
        P, K = dare_solve(prob)
        worst_res = max(worst_res, float(np.linalg.norm(dare_residual(A, B, prob.Q, prob.R, P))))
        worst_rad = max(worst_rad, certify(A, B, K)["spectral_radius"])
    P, _ = dare_solve(LqrProblem([[2.0]], [[1.0]]))
    scalar = abs(float(P[0, 0]) - (2.0 + np.sqrt(5.0)))
    ok = worst_res < 1e-9 and worst_rad < 1.0 and scalar < 1e-9
    return CheckResult("8g", "Riccati solutions", ok,
                       f"max residual {worst_res:.2e}, max closed-loop radius {worst_rad:.3f}, "
                       f"scalar error {scalar:.1e}")


def prop_high_gain(mu=1e-4, seed=0):
    rng = np.random.default_rng(seed)
    est = _design("tiptoebot")
    sys = est.system_
    n = sys.n
    worst = 0.0
    for _ in range(5):
        e = 0.05 * rng.normal(size=len(est.z_star_))
        x = lift_section_state(sys, est.section_, est.z_star_ + e)
        impulse = est.K_ @ e
        qd_jump = apply_impulse_jump(sys, x[:n], x[n:], impulse)
        x_hg, _ = high_gain_burst(sys, est.vhc_, x, qd_jump[:n - 1], 1.0, mu)
        worst = max(worst, float(np.abs(x_hg[n:] - qd_jump).max()))
    return CheckResult("8h", "high-gain burst against jump", worst < 1e-2, f"max velocity gap {worst:.2e}")


CHECKS = {
    "1": check_tiptoebot_A,
    "2": check_tiptoebot_B,
    "3": check_reference_spectra,
    "4": check_cart_matrices,
    "5": check_cart_from_offset,
    "6": check_cart_from_origin,
    "7": check_tiptoebot_convergence,
    "8a": prop_forward_dynamics,
    "8b": prop_symmetry,
    "8c": prop_constraint_dynamics,
    "8d": prop_energy_and_impulse,
    "8e": prop_fixed_point,
    "8f": prop_richardson,
    "8g": prop_dare,
    "8h": prop_high_gain,
}


def run_checks(keys=None, stream=None):
    results = []
    for key in keys or CHECKS:
        try:
            res = CHECKS[key]()
        except ICPMError as exc:
            res = CheckResult(key, CHECKS[key].__name__, False, f"raised {type(exc).__name__}: {exc}")
        results.append(res)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
    return results
