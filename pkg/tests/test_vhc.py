import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import brentq

from icpm.exceptions import InvalidInputError, SingularVHCError
from icpm.hybrid_sim import closed_loop_rhs
from icpm.vhc import (
    VhcSpec,
    check_vhc,
    closed_loop_accel,
    linear_vhc,
    regularity,
    rho,
    rho_dot,
    vhc_controller,
)


def test_cart_regularity_vanishes_near_061(cart):
    sys, vhc = cart
    root = brentq(lambda t: regularity(sys, vhc, t), 0.3, 1.2)
    # M12 Phi' + M22 = 1 - 1.5 cos^2(theta) vanishes where cos^2 = 2/3
    assert root == pytest.approx(np.arccos(np.sqrt(2.0 / 3.0)), abs=1e-10)
    assert abs(root - 0.61) < 0.01
    assert regularity(sys, vhc, -root) == pytest.approx(0.0, abs=1e-10)


def test_controller_raises_at_singularity(cart):
    sys, vhc = cart
    th = np.arccos(np.sqrt(2.0 / 3.0))
    q = np.array([-1.5 * np.sin(th), th])
    with pytest.raises(SingularVHCError) as info:
        vhc_controller(sys, vhc, q, np.zeros(2))
    assert info.value.q2 == pytest.approx(th)


@pytest.mark.parametrize("which", ["cart", "tip"])
def test_constraint_error_follows_linear_dynamics(which, request):
    sys, vhc = request.getfixturevalue(which)
    n, m = sys.n, sys.n - 1
    if which == "cart":
        x0 = np.array([0.1, 0.2, -0.3, 0.4])
    else:
        x0 = np.array([0.15, -0.05, 0.05, -5.5, 0.2, 2.8])
    T = 2.0
    sol = solve_ivp(closed_loop_rhs(sys, vhc), (0, T), x0, method="DOP853", rtol=1e-11, atol=1e-12)
    xT = sol.y[:, -1]
    # oracle: matrix exponential of the decoupled error dynamics
    F = np.block([[np.zeros((m, m)), np.eye(m)], [-vhc.kp, -vhc.kd]])
    e0 = np.concatenate([rho(vhc, x0[:n]), rho_dot(vhc, x0[:n], x0[n:])])
    eT = expm(F * T) @ e0
    np.testing.assert_allclose(rho(vhc, xT[:n]), eT[:m], atol=1e-7)
    np.testing.assert_allclose(rho_dot(vhc, xT[:n], xT[n:]), eT[m:], atol=1e-7)


def test_on_manifold_stays_on_manifold(tip):
    sys, vhc = tip
    x0 = vhc.lift(0.2, 2.5)
    sol = solve_ivp(closed_loop_rhs(sys, vhc), (0, 1), x0, method="DOP853", rtol=1e-11, atol=1e-12)
    assert np.abs(rho(vhc, sol.y[:3, -1])).max() < 1e-9


def test_closed_loop_accel_residual(tip, rng):
    sys, vhc = tip
    for _ in range(20):
        q = rng.uniform(-0.5, 0.5, 3)
        qd = rng.uniform(-2, 2, 3)
        qdd, u, _ = closed_loop_accel(sys, vhc, q, qd)
        p = vhc.dphi(q[-1])
        rdd = qdd[:2] - p * qdd[2]
        r = rdd + vhc.kd @ rho_dot(vhc, q, qd) + vhc.kp @ rho(vhc, q)
        assert np.abs(r).max() < 1e-10
        # same input from the public controller
        np.testing.assert_allclose(vhc_controller(sys, vhc, q, qd), u)


def test_lift_satisfies_constraint(tip):
    _, vhc = tip
    x = vhc.lift(0.0, 3.0)
    # theta2' = -2 * 3, theta3' = 0.1 * 3
    np.testing.assert_allclose(x, [0.0, 0.0, 0.0, -6.0, 0.3, 3.0])
    assert np.all(rho(vhc, x[:3]) == 0)


@pytest.mark.parametrize("which", ["cart", "tip"])
def test_vhc_oddness_and_derivatives(which, request):
    _, vhc = request.getfixturevalue(which)
    rep = check_vhc(vhc, n_samples=50, rng=0)
    assert rep["oddness"] < 1e-12
    assert rep["dphi_rel"] < 1e-7
    assert rep["d2phi_rel"] < 1e-7


def test_gain_validation():
    with pytest.raises(InvalidInputError):
        linear_vhc([1.0, 2.0], [[1.0, 0.0], [0.0, -1.0]], np.eye(2))
    with pytest.raises(InvalidInputError):
        linear_vhc([1.0], [[1.0, 0.0], [0.0, 1.0]], [[1.0]])
    # scalar gains broadcast to the identity
    v = VhcSpec(lambda s: np.array([s, s]), lambda s: np.ones(2), lambda s: np.zeros(2), 2.0, 1.0)
    np.testing.assert_array_equal(v.kp, 2 * np.eye(2))
