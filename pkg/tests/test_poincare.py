import numpy as np
import pytest

from icpm.exceptions import LinearizationError, SectionInfeasibleError, SectionMismatchError
from icpm.hybrid_sim import SectionSpec
from icpm.poincare import find_fixed_point, fixed_point_residual, floquet, linearize, poincare_map
from icpm.reduction import orbit_from_anchor

TIP_PERIOD = 2.0345185100621066
CART_PERIOD = 1.4083855850038767


def test_tiptoebot_fixed_point_is_exact_lift(tip_design):
    np.testing.assert_allclose(tip_design.z_star_, [0.0, 0.0, 3.0, -6.0, 0.3], atol=1e-12)


def test_cart_fixed_point(cart_design):
    # x = -1.5 sin(theta) at theta = 0 with theta' = 0.45
    np.testing.assert_allclose(cart_design.z_star_, [0.0, -0.675, 0.45], atol=1e-12)


@pytest.mark.parametrize("name", ["cart_design", "tip_design"])
def test_fixed_point_residual(name, request):
    est = request.getfixturevalue(name)
    assert fixed_point_residual(est.system_, est.vhc_, est.section_, est.z_star_) < 1e-7


@pytest.mark.parametrize("name,kd,period", [("cart_design", 1.0, CART_PERIOD), ("tip_design", 0.1, TIP_PERIOD)])
def test_multipliers_follow_error_dynamics(name, kd, period, request):
    est = request.getfixturevalue(name)
    mods = np.abs(floquet(est.A_))
    # one neutral multiplier along the family of orbits; the transverse
    # ones decay like the constraint error over one period
    assert mods[0] == pytest.approx(1.0, abs=1e-4)
    np.testing.assert_allclose(mods[1:], np.exp(-0.5 * kd * period), atol=1e-4)


def test_decoupled_constraint_channels(tip_design):
    A = tip_design.A_
    # theta2 error does not excite theta3 error and vice versa
    assert abs(A[0, 1]) < 1e-6 and abs(A[1, 0]) < 1e-6
    assert abs(A[0, 4]) < 1e-6 and abs(A[1, 3]) < 1e-6
    # equal gains give equal decay, up to forward-difference error
    assert A[0, 0] == pytest.approx(A[1, 1], abs=1e-5)


@pytest.mark.parametrize("name", ["cart_design", "tip_design"])
def test_impulse_jacobian_consistent_with_state_jacobian(name, request):
    est = request.getfixturevalue(name)
    sys = est.system_
    n = sys.n
    x = np.concatenate([est.z_star_[: n - 1], [0.0], np.zeros(n)])
    Minv = np.linalg.inv(sys.mass_matrix(x[:n]))
    order = list(sys.natural_order)
    for i in range(n - 1):
        S = np.zeros(2 * n - 1)
        S[n - 1:] = Minv[:, i][order]
        # agree to first order; the gap is the O(eps |S|^2) curvature term
        np.testing.assert_allclose(est.B_[:, i], est.A_ @ S, atol=5e-3)


def test_step_halving_and_central_differences(cart_design):
    est = cart_design
    half = linearize(est.system_, est.vhc_, est.section_, est.z_star_, 5e-6, 5e-6)
    central = linearize(est.system_, est.vhc_, est.section_, est.z_star_, central=True)
    assert np.abs(half.A - est.A_).max() < 1e-3
    assert np.abs(central.A - est.A_).max() < 1e-3
    assert np.abs(central.B - est.B_).max() < 1e-3
    assert central.central and not half.central


def test_threads_do_not_change_result(cart_design):
    est = cart_design
    par = linearize(est.system_, est.vhc_, est.section_, est.z_star_, threads=2)
    np.testing.assert_array_equal(par.A, est.A_)
    np.testing.assert_array_equal(par.B, est.B_)


def test_failed_probe_reports_which(cart_design):
    est = cart_design
    with pytest.raises(LinearizationError) as info:
        linearize(est.system_, est.vhc_, est.section_, est.z_star_, t_max=0.1)
    assert info.value.probe[0] == "A"


def test_section_outside_orbit(tip_design):
    est = tip_design
    sec = SectionSpec(1.5)
    with pytest.raises(SectionMismatchError):
        find_fixed_point(est.system_, est.vhc_, sec, est.reduced_, est.orbit_)


def test_impulse_reversing_passive_velocity(tip_design):
    est = tip_design
    with pytest.raises(SectionInfeasibleError):
        poincare_map(est.system_, est.vhc_, est.section_, est.z_star_, impulse=np.array([0.0, 100.0]))


def test_other_section_fixed_point(tip_design):
    est = tip_design
    sec = SectionSpec(0.5)
    z = find_fixed_point(est.system_, est.vhc_, sec, est.reduced_, est.orbit_)
    assert fixed_point_residual(est.system_, est.vhc_, sec, z) < 1e-7
    # same energy level: theta1' from the reduced energy at theta1 = 0.5
    red = est.reduced_
    v = np.sqrt(2 * (est.orbit_.c_d - red.reduced_potential(0.5)) / red.reduced_mass(0.5))
    assert z[2] == pytest.approx(float(v), abs=1e-8)


def test_floquet_sorted():
    ev = floquet(np.diag([0.1, -2.0, 0.5]))
    np.testing.assert_allclose(np.abs(ev), [2.0, 0.5, 0.1])
