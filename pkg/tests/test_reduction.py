import numpy as np
import pytest
from scipy.integrate import solve_ivp

from icpm.exceptions import InvalidOrbitError, SingularVHCError
from icpm.reduction import (
    build_reduced,
    orbit_distance,
    orbit_from_anchor,
    orbit_from_energy,
    orbit_samples,
    zero_dynamics_coeffs,
    zero_dynamics_period,
)
from icpm.vhc import closed_loop_accel

# frozen from nested scipy.integrate.quad on the coefficient functions,
# and from the turning-point integral T = 4 int_0^qt dq / q'(q)
TIP_M = {0.3: 1.022087137977904, -0.5: 1.0588802167355689}
TIP_P = {0.3: 0.4985305872759448, -0.5: 1.3755203719898383}
TIP_PERIOD = 2.0345185100621066
TIP_TURNING = 0.9188839708523636
CART_M = {0.3: 0.7380034223645174, -0.5: 0.31045345880220954}
CART_P = {0.3: 0.8762980833556097, -0.5: 2.4018301357108873}
CART_PERIOD = 1.4083855850038767


@pytest.fixture(scope="module")
def tip_red(tip):
    return build_reduced(*tip)


@pytest.fixture(scope="module")
def cart_red(cart):
    return build_reduced(*cart, q2_range=(-0.6, 0.6))


def test_coefficients_match_constrained_acceleration(tip, rng):
    sys, vhc = tip
    for _ in range(10):
        s, v = rng.uniform(-1, 1), rng.uniform(-4, 4)
        a1, a2 = zero_dynamics_coeffs(sys, vhc, s)
        x = vhc.lift(s, v)
        qdd, _, _ = closed_loop_accel(sys, vhc, x[:3], x[3:])
        assert qdd[-1] == pytest.approx(a1 + a2 * v * v, abs=1e-10)


def test_coefficients_singular(cart):
    sys, vhc = cart
    with pytest.raises(SingularVHCError):
        zero_dynamics_coeffs(sys, vhc, np.arccos(np.sqrt(2 / 3)))


@pytest.mark.parametrize("s", [0.3, -0.5])
def test_tiptoebot_tables(tip_red, s):
    assert tip_red.reduced_mass(s) == pytest.approx(TIP_M[s], abs=1e-9)
    assert tip_red.reduced_potential(s) == pytest.approx(TIP_P[s], abs=1e-9)


@pytest.mark.parametrize("s", [0.3, -0.5])
def test_cart_tables(cart_red, s):
    assert cart_red.reduced_mass(s) == pytest.approx(CART_M[s], abs=1e-9)
    assert cart_red.reduced_potential(s) == pytest.approx(CART_P[s], abs=1e-9)


def test_potential_even_and_center_at_origin(tip_red):
    s = np.linspace(0.05, 2.0, 20)
    np.testing.assert_allclose(tip_red.reduced_potential(s), tip_red.reduced_potential(-s), atol=1e-9)
    assert abs(tip_red.q2_at_pmin) < 1e-6
    assert tip_red.pmin == pytest.approx(0.0, abs=1e-9)
    # periodic model: tables repeat every full turn
    assert tip_red.reduced_potential(0.4 + 2 * np.pi) == pytest.approx(float(tip_red.reduced_potential(0.4)))


def test_orbits_near_minimum_are_closed(tip_red):
    # level sets just above the minimum: oscillations with a finite period
    orb = orbit_from_energy(tip_red, tip_red.pmin + 0.05)
    assert orb.orbit_kind == "oscillation"
    T, _ = zero_dynamics_period(tip_red, orb)
    assert np.isfinite(T) and T > 0


def test_period_matches_quadrature(tip_red, cart_red):
    orb = orbit_from_anchor(tip_red, 0.0, 3.0)
    assert orb.c_d == pytest.approx(4.5, abs=1e-12)
    T, pts = zero_dynamics_period(tip_red, orb, n_samples=500)
    assert T == pytest.approx(TIP_PERIOD, abs=1e-7)
    assert pts[:, 0].max() == pytest.approx(TIP_TURNING, abs=1e-4)
    orb = orbit_from_anchor(cart_red, 0.0, 0.45)
    assert zero_dynamics_period(cart_red, orb)[0] == pytest.approx(CART_PERIOD, abs=1e-7)


def test_energy_conserved_along_zero_dynamics(tip_red):
    def f(t, y):
        a1, a2 = tip_red.coeffs(y[0])
        return [y[1], a1 + a2 * y[1] ** 2]

    sol = solve_ivp(f, (0, TIP_PERIOD), [0.0, 3.0], method="DOP853", rtol=1e-12, atol=1e-12,
                    t_eval=np.linspace(0, TIP_PERIOD, 200))
    E = tip_red.energy(sol.y[0], sol.y[1])
    assert np.abs(E - 4.5).max() < 1e-6


def test_orbit_validation(tip_red):
    with pytest.raises(InvalidOrbitError):
        orbit_from_anchor(tip_red, 0.0, 0.0)
    with pytest.raises(InvalidOrbitError):
        orbit_from_energy(tip_red, tip_red.pmin - 1.0)
    assert orbit_from_energy(tip_red, tip_red.pmax + 1.0).orbit_kind == "rotation"


def test_bad_range():
    from icpm.models import cart_pendulum

    with pytest.raises(ValueError):
        build_reduced(*cart_pendulum(), q2_range=(0.1, 0.5))


def test_orbit_distance(tip_red, tip):
    _, vhc = tip
    orb = orbit_from_anchor(tip_red, 0.0, 3.0)
    samples = orbit_samples(tip_red, orb, 1000)
    assert orbit_distance(tip_red, orb, vhc.lift(0.0, 3.0), samples=samples) < 1e-6
    x = vhc.lift(0.0, 3.0)
    x[0] += 0.1  # off the constraint
    d = orbit_distance(tip_red, orb, x, samples=samples)
    # brute force: nearest point among many samples, no segment projection
    dense = orbit_samples(tip_red, orb, 40000)
    brute = np.sqrt(((dense - x) ** 2).sum(axis=1)).min()
    assert 0 < d <= 0.1
    assert d == pytest.approx(brute, abs=1e-4)
    # a full turn in the passive angle is the same physical state
    y = vhc.lift(0.0, 3.0)
    y[2] += 2 * np.pi
    assert orbit_distance(tip_red, orb, y, samples=samples) < 1e-6
    batch = orbit_distance(tip_red, orb, np.vstack([x, x]), samples=samples)
    assert batch.shape == (2,)


def test_table_shape(cart_red):
    tab = cart_red.table()
    assert tab.shape[1] == 3
    assert tab[0, 0] == pytest.approx(-0.6) and tab[-1, 0] == pytest.approx(0.6)
