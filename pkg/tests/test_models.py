import numpy as np
import pytest

from icpm.exceptions import InvalidInputError
from icpm.models import CartPendulumParams, TiptoebotParams, build_model


def test_build_by_name_with_overrides():
    sys, vhc = build_model("cart-pendulum", {"g": 1.0, "vhc_amplitude": 1.2})
    assert sys.params["g"] == 1.0
    assert vhc.phi(np.pi / 2)[0] == pytest.approx(-1.2)
    sys, vhc = build_model("tiptoebot", {"A1": -1.0, "kp": [[2, 0], [0, 2]]})
    np.testing.assert_array_equal(vhc.kp, 2 * np.eye(2))
    np.testing.assert_allclose(vhc.phi(0.5), [-0.5, 0.05])


def test_unknown_model_and_field():
    with pytest.raises(InvalidInputError):
        build_model("double-pendulum")
    with pytest.raises(InvalidInputError):
        build_model("tiptoebot", {"beta9": 1.0})


def test_positive_parameters():
    with pytest.raises(InvalidInputError):
        CartPendulumParams(l=0.0)
    with pytest.raises(InvalidInputError):
        TiptoebotParams(alpha3=-0.1)


def test_default_gains(cart, tip):
    assert cart[1].kp[0, 0] == 2.0 and cart[1].kd[0, 0] == 1.0
    np.testing.assert_array_equal(tip[1].kp, np.eye(2))
    np.testing.assert_array_equal(tip[1].kd, 0.1 * np.eye(2))
