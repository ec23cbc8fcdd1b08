"""Ready-made systems: the cart-pendulum and the three-link tiptoebot."""
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import MechanicalSystem, lagrangian_bias
from .exceptions import InvalidInputError
from .vhc import VhcSpec, linear_vhc

__all__ = [
    "CartPendulumParams",
    "TiptoebotParams",
    "cart_pendulum",
    "tiptoebot",
    "MODELS",
    "DEFAULT_ANCHORS",
    "DEFAULT_Q2_RANGES",
    "build_model",
]


@dataclass(frozen=True)
class CartPendulumParams:
    """Inverted pendulum on a cart; ``theta`` is measured from the upright.

    ``g = 9.81`` by default; the acceptance checks also try ``g = 1``.
    """

    m_c: float = 1.0
    m_p: float = 1.0
    l: float = 1.0
    g: float = 9.81
    vhc_amplitude: float = 1.5
    kp: float = 2.0
    kd: float = 1.0

    def __post_init__(self):
        for name in ("m_c", "m_p", "l", "g", "kp", "kd"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")


@dataclass(frozen=True)
class TiptoebotParams:
    """Lumped parameters of the tiptoebot (SI units) and its linear VHC."""

    alpha1: float = 0.386
    alpha2: float = 0.217
    alpha3: float = 0.247
    alpha4: float = 0.065
    alpha5: float = 0.054
    alpha6: float = 0.104
    beta1: float = 4.307
    beta2: float = 1.102
    beta3: float = 1.764
    A1: float = -2.0
    A2: float = 0.1
    kp: tuple = ((1.0, 0.0), (0.0, 1.0))
    kd: tuple = ((0.1, 0.0), (0.0, 0.1))

    def __post_init__(self):
        for i in range(1, 7):
            if not getattr(self, f"alpha{i}") > 0:
                raise InvalidInputError(f"alpha{i} must be positive")


def cart_pendulum(params=None):
    """Return ``(system, vhc)`` with ``q = [x, theta]``.

    The constraint is ``x = -a sin(theta)``.
    """
    p = CartPendulumParams() if params is None else params
    mc, mp, l, g = p.m_c, p.m_p, p.l, p.g

    def mass_matrix(q):
        c = np.cos(q[1])
        return np.array([[mc + mp, mp * l * c], [mp * l * c, mp * l * l]])

    def bias(q, qd):
        s = np.sin(q[1])
        return np.array([-mp * l * s * qd[1] ** 2, -mp * g * l * s])

    def potential(q):
        return mp * g * l * np.cos(q[1])

    a = p.vhc_amplitude
    vhc = VhcSpec(
        phi=lambda th: np.array([-a * np.sin(th)]),
        dphi=lambda th: np.array([-a * np.cos(th)]),
        d2phi=lambda th: np.array([a * np.sin(th)]),
        kp=[[p.kp]],
        kd=[[p.kd]],
    )
    system = MechanicalSystem(
        n=2,
        mass_matrix=mass_matrix,
        bias=bias,
        potential=potential,
        symmetry_center=np.zeros(2),
        names=("x", "theta"),
        label="cart-pendulum",
        params=asdict(p),
    )
    return system, vhc


def tiptoebot(params=None):
    """Return ``(system, vhc)`` for the tiptoebot.

    Internal coordinates are ``q = [theta2, theta3, theta1]`` (toe angle
    ``theta1`` passive, last). The natural order is ``(theta1, theta2,
    theta3)``, so section states read ``(theta2, theta3, theta1', theta2',
    theta3')``.
    """
    p = TiptoebotParams() if params is None else params
    a1, a2, a3, a4, a5, a6 = (p.alpha1, p.alpha2, p.alpha3, p.alpha4, p.alpha5, p.alpha6)
    b1, b2, b3 = p.beta1, p.beta2, p.beta3

    def mass_matrix(q):
        t2, t3 = q[0], q[1]
        c2, c3, c23 = np.cos(t2), np.cos(t3), np.cos(t2 + t3)
        m11 = a2 + a3 + 2 * a5 * c3
        m12 = a3 + a5 * c3
        m13 = a2 + a3 + a4 * c2 + 2 * a5 * c3 + a6 * c23
        m23 = a3 + a5 * c3 + a6 * c23
        m33 = a1 + a2 + a3 + 2 * (a4 * c2 + a5 * c3 + a6 * c23)
        return np.array([[m11, m12, m13], [m12, a3, m23], [m13, m23, m33]])

    def mass_partials(q):
        t2, t3 = q[0], q[1]
        s2, s3, s23 = np.sin(t2), np.sin(t3), np.sin(t2 + t3)
        dM = np.zeros((3, 3, 3))
        # d/d theta2
        dM[0, 0, 2] = dM[0, 2, 0] = -a4 * s2 - a6 * s23
        dM[0, 1, 2] = dM[0, 2, 1] = -a6 * s23
        dM[0, 2, 2] = -2 * (a4 * s2 + a6 * s23)
        # d/d theta3
        dM[1, 0, 0] = -2 * a5 * s3
        dM[1, 0, 1] = dM[1, 1, 0] = -a5 * s3
        dM[1, 0, 2] = dM[1, 2, 0] = -2 * a5 * s3 - a6 * s23
        dM[1, 1, 2] = dM[1, 2, 1] = -a5 * s3 - a6 * s23
        dM[1, 2, 2] = -2 * (a5 * s3 + a6 * s23)
        return dM

    def potential(q):
        t2, t3, t1 = q
        return b1 * np.cos(t1) + b2 * np.cos(t1 + t2) + b3 * np.cos(t1 + t2 + t3)

    def potential_gradient(q):
        t2, t3, t1 = q
        s1, s12, s123 = np.sin(t1), np.sin(t1 + t2), np.sin(t1 + t2 + t3)
        return np.array([-b2 * s12 - b3 * s123, -b3 * s123, -b1 * s1 - b2 * s12 - b3 * s123])

    vhc = linear_vhc([p.A1, p.A2], p.kp, p.kd)
    system = MechanicalSystem(
        n=3,
        mass_matrix=mass_matrix,
        bias=lagrangian_bias(mass_partials, potential_gradient),
        potential=potential,
        symmetry_center=np.zeros(3),
        natural_order=(2, 0, 1),
        names=("theta2", "theta3", "theta1"),
        label="tiptoebot",
        params=asdict(p),
    )
    return system, vhc


MODELS = {
    "cart-pendulum": (cart_pendulum, CartPendulumParams),
    "tiptoebot": (tiptoebot, TiptoebotParams),
}

# passive state the desired orbit passes through
DEFAULT_ANCHORS = {
    "cart-pendulum": (0.0, 0.45),
    "tiptoebot": (0.0, 3.0),
}

# the cart-pendulum constraint loses regularity near |theta| = 0.61
DEFAULT_Q2_RANGES = {
    "cart-pendulum": (-0.6, 0.6),
    "tiptoebot": None,
}


def build_model(name, overrides=None):
    """Build a model by name, overriding any parameter field."""
    try:
        factory, params_cls = MODELS[name]
    except KeyError:
        raise InvalidInputError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    overrides = dict(overrides or {})
    for key in ("kp", "kd"):
        if key in overrides and isinstance(overrides[key], list):
            overrides[key] = tuple(tuple(r) if isinstance(r, list) else r for r in overrides[key])
    try:
        params = params_cls(**overrides)
    except TypeError as exc:
        raise InvalidInputError(str(exc)) from None
    return factory(params)
