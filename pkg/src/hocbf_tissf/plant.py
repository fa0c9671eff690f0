"""Control-affine plants  xdot = f(x) + g1(x) u + g2(x) d  and the
two-pendulum spring-cart benchmark."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from hocbf_tissf.errors import ConfigError, DimensionError

Array = np.ndarray


@dataclass(frozen=True)
class PlantModel:
    n: int
    m: int
    p: int
    f: Callable[[Array], Array]
    g1: Callable[[Array], Array]
    g2: Callable[[Array], Array]
    jac_f: Callable[[Array], Array]
    name: str = ""

    def at(self, x: Array) -> "PlantPoint":
        return PlantPoint(self.f(x), self.g1(x), self.g2(x), self.jac_f(x))


class PlantPoint(NamedTuple):
    """f, g1, g2 and the Jacobian of f evaluated at one state."""

    f: Array
    g1: Array
    g2: Array
    jac: Array


def eval_dynamics(plant: PlantModel, x, u, d) -> Array:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    if x.shape != (plant.n,) or u.shape != (plant.m,) or d.shape != (plant.p,):
        raise DimensionError(
            f"expected x{(plant.n,)}, u{(plant.m,)}, d{(plant.p,)}; got {x.shape}, {u.shape}, {d.shape}"
        )
    return plant.f(x) + plant.g1(x) @ u + plant.g2(x) @ d


@dataclass(frozen=True)
class PendulumParams:
    """Physical constants of the coupled pendulum / spring / cart pair.

    ``spring`` is the spring constant, ``r1`` the spring pivot distance from
    the pendulum bottom, ``r2`` the spacing between the carts.
    """

    g: float = 9.8
    l: float = 1.0
    spring: float = 1.0
    cart_mass: float = 15.0
    pendulum_mass: float = 5.0
    r1: float = 0.75
    r2: float = 2.0

    def __post_init__(self):
        for name in ("g", "l", "spring", "cart_mass", "pendulum_mass", "r1", "r2"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"pendulum parameter {name} must be positive, got {v}")

    @property
    def omega(self) -> float:
        return self.pendulum_mass / (self.cart_mass + self.pendulum_mass)

    @property
    def gravity_coeff(self) -> float:
        return self.g / (self.omega * self.l)

    @property
    def sin_coeff(self) -> float:
        return self.pendulum_mass / self.cart_mass

    @property
    def coupling_coeff(self) -> float:
        w = self.omega
        return self.r1 * self.spring * (self.r1 - w * self.l) / (w * self.l**2)

    @property
    def constant_term(self) -> float:
        w = self.omega
        return self.r2 * self.spring * (self.r1 - w * self.l) / (w * self.l**2)

    @property
    def input_gain(self) -> float:
        return 1.0 / (self.omega * self.l**2)

    def velocity_drift(self, x: Array) -> Array:
        """Drift of the two angular-acceleration equations (input and disturbance excluded)."""
        th1, th2 = x[0], x[2]
        a, s, c, k = self.gravity_coeff, self.sin_coeff, self.coupling_coeff, self.constant_term
        return np.array(
            [
                a * th1 - s * math.sin(th1) - c * (th1 - th2) + k,
                a * th2 - s * math.sin(th2) - c * (th2 - th1) + k,
            ]
        )


# state layout: (theta_1, theta_1_dot, theta_2, theta_2_dot)
ANGLE_IDX = (0, 2)
RATE_IDX = (1, 3)


def pendulum_spring_cart(params: PendulumParams, disturbance_channel: str = "matched") -> PlantModel:
    if disturbance_channel not in ("matched", "unmatched"):
        raise ConfigError(f"unknown disturbance channel {disturbance_channel!r}")
    b = params.input_gain
    a, s, c = params.gravity_coeff, params.sin_coeff, params.coupling_coeff

    g1_mat = np.zeros((4, 2))
    g1_mat[1, 0] = b
    g1_mat[3, 1] = b
    if disturbance_channel == "matched":
        g2_mat = g1_mat.copy()
    else:
        g2_mat = np.zeros((4, 2))
        g2_mat[0, 0] = 1.0
        g2_mat[2, 1] = 1.0
    g1_mat.setflags(write=False)
    g2_mat.setflags(write=False)

    def f(x):
        dr = params.velocity_drift(x)
        return np.array([x[1], dr[0], x[3], dr[1]])

    def jac_f(x):
        J = np.zeros((4, 4))
        J[0, 1] = 1.0
        J[2, 3] = 1.0
        J[1, 0] = a - s * math.cos(x[0]) - c
        J[1, 2] = c
        J[3, 2] = a - s * math.cos(x[2]) - c
        J[3, 0] = c
        return J

    return PlantModel(
        n=4, m=2, p=2,
        f=f,
        g1=lambda x: g1_mat,
        g2=lambda x: g2_mat,
        jac_f=jac_f,
        name=f"pendulum_spring_cart[{disturbance_channel}]",
    )


@dataclass(frozen=True)
class Reference:
    """Vector reference signal with its first three time derivatives."""

    value: Callable[[float], Array]
    d1: Callable[[float], Array] | None = None
    d2: Callable[[float], Array] | None = None
    d3: Callable[[float], Array] | None = None
    name: str = ""

    def derivative(self, order: int) -> Callable[[float], Array]:
        fn = (self.value, self.d1, self.d2, self.d3)[order]
        if fn is None:
            raise ConfigError(f"reference {self.name!r} does not provide derivative of order {order}")
        return fn


def paper_sine() -> Reference:
    """x_d(t) = [sin t, -sin(t + pi/4)]."""
    q = math.pi / 4
    return Reference(
        value=lambda t: np.array([math.sin(t), -math.sin(t + q)]),
        d1=lambda t: np.array([math.cos(t), -math.cos(t + q)]),
        d2=lambda t: np.array([-math.sin(t), math.sin(t + q)]),
        d3=lambda t: np.array([-math.cos(t), math.cos(t + q)]),
        name="paper_sine",
    )


REFERENCES = {"paper_sine": paper_sine}


def make_reference(name: str) -> Reference:
    try:
        return REFERENCES[name]()
    except KeyError:
        raise ConfigError(f"unknown reference signal {name!r}") from None
