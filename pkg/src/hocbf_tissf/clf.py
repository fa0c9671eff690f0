"""High-order Lyapunov chain for time-varying tracking.

    psi_0 = -Vdot - eta(V),   psi_i = d/dt psi_{i-1} + alpha_i(psi_{i-1})

Vdot is taken along the drift (u does not appear for relative degree >= 1)
including the explicit time partial coming from the reference. The CLF
constraint reads  gamma_v + a_v . u >= 0  before slack relaxation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from hocbf_tissf.classk import ClassKSpec
from hocbf_tissf.errors import ConfigError, UnsupportedOperation
from hocbf_tissf.plant import PlantModel, PlantPoint, Reference

Array = np.ndarray
StateTimeFn = Callable[[Array, float], float]


@dataclass(frozen=True)
class LyapunovSpec:
    """V(x, t) with the partials the chain needs.

    ``grad``/``hess`` are w.r.t. the state, ``dt`` is dV/dt at fixed x,
    ``grad_dt`` its state gradient and ``dtt`` the second time partial.
    """

    relative_degree: int
    value: StateTimeFn
    grad: Callable[[Array, float], Array]
    hess: Callable[[Array, float], Array]
    dt: StateTimeFn
    grad_dt: Callable[[Array, float], Array]
    dtt: StateTimeFn
    eta: ClassKSpec
    alphas: tuple[ClassKSpec, ...]
    # for r_v >= 2: (x, t) -> (psi_0..psi_{r-1}, grad of top, time partial of top)
    top: Callable[[Array, float], tuple[Sequence[float], Array, float]] | None = None

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(self.alphas))
        if self.relative_degree < 1:
            raise ConfigError("CLF relative degree must be >= 1")
        if len(self.alphas) != self.relative_degree:
            raise ConfigError(f"need {self.relative_degree} alpha functions, got {len(self.alphas)}")


@dataclass(frozen=True)
class ClfEval:
    phi_v: tuple[float, ...]
    grad_top: Array
    dt_top: float
    lf: float
    a_v: Array
    gamma_v: float


def tracking_clf(
    index: int,
    reference: Reference,
    component: int,
    n: int,
    eta: ClassKSpec,
    alphas: Sequence[ClassKSpec] = (ClassKSpec(),),
) -> LyapunovSpec:
    """V = 1/2 (x[index] - r_c(t))^2 for reference component ``component``."""
    r0 = reference.derivative(0)
    r1 = reference.derivative(1)
    r2 = reference.derivative(2)
    e = np.zeros(n)
    e[index] = 1.0
    E = np.outer(e, e)
    e.setflags(write=False)
    E.setflags(write=False)

    def z(x, t):
        return x[index] - r0(t)[component]

    return LyapunovSpec(
        relative_degree=len(alphas),
        value=lambda x, t: 0.5 * z(x, t) ** 2,
        grad=lambda x, t: z(x, t) * e,
        hess=lambda x, t: E,
        dt=lambda x, t: -z(x, t) * r1(t)[component],
        grad_dt=lambda x, t: -r1(t)[component] * e,
        dtt=lambda x, t: r1(t)[component] ** 2 - z(x, t) * r2(t)[component],
        eta=eta,
        alphas=tuple(alphas),
    )


def _top(spec: LyapunovSpec, x: Array, t: float, pt: PlantPoint) -> tuple[tuple[float, ...], Array, float]:
    if spec.top is not None:
        phis, g, gt = spec.top(x, t)
        return tuple(float(v) for v in phis), np.asarray(g, dtype=float), float(gt)
    if spec.relative_degree > 1:
        raise UnsupportedOperation(
            "analytic CLF chain covers relative degree 1; supply `top` for higher degrees"
        )
    v = spec.value(x, t)
    gv = spec.grad(x, t)
    vt = spec.dt(x, t)
    gvt = spec.grad_dt(x, t)
    deta = spec.eta.deriv(v)
    vdot = float(gv @ pt.f) + vt
    psi0 = -vdot - spec.eta(v)
    grad0 = -(spec.hess(x, t) @ pt.f + pt.jac.T @ gv + gvt) - deta * gv
    dt0 = -(float(gvt @ pt.f) + spec.dtt(x, t)) - deta * vt
    return (psi0,), grad0, dt0


def eval_clf_chain(spec: LyapunovSpec, plant: PlantModel, x, t: float, point: PlantPoint | None = None) -> ClfEval:
    x = np.asarray(x, dtype=float)
    pt = point if point is not None else plant.at(x)
    phis, g, gt = _top(spec, x, t, pt)
    lf = float(g @ pt.f)
    return ClfEval(
        phi_v=phis,
        grad_top=g,
        dt_top=gt,
        lf=lf,
        a_v=g @ pt.g1,
        gamma_v=lf + gt + spec.alphas[-1](phis[-1]),
    )


def clf_set_margins(spec: LyapunovSpec, plant: PlantModel, x, t: float, point: PlantPoint | None = None) -> list[float]:
    x = np.asarray(x, dtype=float)
    pt = point if point is not None else plant.at(x)
    return list(_top(spec, x, t, pt)[0])
