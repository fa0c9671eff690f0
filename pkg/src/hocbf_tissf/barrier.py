"""High-order barrier chain  phi_0 = B,  phi_i = d/dt phi_{i-1} + beta_i(phi_{i-1}).

The chain is built along the undisturbed drift; the disturbance only shows
up through ``lg2`` (the disturbance-channel Lie derivative of the top
function). Relative degree 1 and 2 are analytic; higher degrees need a
user-supplied ``top`` callback.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from hocbf_tissf.classk import ClassKSpec
from hocbf_tissf.errors import ConfigError, UnsupportedOperation
from hocbf_tissf.plant import PlantModel, PlantPoint

Array = np.ndarray


@dataclass(frozen=True)
class BarrierSpec:
    relative_degree: int
    value: Callable[[Array], float]
    grad: Callable[[Array], Array]
    hess: Callable[[Array], Array]
    betas: tuple[ClassKSpec, ...]
    # for r > 2: x -> (phi_0..phi_{r-1}, grad of phi_{r-1})
    top: Callable[[Array], tuple[Sequence[float], Array]] | None = None

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(self.betas))
        if self.relative_degree < 1:
            raise ConfigError("relative degree must be >= 1")
        if len(self.betas) != self.relative_degree:
            raise ConfigError(f"need {self.relative_degree} class-K functions, got {len(self.betas)}")

    @property
    def beta_top(self) -> ClassKSpec:
        return self.betas[-1]


@dataclass(frozen=True)
class ChainEval:
    phi: tuple[float, ...]
    grad_top: Array
    lf: float
    lg1: Array
    lg2: Array
    gamma_b: float

    @property
    def phi_top(self) -> float:
        return self.phi[-1]


def affine_barrier(coeffs, offset: float, betas: Sequence[ClassKSpec]) -> BarrierSpec:
    """B(x) = coeffs . x + offset, relative degree ``len(betas)``."""
    c = np.asarray(coeffs, dtype=float)
    c.setflags(write=False)
    zero = np.zeros((c.size, c.size))
    zero.setflags(write=False)
    return BarrierSpec(
        relative_degree=len(betas),
        value=lambda x: float(c @ x) + offset,
        grad=lambda x: c,
        hess=lambda x: zero,
        betas=tuple(betas),
    )


def lower_bound_barrier(index: int, bound: float, n: int, betas: Sequence[ClassKSpec]) -> BarrierSpec:
    """B(x) = x[index] - bound."""
    c = np.zeros(n)
    c[index] = 1.0
    return affine_barrier(c, -bound, betas)


def _top(spec: BarrierSpec, x: Array, pt: PlantPoint) -> tuple[tuple[float, ...], Array]:
    r = spec.relative_degree
    if spec.top is not None:
        phis, g = spec.top(x)
        return tuple(float(v) for v in phis), np.asarray(g, dtype=float)
    if r > 2:
        raise UnsupportedOperation("analytic chains stop at relative degree 2; supply `top` for higher degrees")
    b = spec.value(x)
    gb = spec.grad(x)
    if r == 1:
        return (b,), gb
    beta1 = spec.betas[0]
    phi1 = float(gb @ pt.f) + beta1(b)
    grad1 = spec.hess(x) @ pt.f + pt.jac.T @ gb + beta1.deriv(b) * gb
    return (b, phi1), grad1


def eval_chain(spec: BarrierSpec, plant: PlantModel, x, point: PlantPoint | None = None) -> ChainEval:
    x = np.asarray(x, dtype=float)
    pt = point if point is not None else plant.at(x)
    phis, g = _top(spec, x, pt)
    lf = float(g @ pt.f)
    return ChainEval(
        phi=phis,
        grad_top=g,
        lf=lf,
        lg1=g @ pt.g1,
        lg2=g @ pt.g2,
        gamma_b=lf + spec.beta_top(phis[-1]),
    )


def chain_set_margins(spec: BarrierSpec, plant: PlantModel, x, point: PlantPoint | None = None) -> list[float]:
    """phi_0..phi_{r-1}; x is in the chain set iff every margin is >= 0."""
    x = np.asarray(x, dtype=float)
    pt = point if point is not None else plant.at(x)
    return list(_top(spec, x, pt)[0])


def in_chain_set(margins: Sequence[float]) -> bool:
    return all(m >= 0 for m in margins)
