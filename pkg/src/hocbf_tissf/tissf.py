"""Tunable input-to-state safety: the tuning function eps(phi), the set
inflation varrho, and the robustified barrier right-hand side."""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from hocbf_tissf.classk import ClassKSpec
from hocbf_tissf.errors import ConfigError, UnsupportedOperation

# varsigma * phi is clamped to this before exp(); exp(-500) is still a
# normal float, so eps stays strictly inside (0, 1/epsilon0) in exact terms
EXP_CLAMP = 500.0


class EpsilonForm(str, Enum):
    PAPER_RECIPROCAL = "paper_reciprocal"  # 1 / (eps0 + exp(+varsigma * phi))
    RECIPROCAL_NEGATED = "reciprocal_negated"  # 1 / (eps0 + exp(-varsigma * phi))


@dataclass(frozen=True)
class TissfParams:
    epsilon0: float = 0.06
    varsigma: float = 200.0
    gamma: float = 0.0
    form: EpsilonForm = EpsilonForm.PAPER_RECIPROCAL

    def __post_init__(self):
        object.__setattr__(self, "form", EpsilonForm(self.form))
        if not (self.epsilon0 > 0 and math.isfinite(self.epsilon0)):
            raise ConfigError(f"epsilon0 must be > 0, got {self.epsilon0}")
        if not (self.varsigma >= 0 and math.isfinite(self.varsigma)):
            raise ConfigError(f"varsigma must be >= 0, got {self.varsigma}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")

    def to_dict(self) -> dict:
        return {"epsilon0": self.epsilon0, "varsigma": self.varsigma, "gamma": self.gamma, "form": self.form.value}


def _exponent(params: TissfParams, phi: float) -> float:
    sign = 1.0 if params.form is EpsilonForm.PAPER_RECIPROCAL else -1.0
    return min(max(sign * params.varsigma * phi, -EXP_CLAMP), EXP_CLAMP)


def epsilon_denominator(params: TissfParams, phi: float) -> float:
    """1 / eps(phi)."""
    return params.epsilon0 + math.exp(_exponent(params, phi))


def epsilon_of(params: TissfParams, phi: float) -> float:
    return 1.0 / epsilon_denominator(params, phi)


def epsilon_gap(params: TissfParams, phi: float) -> float:
    """1/epsilon0 - eps(phi), computed without cancellation.

    In float64 eps itself rounds to exactly 1/epsilon0 once exp(...) drops
    below ~1e-17 * epsilon0; the gap keeps its sign.
    """
    e = math.exp(_exponent(params, phi))
    return e / (params.epsilon0 * (params.epsilon0 + e))


def varrho_of(params: TissfParams, beta_r: ClassKSpec, phi: float) -> float:
    """Inflation  -beta_r^{-1}(-eps(phi) gamma^2 / 4)  (>= 0)."""
    if not beta_r.invertible:
        raise UnsupportedOperation("varrho needs an invertible top class-K function")
    if params.gamma == 0.0:
        return 0.0
    return -beta_r.inverse(-epsilon_of(params, phi) * params.gamma**2 / 4.0)


def issf_rhs(params: TissfParams, lg2, phi: float) -> float:
    """||L_g2 phi_{r-1}||^2 / eps(phi): the extra margin demanded of the barrier row."""
    lg2 = np.atleast_1d(np.asarray(lg2, dtype=float))
    q = float(lg2 @ lg2)
    if q == 0.0:
        return 0.0
    return q * epsilon_denominator(params, phi)


def completion_gap(q: float, eps: float, gamma: float) -> Fraction:
    """Exact  q^2/eps - q*gamma + eps*gamma^2/4  (= (q - eps*gamma/2)^2 / eps).

    The worst-case disturbance term is bounded below by completing the square;
    this evaluates the slack of that bound in rational arithmetic, so it is
    never negative for eps > 0.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    q, e, g = Fraction(q), Fraction(eps), Fraction(gamma)
    return q * q / e - q * g + e * g * g / 4


@dataclass(frozen=True)
class TunabilityReport:
    min_margin: float
    argmin_phi: float
    passed: bool
    margins: tuple[float, ...] = field(repr=False)


def check_tunable_condition(
    params: TissfParams, beta_r: ClassKSpec, phi_grid: Sequence[float], step: float = 1e-6
) -> TunabilityReport:
    """Sweep 1 + d varrho / d phi over ``phi_grid`` by central differences."""
    grid = [float(p) for p in phi_grid]
    if not grid:
        raise ConfigError("phi grid must be nonempty")
    margins = []
    for p in grid:
        d = (varrho_of(params, beta_r, p + step) - varrho_of(params, beta_r, p - step)) / (2 * step)
        margins.append(1.0 + d)
    k = int(np.argmin(margins))
    return TunabilityReport(margins[k], grid[k], margins[k] > 0, tuple(margins))
