"""Scalar extended class-K functions.

Every barrier/Lyapunov chain and the tunable-ISSf inflation is built from
these. A spec is an immutable value; evaluate it with ``spec(s)`` or the
module-level helpers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from hocbf_tissf.errors import ConfigError, UnsupportedOperation

# keeps exp() finite for the exponential kind
_EXP_CAP = 700.0


class ClassKKind(str, Enum):
    LINEAR = "linear"
    ODD_POWER = "odd_power"
    SCALED_EXP_AFFINE = "scaled_exp_affine"


@dataclass(frozen=True)
class ClassKSpec:
    """Extended class-K function.

    * ``linear``:             gain * s
    * ``odd_power``:          gain * s**exponent, exponent odd
    * ``scaled_exp_affine``:  gain * (exp(s) - 1); range is (-gain, inf) so it
      has no global inverse
    """

    kind: ClassKKind = ClassKKind.LINEAR
    gain: float = 1.0
    exponent: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", ClassKKind(self.kind))
        if not (self.gain > 0 and math.isfinite(self.gain)):
            raise ConfigError(f"class-K gain must be positive and finite, got {self.gain}")
        if self.kind is ClassKKind.ODD_POWER:
            if int(self.exponent) != self.exponent or self.exponent < 1 or self.exponent % 2 == 0:
                raise ConfigError(f"odd_power exponent must be a positive odd integer, got {self.exponent}")
            object.__setattr__(self, "exponent", int(self.exponent))

    @property
    def invertible(self) -> bool:
        return self.kind in (ClassKKind.LINEAR, ClassKKind.ODD_POWER)

    def __call__(self, s: float) -> float:
        if self.kind is ClassKKind.LINEAR:
            return self.gain * s
        if self.kind is ClassKKind.ODD_POWER:
            return self.gain * s**self.exponent
        return self.gain * math.expm1(min(s, _EXP_CAP))

    def deriv(self, s: float) -> float:
        if self.kind is ClassKKind.LINEAR:
            return self.gain
        if self.kind is ClassKKind.ODD_POWER:
            p = self.exponent
            return self.gain * p * s ** (p - 1)
        return self.gain * math.exp(min(s, _EXP_CAP))

    def inverse(self, y: float) -> float:
        if self.kind is ClassKKind.LINEAR:
            return y / self.gain
        if self.kind is ClassKKind.ODD_POWER:
            r = (abs(y) / self.gain) ** (1.0 / self.exponent)
            return math.copysign(r, y) if y != 0 else 0.0
        raise UnsupportedOperation(f"{self.kind.value} class-K function has no closed-form global inverse")

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "gain": self.gain}
        if self.kind is ClassKKind.ODD_POWER:
            d["exponent"] = self.exponent
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClassKSpec":
        return cls(kind=d.get("kind", "linear"), gain=float(d.get("gain", 1.0)), exponent=d.get("exponent", 1))


def classk_eval(spec: ClassKSpec, s: float) -> float:
    return spec(s)


def classk_deriv(spec: ClassKSpec, s: float) -> float:
    return spec.deriv(s)


def classk_inverse(spec: ClassKSpec, y: float) -> float:
    return spec.inverse(y)


LINEAR_UNIT = ClassKSpec()
