"""Closed-form pointwise controllers.

Min-norm CLF/CBF program (slack-relaxed CLF row, hard CBF row)::

    min 1/2 |u|^2 + 1/2 rho sigma^2
    s.t. gamma_v + a_v.u + sigma >= 0
         gamma_b + a_b.u         >= 0

and the nominal-tracking filter  min 1/2 |u - u_nom|^2  s.t. the CBF row.
The disturbed (tunable ISSf) versions only change the CBF row's constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from hocbf_tissf.classk import ClassKSpec
from hocbf_tissf.errors import InfeasibleQP
from hocbf_tissf.tissf import TissfParams, issf_rhs, varrho_of

CLF_SOFT = "clf_soft"
CBF_HARD = "cbf_hard"

# relative tolerance for reporting a constraint as tight
TIGHT_TOL = 1e-9


@dataclass(frozen=True)
class ConstraintRow:
    gamma: float
    a: np.ndarray
    kind: str = CBF_HARD

    def __post_init__(self):
        a = self.a
        if not (isinstance(a, np.ndarray) and a.dtype == np.float64 and a.ndim == 1):
            a = np.atleast_1d(np.asarray(a, dtype=float))
            object.__setattr__(self, "a", a)
        g = float(self.gamma)
        object.__setattr__(self, "gamma", g)
        if self.kind not in (CLF_SOFT, CBF_HARD):
            raise ValueError(f"unknown row kind {self.kind!r}")
        if not (math.isfinite(g) and math.isfinite(float(a @ a))):
            raise ValueError("constraint row entries must be finite")


@dataclass
class ControllerOutput:
    u: np.ndarray
    sigma: float = 0.0
    mu: tuple[float, float] = (0.0, 0.0)  # (clf, cbf)
    basis: frozenset = frozenset()  # branch of the enumeration that produced u
    active_set: frozenset = frozenset()  # constraints holding with equality
    region: str = ""
    warning: str | None = None
    info: dict = field(default_factory=dict)


class RegionLabel(NamedTuple):
    label: str
    candidates: tuple[str, ...]


def _tight(residual: float, scale: float) -> bool:
    return abs(residual) <= TIGHT_TOL * max(1.0, scale)


def _tight_set(clf: ConstraintRow | None, cbf: ConstraintRow, u: np.ndarray, sigma: float, basis) -> frozenset:
    out = set(basis)
    au = np.abs(u)
    if clf is not None and "clf" not in out:
        r = clf.gamma + float(clf.a @ u) + sigma
        if _tight(r, abs(clf.gamma) + abs(sigma) + float(np.abs(clf.a) @ au)):
            out.add("clf")
    if "cbf" not in out:
        r = cbf.gamma + float(cbf.a @ u)
        if _tight(r, abs(cbf.gamma) + float(np.abs(cbf.a) @ au)):
            out.add("cbf")
    return frozenset(out)


def _omegas(clf: ConstraintRow, cbf: ConstraintRow) -> tuple[float, float, float]:
    ab, av = cbf.a, clf.a
    return float(ab @ ab), float(av @ av), float(av @ ab)


def _gram(x: np.ndarray, y: np.ndarray) -> float:
    """|x|^2 |y|^2 - (x.y)^2 via the Lagrange identity."""
    if x.size < 2:
        return 0.0
    outer = np.outer(x, y)
    minors = outer - outer.T
    return 0.5 * float(np.sum(minors * minors))


def classify_region(
    clf: ConstraintRow, cbf: ConstraintRow, rho: float, gamma_d: float | None = None, omegas=None
) -> RegionLabel:
    """Label the point with the printed Omega sets.

    With ``gamma_d`` the disturbed family Omega_d1..d6 is used (where the
    printed sets mix gamma_b and gamma_d, both are taken as printed). The sets
    overlap and carry typos, so the result is diagnostic only; ``ambiguous``
    is returned unless exactly one set matches.
    """
    gv, gb = clf.gamma, cbf.gamma
    w1, w2, w3 = omegas if omegas is not None else _omegas(clf, cbf)
    lgb_zero = w1 == 0.0
    ir = 1.0 / rho
    if gamma_d is None:
        sets = {
            "Omega1": gv > 0 and gb > 0,
            "Omega2": gv > 0 and gb == 0 and lgb_zero,
            "Omega3": gb <= 0 and gv * w1 - gb * w3 > 0,
            "Omega4": gv <= 0 and gv * w3 - gb * (ir + w1) < 0,
            "Omega5": gv <= 0 and gb == 0 and lgb_zero,
            "Omega6": gv * w3 - gb * (ir + w2) >= 0 and not lgb_zero,
        }
    else:
        gd = gamma_d
        sets = {
            "Omega_d1": gv > 0 and gd > 0,
            "Omega_d2": gv > 0 and gd == 0 and lgb_zero,
            "Omega_d3": gd <= 0 and gv * w1 - gb * w3 > 0,
            "Omega_d4": gv >= 0 and gv * w1 - gd * (ir + w1) < 0,
            "Omega_d5": gv <= 0 and gd == 0 and lgb_zero,
            "Omega_d6": gv * w3 - gd * (ir + w2) >= 0 and not lgb_zero,
        }
    hits = tuple(k for k, v in sets.items() if v)
    return RegionLabel(hits[0] if len(hits) == 1 else "ambiguous", hits)


def minnorm_clf_cbf(clf: ConstraintRow, cbf: ConstraintRow, rho: float) -> ControllerOutput:
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    gv, gb = clf.gamma, cbf.gamma
    av, ab = clf.a, cbf.a
    w1, w2, w3 = _omegas(clf, cbf)
    ir = 1.0 / rho

    if gv >= 0 and gb >= 0:
        u, sigma, mu, basis = np.zeros_like(av), 0.0, (0.0, 0.0), frozenset()
    elif w1 > 0 and gb <= 0 and gv * w1 - gb * w3 >= 0:
        u = -(gb / w1) * ab
        sigma, mu, basis = 0.0, (0.0, -gb / w1), frozenset({"cbf"})
    elif gv <= 0 and gb * (ir + w2) - gv * w3 >= 0:
        m1 = -gv / (ir + w2)
        u = m1 * av
        sigma, mu, basis = m1 * ir, (m1, 0.0), frozenset({"clf"})
    else:
        if w1 == 0.0:
            raise InfeasibleQP("barrier row has no input authority and a negative margin", "cbf", gb)
        # [q1, q2] = [[1/rho + w2, -w3], [-w3, w1]]^{-1} [gamma_v, -gamma_b]
        # det = w1/rho + (w1 w2 - w3^2); the Gram term is summed from 2x2
        # minors so (nearly) parallel rows do not cancel catastrophically
        det = ir * w1 + _gram(av, ab)
        q1 = (w1 * gv - w3 * gb) / det
        q2 = (w3 * gv - (ir + w2) * gb) / det
        u = -q1 * av + q2 * ab
        sigma, mu, basis = -q1 * ir, (-q1, q2), frozenset({"clf", "cbf"})

    u = np.asarray(u, dtype=float)
    return ControllerOutput(
        u=u,
        sigma=float(sigma),
        mu=(float(mu[0]), float(mu[1])),
        basis=basis,
        active_set=_tight_set(clf, cbf, u, sigma, basis),
        region=classify_region(clf, cbf, rho, omegas=(w1, w2, w3)).label,
    )


def safety_filter(nominal, cbf: ConstraintRow) -> ControllerOutput:
    nominal = np.atleast_1d(np.asarray(nominal, dtype=float))
    ab = cbf.a
    w1 = float(ab @ ab)
    slack = float(ab @ nominal) + cbf.gamma
    if slack >= 0 or w1 == 0.0:
        warning = None
        if w1 == 0.0 and cbf.gamma < 0:
            warning = "constraint unenforceable: no input authority and negative margin"
        return ControllerOutput(
            u=nominal.copy(),
            basis=frozenset(),
            active_set=frozenset({"cbf"}) if slack == 0 else frozenset(),
            region="filter_inactive",
            warning=warning,
            info={"xi": 0.0},
        )
    xi = -slack / w1
    u = nominal + xi * ab
    return ControllerOutput(
        u=u,
        mu=(0.0, xi),
        basis=frozenset({"cbf"}),
        active_set=frozenset({"cbf"}),
        region="filter_active",
        info={"xi": xi},
    )


def _robustified(cbf_raw: ConstraintRow, lg2, phi_top: float, params: TissfParams) -> tuple[ConstraintRow, float]:
    rhs = issf_rhs(params, lg2, phi_top)
    return ConstraintRow(cbf_raw.gamma - rhs, cbf_raw.a, CBF_HARD), rhs


def tissf_minnorm(
    clf: ConstraintRow,
    cbf_raw: ConstraintRow,
    lg2,
    phi_top: float,
    params: TissfParams,
    beta_r: ClassKSpec,
    rho: float,
) -> ControllerOutput:
    """Min-norm controller with the barrier row tightened by ||L_g2 phi||^2 / eps."""
    eff, rhs = _robustified(cbf_raw, lg2, phi_top, params)
    out = minnorm_clf_cbf(clf, eff, rho)
    varrho = varrho_of(params, beta_r, phi_top)
    gamma_d = cbf_raw.gamma + varrho
    out.region = classify_region(clf, cbf_raw, rho, gamma_d=gamma_d).label
    out.info.update(gamma_eff=eff.gamma, gamma_d=gamma_d, varrho=varrho, issf_rhs=rhs)
    return out


def tissf_filter(
    nominal,
    cbf_raw: ConstraintRow,
    lg2,
    phi_top: float,
    params: TissfParams,
    beta_r: ClassKSpec | None = None,
) -> ControllerOutput:
    eff, rhs = _robustified(cbf_raw, lg2, phi_top, params)
    out = safety_filter(nominal, eff)
    out.info.update(gamma_eff=eff.gamma, issf_rhs=rhs)
    if beta_r is not None:
        varrho = varrho_of(params, beta_r, phi_top)
        out.info.update(varrho=varrho, gamma_d=cbf_raw.gamma + varrho)
    return out


def worstcase_row(cbf_raw: ConstraintRow, lg2, gamma: float) -> ConstraintRow:
    """Constant robust buffer  gamma_b - ||L_g2 phi|| * gamma."""
    lg2 = np.atleast_1d(np.asarray(lg2, dtype=float))
    return ConstraintRow(cbf_raw.gamma - float(np.linalg.norm(lg2)) * gamma, cbf_raw.a, CBF_HARD)
