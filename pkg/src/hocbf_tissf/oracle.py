"""Brute-force active-set solver for the tiny QPs the controllers produce.

Decision vector z = (u, sigma) when any row is slack-relaxed, else z = u.
Objective 1/2 |u - center|^2 + 1/2 rho sigma^2, rows  gamma + a.u [+ sigma] >= 0.
Every subset of rows is tried as the equality set; each KKT system is solved
densely by Gaussian elimination with partial pivoting. Independent of the
closed forms in ``solvers``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from hocbf_tissf.errors import InfeasibleQP
from hocbf_tissf.solvers import CBF_HARD, CLF_SOFT, ConstraintRow, ControllerOutput

PRIMAL_TOL = 1e-10
DUAL_TOL = 1e-12
KKT_TOL = 1e-9

_NAMES = {CLF_SOFT: "clf", CBF_HARD: "cbf"}


@dataclass(frozen=True)
class TinyQP:
    m: int
    rows: tuple[ConstraintRow, ...]
    rho: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        if len(self.rows) > 2:
            raise ValueError("TinyQP holds at most two rows")
        kinds = [r.kind for r in self.rows]
        if len(set(kinds)) != len(kinds):
            raise ValueError("at most one row of each kind")
        for r in self.rows:
            if r.a.shape != (self.m,):
                raise ValueError(f"row width {r.a.shape} does not match m={self.m}")
        object.__setattr__(self, "_slack", CLF_SOFT in kinds)
        if self._slack and not (self.rho is not None and self.rho > 0):
            raise ValueError("slack-relaxed program needs rho > 0")

    @property
    def has_slack(self) -> bool:
        return self._slack

    @property
    def nz(self) -> int:
        return self.m + (1 if self._slack else 0)

    def hessian(self) -> np.ndarray:
        H = np.eye(self.nz)
        if self._slack:
            H[-1, -1] = self.rho
        return H

    def row_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.zeros((len(self.rows), self.nz))
        b = np.zeros(len(self.rows))
        for i, r in enumerate(self.rows):
            A[i, : self.m] = r.a
            if r.kind == CLF_SOFT:
                A[i, -1] = 1.0
            b[i] = r.gamma
        return A, b


def _center(qp: TinyQP, center) -> list[float]:
    zc = [0.0] * qp.nz
    if center is not None:
        zc[: qp.m] = [float(v) for v in np.asarray(center, dtype=float).ravel()]
    return zc


def _rows(qp: TinyQP) -> tuple[list[list[float]], list[float], list[float]]:
    """Row coefficients over z, constants, and the Hessian diagonal, as plain floats."""
    A = []
    for r in qp.rows:
        row = r.a.tolist()
        if qp.has_slack:
            row.append(1.0 if r.kind == CLF_SOFT else 0.0)
        A.append(row)
    h = [1.0] * qp.nz
    if qp.has_slack:
        h[-1] = float(qp.rho)
    return A, [r.gamma for r in qp.rows], h


def lu_solve(K: list[list[float]], rhs: list[float]) -> list[float] | None:
    """Gaussian elimination with partial pivoting; None when singular.

    The systems here are at most 6x6, where plain floats beat LAPACK's call
    overhead by a wide margin.
    """
    n = len(rhs)
    M = [row + [rhs[i]] for i, row in enumerate(K)]
    tiny = 1e-14 * max(max(map(abs, row)) for row in K)
    for c in range(n):
        p, best = c, abs(M[c][c])
        for i in range(c + 1, n):
            v = abs(M[i][c])
            if v > best:
                p, best = i, v
        if best <= tiny:
            return None
        if p != c:
            M[c], M[p] = M[p], M[c]
        piv = M[c]
        inv = 1.0 / piv[c]
        for i in range(c + 1, n):
            Mi = M[i]
            f = Mi[c] * inv
            if f != 0.0:
                for j in range(c, n + 1):
                    Mi[j] -= f * piv[j]
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        Mi = M[i]
        acc = Mi[n]
        for j in range(i + 1, n):
            acc -= Mi[j] * x[j]
        x[i] = acc / Mi[i]
    return x


def _output(qp: TinyQP, z, lam, active: Sequence[int], residual) -> ControllerOutput:
    mu = {"clf": 0.0, "cbf": 0.0}
    tight = set()
    for i, r in enumerate(qp.rows):
        mu[_NAMES[r.kind]] = float(lam[i])
        if abs(residual[i]) <= KKT_TOL * (1.0 + abs(residual[i])):
            tight.add(_NAMES[r.kind])
    basis = frozenset(_NAMES[qp.rows[i].kind] for i in active)
    return ControllerOutput(
        u=np.array(z[: qp.m]),
        sigma=float(z[-1]) if qp.has_slack else 0.0,
        mu=(mu["clf"], mu["cbf"]),
        basis=basis,
        active_set=frozenset(tight) | basis,
        region="oracle",
    )


def solve_enumerate(qp: TinyQP, center=None) -> ControllerOutput:
    A, b, h = _rows(qp)
    zc = _center(qp, center)
    k, nz = len(qp.rows), qp.nz
    hzc = [h[i] * zc[i] for i in range(nz)]

    best = None
    for size in range(k + 1):
        for S in combinations(range(k), size):
            n_act = len(S)
            if n_act:
                # [[H, -A_S^T], [A_S, 0]] [z; lam_S] = [H zc; -b_S]
                K = []
                for i in range(nz):
                    row = [0.0] * (nz + n_act)
                    row[i] = h[i]
                    for j, s in enumerate(S):
                        row[nz + j] = -A[s][i]
                    K.append(row)
                for s in S:
                    K.append(A[s] + [0.0] * n_act)
                sol = lu_solve(K, hzc + [-b[s] for s in S])
                if sol is None:
                    continue
            else:
                sol = zc  # unconstrained minimizer
            if not math.isfinite(sum(sol)):
                continue
            z = sol[:nz]
            lam = [0.0] * k
            for j, s in enumerate(S):
                lam[s] = sol[nz + j]
            if min(lam, default=0.0) < -DUAL_TOL:
                continue
            residual = []
            feasible = True
            zmax = max(1.0, max(abs(v) for v in z))
            for i in range(k):
                # solve rounding scales with |a| |z|; a row without input
                # authority is judged exactly by the sign of its constant
                r, sc = b[i], abs(b[i])
                for j in range(nz):
                    r += A[i][j] * z[j]
                    sc += abs(A[i][j]) * zmax
                if r < -PRIMAL_TOL * sc:
                    feasible = False
                    break
                residual.append(r)
            if not feasible:
                continue
            obj = 0.0
            for i in range(nz):
                obj += h[i] * (z[i] - zc[i]) ** 2
            obj *= 0.5
            # strictly smaller objective wins; ties keep the earlier (smaller) set
            if best is None or obj < best[0] - 1e-14 * max(1.0, abs(best[0])):
                best = (obj, z, lam, S, residual)
    if best is None:
        residual = [b[i] + sum(A[i][j] * zc[j] for j in range(nz)) for i in range(k)]
        if not k:
            raise InfeasibleQP("no feasible active set")
        worst = min(range(k), key=residual.__getitem__)
        name = _NAMES[qp.rows[worst].kind]
        raise InfeasibleQP(f"no feasible active set; most violated row: {name}", name, residual[worst])
    _, z, lam, S, residual = best
    return _output(qp, z, lam, S, residual)


@dataclass(frozen=True)
class KKTReport:
    stationarity: float
    primal: float
    dual: float
    complementarity: float

    @property
    def worst(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)

    @property
    def passed(self) -> bool:
        return self.worst <= KKT_TOL


def verify_kkt(qp: TinyQP, candidate: ControllerOutput, center=None) -> KKTReport:
    """Scale-normalized KKT residuals of ``candidate`` for ``qp``.

    Each residual is divided by the magnitude of the terms it compares
    (floored at 1), so O(1) instances report absolute errors and badly
    conditioned ones are not penalized for float64 rounding of large
    multipliers.
    """
    A, b, h = _rows(qp)
    zc = _center(qp, center)
    u = np.asarray(candidate.u, dtype=float)
    if u.shape != (qp.m,):
        raise ValueError(f"candidate has shape {u.shape}, expected {(qp.m,)}")
    z = u.tolist() + ([float(candidate.sigma)] if qp.has_slack else [])
    mu_by_name = {"clf": candidate.mu[0], "cbf": candidate.mu[1]}
    lam = [float(mu_by_name[_NAMES[r.kind]]) for r in qp.rows]
    k, nz = len(lam), qp.nz

    hz = [h[i] * (z[i] - zc[i]) for i in range(nz)]
    atl = [sum(A[r][i] * lam[r] for r in range(k)) for i in range(nz)]
    denom = max(1.0, max(abs(v) for v in hz), max((abs(v) for v in atl), default=0.0))
    stat = max(abs(hz[i] - atl[i]) for i in range(nz)) / denom
    if not k:
        return KKTReport(stat, 0.0, 0.0, 0.0)
    primal = comp = 0.0
    for r in range(k):
        res = b[r] + sum(A[r][i] * z[i] for i in range(nz))
        row_scale = 1.0 + abs(b[r]) + sum(abs(A[r][i] * z[i]) for i in range(nz))
        primal = max(primal, max(-res, 0.0) / row_scale)
        comp = max(comp, abs(lam[r] * res) / ((1.0 + abs(lam[r])) * row_scale))
    dual = max(max(-l, 0.0) for l in lam) / max(1.0, max(abs(l) for l in lam))
    return KKTReport(stationarity=stat, primal=primal, dual=dual, complementarity=comp)
