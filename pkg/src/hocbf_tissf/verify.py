"""Randomized cross-check of the closed-form controllers against the enumeration oracle."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from hocbf_tissf import solvers
from hocbf_tissf.classk import ClassKSpec
from hocbf_tissf.errors import InfeasibleQP
from hocbf_tissf.oracle import TinyQP, solve_enumerate, verify_kkt
from hocbf_tissf.solvers import CBF_HARD, CLF_SOFT, ConstraintRow
from hocbf_tissf.tissf import EpsilonForm, TissfParams

FAMILIES = ("minnorm", "filter", "tissf_minnorm", "tissf_filter")
DEVIATION_TOL = 1e-8
KKT_TOL = 1e-9

MISMATCH_COLUMNS = (
    "family", "index", "m", "gamma_v", "gamma_b", "a_v", "a_b", "rho", "nominal",
    "lg2", "phi_top", "u_closed", "u_oracle", "sigma_closed", "sigma_oracle", "deviation", "kkt", "note",
)


@dataclass
class Instance:
    family: str
    m: int
    clf: ConstraintRow | None
    cbf: ConstraintRow
    rho: float
    nominal: np.ndarray | None = None
    lg2: np.ndarray | None = None
    phi_top: float = 0.0
    params: TissfParams | None = None
    beta_r: ClassKSpec | None = None


@dataclass
class FamilyResult:
    family: str
    samples: int = 0
    max_u_dev: float = 0.0
    max_sigma_dev: float = 0.0
    max_kkt: float = 0.0
    infeasible_agreed: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches


@dataclass
class VerifyReport:
    families: dict[str, FamilyResult]
    seconds: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.families.values())

    @property
    def max_deviation(self) -> float:
        return max((max(r.max_u_dev, r.max_sigma_dev) for r in self.families.values()), default=0.0)

    @property
    def max_kkt(self) -> float:
        return max((r.max_kkt for r in self.families.values()), default=0.0)

    def write_mismatches(self, path) -> int:
        rows = [row for r in self.families.values() for row in r.mismatches]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MISMATCH_COLUMNS)
            for row in rows:
                w.writerow([row.get(c, "") for c in MISMATCH_COLUMNS])
        return len(rows)


def random_instances(rng: np.random.Generator, family: str, dims, count: int) -> list[Instance]:
    """Draw ``count`` instances, cycling through ``dims``.

    Magnitudes are log-uniform over two decades. About one draw in four is
    degenerate: zero barrier row (with a nonnegative margin), zero CLF row,
    parallel rows, or a margin exactly at zero. For the tunable family
    varsigma * phi is kept in [-6, 6] so both the saturated and the
    exponential regime of 1/eps are exercised without the constant running
    past 1e3, where an absolute 1e-8 comparison would be below float64
    resolution of u.
    """
    dims = tuple(int(d) for d in dims)
    mmax = max(dims)
    ms = [dims[k % len(dims)] for k in range(count)]
    mag = lambda *shape: 10.0 ** rng.uniform(-1, 1, size=shape)
    A_b = rng.normal(size=(count, mmax)) * mag(count, 1)
    A_v = rng.normal(size=(count, mmax)) * mag(count, 1)
    G = rng.normal(size=(count, 2)) * mag(count, 2)
    NOM = rng.normal(size=(count, mmax)) * mag(count, 1)
    kind = rng.integers(20, size=count)
    par = rng.normal(size=count)
    rho = 10.0 ** rng.uniform(-2, 2, size=count)
    tissf = family.startswith("tissf")
    if tissf:
        p2 = rng.integers(1, 3, size=count)
        LG2 = rng.normal(size=(count, 2)) * 0.5
        expo = rng.uniform(-6, 6, size=count)
        eps0 = 10.0 ** rng.uniform(-2, 0, size=count)
        vs = rng.uniform(1, 200, size=count)
        form = rng.integers(2, size=count)
        gam = rng.uniform(0, 5, size=count)
        gain = rng.uniform(0.1, 5, size=count)

    out = []
    for k in range(count):
        m = ms[k]
        a_b, a_v = A_b[k, :m].copy(), A_v[k, :m].copy()
        gv, gb = float(G[k, 0]), float(G[k, 1])
        if kind[k] == 0:
            a_b[:] = 0.0
            gb = abs(gb)  # zero authority: only consistent with a nonnegative margin
        elif kind[k] == 1:
            a_v[:] = 0.0
        elif kind[k] == 2:
            a_v = a_b * par[k]
        elif kind[k] == 3:
            gb = 0.0
        elif kind[k] == 4:
            gv = 0.0
        inst = Instance(
            family=family,
            m=m,
            clf=ConstraintRow(gv, a_v, CLF_SOFT) if "minnorm" in family else None,
            cbf=ConstraintRow(gb, a_b, CBF_HARD),
            rho=float(rho[k]),
        )
        if "filter" in family:
            inst.nominal = NOM[k, :m].copy()
        if tissf:
            inst.lg2 = LG2[k, : p2[k]].copy()
            form_k = EpsilonForm.RECIPROCAL_NEGATED if form[k] else EpsilonForm.PAPER_RECIPROCAL
            sign = 1.0 if form_k is EpsilonForm.PAPER_RECIPROCAL else -1.0
            inst.phi_top = float(sign * expo[k] / vs[k])
            inst.params = TissfParams(epsilon0=float(eps0[k]), varsigma=float(vs[k]), gamma=float(gam[k]), form=form_k)
            inst.beta_r = ClassKSpec(gain=float(gain[k]))
        out.append(inst)
    return out


def random_instance(rng: np.random.Generator, family: str, m: int) -> Instance:
    return random_instances(rng, family, (m,), 1)[0]


def _oracle_gamma_b(inst: Instance) -> float:
    if not inst.family.startswith("tissf"):
        return inst.cbf.gamma
    # 1/eps written out independently of the tissf module
    prm = inst.params
    s = prm.varsigma * inst.phi_top * (1.0 if prm.form is EpsilonForm.PAPER_RECIPROCAL else -1.0)
    s = min(max(s, -500.0), 500.0)
    return inst.cbf.gamma - float(np.dot(inst.lg2, inst.lg2)) * (prm.epsilon0 + math.exp(s))


def oracle_program(inst: Instance) -> tuple[TinyQP, np.ndarray | None]:
    cbf = ConstraintRow(_oracle_gamma_b(inst), inst.cbf.a, CBF_HARD)
    rows = (inst.clf, cbf) if inst.clf is not None else (cbf,)
    return TinyQP(inst.m, rows, inst.rho if inst.clf is not None else None), inst.nominal


def closed_form(inst: Instance):
    # looked up through the module so a patched implementation is exercised
    if inst.family == "minnorm":
        return solvers.minnorm_clf_cbf(inst.clf, inst.cbf, inst.rho)
    if inst.family == "filter":
        return solvers.safety_filter(inst.nominal, inst.cbf)
    if inst.family == "tissf_minnorm":
        return solvers.tissf_minnorm(inst.clf, inst.cbf, inst.lg2, inst.phi_top, inst.params, inst.beta_r, inst.rho)
    return solvers.tissf_filter(inst.nominal, inst.cbf, inst.lg2, inst.phi_top, inst.params, inst.beta_r)


def _describe(inst: Instance, index: int) -> dict:
    fmt = lambda v: " ".join(repr(float(x)) for x in np.atleast_1d(v)) if v is not None else ""
    return {
        "family": inst.family,
        "index": index,
        "m": inst.m,
        "gamma_v": repr(inst.clf.gamma) if inst.clf is not None else "",
        "gamma_b": repr(inst.cbf.gamma),
        "a_v": fmt(inst.clf.a) if inst.clf is not None else "",
        "a_b": fmt(inst.cbf.a),
        "rho": repr(inst.rho),
        "nominal": fmt(inst.nominal),
        "lg2": fmt(inst.lg2),
        "phi_top": repr(inst.phi_top),
    }


def check_instance(inst: Instance, index: int, result: FamilyResult) -> None:
    qp, center = oracle_program(inst)
    result.samples += 1
    try:
        ref = solve_enumerate(qp, center)
    except InfeasibleQP:
        ref = None
    try:
        got = closed_form(inst)
    except InfeasibleQP:
        got = None
    if ref is None or got is None:
        if ref is None and got is None:
            result.infeasible_agreed += 1
        elif ref is None and "filter" in inst.family and got.warning:
            # the filter passes the nominal through with a warning instead of raising
            result.infeasible_agreed += 1
        else:
            row = _describe(inst, index)
            row["note"] = "oracle infeasible" if ref is None else "closed form raised"
            result.mismatches.append(row)
        return
    du = float(np.max(np.abs(got.u - ref.u))) if inst.m else 0.0
    ds = abs(got.sigma - ref.sigma)
    kkt = verify_kkt(qp, got, center).worst
    result.max_u_dev = max(result.max_u_dev, du)
    result.max_sigma_dev = max(result.max_sigma_dev, ds)
    result.max_kkt = max(result.max_kkt, kkt)
    if du > DEVIATION_TOL or ds > DEVIATION_TOL or kkt > KKT_TOL:
        row = _describe(inst, index)
        row.update(
            u_closed=" ".join(repr(float(v)) for v in got.u),
            u_oracle=" ".join(repr(float(v)) for v in ref.u),
            sigma_closed=repr(got.sigma),
            sigma_oracle=repr(ref.sigma),
            deviation=repr(max(du, ds)),
            kkt=repr(kkt),
            note="deviation" if max(du, ds) > DEVIATION_TOL else "kkt",
        )
        result.mismatches.append(row)


def run_verification(
    samples: int,
    seed: int = 0,
    dims=(1, 2, 3),
    families=FAMILIES,
) -> VerifyReport:
    if samples <= 0:
        raise ValueError("samples must be positive")
    dims = tuple(int(d) for d in dims)
    if not dims or min(dims) < 1:
        raise ValueError("dims must be positive integers")
    unknown = set(families) - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown families {sorted(unknown)}")
    t0 = time.perf_counter()
    out = {}
    for fi, fam in enumerate(families):
        rng = np.random.default_rng([seed, fi])
        res = FamilyResult(fam)
        for k, inst in enumerate(random_instances(rng, fam, dims, samples)):
            check_instance(inst, k, res)
        out[fam] = res
    return VerifyReport(out, time.perf_counter() - t0)
