"""Fixed-step closed-loop simulation of the pendulum benchmark."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from hocbf_tissf.barrier import BarrierSpec, eval_chain, lower_bound_barrier
from hocbf_tissf.clf import LyapunovSpec, eval_clf_chain, tracking_clf
from hocbf_tissf.errors import DivergenceError
from hocbf_tissf.plant import (
    ANGLE_IDX,
    PendulumParams,
    PlantModel,
    Reference,
    eval_dynamics,
    make_reference,
    pendulum_spring_cart,
)
from hocbf_tissf.scenario import Scenario
from hocbf_tissf.solvers import (
    CBF_HARD,
    CLF_SOFT,
    ConstraintRow,
    minnorm_clf_cbf,
    safety_filter,
    tissf_filter,
    tissf_minnorm,
    worstcase_row,
)
from hocbf_tissf.tissf import varrho_of

TRAJECTORY_COLUMNS = (
    "t",
    "x11", "x12", "x21", "x22",
    "u1", "u2",
    "unom1", "unom2",
    "sigma1", "sigma2",
    "phi0_1", "phi1_1", "phi0_2", "phi1_2",
    "psi0_1", "psi0_2",
    "varrho1", "varrho2",
    "region1", "region2",
)

Controller = Callable[[np.ndarray, float], np.ndarray]

# states beyond this magnitude are treated as divergence
DIVERGENCE_BOUND = 1e8


def rk4_step(plant: PlantModel, controller: Controller, disturbance, x, t: float, dt: float, u0=None) -> np.ndarray:
    """One classical RK4 step; the controller and the disturbance are
    re-evaluated at every stage. ``u0`` reuses an already computed first-stage control."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    h2 = 0.5 * dt

    def F(xs, ts, u=None):
        if u is None:
            u = controller(xs, ts)
        return eval_dynamics(plant, xs, u, disturbance(ts))

    k1 = F(x, t, u0)
    k2 = F(x + h2 * k1, t + h2)
    k3 = F(x + h2 * k2, t + h2)
    k4 = F(x + dt * k3, t + dt)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def backstepping_nominal(k1: float, k2: float, params: PendulumParams, reference: Reference, x, t: float) -> np.ndarray:
    """Backstepping tracking law for both pendulums.

    The velocity drift is cancelled through the input gain, i.e. the law is
    written for  wl^2 * xdot_2 = wl^2 * drift + tau.
    """
    r0, r1, r2 = reference.value(t), reference.derivative(1)(t), reference.derivative(2)(t)
    drift = params.velocity_drift(x)
    wl2 = 1.0 / params.input_gain
    u = np.empty(2)
    for i, (ia, iv) in enumerate(((0, 1), (2, 3))):
        z1 = x[ia] - r0[i]
        v1 = -k1 * z1 + r1[i]
        z2 = x[iv] - v1
        v1_dot = -k1 * (x[iv] - r1[i]) + r2[i]
        u[i] = wl2 * (-drift[i] - k2 * z2 + z1 + v1_dot)
    return u


@dataclass
class StepInfo:
    u: np.ndarray
    u_nom: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray  # (2 pendulums, 2 chain levels)
    psi: np.ndarray
    varrho: np.ndarray
    varrho_b: np.ndarray
    regions: tuple[str, str]
    nominal_feasible: np.ndarray


class ClosedLoop:
    """Plant, chains and pointwise controller assembled from a scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = sc = scenario
        self.plant = pendulum_spring_cart(sc.params, sc.channel)
        self.reference = make_reference(sc.reference)
        n = self.plant.n
        self.barriers: list[BarrierSpec] | None = None
        if sc.lower_bounds is not None:
            self.barriers = [
                lower_bound_barrier(ANGLE_IDX[i], sc.lower_bounds[i], n, sc.betas) for i in range(2)
            ]
        self.clfs: list[LyapunovSpec] | None = None
        if sc.has_clf:
            self.clfs = [
                tracking_clf(ANGLE_IDX[i], self.reference, i, n, sc.clf_eta, sc.clf_alphas) for i in range(2)
            ]
        self.disturbance = sc.disturbance

    def nominal(self, x, t) -> np.ndarray | None:
        sc = self.scenario
        if not sc.has_nominal:
            return None
        return backstepping_nominal(sc.k1, sc.k2, sc.params, self.reference, x, t)

    def __call__(self, x, t) -> np.ndarray:
        return self.evaluate(x, t, record=False)

    def evaluate(self, x, t, record: bool = False):
        sc = self.scenario
        x = np.asarray(x, dtype=float)
        pt = self.plant.at(x)
        u_nom = self.nominal(x, t)
        u = np.zeros(2)
        if record:
            sigma = np.zeros(2)
            phi = np.full((2, 2), np.nan)
            psi = np.full(2, np.nan)
            varrho = np.full(2, np.nan)
            varrho_b = np.full(2, np.nan)
            regions = ["", ""]
            feasible = np.zeros(2, dtype=bool)

        if sc.kind == "nominal_only":
            u[:] = u_nom
        for i in range(2):
            ch = eval_chain(self.barriers[i], self.plant, x, pt) if self.barriers else None
            ce = eval_clf_chain(self.clfs[i], self.plant, x, t, pt) if self.clfs else None
            out = None
            if sc.kind != "nominal_only":
                cbf = ConstraintRow(ch.gamma_b, ch.lg1[i : i + 1], CBF_HARD)
                lg2 = ch.lg2
                clf = ConstraintRow(ce.gamma_v, ce.a_v[i : i + 1], CLF_SOFT) if ce is not None else None
                nom_i = u_nom[i : i + 1] if u_nom is not None else None
                beta_r = self.barriers[i].beta_top
                if sc.kind == "minnorm":
                    out = minnorm_clf_cbf(clf, cbf, sc.rho)
                elif sc.kind == "filter":
                    out = safety_filter(nom_i, cbf)
                elif sc.kind == "tissf_minnorm":
                    out = tissf_minnorm(clf, cbf, lg2, ch.phi_top, sc.tissf, beta_r, sc.rho)
                elif sc.kind == "tissf_filter":
                    out = tissf_filter(nom_i, cbf, lg2, ch.phi_top, sc.tissf, beta_r)
                else:  # robust_worstcase
                    row = worstcase_row(cbf, lg2, sc.tissf.gamma)
                    out = safety_filter(nom_i, row) if sc.has_nominal else minnorm_clf_cbf(clf, row, sc.rho)
                u[i] = out.u[0]
            if record:
                if out is not None:
                    sigma[i] = out.sigma
                    regions[i] = out.region
                    if u_nom is not None:
                        g_eff = out.info.get("gamma_eff", cbf.gamma)
                        if sc.kind == "robust_worstcase":
                            g_eff = worstcase_row(cbf, ch.lg2, sc.tissf.gamma).gamma
                        feasible[i] = g_eff + float(cbf.a @ nom_i) >= 0
                else:
                    regions[i] = "nominal"
                if ch is not None:
                    phi[i, : len(ch.phi)] = ch.phi
                    if sc.tissf is not None and self.barriers[i].beta_top.invertible:
                        varrho[i] = varrho_of(sc.tissf, self.barriers[i].beta_top, ch.phi_top)
                        varrho_b[i] = varrho_of(sc.tissf, self.barriers[i].beta_top, ch.phi[0])
                    else:
                        varrho[i] = varrho_b[i] = 0.0
                if ce is not None:
                    psi[i] = ce.phi_v[0]
        if not record:
            return u
        return StepInfo(
            u=u,
            u_nom=u_nom if u_nom is not None else np.full(2, np.nan),
            sigma=sigma,
            phi=phi,
            psi=psi,
            varrho=varrho,
            varrho_b=varrho_b,
            regions=tuple(regions),
            nominal_feasible=feasible,
        )


def disturbance_signal(profile, t: float) -> np.ndarray:
    return profile(t)


@dataclass
class TrajectoryRecord:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    u_nom: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray  # (steps, 2, 2)
    psi: np.ndarray
    varrho: np.ndarray
    varrho_b: np.ndarray
    regions: list
    nominal_feasible: np.ndarray
    metrics: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def rows(self):
        for k in range(len(self.t)):
            yield (
                [self.t[k], *self.x[k], *self.u[k], *self.u_nom[k], *self.sigma[k]]
                + [self.phi[k, 0, 0], self.phi[k, 0, 1], self.phi[k, 1, 0], self.phi[k, 1, 1]]
                + [*self.psi[k], *self.varrho[k]]
                + list(self.regions[k])
            )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_COLUMNS)
            for row in self.rows():
                w.writerow([repr(float(v)) if not isinstance(v, str) else v for v in row])


def read_trajectory_csv(path) -> dict[str, list]:
    """Parse a trajectory CSV, checking the fixed column layout."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected trajectory columns: {header}")
        cols: dict[str, list] = {c: [] for c in header}
        for line in r:
            if len(line) != len(header):
                raise ValueError(f"row has {len(line)} fields, expected {len(header)}")
            for c, v in zip(header, line):
                cols[c].append(v if c.startswith("region") else float(v))
    return cols


def _allocate(n: int) -> dict:
    return dict(
        t=np.empty(n), x=np.empty((n, 4)), u=np.empty((n, 2)), u_nom=np.empty((n, 2)),
        sigma=np.empty((n, 2)), phi=np.empty((n, 2, 2)), psi=np.empty((n, 2)),
        varrho=np.empty((n, 2)), varrho_b=np.empty((n, 2)), regions=[None] * n,
        nominal_feasible=np.zeros((n, 2), dtype=bool),
    )


def _truncate(buf: dict, k: int) -> TrajectoryRecord:
    return TrajectoryRecord(**{key: v[:k] for key, v in buf.items()})


def _nanmin(a) -> float | None:
    a = np.asarray(a, dtype=float)
    if a.size == 0 or np.all(np.isnan(a)):
        return None
    return float(np.nanmin(a))


def compute_metrics(rec: TrajectoryRecord, loop: ClosedLoop) -> dict:
    sc = loop.scenario
    ref = np.array([loop.reference.value(t) for t in rec.t])
    err = rec.x[:, list(ANGLE_IDX)] - ref
    lo, hi = sc.rmse_window
    win = (rec.t >= lo - 1e-12) & (rec.t <= hi + 1e-12)
    phi0 = rec.phi[:, :, 0]
    m = {
        "scenario": sc.name,
        "controller": sc.kind,
        "steps": int(len(rec) - 1),
        "dt": sc.dt,
        "horizon": sc.horizon,
        "tracking_rmse": float(np.sqrt(np.mean(err[win] ** 2))) if np.any(win) else None,
        "tracking_rmse_per_pendulum": [float(v) for v in np.sqrt(np.mean(err[win] ** 2, axis=0))] if np.any(win) else None,
        "final_tracking_error": float(np.linalg.norm(err[-1])),
        "max_abs_u": float(np.max(np.abs(rec.u))),
        "max_sigma": float(np.max(np.abs(rec.sigma))),
        "min_phi0": _nanmin(phi0),
        "min_phi0_per_pendulum": [_nanmin(phi0[:, i]) for i in range(2)],
        "min_chain_margin": _nanmin(rec.phi),
        "min_phi_issf": _nanmin(phi0 + rec.varrho),
        "min_phi_issf_per_pendulum": [_nanmin(phi0[:, i] + rec.varrho[:, i]) for i in range(2)],
        "min_phi_issf_b": _nanmin(phi0 + rec.varrho_b),
    }
    if sc.lower_bounds is not None:
        below = ref < np.asarray(sc.lower_bounds)[None, :]
        m["reference_infeasible_fraction"] = float(np.mean(np.any(below, axis=1)))
    if sc.has_nominal and sc.kind in ("filter", "tissf_filter", "robust_worstcase"):
        feas = rec.nominal_feasible
        pert = np.abs(rec.u - rec.u_nom)
        m["filter_inactive_fraction"] = float(np.mean(feas))
        m["max_filter_perturbation_when_feasible"] = float(np.max(pert[feas])) if np.any(feas) else 0.0
    return m


def run_scenario(scenario: Scenario, loop: ClosedLoop | None = None) -> TrajectoryRecord:
    loop = loop or ClosedLoop(scenario)
    n = scenario.n_steps
    dt = scenario.dt
    buf = _allocate(n + 1)
    x = np.array(scenario.x0, dtype=float)
    for k in range(n + 1):
        t = k * dt
        try:
            info = loop.evaluate(x, t, record=True)
        except (ValueError, OverflowError) as e:
            # non-finite chain/constraint values from an exploding state
            raise DivergenceError(f"controller failed at t={t:.6g}: {e}", _truncate(buf, k)) from e
        if not np.all(np.isfinite(info.u)):
            raise DivergenceError(f"non-finite control at t={t:.6g}", _truncate(buf, k))
        buf["t"][k] = t
        buf["x"][k] = x
        buf["u"][k] = info.u
        buf["u_nom"][k] = info.u_nom
        buf["sigma"][k] = info.sigma
        buf["phi"][k] = info.phi
        buf["psi"][k] = info.psi
        buf["varrho"][k] = info.varrho
        buf["varrho_b"][k] = info.varrho_b
        buf["regions"][k] = info.regions
        buf["nominal_feasible"][k] = info.nominal_feasible
        if k == n:
            break
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                x = rk4_step(loop.plant, loop, loop.disturbance, x, t, dt, u0=info.u)
        except (ValueError, OverflowError) as e:
            raise DivergenceError(f"integration failed after t={t:.6g}: {e}", _truncate(buf, k + 1)) from e
        if not (np.all(np.isfinite(x)) and np.max(np.abs(x)) <= DIVERGENCE_BOUND):
            raise DivergenceError(f"state diverged after t={t:.6g}", _truncate(buf, k + 1))
    rec = TrajectoryRecord(**buf)
    rec.metrics = compute_metrics(rec, loop)
    return rec
