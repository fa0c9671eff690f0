"""Command-line entry point.

    hocbf-tissf simulate      --config case1 --out runs/case1
    hocbf-tissf verify-oracle --samples 10000 --seed 7 --out runs/oracle
    hocbf-tissf regions       --config case1 --grid 41 --out runs/regions
    hocbf-tissf sweep         --config case1 --param varsigma --grid 0,1,2 --out runs/sweep

Exit codes: 0 ok, 2 usage/config error, 3 divergence, 4 verification
failure, 5 missing input file.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from hocbf_tissf import __version__, solvers, verify
from hocbf_tissf.barrier import eval_chain
from hocbf_tissf.clf import eval_clf_chain
from hocbf_tissf.errors import ConfigError, DivergenceError, InfeasibleQP
from hocbf_tissf.scenario import (
    SWEEP_PARAMS,
    bundled_config,
    read_config,
    scenario_from_dict,
    with_override,
)
from hocbf_tissf.sim import ClosedLoop, TrajectoryRecord, compute_metrics, run_scenario
from hocbf_tissf.solvers import CBF_HARD, CLF_SOFT, ConstraintRow, classify_region
from hocbf_tissf.tissf import issf_rhs, varrho_of

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_VERIFY = 4
EXIT_MISSING = 5

log = logging.getLogger("hocbf_tissf")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_manifest(out: Path, command: str, config, seed, started: float, status: int, extra=None) -> None:
    m = {
        "command": command,
        "config": str(config) if config is not None else None,
        "out": str(out),
        "seed": seed,
        "version": __version__,
        "argv": sys.argv[1:],
        "wall_seconds": round(time.perf_counter() - started, 6),
        "exit_code": status,
    }
    if extra:
        m.update(extra)
    write_json(out / "manifest.json", m)


def resolve_config(arg: str) -> Path:
    """A path, or the name of a bundled scenario."""
    p = Path(arg)
    if p.exists():
        return p
    b = bundled_config(arg)
    if b.exists():
        return b
    raise FileNotFoundError(arg)


def _load_doc(args) -> tuple[Path, dict]:
    path = resolve_config(args.config)
    doc = read_config(path)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    if args.seed is not None:
        doc.setdefault("simulation", {})["seed"] = args.seed
    return path, doc


def _write_run(out: Path, rec: TrajectoryRecord, metrics: dict, stem: str = "") -> None:
    out.mkdir(parents=True, exist_ok=True)
    tmp = out / f".{stem}trajectory.csv.tmp"
    rec.write_csv(tmp)
    os.replace(tmp, out / f"{stem}trajectory.csv")
    write_json(out / f"{stem}metrics.json", metrics)


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    path, doc = _load_doc(args)
    sc = scenario_from_dict(doc)
    try:
        rec = run_scenario(sc)
    except DivergenceError as e:
        log.error("divergence: %s", e)
        if e.record is not None and len(e.record):
            metrics = compute_metrics(e.record, ClosedLoop(sc))
            metrics.update(diverged=True, error=str(e))
            _write_run(out, e.record, metrics)
        write_manifest(out, "simulate", path, sc.seed, started, EXIT_DIVERGED)
        return EXIT_DIVERGED
    rec.metrics["diverged"] = False
    _write_run(out, rec, rec.metrics)
    write_manifest(out, "simulate", path, sc.seed, started, EXIT_OK)
    log.info("wrote %s (min_phi_issf=%s)", out, rec.metrics.get("min_phi_issf"))
    return EXIT_OK


def cmd_verify_oracle(args) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    seed = 0 if args.seed is None else args.seed
    report = verify.run_verification(args.samples, seed=seed, dims=args.dims)
    out.mkdir(parents=True, exist_ok=True)
    n_bad = report.write_mismatches(out / "mismatches.csv")
    summary = {
        "passed": report.passed,
        "samples_per_family": args.samples,
        "dims": list(args.dims),
        "seconds": report.seconds,
        "max_deviation": report.max_deviation,
        "max_kkt_residual": report.max_kkt,
        "deviation_tol": verify.DEVIATION_TOL,
        "kkt_tol": verify.KKT_TOL,
        "families": {
            f: {
                "samples": r.samples,
                "max_u_deviation": r.max_u_dev,
                "max_sigma_deviation": r.max_sigma_dev,
                "max_kkt_residual": r.max_kkt,
                "infeasible_agreed": r.infeasible_agreed,
                "mismatches": len(r.mismatches),
            }
            for f, r in report.families.items()
        },
    }
    write_json(out / "verify.json", summary)
    status = EXIT_OK if report.passed else EXIT_VERIFY
    write_manifest(out, "verify-oracle", None, seed, started, status)
    print(f"max deviation {report.max_deviation:.3e}, max KKT residual {report.max_kkt:.3e}, "
          f"{n_bad} mismatches, {report.seconds:.2f} s")
    return status


REGION_COLUMNS = ("theta", "theta_dot", "gamma_v", "gamma_b", "gamma_eff", "region", "candidates", "basis", "active_set")


def cmd_regions(args) -> int:
    """Classify a (theta_1, theta_1_dot) grid of pendulum-1 states at t = 0."""
    started = time.perf_counter()
    out = Path(args.out)
    path, doc = _load_doc(args)
    sc = scenario_from_dict(doc)
    loop = ClosedLoop(sc)
    if loop.barriers is None:
        raise ConfigError("regions needs a `barrier` section")
    n = int(args.grid[0]) if args.grid else 41
    if n < 2:
        raise ConfigError("--grid for regions is a single resolution >= 2")
    lo = sc.lower_bounds[0]
    thetas = np.linspace(lo - 0.5, lo + 1.5, n)
    rates = np.linspace(-2.0, 2.0, n)
    rows = []
    for th in thetas:
        for w in rates:
            x = np.array(sc.x0, dtype=float)
            x[0], x[1] = th, w
            pt = loop.plant.at(x)
            ch = loop.barriers[0]
            ce = eval_chain(ch, loop.plant, x, pt)
            cbf = ConstraintRow(ce.gamma_b, ce.lg1[0:1], CBF_HARD)
            gamma_eff = cbf.gamma
            if sc.tissf is not None and sc.kind.startswith("tissf"):
                gamma_eff = cbf.gamma - issf_rhs(sc.tissf, ce.lg2, ce.phi_top)
            eff = ConstraintRow(gamma_eff, cbf.a, CBF_HARD)
            gv = ""
            if loop.clfs is not None:
                cv = eval_clf_chain(loop.clfs[0], loop.plant, x, 0.0, pt)
                clf = ConstraintRow(cv.gamma_v, cv.a_v[0:1], CLF_SOFT)
                gv = repr(clf.gamma)
                gamma_d = None
                if sc.tissf is not None and sc.kind.startswith("tissf"):
                    gamma_d = cbf.gamma + varrho_of(sc.tissf, ch.beta_top, ce.phi_top)
                lab = classify_region(clf, cbf, sc.rho, gamma_d=gamma_d)
                try:
                    res = solvers.minnorm_clf_cbf(clf, eff, sc.rho)
                    basis, active = sorted(res.basis), sorted(res.active_set)
                except InfeasibleQP:
                    basis, active = ["infeasible"], []
                label, cands = lab.label, lab.candidates
            else:
                u_nom = loop.nominal(x, 0.0)
                res = solvers.safety_filter(u_nom[0:1], eff)
                label, cands = res.region, (res.region,)
                basis, active = sorted(res.basis), sorted(res.active_set)
            rows.append([repr(float(th)), repr(float(w)), gv, repr(cbf.gamma), repr(gamma_eff), label,
                         "|".join(cands), "|".join(basis), "|".join(active)])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "regions.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(REGION_COLUMNS)
        wr.writerows(rows)
    write_manifest(out, "regions", path, sc.seed, started, EXIT_OK, {"grid": n})
    return EXIT_OK


SWEEP_COLUMNS = ("param", "value", "status", "min_phi0", "min_phi_issf", "min_chain_margin", "tracking_rmse", "max_abs_u")


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; choose from {sorted(SWEEP_PARAMS)}")
    if not args.grid:
        raise ConfigError("sweep needs --grid v1,v2,...")
    path, doc = _load_doc(args)
    rows = []
    diverged = False
    for k, v in enumerate(args.grid):
        sc = scenario_from_dict(with_override(doc, args.param, v))
        point = out / f"point_{k:03d}"
        status = "ok"
        try:
            rec = run_scenario(sc)
            metrics = rec.metrics
            metrics["diverged"] = False
        except DivergenceError as e:
            log.error("%s=%s diverged: %s", args.param, v, e)
            diverged, status = True, "diverged"
            rec = e.record
            metrics = compute_metrics(rec, ClosedLoop(sc)) if rec is not None and len(rec) else {}
            metrics.update(diverged=True, error=str(e))
        metrics[args.param] = float(v)
        if rec is not None and len(rec):
            _write_run(point, rec, metrics)
        else:
            write_json(point / "metrics.json", metrics)
        rows.append([args.param, repr(float(v)), status] + [
            "" if metrics.get(c) is None else repr(metrics[c]) for c in SWEEP_COLUMNS[3:]
        ])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SWEEP_COLUMNS)
        wr.writerows(rows)
    status = EXIT_DIVERGED if diverged else EXIT_OK
    seed = doc.get("simulation", {}).get("seed", 0)
    write_manifest(out, "sweep", path, seed, started, status, {"param": args.param, "grid": list(args.grid)})
    return status


def _positive_int(s: str) -> int:
    v = int(s)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _int_list(s: str) -> list[int]:
    try:
        v = [int(t) for t in s.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None
    if not v or min(v) < 1:
        raise argparse.ArgumentTypeError("dims must be positive integers")
    return v


def _float_list(s: str) -> list[float]:
    try:
        return [float(t) for t in s.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hocbf-tissf", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario, write trajectory CSV + metrics JSON")
    s.add_argument("--config", required=True, help="scenario YAML path or bundled name (case1, case2)")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("verify-oracle", help="compare closed forms with the enumeration oracle")
    s.add_argument("--samples", type=_positive_int, default=10000, help="instances per controller family")
    s.add_argument("--seed", type=int)
    s.add_argument("--dims", type=_int_list, default=[1, 2, 3], help="input dimensions, e.g. 1,2,3")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_verify_oracle)

    s = sub.add_parser("regions", help="dump region labels on a pendulum-1 state grid")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--grid", type=_float_list, help="grid resolution per axis (default 41)")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_regions)

    s = sub.add_parser("sweep", help="rerun a scenario over a parameter grid")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    s.add_argument("--grid", required=True, type=_float_list, help="comma-separated values")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: input file not found: {e.filename or e}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
