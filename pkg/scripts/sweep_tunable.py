"""Tunability check for both epsilon forms, plus an optional closed-loop sweep.

The check evaluates 1 + d varrho / d phi on a phi grid; the closed-loop part
reruns a bundled scenario over a parameter grid (see ``hocbf-tissf sweep``).
"""
from __future__ import annotations

import argparse

import numpy as np

from hocbf_tissf.classk import ClassKSpec
from hocbf_tissf.cli import main as cli_main
from hocbf_tissf.tissf import EpsilonForm, TissfParams, check_tunable_condition, epsilon_of, varrho_of


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=float, default=10.0)
    ap.add_argument("--epsilon0", type=float, default=0.06)
    ap.add_argument("--varsigma", type=float, default=200.0)
    ap.add_argument("--beta-gain", type=float, default=1.0)
    ap.add_argument("--simulate", metavar="CONFIG", help="also sweep this scenario (path or bundled name)")
    ap.add_argument("--param", default="varsigma")
    ap.add_argument("--grid", default="0,1,2")
    ap.add_argument("--out", default="runs/sweep")
    args = ap.parse_args()

    beta = ClassKSpec(gain=args.beta_gain)
    phis = np.linspace(-0.5, 0.5, 2001)
    for form in EpsilonForm:
        prm = TissfParams(args.epsilon0, args.varsigma, args.gamma, form)
        rep = check_tunable_condition(prm, beta, phis)
        print(f"{form.value:<20} min(1 + dvarrho/dphi) = {rep.min_margin:.6g} at phi = {rep.argmin_phi:+.4f}"
              f"  -> {'holds' if rep.passed else 'violated'}")
        for phi in (-0.1, 0.0, 0.1):
            print(f"    phi={phi:+.2f}  eps={epsilon_of(prm, phi):.6g}  varrho={varrho_of(prm, beta, phi):.6g}")
    if args.simulate:
        raise SystemExit(cli_main(["sweep", "--config", args.simulate, "--param", args.param,
                                   "--grid", args.grid, "--out", args.out]))


if __name__ == "__main__":
    main()
