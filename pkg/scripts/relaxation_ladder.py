#!/usr/bin/env python3
"""sigma -> 0 ladder: fractional runs against the direct phase-relaxation solver.

Runs the regular-potential scenario and an obstacle scenario that touches both
obstacles, printing the L2(Q) error columns and the multiplier sign summary.
"""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from fracphase.analysis import RelaxLimitSetup, relaxation_limit_study
from fracphase.galerkin import Coupling, ProblemData
from fracphase.potentials import double_obstacle_potential, regular_potential
from fracphase.spectral import build_interval_basis
from fracphase.timestepper import SchemeConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sigmas", type=float, nargs="+",
                        default=[0.5, 0.25, 0.1, 0.05])
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--t-final", type=float, default=1.0)
    args = parser.parse_args()

    basis = build_interval_basis("neumann", 1.0, 8)
    scheme = SchemeConfig("implicit_prox", dt=args.dt)
    scenarios = {
        "regular": RelaxLimitSetup(
            sigmas=args.sigmas,
            data=ProblemData(theta0=lambda x: 0.1 + 0.4 * np.cos(np.pi * x),
                             phi0=lambda x: 0.1 + 0.3 * np.cos(np.pi * x),
                             coupling=Coupling.constant(0.5)),
            potential=regular_potential(1.0),
            basis_a=basis, basis_b=basis, r=0.5),
        "double_obstacle": RelaxLimitSetup(
            sigmas=args.sigmas,
            data=ProblemData(theta0=lambda x: 2.5 * np.cos(np.pi * x),
                             phi0=lambda x: 0.8 * np.cos(np.pi * x),
                             coupling=Coupling.constant(2.0)),
            potential=double_obstacle_potential(0.5),
            basis_a=basis, basis_b=basis, r=0.5),
    }
    for name, setup in scenarios.items():
        report = relaxation_limit_study(setup, scheme, args.t_final, 10)
        print(f"\n[{name}]  sigma    |phi_s - phi_lim|    |theta_s - theta_lim|")
        for s, pe, te in zip(report.sigmas, report.phi_errors, report.theta_errors):
            print(f"  {s:8.3f}   {pe:.6e}       {te:.6e}")
        print(f"  monotone decrease: {report.monotone}")
        limit = report.limit_run
        if limit.phi_grid_series is not None:
            pg, xi = limit.phi_grid_series, limit.xi_series
            upper, lower = pg >= 1 - 1e-9, pg <= -1 + 1e-9
            print(f"  limit run: max|phi| = {np.max(np.abs(pg)):.6f}", end="")
            if upper.any():
                print(f", min xi at upper contact = {xi[upper].min():.3e}", end="")
            if lower.any():
                print(f", max xi at lower contact = {xi[lower].max():.3e}", end="")
            print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
