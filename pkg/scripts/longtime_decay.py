#!/usr/bin/env python3
"""Long-horizon run: trajectory tails and the stationarity of the final state."""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from fracphase.analysis import omega_limit_probe
from fracphase.galerkin import Coupling, ProblemData, assemble
from fracphase.potentials import regular_potential
from fracphase.spectral import build_interval_basis
from fracphase.timestepper import SchemeConfig, integrate


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--t-final", type=float, default=200.0)
    parser.add_argument("--dt", type=float, default=1e-2)
    parser.add_argument("--kind", choices=["neumann", "dirichlet"],
                        default="neumann", help="boundary condition of the A operator")
    args = parser.parse_args()

    basis_b = build_interval_basis("neumann", 1.0, 8)
    basis_a = basis_b if args.kind == "neumann" else \
        build_interval_basis("dirichlet", 1.0, 8)
    theta0 = (lambda x: 0.2 + 0.3 * np.cos(np.pi * x)) if args.kind == "neumann" \
        else (lambda x: 0.3 * np.sin(np.pi * x))
    data = ProblemData(theta0=theta0,
                       phi0=lambda x: 0.4 + 0.2 * np.cos(np.pi * x),
                       coupling=Coupling.constant(0.5))
    system = assemble(data, basis_a, basis_b, 0.5, 0.5, 1e-2, regular_potential(1.0))
    run = integrate(system, SchemeConfig("imex_euler", dt=args.dt),
                    args.t_final, 100)
    rep = omega_limit_probe(system, run)
    print(f"tail sup |A^r theta| : {rep.tail_sup_ar_theta:.3e}")
    print(f"tail sup |d_t phi|   : {rep.tail_sup_dtphi:.3e}")
    print(f"stationary residual  : {rep.stationary_residual:.3e}")
    print(f"final |theta|        : {rep.final_theta_norm:.3e}")
    print(f"final kernel state   : phi_0 = {run.final_state.phi[0]:.6f}, "
          f"theta_0 = {run.final_state.theta[0]:.6f}")
    print(f"probe passed         : {rep.passed}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
