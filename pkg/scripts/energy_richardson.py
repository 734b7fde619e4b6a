#!/usr/bin/env python3
"""Richardson check of the energy-balance residual on the smoke scenario.

Halving dt should halve the maximum ledger residual (first-order scheme);
prints the residual ladder and the observed ratios.
"""
import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from fracphase.galerkin import Coupling, ProblemData, assemble
from fracphase.potentials import regular_potential
from fracphase.spectral import build_interval_basis
from fracphase.timestepper import SchemeConfig, energy_ledger_audit, integrate


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dts", type=float, nargs="+",
                        default=[4e-3, 2e-3, 1e-3, 5e-4])
    parser.add_argument("--t-final", type=float, default=0.5)
    args = parser.parse_args()

    basis = build_interval_basis("neumann", 1.0, 8)
    data = ProblemData(
        theta0=lambda x: 0.1 + 0.5 * np.cos(np.pi * x),
        phi0=lambda x: 0.1 + 0.3 * np.cos(np.pi * x),
        source=lambda x, t: 0.5 * np.cos(np.pi * x) * np.exp(-t),
        coupling=Coupling.constant(0.7),
    )
    system = assemble(data, basis, basis, 0.5, 0.5, 1e-2, regular_potential(1.0))

    peaks = []
    for dt in args.dts:
        run = integrate(system, SchemeConfig("imex_euler", dt=dt), args.t_final,
                        max(1, int(round(args.t_final / dt)) // 50))
        _, peak = energy_ledger_audit(run)
        peaks.append(peak)
        print(f"dt = {dt:9.3e}   max residual = {peak:.6e}")
    for a, b, dt in zip(peaks, peaks[1:], args.dts):
        print(f"ratio at dt = {dt:9.3e} -> {a / b:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
