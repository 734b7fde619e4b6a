"""Spectral-Galerkin simulator for a fractional two-field phase model.

Subpackages: spectral (eigenbases, fractional powers), potentials
(convex/concave splits with Moreau-Yosida machinery), galerkin (discrete
system assembly), timestepper (schemes and the energy ledger), analysis
(convergence, continuous dependence, long-time and relaxation-limit studies),
cli (configuration and the command-line surface).
"""

__version__ = "0.1.0"
