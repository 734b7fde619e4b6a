"""Assembly of the coupled Galerkin ODE system.

Projecting the temperature/phase system onto the spans of the first n
eigenfunctions turns it into

    Theta' + E Phi' + Lambda Theta = g,      Phi' + M Phi + F(Theta, Phi) = 0,

with Lambda = diag(lambda_j^(2r)), M = diag(mu_j^(2sigma)), the coupling
matrix E = ell*[(eta_j, e_i)] (or its state-dependent, matrix-free variant for
a nonconstant latent-heat coefficient), source samples g(t) = [(f(t), e_i)]
and a pseudospectral nonlinearity evaluated by collocation on the quadrature
grid.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .potentials import Potential, yosida
from .spectral import SpectralBasis, analyze, fractional_multipliers, synthesize

OVERFLOW_LIMIT = 1e12

# Sufficient embedding condition for the nonconstant-coupling analysis; an
# unmet threshold is advisory only, never a hard error.
SOBOLEV_ADVISORY_THRESHOLD = 0.75


class ValidationError(ValueError):
    """Problem data violates a hard precondition (e.g. obstacle overflow)."""


class OverflowGuardError(RuntimeError):
    """Grid values exceeded the overflow guard during evaluation."""


@dataclass(frozen=True)
class Coupling:
    """Latent-heat coefficient: a constant or a bounded Lipschitz function."""

    kind: str  # "constant" | "function"
    value: float = 0.0
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    bound: float = 0.0
    lipschitz: float = 0.0

    @staticmethod
    def constant(value: float) -> "Coupling":
        return Coupling(kind="constant", value=float(value))

    @staticmethod
    def function(func, bound: float, lipschitz: float) -> "Coupling":
        return Coupling(kind="function", func=func, bound=float(bound),
                        lipschitz=float(lipschitz))

    def on_grid(self, phi_grid: np.ndarray) -> np.ndarray | float:
        if self.kind == "constant":
            return self.value
        return np.asarray(self.func(phi_grid), dtype=float)


@dataclass
class ProblemData:
    """Initial data, source and coupling before projection.

    theta0/phi0 are callables over grid points or raw grid arrays; the source
    is None, a callable (points, t) -> values, or a (times, grids) table that
    is linearly interpolated in time.
    """

    theta0: object
    phi0: object
    source: object = None
    coupling: Coupling = field(default_factory=lambda: Coupling.constant(0.0))


def _resolve_field(spec, basis: SpectralBasis, name: str) -> np.ndarray:
    if spec is None:
        return np.zeros(basis.n_grid)
    if callable(spec):
        vals = np.asarray(spec(basis.grid_points), dtype=float)
    else:
        vals = np.asarray(spec, dtype=float)
    if vals.shape != (basis.n_grid,):
        raise ValidationError(
            f"{name}: expected {basis.n_grid} grid values, got shape {vals.shape}"
        )
    if not np.all(np.isfinite(vals)):
        raise ValidationError(f"{name}: grid values must be finite")
    return vals


@dataclass
class DiscreteSystem:
    """Everything needed to advance the Galerkin ODE system in time.

    phi_stiff defaults to mu^(2 sigma); the relaxation-limit solver overrides
    it with the kernel-complement mask realizing I - P.
    """

    basis_a: SpectralBasis
    basis_b: SpectralBasis
    r: float
    sigma: float
    eps: float
    potential: Potential
    coupling: Coupling
    theta_stiff: np.ndarray
    phi_stiff: np.ndarray
    theta0_grid: np.ndarray
    phi0_grid: np.ndarray
    coupling_matrix: Optional[np.ndarray] = None
    same_basis: bool = False
    source_coeffs: Optional[Callable[[float], np.ndarray]] = None
    advisories: tuple[str, ...] = ()

    @property
    def n_a(self) -> int:
        return self.basis_a.n_modes

    @property
    def n_b(self) -> int:
        return self.basis_b.n_modes

    def source_at(self, t: float) -> np.ndarray:
        if self.source_coeffs is None:
            return np.zeros(self.n_a)
        return self.source_coeffs(t)


@dataclass
class NonlinearTerms:
    """Pointwise pieces of the phase nonlinearity at one state."""

    fphi: np.ndarray          # B-coefficients of beta-part + pi(phi) - ell(phi) theta
    phi_grid: np.ndarray
    theta_grid: np.ndarray
    coupling_grid: np.ndarray  # ell(phi) * theta on the grid
    beta_grid: np.ndarray      # beta_eps(phi) (or beta(phi) at eps = 0)


def _make_source_sampler(source, basis_a: SpectralBasis):
    if source is None:
        return None
    if callable(source):
        def sampler(t: float) -> np.ndarray:
            vals = np.asarray(source(basis_a.grid_points, t), dtype=float)
            return analyze(basis_a, vals)
        return sampler
    times, grids = source
    times = np.asarray(times, dtype=float)
    coeff_table = np.stack([analyze(basis_a, np.asarray(g, dtype=float)) for g in grids])

    def sampler(t: float) -> np.ndarray:
        if t <= times[0]:
            return coeff_table[0]
        if t >= times[-1]:
            return coeff_table[-1]
        k = int(np.searchsorted(times, t) - 1)
        w = (t - times[k]) / (times[k + 1] - times[k])
        return (1.0 - w) * coeff_table[k] + w * coeff_table[k + 1]

    return sampler


def assemble(data: ProblemData, basis_a: SpectralBasis, basis_b: SpectralBasis,
             r: float, sigma: float, eps: float, potential: Potential,
             *, phi_stiff_override: np.ndarray | None = None) -> DiscreteSystem:
    """Build the discrete system; validates data against the potential domain."""
    if r <= 0.0:
        raise ValidationError(f"exponent r must be positive, got {r}")
    if sigma <= 0.0 and phi_stiff_override is None:
        raise ValidationError(f"exponent sigma must be positive, got {sigma}")
    if eps < 0.0:
        raise ValidationError(f"Yosida level eps must be nonnegative, got {eps}")
    if basis_a.domain_extent != basis_b.domain_extent:
        raise ValidationError(
            f"bases live on different domains: {basis_a.domain_extent} vs {basis_b.domain_extent}"
        )

    theta0_grid = _resolve_field(data.theta0, basis_a, "theta0")
    phi0_grid = _resolve_field(data.phi0, basis_b, "phi0")

    bh0 = np.asarray(potential.beta_hat(phi0_grid), dtype=float)
    if not np.all(np.isfinite(bh0)):
        bad = np.flatnonzero(~np.isfinite(bh0))
        report = ", ".join(
            f"node {k}: phi0={phi0_grid[k]:.6g}" for k in bad[:5]
        )
        raise ValidationError(
            f"phi0 leaves the domain of the convex potential at {bad.size} node(s): {report}"
        )

    same = basis_a is basis_b or (
        basis_a.kind == basis_b.kind
        and basis_a.n_modes == basis_b.n_modes
        and np.array_equal(basis_a.eigenvalues, basis_b.eigenvalues)
        and np.array_equal(basis_a.eigenfunction_values, basis_b.eigenfunction_values)
    )
    if not same and not basis_a.same_grid_as(basis_b):
        raise ValidationError(
            "distinct bases must share the quadrature grid (use the same m_grid)"
        )

    coupling_matrix = None
    if data.coupling.kind == "constant" and not same and data.coupling.value != 0.0:
        coupling_matrix = data.coupling.value * _cross_mass_matrix(basis_a, basis_b)

    advisories: list[str] = []
    if data.coupling.kind == "function" and r + 2.0 * sigma <= SOBOLEV_ADVISORY_THRESHOLD:
        msg = (
            f"nonconstant coupling with r + 2*sigma = {r + 2.0 * sigma:.3g} <= "
            f"{SOBOLEV_ADVISORY_THRESHOLD}: the sufficient embedding condition is unmet"
        )
        advisories.append(msg)
        warnings.warn(msg, stacklevel=2)

    phi_stiff = (phi_stiff_override if phi_stiff_override is not None
                 else fractional_multipliers(basis_b, 2.0 * sigma))
    return DiscreteSystem(
        basis_a=basis_a,
        basis_b=basis_b,
        r=r,
        sigma=sigma,
        eps=float(eps),
        potential=potential,
        coupling=data.coupling,
        theta_stiff=fractional_multipliers(basis_a, 2.0 * r),
        phi_stiff=np.asarray(phi_stiff, dtype=float),
        theta0_grid=theta0_grid,
        phi0_grid=phi0_grid,
        coupling_matrix=coupling_matrix,
        same_basis=same,
        source_coeffs=_make_source_sampler(data.source, basis_a),
        advisories=tuple(advisories),
    )


# cross-basis products mix sine and cosine families, for which the collocation
# trapezoid rule is only second order; the one-time dense assembly therefore
# runs on a refined grid sized to push the quadrature error below 1e-9
CROSS_MASS_MIN_NODES = 20001


def _cross_mass_matrix(basis_a: SpectralBasis, basis_b: SpectralBasis) -> np.ndarray:
    from .spectral import eigenfunctions_at

    if basis_a.ndim == 1:
        m = max(CROSS_MASS_MIN_NODES, 8 * max(basis_a.n_modes, basis_b.n_modes) + 1)
        x = np.linspace(0.0, basis_a.domain_extent[0], m)
        w = np.full(m, basis_a.domain_extent[0] / (m - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
    else:
        per_axis = max(int(np.sqrt(CROSS_MASS_MIN_NODES)),
                       8 * max(basis_a.n_modes, basis_b.n_modes) + 1)
        lx, ly = basis_a.domain_extent
        xg = np.linspace(0.0, lx, per_axis)
        yg = np.linspace(0.0, ly, per_axis)
        wx = np.full(per_axis, lx / (per_axis - 1))
        wy = np.full(per_axis, ly / (per_axis - 1))
        wx[0] *= 0.5
        wx[-1] *= 0.5
        wy[0] *= 0.5
        wy[-1] *= 0.5
        x = np.column_stack([np.repeat(xg, per_axis), np.tile(yg, per_axis)])
        w = np.outer(wx, wy).ravel()
    va = eigenfunctions_at(basis_a, x)
    vb = eigenfunctions_at(basis_b, x)
    return va.T @ (w[:, None] * vb)


def project_data(system: DiscreteSystem) -> tuple[np.ndarray, np.ndarray]:
    """H-projections of the initial data onto the discrete spaces."""
    return (analyze(system.basis_a, system.theta0_grid),
            analyze(system.basis_b, system.phi0_grid))


def _guard(grid: np.ndarray, label: str) -> np.ndarray:
    if not np.all(np.isfinite(grid)) or np.max(np.abs(grid)) > OVERFLOW_LIMIT:
        peak = np.max(np.abs(grid[np.isfinite(grid)])) if np.any(np.isfinite(grid)) else np.inf
        raise OverflowGuardError(f"{label} exceeded the overflow guard (peak {peak:.3e})")
    return grid


def eval_nonlinearity(system: DiscreteSystem, theta: np.ndarray, phi: np.ndarray,
                      *, include_beta: bool = True) -> NonlinearTerms:
    """Collocation evaluation of the phase nonlinearity.

    Synthesize both fields, apply beta_eps + pi pointwise, form the coupling
    product ell(phi)*theta, and analyze back in the B basis.  include_beta =
    False is used by the proximal stepper, which treats the convex part
    through its resolvent instead.
    """
    phi_grid = _guard(synthesize(system.basis_b, phi), "phi")
    theta_grid = _guard(synthesize(system.basis_a, theta), "theta")

    if include_beta:
        if system.eps > 0.0:
            beta_grid = np.asarray(yosida(system.potential, system.eps, phi_grid))
        else:
            if system.potential.multivalued:
                raise ValidationError(
                    "eps = 0 with a multivalued potential requires the proximal scheme"
                )
            beta_grid = np.asarray(system.potential.beta(phi_grid), dtype=float)
            if not np.all(np.isfinite(beta_grid)):
                raise OverflowGuardError("beta(phi) left its domain during evaluation")
    else:
        beta_grid = np.zeros_like(phi_grid)

    ell = system.coupling.on_grid(phi_grid)
    coupling_grid = ell * theta_grid
    pointwise = beta_grid + np.asarray(system.potential.pi(phi_grid), dtype=float) - coupling_grid
    fphi = analyze(system.basis_b, _guard(pointwise, "nonlinearity"))
    return NonlinearTerms(fphi=fphi, phi_grid=phi_grid, theta_grid=theta_grid,
                          coupling_grid=np.broadcast_to(coupling_grid, phi_grid.shape).copy(),
                          beta_grid=beta_grid)


def apply_coupling(system: DiscreteSystem, phi_grid: np.ndarray,
                   w: np.ndarray) -> np.ndarray:
    """E w (or E(Phi) w): the A-projection of ell(phi) * (B-synthesis of w)."""
    if system.coupling.kind == "constant":
        if system.same_basis:
            return system.coupling.value * w
        if system.coupling_matrix is None:
            return np.zeros(system.n_a)
        return system.coupling_matrix @ w
    values = system.coupling.on_grid(phi_grid) * synthesize(system.basis_b, w)
    return analyze(system.basis_a, values)
