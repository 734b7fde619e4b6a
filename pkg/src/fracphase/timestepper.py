"""Time integration of the Galerkin system with an energy ledger.

Two schemes ship: a semi-implicit Euler step (linear stiff parts implicit,
nonlinearity explicit) and a proximal variant that treats the convex part of
the potential through its resolvent on the grid, which is what the obstacle
potential and the sigma -> 0 limit system need.

The ledger mirrors the first a-priori energy identity of the continuous
problem: at the semi-discrete level the identity is exact, so the recorded
balance residual measures pure time-discretization error and must shrink
first order in dt.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .galerkin import DiscreteSystem, OverflowGuardError, apply_coupling, \
    eval_nonlinearity, project_data
from .potentials import potential_energy_density, prox_step
from .spectral import analyze, synthesize

OVERFLOW_LIMIT = 1e12

SCHEMES = ("imex_euler", "implicit_prox")


class BlowupError(RuntimeError):
    """State exceeded the overflow guard; carries the partial run output."""

    def __init__(self, message: str, partial: "RunOutput | None" = None):
        super().__init__(message)
        self.partial = partial


class ProxIterationError(RuntimeError):
    """The proximal fixed-point loop failed to reach its tolerance."""

    def __init__(self, message: str, residual: float, partial: "RunOutput | None" = None):
        super().__init__(message)
        self.residual = residual
        self.partial = partial


@dataclass
class State:
    t: float
    theta: np.ndarray
    phi: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.theta.copy(), self.phi.copy())


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "imex_euler"
    dt: float = 1e-3
    fixed_point_tol: float = 1e-10
    max_inner_iters: int = 50

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.fixed_point_tol <= 0.0:
            raise ValueError(f"fixed_point_tol must be positive, got {self.fixed_point_tol}")


@dataclass
class LedgerSeries:
    """Per-snapshot terms of the discrete energy identity.

    lhs = kinetic + both dissipation integrals + phase graph energy + the
    convex-potential integral; rhs = lhs(0) + the two work integrals.
    """

    times: np.ndarray
    half_theta_sq: np.ndarray
    diss_theta: np.ndarray
    diss_phi: np.ndarray
    half_phi_graph_sq: np.ndarray
    potential_integral: np.ndarray
    work_source: np.ndarray
    work_phi: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray


@dataclass
class RunOutput:
    """Trajectory, norm time series, ledger and snapshots of one run."""

    times: np.ndarray
    theta_series: np.ndarray      # (K, n_a)
    phi_series: np.ndarray        # (K, n_b)
    norm_theta: np.ndarray
    graph_theta: np.ndarray
    norm_phi: np.ndarray
    graph_phi: np.ndarray
    dtphi_norm: np.ndarray
    ledger: LedgerSeries
    final_state: State
    scheme: str
    dt: float
    eps: float
    xi_series: Optional[np.ndarray] = None        # (K, m) prox multiplier samples
    phi_grid_series: Optional[np.ndarray] = None  # (K, m) prox grid iterates
    failed: bool = False
    failure: Optional[str] = None


def step_imex(system: DiscreteSystem, state: State, dt: float) -> State:
    """One semi-implicit Euler step.

    Phi+ = (I + dt M)^(-1) (Phi - dt F(Theta, Phi)), then
    Theta+ = (I + dt Lambda)^(-1) (Theta - E (Phi+ - Phi) + dt g(t+dt)).
    """
    terms = eval_nonlinearity(system, state.theta, state.phi)
    phi_new = (state.phi - dt * terms.fphi) / (1.0 + dt * system.phi_stiff)
    coupled = apply_coupling(system, terms.phi_grid, phi_new - state.phi)
    theta_new = (state.theta - coupled + dt * system.source_at(state.t + dt)) / (
        1.0 + dt * system.theta_stiff
    )
    _guard_state(theta_new, phi_new, state.t + dt)
    return State(state.t + dt, theta_new, phi_new)


def step_implicit_prox(system: DiscreteSystem, state: State, dt: float,
                       tol: float = 1e-10, max_iters: int = 50
                       ) -> tuple[State, np.ndarray, np.ndarray]:
    """One proximal step; returns (state, xi_grid, phi_grid).

    The smooth explicit terms are frozen at the current state exactly as in
    the semi-implicit step; the stiff diagonal is then solved implicitly and
    the convex part applied backward on the grid through the resolvent of
    (beta_eps or, at eps = 0, beta itself) at level dt:

        intermediate = synth((Phi - dt*explicit) / (1 + dt*M)),
        phi_grid+    = J_dt(intermediate),
        xi_grid      = (intermediate - phi_grid+) / dt   in beta(phi_grid+).

    The multiplier relation holds pointwise and exactly, so an obstacle bound
    is satisfied at every node by construction, and with beta = 0 the step
    reduces to the semi-implicit one identically.
    """
    pot, eps = system.potential, system.eps
    terms = eval_nonlinearity(system, state.theta, state.phi, include_beta=False)
    phi_mid = (state.phi - dt * terms.fphi) / (1.0 + dt * system.phi_stiff)
    intermediate = _guard_grid(system, phi_mid)
    phi_grid = np.asarray(prox_step(pot, eps, dt, intermediate))
    xi_grid = (intermediate - phi_grid) / dt
    phi_next = analyze(system.basis_b, phi_grid)

    # the grid resolvent solves its pointwise relation exactly, so the only
    # consistency check left is that the solved grid state stayed usable
    residual = float(np.max(np.abs(phi_grid + dt * xi_grid - intermediate),
                            initial=0.0))
    if not np.isfinite(residual) or residual > max(tol, 1e-9 * (1.0 + residual)):
        raise ProxIterationError(
            f"proximal solve inconsistent at t={state.t:.6g}: residual {residual:.3e}",
            residual=residual,
        )
    coupled = apply_coupling(system, terms.phi_grid, phi_next - state.phi)
    theta_next = (state.theta - coupled + dt * system.source_at(state.t + dt)) / (
        1.0 + dt * system.theta_stiff
    )
    _guard_state(theta_next, phi_next, state.t + dt)
    return State(state.t + dt, theta_next, phi_next), xi_grid, phi_grid


def _guard_state(theta: np.ndarray, phi: np.ndarray, t: float) -> None:
    for label, vec in (("theta", theta), ("phi", phi)):
        if not np.all(np.isfinite(vec)) or np.max(np.abs(vec), initial=0.0) > OVERFLOW_LIMIT:
            raise OverflowGuardError(
                f"{label} coefficients exceeded the overflow guard at t={t:.6g}"
            )


def _guard_grid(system: DiscreteSystem, coeffs: np.ndarray) -> np.ndarray:
    grid = synthesize(system.basis_b, coeffs)
    if not np.all(np.isfinite(grid)) or np.max(np.abs(grid)) > OVERFLOW_LIMIT:
        raise OverflowGuardError("phase grid values exceeded the overflow guard")
    return grid


class _LedgerAccumulator:
    """Step-by-step accumulation of the energy identity terms.

    Dissipation and work integrals use the left-endpoint rule with forward
    difference quotients, which matches the Euler consistency order; the
    source work uses the implicit sample g(t+dt) that the scheme applies.
    """

    def __init__(self, system: DiscreteSystem):
        self.system = system
        self.diss_theta = 0.0
        self.diss_phi = 0.0
        self.work_source = 0.0
        self.work_phi = 0.0

    def accumulate(self, state: State, new_state: State, dt: float) -> None:
        sysm = self.system
        dphi = new_state.phi - state.phi
        self.diss_theta += dt * float(np.dot(sysm.theta_stiff * state.theta, state.theta))
        self.diss_phi += float(np.dot(dphi, dphi)) / dt
        self.work_source += dt * float(np.dot(sysm.source_at(new_state.t), new_state.theta))
        phi_grid = synthesize(sysm.basis_b, state.phi)
        pi_proj = analyze(sysm.basis_b, np.asarray(sysm.potential.pi(phi_grid), dtype=float))
        self.work_phi += float(np.dot(state.phi - pi_proj, dphi))


def _potential_integral(system: DiscreteSystem, phi: np.ndarray,
                        phi_grid: np.ndarray | None) -> float:
    grid = phi_grid if phi_grid is not None else synthesize(system.basis_b, phi)
    density = potential_energy_density(system.potential, system.eps, grid)
    return float(np.dot(system.basis_b.quad_weights, density))


def integrate(system: DiscreteSystem, scheme: SchemeConfig, t_final: float,
              snapshot_stride: int = 1,
              initial_state: State | None = None) -> RunOutput:
    """March the system to t_final, recording norms and the energy ledger.

    Snapshots land every `snapshot_stride` steps plus always at t = 0 and the
    final time.  On an overflow guard trip the partial output up to the last
    completed snapshot is attached to the raised BlowupError.
    """
    if t_final <= 0.0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    if snapshot_stride < 1:
        raise ValueError(f"snapshot_stride must be >= 1, got {snapshot_stride}")
    dt = scheme.dt
    n_steps = max(1, int(round(t_final / dt)))
    if abs(n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(
            f"t_final={t_final} is not an integer number of steps of dt={dt}"
        )
    if scheme.scheme == "imex_euler" and system.eps == 0.0 and system.potential.multivalued:
        raise ValueError("imex_euler cannot treat a multivalued potential at eps = 0; "
                         "use implicit_prox")

    if initial_state is None:
        theta0, phi0 = project_data(system)
        state = State(0.0, theta0, phi0)
    else:
        state = initial_state.copy()

    prox = scheme.scheme == "implicit_prox"
    ledger = _LedgerAccumulator(system)
    ngrid = system.basis_b.n_grid

    rows: list[dict] = []
    xi_rows: list[np.ndarray] = []
    phi_grid_rows: list[np.ndarray] = []

    def record(state: State, dtphi: float, xi: np.ndarray | None,
               phi_grid: np.ndarray | None) -> None:
        theta, phi = state.theta, state.phi
        frac_t = system.theta_stiff * theta  # lambda^{2r} theta
        ar_theta_sq = float(np.dot(frac_t, theta))         # |A^r theta|^2
        bs_phi_sq = float(np.dot(system.phi_stiff * phi, phi))
        half_theta = 0.5 * float(np.dot(theta, theta))
        half_graph_phi = 0.5 * (float(np.dot(phi, phi)) + bs_phi_sq)
        pot_int = _potential_integral(system, phi, phi_grid)
        rows.append(dict(
            t=state.t,
            theta_snap=theta.copy(),
            phi_snap=phi.copy(),
            norm_theta=float(np.linalg.norm(theta)),
            graph_theta=float(np.sqrt(np.dot(theta, theta) + ar_theta_sq)),
            norm_phi=float(np.linalg.norm(phi)),
            graph_phi=float(np.sqrt(2.0 * half_graph_phi)),
            dtphi=dtphi,
            half_theta_sq=half_theta,
            diss_theta=ledger.diss_theta,
            diss_phi=ledger.diss_phi,
            half_phi_graph_sq=half_graph_phi,
            potential_integral=pot_int,
            work_source=ledger.work_source,
            work_phi=ledger.work_phi,
        ))
        if prox:
            xi_rows.append(np.zeros(ngrid) if xi is None else xi.copy())
            phi_grid_rows.append(
                phi_grid.copy() if phi_grid is not None
                else np.asarray(_guard_grid(system, phi))
            )

    # prox runs ledger the datum grid at t = 0: the modal projection of a
    # clamped field can overshoot the obstacle and blow up the indicator
    record(state, 0.0, None,
           system.phi0_grid if (prox and initial_state is None) else None)
    failure = None
    try:
        t0 = state.t
        for k in range(1, n_steps + 1):
            if prox:
                new_state, xi, phig = step_implicit_prox(
                    system, state, dt, scheme.fixed_point_tol, scheme.max_inner_iters
                )
            else:
                new_state = step_imex(system, state, dt)
                xi, phig = None, None
            new_state.t = t0 + k * dt  # avoid accumulated drift in snapshot times
            ledger.accumulate(state, new_state, dt)
            dtphi = float(np.linalg.norm(new_state.phi - state.phi)) / dt
            state = new_state
            if k % snapshot_stride == 0 or k == n_steps:
                record(state, dtphi, xi, phig)
    except (OverflowGuardError, ProxIterationError) as exc:
        failure = str(exc)
        partial = _finalize(system, rows, state, scheme, xi_rows, phi_grid_rows,
                            failed=True, failure=failure)
        if isinstance(exc, ProxIterationError):
            raise ProxIterationError(failure, exc.residual, partial) from None
        raise BlowupError(failure, partial) from None

    return _finalize(system, rows, state, scheme, xi_rows, phi_grid_rows)


def _finalize(system: DiscreteSystem, rows: list[dict], state: State,
              scheme: SchemeConfig, xi_rows, phi_grid_rows,
              failed: bool = False, failure: str | None = None) -> RunOutput:
    def col(name):
        return np.array([row[name] for row in rows])

    lhs = (col("half_theta_sq") + col("diss_theta") + col("diss_phi")
           + col("half_phi_graph_sq") + col("potential_integral"))
    rhs = lhs[0] + col("work_source") + col("work_phi")
    ledger = LedgerSeries(
        times=col("t"),
        half_theta_sq=col("half_theta_sq"),
        diss_theta=col("diss_theta"),
        diss_phi=col("diss_phi"),
        half_phi_graph_sq=col("half_phi_graph_sq"),
        potential_integral=col("potential_integral"),
        work_source=col("work_source"),
        work_phi=col("work_phi"),
        lhs=lhs,
        rhs=rhs,
        residual=np.abs(lhs - rhs),
    )
    return RunOutput(
        times=col("t"),
        theta_series=np.array([row["theta_snap"] for row in rows]),
        phi_series=np.array([row["phi_snap"] for row in rows]),
        norm_theta=col("norm_theta"),
        graph_theta=col("graph_theta"),
        norm_phi=col("norm_phi"),
        graph_phi=col("graph_phi"),
        dtphi_norm=col("dtphi"),
        ledger=ledger,
        final_state=state.copy(),
        scheme=scheme.scheme,
        dt=scheme.dt,
        eps=system.eps,
        xi_series=np.array(xi_rows) if xi_rows else None,
        phi_grid_series=np.array(phi_grid_rows) if phi_grid_rows else None,
        failed=failed,
        failure=failure,
    )


def energy_ledger_audit(run: RunOutput) -> tuple[np.ndarray, float]:
    """Balance residual series |LHS(t) - RHS(t)| and its maximum."""
    res = run.ledger.residual
    return res, float(np.max(res))
