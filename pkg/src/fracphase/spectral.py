"""Closed-form trigonometric eigenbases and spectral fractional powers.

The simulator works with two self-adjoint monotone operators realized through
their eigenpairs: the Laplacian on an interval or a rectangle with Dirichlet or
Neumann boundary conditions.  A basis stores the eigenvalues, the eigenfunction
samples on a quadrature grid, and trapezoid weights, so every downstream
operation (transforms, fractional powers, kernel projection, graph norms)
reduces to dense linear algebra on small arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Build-time orthonormality gate; failing it is a hard error because every
# downstream identity (Parseval, coupling cancellation) relies on it.
ORTHONORMALITY_TOL = 1e-8

DEFAULT_GRID_FACTOR = 8
MIN_GRID_FACTOR = 4

INTERVAL_KINDS = ("interval_dirichlet", "interval_neumann")
RECT_KINDS = ("rect_dirichlet", "rect_neumann")
BASIS_KINDS = INTERVAL_KINDS + RECT_KINDS


class BasisBuildError(ValueError):
    """Raised when a basis violates its construction contract."""


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs of a Laplacian sampled on a quadrature grid.

    eigenvalues are nondecreasing; eigenfunction_values has one column per
    mode; quad_weights are trapezoid weights summing to the domain measure.
    """

    kind: str
    domain_extent: tuple[float, ...]
    n_modes: int
    eigenvalues: np.ndarray
    grid_points: np.ndarray
    quad_weights: np.ndarray
    eigenfunction_values: np.ndarray
    mode_indices: np.ndarray

    @property
    def ndim(self) -> int:
        return len(self.domain_extent)

    @property
    def n_grid(self) -> int:
        return self.quad_weights.shape[0]

    @property
    def kernel_mask(self) -> np.ndarray:
        """Boolean mask of zero-eigenvalue (kernel) modes."""
        return self.eigenvalues == 0.0

    def same_grid_as(self, other: "SpectralBasis") -> bool:
        return (
            self.grid_points.shape == other.grid_points.shape
            and np.array_equal(self.grid_points, other.grid_points)
            and np.array_equal(self.quad_weights, other.quad_weights)
        )


def _interval_grid(length: float, m_grid: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform nodes on [0, L] with composite-trapezoid weights."""
    x = np.linspace(0.0, length, m_grid)
    w = np.full(m_grid, length / (m_grid - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


def _interval_eigendata(bc: str, length: float, indices: np.ndarray,
                        x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and sampled eigenfunctions for 1-D mode labels.

    Dirichlet labels start at 1 (sin modes); Neumann labels start at 0 where
    mode 0 is the normalized constant.
    """
    k = indices * np.pi / length
    values = np.empty((x.shape[0], indices.shape[0]))
    if bc == "dirichlet":
        if np.any(indices < 1):
            raise BasisBuildError("Dirichlet mode labels start at 1")
        values[:] = np.sqrt(2.0 / length) * np.sin(np.outer(x, k))
    elif bc == "neumann":
        values[:] = np.sqrt(2.0 / length) * np.cos(np.outer(x, k))
        values[:, indices == 0] = 1.0 / np.sqrt(length)
    else:
        raise BasisBuildError(f"unknown boundary condition {bc!r}")
    return k**2, values


def _check_orthonormality(basis: SpectralBasis) -> None:
    gram = basis.eigenfunction_values.T @ (
        basis.quad_weights[:, None] * basis.eigenfunction_values
    )
    defect = np.max(np.abs(gram - np.eye(basis.n_modes)))
    if defect > ORTHONORMALITY_TOL:
        raise BasisBuildError(
            f"orthonormality defect {defect:.3e} exceeds {ORTHONORMALITY_TOL:.0e} "
            f"for kind={basis.kind}, n_modes={basis.n_modes}, m_grid={basis.n_grid}; "
            "increase m_grid"
        )


def _bc_of(kind: str) -> str:
    if kind not in BASIS_KINDS:
        raise BasisBuildError(f"unknown basis kind {kind!r}; expected one of {BASIS_KINDS}")
    return kind.split("_", 1)[1]


def build_interval_basis(kind: str, length: float, n_modes: int,
                         m_grid: int | None = None) -> SpectralBasis:
    """Build a 1-D eigenbasis on (0, length).

    kind is "interval_dirichlet" or "interval_neumann" (bare "dirichlet" /
    "neumann" also accepted).  m_grid defaults to 8*n_modes and must be at
    least 4*n_modes to keep pointwise nonlinearities alias-free.
    """
    bc = kind if kind in ("dirichlet", "neumann") else _bc_of(kind)
    if bc not in ("dirichlet", "neumann"):
        raise BasisBuildError(f"{kind!r} is not an interval kind")
    if length <= 0.0:
        raise BasisBuildError(f"domain length must be positive, got {length}")
    if n_modes < 1:
        raise BasisBuildError(f"n_modes must be >= 1, got {n_modes}")
    if m_grid is None:
        m_grid = DEFAULT_GRID_FACTOR * n_modes
    if m_grid < MIN_GRID_FACTOR * n_modes:
        raise BasisBuildError(
            f"m_grid={m_grid} too small: need at least {MIN_GRID_FACTOR}*n_modes={MIN_GRID_FACTOR * n_modes}"
        )
    x, w = _interval_grid(float(length), m_grid)
    first = 1 if bc == "dirichlet" else 0
    indices = np.arange(first, first + n_modes)
    eigvals, values = _interval_eigendata(bc, float(length), indices, x)
    basis = SpectralBasis(
        kind=f"interval_{bc}",
        domain_extent=(float(length),),
        n_modes=n_modes,
        eigenvalues=eigvals,
        grid_points=x,
        quad_weights=w,
        eigenfunction_values=values,
        mode_indices=indices,
    )
    _check_orthonormality(basis)
    return basis


def build_rect_basis(kind: str, lx: float, ly: float, n_modes: int,
                     m_grid: int | None = None) -> SpectralBasis:
    """Tensor-product eigenbasis on (0, lx) x (0, ly).

    Modes are sorted by eigenvalue lambda_jx + lambda_jy with (jx, jy)
    lexicographic tie-break; the first n_modes are retained.  m_grid counts
    nodes per axis.
    """
    bc = kind if kind in ("dirichlet", "neumann") else _bc_of(kind)
    if lx <= 0.0 or ly <= 0.0:
        raise BasisBuildError(f"domain extents must be positive, got ({lx}, {ly})")
    if n_modes < 1:
        raise BasisBuildError(f"n_modes must be >= 1, got {n_modes}")
    if m_grid is None:
        m_grid = DEFAULT_GRID_FACTOR * n_modes
    if m_grid < MIN_GRID_FACTOR * n_modes:
        raise BasisBuildError(
            f"m_grid={m_grid} too small: need at least {MIN_GRID_FACTOR}*n_modes={MIN_GRID_FACTOR * n_modes} per axis"
        )

    first = 1 if bc == "dirichlet" else 0
    idx_1d = np.arange(first, first + n_modes)
    xg, wx = _interval_grid(float(lx), m_grid)
    yg, wy = _interval_grid(float(ly), m_grid)
    ev_x, vals_x = _interval_eigendata(bc, float(lx), idx_1d, xg)
    ev_y, vals_y = _interval_eigendata(bc, float(ly), idx_1d, yg)

    jx, jy = np.meshgrid(np.arange(n_modes), np.arange(n_modes), indexing="ij")
    jx, jy = jx.ravel(), jy.ravel()
    sums = ev_x[jx] + ev_y[jy]
    order = np.lexsort((idx_1d[jy], idx_1d[jx], sums))[:n_modes]
    jx, jy, sums = jx[order], jy[order], sums[order]

    points = np.column_stack([
        np.repeat(xg, yg.shape[0]),
        np.tile(yg, xg.shape[0]),
    ])
    weights = np.outer(wx, wy).ravel()
    values = np.empty((points.shape[0], n_modes))
    for col in range(n_modes):
        values[:, col] = np.outer(vals_x[:, jx[col]], vals_y[:, jy[col]]).ravel()

    basis = SpectralBasis(
        kind=f"rect_{bc}",
        domain_extent=(float(lx), float(ly)),
        n_modes=n_modes,
        eigenvalues=sums,
        grid_points=points,
        quad_weights=weights,
        eigenfunction_values=values,
        mode_indices=np.column_stack([idx_1d[jx], idx_1d[jy]]),
    )
    _check_orthonormality(basis)
    return basis


def build_basis(kind: str, extent, n_modes: int, m_grid: int | None = None) -> SpectralBasis:
    """Dispatch on kind; extent is a scalar (interval) or a pair (rectangle)."""
    if kind in INTERVAL_KINDS:
        return build_interval_basis(kind, float(np.atleast_1d(extent)[0]), n_modes, m_grid)
    if kind in RECT_KINDS:
        ext = np.atleast_1d(extent).astype(float)
        if ext.shape[0] != 2:
            raise BasisBuildError(f"rect basis needs two extents, got {extent!r}")
        return build_rect_basis(kind, ext[0], ext[1], n_modes, m_grid)
    raise BasisBuildError(f"unknown basis kind {kind!r}; expected one of {BASIS_KINDS}")


def eigenfunctions_at(basis: SpectralBasis, points: np.ndarray) -> np.ndarray:
    """Evaluate all retained eigenfunctions at arbitrary points (closed form).

    Used to re-express a solution in another (finer) basis when comparing
    truncation levels.
    """
    points = np.asarray(points, dtype=float)
    bc = _bc_of(basis.kind)
    if basis.ndim == 1:
        _, vals = _interval_eigendata(bc, basis.domain_extent[0], basis.mode_indices,
                                      points.reshape(-1))
        return vals
    lx, ly = basis.domain_extent
    pts = points.reshape(-1, 2)
    out = np.empty((pts.shape[0], basis.n_modes))
    for col in range(basis.n_modes):
        jx, jy = basis.mode_indices[col]
        _, vx = _interval_eigendata(bc, lx, np.array([jx]), pts[:, 0])
        _, vy = _interval_eigendata(bc, ly, np.array([jy]), pts[:, 1])
        out[:, col] = vx[:, 0] * vy[:, 0]
    return out


@dataclass(frozen=True)
class FractionalPower:
    """Spectral fractional power acting by lambda_j**exponent on coefficients.

    Zero eigenvalues map to zero for any positive exponent, matching the
    series definition of the power operator.
    """

    basis: SpectralBasis
    exponent: float

    def __post_init__(self):
        if self.exponent <= 0.0:
            raise ValueError(f"fractional exponent must be positive, got {self.exponent}")

    @property
    def multipliers(self) -> np.ndarray:
        return self.basis.eigenvalues**self.exponent

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = _check_coeffs(self.basis, coeffs)
        return self.multipliers * coeffs


def _check_coeffs(basis: SpectralBasis, coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (basis.n_modes,):
        raise ValueError(
            f"coefficient vector has shape {coeffs.shape}, expected ({basis.n_modes},)"
        )
    return coeffs


def apply_fractional(power: FractionalPower, coeffs: np.ndarray) -> np.ndarray:
    return power.apply(coeffs)


def fractional_multipliers(basis: SpectralBasis, exponent: float) -> np.ndarray:
    """lambda_j**exponent with the 0**rho := 0 convention (rho > 0)."""
    if exponent <= 0.0:
        raise ValueError(f"fractional exponent must be positive, got {exponent}")
    return basis.eigenvalues**exponent


def kernel_projection(basis: SpectralBasis, coeffs: np.ndarray) -> np.ndarray:
    """H-projection onto ker(B): keep zero-eigenvalue coefficients only."""
    coeffs = _check_coeffs(basis, coeffs)
    return np.where(basis.kernel_mask, coeffs, 0.0)


def synthesize(basis: SpectralBasis, coeffs: np.ndarray) -> np.ndarray:
    """Coefficient vector -> grid samples."""
    coeffs = _check_coeffs(basis, coeffs)
    return basis.eigenfunction_values @ coeffs


def analyze(basis: SpectralBasis, grid_values: np.ndarray) -> np.ndarray:
    """Grid samples -> coefficients via weighted inner products."""
    grid_values = np.asarray(grid_values, dtype=float)
    if grid_values.shape != (basis.n_grid,):
        raise ValueError(
            f"grid vector has shape {grid_values.shape}, expected ({basis.n_grid},)"
        )
    if not np.all(np.isfinite(grid_values)):
        raise ValueError("grid values must be finite")
    return basis.eigenfunction_values.T @ (basis.quad_weights * grid_values)


def graph_norm(basis: SpectralBasis, exponent: float, coeffs: np.ndarray) -> float:
    """(sum |c_j|^2 + sum |lambda_j^rho c_j|^2)^(1/2)."""
    coeffs = _check_coeffs(basis, coeffs)
    frac = fractional_multipliers(basis, exponent) * coeffs
    return float(np.sqrt(np.dot(coeffs, coeffs) + np.dot(frac, frac)))


def gram_defect(basis: SpectralBasis) -> float:
    """Max-abs deviation of the weighted Gram matrix from the identity."""
    gram = basis.eigenfunction_values.T @ (
        basis.quad_weights[:, None] * basis.eigenfunction_values
    )
    return float(np.max(np.abs(gram - np.eye(basis.n_modes))))
