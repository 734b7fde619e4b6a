import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracphase.spectral import (BasisBuildError, FractionalPower, analyze,
                                apply_fractional, build_interval_basis,
                                build_rect_basis, eigenfunctions_at,
                                fractional_multipliers, gram_defect, graph_norm,
                                kernel_projection, synthesize)

PI2 = np.pi**2


class TestIntervalBuilder:
    def test_neumann_spectrum(self):
        b = build_interval_basis("neumann", 1.0, 3)
        assert np.allclose(b.eigenvalues, [0.0, PI2, 4 * PI2], rtol=0, atol=1e-12)

    def test_dirichlet_spectrum_and_midpoint(self):
        b = build_interval_basis("dirichlet", 1.0, 2)
        assert np.allclose(b.eigenvalues, [PI2, 4 * PI2])
        e1 = eigenfunctions_at(b, np.array([0.5]))[0, 0]
        assert e1 == pytest.approx(np.sqrt(2.0), abs=1e-14)

    def test_neumann_constant_mode(self):
        b = build_interval_basis("neumann", 2.0, 1)
        assert b.eigenvalues[0] == 0.0
        assert np.allclose(b.eigenfunction_values[:, 0], 1.0 / np.sqrt(2.0))

    def test_rejects_small_grid(self):
        with pytest.raises(BasisBuildError, match="m_grid"):
            build_interval_basis("neumann", 1.0, 8, m_grid=16)

    def test_rejects_bad_length(self):
        with pytest.raises(BasisBuildError, match="positive"):
            build_interval_basis("neumann", -1.0, 4)

    def test_eigenvalues_sorted(self):
        for kind in ("neumann", "dirichlet"):
            b = build_interval_basis(kind, 1.7, 12)
            assert np.all(np.diff(b.eigenvalues) >= 0)

    def test_dirichlet_strictly_positive(self):
        b = build_interval_basis("dirichlet", 1.0, 6)
        assert np.all(b.eigenvalues > 0)


class TestRectBuilder:
    def test_neumann_square(self):
        b = build_rect_basis("neumann", 1.0, 1.0, 4)
        assert np.allclose(b.eigenvalues, [0.0, PI2, PI2, 2 * PI2])
        # lexicographic tie-break puts the y-mode first
        assert tuple(b.mode_indices[1]) == (0, 1)
        assert tuple(b.mode_indices[2]) == (1, 0)

    def test_dirichlet_square_first(self):
        b = build_rect_basis("dirichlet", 1.0, 1.0, 1)
        assert b.eigenvalues[0] == pytest.approx(2 * PI2)

    def test_anisotropic_ordering(self):
        b = build_rect_basis("neumann", 1.0, 2.0, 2)
        assert np.allclose(b.eigenvalues, [0.0, (np.pi / 2.0) ** 2])

    def test_quadrature_measures_area(self):
        b = build_rect_basis("neumann", 1.0, 2.0, 4)
        assert np.sum(b.quad_weights) == pytest.approx(2.0, rel=1e-13)

    def test_orthonormal(self):
        b = build_rect_basis("dirichlet", 1.0, 1.5, 9)
        assert gram_defect(b) < 1e-10


class TestTransforms:
    def test_round_trip_unit_mode(self, neumann8):
        c = np.zeros(8)
        c[1] = 1.0
        back = analyze(neumann8, synthesize(neumann8, c))
        assert back[1] == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(np.delete(back, 1))) <= 1e-12

    def test_constant_field(self, neumann8):
        c = analyze(neumann8, np.full(neumann8.n_grid, 3.5))
        assert c[0] == pytest.approx(3.5, rel=1e-13)  # eta_0 = 1 on (0,1)
        assert np.max(np.abs(c[1:])) <= 1e-12

    def test_cos3pix_coefficient(self, neumann8):
        # analytic inner product: int cos(3 pi x) * sqrt(2) cos(3 pi x) = 1/sqrt(2)
        c = analyze(neumann8, np.cos(3 * np.pi * neumann8.grid_points))
        assert c[3] == pytest.approx(0.7071067811865475, abs=1e-12)
        assert np.max(np.abs(np.delete(c, 3))) <= 1e-12

    def test_rejects_nonfinite(self, neumann8):
        vals = np.zeros(neumann8.n_grid)
        vals[3] = np.nan
        with pytest.raises(ValueError, match="finite"):
            analyze(neumann8, vals)

    def test_rejects_length_mismatch(self, neumann8):
        with pytest.raises(ValueError, match="shape"):
            synthesize(neumann8, np.zeros(5))


class TestFractionalPower:
    def test_sqrt_of_laplacian(self, neumann8):
        op = FractionalPower(neumann8, 0.5)
        c = np.zeros(8)
        c[1] = 1.0
        out = apply_fractional(op, c)
        assert out[1] == pytest.approx(np.pi, rel=1e-14)

    def test_kernel_mode_maps_to_zero(self, neumann8):
        op = FractionalPower(neumann8, 0.37)
        c = np.zeros(8)
        c[0] = 1.0
        assert np.all(apply_fractional(op, c) == 0.0)

    def test_rejects_nonpositive_exponent(self, neumann8):
        with pytest.raises(ValueError):
            FractionalPower(neumann8, 0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_semigroup(self, neumann8, seed):
        v = np.random.default_rng(seed).standard_normal(8)
        twice = fractional_multipliers(neumann8, 1.0) * (
            fractional_multipliers(neumann8, 1.0) * v)
        once = fractional_multipliers(neumann8, 2.0) * v
        scale = np.max(np.abs(once)) or 1.0
        assert np.max(np.abs(twice - once)) <= 1e-13 * scale


class TestKernelProjection:
    def test_neumann_keeps_constant(self, neumann8):
        c = np.zeros(8)
        c[0], c[1] = 1.0, 1.0
        p = kernel_projection(neumann8, c)
        assert p[0] == 1.0 and np.all(p[1:] == 0.0)

    def test_dirichlet_trivial_kernel(self, dirichlet8):
        p = kernel_projection(dirichlet8, np.ones(8))
        assert np.all(p == 0.0)

    def test_mean_of_linear_function(self, neumann8):
        c = analyze(neumann8, neumann8.grid_points.copy())
        mean = synthesize(neumann8, kernel_projection(neumann8, c))
        assert np.allclose(mean, 0.5, atol=1e-10)

    def test_idempotent_and_self_adjoint(self, neumann8):
        rng = np.random.default_rng(7)
        u, v = rng.standard_normal(8), rng.standard_normal(8)
        pu = kernel_projection(neumann8, u)
        assert np.max(np.abs(kernel_projection(neumann8, pu) - pu)) <= 1e-12
        pv = kernel_projection(neumann8, v)
        assert abs(np.dot(pu, v) - np.dot(u, pv)) <= 1e-12


class TestGraphNorm:
    def test_zero(self, neumann8):
        assert graph_norm(neumann8, 0.5, np.zeros(8)) == 0.0

    def test_kernel_mode_any_exponent(self, neumann8):
        c = np.zeros(8)
        c[0] = 1.0
        assert graph_norm(neumann8, 2.3, c) == pytest.approx(1.0)

    def test_formula(self, neumann8):
        c = np.zeros(8)
        c[1] = 1.0  # eigenvalue pi^2
        assert graph_norm(neumann8, 1.0, c) == pytest.approx(
            np.sqrt(1.0 + np.pi**4), rel=1e-14)

    def test_uniform_sigma_bound(self, neumann8):
        # |B^sigma v| stays below the graph norm at any larger exponent
        rng = np.random.default_rng(3)
        v = rng.standard_normal(8) / (1.0 + neumann8.eigenvalues)
        sigma0 = 0.75
        bound = graph_norm(neumann8, sigma0, v)
        for sigma in (0.75, 0.5, 0.2, 0.05, 0.01):
            norm = np.linalg.norm(fractional_multipliers(neumann8, sigma) * v)
            assert norm <= bound + 1e-12


def test_acceptance_scale_gram():
    for kind in ("neumann", "dirichlet"):
        b = build_interval_basis(kind, 1.0, 64, 512)
        assert gram_defect(b) <= 1e-10
