"""
Tester för H_ω, W_ω, κ_n och den radiella kärnan bakom γ.
"""
import math

import numpy as np
import pytest

from filaments.domain_grid import DomainSpec, build_grid
from filaments.error_handling import GeometryError, ValidationError
from filaments.renormalized_energy import (
    difference_slope,
    gamma_constant,
    gamma_trace,
    h00,
    h_omega_at,
    h_omega_closed_form,
    kappa_n,
    radial_core,
    solve_h_omega,
    w_omega,
    w_omega_gradient,
)


def max_node_error(disk: DomainSpec, spacing: float, y):
    grid = build_grid(disk, spacing)
    data = solve_h_omega(disk, grid, y)
    pts = grid.interior_points()
    exact = h_omega_closed_form(1.0, pts, y)
    return float(np.max(np.abs(data.values[grid.mask] - exact)))


class TestGreenSolve:
    def test_centre_source_is_zero(self, unit_disk):
        grid = build_grid(unit_disk, 1.0 / 32)
        data = solve_h_omega(unit_disk, grid, (0.0, 0.0))
        assert np.max(np.abs(data.values[grid.mask])) < 1e-10
        assert data.residual <= 1e-10

    def test_matches_reflection_formula(self, unit_disk):
        assert max_node_error(unit_disk, 1.0 / 128, (0.4, 0.0)) <= 1e-3

    def test_error_shrinks_under_refinement(self, unit_disk):
        coarse = max_node_error(unit_disk, 1.0 / 16, (0.4, 0.0))
        fine = max_node_error(unit_disk, 1.0 / 32, (0.4, 0.0))
        assert coarse / fine >= 1.7

    def test_symmetric_in_its_arguments(self, unit_disk):
        grid = build_grid(unit_disk, 1.0 / 64)
        a, b = (0.25, 0.125), (-0.125, 0.375)
        hab = solve_h_omega(unit_disk, grid, b).at(a)[0]
        hba = solve_h_omega(unit_disk, grid, a).at(b)[0]
        assert hab == pytest.approx(hba, abs=1e-3)

    def test_exterior_nodes_carry_boundary_data(self, unit_disk):
        grid = build_grid(unit_disk, 1.0 / 16)
        y = (0.2, -0.1)
        data = solve_h_omega(unit_disk, grid, y)
        out = ~grid.mask
        expected = -np.log(np.hypot(grid.X[out] - y[0], grid.Y[out] - y[1]))
        assert np.allclose(data.values[out], expected)

    def test_source_near_boundary(self, unit_disk):
        grid = build_grid(unit_disk, 1.0 / 16)
        with pytest.raises(GeometryError):
            solve_h_omega(unit_disk, grid, (0.99, 0.0))

    def test_h00_on_disks(self):
        assert h00(DomainSpec.disk(1.0)) == 0.0
        assert h00(DomainSpec.disk(2.0)) == pytest.approx(-math.log(2.0))

    def test_h00_grid_matches_closed_form(self, unit_disk):
        grid = build_grid(unit_disk, 1.0 / 32)
        assert h00(unit_disk, grid=grid, mode="grid") == pytest.approx(0.0, abs=1e-10)

    def test_closed_form_rejects_rectangles(self):
        with pytest.raises(ValidationError):
            h00(DomainSpec.rectangle((1.0, 1.0)), mode="closed_form")

    def test_h_omega_at_off_grid_point(self, unit_disk):
        x, y = (0.213, -0.087), (0.4, 0.0)
        exact = float(h_omega_closed_form(1.0, np.array(x), y))
        assert h_omega_at(unit_disk, x, y) == pytest.approx(exact, abs=1e-12)
        grid = build_grid(unit_disk, 1.0 / 64)
        assert h_omega_at(unit_disk, x, y, grid=grid, mode="grid") == pytest.approx(exact, abs=1e-2)

    def test_h_omega_at_grid_mode_needs_grid(self, unit_disk):
        with pytest.raises(ValidationError):
            h_omega_at(unit_disk, (0.1, 0.0), (0.2, 0.0), mode="grid")


class TestRenormalizedEnergy:
    def test_single_centre_point(self, unit_disk):
        assert w_omega(unit_disk, [[0.0, 0.0]]) == pytest.approx(0.0, abs=1e-15)

    def test_symmetric_pair(self, unit_disk):
        w = w_omega(unit_disk, [[0.5, 0.0], [-0.5, 0.0]])
        assert w == pytest.approx(2.0 * math.pi * math.log(15.0 / 16.0))
        assert w == pytest.approx(-0.4057, abs=1e-4)

    def test_permutation_invariant(self, unit_disk):
        pts = np.array([[0.3, 0.1], [-0.2, 0.4], [0.0, -0.5]])
        assert w_omega(unit_disk, pts) == w_omega(unit_disk, pts[[2, 0, 1]])

    def test_grows_as_points_merge(self, unit_disk):
        values = [w_omega(unit_disk, [[0.5 * 2.0 ** -k, 0.0], [-0.5 * 2.0 ** -k, 0.0]]) for k in range(1, 8)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_confinement_along_a_ray(self, unit_disk):
        values = [w_omega(unit_disk, [[c + 0.1, 0.0], [c - 0.1, 0.0]]) for c in (0.0, 0.2, 0.4, 0.6)]
        # Σ H grows toward the boundary, so W falls
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_grid_mode_close_to_closed_form(self, unit_disk):
        pts = [[0.5, 0.0], [-0.5, 0.0]]
        grid = build_grid(unit_disk, 1.0 / 64)
        approx = w_omega(unit_disk, pts, grid=grid, mode="grid", threads=2)
        assert approx == pytest.approx(w_omega(unit_disk, pts), abs=1e-2)

    def test_coincident_points(self, unit_disk):
        with pytest.raises(ValidationError):
            w_omega(unit_disk, [[0.1, 0.1], [0.1, 0.1]])

    def test_gradient_single_point(self, unit_disk):
        # W(a, 0) = π log(1 − a²)
        a = 0.3
        grad = w_omega_gradient(unit_disk, [[a, 0.0]])
        assert grad.shape == (1, 2)
        assert grad[0, 0] == pytest.approx(-2.0 * math.pi * a / (1.0 - a * a), rel=1e-6)
        assert grad[0, 1] == pytest.approx(0.0, abs=1e-6)

    def test_gradient_symmetric_pair(self, unit_disk):
        grad = w_omega_gradient(unit_disk, [[0.4, 0.0], [-0.4, 0.0]])
        np.testing.assert_allclose(grad[0], -grad[1], atol=1e-6)
        assert abs(grad[0, 1]) < 1e-6


class TestKappa:
    def test_disk_reduces_to_gamma_term(self, unit_disk):
        assert kappa_n(unit_disk, 3, 1.5, 0.7) == pytest.approx(3 * 1.5 * 0.7)

    def test_zero_filaments(self, unit_disk):
        assert kappa_n(unit_disk, 0, 2.0, 0.7) == 0.0

    def test_linear_in_height(self):
        disk = DomainSpec.disk(2.0)
        assert kappa_n(disk, 2, 2.0, 0.5) == pytest.approx(2.0 * kappa_n(disk, 2, 1.0, 0.5))

    def test_rectangle_formula(self):
        square = DomainSpec.rectangle((1.0, 1.0))
        grid = build_grid(square, 1.0 / 32)
        H = h00(square, grid=grid, mode="grid")
        got = kappa_n(square, 2, 1.0, 0.4, grid=grid, mode="grid")
        assert got == pytest.approx(-4.0 * math.pi * H + 2.0 * 0.4)


class TestRadialCore:
    def test_profile_shape(self):
        prof = radial_core(1.0, 0.05)
        assert prof.rho[0] == 0.0 and prof.rho[-1] == 1.0
        assert np.all(np.diff(prof.rho) >= -1e-12)
        assert np.all((prof.rho >= 0.0) & (prof.rho <= 1.0))
        assert prof(2.0) == 1.0

    def test_printed_normalization_halves(self):
        full = radial_core(1.0, 0.05).energy
        assert radial_core(1.0, 0.05, normalization="printed").energy == pytest.approx(0.5 * full)

    def test_doubling_radius_adds_pi_log_2(self):
        eps = 1e-3
        diff = radial_core(2.0, eps).energy - radial_core(1.0, eps).energy
        assert diff == pytest.approx(math.pi * math.log(2.0), abs=1e-3)

    def test_preconditions(self):
        with pytest.raises(ValidationError):
            radial_core(1.0, 0.3)
        with pytest.raises(ValidationError):
            radial_core(1.0, 0.05, nodes_per_eps=8)


class TestGamma:
    def test_differences_shrink_quadratically(self):
        trace = gamma_trace([0.04, 0.02, 0.01, 0.005])
        assert difference_slope(trace) == pytest.approx(2.0, abs=0.4)

    def test_extrapolation_independent_of_radius(self):
        eps = [1e-2, 5e-3, 2.5e-3]
        assert gamma_constant(eps, radius=1.0) == pytest.approx(gamma_constant(eps, radius=2.0), abs=1e-3)

    def test_positive(self):
        assert gamma_constant([4e-2, 2e-2, 1e-2]) > 0.0

    def test_needs_three_decreasing_values(self):
        with pytest.raises(ValidationError):
            gamma_constant([1e-2, 5e-3])
        with pytest.raises(ValidationError):
            gamma_constant([1e-2, 2e-2, 5e-3])
