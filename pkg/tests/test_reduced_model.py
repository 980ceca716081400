"""
Tester för den reducerade modellen: G0, gradient, minimering, d_X och f^δ.
"""
import math

import numpy as np
import pytest

from filaments.domain_grid import DomainSpec
from filaments.error_handling import CollisionError, SamplingError, ValidationError
from filaments.reduced_model import (
    EndpointConstraint,
    FilamentConfiguration,
    LabeledPointSet,
    align_to_constraint,
    dx_assignment,
    dx_brute_force,
    dx_distance,
    el_residual,
    endpoint_constraint_from,
    fdelta_separation_bound,
    g0_energy,
    g0_gradient,
    g0_hessian,
    local_min_diagnostic,
    minimize_g0,
    minimizer_window,
    regularize_fdelta,
    shooting_oracle,
)


def constant_pair(d: float, M: int = 8, L: float = 1.0) -> FilamentConfiguration:
    pos = np.zeros((2, M + 1, 2))
    pos[0, :, 0] = 0.5 * d
    pos[1, :, 0] = -0.5 * d
    return FilamentConfiguration(pos, L)


def random_configuration(rng: np.random.Generator, n: int, M: int, L: float = 1.0) -> FilamentConfiguration:
    # well-separated base points plus small wiggles
    angles = 2.0 * math.pi * np.arange(n) / n
    base = 0.5 * np.column_stack([np.cos(angles), np.sin(angles)])
    pos = base[:, None, :] + 0.05 * rng.standard_normal((n, M + 1, 2))
    return FilamentConfiguration(pos, L)


def symmetric_guess(a: float, M: int, L: float = 1.0) -> FilamentConfiguration:
    pos = np.zeros((2, M + 1, 2))
    pos[0, :, 0] = a
    pos[1, :, 0] = -a
    return FilamentConfiguration(pos, L)


class TestConfiguration:
    def test_needs_three_nodes(self):
        with pytest.raises(ValidationError):
            FilamentConfiguration(np.zeros((1, 2, 2)), 1.0)

    def test_at_interpolates(self):
        pos = np.zeros((1, 3, 2))
        pos[0, :, 0] = [0.0, 1.0, 2.0]
        f = FilamentConfiguration(pos, 2.0)
        assert f.at(0.5) == pytest.approx(np.array([[0.5, 0.0]]))

    def test_collision_free(self):
        f = constant_pair(1.0)
        assert f.is_collision_free()
        assert f.min_interior_separation() == pytest.approx(1.0)


class TestG0Energy:
    """Exempelvärden för diskret G0."""

    def test_pair_at_unit_distance(self):
        assert g0_energy(constant_pair(1.0)) == pytest.approx(0.0, abs=1e-14)

    def test_single_slanted_filament(self):
        M = 10
        pos = np.zeros((1, M + 1, 2))
        pos[0, :, 0] = np.linspace(0.0, 1.0, M + 1)
        assert g0_energy(FilamentConfiguration(pos, 1.0)) == pytest.approx(math.pi / 2)

    def test_pair_at_distance_e(self):
        assert g0_energy(constant_pair(math.e)) == pytest.approx(-2.0 * math.pi)

    def test_interior_collision_is_infinite(self):
        f = constant_pair(1.0)
        pos = f.positions.copy()
        pos[1, 3] = pos[0, 3]
        assert g0_energy(f.with_positions(pos)) == math.inf

    def test_coincident_endpoints_are_finite(self):
        f = constant_pair(1.0, M=10)
        pos = f.positions.copy()
        pos[:, 0] = 0.0
        assert math.isfinite(g0_energy(f.with_positions(pos)))


class TestG0Gradient:
    def test_straight_path_has_zero_gradient(self):
        M = 12
        pos = np.zeros((1, M + 1, 2))
        pos[0, :, 1] = np.linspace(0.0, 1.0, M + 1)
        assert np.allclose(g0_gradient(FilamentConfiguration(pos, 1.0)), 0.0, atol=1e-12)

    def test_constant_pair_hand_value(self):
        f = constant_pair(0.8, M=6)
        g = g0_gradient(f)
        # -2π Δz (f_1 - f_2)/|f_1 - f_2|² = -2π Δz / d in x
        expected = -2.0 * math.pi * f.dz / 0.8
        assert g[0, 1:-1, 0] == pytest.approx(np.full(f.M - 1, expected))
        assert g[1, 1:-1, 0] == pytest.approx(np.full(f.M - 1, -expected))
        assert np.all(g[:, [0, -1]] == 0.0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            f = random_configuration(rng, n=int(rng.integers(1, 4)), M=6)
            g = g0_gradient(f)
            fd = np.zeros_like(g)
            h = 1e-6
            for i in range(f.n):
                for k in range(1, f.M):
                    for c in range(2):
                        up = f.positions.copy()
                        dn = f.positions.copy()
                        up[i, k, c] += h
                        dn[i, k, c] -= h
                        fd[i, k, c] = (g0_energy(f.with_positions(up)) - g0_energy(f.with_positions(dn))) / (2 * h)
            assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(fd))

    def test_collision_raises(self):
        f = constant_pair(1.0)
        pos = f.positions.copy()
        pos[1, 2] = pos[0, 2]
        with pytest.raises(CollisionError):
            g0_gradient(f.with_positions(pos))

    def test_hessian_matches_gradient_differences(self):
        rng = np.random.default_rng(3)
        f = random_configuration(rng, n=2, M=5)
        H = g0_hessian(f).toarray()
        assert np.allclose(H, H.T, atol=1e-9)
        h = 1e-6
        i, k, c = 1, 2, 0
        up = f.positions.copy()
        dn = f.positions.copy()
        up[i, k, c] += h
        dn[i, k, c] -= h
        col = (g0_gradient(f.with_positions(up)) - g0_gradient(f.with_positions(dn)))[:, 1:-1, :].reshape(-1) / (2 * h)
        idx = (i * (f.M - 1) + (k - 1)) * 2 + c
        assert np.allclose(H[:, idx], col, rtol=1e-5, atol=1e-5)


class TestElResidual:
    def test_straight_path_both_conventions(self):
        M = 8
        pos = np.zeros((1, M + 1, 2))
        pos[0, :, 0] = np.linspace(0.0, 0.5, M + 1)
        f = FilamentConfiguration(pos, 1.0)
        for convention in ("gradient", "unordered"):
            assert np.allclose(el_residual(f, convention), 0.0, atol=1e-10)

    def test_unit_distance_pair_magnitudes(self):
        f = constant_pair(1.0)
        grad_res = el_residual(f, "gradient")[:, 1:-1]
        unordered_res = el_residual(f, "unordered")[:, 1:-1]
        assert np.allclose(np.hypot(grad_res[..., 0], grad_res[..., 1]), 2.0)
        assert np.allclose(np.hypot(unordered_res[..., 0], unordered_res[..., 1]), 1.0)

    def test_unknown_convention(self):
        with pytest.raises(ValidationError):
            el_residual(constant_pair(1.0), "other")


class TestMinimize:
    def test_single_filament_becomes_straight(self):
        M = 20
        z = np.linspace(0.0, 1.0, M + 1)
        pos = np.zeros((1, M + 1, 2))
        pos[0, :, 0] = z
        pos[0, 1:-1, 1] = 0.1 * np.sin(3 * math.pi * z[1:-1])
        f0 = FilamentConfiguration(pos, 1.0)
        constraint = EndpointConstraint([[0.0, 0.0]], [[1.0, 0.0]])
        result = minimize_g0(f0, constraint, tolerance=1e-9)
        assert result.energy == pytest.approx(math.pi / 2, rel=1e-9)
        assert np.allclose(result.configuration.positions[0, :, 0], z, atol=1e-8)
        assert np.allclose(result.configuration.positions[0, :, 1], 0.0, atol=1e-8)

    def test_energy_never_increases(self):
        f0 = symmetric_guess(0.5, M=40)
        result = minimize_g0(f0, endpoint_constraint_from(f0), tolerance=1e-8, method="newton")
        hist = np.array(result.history)
        assert np.all(np.diff(hist) <= 1e-12 * np.abs(hist[:-1]).max())

    def test_endpoints_unchanged(self):
        rng = np.random.default_rng(11)
        f0 = random_configuration(rng, n=3, M=10)
        result = minimize_g0(f0, endpoint_constraint_from(f0), tolerance=1e-7)
        assert np.array_equal(result.configuration.positions[:, [0, -1]], f0.positions[:, [0, -1]])
        assert np.max(np.abs(g0_gradient(result.configuration))) <= 1e-7

    def test_matches_shooting_oracle(self):
        M, a, L = 200, 0.5, 1.0
        f0 = symmetric_guess(a, M, L)
        tol = 1e-6 * math.pi * f0.dz
        result = minimize_g0(f0, endpoint_constraint_from(f0), tolerance=tol)
        x = shooting_oracle(a, L, M)
        f = result.configuration
        assert np.max(np.abs(f.positions[0, :, 0] - x)) <= 1e-4
        assert np.max(np.abs(f.positions[1, :, 0] + x)) <= 1e-4
        assert np.max(np.abs(f.positions[:, :, 1])) <= 1e-10

    def test_critical_point_is_fixed(self):
        f0 = symmetric_guess(0.5, M=30)
        first = minimize_g0(f0, endpoint_constraint_from(f0), tolerance=1e-9).configuration
        again = minimize_g0(first, endpoint_constraint_from(first), tolerance=1e-9)
        assert again.iterations == 0
        assert np.allclose(again.configuration.positions, first.positions)

    def test_rotation_equivariance(self):
        f0 = symmetric_guess(0.4, M=30)
        base = minimize_g0(f0, endpoint_constraint_from(f0), tolerance=1e-9)
        t = 0.7
        R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        rotated = f0.with_positions(f0.positions @ R.T)
        rot = minimize_g0(rotated, endpoint_constraint_from(rotated), tolerance=1e-9)
        assert rot.energy == pytest.approx(base.energy, abs=1e-10)
        assert np.allclose(rot.configuration.positions, base.configuration.positions @ R.T, atol=1e-7)

    def test_colliding_endpoints(self):
        M, L = 40, 1.0
        pos = np.zeros((2, M + 1, 2))
        pos[0, :, 0] = np.linspace(0.0, 0.3, M + 1)
        pos[1, :, 0] = np.linspace(0.0, -0.3, M + 1)
        f0 = FilamentConfiguration(pos, L)
        constraint = EndpointConstraint([[0.0, 0.0], [0.0, 0.0]], [[0.3, 0.0], [-0.3, 0.0]])
        result = minimize_g0(f0, constraint, tolerance=1e-6, seed=1)
        f = result.configuration
        assert f.is_collision_free()
        assert np.allclose(f.positions[:, 0], 0.0)
        assert math.isfinite(result.energy)

    def test_local_min_diagnostic(self):
        f0 = symmetric_guess(0.5, M=20)
        f = minimize_g0(f0, endpoint_constraint_from(f0), tolerance=1e-9).configuration
        diag = local_min_diagnostic(f)
        assert diag["is_strict_local_min"]

    def test_align_relabels_endpoints(self):
        f0 = symmetric_guess(0.5, M=6)
        swapped = EndpointConstraint([[-0.5, 0.0], [0.5, 0.0]], [[-0.5, 0.0], [0.5, 0.0]])
        aligned = align_to_constraint(f0, swapped)
        assert np.array_equal(aligned.positions, f0.positions)


class TestDxDistance:
    def test_permutation_is_zero(self):
        p = LabeledPointSet([[0, 0], [1, 0], [0, 2]])
        q = LabeledPointSet([[0, 2], [0, 0], [1, 0]])
        assert dx_distance(p, q) == 0.0

    def test_worked_example(self):
        p = LabeledPointSet([[0, 0], [1, 0]])
        q = LabeledPointSet([[1, 0], [0, 1]])
        assert dx_distance(p, q) == pytest.approx(1.0)
        _, perm = dx_assignment(p, q)
        assert perm == (1, 0)

    def test_single_displacement(self):
        p = LabeledPointSet([[0, 0], [5, 5]])
        q = LabeledPointSet([[0.3, 0.4], [5, 5]])
        assert dx_distance(p, q) == pytest.approx(0.5)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 7))
            p = LabeledPointSet(rng.integers(-8, 9, size=(n, 2)) / 4.0)
            q = LabeledPointSet(rng.integers(-8, 9, size=(n, 2)) / 4.0)
            assert dx_distance(p, q) == pytest.approx(dx_brute_force(p, q), abs=1e-12)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a, b, c = (LabeledPointSet(rng.standard_normal((4, 2))) for _ in range(3))
            assert dx_distance(a, c) <= dx_distance(a, b) + dx_distance(b, c) + 1e-12

    def test_size_mismatch(self):
        with pytest.raises(ValidationError):
            dx_distance(LabeledPointSet([[0, 0]]), LabeledPointSet([[0, 0], [1, 1]]))


class TestFDelta:
    """De fyra egenskaperna hos f^δ."""

    @staticmethod
    def _random_f(rng, colliding: bool) -> FilamentConfiguration:
        n, M, L = 3, 60, 1.0
        z = np.linspace(0.0, L, M + 1)
        pos = np.zeros((n, M + 1, 2))
        for i in range(n):
            start = rng.uniform(-0.5, 0.5, 2)
            end = rng.uniform(-0.5, 0.5, 2)
            pos[i] = start[None, :] + (end - start)[None, :] * z[:, None]
        if colliding:
            pos[1, 0] = pos[0, 0]
        return FilamentConfiguration(pos, L)

    @pytest.mark.parametrize("colliding", [False, True])
    def test_four_properties(self, colliding):
        rng = np.random.default_rng(42 if colliding else 24)
        delta = 1e-4
        for _ in range(20):
            f = self._random_f(rng, colliding)
            g = regularize_fdelta(f, delta, rng=rng)
            assert np.array_equal(g.positions[:, [0, -1]], f.positions[:, [0, -1]])
            mid = (f.z >= math.sqrt(delta)) & (f.z <= f.height - math.sqrt(delta))
            shift = g.positions[:, mid] - f.positions[:, mid]
            assert np.all(np.hypot(shift[..., 0], shift[..., 1]) <= delta ** (1 / 3) + 1e-15)
            sup = np.max(np.hypot(*(g.positions - f.positions).transpose(2, 0, 1)))
            assert sup <= delta ** 0.25
            bound = fdelta_separation_bound(f.z[1:-1], f.height, delta)
            for i in range(f.n):
                for j in range(i + 1, f.n):
                    d = np.hypot(*(g.positions[i, 1:-1] - g.positions[j, 1:-1]).T)
                    assert np.all(d >= bound * (1 - 1e-12))

    def test_energy_close_for_collision_free(self):
        M, L = 200, 1.0
        z = np.linspace(0.0, L, M + 1)
        pos = np.zeros((2, M + 1, 2))
        pos[0, :, 0] = 0.5 + 20.0 * z
        pos[1, :, 0] = -0.5 - 20.0 * z
        f = FilamentConfiguration(pos, L)
        g = regularize_fdelta(f, 1e-4, seed=0)
        assert abs(g0_energy(g) - g0_energy(f)) <= 0.01 * abs(g0_energy(f))

    def test_sampling_failure(self):
        f = constant_pair(1.0, M=10)
        with pytest.raises(SamplingError):
            regularize_fdelta(f, 1e-2, seed=0, max_draws=0)

    def test_delta_too_large(self):
        with pytest.raises(ValidationError):
            regularize_fdelta(constant_pair(1.0), 0.5)

    def test_delta_checked_with_explicit_shift(self):
        with pytest.raises(ValidationError):
            regularize_fdelta(constant_pair(1.0), 0.5, shift=np.zeros((2, 2)))
        with pytest.raises(ValidationError):
            regularize_fdelta(constant_pair(1.0), 0.0, shift=np.zeros((2, 2)))

    def test_explicit_shift(self):
        f = constant_pair(1.0, M=10)
        shift = np.array([[0.1, 0.0], [-0.1, 0.0]])
        g = regularize_fdelta(f, 1e-2, shift=shift)
        np.testing.assert_allclose(g.positions[:, 5], f.positions[:, 5] + shift)
        assert np.array_equal(g.positions[:, [0, -1]], f.positions[:, [0, -1]])

    @pytest.mark.parametrize("shift", [np.zeros((3, 2)), np.array([[0.5, 0.0], [0.0, 0.0]])])
    def test_bad_explicit_shift(self, shift):
        with pytest.raises(ValidationError):
            regularize_fdelta(constant_pair(1.0, M=10), 1e-2, shift=shift)


class TestMinimizerWindow:
    def test_short_cylinder_satisfied(self):
        info = minimizer_window(DomainSpec.disk(1.0), 1.0, 2)
        assert info["satisfied"]
        assert info["straight_rate"] == pytest.approx(2 * math.pi)

    def test_tall_cylinder_violated(self):
        assert not minimizer_window(DomainSpec.disk(1.0), 3.0, 1)["satisfied"]


class TestResidualAfterMinimize:
    def test_residual_bounded_by_tolerance(self):
        f0 = symmetric_guess(0.5, M=50)
        tol = 1e-8
        f = minimize_g0(f0, endpoint_constraint_from(f0), tolerance=tol).configuration
        res = el_residual(f, "gradient")[:, 1:-1]
        assert np.max(np.abs(res)) <= tol / f.dz
