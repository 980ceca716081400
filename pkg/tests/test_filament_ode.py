"""
Tester för z-ODE:n: fri rörelse, symmetri, bevarade storheter och kollisioner.
"""
import math

import numpy as np
import pytest

from filaments.error_handling import CollisionError, ValidationError
from filaments.filament_ode import (
    acceleration,
    conserved_quantities,
    drift,
    integrate_ode,
    potential,
)


def eccentric_pair():
    # apocentre at distance 2, speed below the circular value 1
    q0 = np.array([[1.0, 0.0], [-1.0, 0.0]])
    v0 = np.array([[0.0, 0.8], [0.0, -0.8]])
    return q0, v0


class TestFreeMotion:
    def test_single_filament_moves_straight(self):
        traj = integrate_ode([[0.0, 0.0]], [[1.0, 0.0]], 0.1, 1.0)
        assert traj.positions.shape == (11, 1, 2)
        assert np.allclose(traj.positions[:, 0, 0], traj.z, atol=1e-12)
        assert np.all(traj.positions[:, 0, 1] == 0.0)
        assert np.all(traj.velocities[:, 0, 0] == 1.0)

    def test_single_filament_has_no_acceleration(self):
        assert np.array_equal(acceleration(np.array([[0.3, 0.2]])), np.zeros((1, 2)))


class TestSymmetry:
    def test_antipodal_pair_stays_antipodal(self):
        q0, v0 = eccentric_pair()
        traj = integrate_ode(q0, v0, 1e-2, 5.0)
        assert np.array_equal(traj.positions[:, 0], -traj.positions[:, 1])
        assert np.array_equal(traj.velocities[:, 0], -traj.velocities[:, 1])

    def test_circular_orbit_keeps_radius(self):
        q0 = np.array([[1.0, 0.0], [-1.0, 0.0]])
        v0 = np.array([[0.0, 1.0], [0.0, -1.0]])
        traj = integrate_ode(q0, v0, 1e-3, 2.0 * math.pi)
        r = np.hypot(traj.positions[:, 0, 0], traj.positions[:, 0, 1])
        assert np.max(np.abs(r - 1.0)) < 1e-4


class TestConservedQuantities:
    def test_pair_at_rest(self):
        q = np.array([[0.5, 0.0], [-0.5, 0.0]])
        cq = conserved_quantities(q, np.zeros_like(q))
        assert cq["energy"] == pytest.approx(0.0, abs=1e-15)
        assert np.array_equal(cq["momentum"], np.zeros(2))
        assert cq["angular_momentum"] == 0.0

    def test_unordered_potential_is_half(self):
        q = np.array([[0.0, 0.0], [2.0, 0.0]])
        assert potential(q, "gradient") == pytest.approx(2.0 * math.log(2.0))
        assert potential(q, "unordered") == pytest.approx(math.log(2.0))

    def test_translation_keeps_momentum(self):
        q0, v0 = eccentric_pair()
        a = conserved_quantities(q0, v0)
        b = conserved_quantities(q0 + np.array([3.0, -1.0]), v0)
        assert np.array_equal(a["momentum"], b["momentum"])
        assert a["energy"] == pytest.approx(b["energy"])

    @pytest.mark.parametrize("convention", ["gradient", "unordered"])
    def test_drift_small_over_long_horizon(self, convention):
        q0, v0 = eccentric_pair()
        if convention == "unordered":
            v0 = v0 / math.sqrt(2.0)
        traj = integrate_ode(q0, v0, 1e-3, 10.0, convention)
        peaks = drift(traj)
        assert peaks["energy"] < 1e-6
        assert peaks["momentum"] < 1e-6
        assert peaks["angular_momentum"] < 1e-6

    def test_energy_drift_is_second_order(self):
        q0, v0 = eccentric_pair()
        coarse = drift(integrate_ode(q0, v0, 2e-2, 10.0))["energy"]
        fine = drift(integrate_ode(q0, v0, 1e-2, 10.0))["energy"]
        assert 3.0 <= coarse / fine <= 5.0


class TestErrors:
    def test_collision_during_integration(self):
        # one Verlet step lands both filaments exactly on the origin
        q0 = np.array([[0.5, 0.0], [-0.5, 0.0]])
        v0 = np.array([[-0.5, 0.0], [0.5, 0.0]])
        with pytest.raises(CollisionError) as info:
            integrate_ode(q0, v0, 0.5, 2.0)
        assert info.value.height == pytest.approx(0.5)

    def test_colliding_initial_positions(self):
        with pytest.raises(CollisionError):
            integrate_ode([[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]], 0.1, 1.0)

    def test_bad_step(self):
        with pytest.raises(ValidationError):
            integrate_ode([[0.0, 0.0]], [[1.0, 0.0]], 0.0, 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            integrate_ode([[0.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], 0.1, 1.0)
