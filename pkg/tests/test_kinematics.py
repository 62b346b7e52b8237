"""Poses, velocities, Jacobians: RK4 and central-difference oracles."""

import numpy as np
import pytest

import oracles
from conftest import COARSE, make_rod, random_state
from plsrod import kinematics as kin
from plsrod.errors import DomainError
from plsrod.rod import STRAIGHT
from plsrod.se3 import adjoint_inv, exp_pose, is_pose, tangent_op

N_STATES = 50


def _rate(rng, n):
    return rng.normal(size=n) * np.tile([5, 5, 5, 0.05, 0.05, 0.05], n // 6)


def _fd_twist(pose_of_t, h=1e-6):
    """``vee(g^-1 dg/dt)`` by central differences."""
    g = pose_of_t(0.0)
    dg = (pose_of_t(h) - pose_of_t(-h)) / (2 * h)
    return oracles.vee(np.linalg.inv(g) @ dg)


class TestPose:
    def test_straight(self, coarse_rod):
        q0 = coarse_rod.rest_state()
        for X in np.linspace(0, 0.2, 11):
            g = kin.pose_at(coarse_rod, q0, X)
            np.testing.assert_allclose(g[:3, :3], np.eye(3), atol=1e-15)
            np.testing.assert_allclose(g[:3, 3], [X, 0, 0], atol=1e-15)

    def test_base_pose(self, coarse_rod, rng):
        q = random_state(rng, 4)
        gr = exp_pose(rng.normal(size=6), 1.0)
        np.testing.assert_allclose(kin.pose_at(coarse_rod, q, 0.0, gr), gr, atol=1e-15)
        np.testing.assert_allclose(
            kin.pose_at(coarse_rod, q, 0.13, gr), gr @ kin.pose_at(coarse_rod, q, 0.13, np.eye(4)), atol=1e-14
        )

    def test_constant_curvature_arc(self):
        rod = make_rod(lengths=(0.2,), segments=(37,))
        kappa = 12.0
        xi = np.array([0, 0, kappa, 1, 0, 0])
        q = np.tile(xi, 2)
        for X in (0.05, 0.123, 0.2):
            g = kin.pose_at(rod, q, X)
            np.testing.assert_allclose(g[:3, 3], [np.sin(kappa * X) / kappa, (1 - np.cos(kappa * X)) / kappa, 0], atol=1e-13)
            np.testing.assert_allclose(g, exp_pose(xi, X), atol=1e-13)

    def test_frozen_strain_rk4(self, rng):
        # the discrete model is exact for its piecewise-frozen strain field
        rod = make_rod(COARSE)
        for _ in range(N_STATES):
            q = random_state(rng, 4)
            X = rng.uniform(0, 0.2)
            strain = oracles.frozen_strain(rod.partition.bounds, COARSE, q.reshape(-1, 6))
            ref = oracles.rk4_pose(strain, X, h=2e-4, breaks=oracles.segment_breaks(rod.partition.bounds, COARSE))
            np.testing.assert_allclose(kin.pose_at(rod, q, X), ref, atol=1e-9)

    def test_continuous_field_first_order(self, rng):
        # against the linear field the left rule converges at first order
        q = random_state(rng, 4)
        ref = oracles.rk4_pose(oracles.linear_strain((0, 0.09, 0.16, 0.2), q.reshape(-1, 6)), 0.2, h=2e-5,
                                 breaks=(0.09, 0.16))
        errs = []
        for k in (1, 2, 4):
            rod = make_rod(tuple(k * s for s in (90, 70, 40)))
            errs.append(np.linalg.norm(kin.end_effector(rod, q) - ref[:3, 3]))
        ratios = np.array(errs[:-1]) / np.array(errs[1:])
        np.testing.assert_allclose(ratios, 2.0, rtol=0.1)

    def test_continuous_field_midpoint_second_order(self, rng):
        q = random_state(rng, 4)
        ref = oracles.rk4_pose(oracles.linear_strain((0, 0.09, 0.16, 0.2), q.reshape(-1, 6)), 0.2, h=2e-5,
                                 breaks=(0.09, 0.16))
        errs = []
        for k in (1, 2):
            rod = make_rod(tuple(k * s for s in (9, 7, 4)), sampling="midpoint")
            errs.append(np.linalg.norm(kin.end_effector(rod, q) - ref[:3, 3]))
        assert errs[0] / errs[1] > 3.5

    def test_valid_pose(self, fine_rod, rng):
        for _ in range(20):
            q = random_state(rng, 4)
            assert is_pose(kin.pose_at(fine_rod, q, rng.uniform(0, 0.2)), 1e-10)

    def test_continuous_across_boundaries(self, coarse_rod, rng):
        q = random_state(rng, 4)
        for b in (0.09, 0.16):
            np.testing.assert_allclose(kin.pose_at(coarse_rod, q, b - 1e-12), kin.pose_at(coarse_rod, q, b + 1e-12),
                                       atol=1e-10)

    def test_out_of_range(self, coarse_rod):
        with pytest.raises(DomainError):
            kin.pose_at(coarse_rod, coarse_rod.rest_state(), 0.21)

    def test_segment_doubling(self, rng):
        # self-convergence once spacing is <= 1 mm, |K| <= 30 1/m
        for _ in range(5):
            q = random_state(rng, 4)
            coarse = kin.end_effector(make_rod(), q)
            fine = kin.end_effector(make_rod((180, 140, 80)), q)
            assert np.linalg.norm(fine - coarse) < 1e-6


class TestStrainField:
    def test_interpolation_matrix(self, coarse_rod, rng):
        q = random_state(rng, 4)
        for X in rng.uniform(0, 0.2, 20):
            phi = kin.interpolation_matrix(coarse_rod, X)
            np.testing.assert_allclose(phi @ q, kin.strain_field(coarse_rod, q, X), atol=1e-15)
            nz = [k for k in range(4) if np.any(phi[:, 6 * k : 6 * k + 6])]
            assert len(nz) <= 2

    def test_segment_screws_endpoints(self, coarse_rod, rng):
        q = random_state(rng, 4)
        th = kin.segment_screws(coarse_rod, q)
        np.testing.assert_array_equal(th[0], q[:6])
        np.testing.assert_array_equal(th[9], q[6:12])

    def test_wrong_length(self, coarse_rod):
        with pytest.raises(ValueError):
            kin.segment_screws(coarse_rod, np.zeros(18))


class TestVelocity:
    def test_at_rest(self, coarse_rod, rng):
        q = random_state(rng, 4)
        for X in (0.0, 0.05, 0.2):
            np.testing.assert_array_equal(kin.velocity_at(coarse_rod, q, np.zeros(24), X), np.zeros(6))

    def test_equals_jacobian_product(self, coarse_rod, rng):
        for _ in range(20):
            q, qd = random_state(rng, 4), _rate(rng, 24)
            X = rng.uniform(0, 0.2)
            np.testing.assert_allclose(
                kin.velocity_at(coarse_rod, q, qd, X), kin.jacobian(coarse_rod, q, X) @ qd, atol=1e-10
            )

    def test_fd_oracle(self, coarse_rod, rng):
        for _ in range(N_STATES):
            q, qd = random_state(rng, 4), _rate(rng, 24)
            X = rng.uniform(0.01, 0.2)
            ref = _fd_twist(lambda t: kin.pose_at(coarse_rod, q + t * qd, X))
            eta = kin.velocity_at(coarse_rod, q, qd, X)
            assert np.linalg.norm(eta - ref) <= 1e-4 * max(np.linalg.norm(ref), 1e-3)

    def test_base_velocity_transported(self, coarse_rod, rng):
        q = random_state(rng, 4)
        eta0 = rng.normal(size=6)
        X = 0.15
        g = kin.pose_at(coarse_rod, q, X, np.eye(4))
        np.testing.assert_allclose(kin.velocity_at(coarse_rod, q, np.zeros(24), X, eta0), adjoint_inv(g) @ eta0,
                                   atol=1e-12)


class TestAcceleration:
    def test_at_rest(self, coarse_rod, rng):
        q = random_state(rng, 4)
        z = np.zeros(24)
        np.testing.assert_array_equal(kin.acceleration_at(coarse_rod, q, z, z, 0.1), np.zeros(6))

    def test_jdot_product(self, coarse_rod, rng):
        q, qd = random_state(rng, 4), _rate(rng, 24)
        X = 0.17
        np.testing.assert_allclose(
            kin.acceleration_at(coarse_rod, q, qd, np.zeros(24), X), kin.jacobian_dot(coarse_rod, q, qd, X) @ qd,
            atol=1e-12,
        )

    def test_fd_oracle(self, coarse_rod, rng):
        h = 1e-6
        for _ in range(N_STATES):
            q, qd, qdd = random_state(rng, 4), _rate(rng, 24), _rate(rng, 24)
            X = rng.uniform(0.01, 0.2)
            path = lambda t: (q + t * qd + 0.5 * t * t * qdd, qd + t * qdd)
            up, dn = path(h), path(-h)
            ref = (kin.velocity_at(coarse_rod, *up, X) - kin.velocity_at(coarse_rod, *dn, X)) / (2 * h)
            acc = kin.acceleration_at(coarse_rod, q, qd, qdd, X)
            assert np.linalg.norm(acc - ref) <= 1e-3 * max(np.linalg.norm(ref), 1e-3)


class TestJacobian:
    def test_fd_columns(self, coarse_rod, rng):
        h = 1e-6
        for _ in range(10):
            q = random_state(rng, 4)
            X = rng.uniform(0.01, 0.2)
            J = kin.jacobian(coarse_rod, q, X)
            g = kin.pose_at(coarse_rod, q, X)
            ginv = np.linalg.inv(g)
            for i in range(24):
                e = np.zeros(24)
                e[i] = h
                dg = (kin.pose_at(coarse_rod, q + e, X) - kin.pose_at(coarse_rod, q - e, X)) / (2 * h)
                np.testing.assert_allclose(J[:, i], oracles.vee(ginv @ dg), atol=1e-5)

    def test_sparsity(self, coarse_rod, rng):
        q = random_state(rng, 4)
        for X, last in ((0.05, 2), (0.09, 2), (0.1, 3), (0.19, 4)):
            J = kin.jacobian(coarse_rod, q, X)
            assert np.all(J[:, 6 * last :] == 0.0)
            assert np.any(J[:, 6 * (last - 1) : 6 * last] != 0.0)

    def test_straight_first_section(self, coarse_rod):
        # uniform strain: the two populated blocks add up to the tangent map
        q0 = coarse_rod.rest_state()
        for X in (0.003, 0.02, 0.09):
            J = kin.jacobian(coarse_rod, q0, X)
            np.testing.assert_allclose(J[:, :6] + J[:, 6:12], tangent_op(STRAIGHT, X), atol=1e-14)

    def test_uniform_rate_any_section(self, coarse_rod, rng):
        xi = np.concatenate([rng.normal(size=3) * 5, [1.02, 0.01, -0.01]])
        q = np.tile(xi, 4)
        for X in (0.05, 0.12, 0.2):
            J = kin.jacobian(coarse_rod, q, X)
            Jsum = sum(J[:, 6 * k : 6 * k + 6] for k in range(4))
            np.testing.assert_allclose(Jsum, tangent_op(xi, X), atol=1e-12)


class TestJacobianDot:
    def test_zero_rate(self, coarse_rod, rng):
        q = random_state(rng, 4)
        np.testing.assert_array_equal(kin.jacobian_dot(coarse_rod, q, np.zeros(24), 0.1), np.zeros((6, 24)))

    def test_directional_fd(self, coarse_rod, rng):
        h = 1e-6
        for _ in range(20):
            q, qd = random_state(rng, 4), _rate(rng, 24)
            X = rng.uniform(0.01, 0.2)
            ref = (kin.jacobian(coarse_rod, q + h * qd, X) - kin.jacobian(coarse_rod, q - h * qd, X)) / (2 * h)
            np.testing.assert_allclose(kin.jacobian_dot(coarse_rod, q, qd, X), ref, atol=1e-4)

    def test_one_section_dense_quadrature(self, rng):
        # one section, one segment: J(X) = T(xi, X) [a-weights], so Jdot is d/dt of a closed form
        rod = make_rod(lengths=(0.2,), segments=(1,))
        xi = np.concatenate([rng.normal(size=3) * 3, [1.0, 0.0, 0.0]])
        q, qd = np.tile(xi, 2), _rate(rng, 12)
        X = 0.2
        h = 1e-6
        T = lambda q: tangent_op(q[:6], X)
        dT = (T(q + h * qd) - T(q - h * qd)) / (2 * h)
        Jd = kin.jacobian_dot(rod, q, qd, X)
        np.testing.assert_allclose(Jd[:, :6], dT, atol=1e-6)
        np.testing.assert_allclose(Jd[:, 6:], 0.0, atol=1e-15)


class TestPcs:
    def test_straight(self, coarse_rod):
        g = kin.pcs_pose_at(coarse_rod, np.tile(STRAIGHT, 3), 0.2)
        np.testing.assert_allclose(g[:3, 3], [0.2, 0, 0], atol=1e-15)

    def test_degenerate_pls(self, rng):
        rod = make_rod(COARSE)
        for _ in range(20):
            sec = random_state(rng, 3).reshape(3, 6)
            # PLS with a constant strain per section needs separate nodes, which a
            # shared-node model only has when neighbours agree; use one strain per rod
            q_pls = np.tile(sec[0], 4)
            q_pcs = np.tile(sec[0], 3)
            for X in rng.uniform(0, 0.2, 5):
                np.testing.assert_allclose(kin.pose_at(rod, q_pls, X), kin.pcs_pose_at(rod, q_pcs, X), atol=1e-9)

    def test_rk4_piecewise_constant(self, coarse_rod, rng):
        bounds = np.array(coarse_rod.partition.bounds)
        for _ in range(10):
            sec = random_state(rng, 3).reshape(3, 6)
            strain = lambda x: sec[min(int(np.searchsorted(bounds, x, side="right")) - 1, 2)]
            ref = oracles.rk4_pose(strain, 0.2, h=1e-4, breaks=bounds)
            np.testing.assert_allclose(kin.pcs_pose_at(coarse_rod, sec.ravel(), 0.2), ref, atol=1e-9)

    def test_single_exponential_per_section(self, coarse_rod, rng):
        sec = random_state(rng, 3).reshape(3, 6)
        g1 = exp_pose(sec[0], 0.09)
        np.testing.assert_allclose(kin.pcs_pose_at(coarse_rod, sec.ravel(), 0.12), g1 @ exp_pose(sec[1], 0.03),
                                   atol=1e-13)


class TestCenterline:
    def test_straight_three_samples(self, coarse_rod):
        rows = kin.centerline(coarse_rod, coarse_rod.rest_state(), 3)
        np.testing.assert_allclose(rows[:, 0], [0, 0.1, 0.2])
        np.testing.assert_allclose(rows[:, 1:4], [[0, 0, 0], [0.1, 0, 0], [0.2, 0, 0]], atol=1e-15)
        np.testing.assert_allclose(rows[:, 4:], np.tile([1, 0, 0, 0], (3, 1)), atol=1e-15)

    def test_quaternions_and_tip(self, coarse_rod, rng):
        q = random_state(rng, 4)
        rows = kin.centerline(coarse_rod, q, 21)
        np.testing.assert_allclose(np.linalg.norm(rows[:, 4:], axis=1), 1.0, atol=1e-10)
        np.testing.assert_allclose(rows[-1, 1:4], kin.end_effector(coarse_rod, q), atol=1e-12)

    def test_too_few_samples(self, coarse_rod):
        with pytest.raises(ValueError):
            kin.centerline(coarse_rod, coarse_rod.rest_state(), 1)
