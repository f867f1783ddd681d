"""Vehicle-model tests: rotations, full dynamics, discrete model, heading."""

import math

import numpy as np
import pytest

import oracles
from seapack.errors import (
    ParameterError,
    SingularOrientationError,
    UndefinedHeadingError,
)
from seapack.vehicles import (
    FullState,
    LinearState,
    UsvState,
    VehicleParams,
    discrete_step,
    drag_matrix_E,
    full_dynamics_derivative,
    full_dynamics_step,
    heading_band_bounds,
    heading_change,
    heading_rate_linear_constraints,
    planner_drag_block,
    recover_heading_surge,
    rotation_and_transform_matrices,
    usv_step,
)


def random_params(rng):
    return VehicleParams(
        m=rng.uniform(10, 200),
        J=tuple(rng.uniform(0.5, 10, size=3)),
        gamma_vdot=tuple(rng.uniform(-5, 5, size=3)),
        gamma_v=tuple(rng.uniform(-8, -0.1, size=3)),
        gamma_omega=tuple(rng.uniform(-3, -0.1, size=3)),
    )


class TestRotations:
    def test_identity_at_zero(self):
        r_x, r_y, r_z, j1, j2 = rotation_and_transform_matrices(0, 0, 0)
        for m in (r_x, r_y, r_z, j1, j2):
            np.testing.assert_allclose(m, np.eye(3), atol=0)

    def test_orthonormality_many_angles(self):
        rng = np.random.default_rng(7)
        for _ in range(10_000):
            phi, theta, psi = rng.uniform(-math.pi, math.pi, size=3)
            theta = float(np.clip(theta, -1.4, 1.4))
            *_, j1, _ = rotation_and_transform_matrices(phi, theta, psi)
            assert np.abs(j1.T @ j1 - np.eye(3)).max() < 1e-12
            assert abs(np.linalg.det(j1) - 1.0) < 1e-12

    def test_elementwise_expansion(self):
        *_, j1, _ = rotation_and_transform_matrices(0.3, -0.2, 1.1)
        np.testing.assert_allclose(j1, oracles.j1_expansion(0.3, -0.2, 1.1),
                                   atol=1e-15)

    def test_random_expansion_sweep(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            phi, theta, psi = rng.uniform(-1.4, 1.4, size=3)
            *_, j1, _ = rotation_and_transform_matrices(phi, theta, psi)
            np.testing.assert_allclose(j1, oracles.j1_expansion(phi, theta, psi),
                                       atol=1e-14)

    def test_singularity_raises(self):
        with pytest.raises(SingularOrientationError):
            rotation_and_transform_matrices(0.1, math.pi / 2, 0.2)


class TestFullDynamics:
    def test_equilibrium(self):
        s = FullState(np.zeros(6), np.zeros(6))
        der = full_dynamics_derivative(s, np.zeros(6), np.zeros(6),
                                       VehicleParams())
        np.testing.assert_allclose(der, np.zeros(12), atol=0)

    def test_pure_surge_decay(self):
        p = VehicleParams()
        s = FullState(np.zeros(6), [1, 0, 0, 0, 0, 0])
        der = full_dynamics_derivative(s, np.zeros(6), np.zeros(6), p)
        expected = p.gamma_v[0] * 1.0 / (p.m - p.gamma_vdot[0])
        assert der[6] == pytest.approx(expected, rel=1e-12)
        assert expected < 0  # negative drag coefficient decays the speed
        np.testing.assert_allclose(der[7:], np.zeros(5), atol=1e-15)
        assert der[0] == pytest.approx(1.0)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            p = random_params(rng)
            eta = rng.uniform(-1, 1, size=6)
            eta[4] *= 0.5
            nu = rng.uniform(-1, 1, size=6)
            u = rng.uniform(-1, 1, size=6)
            d = rng.uniform(-0.2, 0.2, size=6)
            der = full_dynamics_derivative(FullState(eta, nu), u, d, p)
            want = oracles.nu_dot_scalar(nu, u, d, p.m, p.J, p.gamma_vdot,
                                         p.gamma_v, p.gamma_omega)
            np.testing.assert_allclose(der[6:], want, rtol=1e-12, atol=1e-12)

    def test_finite_difference_agreement(self):
        rng = np.random.default_rng(33)
        p = VehicleParams()
        h = 1e-5
        for _ in range(20):
            eta = rng.uniform(-0.5, 0.5, size=6)
            nu = rng.uniform(-0.5, 0.5, size=6)
            u = rng.uniform(-0.5, 0.5, size=6)
            s = FullState(eta, nu)
            der = full_dynamics_derivative(s, u, np.zeros(6), p)
            fwd = full_dynamics_step(s, u, np.zeros(6), p, h).as_vector()
            bck = full_dynamics_step(s, u, np.zeros(6), p, -h).as_vector()
            fd = (fwd - bck) / (2 * h)
            scale = max(1.0, float(np.abs(der).max()))
            assert np.abs(fd - der).max() / scale < 1e-6

    def test_richardson_order(self):
        p = VehicleParams()
        s = FullState([0, 0, -5, 0.1, -0.1, 0.3], [0.5, 0.1, -0.2, 0.05, 0, 0.1])
        u = np.array([0.1, 0, 0.05, 0, 0.02, 0])

        def step_err(h):
            ref = s.as_vector()
            fine = oracles.rk4(
                lambda y: full_dynamics_derivative(
                    FullState.from_vector(y), u, np.zeros(6), p),
                ref, h / 8, 8)
            one = full_dynamics_step(s, u, np.zeros(6), p, h).as_vector()
            return np.linalg.norm(one - fine)

        e1, e2 = step_err(0.4), step_err(0.2)
        assert e1 / e2 > 10  # close to the theoretical 16x for 4th order

    def test_pure_surge_no_drag_advance(self):
        p = VehicleParams(gamma_v=(0, 0, 0), gamma_omega=(0, 0, 0))
        s = FullState(np.zeros(6), [1, 0, 0, 0, 0, 0])
        out = full_dynamics_step(s, np.zeros(6), np.zeros(6), p, 2.0,
                                 coriolis=False)
        assert out.eta[0] == pytest.approx(2.0, abs=1e-12)
        assert out.eta[5] == pytest.approx(0.0, abs=1e-15)

    def test_speed_nonincreasing_without_coriolis(self):
        rng = np.random.default_rng(5)
        p = VehicleParams()
        for _ in range(20):
            s = FullState(np.zeros(6), rng.uniform(-1, 1, size=6))
            prev = np.linalg.norm(s.nu)
            for _ in range(10):
                s = full_dynamics_step(s, np.zeros(6), np.zeros(6), p, 0.2,
                                       coriolis=False)
                cur = np.linalg.norm(s.nu)
                assert cur <= prev * (1 + 1e-12)
                prev = cur


class TestDragMatrix:
    def test_zero_gammas(self):
        p = VehicleParams(gamma_vdot=(0, 0, 0), gamma_v=(0, 0, 0),
                          gamma_omega=(0, 0, 0))
        np.testing.assert_allclose(drag_matrix_E(p), np.zeros((3, 3)), atol=0)

    def test_direct_substitution(self):
        p = VehicleParams(m=100, gamma_vdot=(10, 10, 10), gamma_v=(9, 9, 9))
        assert drag_matrix_E(p)[0, 0] == pytest.approx(0.1, abs=1e-15)

    def test_scalar_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            p = random_params(rng)
            e = drag_matrix_E(p)
            assert e[0, 0] == pytest.approx(
                p.gamma_v[0] / (p.m - p.gamma_vdot[0]), rel=1e-14)
            assert e[1, 1] == pytest.approx(
                p.gamma_v[2] / (p.m - p.gamma_vdot[2]), rel=1e-14)
            assert e[2, 2] == pytest.approx(p.gamma_omega[2] / p.J[2], rel=1e-14)
            blk = planner_drag_block(p)
            assert blk[0, 0] == blk[1, 1] == abs(e[0, 0])
            assert blk[2, 2] == abs(e[1, 1])

    def test_bad_denominator(self):
        with pytest.raises(ParameterError):
            VehicleParams(m=1.0, gamma_vdot=(2.0, 0.0, 0.0))


class TestDiscreteModel:
    def test_ballistic(self):
        p = VehicleParams(gamma_v=(0, 0, 0))
        x = LinearState([1, 2, -3], [0.5, -0.5, 0.1])
        out = discrete_step(x, np.zeros(3), p, 10.0)
        np.testing.assert_allclose(out.P, [6, -3, -2], atol=1e-12)
        np.testing.assert_allclose(out.V, x.V, atol=0)

    def test_paper_sampling_time(self):
        p = VehicleParams(gamma_v=(-0.03, -0.03, -0.03))
        x = LinearState([0, 0, -50], [0.3, 0, 0])
        out = discrete_step(x, [0.01, 0, 0], p, 100.0)
        rate = abs(p.gamma_v[0] / (p.m - p.gamma_vdot[0]))
        assert out.P[0] == pytest.approx(30.0)
        assert out.V[0] == pytest.approx((1 - 100.0 * rate) * 0.3 + 0.01)

    def test_linearity(self):
        rng = np.random.default_rng(17)
        p = VehicleParams(gamma_v=(-0.5, -0.5, -0.5))
        for _ in range(50):
            x1 = LinearState(rng.normal(size=3), rng.normal(size=3))
            x2 = LinearState(rng.normal(size=3), rng.normal(size=3))
            u1, u2 = rng.normal(size=3), rng.normal(size=3)
            a, b = rng.normal(), rng.normal()
            mixed = discrete_step(
                LinearState(a * x1.P + b * x2.P, a * x1.V + b * x2.V),
                a * u1 + b * u2, p, 2.0)
            s1 = discrete_step(x1, u1, p, 2.0)
            s2 = discrete_step(x2, u2, p, 2.0)
            np.testing.assert_allclose(mixed.P, a * s1.P + b * s2.P,
                                       rtol=1e-10, atol=1e-10)
            np.testing.assert_allclose(mixed.V, a * s1.V + b * s2.V,
                                       rtol=1e-10, atol=1e-10)

    def test_noise_added_to_position(self):
        p = VehicleParams()
        x = LinearState([0, 0, -10], [0, 0, 0])
        out = discrete_step(x, np.zeros(3), p, 1.0, noise=[0.1, -0.2, 0.3])
        np.testing.assert_allclose(out.P, [0.1, -0.2, -9.7], atol=1e-12)


class TestHeading:
    def test_recover_examples(self):
        assert recover_heading_surge([1, 0, 0.4]) == pytest.approx((1, 0))
        v, psi = recover_heading_surge([0, 2, -1])
        assert (v, psi) == pytest.approx((2, math.pi / 2))
        v, psi = recover_heading_surge([-1, -1, 0])
        assert (v, psi) == pytest.approx((math.sqrt(2), -3 * math.pi / 4))

    def test_recover_zero_raises(self):
        with pytest.raises(UndefinedHeadingError):
            recover_heading_surge([0, 0, 1])

    def test_round_trip(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            vx, vy = rng.uniform(-3, 3, size=2)
            if vx == 0 and vy == 0:
                continue
            v, psi = recover_heading_surge([vx, vy, rng.normal()])
            assert v * math.cos(psi) == pytest.approx(vx, abs=1e-12)
            assert v * math.sin(psi) == pytest.approx(vy, abs=1e-12)

    def test_change_examples(self):
        assert heading_change([1, 1, 0], [1, 1, 0], 5.0) == 0
        assert heading_change([1, 0], [0, 1], 1.0) == pytest.approx(math.pi / 2)
        got = heading_change([math.cos(3.1), math.sin(3.1)],
                             [math.cos(-3.1), math.sin(-3.1)], 1.0)
        assert got == pytest.approx(2 * math.pi - 6.2, abs=1e-9)
        assert 0.08 < got < 0.09

    def test_change_range_property(self):
        rng = np.random.default_rng(13)
        delta = 3.0
        for _ in range(2000):
            v1 = rng.uniform(-2, 2, size=2)
            v2 = rng.uniform(-2, 2, size=2)
            if not (v1.any() and v2.any()):
                continue
            rate = heading_change(v1, v2, delta)
            assert -math.pi / delta < rate <= math.pi / delta
            want = oracles.wrap_via_trig(
                math.atan2(v2[1], v2[0]) - math.atan2(v1[1], v1[0])) / delta
            assert rate == pytest.approx(want, abs=1e-12) or (
                rate == pytest.approx(math.pi / delta)
                and want == pytest.approx(-math.pi / delta))


class TestHeadingBand:
    def test_zero_alpha_pins(self):
        p = VehicleParams(alpha=0.0)
        lo, hi = heading_band_bounds([0.7, -0.4], p)
        np.testing.assert_allclose(lo, [0.7, -0.4], atol=0)
        np.testing.assert_allclose(hi, [0.7, -0.4], atol=0)

    def test_direct_substitution(self):
        p = VehicleParams(alpha=0.2, v_h_max=2.0)  # band factor 0.1
        rows, rhs = heading_rate_linear_constraints([1.0, 0.0], p, 100.0)
        assert rows.shape == (4, 2)
        # x-component feasible interval is (0.9, 1.1) up to the strict margin
        assert rhs[0] == pytest.approx(1.1, abs=1e-8)
        assert -rhs[1] == pytest.approx(0.9, abs=1e-8)
        assert rhs[0] < 1.1 and -rhs[1] > 0.9
        # zero reference component is pinned at zero
        assert rhs[2] == 0 and rhs[3] == 0

    def test_negative_component_branch(self):
        p = VehicleParams(alpha=0.2, v_h_max=2.0)
        lo, hi = heading_band_bounds([-1.0, 0.5], p)
        assert lo[0] == pytest.approx(-1.1, abs=1e-8)
        assert hi[0] == pytest.approx(-0.9, abs=1e-8)
        assert lo[0] < hi[0] < 0

    def test_band_preserves_sign(self):
        rng = np.random.default_rng(41)
        p = VehicleParams()
        for _ in range(500):
            v = rng.uniform(-2, 2, size=2)
            lo, hi = heading_band_bounds(v, p)
            assert np.all(lo <= hi + 1e-15)
            assert np.all(np.sign(lo) == np.sign(hi))
            mid = 0.5 * (lo + hi)
            assert np.all(np.sign(mid) == np.sign(v))

    def test_monte_carlo_heading_bound(self):
        p = VehicleParams(alpha=0.2, v_h_max=2.0)
        a = p.band_factor
        bound = oracles.heading_band_max_turn(a)
        rng = np.random.default_rng(55)
        worst = 0.0
        for _ in range(10_000):
            psi = rng.uniform(-math.pi, math.pi)
            speed = rng.uniform(0.1, 2.0)
            v1 = np.array([speed * math.cos(psi), speed * math.sin(psi)])
            f = rng.uniform(1 - a, 1 + a, size=2)
            v2 = f * v1
            lo, hi = heading_band_bounds(v1, p)
            assert np.all(v2 >= lo - 1e-9) and np.all(v2 <= hi + 1e-9)
            worst = max(worst, abs(heading_change(v1, v2, 1.0)))
        assert worst <= bound * (1 + 1e-6)
        # the analytic extreme for factor ratio r = (1+a)/(1-a)
        r = (1 + a) / (1 - a)
        analytic = math.atan(math.sqrt(r)) - math.atan(1 / math.sqrt(r))
        assert bound == pytest.approx(analytic, rel=1e-3)


class TestUsv:
    def test_stationary(self):
        s = usv_step(UsvState([3, 4], [0, 0]), 10.0)
        np.testing.assert_allclose(s.P, [3, 4], atol=0)

    def test_direct_substitution(self):
        s = usv_step(UsvState([0, 0], [1, 2]), 100.0)
        np.testing.assert_allclose(s.P, [100, 200], atol=0)

    def test_param_validation(self):
        with pytest.raises(ParameterError):
            VehicleParams(m=-1)
        with pytest.raises(ParameterError):
            VehicleParams(v_h_max=3.0, v_max=2.5)
