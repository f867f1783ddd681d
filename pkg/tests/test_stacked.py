"""Stacked horizon system: dimensions, structure, and rollout equivalence."""

import numpy as np
import pytest

import oracles
from seapack.errors import DimensionError, ParameterError
from seapack.stacked import (
    StackedSystem,
    Trajectory,
    auv_input_slice,
    auv_pos_slice,
    auv_vel_slice,
    build_stacked,
    input_dim,
    rollout,
    split_state,
    stack_state,
    state_dim,
)
from seapack.vehicles import LinearState, UsvState, VehicleParams, planner_drag_block

#: Mild drag so that delta = 100 s steps keep delta*e well below 1.
MILD = VehicleParams(gamma_v=(-0.03, -0.03, -0.03))


def random_fleet(rng, n_auvs):
    x0 = np.concatenate(
        [rng.uniform(-50, 50, 2)]
        + [np.concatenate([rng.uniform(-100, 100, 3), rng.uniform(-1, 1, 3)])
           for _ in range(n_auvs)])
    return x0


class TestBuildStacked:
    def test_dimension_audit(self):
        for n in range(1, 9):
            for k in range(2, 21):
                sys = build_stacked(n, MILD, 10.0, k)
                d, m = 2 + 6 * n, 2 + 3 * n
                assert sys.A.shape == (d, d)
                assert sys.B.shape == (d, m)
                assert sys.A_powers.shape == (k * d, d)
                assert sys.B_lower.shape == (k * d, k * m)
                assert sys.depth_row().shape == (1, d)
                assert sys.depth_row(0).shape == (1, d)
                assert sys.position_rows().shape == (3, d)
                assert sys.position_rows(n - 1).shape == (3, d)
                assert sys.usv_position_rows().shape == (3, d)
                assert sys.velocity_rows().shape == (3, d)
                assert sys.velocity_rows(0).shape == (3, d)

    def test_single_vehicle_shapes(self):
        sys = build_stacked(1, MILD, 10.0, 2)
        assert sys.A.shape == (8, 8)
        assert sys.B.shape == (8, 5)

    def test_five_vehicle_horizon_shapes(self):
        sys = build_stacked(5, MILD, 100.0, 20)
        assert sys.B_lower.shape == (640, 340)

    def test_small_delta_limit(self):
        sys = build_stacked(3, VehicleParams(), 1e-12, 4)
        assert np.max(np.abs(sys.A - np.eye(sys.state_dim))) <= 1e-9

    def test_block_structure(self):
        delta = 60.0
        params = [MILD, VehicleParams(gamma_v=(-0.01, -0.01, -0.02))]
        sys = build_stacked(2, params, delta, 3)
        assert np.array_equal(sys.A[:2, :2], np.eye(2))
        assert np.array_equal(sys.B[:2, :2], delta * np.eye(2))
        for n, p in enumerate(params):
            ps, vs = auv_pos_slice(n), auv_vel_slice(n)
            assert np.array_equal(sys.A[ps, ps], np.eye(3))
            assert np.array_equal(sys.A[ps, vs], delta * np.eye(3))
            assert np.allclose(sys.A[vs, vs],
                               np.eye(3) - delta * planner_drag_block(p))
            assert np.array_equal(sys.B[vs, auv_input_slice(n)], np.eye(3))
        off = auv_pos_slice(1)
        assert not sys.A[:8, off].any()

    def test_power_stack(self):
        sys = build_stacked(2, MILD, 25.0, 6)
        d = sys.state_dim
        for k in range(1, 7):
            expected = np.linalg.matrix_power(sys.A, k)
            assert np.allclose(sys.A_powers[(k - 1) * d:k * d], expected,
                               rtol=0, atol=1e-12)

    def test_convolution_stack(self):
        sys = build_stacked(1, MILD, 25.0, 5)
        d, m = sys.state_dim, sys.input_dim
        for i in range(5):
            for j in range(5):
                block = sys.B_lower[i * d:(i + 1) * d, j * m:(j + 1) * m]
                if j > i:
                    assert not block.any()
                else:
                    expected = np.linalg.matrix_power(sys.A, i - j) @ sys.B
                    assert np.allclose(block, expected, rtol=0, atol=1e-12)

    def test_input_convolution_slices(self):
        sys = build_stacked(2, MILD, 40.0, 4)
        for k in range(4):
            conv = sys.input_convolution(k)
            blocks = [np.linalg.matrix_power(sys.A, k - j) @ sys.B
                      for j in range(k + 1)]
            assert np.allclose(conv, np.hstack(blocks), rtol=0, atol=1e-12)

    def test_selector_semantics(self):
        rng = np.random.default_rng(7)
        sys = build_stacked(3, MILD, 10.0, 2)
        x = random_fleet(rng, 3)
        assert np.allclose(sys.position_rows(1) @ x, x[auv_pos_slice(1)])
        assert np.allclose(sys.velocity_rows(2) @ x, x[auv_vel_slice(2)])
        assert sys.depth_row(0) @ x == pytest.approx(x[auv_pos_slice(0)][2])
        assert sys.depth_row() @ x == pytest.approx(
            sum(x[auv_pos_slice(i)][2] for i in range(3)))
        assert np.allclose(sys.usv_position_rows() @ x, [x[0], x[1], 0.0])
        total = sum(x[auv_pos_slice(i)] for i in range(3))
        assert np.allclose(sys.position_rows() @ x, total)

    def test_param_list_length_checked(self):
        with pytest.raises(DimensionError):
            build_stacked(3, [MILD, MILD], 10.0, 4)

    def test_preconditions(self):
        with pytest.raises(ParameterError):
            build_stacked(0, MILD, 10.0, 4)
        with pytest.raises(ParameterError):
            build_stacked(1, MILD, 10.0, 1)
        with pytest.raises(ParameterError):
            build_stacked(1, MILD, 0.0, 4)

    def test_overshooting_drag_warns(self):
        # default drag rate is 5/31 per second; 7 s puts delta*e in (1, 2)
        with pytest.warns(UserWarning, match="alternates sign"):
            build_stacked(1, VehicleParams(), 7.0, 3)

    def test_divergent_drag_rejected(self):
        with pytest.raises(ParameterError, match="diverges"):
            build_stacked(1, VehicleParams(), 100.0, 3)

    def test_matrices_read_only(self):
        sys = build_stacked(1, MILD, 10.0, 3)
        with pytest.raises(ValueError):
            sys.A[0, 0] = 2.0


class TestStackState:
    def test_round_trip(self):
        rng = np.random.default_rng(3)
        usv = UsvState(rng.uniform(-5, 5, 2), np.zeros(2))
        auvs = [LinearState(rng.uniform(-5, 5, 3), rng.uniform(-1, 1, 3))
                for _ in range(4)]
        x = stack_state(usv, auvs)
        assert x.shape == (state_dim(4),)
        p, back = split_state(x)
        assert np.array_equal(p, usv.P)
        for a, b in zip(auvs, back):
            assert np.array_equal(a.P, b.P)
            assert np.array_equal(a.V, b.V)

    def test_accepts_plain_vectors(self):
        x = stack_state([1.0, 2.0], [np.arange(6.0)])
        assert np.array_equal(x, [1, 2, 0, 1, 2, 3, 4, 5])

    def test_bad_widths(self):
        with pytest.raises(DimensionError):
            stack_state([1.0, 2.0, 3.0], [np.zeros(6)])
        with pytest.raises(DimensionError):
            stack_state([1.0, 2.0], [np.zeros(5)])
        with pytest.raises(DimensionError):
            split_state(np.zeros(7))


class TestTrajectory:
    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            Trajectory(np.zeros((3, 7)), np.zeros((2, 5)))
        with pytest.raises(DimensionError):
            Trajectory(np.zeros((3, 8)), np.zeros((2, 4)))
        with pytest.raises(DimensionError):
            Trajectory(np.zeros((3, 8)), np.zeros((3, 5)))

    def test_accessors(self):
        rng = np.random.default_rng(11)
        states = rng.normal(size=(4, 14))
        inputs = rng.normal(size=(3, 8))
        t = Trajectory(states, inputs)
        assert t.n_auvs == 2 and t.steps == 3
        assert np.array_equal(t.usv_positions(), states[:, :2])
        assert np.array_equal(t.auv_positions(1), states[:, 8:11])
        assert np.array_equal(t.auv_velocities(0), states[:, 5:8])
        assert np.array_equal(t.usv_inputs(), inputs[:, :2])
        assert np.array_equal(t.auv_inputs(1), inputs[:, 5:8])


class TestRollout:
    def test_zero_inputs_zero_velocity_holds_still(self):
        sys = build_stacked(2, MILD, 50.0, 6)
        x0 = stack_state([3.0, -4.0],
                         [LinearState([1, 2, -30], np.zeros(3)),
                          LinearState([-5, 0, -40], np.zeros(3))])
        t = rollout(sys, x0, np.zeros((6, sys.input_dim)))
        assert np.allclose(t.states, np.tile(x0, (7, 1)))

    def test_dragless_coasting_is_linear(self):
        p = VehicleParams(gamma_v=(0.0, 0.0, 0.0))
        delta = 20.0
        sys = build_stacked(1, p, delta, 5)
        v = np.array([0.4, -0.2, 0.1])
        x0 = stack_state([0.0, 0.0], [LinearState([10, 20, -30], v)])
        t = rollout(sys, x0, np.zeros((5, sys.input_dim)))
        for k in range(6):
            assert np.allclose(t.auv_positions(0)[k],
                               [10, 20, -30] + k * delta * v)
            assert np.allclose(t.auv_velocities(0)[k], v)

    def test_matches_iterated_stepping(self):
        rng = np.random.default_rng(21)
        params = [MILD, VehicleParams(gamma_v=(-0.05, -0.05, -0.08))]
        sys = build_stacked(2, params, 100.0, 5)
        x0 = random_fleet(rng, 2)
        u = rng.uniform(-1, 1, (5, sys.input_dim))
        t = rollout(sys, x0, u)
        expected = oracles.fleet_rollout_iterative(x0, u, params, 100.0)
        assert np.max(np.abs(t.states - expected)) <= 1e-9

    def test_matches_iterated_stepping_many(self):
        rng = np.random.default_rng(1234)
        for _ in range(100):
            n = int(rng.integers(1, 5))
            k = int(rng.integers(2, 12))
            delta = float(rng.uniform(1.0, 120.0))
            params = [VehicleParams(gamma_v=tuple(-rng.uniform(0.001, 0.008, 3)))
                      for _ in range(n)]
            sys = build_stacked(n, params, delta, k)
            x0 = random_fleet(rng, n)
            u = rng.uniform(-1, 1, (k, sys.input_dim))
            t = rollout(sys, x0, u)
            expected = oracles.fleet_rollout_iterative(x0, u, params, delta)
            assert np.max(np.abs(t.states - expected)) <= 1e-9

    def test_flat_input_vector_accepted(self):
        rng = np.random.default_rng(5)
        sys = build_stacked(1, MILD, 30.0, 4)
        x0 = random_fleet(rng, 1)
        u = rng.uniform(-1, 1, (4, sys.input_dim))
        a = rollout(sys, x0, u)
        b = rollout(sys, x0, u.reshape(-1))
        assert np.array_equal(a.states, b.states)

    def test_dimension_errors(self):
        sys = build_stacked(1, MILD, 30.0, 4)
        with pytest.raises(DimensionError):
            rollout(sys, np.zeros(7), np.zeros((4, 5)))
        with pytest.raises(DimensionError):
            rollout(sys, np.zeros(8), np.zeros((3, 5)))

    def test_rollout_satisfies_one_step_dynamics(self):
        rng = np.random.default_rng(77)
        sys = build_stacked(3, MILD, 80.0, 6)
        x0 = random_fleet(rng, 3)
        u = rng.uniform(-1, 1, (6, sys.input_dim))
        t = rollout(sys, x0, u)
        for k in range(6):
            step = sys.A @ t.states[k] + sys.B @ u[k]
            assert np.max(np.abs(t.states[k + 1] - step)) <= 1e-9
