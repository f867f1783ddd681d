"""Stacked fleet dynamics over a planning horizon.

The fleet state chains the surface vehicle's 2D position with every
submersible's position/velocity pair into one vector. The one-step block
dynamics are unrolled over the K-step horizon, so any trajectory is an
affine function of the stacked input sequence alone and the planner never
carries state variables. Selector matrices extract depth, position and
velocity slices of individual vehicles from the fleet state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import DimensionError, ParameterError
from .vehicles import LinearState, UsvState, VehicleParams, planner_drag_block

FloatArray = npt.NDArray[np.float64]

#: Per-vehicle state width: 3D position plus 3D velocity.
AUV_STATE = 6
#: Surface-vehicle state width: 2D position.
USV_STATE = 2
#: Per-vehicle input width.
AUV_INPUT = 3
#: Surface-vehicle input width: 2D velocity command.
USV_INPUT = 2


def state_dim(n_auvs: int) -> int:
    """Width of the stacked fleet state vector."""
    return USV_STATE + AUV_STATE * n_auvs


def input_dim(n_auvs: int) -> int:
    """Width of the stacked per-step input vector."""
    return USV_INPUT + AUV_INPUT * n_auvs


def usv_pos_slice() -> slice:
    """Columns of the surface vehicle's (x, y) in the fleet state."""
    return slice(0, USV_STATE)


def auv_pos_slice(n: int) -> slice:
    """Columns of submersible n's position in the fleet state (0-based n)."""
    off = USV_STATE + AUV_STATE * n
    return slice(off, off + 3)


def auv_vel_slice(n: int) -> slice:
    """Columns of submersible n's velocity in the fleet state (0-based n)."""
    off = USV_STATE + AUV_STATE * n + 3
    return slice(off, off + 3)


def usv_input_slice() -> slice:
    """Columns of the surface vehicle's velocity command in one input block."""
    return slice(0, USV_INPUT)


def auv_input_slice(n: int) -> slice:
    """Columns of submersible n's thrust input in one input block."""
    off = USV_INPUT + AUV_INPUT * n
    return slice(off, off + 3)


def stack_state(usv, auvs) -> FloatArray:
    """Assemble one fleet state vector from per-vehicle states.

    ``usv`` is a UsvState or a 2-vector position; ``auvs`` is a sequence of
    LinearState or 6-vectors (position then velocity).
    """
    if isinstance(usv, UsvState):
        head = usv.P
    else:
        head = np.asarray(usv, dtype=float).reshape(-1)
        if head.size != 2:
            raise DimensionError(f"usv position must have 2 entries, got {head.size}")
    parts = [head]
    for i, a in enumerate(auvs):
        if isinstance(a, LinearState):
            parts.append(a.P)
            parts.append(a.V)
        else:
            v = np.asarray(a, dtype=float).reshape(-1)
            if v.size != AUV_STATE:
                raise DimensionError(
                    f"auv state {i} must have {AUV_STATE} entries, got {v.size}")
            parts.append(v)
    return np.concatenate(parts)


def split_state(x) -> tuple[FloatArray, list[LinearState]]:
    """Inverse of stack_state: (usv 2-position, list of LinearState)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n, rem = divmod(x.size - USV_STATE, AUV_STATE)
    if x.size < USV_STATE or rem or n < 1:
        raise DimensionError(f"fleet state width {x.size} is not 2 + 6n")
    auvs = [LinearState(x[auv_pos_slice(i)], x[auv_vel_slice(i)]) for i in range(n)]
    return x[:USV_STATE].copy(), auvs


@dataclass(frozen=True)
class StackedSystem:
    """Block horizon dynamics of one surface vehicle and n_auvs submersibles.

    ``A``/``B`` are the one-step fleet matrices; ``A_powers`` stacks
    A^1..A^K row-blockwise and ``B_lower`` is the lower block-triangular
    convolution mapping stacked inputs to stacked states:
    states[k] = A^k x0 + B_lower[block k-1] @ inputs. All arrays are
    read-only after build.
    """

    n_auvs: int
    steps: int
    delta: float
    params: tuple[VehicleParams, ...]
    A: FloatArray
    B: FloatArray
    A_powers: FloatArray
    B_lower: FloatArray

    @property
    def state_dim(self) -> int:
        return state_dim(self.n_auvs)

    @property
    def input_dim(self) -> int:
        return input_dim(self.n_auvs)

    def state_rows(self, k: int) -> slice:
        """Rows of state k (1-based, 1..K) inside the stacked state vector."""
        if not 1 <= k <= self.steps:
            raise DimensionError(f"step {k} outside 1..{self.steps}")
        d = self.state_dim
        return slice((k - 1) * d, k * d)

    def input_convolution(self, k: int) -> FloatArray:
        """Blocks [A^k B, ..., A B, B] mapping inputs 0..k to state k+1."""
        if not 0 <= k < self.steps:
            raise DimensionError(f"step {k} outside 0..{self.steps - 1}")
        m = self.input_dim
        return self.B_lower[self.state_rows(k + 1), : (k + 1) * m].copy()

    def depth_row(self, n: int | None = None) -> FloatArray:
        """1xD row reading submersible n's z, or the sum of all z when n is None."""
        row = np.zeros((1, self.state_dim))
        for i in self._range(n):
            row[0, auv_pos_slice(i).start + 2] = 1.0
        return row

    def position_rows(self, n: int | None = None) -> FloatArray:
        """3xD block reading submersible n's position (summed when n is None)."""
        rows = np.zeros((3, self.state_dim))
        for i in self._range(n):
            rows[:, auv_pos_slice(i)] += np.eye(3)
        return rows

    def velocity_rows(self, n: int | None = None) -> FloatArray:
        """3xD block reading submersible n's velocity (summed when n is None)."""
        rows = np.zeros((3, self.state_dim))
        for i in self._range(n):
            rows[:, auv_vel_slice(i)] += np.eye(3)
        return rows

    def usv_position_rows(self) -> FloatArray:
        """3xD block reading the surface vehicle's position as (x, y, 0)."""
        rows = np.zeros((3, self.state_dim))
        rows[:2, usv_pos_slice()] = np.eye(2)
        return rows

    def _range(self, n: int | None) -> range:
        if n is None:
            return range(self.n_auvs)
        if not 0 <= n < self.n_auvs:
            raise DimensionError(f"vehicle index {n} outside 0..{self.n_auvs - 1}")
        return range(n, n + 1)


def build_stacked(n_auvs: int, params, delta: float, steps: int) -> StackedSystem:
    """Build the stacked horizon system for n_auvs submersibles.

    ``params`` is one VehicleParams shared by all vehicles or a sequence of
    length n_auvs. The per-vehicle velocity map is I - delta*E with E the
    diagonal drag block; a drag rate with delta*e > 1 flips the velocity
    sign every step and draws a warning, and delta*e >= 2 diverges and is
    rejected.
    """
    if n_auvs < 1:
        raise ParameterError(f"need at least one submersible, got {n_auvs}")
    if steps < 2:
        raise ParameterError(f"horizon must have at least 2 steps, got {steps}")
    if delta <= 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if isinstance(params, VehicleParams):
        params = [params] * n_auvs
    else:
        params = list(params)
    if len(params) != n_auvs:
        raise DimensionError(
            f"need {n_auvs} parameter sets, got {len(params)}")

    d = state_dim(n_auvs)
    m = input_dim(n_auvs)
    A = np.zeros((d, d))
    B = np.zeros((d, m))
    A[usv_pos_slice(), usv_pos_slice()] = np.eye(2)
    B[usv_pos_slice(), usv_input_slice()] = delta * np.eye(2)
    for n, p in enumerate(params):
        e = planner_drag_block(p)
        rate = delta * float(np.max(np.diag(e)))
        if rate >= 2.0:
            raise ParameterError(
                f"delta*drag = {rate:.3g} >= 2 for vehicle {n}: "
                "discrete velocity map diverges; reduce delta or drag")
        if rate > 1.0:
            warnings.warn(
                f"delta*drag = {rate:.3g} > 1 for vehicle {n}: "
                "discrete velocity map alternates sign each step",
                stacklevel=2)
        ps, vs = auv_pos_slice(n), auv_vel_slice(n)
        A[ps, ps] = np.eye(3)
        A[ps, vs] = delta * np.eye(3)
        A[vs, vs] = np.eye(3) - delta * e
        B[vs, auv_input_slice(n)] = np.eye(3)

    A_powers = np.empty((steps * d, d))
    acc = np.eye(d)
    for k in range(steps):
        acc = A @ acc
        A_powers[k * d:(k + 1) * d] = acc

    B_lower = np.zeros((steps * d, steps * m))
    conv = B
    for lag in range(steps):
        block = conv
        for i in range(lag, steps):
            j = i - lag
            B_lower[i * d:(i + 1) * d, j * m:(j + 1) * m] = block
        conv = A @ conv
    for arr in (A, B, A_powers, B_lower):
        arr.setflags(write=False)
    return StackedSystem(n_auvs, steps, delta, tuple(params), A, B, A_powers,
                         B_lower)


@dataclass(frozen=True)
class Trajectory:
    """A planned horizon: states[0..K] by rows and inputs[0..K-1] by rows."""

    states: FloatArray
    inputs: FloatArray

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        u = np.asarray(self.inputs, dtype=float)
        if s.ndim != 2 or u.ndim != 2:
            raise DimensionError("states and inputs must be 2D row-per-step arrays")
        n, rem = divmod(s.shape[1] - USV_STATE, AUV_STATE)
        if rem or n < 1:
            raise DimensionError(f"state width {s.shape[1]} is not 2 + 6n")
        if u.shape[1] != input_dim(n):
            raise DimensionError(
                f"input width {u.shape[1]} does not match {input_dim(n)}")
        if s.shape[0] != u.shape[0] + 1:
            raise DimensionError(
                f"{s.shape[0]} states need {s.shape[0] - 1} inputs, got {u.shape[0]}")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "inputs", u)

    @property
    def n_auvs(self) -> int:
        return (self.states.shape[1] - USV_STATE) // AUV_STATE

    @property
    def steps(self) -> int:
        return self.inputs.shape[0]

    def usv_positions(self) -> FloatArray:
        """(K+1)x2 surface-vehicle track."""
        return self.states[:, usv_pos_slice()]

    def auv_positions(self, n: int) -> FloatArray:
        """(K+1)x3 position track of submersible n (0-based)."""
        return self.states[:, auv_pos_slice(n)]

    def auv_velocities(self, n: int) -> FloatArray:
        """(K+1)x3 velocity track of submersible n (0-based)."""
        return self.states[:, auv_vel_slice(n)]

    def usv_inputs(self) -> FloatArray:
        """Kx2 surface-vehicle velocity commands."""
        return self.inputs[:, usv_input_slice()]

    def auv_inputs(self, n: int) -> FloatArray:
        """Kx3 thrust inputs of submersible n (0-based)."""
        return self.inputs[:, auv_input_slice(n)]


def rollout(sys: StackedSystem, x0, inputs) -> Trajectory:
    """Evaluate the horizon in closed form from the stacked matrices.

    ``inputs`` is (K, input_dim) row-per-step or the equivalent flat
    vector. Matches iterated single-step application to within roundoff.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != sys.state_dim:
        raise DimensionError(
            f"initial state must have {sys.state_dim} entries, got {x0.size}")
    u = np.asarray(inputs, dtype=float)
    flat = u.reshape(-1)
    if flat.size != sys.steps * sys.input_dim:
        raise DimensionError(
            f"need {sys.steps} inputs of width {sys.input_dim}, got size {flat.size}")
    stacked = sys.A_powers @ x0 + sys.B_lower @ flat
    states = np.vstack([x0, stacked.reshape(sys.steps, sys.state_dim)])
    return Trajectory(states, flat.reshape(sys.steps, sys.input_dim))
