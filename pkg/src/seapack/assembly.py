"""Horizon program assembly, floor iteration, and trajectory scoring.

Planning over one horizon is posed on the stacked input vector alone. Norm
bounds on affine quantities (relay range, speed, sonar rings) go to the
solver as affine ball constraints on input-space row blocks, so the
decision vector stays the inputs; the concave spreading reward and the
lower sonar ring bound are linearized about a reference trajectory. The
floor bound under each vehicle is refreshed iteratively from the latest
waypoints. Scoring and validation evaluate the full objective list and
every constraint on a finished trajectory, independent of how it was
produced.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import (
    DimensionError,
    InfeasibleProgramError,
    ParameterError,
    UndefinedHeadingError,
)
from .qp import ConvexProgram, SolveReport, solve
from .stacked import (
    StackedSystem,
    Trajectory,
    auv_pos_slice,
    auv_vel_slice,
    rollout,
)
from .terrain import SeafloorMap, collision_free, depth_at, los_clear
from .vehicles import heading_change, heading_rate_coupled_rows

FloatArray = npt.NDArray[np.float64]

#: Keep-out depth below the surface for every vehicle (m).
DEFAULT_SURFACE_MARGIN = 1.0
#: Extra slack added to refreshed floor bounds so strict floor clearance
#: survives solver tolerance (m).
FLOOR_REFRESH_MARGIN = 0.1
#: Reference edges shorter than this cannot be normalized into a lower
#: ring direction and drop that bound with a warning (m).
DEGENERATE_EDGE = 1e-6


@dataclass(frozen=True)
class PlanWeights:
    """Objective weights and range parameters of one planning horizon.

    The solvers use w1 (energy), w2 (depth reward), w5 (spreading) and
    w8_2 (destination pull); w3, w4, w6, w7 and w8 only weight the scoring
    of finished trajectories. ``target`` is the surface vehicle's
    destination; when None the destination term is absent. Ranges: d_s is
    the sonar link budget, d_t its ring tolerance, d_max the hard tether
    to the surface vehicle.
    """

    w1: float = 1e-2
    w2: float = 1e-3
    w3: float = 1e-3
    w4: float = 1e-3
    w5: float = 1e-4
    w6: float = 1e-3
    w7: float = 1e-3
    w8: float = 1e-3
    w8_2: float = 1e-3
    d_s: float = 150.0
    d_max: float = 1000.0
    d_t: float = 30.0
    target: tuple[float, float] | None = None
    surface_margin: float = DEFAULT_SURFACE_MARGIN

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8", "w8_2"):
            if getattr(self, name) < 0:
                raise ParameterError(
                    f"{name} must be non-negative, got {getattr(self, name)}")
        if not 0.0 < self.d_t < self.d_s < self.d_max:
            raise ParameterError(
                "d_t must satisfy 0 < d_t < d_s < d_max, got "
                f"d_t={self.d_t}, d_s={self.d_s}, d_max={self.d_max}")
        if self.surface_margin <= 0:
            raise ParameterError(
                f"surface_margin must be positive, got {self.surface_margin}")
        if self.target is not None:
            t = np.asarray(self.target, dtype=float).reshape(-1)
            if t.size != 2:
                raise DimensionError(
                    f"target must have 2 entries, got {t.size}")
            object.__setattr__(self, "target", (float(t[0]), float(t[1])))


def normalize_graphs(a2u, a2a, n_auvs: int, steps: int):
    """Coerce graph selections into per-step lists and validate indices.

    ``a2u`` is one anchor index or a length-K sequence of them; ``a2a`` is
    one edge list or a length-K sequence of edge lists (an edge is an
    (i, j) pair of distinct 0-based vehicle indices, stored as i < j).
    """
    if np.isscalar(a2u):
        anchors = [int(a2u)] * steps
    else:
        anchors = [int(v) for v in a2u]
    if len(anchors) != steps:
        raise DimensionError(f"need {steps} anchor picks, got {len(anchors)}")
    for v in anchors:
        if not 0 <= v < n_auvs:
            raise DimensionError(f"anchor index {v} outside 0..{n_auvs - 1}")

    def one_edge_list(raw, k):
        edges = []
        for e in raw:
            i, j = (int(v) for v in e)
            if i == j or not (0 <= i < n_auvs and 0 <= j < n_auvs):
                raise DimensionError(f"bad edge ({i}, {j}) at step {k}")
            edge = (min(i, j), max(i, j))
            if edge in edges:
                raise DimensionError(f"duplicate edge {edge} at step {k}")
            edges.append(edge)
        return edges

    a2a = list(a2a)
    per_step = bool(a2a) and all(
        isinstance(item, (list, tuple)) and
        all(isinstance(e, (list, tuple)) and len(e) == 2 for e in item)
        for item in a2a)
    if not a2a:
        edge_lists = [[] for _ in range(steps)]
    elif per_step and len(a2a) == steps:
        edge_lists = [one_edge_list(item, k + 1) for k, item in enumerate(a2a)]
    else:
        shared = one_edge_list(a2a, 0)
        edge_lists = [list(shared) for _ in range(steps)]
    return anchors, edge_lists


def _as_param_list(params, n_auvs: int):
    if hasattr(params, "v_max"):
        return [params] * n_auvs
    params = list(params)
    if len(params) != n_auvs:
        raise DimensionError(f"need {n_auvs} parameter sets, got {len(params)}")
    return params


def _band_reference(sys: StackedSystem, x0: FloatArray, v_ref) -> FloatArray:
    """(K, N, 2) previous-step horizontal velocities for the band rows."""
    k_steps, n = sys.steps, sys.n_auvs
    if v_ref is None:
        held = np.stack([x0[auv_vel_slice(i)][:2] for i in range(n)])
        return np.broadcast_to(held, (k_steps, n, 2)).copy()
    if isinstance(v_ref, Trajectory):
        if v_ref.n_auvs != n or v_ref.steps != k_steps:
            raise DimensionError("band reference trajectory shape mismatch")
        out = np.empty((k_steps, n, 2))
        for i in range(n):
            out[:, i] = v_ref.auv_velocities(i)[:k_steps, :2]
        return out
    arr = np.asarray(v_ref, dtype=float)
    if arr.shape != (k_steps, n, 2):
        raise DimensionError(
            f"band reference must be ({k_steps}, {n}, 2), got {arr.shape}")
    return arr.copy()


class _HorizonAssembly:
    """Incremental builder of one horizon program on the stacked inputs.

    The decision vector is the stacked inputs; every norm-bounded affine
    3-vector t = W u + offset becomes a memoized block whose ball and
    half-space constraints are expressed directly on u.
    """

    def __init__(self, sys: StackedSystem, weights: PlanWeights, x0,
                 floor_profile, v_ref):
        self.sys = sys
        self.w = weights
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.size != sys.state_dim:
            raise DimensionError(
                f"initial state must have {sys.state_dim} entries, got {x0.size}")
        profile = np.asarray(floor_profile, dtype=float)
        if profile.shape != (sys.steps, sys.n_auvs):
            raise DimensionError(
                f"floor profile must be ({sys.steps}, {sys.n_auvs}), "
                f"got {profile.shape}")
        self.x0 = x0
        self.profile = profile
        self.v_band = _band_reference(sys, x0, v_ref)
        self.n_u = sys.steps * sys.input_dim
        self.free_states = (sys.A_powers @ x0).reshape(sys.steps, sys.state_dim)
        self.H_u = np.zeros((self.n_u, self.n_u))
        self.g_u = np.zeros(self.n_u)
        self.rows_u: list[FloatArray] = []
        self.rhs_u: list[float] = []
        self.blocks: list[tuple[FloatArray, FloatArray]] = []
        self.block_index: dict[tuple, int] = {}
        self.ball_list: list[tuple[int, float]] = []
        self.ball_seen: set[tuple[int, float]] = set()

    # -- norm-bounded quantities -------------------------------------------

    def state_block(self, k: int) -> tuple[FloatArray, FloatArray]:
        """Input-to-state rows and zero-input state of step k (1..K)."""
        return self.sys.B_lower[self.sys.state_rows(k)], self.free_states[k - 1]

    def block(self, key: tuple, rows3: FloatArray, k: int) -> int:
        """Block index for rows3 @ state[k], created on first use."""
        if key in self.block_index:
            return self.block_index[key]
        bk, free = self.state_block(k)
        self.block_index[key] = len(self.blocks)
        self.blocks.append((rows3 @ bk, rows3 @ free))
        return self.block_index[key]

    def add_ball(self, block_id: int, radius: float, label: str = "") -> None:
        w_mat, off = self.blocks[block_id]
        if float(np.abs(w_mat).max(initial=0.0)) == 0.0:
            # the bounded quantity is fixed by the initial state, so the
            # bound either already holds or cannot be enforced at all;
            # keeping an unenforceable row would only poison the program
            fixed = float(np.linalg.norm(off))
            if fixed > radius:
                warnings.warn(
                    f"dropping norm bound {radius:.6g}{label}: the bounded "
                    f"quantity is fixed at {fixed:.6g} by the initial state "
                    "and no input affects it", stacklevel=2)
            return
        if (block_id, radius) not in self.ball_seen:
            self.ball_seen.add((block_id, radius))
            self.ball_list.append((block_id, radius))

    def add_block_row(self, block_id: int, coef, rhs: float,
                      label: str = "") -> None:
        """Half-space coef . t <= rhs on block t, rewritten onto u."""
        coef = np.asarray(coef, dtype=float)
        w_mat, off = self.blocks[block_id]
        self.add_u_row(coef @ w_mat, rhs - float(coef @ off), label)

    def add_u_row(self, row: FloatArray, rhs: float, label: str = "") -> None:
        if float(np.abs(row).max(initial=0.0)) == 0.0:
            # same reasoning as in add_ball: fixed rows hold or get dropped
            if rhs < 0.0:
                warnings.warn(
                    f"dropping constraint{label}: its left side is fixed by "
                    f"the initial state and exceeds the bound by {-rhs:.6g}",
                    stacklevel=2)
            return
        self.rows_u.append(row)
        self.rhs_u.append(rhs)

    # -- objective terms --------------------------------------------------

    def add_energy(self) -> None:
        self.H_u[np.diag_indices(self.n_u)] += 2.0 * self.w.w1

    def add_depth_reward(self) -> None:
        if self.w.w2 == 0:
            return
        z_stack = np.tile(self.sys.depth_row(), (1, self.sys.steps))
        self.g_u += self.w.w2 * (z_stack @ self.sys.B_lower)[0]

    def add_destination(self) -> None:
        if self.w.target is None or self.w.w8_2 == 0:
            return
        bk, free = self.state_block(self.sys.steps)
        rows = self.sys.usv_position_rows()
        w_mat = rows @ bk
        r0 = rows @ free - np.array([*self.w.target, 0.0])
        self.H_u += 2.0 * self.w.w8_2 * (w_mat.T @ w_mat)
        self.g_u += 2.0 * self.w.w8_2 * (w_mat.T @ r0)

    # -- shared constraint families ----------------------------------------

    def add_surface_rows(self) -> None:
        for n in range(self.sys.n_auvs):
            zn = self.sys.depth_row(n)
            for k in range(1, self.sys.steps + 1):
                bk, free = self.state_block(k)
                self.add_u_row((zn @ bk)[0],
                               -self.w.surface_margin - float((zn @ free)[0]),
                               f" (surface, vehicle {n}, step {k})")

    def add_floor_rows(self) -> None:
        for n in range(self.sys.n_auvs):
            zn = self.sys.depth_row(n)
            for k in range(1, self.sys.steps + 1):
                bk, free = self.state_block(k)
                bound = self.profile[k - 1, n]
                self.add_u_row(-(zn @ bk)[0], float((zn @ free)[0]) - bound,
                               f" (floor, vehicle {n}, step {k})")

    def add_band_rows(self) -> None:
        """Velocity-band rows tying each step's horizontal velocity to the
        previous step's, so the admissible heading bends across the horizon;
        the reference trajectory only picks each component's sign branch.
        """
        for n, p in enumerate(self.sys.params):
            r2 = self.sys.velocity_rows(n)[:2]
            v0 = self.x0[auv_vel_slice(n)][:2]
            for k in range(1, self.sys.steps + 1):
                c_cur, c_prev, rhs = heading_rate_coupled_rows(
                    self.v_band[k - 1, n], p)
                bk, free = self.state_block(k)
                lhs = c_cur @ (r2 @ bk)
                shift = c_cur @ (r2 @ free)
                if k == 1:
                    shift = shift + c_prev @ v0
                else:
                    bp, fp = self.state_block(k - 1)
                    lhs = lhs + c_prev @ (r2 @ bp)
                    shift = shift + c_prev @ (r2 @ fp)
                for r in range(c_cur.shape[0]):
                    self.add_u_row(
                        lhs[r], float(rhs[r] - shift[r]),
                        f" (heading band, vehicle {n}, step {k})")

    def usv_delta(self, n: int, k: int) -> int:
        """Block for vehicle n's offset from the surface vehicle at k."""
        rows = self.sys.position_rows(n) - self.sys.usv_position_rows()
        return self.block(("usv", n, k), rows, k)

    def pair_delta(self, i: int, j: int, k: int) -> int:
        """Block for the offset between vehicles i and j at step k."""
        rows = self.sys.position_rows(i) - self.sys.position_rows(j)
        return self.block(("pair", i, j, k), rows, k)

    def add_range_balls(self) -> None:
        for n in range(self.sys.n_auvs):
            for k in range(1, self.sys.steps + 1):
                blk = self.usv_delta(n, k)
                radius = self.w.d_s if k == self.sys.steps else self.w.d_max
                self.add_ball(blk, radius)

    def add_speed_balls(self) -> None:
        for n, p in enumerate(self.sys.params):
            rows = self.sys.velocity_rows(n)
            for k in range(1, self.sys.steps + 1):
                self.add_ball(self.block(("vel", n, k), rows, k), p.v_max)

    # -- sonar ring constraints and spreading (reference-linearized) -------

    def _lower_ring(self, block_id: int, delta_ref: FloatArray, bound: float,
                    label: str) -> None:
        norm = float(np.linalg.norm(delta_ref))
        if norm < DEGENERATE_EDGE:
            warnings.warn(
                f"reference edge {label} shorter than {DEGENERATE_EDGE} m; "
                "dropping its lower ring bound", stacklevel=3)
            return
        self.add_block_row(block_id, -delta_ref / norm, -bound,
                           f" (ring lower bound, edge {label})")

    def add_anchor_rings(self, anchors, reference: Trajectory) -> None:
        for k in range(1, self.sys.steps + 1):
            n = anchors[k - 1]
            blk = self.usv_delta(n, k)
            self.add_ball(blk, self.w.d_s)
            usv = reference.usv_positions()[k]
            ref = reference.auv_positions(n)[k] - np.array([usv[0], usv[1], 0.0])
            self._lower_ring(blk, ref, self.w.d_s - self.w.d_t,
                             f"(usv, {n}) at step {k}")

    def add_pair_rings(self, edge_lists, reference: Trajectory,
                       edge_ranges) -> None:
        edge_ranges = edge_ranges or {}
        for k in range(1, self.sys.steps + 1):
            for i, j in edge_lists[k - 1]:
                blk = self.pair_delta(i, j, k)
                reach = edge_ranges.get((k, i, j), self.w.d_s)
                self.add_ball(blk, reach, f" on edge ({i}, {j}) at step {k}")
                ref = (reference.auv_positions(i)[k]
                       - reference.auv_positions(j)[k])
                # a range widened beyond the sonar radius (to admit a pair
                # still being pulled in) must not lift the sonar floor
                self._lower_ring(blk, ref, min(reach, self.w.d_s) - self.w.d_t,
                                 f"({i}, {j}) at step {k}")

    def add_spreading(self, edge_lists, reference: Trajectory) -> None:
        if self.w.w5 == 0:
            return
        for k in range(1, self.sys.steps + 1):
            linked = set(edge_lists[k - 1])
            for i in range(self.sys.n_auvs):
                for j in range(i + 1, self.sys.n_auvs):
                    if (i, j) in linked:
                        continue
                    rows = (self.sys.position_rows(i)
                            - self.sys.position_rows(j))
                    bk, _ = self.state_block(k)
                    ref = (reference.auv_positions(i)[k]
                           - reference.auv_positions(j)[k])
                    self.g_u += -2.0 * self.w.w5 * ((rows @ bk).T @ ref)

    # -- output -------------------------------------------------------------

    def build(self) -> ConvexProgram:
        a_in = (np.vstack(self.rows_u) if self.rows_u
                else np.zeros((0, self.n_u)))
        b_in = np.asarray(self.rhs_u, dtype=float)
        affine_balls = [(self.blocks[i][0], -self.blocks[i][1], radius)
                        for i, radius in self.ball_list]
        return ConvexProgram(self.H_u, self.g_u, A_in=a_in, b_in=b_in,
                             affine_balls=affine_balls)


def assemble_base_program(sys: StackedSystem, weights: PlanWeights, x0,
                          floor_profile, v_ref=None) -> ConvexProgram:
    """Graph-free horizon program: energy + depth reward + destination pull
    under surface, floor, heading-band, tether and speed constraints.

    ``floor_profile`` is the (K, N) array of lower depth bounds;
    ``v_ref`` fixes the heading-band linearization (None holds the initial
    velocities constant, the first-pass choice).
    """
    a = _HorizonAssembly(sys, weights, x0, floor_profile, v_ref)
    a.add_energy()
    a.add_depth_reward()
    a.add_destination()
    a.add_surface_rows()
    a.add_floor_rows()
    a.add_band_rows()
    a.add_range_balls()
    a.add_speed_balls()
    return a.build()


def assemble_ring_program(sys: StackedSystem, weights: PlanWeights, x0,
                          floor_profile, a2u, a2a, reference: Trajectory,
                          edge_ranges=None, v_ref=None) -> ConvexProgram:
    """Base program plus sonar rings on the selected links and the
    linearized spreading reward on unlinked pairs.

    ``a2u``/``a2a`` follow normalize_graphs; ``reference`` supplies the
    linearization points (lower ring directions, spreading gradients).
    ``edge_ranges`` optionally overrides the upper ring radius per
    (k, i, j); the lower bound follows a shrunk radius down by d_t but
    never rises above d_s - d_t when a radius is widened.
    """
    if not isinstance(reference, Trajectory):
        raise DimensionError("reference trajectory required")
    if reference.n_auvs != sys.n_auvs or reference.steps != sys.steps:
        raise DimensionError("reference trajectory shape mismatch")
    anchors, edge_lists = normalize_graphs(a2u, a2a, sys.n_auvs, sys.steps)
    a = _HorizonAssembly(sys, weights, x0, floor_profile, v_ref)
    a.add_energy()
    a.add_depth_reward()
    a.add_destination()
    a.add_surface_rows()
    a.add_floor_rows()
    a.add_band_rows()
    a.add_range_balls()
    a.add_speed_balls()
    a.add_anchor_rings(anchors, reference)
    a.add_pair_rings(edge_lists, reference, edge_ranges)
    a.add_spreading(edge_lists, reference)
    return a.build()


def inputs_from_solution(sys: StackedSystem, x) -> FloatArray:
    """Stacked input rows (K, input_dim) from a program solution vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n_u = sys.steps * sys.input_dim
    if x.size < n_u:
        raise DimensionError(
            f"solution has {x.size} entries, need at least {n_u}")
    return x[:n_u].reshape(sys.steps, sys.input_dim)


def floor_profile_at(sm: SeafloorMap, xy, margin: float = FLOOR_REFRESH_MARGIN):
    """Lower depth bounds floor + clearance + margin at (.., 2) positions."""
    xy = np.asarray(xy, dtype=float)
    depths = depth_at(sm, xy[..., 0], xy[..., 1])
    return np.asarray(depths) + sm.clearance + margin


@dataclass
class FloorIteration:
    """Result of the alternating solve / floor-refresh loop.

    ``profile`` is the (K, N) bound array used by the final solve;
    ``converged`` requires a stationary profile (or sub-threshold waypoint
    displacement), waypoint floor clearance, and a clean solver status.
    """

    trajectory: Trajectory
    profile: FloatArray
    rounds: int
    converged: bool
    displacement: float
    report: SolveReport


def _waypoint_xy(traj: Trajectory) -> FloatArray:
    out = np.empty((traj.steps, traj.n_auvs, 2))
    for n in range(traj.n_auvs):
        out[:, n] = traj.auv_positions(n)[1:, :2]
    return out


def _waypoints_clear(traj: Trajectory, sm: SeafloorMap) -> bool:
    return all(collision_free(sm, traj.auv_positions(n)[k])
               for n in range(traj.n_auvs)
               for k in range(1, traj.steps + 1))


def floor_profile_iterate(sys: StackedSystem, weights: PlanWeights, x0,
                          sm: SeafloorMap, v_ref=None, *,
                          threshold: float = 1.0, max_rounds: int = 8,
                          tol: float = 1e-6, max_iter: int = 20000,
                          backend: str | None = None) -> FloorIteration:
    """Alternate the base-program solve with floor-bound refresh.

    The floor bound under each vehicle is evaluated at the latest
    waypoints and the program re-solved until the bounds are stationary
    (or the waypoints move less than ``threshold`` meters in the
    horizontal) and every waypoint clears the floor; ``max_rounds`` caps
    the loop, returning the last iterate flagged unconverged. ``v_ref``
    seeds the first round's velocity-band sign branches; later rounds
    re-orient them from the previous round's solution.
    """
    if max_rounds < 1:
        raise ParameterError(f"max_rounds must be >= 1, got {max_rounds}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    start_xy = np.empty((sys.n_auvs, 2))
    for n in range(sys.n_auvs):
        start_xy[n] = x0[auv_pos_slice(n)][:2]
    profile = np.broadcast_to(floor_profile_at(sm, start_xy),
                              (sys.steps, sys.n_auvs)).copy()

    warm = None
    prev_xy = None
    traj = None
    report = None
    displacement = math.inf
    converged = False
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        program = assemble_base_program(sys, weights, x0, profile, v_ref)
        report = solve(program, tol=tol, max_iter=max_iter, x0=warm,
                       backend=backend)
        if report.status == "infeasible-detected":
            raise InfeasibleProgramError(
                f"floor iteration round {rounds}: {report.detail}")
        warm = report.x
        traj = rollout(sys, x0, inputs_from_solution(sys, report.x))
        xy = _waypoint_xy(traj)
        refreshed = floor_profile_at(sm, xy)
        profile_shift = float(np.max(np.abs(refreshed - profile)))
        if prev_xy is not None:
            displacement = float(
                np.max(np.linalg.norm(xy - prev_xy, axis=-1)))
        clear = _waypoints_clear(traj, sm)
        stationary = profile_shift <= 1e-12 or displacement < threshold
        if stationary and clear and report.status == "optimal":
            converged = True
            break
        prev_xy = xy
        profile = refreshed
        v_ref = traj
    return FloorIteration(traj, profile, rounds, converged, displacement,
                          report)


@dataclass(frozen=True)
class ObjectiveRecord:
    """Signed, weighted values of every objective term on one trajectory.

    Spreading (of1_5) and the start-displacement reward (of1_8) enter with
    their negative signs, so ``total`` is a plain sum. ``of1_8_2`` is the
    destination substitute (None without a target); ``of2`` is the reduced
    objective the solvers minimize: energy + depth + destination.
    """

    of1_1: float
    of1_2: float
    of1_3: float
    of1_4: float
    of1_5: float
    of1_6: float
    of1_7: float
    of1_8: float
    of1_8_2: float | None

    @property
    def total(self) -> float:
        return (self.of1_1 + self.of1_2 + self.of1_3 + self.of1_4
                + self.of1_5 + self.of1_6 + self.of1_7 + self.of1_8)

    @property
    def of2(self) -> float:
        return self.of1_1 + self.of1_2 + (self.of1_8_2 or 0.0)

    def as_dict(self) -> dict:
        return {
            "of1_1": self.of1_1, "of1_2": self.of1_2, "of1_3": self.of1_3,
            "of1_4": self.of1_4, "of1_5": self.of1_5, "of1_6": self.of1_6,
            "of1_7": self.of1_7, "of1_8": self.of1_8,
            "of1_8_2": self.of1_8_2, "total": self.total, "of2": self.of2,
        }


def evaluate_objectives(traj: Trajectory, a2u, a2a,
                        weights: PlanWeights) -> ObjectiveRecord:
    """Score a trajectory against every objective term literally.

    Reporting-only: absolute-value range terms and exact (not linearized)
    spreading are evaluated as written, never fed to a solver.
    """
    anchors, edge_lists = normalize_graphs(a2u, a2a, traj.n_auvs, traj.steps)
    w = weights
    usv3 = np.concatenate([traj.usv_positions(),
                           np.zeros((traj.steps + 1, 1))], axis=1)
    pos = [traj.auv_positions(n) for n in range(traj.n_auvs)]

    of1 = float(np.sum(traj.inputs ** 2)) * w.w1
    of2_depth = w.w2 * float(sum(pos[n][k, 2]
                                 for n in range(traj.n_auvs)
                                 for k in range(1, traj.steps + 1)))
    of3 = of4 = of5 = 0.0
    of6 = w.w6 * float(sum(len(e) for e in edge_lists))
    of7 = w.w7 * float(traj.steps)
    for k in range(1, traj.steps + 1):
        n = anchors[k - 1]
        of3 += w.w3 * abs(
            float(np.linalg.norm(pos[n][k] - usv3[k])) - w.d_s)
        linked = set(edge_lists[k - 1])
        for i, j in linked:
            of4 += w.w4 * abs(
                float(np.linalg.norm(pos[i][k] - pos[j][k])) - w.d_s)
        for i in range(traj.n_auvs):
            for j in range(i + 1, traj.n_auvs):
                if (i, j) not in linked:
                    of5 -= w.w5 * float(
                        np.sum((pos[i][k] - pos[j][k]) ** 2))
    of8 = -w.w8 * float(np.sum((usv3[-1] - usv3[0]) ** 2))
    of8_2 = None
    if w.target is not None:
        goal = np.array([*w.target, 0.0])
        of8_2 = w.w8_2 * float(np.sum((usv3[-1] - goal) ** 2))
    return ObjectiveRecord(of1, of2_depth, of3, of4, of5, of6, of7, of8,
                           of8_2)


@dataclass(frozen=True)
class CheckResult:
    """One validated constraint family: worst violation and its location."""

    passed: bool
    worst: float
    detail: str


@dataclass
class ValidationReport:
    """Per-constraint pass/fail table plus non-binding advisory notes."""

    checks: dict[str, CheckResult] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, c in self.checks.items() if not c.passed]


def _worst(records: list[tuple[float, str]]) -> tuple[float, str]:
    """Largest signed violation (negative values mean slack) and where."""
    if not records:
        return 0.0, "no rows"
    return max(records, key=lambda t: t[0])


def validate_constraints(traj: Trajectory, a2u, a2a, weights: PlanWeights,
                         sm: SeafloorMap, params, delta: float,
                         tol: float = 1e-3,
                         los_resolution: float | None = None
                         ) -> ValidationReport:
    """Check every constraint family on a finished plan.

    Pure reporting: each family gets a pass/fail verdict with its worst
    violation and location; nothing raises on a violated constraint.
    Midpoint floor grazes between waypoints are advisory notes only.
    """
    from .stacked import build_stacked

    n, k_steps = traj.n_auvs, traj.steps
    anchors, edge_lists = normalize_graphs(a2u, a2a, n, k_steps)
    params = _as_param_list(params, n)
    rep = ValidationReport()
    usv3 = np.concatenate([traj.usv_positions(),
                           np.zeros((k_steps + 1, 1))], axis=1)
    pos = [traj.auv_positions(i) for i in range(n)]
    vel = [traj.auv_velocities(i) for i in range(n)]

    sys = build_stacked(n, params, delta, max(k_steps, 2))
    resid = [(float(np.max(np.abs(
        traj.states[k + 1] - (sys.A @ traj.states[k] + sys.B @ traj.inputs[k])
    ))), f"k={k + 1}") for k in range(k_steps)]
    worst, where = _worst(resid)
    rep.checks["dynamics"] = CheckResult(worst <= tol, worst,
                                         f"max residual at {where}")

    rows = [(pos[i][k, 2] + weights.surface_margin, f"n={i} k={k}")
            for i in range(n) for k in range(1, k_steps + 1)]
    worst, where = _worst(rows)
    rep.checks["underwater"] = CheckResult(worst <= tol, worst,
                                           f"closest to surface at {where}")

    rows = [(float(np.linalg.norm(pos[i][k] - usv3[k])) - weights.d_max,
             f"n={i} k={k}") for i in range(n) for k in range(1, k_steps + 1)]
    worst, where = _worst(rows)
    rep.checks["usv_range"] = CheckResult(worst <= tol, worst,
                                          f"widest offset at {where}")

    rows = [(float(np.linalg.norm(pos[i][k] - usv3[k])) - weights.d_s,
             f"n={i} k={k}") for i in range(n) for k in (0, k_steps)]
    worst, where = _worst(rows)
    rep.checks["endpoint_range"] = CheckResult(worst <= tol, worst,
                                               f"widest endpoint at {where}")

    rows = [(float(np.linalg.norm(vel[i][k])) - params[i].v_max,
             f"n={i} k={k}") for i in range(n) for k in range(1, k_steps + 1)]
    worst, where = _worst(rows)
    rep.checks["speed"] = CheckResult(worst <= tol, worst,
                                      f"fastest at {where}")

    rep.checks["a2u_count"] = CheckResult(True, 0.0, "one anchor per step")

    rows = [(float(n - 1 - len(edge_lists[k - 1])), f"k={k}")
            for k in range(1, k_steps + 1)]
    worst, where = _worst(rows)
    rep.checks["a2a_count"] = CheckResult(
        worst <= 0, worst, f"largest edge shortfall at {where}")

    rows = []
    for i in range(n):
        for k in range(1, k_steps + 1):
            floor = depth_at(sm, pos[i][k, 0], pos[i][k, 1])
            rows.append((floor + sm.clearance - pos[i][k, 2], f"n={i} k={k}"))
    worst, where = _worst(rows)
    rep.checks["floor"] = CheckResult(worst <= tol, worst,
                                      f"closest to floor at {where}")

    blocked = []
    r = los_resolution if los_resolution is not None else 10.0
    for k in range(1, k_steps + 1):
        for i, j in edge_lists[k - 1]:
            if not los_clear(sm, pos[i][k], pos[j][k], r):
                blocked.append(f"({i},{j}) k={k}")
    rep.checks["los"] = CheckResult(
        not blocked, float(len(blocked)),
        "; ".join(blocked) if blocked else "all selected edges clear")

    rows = []
    skipped = 0
    for i, p in enumerate(params):
        for k in range(1, k_steps + 1):
            try:
                rate = heading_change(vel[i][k - 1], vel[i][k], delta)
            except UndefinedHeadingError:
                skipped += 1
                continue
            rows.append((abs(rate) - p.psi_rate_max, f"n={i} k={k}"))
    worst, where = _worst(rows)
    detail = f"fastest turn at {where}"
    if skipped:
        detail += f" ({skipped} zero-speed steps skipped)"
    rep.checks["heading_rate"] = CheckResult(worst <= tol, worst, detail)

    for i in range(n):
        for k in range(1, k_steps + 1):
            mid = 0.5 * (pos[i][k - 1] + pos[i][k])
            if not collision_free(sm, mid):
                rep.notes.append(
                    f"segment midpoint n={i} k={k - 1}->{k} grazes the floor")
    return rep
