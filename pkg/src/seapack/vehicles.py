"""Vehicle models.

Two layers live here. The full 6-DoF rigid-body model (rotation matrices,
Coriolis and drag terms) is the fidelity oracle and is only ever integrated
offline. The planner itself uses the linear discrete kinematic model: a
position/velocity pair per vehicle with a diagonal velocity-drag block,
plus heading recovery and the linear heading-rate band rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import (
    DimensionError,
    ParameterError,
    SingularOrientationError,
    UndefinedHeadingError,
)

FloatArray = npt.NDArray[np.float64]

#: Margin used to realize strict inequalities as closed rows.
STRICT_MARGIN = 1e-9


def _vec(x, n: int, name: str) -> FloatArray:
    a = np.asarray(x, dtype=float).reshape(-1)
    if a.size != n:
        raise DimensionError(f"{name} must have {n} entries, got {a.size}")
    return a


@dataclass(frozen=True)
class VehicleParams:
    """Physical parameters of one underwater vehicle.

    Drag and added-mass coefficients follow the usual sign convention where
    negative values mean dissipation. Velocity and heading-rate limits are
    planner-facing and config-overridable.
    """

    m: float = 30.0
    J: tuple[float, float, float] = (3.5, 3.5, 3.5)
    gamma_vdot: tuple[float, float, float] = (-1.0, -1.0, -1.0)
    gamma_v: tuple[float, float, float] = (-5.0, -5.0, -5.0)
    gamma_omega: tuple[float, float, float] = (-1.0, -1.0, -1.0)
    v_max: float = 2.5
    v_h_max: float = 2.0
    alpha: float = 0.2
    psi_rate_max: float = 0.1

    def __post_init__(self):
        if not self.m > 0:
            raise ParameterError(f"mass must be positive, got {self.m}")
        if len(self.J) != 3 or any(j <= 0 for j in self.J):
            raise ParameterError(f"inertias must be three positive values, got {self.J}")
        for g, lbl in ((self.gamma_vdot, "gamma_vdot"),
                       (self.gamma_v, "gamma_v"),
                       (self.gamma_omega, "gamma_omega")):
            if len(g) != 3:
                raise ParameterError(f"{lbl} must have three entries, got {g}")
        if self.m - self.gamma_vdot[0] <= 0 or self.m - self.gamma_vdot[2] <= 0:
            raise ParameterError("added mass leaves a non-positive effective mass")
        if not 0 < self.v_h_max <= self.v_max:
            raise ParameterError(
                f"need 0 < v_h_max <= v_max, got {self.v_h_max}, {self.v_max}")
        if self.alpha < 0:
            raise ParameterError(f"alpha must be non-negative, got {self.alpha}")
        if self.psi_rate_max <= 0:
            raise ParameterError(f"psi_rate_max must be positive, got {self.psi_rate_max}")

    @property
    def band_factor(self) -> float:
        """Relative per-step velocity band half-width alpha / v_h_max."""
        return self.alpha / self.v_h_max


@dataclass(frozen=True)
class FullState:
    """Pose eta = (x, y, z, phi, theta, psi) and body velocity nu."""

    eta: FloatArray
    nu: FloatArray

    def __post_init__(self):
        object.__setattr__(self, "eta", _vec(self.eta, 6, "eta"))
        object.__setattr__(self, "nu", _vec(self.nu, 6, "nu"))

    def as_vector(self) -> FloatArray:
        return np.concatenate([self.eta, self.nu])

    @staticmethod
    def from_vector(y) -> "FullState":
        y = _vec(y, 12, "state vector")
        return FullState(y[:6], y[6:])


@dataclass(frozen=True)
class LinearState:
    """Planner-model state: global position P and global velocity V."""

    P: FloatArray
    V: FloatArray

    def __post_init__(self):
        object.__setattr__(self, "P", _vec(self.P, 3, "P"))
        object.__setattr__(self, "V", _vec(self.V, 3, "V"))


@dataclass(frozen=True)
class UsvState:
    """Surface-vehicle state: 2D position P and velocity input U."""

    P: FloatArray
    U: FloatArray

    def __post_init__(self):
        object.__setattr__(self, "P", _vec(self.P, 2, "P"))
        object.__setattr__(self, "U", _vec(self.U, 2, "U"))


def rotation_and_transform_matrices(phi: float, theta: float, psi: float):
    """Rotation matrices about each axis plus the pose transforms.

    Returns (R_x, R_y, R_z, J1, J2) where J1 = R_z R_y R_x rotates body
    linear velocity into the global frame and J2 maps body angular rates
    to Euler-angle rates.

    Raises SingularOrientationError near theta = +-pi/2 where J2 blows up.
    """
    cphi, sphi = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cpsi, spsi = math.cos(psi), math.sin(psi)

    r_x = np.array([[1.0, 0.0, 0.0],
                    [0.0, cphi, -sphi],
                    [0.0, sphi, cphi]])
    r_y = np.array([[cth, 0.0, sth],
                    [0.0, 1.0, 0.0],
                    [-sth, 0.0, cth]])
    r_z = np.array([[cpsi, -spsi, 0.0],
                    [spsi, cpsi, 0.0],
                    [0.0, 0.0, 1.0]])
    j1 = r_z @ r_y @ r_x

    if abs(cth) < 1e-9:
        raise SingularOrientationError(
            f"J2 undefined at pitch {theta} (cos theta = {cth:.2e})")
    tth = sth / cth
    j2 = np.array([[1.0, sphi * tth, cphi * tth],
                   [0.0, cphi, -sphi],
                   [0.0, sphi / cth, cphi / cth]])
    return r_x, r_y, r_z, j1, j2


def _inertia_matrix(p: VehicleParams) -> FloatArray:
    gvd = p.gamma_vdot
    return np.diag([p.m - gvd[0], p.m - gvd[1], p.m - gvd[2], *p.J])


def _drag_matrix(p: VehicleParams) -> FloatArray:
    return -np.diag([*p.gamma_v, *p.gamma_omega])


def _coriolis_matrix(nu: FloatArray, p: VehicleParams) -> FloatArray:
    """Rigid-body plus added-mass Coriolis matrix C(nu) = C_R(nu) + C_A(nu)."""
    vx, vy, vz, wx, wy, wz = nu
    jx, jy, jz = p.J
    gvd = p.gamma_vdot
    gom = p.gamma_omega

    def cross_block(ax, ay, az):
        return np.array([[0.0, az, -ay],
                         [-az, 0.0, ax],
                         [ay, -ax, 0.0]])

    c_r1 = p.m * cross_block(vx, vy, vz)
    c_r2 = p.m * cross_block(jx * wx, jy * wy, jz * wz)
    c_a1 = cross_block(gvd[0] * vx, gvd[1] * vy, gvd[2] * vz)
    c_a2 = cross_block(gom[0] * wx, gom[1] * wy, gom[2] * wz)

    c = np.zeros((6, 6))
    c[:3, 3:] = c_r1 + c_a1
    c[3:, :3] = c_r1 + c_a1
    c[3:, 3:] = c_r2 + c_a2
    return c


def full_dynamics_derivative(s: FullState, u, d, p: VehicleParams,
                             gravity=None, coriolis: bool = True) -> FloatArray:
    """Time derivative of the 12-dimensional full state.

    eta_dot comes from the pose transforms; nu_dot from the rigid-body
    force balance with per-mass inputs u, disturbance d and a constant
    gravity/buoyancy vector (default zero). Set coriolis=False to drop
    C(nu), which makes the drag-only energy decay exact.
    """
    u = _vec(u, 6, "u")
    d = _vec(d, 6, "d")
    g = np.zeros(6) if gravity is None else _vec(gravity, 6, "gravity")
    phi, theta, psi = s.eta[3:]
    *_, j1, j2 = rotation_and_transform_matrices(phi, theta, psi)

    eta_dot = np.concatenate([j1 @ s.nu[:3], j2 @ s.nu[3:]])
    forces = _drag_matrix(p) @ s.nu
    if coriolis:
        forces = forces + _coriolis_matrix(s.nu, p) @ s.nu
    nu_dot = -np.linalg.solve(_inertia_matrix(p), forces) - g + u + d
    return np.concatenate([eta_dot, nu_dot])


def full_dynamics_step(s: FullState, u, d, p: VehicleParams, h: float = 1.0,
                       gravity=None, coriolis: bool = True) -> FullState:
    """One classical RK4 step of the full dynamics (validation only)."""
    if h == 0:
        raise ParameterError("step size must be nonzero")

    def f(y):
        return full_dynamics_derivative(FullState.from_vector(y), u, d, p,
                                        gravity=gravity, coriolis=coriolis)

    y0 = s.as_vector()
    k1 = f(y0)
    k2 = f(y0 + 0.5 * h * k1)
    k3 = f(y0 + 0.5 * h * k2)
    k4 = f(y0 + h * k3)
    return FullState.from_vector(y0 + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))


def drag_matrix_E(p: VehicleParams) -> FloatArray:
    """Reduced-model drag rates diag(gv_x/(m-gvd_x), gv_z/(m-gvd_z), gw_z/J_z)."""
    den_x = p.m - p.gamma_vdot[0]
    den_z = p.m - p.gamma_vdot[2]
    if den_x <= 0 or den_z <= 0 or p.J[2] <= 0:
        raise ParameterError("drag-rate denominators must be positive")
    return np.diag([p.gamma_v[0] / den_x,
                    p.gamma_v[2] / den_z,
                    p.gamma_omega[2] / p.J[2]])


def planner_drag_block(p: VehicleParams) -> FloatArray:
    """3x3 velocity-drag block of the discrete model.

    The first drag rate applies to both horizontal components (horizontal
    drag is isotropic after the surge/heading substitution) and the second
    to the vertical one. Magnitudes are used so the velocity map contracts
    under either sign convention for the drag coefficients.
    """
    e = drag_matrix_E(p)
    return np.diag([abs(e[0, 0]), abs(e[0, 0]), abs(e[1, 1])])


def discrete_step(x: LinearState, u, p: VehicleParams, delta: float,
                  noise=None) -> LinearState:
    """One step of the linear discrete model used by the planner.

    P advances by the current velocity (plus optional drift noise); the
    velocity decays through the drag block and then takes the input.
    """
    if delta <= 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    u = _vec(u, 3, "u")
    w = np.zeros(3) if noise is None else _vec(noise, 3, "noise")
    e = planner_drag_block(p)
    p_next = x.P + delta * x.V + w
    v_next = (np.eye(3) - delta * e) @ x.V + u
    return LinearState(p_next, v_next)


def recover_heading_surge(v) -> tuple[float, float]:
    """Surge speed and heading (v_x, psi) of a horizontal velocity.

    Accepts a 2- or 3-vector; the vertical component is ignored. Raises
    UndefinedHeadingError when the horizontal part is exactly zero.
    """
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.size not in (2, 3):
        raise DimensionError(f"velocity must have 2 or 3 entries, got {a.size}")
    if a[0] == 0.0 and a[1] == 0.0:
        raise UndefinedHeadingError("heading undefined at zero horizontal speed")
    return math.hypot(a[0], a[1]), math.atan2(a[1], a[0])


def wrap_angle(d: float) -> float:
    """Wrap an angle difference into (-pi, pi]."""
    return math.pi - (math.pi - d) % (2.0 * math.pi)


def heading_change(v_prev, v_cur, delta: float) -> float:
    """Heading rate between two successive velocities, in (-pi/delta, pi/delta]."""
    if delta <= 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    _, psi_prev = recover_heading_surge(v_prev)
    _, psi_cur = recover_heading_surge(v_cur)
    return wrap_angle(psi_cur - psi_prev) / delta


def band_margin(a: float, v_ref_component: float) -> float:
    """Margin that keeps the band rows strictly inside the open band.

    Clipped to half the band width so tiny reference components never
    produce an empty row pair; a zero reference pins the component.
    """
    return min(STRICT_MARGIN, 0.5 * a * abs(v_ref_component))

def heading_band_bounds(v_ref_prev, p: VehicleParams) -> tuple[FloatArray, FloatArray]:
    """Closed per-component bounds (lo, hi) on V[k] given the previous velocity.

    The band scales each component by factors in [1 - a, 1 + a] with
    a = alpha / v_h_max, preserving its sign; the branch with the matching
    sign is selected from the reference.
    """
    v = _vec(v_ref_prev, 2, "v_ref_prev")
    a = p.band_factor
    lo = np.empty(2)
    hi = np.empty(2)
    for c in range(2):
        ends = ((1.0 + a) * v[c], (1.0 - a) * v[c])
        m = band_margin(a, v[c])
        lo[c] = min(ends) + m
        hi[c] = max(ends) - m
    return lo, hi


def heading_rate_linear_constraints(v_ref_prev, p: VehicleParams,
                                    delta: float) -> tuple[FloatArray, FloatArray]:
    """Linear rows C v <= d bounding V[k] = (V_x, V_y) around the previous velocity.

    Four rows: upper and lower band edge per horizontal component, with the
    previous velocity folded into the right-hand side. The rows realize the
    per-step relative velocity band that in turn bounds the heading rate.
    """
    if delta <= 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    lo, hi = heading_band_bounds(v_ref_prev, p)
    rows = np.array([[1.0, 0.0],
                     [-1.0, 0.0],
                     [0.0, 1.0],
                     [0.0, -1.0]])
    rhs = np.array([hi[0], -lo[0], hi[1], -lo[1]])
    return rows, rhs


def heading_rate_coupled_rows(v_ref_prev, p: VehicleParams
                              ) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Band rows c_cur . V[k] + c_prev . V[k-1] <= d with both steps free.

    Componentwise multiplicative band: on the sign branch the reference
    selects, V_c[k] stays within [(1 - a), (1 + a)] times V_c[k-1] with
    a = alpha / v_h_max. Both velocities remain decision variables; the
    reference only orients the band, so the admissible heading bends
    step over step instead of being boxed around one fixed velocity.
    A zero reference component pins V_c[k] to zero. Evaluated at
    V[k-1] = v_ref_prev the rows reduce exactly to
    heading_rate_linear_constraints.
    """
    v = _vec(v_ref_prev, 2, "v_ref_prev")
    a = p.band_factor
    c_cur = np.zeros((4, 2))
    c_prev = np.zeros((4, 2))
    rhs = np.zeros(4)
    for c in range(2):
        up, dn = 2 * c, 2 * c + 1
        if v[c] == 0.0:
            c_cur[up, c] = 1.0
            c_cur[dn, c] = -1.0
            continue
        s = 1.0 if v[c] > 0.0 else -1.0
        m = band_margin(a, v[c])
        c_cur[up, c] = s
        c_prev[up, c] = -s * (1.0 + a)
        rhs[up] = -m
        c_cur[dn, c] = -s
        c_prev[dn, c] = s * (1.0 - a)
        rhs[dn] = -m
    return c_cur, c_prev, rhs


def usv_step(s: UsvState, delta: float) -> UsvState:
    """Advance the surface vehicle by its velocity input."""
    if delta <= 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    return UsvState(s.P + delta * s.U, s.U)
