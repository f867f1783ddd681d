"""Self-contained convex quadratic solver.

Minimizes 0.5 x'Hx + g'x over linear equalities, linear inequalities
(A_in x <= b_in) and Euclidean balls on designated subvectors. The method
is operator splitting: a proximal quadratic step against a factored
regularized KKT system alternates with closed-form projections onto the
constraint sets, coupled through scaled dual variables. Problem data is
equilibrated before iterating and the step weighting adapts to the
primal/dual residual ratio.

The per-iteration inner loop is provided by a compiled kernel when the
extension is available, with a numpy fallback selected at import time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import scipy.linalg as sla

from .errors import DimensionError, ParameterError

FloatArray = npt.NDArray[np.float64]

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 20_000

_CHECK_INTERVAL = 25
_ADAPT_INTERVAL = 100
_MAX_REFACTOR = 30
_RHO_EQ_FACTOR = 1e3
_RHO_MIN, _RHO_MAX = 1e-6, 1e6
_SIGMA = 1e-6
_EPS_INFEAS = 1e-6
_INFEAS_STREAK = 2
# polish attempts start here and space out geometrically; each one guesses
# the active set from the current iterate and Newton-solves the reduced KKT
_POLISH_FIRST = 200
_POLISH_SPACING = 2.0
_POLISH_NEWTON_ITERS = 25
_POLISH_SET_ROUNDS = 40
_POLISH_ROW_BATCH = 32
_POLISH_BALL_BATCH = 8


@dataclass
class ConvexProgram:
    """Quadratic objective with equality, inequality and ball constraints.

    balls is a sequence of (indices, center, radius) triples constraining
    ``norm(x[indices] - center) <= radius``. affine_balls generalizes this
    to (A, center, radius) triples constraining ``norm(A @ x - center) <=
    radius``; passing affine rows directly keeps the decision vector small
    when the bounded quantity is a linear image of x rather than a slice.
    """

    H: FloatArray
    g: FloatArray
    A_eq: FloatArray | None = None
    b_eq: FloatArray | None = None
    A_in: FloatArray | None = None
    b_in: FloatArray | None = None
    balls: list = field(default_factory=list)
    affine_balls: list = field(default_factory=list)

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        n = self.g.size
        if self.H.shape != (n, n):
            raise DimensionError(f"H must be {n}x{n}, got {self.H.shape}")
        if self.A_eq is None:
            self.A_eq = np.zeros((0, n))
            self.b_eq = np.zeros(0)
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        if self.A_in is None:
            self.A_in = np.zeros((0, n))
            self.b_in = np.zeros(0)
        self.A_in = np.asarray(self.A_in, dtype=float).reshape(-1, n)
        self.b_in = np.asarray(self.b_in, dtype=float).reshape(-1)
        self.balls = [(np.asarray(idx, dtype=np.int64).reshape(-1),
                       np.asarray(c, dtype=float).reshape(-1),
                       float(r))
                      for idx, c, r in self.balls]
        self.affine_balls = [(np.asarray(A, dtype=float).reshape(-1, n),
                              np.asarray(c, dtype=float).reshape(-1),
                              float(r))
                             for A, c, r in self.affine_balls]

    @property
    def n(self) -> int:
        return self.g.size

    def validate(self) -> None:
        n = self.n
        if np.abs(self.H - self.H.T).max(initial=0.0) > 1e-10:
            raise ParameterError("H must be symmetric to 1e-10")
        if self.A_eq.shape[0] != self.b_eq.size:
            raise DimensionError("A_eq/b_eq row mismatch")
        if self.A_in.shape[0] != self.b_in.size:
            raise DimensionError("A_in/b_in row mismatch")
        for idx, c, r in self.balls:
            if r <= 0:
                raise ParameterError(f"ball radius must be positive, got {r}")
            if idx.size != c.size:
                raise DimensionError("ball index/center size mismatch")
            if idx.size == 0 or idx.min() < 0 or idx.max() >= n:
                raise DimensionError("ball indices out of range")
        for A, c, r in self.affine_balls:
            if r <= 0:
                raise ParameterError(f"ball radius must be positive, got {r}")
            if A.shape[0] != c.size:
                raise DimensionError("affine ball matrix/center row mismatch")
            if A.shape[0] == 0:
                raise DimensionError("affine ball needs at least one row")

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.g @ x)


@dataclass
class SolveReport:
    """Outcome of one solve call.

    merit_log holds one value per iteration: the weighted displacement of
    the splitting iterates, spliced onto a common scale across step-weight
    changes so the whole log is nonincreasing (up to floating-point noise
    once the displacement reaches machine granularity). merit_resets lists
    the iteration counts at which the step weights were re-tuned.
    """

    x: FloatArray
    status: str
    primal_residual: float
    dual_residual: float
    iterations: int
    objective: float = math.nan
    detail: str = ""
    merit_log: FloatArray = field(default_factory=lambda: np.zeros(0))
    merit_resets: list = field(default_factory=list)


def project_ball(v, center, radius: float) -> FloatArray:
    """Euclidean projection onto a ball; interior points pass through."""
    if radius <= 0:
        raise ParameterError(f"radius must be positive, got {radius}")
    v = np.asarray(v, dtype=float)
    center = np.asarray(center, dtype=float)
    d = v - center
    nrm = float(np.sqrt(d @ d))
    if nrm <= radius:
        return v.copy()
    return center + d * (radius / nrm)


class _Work:
    """Scaled problem data and iteration state shared by the backends.

    The stacked constraint matrix and the Hessian are kept dense: the
    programs this engine serves condense a whole planning horizon into the
    input vector, which makes their rows dense, so a dense LAPACK
    factorization beats sparse machinery here.
    """

    def __init__(self):
        self.n = self.m = self.me = self.mi = 0
        self.K = None            # scaled dense constraint matrix (m, n)
        self.P = None            # scaled dense Hessian (n, n)
        self.q = None
        self.sigma = _SIGMA
        self.rho = None
        self.b_eq = None
        self.b_in = None
        # flat ball layout (scaled): block row starts, sizes, centers, radii
        self.ball_start = None
        self.ball_size = None
        self.ball_center = None
        self.ball_radius = None
        self.ball_groups = []    # [(rows (g,s), centers (g,s), radii (g,))]
        self.x = self.z = self.u = None
        self.lu = None
        self.compiled = None     # lazy per-factor data for the compiled path

    def factor(self) -> None:
        kkt = self.P + self.sigma * np.eye(self.n)
        if self.m:
            kkt = kkt + (self.K * self.rho[:, None]).T @ self.K
        self.lu = sla.lu_factor(kkt, check_finite=False)
        self.compiled = None


def _project_sets(work: _Work, w: FloatArray) -> FloatArray:
    """Projection of a stacked row vector onto the constraint sets."""
    out = w.copy()
    me, mi = work.me, work.mi
    if me:
        out[:me] = work.b_eq
    if mi:
        np.minimum(w[me:me + mi], work.b_in, out=out[me:me + mi])
    for rows, centers, radii in work.ball_groups:
        vals = w[rows]
        d = vals - centers
        nsq = d[:, 0] * d[:, 0]
        for j in range(1, d.shape[1]):
            nsq = nsq + d[:, j] * d[:, j]
        nrm = np.sqrt(nsq)
        outside = nrm > radii
        scale = np.where(outside, radii / np.where(nrm > 0, nrm, 1.0), 1.0)
        proj = np.where(outside[:, None], centers + d * scale[:, None], vals)
        out[rows] = proj
    return out


def _iterate_pure(work: _Work, n_iter: int) -> FloatArray:
    """Reference inner loop in numpy; one merit value per iteration."""
    merit = np.empty(n_iter)
    K, lu = work.K, work.lu
    sigma, rho, q = work.sigma, work.rho, work.q
    x, z, u = work.x, work.z, work.u
    for i in range(n_iter):
        rhs = sigma * x - q + K.T @ (rho * (z - u))
        x_new = sla.lu_solve(lu, rhs, check_finite=False)
        w = K @ x_new + u
        z_new = _project_sets(work, w)
        u_new = w - z_new
        dv = (z_new + u_new) - (z + u)
        dx = x_new - x
        merit[i] = math.sqrt(sigma * float(dx @ dx) + float((rho * dv) @ dv))
        x, z, u = x_new, z_new, u_new
    work.x, work.z, work.u = x, z, u
    return merit


def _make_compiled_data(work: _Work) -> dict:
    """Lay out the factorization and problem data for the kernel.

    The LU factor goes over in Fortran order with one-based pivots so the
    kernel can call the LAPACK solve directly; the constraint matrix goes
    over C-contiguous and is read through its transposed Fortran view.
    """
    lu, piv = work.lu
    return {
        "lu": np.asfortranarray(lu),
        "piv": (piv.astype(np.int32) + 1),
        "K": np.ascontiguousarray(work.K),
    }


def _iterate_compiled(work: _Work, n_iter: int) -> FloatArray:
    """Inner loop via the compiled kernel; one merit value per iteration."""
    from . import _kernels

    if work.compiled is None:
        work.compiled = _make_compiled_data(work)
    c = work.compiled
    merit = np.empty(n_iter)
    _kernels.run_iterations(
        n_iter, work.n, work.m, work.me, work.mi,
        c["K"], c["lu"], c["piv"],
        work.sigma, work.rho, work.q, work.b_eq, work.b_in,
        work.ball_start, work.ball_size, work.ball_center, work.ball_radius,
        work.x, work.z, work.u, merit)
    return merit


def _build_work(p: ConvexProgram) -> tuple[_Work, dict]:
    """Assemble the stacked constraint matrix, equilibrate, and scale."""
    n = p.n
    me = p.A_eq.shape[0]
    mi = p.A_in.shape[0]
    # index balls become selection rows; affine balls contribute their own
    # rows; past this point both kinds share one (center, radius) layout
    ball_mats = []
    ball_sets = []
    for idx, cen, r in p.balls:
        sel = np.zeros((idx.size, n))
        sel[np.arange(idx.size), idx] = 1.0
        ball_mats.append(sel)
        ball_sets.append((cen, r))
    for A_blk, cen, r in p.affine_balls:
        ball_mats.append(A_blk)
        ball_sets.append((cen, r))
    sizes = [mat.shape[0] for mat in ball_mats]
    mb = int(sum(sizes))
    m = me + mi + mb

    rows_b = np.vstack(ball_mats) if mb else np.zeros((0, n))
    K = np.vstack([p.A_eq, p.A_in, rows_b])
    P_cur = 0.5 * (p.H + p.H.T)
    q = p.g.copy()

    # block layout of the ball rows
    ball_start = np.zeros(len(sizes), dtype=np.int64)
    off = me + mi
    for b, s in enumerate(sizes):
        ball_start[b] = off
        off += s

    # Ruiz equilibration on [[P, K'], [K, 0]]; ball row blocks share one factor
    d = np.ones(n)
    e = np.ones(m)
    for _ in range(10):
        col = np.abs(P_cur).max(axis=0)
        if m:
            col = np.maximum(col, np.abs(K).max(axis=0))
        row = np.abs(K).max(axis=1) if m else np.zeros(0)
        # uniform scaling inside each ball block keeps the set a ball;
        # rows with no live entries (input-independent components) are
        # left out of the block factor and simply inherit it
        for b, s in enumerate(sizes):
            blk = slice(ball_start[b], ball_start[b] + s)
            r = row[blk]
            live = r[r > 1e-12]
            row[blk] = (math.exp(float(np.mean(np.log(live))))
                        if live.size else 0.0)
        dd = 1.0 / np.sqrt(np.maximum(col, 1e-12))
        ee = 1.0 / np.sqrt(np.maximum(row, 1e-12))
        dd[col < 1e-12] = 1.0
        ee[row < 1e-12] = 1.0
        d *= dd
        e *= ee
        P_cur = dd[:, None] * P_cur * dd[None, :]
        K = ee[:, None] * K * dd[None, :]
    P_s = P_cur
    q_s = d * q
    denom = max(float(np.abs(P_s).max(axis=0).mean()) if n else 0.0,
                float(np.abs(q_s).max(initial=0.0)))
    c = 1.0 / denom if denom > 1e-12 else 1.0
    c = min(max(c, 1e-6), 1e6)
    P_s = c * P_s
    q_s = c * q_s

    work = _Work()
    work.n, work.m, work.me, work.mi = n, m, me, mi
    work.K = np.ascontiguousarray(K)
    work.P = P_s
    work.q = q_s
    work.b_eq = e[:me] * p.b_eq
    work.b_in = e[me:me + mi] * p.b_in
    work.ball_start = ball_start
    work.ball_size = np.asarray(sizes, dtype=np.int64)
    centers = []
    radii = []
    for b, (cen, r) in enumerate(ball_sets):
        blk = e[ball_start[b]]
        centers.append(blk * cen)
        radii.append(blk * r)
    work.ball_center = (np.concatenate(centers) if centers else np.zeros(0))
    work.ball_radius = np.asarray(radii, dtype=float)

    flat_off = np.concatenate([[0], np.cumsum(work.ball_size)])[:-1]
    groups = {}
    for b, s in enumerate(sizes):
        groups.setdefault(s, []).append(b)
    work.ball_groups = []
    for s in sorted(groups):
        bs = groups[s]
        rows_mat = np.array([np.arange(ball_start[b], ball_start[b] + s)
                             for b in bs], dtype=np.int64)
        cen = np.array([work.ball_center[flat_off[b]:flat_off[b] + s]
                        for b in bs])
        rad = np.array([work.ball_radius[b] for b in bs])
        work.ball_groups.append((rows_mat, cen, rad))

    rho = np.full(m, 0.1)
    rho[:me] *= _RHO_EQ_FACTOR
    work.rho = rho
    scaling = {"d": d, "e": e, "c": c, "ball_mats": ball_mats,
               "ball_sets": ball_sets, "ball_sizes": sizes}
    return work, scaling


def _unscaled_residuals(p: ConvexProgram, work: _Work, scaling: dict):
    """Primal/dual residuals and their scale factors in original units."""
    d, e, c = scaling["d"], scaling["e"], scaling["c"]
    x_u = d * work.x
    kx_u = (work.K @ work.x) / e if work.m else np.zeros(0)
    z_u = work.z / e if work.m else np.zeros(0)
    rp = float(np.abs(kx_u - z_u).max(initial=0.0))
    # per-coordinate gaps understate a ball block's Euclidean excess by up
    # to sqrt(block size), so fold in each ball's true distance to its set
    off = work.me + work.mi
    for (cen, rad), s in zip(scaling["ball_sets"], scaling["ball_sizes"]):
        dvec = kx_u[off:off + s] - cen
        rp = max(rp, float(np.sqrt(dvec @ dvec)) - rad)
        off += s
    scale_p = max(float(np.abs(kx_u).max(initial=0.0)),
                  float(np.abs(z_u).max(initial=0.0)))
    y_s = work.rho * work.u if work.m else np.zeros(0)
    px_u = p.H @ x_u
    kty_u = (work.K.T @ y_s) / d / c if work.m else np.zeros(p.n)
    rd = float(np.abs(px_u + p.g + kty_u).max(initial=0.0))
    scale_d = max(float(np.abs(px_u).max(initial=0.0)),
                  float(np.abs(kty_u).max(initial=0.0)),
                  float(np.abs(p.g).max(initial=0.0)))
    return rp, rd, scale_p, scale_d, x_u


def _kkt_error(p: ConvexProgram, scaling: dict, x: FloatArray,
               lam_eq: FloatArray, lam_in: FloatArray,
               mu: FloatArray) -> tuple[float, float]:
    """Stationarity and feasibility residuals of a candidate KKT point.

    Ball multipliers are for the squared form 0.5*(|A x - c|^2 - r^2) <= 0,
    whose gradient is A' (A x - c).
    """
    mats, sets_ = scaling["ball_mats"], scaling["ball_sets"]
    grad = p.H @ x + p.g
    if lam_eq.size:
        grad = grad + p.A_eq.T @ lam_eq
    if lam_in.size:
        grad = grad + p.A_in.T @ lam_in
    feas = 0.0
    if p.b_eq.size:
        feas = float(np.abs(p.A_eq @ x - p.b_eq).max())
    if p.b_in.size:
        feas = max(feas, float((p.A_in @ x - p.b_in).max()))
    for b, (A_blk, (cen, rad)) in enumerate(zip(mats, sets_)):
        v = A_blk @ x - cen
        feas = max(feas, float(np.sqrt(v @ v)) - rad)
        if mu[b] != 0.0:
            grad = grad + mu[b] * (A_blk.T @ v)
    return float(np.abs(grad).max(initial=0.0)), feas


def _polish(p: ConvexProgram, work: _Work, scaling: dict,
            tol: float):
    """Active-set Newton refinement of the current iterate.

    Guesses the active constraints from primal slacks and dual magnitudes,
    then alternates two corrections around an equality-constrained Newton
    solve (quadratic equations for active balls): first pull violated
    constraints into the set in capped batches until the refined point is
    feasible, then release constraints whose multipliers come out negative.
    Growing before dropping matters: while the set is missing constraints
    the multiplier signs are unreliable, and dropping on them first can
    dismantle a mostly-correct guess. Returns (x, stationarity,
    feasibility) only when the refined point passes the full KKT
    conditions at tolerance; None means no usable refinement.
    """
    d, e, c = scaling["d"], scaling["e"], scaling["c"]
    mats, sets_ = scaling["ball_mats"], scaling["ball_sets"]
    me, mi = p.A_eq.shape[0], p.A_in.shape[0]
    nb = len(mats)
    n = p.n
    x = d * work.x
    y = e * (work.rho * work.u) / c if work.m else np.zeros(0)

    slack_in = p.b_in - p.A_in @ x if mi else np.zeros(0)
    y_in = y[me:me + mi]
    in_scale = 1.0 + np.abs(p.b_in) if mi else np.zeros(0)
    act_in = set(np.nonzero((slack_in <= 1e-4 * in_scale)
                            | (y_in >= 1e-6))[0].tolist()) if mi else set()
    act_ball = set()
    mu_guess = np.zeros(nb)
    off = me + mi
    for b, (A_blk, (cen, rad)) in enumerate(zip(mats, sets_)):
        s = A_blk.shape[0]
        v = A_blk @ x - cen
        nv = float(np.sqrt(v @ v))
        mu_y = float(np.linalg.norm(y[off:off + s]))
        if nv >= rad - 1e-4 * (1.0 + rad) or mu_y >= 1e-6:
            act_ball.add(b)
            mu_guess[b] = mu_y / rad
        off += s

    g_scale = 1.0 + float(np.abs(p.g).max(initial=0.0))
    for _ in range(_POLISH_SET_ROUNDS):
        rows_in = sorted(act_in)
        balls_act = sorted(act_ball)
        E = np.vstack([p.A_eq, p.A_in[rows_in]])
        h = np.concatenate([p.b_eq, p.b_in[rows_in]])
        ma, mb = E.shape[0], len(balls_act)

        xx = x.copy()
        lam = np.concatenate([y[:me], np.maximum(y_in[rows_in], 0.0)])
        mu = np.array([max(mu_guess[b], 0.0) for b in balls_act])
        ok = False
        for _ in range(_POLISH_NEWTON_ITERS):
            W = np.empty((n, mb))
            r3 = np.empty(mb)
            J11 = p.H.copy()
            for col, b in enumerate(balls_act):
                A_blk, (cen, rad) = mats[b], sets_[b]
                v = A_blk @ xx - cen
                W[:, col] = A_blk.T @ v
                r3[col] = 0.5 * (float(v @ v) - rad * rad)
                J11 += mu[col] * (A_blk.T @ A_blk)
            r1 = p.H @ xx + p.g + (E.T @ lam if ma else 0.0) \
                + (W @ mu if mb else 0.0)
            r2 = E @ xx - h
            res = max(float(np.abs(r1).max(initial=0.0)),
                      float(np.abs(r2).max(initial=0.0)),
                      float(np.abs(r3).max(initial=0.0)))
            if res <= 1e-10 * g_scale:
                ok = True
                break
            nd = n + ma + mb
            J = np.zeros((nd, nd))
            J[:n, :n] = J11
            if ma:
                J[:n, n:n + ma] = E.T
                J[n:n + ma, :n] = E
            if mb:
                J[:n, n + ma:] = W
                J[n + ma:, :n] = W.T
            J[np.diag_indices(nd)] += np.concatenate(
                [np.full(n, 1e-11), np.full(ma + mb, -1e-11)])
            rhs = -np.concatenate([r1, r2, r3])
            try:
                step = np.linalg.solve(J, rhs)
            except np.linalg.LinAlgError:
                # redundant rows make the reduced KKT singular; the
                # least-squares step still decreases the residual
                step = np.linalg.lstsq(J, rhs, rcond=None)[0]
            if not np.all(np.isfinite(step)):
                return None
            xx += step[:n]
            lam += step[n:n + ma]
            mu += step[n + ma:]
        if not ok:
            return None

        # grow first: pull in the worst violated constraints, a capped
        # batch per round, while the working set has capacity left
        capacity = n - ma - mb
        grew = False
        if mi and capacity > 0:
            viol = p.A_in @ xx - p.b_in - 1e-9 * in_scale
            viol[rows_in] = -1.0
            order = np.argsort(viol)[::-1]
            take = order[:min(_POLISH_ROW_BATCH, capacity)]
            new_rows = [int(r) for r in take if viol[r] > 0.0]
            if new_rows:
                act_in.update(new_rows)
                capacity -= len(new_rows)
                grew = True
        if capacity > 0:
            worst: list[tuple[float, int]] = []
            for b in range(nb):
                if b in act_ball:
                    continue
                A_blk, (cen, rad) = mats[b], sets_[b]
                v = A_blk @ xx - cen
                gap = float(np.sqrt(v @ v)) - rad - 1e-9 * (1.0 + rad)
                if gap > 0.0:
                    worst.append((gap, b))
            worst.sort(reverse=True)
            for _, b in worst[:min(_POLISH_BALL_BATCH, capacity)]:
                act_ball.add(b)
                mu_guess[b] = 0.0
                grew = True
        if grew:
            continue

        # feasible at the current set: release wrong-signed multipliers
        lam_act = lam[me:]
        neg_rows = [rows_in[i] for i in range(len(rows_in))
                    if lam_act[i] < -1e-9]
        neg_balls = [balls_act[i] for i in range(mb) if mu[i] < -1e-9]
        if neg_rows or neg_balls:
            act_in.difference_update(neg_rows)
            act_ball.difference_update(neg_balls)
            continue

        lam_in_full = np.zeros(mi)
        lam_in_full[rows_in] = lam[me:]
        mu_full = np.zeros(nb)
        mu_full[balls_act] = mu
        stat, feas = _kkt_error(p, scaling, xx, lam[:me], lam_in_full,
                                mu_full)
        if stat <= tol and feas <= tol:
            return xx, stat, feas
        return None
    return None


def _primal_infeasible(p: ConvexProgram, work: _Work, scaling: dict,
                       du: FloatArray) -> bool:
    """Support-function certificate from the dual-change direction."""
    if work.m == 0:
        return False
    e, d, c = scaling["e"], scaling["d"], scaling["c"]
    dy = e * (work.rho * du) / c
    ndy = float(np.abs(dy).max(initial=0.0))
    if ndy <= 1e-14:
        return False
    kt_dy = (work.K.T @ (work.rho * du)) / d / c
    if float(np.abs(kt_dy).max(initial=0.0)) > _EPS_INFEAS * ndy:
        return False
    me, mi = work.me, work.mi
    dy_in = dy[me:me + mi]
    if mi and float(dy_in.min(initial=0.0)) < -_EPS_INFEAS * ndy:
        return False
    support = float(p.b_eq @ dy[:me]) if me else 0.0
    if mi:
        support += float(p.b_in @ np.maximum(dy_in, 0.0))
    off = me + mi
    for (cen, r), s in zip(scaling["ball_sets"], scaling["ball_sizes"]):
        blk = dy[off:off + s]
        support += float(cen @ blk) + r * float(np.linalg.norm(blk))
        off += s
    return support <= _EPS_INFEAS * ndy


def _dual_infeasible(p: ConvexProgram, work: _Work, scaling: dict,
                     dx: FloatArray) -> bool:
    """Unbounded-direction certificate from the primal-change direction."""
    dx_u = scaling["d"] * dx
    ndx = float(np.abs(dx_u).max(initial=0.0))
    if ndx <= 1e-14:
        return False
    if float(np.abs(p.H @ dx_u).max(initial=0.0)) > _EPS_INFEAS * ndx:
        return False
    if float(p.g @ dx_u) > -_EPS_INFEAS * ndx:
        return False
    if work.m:
        kdx = (work.K @ dx) / scaling["e"]
        me, mi = work.me, work.mi
        if me and float(np.abs(kdx[:me]).max(initial=0.0)) > _EPS_INFEAS * ndx:
            return False
        if mi and float(kdx[me:me + mi].max(initial=0.0)) > _EPS_INFEAS * ndx:
            return False
        off = me + mi
        for s in scaling["ball_sizes"]:
            if float(np.linalg.norm(kdx[off:off + s])) > _EPS_INFEAS * ndx:
                return False
            off += s
    return True


def solve(p: ConvexProgram, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER, x0=None,
          backend: str | None = None) -> SolveReport:
    """Solve the program to absolute tolerance tol on both residuals.

    Returns status "optimal", "max-iterations" (best iterate attached), or
    "infeasible-detected" when a divergence certificate appears (detail
    says whether the primal or the dual side is infeasible; the latter
    means the objective is unbounded over the constraints).
    """
    from . import _backend

    p.validate()
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    work, scaling = _build_work(p)
    iterate = _backend.get_iterate(backend)

    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.size != p.n:
            raise DimensionError("x0 has the wrong length")
        work.x = x0 / scaling["d"]
    else:
        work.x = np.zeros(p.n)
    work.z = _project_sets(work, work.K @ work.x) if work.m else np.zeros(0)
    work.u = np.zeros(work.m)
    work.factor()

    merit_parts = []
    merit_resets = []
    status = "max-iterations"
    detail = ""
    it = 0
    last_adapt = 0
    n_refactor = 0
    pinf_streak = 0
    dinf_streak = 0
    rp = rd = math.inf
    polished = None
    next_polish = _POLISH_FIRST
    # The raw per-iteration displacement is measured in the metric induced
    # by the current step weights; when those change the units change, so
    # each new segment is spliced onto the previous scale to keep the
    # logged merit comparable (and nonincreasing) across the whole run.
    merit_scale = 1.0
    last_logged = math.inf
    pending_reset = False

    while it < max_iter:
        chunk = min(_CHECK_INTERVAL, max_iter - it)
        x_before = work.x.copy()
        u_before = work.u.copy()
        raw = iterate(work, chunk)
        if pending_reset:
            if raw[0] > 0 and merit_scale * raw[0] > last_logged:
                merit_scale = last_logged / raw[0]
            pending_reset = False
        logged = merit_scale * raw
        merit_parts.append(logged)
        last_logged = logged[-1]
        it += chunk

        rp, rd, scale_p, scale_d, x_u = _unscaled_residuals(p, work, scaling)
        if rp <= tol and rd <= tol:
            status = "optimal"
            break
        if it >= next_polish and rp <= 1e-2 * max(scale_p, 1.0):
            next_polish = max(it + _CHECK_INTERVAL,
                              int(next_polish * _POLISH_SPACING))
            polished = _polish(p, work, scaling, tol)
            if polished is not None:
                status = "optimal"
                detail = "active-set polish"
                break

        du = work.u - u_before
        dxv = work.x - x_before
        if rp > 10 * tol and _primal_infeasible(p, work, scaling, du):
            pinf_streak += 1
            if pinf_streak >= _INFEAS_STREAK:
                status = "infeasible-detected"
                detail = "primal infeasible"
                break
        else:
            pinf_streak = 0
        if rd > 10 * tol and _dual_infeasible(p, work, scaling, dxv):
            dinf_streak += 1
            if dinf_streak >= _INFEAS_STREAK:
                status = "infeasible-detected"
                detail = "dual infeasible (objective unbounded)"
                break
        else:
            dinf_streak = 0

        if (it - last_adapt >= _ADAPT_INTERVAL and n_refactor < _MAX_REFACTOR
                and work.m):
            ratio = math.sqrt((rp / max(scale_p, 1e-12))
                              / max(rd / max(scale_d, 1e-12), 1e-12))
            ratio = min(max(ratio, 1e-4), 1e4)
            if ratio > 5.0 or ratio < 0.2:
                new_rho = np.clip(work.rho * ratio, _RHO_MIN, _RHO_MAX)
                if not np.allclose(new_rho, work.rho):
                    work.u = work.u * work.rho / new_rho
                    work.rho = new_rho
                    work.factor()
                    n_refactor += 1
                    merit_resets.append(it)
                    pending_reset = True
            last_adapt = it

    if status == "max-iterations" and polished is None:
        polished = _polish(p, work, scaling, tol)
        if polished is not None:
            status = "optimal"
            detail = "active-set polish"
    if polished is not None:
        x_u, stat_res, feas_res = polished
        rp, rd = feas_res, stat_res
    else:
        rp, rd, *_ , x_u = _unscaled_residuals(p, work, scaling)
    merit_log = (np.concatenate(merit_parts) if merit_parts else np.zeros(0))
    return SolveReport(
        x=x_u,
        status=status,
        primal_residual=rp,
        dual_residual=rd,
        iterations=it,
        objective=p.objective(x_u),
        detail=detail,
        merit_log=merit_log,
        merit_resets=merit_resets,
    )


def dump_program(p: ConvexProgram, path: str) -> None:
    """Plain-text dump of all program matrices for external cross-checking."""
    def block(name, arr):
        arr = np.atleast_2d(np.asarray(arr, dtype=float))
        head = f"{name} {arr.shape[0]} {arr.shape[1]}"
        body = "\n".join(",".join(repr(float(v)) for v in row) for row in arr)
        return head + ("\n" + body if arr.size else "")

    parts = [block("H", p.H), block("g", p.g),
             block("A_eq", p.A_eq), block("b_eq", p.b_eq),
             block("A_in", p.A_in), block("b_in", p.b_in),
             f"balls {len(p.balls)}"]
    for idx, cen, r in p.balls:
        parts.append("ball " + " ".join(str(int(i)) for i in idx))
        parts.append("center " + ",".join(repr(float(v)) for v in cen))
        parts.append(f"radius {r!r}")
    parts.append(f"affine_balls {len(p.affine_balls)}")
    for A_blk, cen, r in p.affine_balls:
        parts.append(block("rows", A_blk))
        parts.append("center " + ",".join(repr(float(v)) for v in cen))
        parts.append(f"radius {r!r}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(parts) + "\n")
