"""Tests for the compiled/pure backend split of the solver inner loop."""

import os
import subprocess
import sys

import numpy as np
import pytest

from seapack import _backend
from seapack.errors import ParameterError
from seapack.qp import (
    ConvexProgram,
    _build_work,
    _iterate_pure,
    _project_sets,
    solve,
)

needs_compiled = pytest.mark.skipif(
    not _backend.has_compiled(), reason="compiled kernel not built")


def random_program(rng):
    n = int(rng.integers(3, 24))
    M = rng.normal(size=(n, n))
    H = M @ M.T + 0.2 * np.eye(n)
    g = rng.normal(size=n)
    A_in = np.vstack([np.eye(n), -np.eye(n)])
    b_in = np.concatenate([1 + rng.random(n), 1 + rng.random(n)])
    balls = []
    if n >= 6:
        balls = [(np.arange(3), rng.normal(size=3) * 0.3, 1.0 + rng.random()),
                 (np.arange(3, 6), rng.normal(size=3) * 0.3, 1.0 + rng.random())]
    me = int(rng.integers(0, 3))
    A_eq = rng.normal(size=(me, n))
    b_eq = A_eq @ (rng.random(size=n) * 0.4)
    return ConvexProgram(H=H, g=g, A_eq=A_eq, b_eq=b_eq,
                         A_in=A_in, b_in=b_in, balls=balls)


class TestSelection:
    def test_pure_backend_always_available(self):
        it = _backend.get_iterate("pure")
        assert it is _iterate_pure

    def test_unknown_backend_rejected(self):
        with pytest.raises(ParameterError):
            _backend.get_iterate("vectorized")

    def test_default_matches_availability(self):
        expect = "compiled" if _backend.has_compiled() else "pure"
        assert _backend.active_backend() == expect

    def test_env_override_forces_pure(self):
        code = ("import seapack._backend as b; "
                "print(b.active_backend(), b.has_compiled())")
        env = dict(os.environ, SEAPACK_PURE_PYTHON="1")
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        assert out.stdout.split() == ["pure", "False"]

    def test_compiled_request_errors_when_unavailable(self):
        if _backend.has_compiled():
            assert callable(_backend.get_iterate("compiled"))
        else:
            with pytest.raises(ParameterError):
                _backend.get_iterate("compiled")


@needs_compiled
class TestAgreement:
    def test_single_chunk_parity(self):
        rng = np.random.default_rng(2)
        from seapack.qp import _iterate_compiled
        for _ in range(10):
            p = random_program(rng)
            works = []
            for _i in range(2):
                w, _s = _build_work(p)
                w.x = np.zeros(w.n)
                w.z = _project_sets(w, w.K @ w.x)
                w.u = np.zeros(w.m)
                w.factor()
                works.append(w)
            mp = _iterate_pure(works[0], 50)
            mc = _iterate_compiled(works[1], 50)
            assert np.abs(mp - mc).max() < 1e-10
            assert np.abs(works[0].x - works[1].x).max() < 1e-10
            assert np.abs(works[0].z - works[1].z).max() < 1e-10
            assert np.abs(works[0].u - works[1].u).max() < 1e-10

    def test_full_solve_agreement(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            p = random_program(rng)
            rc = solve(p, tol=1e-8, backend="compiled")
            rp = solve(p, tol=1e-8, backend="pure")
            assert rc.status == rp.status == "optimal"
            assert np.abs(rc.x - rp.x).max() < 1e-6
            assert rc.objective == pytest.approx(rp.objective, abs=1e-8)

    def test_infeasibility_detection_agrees(self):
        p = ConvexProgram(H=np.eye(1), g=np.zeros(1),
                          A_eq=np.array([[1.0], [1.0]]),
                          b_eq=np.array([1.0, 2.0]))
        for bk in ("compiled", "pure"):
            rep = solve(p, tol=1e-6, backend=bk)
            assert rep.status == "infeasible-detected"
