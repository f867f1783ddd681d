# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop for the splitting solver.

Runs whole iterations without returning to Python: the two dense
matrix-vector products against the constraint matrix, the permuted
triangular solve of the factored KKT system (LAPACK dgetrs on the dense
LU factor), the constraint-set projections, the dual updates, and the
per-iteration displacement merit. Semantics match the numpy fallback;
only per-iteration dispatch overhead differs.
"""

from libc.math cimport sqrt

import numpy as np

from scipy.linalg.cython_blas cimport dgemv
from scipy.linalg.cython_lapack cimport dgetrs


def run_iterations(Py_ssize_t n_iter, Py_ssize_t n_, Py_ssize_t m_,
                   Py_ssize_t me, Py_ssize_t mi,
                   double[:, ::1] K, double[::1, :] luf, int[::1] piv,
                   double sigma, double[::1] rho, double[::1] q,
                   double[::1] b_eq, double[::1] b_in,
                   long[::1] ball_start, long[::1] ball_size,
                   double[::1] ball_center, double[::1] ball_radius,
                   double[::1] x, double[::1] z, double[::1] u,
                   double[::1] merit):
    """Advance (x, z, u) in place by n_iter iterations; fill merit."""
    cdef Py_ssize_t nb = ball_start.shape[0]
    rhs_a = np.empty(n_)
    xn_a = np.empty(n_)
    tmpm_a = np.empty(max(m_, 1))
    wm_a = np.empty(max(m_, 1))
    cdef double[::1] rhs = rhs_a
    cdef double[::1] xn = xn_a
    cdef double[::1] tmpm = tmpm_a
    cdef double[::1] wm = wm_a

    cdef int n32 = <int> n_, m32 = <int> m_, one = 1, info = 0
    cdef double d_one = 1.0, d_zero = 0.0
    # K is C-contiguous (m, n); its memory viewed column-major is the
    # (n, m) matrix K', so trans="N" applies K' and trans="T" applies K
    cdef double *kmem = &K[0, 0] if m_ > 0 else NULL

    cdef Py_ssize_t it, i, b, s, off, cen_off
    cdef double acc, dsq, nrm, scale, zi, ui, dv, dx, msq

    with nogil:
        for it in range(n_iter):
            # proximal step: rhs = sigma*x - q + K'(rho*(z - u))
            for i in range(m_):
                tmpm[i] = rho[i] * (z[i] - u[i])
            if m_ > 0:
                dgemv("N", &n32, &m32, &d_one, kmem, &n32,
                      &tmpm[0], &one, &d_zero, &rhs[0], &one)
            else:
                for i in range(n_):
                    rhs[i] = 0.0
            for i in range(n_):
                xn[i] = rhs[i] + sigma * x[i] - q[i]
            dgetrs("N", &n32, &one, &luf[0, 0], &n32, &piv[0],
                   &xn[0], &n32, &info)

            # pre-projection point w = K x_new + u
            if m_ > 0:
                dgemv("T", &n32, &m32, &d_one, kmem, &n32,
                      &xn[0], &one, &d_zero, &wm[0], &one)
            for i in range(m_):
                wm[i] += u[i]

            msq = 0.0
            # equality rows pin to b_eq, inequality rows clip at b_in
            for i in range(me):
                zi = b_eq[i]
                ui = wm[i] - zi
                dv = (zi + ui) - (z[i] + u[i])
                msq += rho[i] * dv * dv
                z[i] = zi
                u[i] = ui
            for i in range(me, me + mi):
                zi = wm[i]
                if zi > b_in[i - me]:
                    zi = b_in[i - me]
                ui = wm[i] - zi
                dv = (zi + ui) - (z[i] + u[i])
                msq += rho[i] * dv * dv
                z[i] = zi
                u[i] = ui
            # ball blocks project radially, interior points pass through
            cen_off = 0
            for b in range(nb):
                s = ball_size[b]
                off = ball_start[b]
                dsq = 0.0
                for i in range(s):
                    acc = wm[off + i] - ball_center[cen_off + i]
                    dsq += acc * acc
                nrm = sqrt(dsq)
                if nrm > ball_radius[b]:
                    scale = ball_radius[b] / nrm
                    for i in range(s):
                        zi = ball_center[cen_off + i] + \
                            (wm[off + i] - ball_center[cen_off + i]) * scale
                        ui = wm[off + i] - zi
                        dv = (zi + ui) - (z[off + i] + u[off + i])
                        msq += rho[off + i] * dv * dv
                        z[off + i] = zi
                        u[off + i] = ui
                else:
                    for i in range(s):
                        zi = wm[off + i]
                        dv = zi - (z[off + i] + u[off + i])
                        msq += rho[off + i] * dv * dv
                        z[off + i] = zi
                        u[off + i] = 0.0
                cen_off += s
            for i in range(n_):
                dx = xn[i] - x[i]
                msq += sigma * dx * dx
                x[i] = xn[i]
            merit[it] = sqrt(msq)
