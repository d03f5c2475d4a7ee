# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; must agree with ``mhd3s._fallback`` to rounding."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, expm1, log1p

cnp.import_array()


def mode_propagate(double[:, :, ::1] U, double[:, ::1] lam, v, double dt):
    cdef Py_ssize_t N = U.shape[0]
    cdef double complex[:, :] vin = np.asarray(v, dtype=np.complex128)
    out_arr = np.empty((7, N), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double wr[7]
    cdef double wi[7]
    cdef Py_ssize_t n, i, j
    cdef double sr, si, c, s, ph, ur, vr, vi
    for n in range(N):
        for i in range(7):
            sr = 0.0
            si = 0.0
            for j in range(7):
                ur = U[n, j, i]
                vr = vin[j, n].real
                vi = vin[j, n].imag
                sr += ur * vr
                si += ur * vi
            ph = -dt * lam[n, i]
            c = cos(ph)
            s = sin(ph)
            wr[i] = sr * c - si * s
            wi[i] = sr * s + si * c
        for i in range(7):
            sr = 0.0
            si = 0.0
            for j in range(7):
                ur = U[n, i, j]
                sr += ur * wr[j]
                si += ur * wi[j]
            out[i, n] = sr + 1j * si
    return out_arr


def mhd_pointwise(fields, gr, gu, gb, double eps_m, double eps_a, double gamma):
    cdef double[:, ::1] f = np.ascontiguousarray(fields, dtype=np.float64).reshape(7, -1)
    cdef double[:, ::1] g_r = np.ascontiguousarray(gr, dtype=np.float64).reshape(3, -1)
    cdef double[:, ::1] g_u = np.ascontiguousarray(gu, dtype=np.float64).reshape(9, -1)
    cdef double[:, ::1] g_b = np.ascontiguousarray(gb, dtype=np.float64).reshape(9, -1)
    cdef Py_ssize_t P = f.shape[1]
    out_arr = np.empty((9, P), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t p, i
    cdef double r, u0, u1, u2, b0, b1, b2, inv_rho, am1, coef, adv, mag, alf
    cdef double gm2 = gamma - 2.0
    cdef double ratio = eps_m / eps_a
    for p in range(P):
        r = f[0, p]
        u0 = f[1, p]
        u1 = f[2, p]
        u2 = f[3, p]
        b0 = f[4, p]
        b1 = f[5, p]
        b2 = f[6, p]
        out[0, p] = r * u0
        out[1, p] = r * u1
        out[2, p] = r * u2
        inv_rho = 1.0 / (1.0 + eps_m * r)
        am1 = expm1(gm2 * log1p(eps_m * r)) / eps_m
        coef = -ratio * r * inv_rho
        for i in range(3):
            adv = u0 * g_u[3 * i, p] + u1 * g_u[3 * i + 1, p] + u2 * g_u[3 * i + 2, p]
            mag = b0 * g_b[i, p] + b1 * g_b[3 + i, p] + b2 * g_b[6 + i, p]
            mag -= b0 * g_b[3 * i, p] + b1 * g_b[3 * i + 1, p] + b2 * g_b[3 * i + 2, p]
            alf = g_b[3 * i + 2, p] - g_b[6 + i, p]
            out[3 + i, p] = -adv - am1 * g_r[i, p] - inv_rho * mag + coef * alf
        out[6, p] = u1 * b2 - u2 * b1
        out[7, p] = u2 * b0 - u0 * b2
        out[8, p] = u0 * b1 - u1 * b0
    return out_arr.reshape((9,) + np.shape(fields)[1:])
