# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled voxel kernels (see _pykernels for the reference semantics)."""
from libc.math cimport sqrt, floor, fmod

import numpy as np


def dipolar_slab(const double[:, :, ::1] values, const double[:, ::1] step,
                 const double[::1] offset, bint periodic,
                 const double[:, ::1] cell, const double[:, ::1] inv_cell,
                 double eps, double cutoff, Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t n2 = values.shape[1], n3 = values.shape[2]
    cdef Py_ssize_t i, j, k, a
    cdef double d[3]
    cdef double f[3]
    cdef double x, y, z, r2, w, v
    cdef double eps2 = eps * eps, cut2 = cutoff * cutoff
    cdef double sxx = 0, syy = 0, szz = 0, sxy = 0, sxz = 0, syz = 0
    cdef double excluded = 0
    with nogil:
        for i in range(i0, i1):
            for j in range(n2):
                for k in range(n3):
                    v = values[i, j, k]
                    for a in range(3):
                        d[a] = offset[a] + i * step[0, a] + j * step[1, a] + k * step[2, a]
                    if periodic:
                        for a in range(3):
                            f[a] = d[0] * inv_cell[0, a] + d[1] * inv_cell[1, a] + d[2] * inv_cell[2, a]
                            f[a] = f[a] - cround_even(f[a])
                        for a in range(3):
                            d[a] = f[0] * cell[0, a] + f[1] * cell[1, a] + f[2] * cell[2, a]
                    x = d[0]
                    y = d[1]
                    z = d[2]
                    r2 = x * x + y * y + z * z
                    if r2 <= eps2:
                        excluded += v
                        continue
                    if r2 > cut2:
                        continue
                    w = v / (r2 * r2 * sqrt(r2))
                    sxx += w * (3 * x * x - r2)
                    syy += w * (3 * y * y - r2)
                    szz += w * (3 * z * z - r2)
                    sxy += w * 3 * x * y
                    sxz += w * 3 * x * z
                    syz += w * 3 * y * z
    return np.array([sxx, syy, szz, sxy, sxz, syz]), excluded


cdef inline double cround_even(double x) noexcept nogil:
    # numpy.round semantics (ties to even) so both backends agree on the image
    cdef double r = floor(x + 0.5)
    if r - x == 0.5 and fmod(r, 2.0) != 0:
        r -= 1.0
    return r


def trilinear(const double[:, :, ::1] values, u_in, bint periodic):
    cdef const double[:, ::1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t n[3]
    n[0] = values.shape[0]
    n[1] = values.shape[1]
    n[2] = values.shape[2]
    out_arr = np.empty(m)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t p, a, lo[3], hi[3]
    cdef double t[3], c, acc
    with nogil:
        for p in range(m):
            for a in range(3):
                c = u[p, a]
                if periodic:
                    c = fmod(c, <double>n[a])
                    if c < 0:
                        c += n[a]
                    lo[a] = <Py_ssize_t>floor(c)
                    t[a] = c - lo[a]
                    lo[a] = lo[a] % n[a]
                    hi[a] = (lo[a] + 1) % n[a]
                else:
                    lo[a] = <Py_ssize_t>floor(c)
                    if lo[a] > n[a] - 2:
                        lo[a] = n[a] - 2
                    if lo[a] < 0:
                        lo[a] = 0
                    t[a] = c - lo[a]
                    hi[a] = lo[a] + 1
                    if hi[a] > n[a] - 1:
                        hi[a] = n[a] - 1
            acc = ((1 - t[0]) * (1 - t[1]) * (1 - t[2]) * values[lo[0], lo[1], lo[2]]
                   + (1 - t[0]) * (1 - t[1]) * t[2] * values[lo[0], lo[1], hi[2]]
                   + (1 - t[0]) * t[1] * (1 - t[2]) * values[lo[0], hi[1], lo[2]]
                   + (1 - t[0]) * t[1] * t[2] * values[lo[0], hi[1], hi[2]]
                   + t[0] * (1 - t[1]) * (1 - t[2]) * values[hi[0], lo[1], lo[2]]
                   + t[0] * (1 - t[1]) * t[2] * values[hi[0], lo[1], hi[2]]
                   + t[0] * t[1] * (1 - t[2]) * values[hi[0], hi[1], lo[2]]
                   + t[0] * t[1] * t[2] * values[hi[0], hi[1], hi[2]])
            out[p] = acc
    return out_arr
