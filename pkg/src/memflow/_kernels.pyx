# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-step hot kernels (see _kernels_py for the reference semantics)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def convection_element_values(const double[:, ::1] wx, const double[:, ::1] wy,
                              const double[:, ::1] shape_vals,
                              const double[:, :, :, ::1] shape_grads,
                              const double[::1] quad_w, const double[::1] area):
    cdef Py_ssize_t nt = wx.shape[0]
    cdef Py_ssize_t nq = shape_vals.shape[0]
    cdef Py_ssize_t e, q, i, j
    cdef double ux, uy, w2, cj, sij
    cdef double conv[4]
    out_arr = np.zeros((nt, 4, 4))
    cdef double[:, :, ::1] out = out_arr
    cdef double a1[4][4]

    for e in range(nt):
        for i in range(4):
            for j in range(4):
                a1[i][j] = 0.0
        for q in range(nq):
            ux = 0.0
            uy = 0.0
            for i in range(4):
                ux += wx[e, i] * shape_vals[q, i]
                uy += wy[e, i] * shape_vals[q, i]
            for j in range(4):
                conv[j] = ux * shape_grads[e, q, j, 0] + uy * shape_grads[e, q, j, 1]
            w2 = 2.0 * area[e] * quad_w[q]
            for i in range(4):
                sij = w2 * shape_vals[q, i]
                for j in range(4):
                    a1[i][j] += sij * conv[j]
        for i in range(4):
            for j in range(4):
                out[e, i, j] = 0.5 * (a1[i][j] - a1[j][i])
    return out_arr


def scatter_accumulate(const cnp.int64_t[::1] idx, const double[::1] vals, Py_ssize_t size):
    out_arr = np.zeros(size)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k
    for k in range(idx.shape[0]):
        out[idx[k]] += vals[k]
    return out_arr
