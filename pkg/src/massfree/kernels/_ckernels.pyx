# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled gather / local matvec / scatter-add kernels."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def scatter_apply(const double[:, :, ::1] mats, const long long[:, ::1] dofs,
                  const double[::1] u, double[::1] out):
    """out[dofs[e, i]] += sum_j mats[e, i, j] * u[dofs[e, j]], e ascending."""
    cdef Py_ssize_t ne = mats.shape[0], n = mats.shape[1]
    cdef Py_ssize_t e, i, j
    cdef double s
    with nogil:
        for e in range(ne):
            for i in range(n):
                s = 0.0
                for j in range(n):
                    s = s + mats[e, i, j] * u[dofs[e, j]]
                out[dofs[e, i]] += s


def scatter_add(const double[:, ::1] local, const long long[:, ::1] dofs,
                double[::1] out):
    """out[dofs[e, i]] += local[e, i], e ascending."""
    cdef Py_ssize_t ne = local.shape[0], n = local.shape[1]
    cdef Py_ssize_t e, i
    with nogil:
        for e in range(ne):
            for i in range(n):
                out[dofs[e, i]] += local[e, i]
