# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Gaussian kernel evaluation and the estimator RK4 tick.

The information matrix derivative ``s k k^T`` does not depend on the state,
so stage matrices are never formed: the stage product is ``Lam a`` plus a
rank-one correction from the previous stage's kernel sample.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def gaussian_kernels(const double[:, ::1] points, const double[:, ::1] centres,
                     const double[::1] inv_sigma2):
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t p = centres.shape[0]
    cdef Py_ssize_t n = points.shape[1]
    out_arr = np.empty((m, p), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t a, i, k
    cdef double d2, diff
    for a in range(m):
        for i in range(p):
            d2 = 0.0
            for k in range(n):
                diff = points[a, k] - centres[i, k]
                d2 += diff * diff
            out[a, i] = exp(-d2 * inv_sigma2[i])
    return out_arr


cdef void _stage_derivative(
        int st, double h_prev, bint use_cross, bint use_consensus,
        double[:, :, ::1] lam_mat, double[:, ::1] vec_s, double[:, ::1] a_s,
        double[:, :, ::1] cross_s,
        const double[:, :, ::1] k_own, const double[:, :, :, ::1] k_blocks,
        const double[:, ::1] phi, const double[::1] s,
        const double[:, ::1] gamma, double zeta,
        const double[:, ::1] laplacian, const long[:, ::1] parent,
        double cross_weight,
        double[:, ::1] d_vec, double[:, ::1] d_a, double[:, :, ::1] d_cross) noexcept nogil:
    cdef Py_ssize_t n_agents = a_s.shape[0]
    cdef Py_ssize_t m = a_s.shape[1]
    cdef Py_ssize_t i, j, r, c, par
    cdef double comp, acc, proj, si, lij
    for i in range(n_agents):
        si = s[i]
        comp = 0.0
        if use_cross:
            for j in range(n_agents):
                if j == i:
                    continue
                for r in range(m):
                    comp += k_blocks[st, i, j, r] * cross_s[i, j, r]
        for r in range(m):
            d_vec[i, r] = si * k_own[st, i, r] * (phi[st, i] - comp)
        # rank-one correction term for the stage information matrix
        proj = 0.0
        if st > 0 and si != 0.0:
            for r in range(m):
                proj += k_own[st - 1, i, r] * a_s[i, r]
            proj *= h_prev * si
        for r in range(m):
            acc = 0.0
            for c in range(m):
                acc += lam_mat[i, r, c] * a_s[i, c]
            if st > 0:
                acc += proj * k_own[st - 1, i, r]
            acc -= vec_s[i, r]
            if use_consensus:
                for j in range(n_agents):
                    lij = laplacian[i, j]
                    if lij != 0.0:
                        acc += zeta * lij * a_s[j, r]
            d_a[i, r] = -gamma[i, r] * acc
    if use_cross:
        for j in range(n_agents):
            for i in range(n_agents):
                par = parent[j, i]
                if i == j or par < 0:
                    for r in range(m):
                        d_cross[i, j, r] = 0.0
                    continue
                for r in range(m):
                    if par == j:
                        d_cross[i, j, r] = -cross_weight * (cross_s[i, j, r] - a_s[j, r])
                    else:
                        d_cross[i, j, r] = -cross_weight * (cross_s[i, j, r] - cross_s[par, j, r])


def estimator_tick(double[:, :, ::1] lam_mat, double[:, ::1] lam_vec,
                   double[:, ::1] a_hat, double[:, :, ::1] cross,
                   const double[:, :, ::1] k_own, k_blocks_obj,
                   const double[:, ::1] phi, const double[::1] s,
                   const double[:, ::1] gamma, double zeta,
                   const double[:, ::1] laplacian, const long[:, ::1] parent,
                   double cross_weight, double dt):
    cdef Py_ssize_t n_agents = a_hat.shape[0]
    cdef Py_ssize_t m = a_hat.shape[1]
    cdef bint use_cross = k_blocks_obj is not None
    cdef bint use_consensus = zeta != 0.0
    cdef const double[:, :, :, ::1] k_blocks
    if use_cross:
        k_blocks = k_blocks_obj
    else:
        k_blocks = np.zeros((1, 1, 1, 1))

    cdef Py_ssize_t nc = n_agents if use_cross else 1
    cdef double[:, ::1] vec0 = np.array(lam_vec, copy=True)
    cdef double[:, ::1] a0 = np.array(a_hat, copy=True)
    cdef double[:, :, ::1] cross0 = np.array(cross, copy=True)

    cdef double[:, ::1] vec_s = np.array(lam_vec, copy=True)
    cdef double[:, ::1] a_s = np.array(a_hat, copy=True)
    cdef double[:, :, ::1] cross_s = np.array(cross, copy=True)

    cdef double[:, ::1] d_vec = np.zeros((n_agents, m))
    cdef double[:, ::1] d_a = np.zeros((n_agents, m))
    cdef double[:, :, ::1] d_cross = np.zeros((nc, nc, m))
    cdef double[:, ::1] acc_vec = np.zeros((n_agents, m))
    cdef double[:, ::1] acc_a = np.zeros((n_agents, m))
    cdef double[:, :, ::1] acc_cross = np.zeros((nc, nc, m))

    cdef double weights[4]
    cdef double offsets[4]
    weights[0] = 1.0; weights[1] = 2.0; weights[2] = 2.0; weights[3] = 1.0
    offsets[0] = 0.5 * dt; offsets[1] = 0.5 * dt; offsets[2] = dt; offsets[3] = 0.0
    cdef int st
    cdef Py_ssize_t i, j, r, c
    cdef double w, h, h_prev, coef, si, kr

    with nogil:
        h_prev = 0.0
        for st in range(4):
            _stage_derivative(st, h_prev, use_cross, use_consensus, lam_mat,
                              vec_s, a_s, cross_s, k_own, k_blocks, phi, s,
                              gamma, zeta, laplacian, parent, cross_weight,
                              d_vec, d_a, d_cross)
            w = weights[st]
            h = offsets[st]
            for i in range(n_agents):
                for r in range(m):
                    acc_vec[i, r] += w * d_vec[i, r]
                    acc_a[i, r] += w * d_a[i, r]
                    if st < 3:
                        vec_s[i, r] = vec0[i, r] + h * d_vec[i, r]
                        a_s[i, r] = a0[i, r] + h * d_a[i, r]
            if use_cross:
                for i in range(n_agents):
                    for j in range(n_agents):
                        for r in range(m):
                            acc_cross[i, j, r] += w * d_cross[i, j, r]
                            if st < 3:
                                cross_s[i, j, r] = cross0[i, j, r] + h * d_cross[i, j, r]
            h_prev = h

        coef = dt / 6.0
        for i in range(n_agents):
            si = s[i]
            for r in range(m):
                lam_vec[i, r] = vec0[i, r] + coef * acc_vec[i, r]
                a_hat[i, r] = a0[i, r] + coef * acc_a[i, r]
            if si != 0.0:
                for r in range(m):
                    for c in range(m):
                        kr = 0.0
                        for st in range(4):
                            kr += weights[st] * k_own[st, i, r] * k_own[st, i, c]
                        lam_mat[i, r, c] = lam_mat[i, r, c] + coef * si * kr
        if use_cross:
            for i in range(n_agents):
                for j in range(n_agents):
                    for r in range(m):
                        cross[i, j, r] = cross0[i, j, r] + coef * acc_cross[i, j, r]
