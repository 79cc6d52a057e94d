# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Semantics mirror ``_kernels_py`` exactly."""

import numpy as np

from libc.math cimport fabs, INFINITY

cdef int MAX_BISECTION_STEPS = 200


def propagate(const double[::1] occ, const double[:, ::1] pi,
              const Py_ssize_t[:, :, ::1] nxt, const double[:, :, ::1] prob):
    cdef Py_ssize_t S = pi.shape[0], A = pi.shape[1], K = prob.shape[2]
    cdef Py_ssize_t s, a, k
    cdef double w
    out_arr = np.zeros(occ.shape[0])
    cdef double[::1] out = out_arr
    with nogil:
        for s in range(S):
            if occ[s] == 0.0:
                continue
            for a in range(A):
                w = occ[s] * pi[s, a]
                if w == 0.0:
                    continue
                for k in range(K):
                    out[nxt[s, a, k]] += w * prob[s, a, k]
    return out_arr


cdef inline void _expected_next(const double[::1] values, const Py_ssize_t[:, :, ::1] nxt,
                                const double[:, :, ::1] prob, double[:, ::1] q) noexcept nogil:
    cdef Py_ssize_t S = prob.shape[0], A = prob.shape[1], K = prob.shape[2]
    cdef Py_ssize_t s, a, k
    cdef double acc
    for s in range(S):
        for a in range(A):
            acc = 0.0
            for k in range(K):
                acc += prob[s, a, k] * values[nxt[s, a, k]]
            q[s, a] = acc


def expected_next(const double[::1] values, const Py_ssize_t[:, :, ::1] nxt,
                  const double[:, :, ::1] prob):
    q_arr = np.empty((prob.shape[0], prob.shape[1]))
    cdef double[:, ::1] q = q_arr
    with nogil:
        _expected_next(values, nxt, prob, q)
    return q_arr


def backup(const double[::1] rewards, const double[:, ::1] pi, const double[::1] values_next,
           const Py_ssize_t[:, :, ::1] nxt, const double[:, :, ::1] prob, double gamma):
    cdef Py_ssize_t S = pi.shape[0], A = pi.shape[1], K = prob.shape[2]
    cdef Py_ssize_t s, a, k
    cdef double acc, qa
    out_arr = np.empty(S)
    cdef double[::1] out = out_arr
    with nogil:
        for s in range(S):
            acc = 0.0
            for a in range(A):
                if pi[s, a] == 0.0:
                    continue
                qa = 0.0
                for k in range(K):
                    qa += prob[s, a, k] * values_next[nxt[s, a, k]]
                acc += pi[s, a] * qa
            out[s] = rewards[s] + gamma * acc
    return out_arr


cdef inline double _eq3(const double[:, ::1] k, const double[:, ::1] b,
                        Py_ssize_t s, double lam) noexcept nogil:
    cdef Py_ssize_t a
    cdef double f = 0.0
    for a in range(k.shape[1]):
        if k[s, a] > 0:
            f += k[s, a] / (lam - b[s, a])
    return f - 1.0


def simplex_solve(const double[:, ::1] k, const double[:, ::1] b, const double[::1] lam_v,
                  double tol, bint split_ties):
    cdef Py_ssize_t S = k.shape[0], A = k.shape[1]
    pi_arr = np.zeros((S, A))
    lam_state_arr = np.zeros(S)
    lam_action_arr = np.zeros((S, A))
    case_arr = np.zeros(S, dtype=np.int8)
    root_arr = np.full(S, np.nan)
    cdef double[:, ::1] pi = pi_arr
    cdef double[::1] lam_state = lam_state_arr
    cdef double[:, ::1] lam_action = lam_action_arr
    cdef signed char[::1] case = case_arr
    cdef double[::1] root = root_arr

    cdef Py_ssize_t s, a, it, ntied, first
    cdef double bmax, tie_tol, b_pos_max, k_min, k_max, lo, hi, mid, lam, lam_s, total, rest, share
    cdef bint has

    with nogil:
        for s in range(S):
            bmax = -INFINITY
            b_pos_max = -INFINITY
            k_min = INFINITY
            k_max = 0.0
            has = False
            for a in range(A):
                if b[s, a] > bmax:
                    bmax = b[s, a]
                if k[s, a] > 0:
                    has = True
                    if b[s, a] > b_pos_max:
                        b_pos_max = b[s, a]
                    if k[s, a] < k_min:
                        k_min = k[s, a]
                    if k[s, a] > k_max:
                        k_max = k[s, a]
            tie_tol = 1e-12 * (fabs(bmax) if fabs(bmax) > 1.0 else 1.0)

            if not has:
                ntied = 0
                first = -1
                for a in range(A):
                    if b[s, a] >= bmax - tie_tol:
                        ntied += 1
                        if first < 0:
                            first = a
                if not split_ties:
                    if lam_v[s] != 0:
                        ntied = 1
                    else:
                        first = -1
                        ntied = A
                for a in range(A):
                    if split_ties:
                        if b[s, a] >= bmax - tie_tol:
                            pi[s, a] = 1.0 / ntied
                    elif first < 0 or a == first:
                        pi[s, a] = 1.0 / ntied
                    lam_action[s, a] = bmax - b[s, a] if bmax > b[s, a] else 0.0
                lam_state[s] = bmax
                continue

            lo = k_min + b_pos_max
            hi = A * k_max + b_pos_max
            for it in range(MAX_BISECTION_STEPS):
                mid = 0.5 * (lo + hi)
                if not (hi - lo > tol and mid > lo and mid < hi):
                    break
                if _eq3(k, b, s, mid) > 0:
                    lo = mid
                else:
                    hi = mid
            lam = 0.5 * (lo + hi)
            root[s] = lam

            if lam >= bmax:
                case[s] = 1
                lam_s = lam
            else:
                case[s] = 2
                lam_s = bmax
            total = 0.0
            for a in range(A):
                if k[s, a] > 0:
                    pi[s, a] = k[s, a] / (lam_s - b[s, a])
                    total += pi[s, a]
                    lam_action[s, a] = 0.0
                else:
                    lam_action[s, a] = lam_s - b[s, a] if lam_s > b[s, a] else 0.0
            lam_state[s] = lam_s
            if case[s] == 1:
                for a in range(A):
                    pi[s, a] = pi[s, a] / total
            else:
                rest = 1.0 - total
                if rest < 0:
                    rest = 0.0
                ntied = 0
                first = -1
                for a in range(A):
                    if k[s, a] <= 0 and b[s, a] >= bmax - tie_tol:
                        ntied += 1
                        if first < 0:
                            first = a
                if not split_ties:
                    ntied = 1
                share = rest / ntied
                for a in range(A):
                    if k[s, a] <= 0 and b[s, a] >= bmax - tie_tol:
                        if split_ties or a == first:
                            pi[s, a] = share
    return pi_arr, lam_state_arr, lam_action_arr, case_arr, root_arr
