# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: the RVI sweep (extended precision) and one closed-loop episode."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()

cdef extern from "_quad.h":
    ctypedef double wncs_quad
    int WNCS_QUAD_DIGITS

QUAD_DIGITS = WNCS_QUAD_DIGITS

cdef double DIVERGE = 1e15


def rvi(const double[:, ::1] cost, const long[:, :, ::1] succ, const double[:, :, ::1] prob,
        double eps, long max_iters, long stall_window, double tie_tol, long ref):
    """Relative value iteration on a sparse unit-step MDP.

    Each row's probabilities are re-closed in extended precision: the entry
    pointing back to its own state (or the largest one) absorbs ``1 - sum``.
    """
    cdef Py_ssize_t N = cost.shape[0], M = cost.shape[1], K = succ.shape[2]
    cdef Py_ssize_t d, l, k, j, close_k
    cdef wncs_quad acc, best, v, lo, hi, span, best_span, off
    cdef long it = 0, since_best = 0, converged = 0, a
    cdef long[::1] pol

    # wncs_quad has no numpy dtype; keep it in raw byte buffers
    p_raw = np.zeros(N * M * K * sizeof(wncs_quad), dtype=np.uint8)
    h_raw = np.zeros(N * sizeof(wncs_quad), dtype=np.uint8)
    th_raw = np.zeros(N * sizeof(wncs_quad), dtype=np.uint8)
    v_raw = np.zeros(M * sizeof(wncs_quad), dtype=np.uint8)
    cdef wncs_quad* P = <wncs_quad*> cnp.PyArray_DATA(p_raw)
    cdef wncs_quad* H = <wncs_quad*> cnp.PyArray_DATA(h_raw)
    cdef wncs_quad* TH = <wncs_quad*> cnp.PyArray_DATA(th_raw)
    cdef wncs_quad* V = <wncs_quad*> cnp.PyArray_DATA(v_raw)
    pol_arr = np.zeros(N, dtype=np.int64)
    pol = pol_arr

    for d in range(N):
        for l in range(M):
            acc = 0
            close_k = -1
            for k in range(K):
                j = succ[d, l, k]
                P[(d * M + l) * K + k] = <wncs_quad> prob[d, l, k]
                if j < 0:
                    continue
                if j == d:
                    close_k = k
                elif close_k < 0 or (succ[d, l, close_k] != d and prob[d, l, k] > prob[d, l, close_k]):
                    close_k = k
            if close_k >= 0:
                for k in range(K):
                    if k != close_k and succ[d, l, k] >= 0:
                        acc = acc + P[(d * M + l) * K + k]
                P[(d * M + l) * K + close_k] = (<wncs_quad> 1.0) - acc

    best_span = -1
    lo = 0
    hi = 0
    span = 0
    with nogil:
        while it < max_iters:
            for d in range(N):
                for l in range(M):
                    acc = <wncs_quad> cost[d, l]
                    for k in range(K):
                        j = succ[d, l, k]
                        if j >= 0:
                            acc = acc + P[(d * M + l) * K + k] * H[j]
                    V[l] = acc
                best = V[0]
                for l in range(1, M):
                    if V[l] < best:
                        best = V[l]
                a = 0
                for l in range(M):
                    if V[l] <= best + tie_tol:
                        a = l
                        break
                pol[d] = a + 1
                TH[d] = best
            lo = TH[0] - H[0]
            hi = lo
            for d in range(1, N):
                v = TH[d] - H[d]
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            off = TH[ref]
            for d in range(N):
                H[d] = TH[d] - off
            it += 1
            span = hi - lo
            if span < eps:
                converged = 1
                break
            if best_span < 0 or span < best_span:
                best_span = span
                since_best = 0
            else:
                since_best += 1
                if stall_window > 0 and since_best >= stall_window:
                    break

    h_hi = np.empty(N)
    h_lo = np.empty(N)
    cdef double[::1] hh = h_hi, hl = h_lo
    cdef double x
    for d in range(N):
        x = <double> H[d]
        hh[d] = x
        hl[d] = <double> (H[d] - <wncs_quad> x)
    return dict(policy=pol_arr, lower=<double> lo, upper=<double> hi,
                gain=<double> ((lo + hi) / 2), span=<double> span, iterations=it,
                converged=bool(converged), bias=h_hi, bias_lo=h_lo)


def episode(const double[:, ::1] A, const double[:, ::1] B, const double[:, :, ::1] G,
            const double[:, ::1] Q, const long[::1] policy, const double[::1] g,
            const double[:, ::1] W, const double[::1] U,
            long warmup, long hist_max, long d_track):
    cdef Py_ssize_t n = A.shape[0], m = B.shape[1], T = W.shape[0], N = policy.shape[0]
    cdef Py_ssize_t M = g.shape[0]
    cdef Py_ssize_t t, i, j
    cdef long d = 1, l = 0, end = -1, d_next, hidx
    cdef int in_flight = 0, counted_pkt = 0, success
    cdef double acc, cost_sum = 0.0, q
    cdef long counted = 0, div_slot = -1

    x_arr = np.zeros(n)
    xn_arr = np.zeros(n)
    cmd_arr = np.zeros(m)
    u_arr = np.zeros(m)
    hist_arr = np.zeros(hist_max + 2, dtype=np.int64)
    att_arr = np.zeros(M, dtype=np.int64)
    suc_arr = np.zeros(M, dtype=np.int64)
    mom_arr = np.zeros((d_track, n, n))
    momn_arr = np.zeros(d_track, dtype=np.int64)
    cdef double[::1] x = x_arr, xn = xn_arr, cmd = cmd_arr, u = u_arr
    cdef long[::1] hist = hist_arr, att = att_arr, suc = suc_arr, momn = momn_arr
    cdef double[:, :, ::1] mom = mom_arr

    with nogil:
        for t in range(T):
            if not in_flight:
                l = policy[(d if d < N else N) - 1]
                for i in range(m):
                    acc = 0.0
                    for j in range(n):
                        acc = acc + G[l - 1, i, j] * x[j]
                    cmd[i] = acc
                end = t + l - 1
                in_flight = 1
                counted_pkt = t >= warmup
                if counted_pkt:
                    hidx = d if d <= hist_max else hist_max + 1
                    hist[hidx] += 1
                    att[l - 1] += 1
                    if d <= d_track:
                        momn[d - 1] += 1
                        for i in range(n):
                            for j in range(n):
                                mom[d - 1, i, j] += x[i] * x[j]
            if t >= warmup:
                q = 0.0
                for i in range(n):
                    for j in range(n):
                        q = q + x[i] * Q[i, j] * x[j]
                cost_sum = cost_sum + q
                counted += 1
            for i in range(m):
                u[i] = 0.0
            d_next = d + 1
            if t == end:
                in_flight = 0
                success = U[t] >= g[l - 1]
                if success:
                    for i in range(m):
                        u[i] = cmd[i]
                    d_next = l
                    if counted_pkt:
                        suc[l - 1] += 1
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc = acc + A[i, j] * x[j]
                for j in range(m):
                    acc = acc + B[i, j] * u[j]
                xn[i] = acc + W[t, i]
            for i in range(n):
                x[i] = xn[i]
                if not isfinite(xn[i]) or fabs(xn[i]) > DIVERGE:
                    div_slot = t + 2
            if div_slot >= 0:
                break
            d = d_next

    return dict(cost_sum=cost_sum, counted=counted, divergence_slot=div_slot,
                hist=hist_arr, attempts=att_arr, successes=suc_arr,
                moments=mom_arr, moment_counts=momn_arr)
