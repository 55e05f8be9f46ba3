"""Pure-Python twins of ``_ckernels``.

``rvi`` runs in :mod:`decimal` at 34 significant digits (the binary128 budget
of the compiled path). ``episode`` mirrors the C loop operation by operation,
so both backends produce identical floating-point trajectories.
"""

import math
from decimal import Decimal, localcontext

import numpy as np

QUAD_DIGITS = 34
DIVERGE = 1e15


def rvi(cost, succ, prob, eps, max_iters, stall_window, tie_tol, ref):
    N, M, K = succ.shape
    with localcontext() as ctx:
        ctx.prec = QUAD_DIGITS
        one = Decimal(1)
        rows = []
        for d in range(N):
            row = []
            for l in range(M):
                entries = [(int(succ[d, l, k]), Decimal(float(prob[d, l, k])))
                           for k in range(K) if succ[d, l, k] >= 0]
                close = None
                for idx, (j, p) in enumerate(entries):
                    if j == d:
                        close = idx
                        break
                    if close is None or p > entries[close][1]:
                        close = idx
                if close is not None:
                    rest = sum((p for idx, (_, p) in enumerate(entries) if idx != close), Decimal(0))
                    entries[close] = (entries[close][0], one - rest)
                row.append((Decimal(float(cost[d, l])), entries))
            rows.append(row)

        eps_d = Decimal(eps)
        tie = Decimal(tie_tol)
        h = [Decimal(0)] * N
        pol = [0] * N
        it = 0
        converged = False
        best_span = None
        since_best = 0
        lo = hi = span = Decimal(0)
        while it < max_iters:
            th = [None] * N
            for d in range(N):
                vals = []
                for c, entries in rows[d]:
                    acc = c
                    for j, p in entries:
                        acc = acc + p * h[j]
                    vals.append(acc)
                best = min(vals)
                for l, v in enumerate(vals):
                    if v <= best + tie:
                        pol[d] = l + 1
                        break
                th[d] = best
            diffs = [a - b for a, b in zip(th, h)]
            lo, hi = min(diffs), max(diffs)
            off = th[ref]
            h = [v - off for v in th]
            it += 1
            span = hi - lo
            if span < eps_d:
                converged = True
                break
            if best_span is None or span < best_span:
                best_span = span
                since_best = 0
            else:
                since_best += 1
                if stall_window > 0 and since_best >= stall_window:
                    break

        bias = np.array([float(v) for v in h])
        bias_lo = np.array([float(v - Decimal(float(v))) for v in h])
        return dict(policy=np.array(pol, dtype=np.int64), lower=float(lo), upper=float(hi),
                    gain=float((lo + hi) / 2), span=float(span), iterations=it,
                    converged=converged, bias=bias, bias_lo=bias_lo)


def episode(A, B, G, Q, policy, g, W, U, warmup, hist_max, d_track):
    n, m = B.shape
    T = W.shape[0]
    N = len(policy)
    Ml = len(g)
    A = A.tolist()
    B = B.tolist()
    G = G.tolist()
    Q = Q.tolist()
    policy = [int(v) for v in policy]
    g = g.tolist()
    W = W.tolist()
    U = U.tolist()

    x = [0.0] * n
    cmd = [0.0] * m
    hist = [0] * (hist_max + 2)
    att = [0] * Ml
    suc = [0] * Ml
    mom = [[[0.0] * n for _ in range(n)] for _ in range(d_track)]
    momn = [0] * d_track
    d, l, end = 1, 0, -1
    in_flight = False
    counted_pkt = False
    cost_sum = 0.0
    counted = 0
    div_slot = -1

    for t in range(T):
        if not in_flight:
            l = policy[(d if d < N else N) - 1]
            Gl = G[l - 1]
            for i in range(m):
                acc = 0.0
                for j in range(n):
                    acc = acc + Gl[i][j] * x[j]
                cmd[i] = acc
            end = t + l - 1
            in_flight = True
            counted_pkt = t >= warmup
            if counted_pkt:
                hist[d if d <= hist_max else hist_max + 1] += 1
                att[l - 1] += 1
                if d <= d_track:
                    momn[d - 1] += 1
                    md = mom[d - 1]
                    for i in range(n):
                        for j in range(n):
                            md[i][j] += x[i] * x[j]
        if t >= warmup:
            q = 0.0
            for i in range(n):
                for j in range(n):
                    q = q + x[i] * Q[i][j] * x[j]
            cost_sum = cost_sum + q
            counted += 1
        u = [0.0] * m
        d_next = d + 1
        if t == end:
            in_flight = False
            if U[t] >= g[l - 1]:
                u = list(cmd)
                d_next = l
                if counted_pkt:
                    suc[l - 1] += 1
        xn = [0.0] * n
        Wt = W[t]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc = acc + A[i][j] * x[j]
            for j in range(m):
                acc = acc + B[i][j] * u[j]
            xn[i] = acc + Wt[i]
        x = xn
        for i in range(n):
            if not math.isfinite(xn[i]) or abs(xn[i]) > DIVERGE:
                div_slot = t + 2
        if div_slot >= 0:
            break
        d = d_next

    return dict(cost_sum=cost_sum, counted=counted, divergence_slot=div_slot,
                hist=np.array(hist, dtype=np.int64), attempts=np.array(att, dtype=np.int64),
                successes=np.array(suc, dtype=np.int64), moments=np.array(mom).reshape(d_track, n, n),
                moment_counts=np.array(momn, dtype=np.int64))
