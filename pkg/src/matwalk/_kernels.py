"""Compiled per-path walk kernels.

Everything here is deterministic given (seed, stream = path index, draw
index = step index); workers only decide which chunk of paths a thread
simulates, never what any path does.  The hot loop avoids per-step
log/sqrt by renormalizing the direction vector only every `block` steps:
within a block the exit test  t + sign*S_k < 0  is equivalent to
comparing the squared raw norm against a threshold that absorbs the
accumulated log-norm, the scalar shift, and t (log is monotone).  Block
length is chosen by the caller so the raw norm stays far from float
range limits.

Paths that exit stop consuming steps, which is what makes survival
statistics at n ~ 4096 affordable: the mean alive-length grows like
sqrt(n), not n.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64_1 = np.uint64(1)
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)
SH30 = np.uint64(30)
SH27 = np.uint64(27)
SH31 = np.uint64(31)
SH11 = np.uint64(11)
INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> SH30)) * M1
    z = (z ^ (z >> SH27)) * M2
    return z ^ (z >> SH31)


@njit(cache=True, nogil=True, inline="always")
def _stream_key(seed, stream_id):
    return _mix64(seed ^ _mix64(stream_id))


@njit(cache=True, nogil=True, inline="always")
def _draw_raw(key, index):
    return _mix64(key + (np.uint64(index) + U64_1) * GOLDEN)


@njit(cache=True, nogil=True, inline="always")
def _atom_index(u, thresholds):
    i = 0
    for j in range(thresholds.shape[0]):
        if u >= thresholds[j]:
            i += 1
    return i


@njit(cache=True, nogil=True)
def walk_snapshots_d2(
    seed,
    stream0,
    n_paths,
    mats,
    thresholds,
    shift,
    x0,
    t,
    sign,
    strict,
    block,
    sched,
    want_end,
    out_tau,
    out_s,
    out_end,
):
    """Simulate n_paths walks to sched[-1] steps with exit at the first k
    where t + sign*S_k drops below 0 (strictly, or weakly if strict is 0).

    out_tau[p]   exit step, or sched[-1]+1 if the path survived the range.
    out_s[j, p]  S at step sched[j]; valid when out_tau[p] >= sched[j].
    out_end[:,p] final unit direction for surviving paths (if want_end).
    """
    seed_u = np.uint64(seed)
    n_max = sched[-1]
    n_sched = sched.shape[0]
    fshift = np.exp(-2.0 * shift)
    a00 = mats[:, 0, 0]
    a01 = mats[:, 0, 1]
    a10 = mats[:, 1, 0]
    a11 = mats[:, 1, 1]
    for p in range(n_paths):
        key = _stream_key(seed_u, np.uint64(stream0 + p))
        v0 = x0[0]
        v1 = x0[1]
        s = 0.0
        comp = 0.0
        tau = -1
        k = 0
        for j in range(n_sched):
            out_s[j, p] = np.nan
        jsched = 0
        while k < n_max and tau < 0:
            seg_end = sched[jsched]
            while k < seg_end:
                nb = min(block, seg_end - k)
                # threshold for the exit test inside this block
                if sign > 0:
                    arg = -2.0 * (t + s)
                else:
                    arg = 2.0 * (t - s)
                if arg > 709.0:
                    thr = np.inf
                elif arg < -745.0:
                    thr = 0.0
                else:
                    thr = np.exp(arg)
                n2 = 1.0
                j = 0
                while j < nb:
                    u = _draw_raw(key, k + j)
                    i = _atom_index(u, thresholds)
                    w0 = a00[i] * v0 + a01[i] * v1
                    w1 = a10[i] * v0 + a11[i] * v1
                    n2 = w0 * w0 + w1 * w1
                    v0 = w0
                    v1 = w1
                    thr *= fshift
                    j += 1
                    if sign > 0:
                        hit = (n2 < thr) if strict else (n2 <= thr)
                    else:
                        hit = (n2 > thr) if strict else (n2 >= thr)
                    if hit:
                        tau = k + j
                        break
                # close the block: account the logs (kahan), renormalize
                inc = 0.5 * np.log(n2) + shift * j
                y = inc - comp
                tt = s + y
                comp = (tt - s) - y
                s = tt
                inv = 1.0 / np.sqrt(n2)
                v0 *= inv
                v1 *= inv
                k += j
                if tau > 0:
                    break
            if k == seg_end:
                out_s[jsched, p] = s
                jsched += 1
            elif tau > 0 and tau == seg_end:
                out_s[jsched, p] = s
                jsched += 1
        if tau < 0:
            tau = n_max + 1
            if want_end:
                out_end[0, p] = v0
                out_end[1, p] = v1
        out_tau[p] = tau


@njit(cache=True, nogil=True)
def walk_snapshots_dgen(
    seed,
    stream0,
    n_paths,
    mats,
    thresholds,
    shift,
    x0,
    t,
    sign,
    strict,
    sched,
    want_end,
    out_tau,
    out_s,
    out_end,
):
    """General-dimension variant: per-step renormalization and direct
    comparison of t + sign*S_k.  Meant for small studies; semantics match
    walk_snapshots_d2."""
    seed_u = np.uint64(seed)
    d = mats.shape[1]
    n_max = sched[-1]
    n_sched = sched.shape[0]
    v = np.empty(d)
    w = np.empty(d)
    for p in range(n_paths):
        key = _stream_key(seed_u, np.uint64(stream0 + p))
        for c in range(d):
            v[c] = x0[c]
        s = 0.0
        comp = 0.0
        tau = -1
        for j in range(n_sched):
            out_s[j, p] = np.nan
        jsched = 0
        for k in range(n_max):
            u = _draw_raw(key, k)
            i = _atom_index(u, thresholds)
            n2 = 0.0
            for r in range(d):
                acc = 0.0
                for c in range(d):
                    acc += mats[i, r, c] * v[c]
                w[r] = acc
                n2 += acc * acc
            nrm = np.sqrt(n2)
            inv = 1.0 / nrm
            for r in range(d):
                v[r] = w[r] * inv
            inc = np.log(nrm) + shift
            y = inc - comp
            tt = s + y
            comp = (tt - s) - y
            s = tt
            if jsched < n_sched and k + 1 == sched[jsched]:
                out_s[jsched, p] = s
                jsched += 1
            val = t + sign * s
            if (val < 0.0) if strict else (val <= 0.0):
                tau = k + 1
                break
        if tau < 0:
            tau = n_max + 1
            if want_end:
                for c in range(d):
                    out_end[c, p] = v[c]
        out_tau[p] = tau


@njit(cache=True, nogil=True)
def walk_summary_d2(
    seed,
    stream0,
    n_paths,
    mats,
    thresholds,
    shift,
    x0,
    n,
    block,
    out_min,
    out_sn,
    out_end,
):
    """Unconditioned pass keeping what multi-t estimators need per path:
    min_{1<=k<=n-1} S_k, S_n, and the final direction.  For n = 1 the
    prefix minimum is +inf (an empty constraint set)."""
    seed_u = np.uint64(seed)
    f2s = np.exp(2.0 * shift)
    a00 = mats[:, 0, 0]
    a01 = mats[:, 0, 1]
    a10 = mats[:, 1, 0]
    a11 = mats[:, 1, 1]
    for p in range(n_paths):
        key = _stream_key(seed_u, np.uint64(stream0 + p))
        v0 = x0[0]
        v1 = x0[1]
        s = 0.0
        comp = 0.0
        runmin = np.inf
        k = 0
        while k < n - 1:
            nb = min(block, n - 1 - k)
            n2 = 1.0
            fs = 1.0
            mm = np.inf
            for j in range(nb):
                u = _draw_raw(key, k + j)
                i = _atom_index(u, thresholds)
                w0 = a00[i] * v0 + a01[i] * v1
                w1 = a10[i] * v0 + a11[i] * v1
                n2 = w0 * w0 + w1 * w1
                v0 = w0
                v1 = w1
                fs *= f2s
                m = n2 * fs
                if m < mm:
                    mm = m
            bmin = s + 0.5 * np.log(mm)
            if bmin < runmin:
                runmin = bmin
            inc = 0.5 * np.log(n2) + shift * nb
            y = inc - comp
            tt = s + y
            comp = (tt - s) - y
            s = tt
            inv = 1.0 / np.sqrt(n2)
            v0 *= inv
            v1 *= inv
            k += nb
        # final step, not part of the prefix minimum
        u = _draw_raw(key, n - 1)
        i = _atom_index(u, thresholds)
        w0 = a00[i] * v0 + a01[i] * v1
        w1 = a10[i] * v0 + a11[i] * v1
        n2 = w0 * w0 + w1 * w1
        s = s + (0.5 * np.log(n2) + shift - comp)
        inv = 1.0 / np.sqrt(n2)
        out_min[p] = runmin
        out_sn[p] = s
        out_end[0, p] = w0 * inv
        out_end[1, p] = w1 * inv


@njit(cache=True, nogil=True)
def walk_summary_dgen(
    seed,
    stream0,
    n_paths,
    mats,
    thresholds,
    shift,
    x0,
    n,
    out_min,
    out_sn,
    out_end,
):
    seed_u = np.uint64(seed)
    d = mats.shape[1]
    v = np.empty(d)
    w = np.empty(d)
    for p in range(n_paths):
        key = _stream_key(seed_u, np.uint64(stream0 + p))
        for c in range(d):
            v[c] = x0[c]
        s = 0.0
        comp = 0.0
        runmin = np.inf
        for k in range(n):
            u = _draw_raw(key, k)
            i = _atom_index(u, thresholds)
            n2 = 0.0
            for r in range(d):
                acc = 0.0
                for c in range(d):
                    acc += mats[i, r, c] * v[c]
                w[r] = acc
                n2 += acc * acc
            nrm = np.sqrt(n2)
            inv = 1.0 / nrm
            for r in range(d):
                v[r] = w[r] * inv
            inc = np.log(nrm) + shift
            y = inc - comp
            tt = s + y
            comp = (tt - s) - y
            s = tt
            if k < n - 1 and s < runmin:
                runmin = s
        out_min[p] = runmin
        out_sn[p] = s
        for c in range(d):
            out_end[c, p] = v[c]


@njit(cache=True, nogil=True)
def reversed_walk_d2(
    seed,
    seed_x,
    seed_y,
    stream0,
    n_paths,
    mats,
    thresholds,
    shift,
    depth,
    n,
    t,
    pairing_floor,
    xs_buf,
    out_ok,
    out_surv,
    out_send,
):
    """Reversed-array survival statistics for dimension 2.

    Per path: draw a start line x (forward boundary walk, depth steps,
    seed_x) and a dual line y (inverse-law boundary walk on covectors,
    depth steps, seed_y; in coordinates the dual action of g^{-1} is
    multiplication by g^T), then the word g_1..g_n (seed).  The reversed
    array is

        S~_k = -sigma*((g_k...g_1)^{-1}, y) + delta(g_{k+1}..g_n x, y_k)
               - delta(g_1..g_n x, y),    y_k = (g_k...g_1)^{-1} . y

    computed with a backward pass for the suffix lines g_{k+1}..g_n x
    (counter-based draws allow random access to g_k) and a forward dual
    pass accumulating sigma*.  A path survives when t + S~_k >= 0 for
    1 <= k <= n-1.  Paths hitting a pairing below pairing_floor are
    flagged not-ok and must be dropped by the caller.

    out_send[p] = t + S~_n for surviving paths (else nan).
    """
    seed_u = np.uint64(seed)
    sx = np.uint64(seed_x)
    sy = np.uint64(seed_y)
    a00 = mats[:, 0, 0]
    a01 = mats[:, 0, 1]
    a10 = mats[:, 1, 0]
    a11 = mats[:, 1, 1]
    for p in range(n_paths):
        key = _stream_key(seed_u, np.uint64(stream0 + p))
        keyx = _stream_key(sx, np.uint64(stream0 + p))
        keyy = _stream_key(sy, np.uint64(stream0 + p))
        # start line x from the forward boundary walk
        x0 = 1.0
        x1 = 0.0
        for k in range(depth):
            u = _draw_raw(keyx, k)
            i = _atom_index(u, thresholds)
            w0 = a00[i] * x0 + a01[i] * x1
            w1 = a10[i] * x0 + a11[i] * x1
            inv = 1.0 / np.sqrt(w0 * w0 + w1 * w1)
            x0 = w0 * inv
            x1 = w1 * inv
        # dual line y from the inverse-law boundary walk (g^T coordinates)
        y0 = 1.0
        y1 = 0.0
        for k in range(depth):
            u = _draw_raw(keyy, k)
            i = _atom_index(u, thresholds)
            w0 = a00[i] * y0 + a10[i] * y1
            w1 = a01[i] * y0 + a11[i] * y1
            inv = 1.0 / np.sqrt(w0 * w0 + w1 * w1)
            y0 = w0 * inv
            y1 = w1 * inv
        # backward pass: xs_buf[k] = unit rep of g_{k+1}..g_n x
        xs_buf[n, 0] = x0
        xs_buf[n, 1] = x1
        c0 = x0
        c1 = x1
        for k in range(n, 0, -1):
            u = _draw_raw(key, k - 1)
            i = _atom_index(u, thresholds)
            w0 = a00[i] * c0 + a01[i] * c1
            w1 = a10[i] * c0 + a11[i] * c1
            inv = 1.0 / np.sqrt(w0 * w0 + w1 * w1)
            c0 = w0 * inv
            c1 = w1 * inv
            xs_buf[k - 1, 0] = c0
            xs_buf[k - 1, 1] = c1
        ok = True
        pair0 = np.abs(y0 * xs_buf[0, 0] + y1 * xs_buf[0, 1])
        if pair0 <= pairing_floor:
            ok = False
        out_ok[p] = ok
        out_surv[p] = False
        out_send[p] = np.nan
        if not ok:
            continue
        delta0 = -np.log(pair0)
        sstar = 0.0
        comp = 0.0
        alive = True
        stilde = 0.0
        for k in range(1, n + 1):
            u = _draw_raw(key, k - 1)
            i = _atom_index(u, thresholds)
            # dual action of (shifted g_k)^{-1}: coordinates g_k^T
            w0 = a00[i] * y0 + a10[i] * y1
            w1 = a01[i] * y0 + a11[i] * y1
            nrm = np.sqrt(w0 * w0 + w1 * w1)
            inc = np.log(nrm) + shift
            yy = inc - comp
            tt = sstar + yy
            comp = (tt - sstar) - yy
            sstar = tt
            inv = 1.0 / nrm
            y0 = w0 * inv
            y1 = w1 * inv
            pair = np.abs(y0 * xs_buf[k, 0] + y1 * xs_buf[k, 1])
            if pair <= pairing_floor:
                ok = False
                break
            stilde = -sstar - np.log(pair) - delta0
            if k <= n - 1 and t + stilde < 0.0:
                alive = False
                break
        if not ok:
            out_ok[p] = False
            continue
        out_surv[p] = alive
        if alive:
            out_send[p] = t + stilde
