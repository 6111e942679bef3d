"""Compiled per-path simulation loops.

Both engines walk the stage program produced by
:meth:`skorokhod.rules.StoppingRule.program`. Coordinates inside a stage
are ``w = sign * (B - origin)``; the recorded extremes of ``B`` are kept
globally and mapped in and out of stage coordinates at each transition.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from .rng import normal, path_key, uniform

# status codes
STOPPED = 0
CENSORED = 1
DOMAIN_EXIT = 2
UNBOUNDED = 3

# bridge extremes are sampled when a level lies within NEAR local
# standard deviations of the step; aggregated steps keep every level that
# could change the rule at least AGG standard deviations away
NEAR = 5.0
AGG = 8.0
_MAX_AGG = 1 << 40

_INF = math.inf


@nb.njit(inline="always", nogil=True, cache=True)
def _first_threshold(thr, t0, n, wmax):
    k = 0
    while k + 1 < n and thr[t0 + k + 1] <= wmax:
        k += 1
    return k


@nb.njit(inline="always", nogil=True, cache=True)
def _to_stage(sg, o, gM, gJ):
    # global extremes of B mapped to (max w, min w)
    if sg > 0:
        return gM - o, gJ - o
    return o - gJ, o - gM


@nb.njit(inline="always", nogil=True, cache=True)
def _from_stage(sg, o, rmax, rmin):
    if sg > 0:
        return o + rmax, o + rmin
    return o - rmin, o - rmax


@nb.njit(nogil=True, cache=True)
def _segment(x, a, c, key, ctr):
    """Exit of (a, c) from x: side (0 low, 1 high) and pre-exit extremum."""
    if a == -_INF and c == _INF:
        return -1, 0.0, ctr
    if a == -_INF:
        side = 1
    elif c == _INF:
        side = 0
    else:
        u, ctr = uniform(key, ctr)
        side = 1 if u < (x - a) / (c - a) else 0
    v, ctr = uniform(key, ctr)
    if side == 0:
        # running max before reaching a
        if c == _INF:
            y = a + (x - a) / v
        else:
            y = (c * (x - a) + v * a * (c - x)) / ((x - a) + v * (c - x))
            y = min(max(y, x), c)
        return 0, y, ctr
    # running min before reaching c
    if a == -_INF:
        z = c - (c - x) / v
    else:
        z = (v * c * (x - a) + a * (c - x)) / ((c - x) + v * (x - a))
        z = max(min(z, x), a)
    return 1, z, ctr


@nb.njit(nogil=True, cache=True)
def exact_one(kind, lo, hi, nlo, nhi, origin, sign, tstart, tlen, thr, bar, key):
    """One exact path; returns (b, M, J, stage_count, status)."""
    ctr = np.uint64(0)
    B = 0.0
    gM = 0.0
    gJ = 0.0
    s = 0
    count = 1
    while True:
        if kind[s] == 0:
            L = lo[s]
            U = hi[s]
            if B <= L:
                side = 0
            elif B >= U:
                side = 1
            else:
                side, ext, ctr = _segment(B, L, U, key, ctr)
                if side < 0:
                    return B, gM, gJ, count, UNBOUNDED
                if side == 0:
                    gM = max(gM, ext)
                else:
                    gJ = min(gJ, ext)
            if side == 0:
                if B > L:
                    B = L
                gJ = min(gJ, B)
                nxt = nlo[s]
            else:
                if B < U:
                    B = U
                gM = max(gM, B)
                nxt = nhi[s]
            if nxt < 0:
                return B, gM, gJ, count, STOPPED
            s = nxt
            count += 1
            continue
        o = origin[s]
        sg = sign[s]
        t0 = tstart[s]
        n = tlen[s]
        w = sg * (B - o)
        rmax, rmin = _to_stage(sg, o, gM, gJ)
        k = _first_threshold(thr, t0, n, w)
        while True:
            a = bar[t0 + k]
            if w <= a:
                break
            c = thr[t0 + k + 1] if k + 1 < n else _INF
            side, ext, ctr = _segment(w, a, c, key, ctr)
            if side < 0:
                gM, gJ = _from_stage(sg, o, rmax, rmin)
                return o + sg * w, gM, gJ, count, UNBOUNDED
            if side == 0:
                rmax = max(rmax, ext)
                rmin = min(rmin, a)
                w = a
                break
            rmin = min(rmin, ext)
            rmax = max(rmax, c)
            w = c
            k += 1
        gM, gJ = _from_stage(sg, o, rmax, rmin)
        return o + sg * w, gM, gJ, count, STOPPED


@nb.njit(nogil=True, cache=True)
def exact_batch(prog, seed, start, stop, b, M, J, count, status):
    kind, lo, hi, nlo, nhi, origin, sign, tstart, tlen, thr, bar = prog
    for i in range(start, stop):
        key = path_key(seed, np.uint64(i))
        r = exact_one(kind, lo, hi, nlo, nhi, origin, sign, tstart, tlen, thr, bar, key)
        b[i], M[i], J[i], count[i], status[i] = r


@nb.njit(inline="always", nogil=True, cache=True)
def _bridge_max(w0, w1, var, u):
    d = w1 - w0
    return 0.5 * (w0 + w1 + math.sqrt(d * d - 2.0 * var * math.log(u)))


@nb.njit(inline="always", nogil=True, cache=True)
def _bridge_min(w0, w1, var, u):
    d = w1 - w0
    return 0.5 * (w0 + w1 - math.sqrt(d * d - 2.0 * var * math.log(u)))


@nb.njit(inline="always", nogil=True, cache=True)
def _interp(tab, x0, h, x):
    # linear interpolation on the uniform grid x0 + h * j
    r = (x - x0) / h
    j = int(math.floor(r))
    if j < 0:
        j = 0
    elif j > tab.size - 2:
        j = tab.size - 2
    f = r - j
    return tab[j] + f * (tab[j + 1] - tab[j])


@nb.njit(nogil=True, cache=True)
def _inverse(svals, x0, h, y):
    # inverse of the increasing tabulated map by bisection and interpolation
    lo = 0
    hi = svals.size - 1
    if y <= svals[0]:
        return x0
    if y >= svals[hi]:
        return x0 + h * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if svals[mid] <= y:
            lo = mid
        else:
            hi = mid
    f = (y - svals[lo]) / (svals[hi] - svals[lo])
    return x0 + h * (lo + f)


@nb.njit(nogil=True, cache=True)
def euler_one(
    kind, lo, hi, nlo, nhi, origin, sign, tstart, tlen, thr, bar,
    key, dt, horizon, bridge, aggregate, diffusion,
    x0, h, svals, spvals, drift, vol,
):
    """One Euler path; returns (b, M, J, stage_count, status, steps, x)."""
    ctr = np.uint64(0)
    B = 0.0
    X = 0.0
    gM = 0.0
    gJ = 0.0
    s = 0
    count = 1
    steps = 0
    max_steps = int(math.ceil(horizon / dt))
    sqdt = math.sqrt(dt)
    xmax = x0 + h * (svals.size - 1)
    while True:
        is_ay = kind[s] == 1
        if is_ay:
            o = origin[s]
            sg = sign[s]
        else:
            o = 0.0
            sg = 1.0
        t0 = tstart[s]
        n = tlen[s]
        w = sg * (B - o)
        rmax, rmin = _to_stage(sg, o, gM, gJ)
        wmax = w
        k = _first_threshold(thr, t0, n, w) if is_ay else 0
        exit_side = -1  # interval stages: 0 low, 1 high
        stopped = False
        status = STOPPED
        while True:
            if is_ay:
                L = bar[t0 + k]
                U = thr[t0 + k + 1] if k + 1 < n else _INF
                if w <= L:
                    stopped = True
                    break
            else:
                L = lo[s]
                U = hi[s]
                if w <= L:
                    exit_side = 0
                    break
                if w >= U:
                    exit_side = 1
                    break
            if steps >= max_steps:
                status = CENSORED
                break
            K = 1
            if aggregate and bridge and not diffusion:
                d = min(w - L, U - w)
                if is_ay and k + 1 < n and bar[t0 + k + 1] > -_INF:
                    d = min(d, abs(w - bar[t0 + k + 1]))
                d = min(d, max(rmax - w, w - rmin))
                if d > AGG * sqdt:
                    q = d / AGG
                    kk = q * q / dt
                    K = _MAX_AGG if kk >= _MAX_AGG else max(1, int(kk))
                    K = min(K, max_steps - steps)
            if diffusion:
                z, ctr = normal(key, ctr)
                bx = _interp(drift, x0, h, X)
                sx = _interp(vol, x0, h, X)
                X1 = X + bx * dt + sx * sqdt * z
                if not (x0 <= X1 <= xmax):
                    status = DOMAIN_EXIT
                    steps += 1
                    break
                Y1 = _interp(svals, x0, h, X1)
                loc = _interp(spvals, x0, h, X) * sx
                var = loc * loc * dt
                w1 = sg * (Y1 - o)
            else:
                z, ctr = normal(key, ctr)
                var = K * dt
                w1 = w + math.sqrt(var) * z
                X1 = X
            steps += K
            sd = math.sqrt(var)
            top = max(w, w1)
            bot = min(w, w1)
            mx = top
            mn = bot
            if bridge:
                if rmax - top < NEAR * sd or U - top < NEAR * sd:
                    u, ctr = uniform(key, ctr)
                    mx = _bridge_max(w, w1, var, u)
                if bot - rmin < NEAR * sd or bot - L < NEAR * sd:
                    u, ctr = uniform(key, ctr)
                    mn = _bridge_min(w, w1, var, u)
            low_hit = mn <= L
            high_hit = mx >= U
            if low_hit and high_hit:
                # order unknown inside the step; resolve by the endpoint
                if w1 <= L or (w1 < U and w - L < U - w):
                    high_hit = False
                else:
                    low_hit = False
            if not is_ay:
                if low_hit:
                    rmin = min(rmin, L)
                    rmax = max(rmax, w)
                    w = L
                    X = X1
                    exit_side = 0
                    break
                if high_hit:
                    rmax = max(rmax, U)
                    rmin = min(rmin, w)
                    w = U
                    X = X1
                    exit_side = 1
                    break
                rmax = max(rmax, mx)
                rmin = min(rmin, mn)
                w = w1
                X = X1
                continue
            if low_hit:
                rmin = min(rmin, L)
                rmax = max(rmax, w)
                w = L
                X = X1
                stopped = True
                break
            prev_max = rmax
            rmin = min(rmin, mn)
            wmax = max(wmax, mx)
            rmax = max(rmax, mx)
            while k + 1 < n and thr[t0 + k + 1] <= wmax:
                k += 1
                if bar[t0 + k] >= thr[t0 + k]:
                    # the barrier reaches the threshold: stop on arrival
                    w = thr[t0 + k]
                    rmax = max(prev_max, w)
                    stopped = True
                    break
            X = X1
            if stopped:
                break
            if w1 <= bar[t0 + k]:
                w = bar[t0 + k]
                rmin = min(rmin, w)
                stopped = True
                break
            w = w1
        B = o + sg * w
        gM, gJ = _from_stage(sg, o, rmax, rmin)
        gM = max(gM, B)
        gJ = min(gJ, B)
        if diffusion and (stopped or exit_side >= 0):
            X = _inverse(svals, x0, h, B)
        if status != STOPPED or stopped:
            return B, gM, gJ, count, status, steps, X
        nxt = nlo[s] if exit_side == 0 else nhi[s]
        if nxt < 0:
            return B, gM, gJ, count, STOPPED, steps, X
        s = nxt
        count += 1


@nb.njit(nogil=True, cache=True)
def euler_batch(
    prog, seed, start, stop, dt, horizon, bridge, aggregate, diffusion, tables,
    b, M, J, count, status, steps, xs,
):
    kind, lo, hi, nlo, nhi, origin, sign, tstart, tlen, thr, bar = prog
    x0, h, svals, spvals, drift, vol = tables
    for i in range(start, stop):
        key = path_key(seed, np.uint64(i))
        r = euler_one(
            kind, lo, hi, nlo, nhi, origin, sign, tstart, tlen, thr, bar,
            key, dt, horizon, bridge, aggregate, diffusion,
            x0, h, svals, spvals, drift, vol,
        )
        b[i], M[i], J[i], count[i], status[i], steps[i], xs[i] = r
