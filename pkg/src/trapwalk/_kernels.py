"""Compiled inner loops.

Every kernel works on plain numpy arrays and returns plain tuples so that the
public modules can stay free of numba specifics.
"""

import math

import numpy as np
from numba import njit

DBL_MIN = 2.2250738585072014e-308
LOG_DBL_MIN = math.log(DBL_MIN)
_RESCALE_HI = 1e100
_RESCALE_LO = 1e-100


@njit(cache=True)
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    m = a if a > b else b
    return m + math.log(math.exp(a - m) + math.exp(b - m))


@njit(cache=True)
def survival_dp(c, n, block, log_cut):
    """Killed-walk survival mass after ``n`` steps on the positive half-line.

    ``c[x]`` is the survival factor of site ``x`` for ``0 <= x <= L``.  Values
    are stored per block of ``block`` sites with one log-scale per block, so
    that the dynamic range across the window is unlimited while each block
    stays within double precision.  Window ends whose absolute mass falls
    below ``exp(log_cut)`` are dropped; underflowed products are counted as
    lost mass of at most ``DBL_MIN`` in their block scale.

    Returns
    -------
    log_z : float
        Log of the retained mass (nan when the environment is too short).
    log_lost : float
        Log of an upper bound on the total mass removed by pruning and
        underflow (``-inf`` when nothing was lost).
    reach : int
        Right-most site touched, or the first site beyond ``L`` requested.
    """
    L = c.shape[0] - 1
    nblk = (L + 2) // block + 2
    w = np.zeros(nblk * block + 2)
    s = np.zeros(nblk)
    m = np.zeros(nblk)
    w[1] = 0.5 * c[1]
    lo = 1
    hi = 1
    reach = 1
    log_lost = -np.inf
    bmin = 0
    bmax = 0
    for k in range(2, n + 1):
        nlo = lo - 1 if lo > 1 else lo + 1
        nhi = hi + 1
        if nhi > L:
            return np.nan, log_lost, nhi
        if nhi > reach:
            reach = nhi
        # blocks entering the active range inherit the scale of their neighbour
        b0 = (nlo - 1) // block
        b1 = (nhi + 1) // block
        while bmin > b0:
            bmin -= 1
            s[bmin] = s[bmin + 1]
        while bmax < b1:
            bmax += 1
            s[bmax] = s[bmax - 1]
        bl = nlo // block
        br = nhi // block
        for b in range(bl, br + 1):
            start = b * block
            end = start + block - 1
            x0 = nlo if nlo > start else start
            if (x0 - nlo) & 1:
                x0 += 1
            x1 = nhi if nhi < end else end
            fl = math.exp(s[b - 1] - s[b]) if b > 0 else 0.0
            fr = math.exp(s[b + 1] - s[b])
            mb = 0.0
            for x in range(x0, x1 + 1, 2):
                left = w[x - 1]
                right = w[x + 1]
                if x == start:
                    left *= fl
                    if left < DBL_MIN and w[x - 1] > 0.0:
                        log_lost = _logaddexp(log_lost, LOG_DBL_MIN + s[b])
                if x == end:
                    right *= fr
                    if right < DBL_MIN and w[x + 1] > 0.0:
                        log_lost = _logaddexp(log_lost, LOG_DBL_MIN + s[b])
                v = 0.5 * (left + right) * c[x]
                if v < DBL_MIN and left + right > 0.0:
                    log_lost = _logaddexp(log_lost, LOG_DBL_MIN + s[b])
                w[x] = v
                if v > mb:
                    mb = v
            m[b] = mb
        # rescale only after every block of this step has read its neighbours
        for b in range(bl, br + 1):
            mb = m[b]
            if mb > 0.0 and (mb < _RESCALE_LO or mb > _RESCALE_HI):
                start = b * block
                end = start + block - 1
                x0 = nlo if nlo > start else start
                if (x0 - nlo) & 1:
                    x0 += 1
                x1 = nhi if nhi < end else end
                inv = 1.0 / mb
                for x in range(x0, x1 + 1, 2):
                    w[x] *= inv
                s[b] += math.log(mb)
        lo = nlo
        hi = nhi
        while hi > lo:
            v = w[hi]
            la = (math.log(v) if v > 0.0 else -np.inf) + s[hi // block]
            if la >= log_cut:
                break
            if v > 0.0:
                log_lost = _logaddexp(log_lost, la)
            w[hi] = 0.0
            hi -= 2
        while lo < hi:
            v = w[lo]
            la = (math.log(v) if v > 0.0 else -np.inf) + s[lo // block]
            if la >= log_cut:
                break
            if v > 0.0:
                log_lost = _logaddexp(log_lost, la)
            w[lo] = 0.0
            lo += 2
        # everything outside [lo, hi] must read as zero on later steps
        for x in range(hi + 1, nhi + 2):
            w[x] = 0.0
        for x in range(nlo - 1 if nlo > 1 else 1, lo):
            w[x] = 0.0
        bmin = (lo - 1) // block
        bmax = (hi + 1) // block
    tot = -np.inf
    for x in range(lo, hi + 1, 2):
        v = w[x]
        if v > 0.0:
            tot = _logaddexp(tot, math.log(v) + s[x // block])
    return tot, log_lost, reach


@njit(cache=True)
def crossing_sweep(gaps, ebeta):
    """Forward sweep of the harmonic recurrence over whole gaps.

    With ``u(tau_0) = 0`` and ``u(tau_0 + 1) = 1`` the function ``u`` is
    linear inside each gap and satisfies ``u(x+1) = 2 e^beta u(x) - u(x-1)`` at
    every trap ``x`` after ``tau_0``.  All values are positive and increasing,
    so the sweep is stable; the state is renormalised once per gap.

    Returns
    -------
    log_u : ndarray
        ``log u(tau_k)`` for ``k = 1 .. m``.
    log_scale, p, q : ndarray
        State at the left end of gap ``k`` (``k = 0 .. m-1``): ``u`` at the
        trap is ``exp(log_scale) * p`` and at the next site ``exp(log_scale) * q``.
    """
    m = gaps.shape[0]
    log_u = np.empty(m)
    log_scale = np.empty(m)
    ps = np.empty(m)
    qs = np.empty(m)
    p = 0.0
    q = 1.0
    ls = 0.0
    for k in range(m):
        ps[k] = p
        qs[k] = q
        log_scale[k] = ls
        t = float(gaps[k])
        d = q - p
        ut = p + t * d
        ut1 = p + (t - 1.0) * d
        ls += math.log(ut)
        log_u[k] = ls
        p = 1.0
        q = 2.0 * ebeta - ut1 / ut
    return log_u, log_scale, ps, qs


@njit(cache=True)
def two_sided_log_p(left_gaps, right_gap, beta):
    """Inner probability of the two-sided crossing problem, one row per sample.

    Row ``r`` of ``left_gaps`` lists the left gaps from the origin outwards,
    so the left boundary sits at ``-sum(left_gaps[r])``.  That boundary is
    absorbing; the origin and every interior left trap are soft traps, and
    arrival at ``right_gap[r]`` must be survived.
    """
    ns, kk = left_gaps.shape
    out = np.empty(ns)
    ebeta = math.exp(beta)
    c = math.exp(-beta)
    for r in range(ns):
        p = 0.0
        q = 1.0
        ratio = 0.0
        for j in range(kk - 1, -1, -1):
            t = float(left_gaps[r, j])
            d = q - p
            ut = p + t * d
            ut1 = p + (t - 1.0) * d
            ratio = ut1 / ut
            p = 1.0
            q = 2.0 * ebeta - ratio
        t1 = float(right_gap[r])
        denom = 1.0 - 0.5 * c * (1.0 - 1.0 / t1 + ratio)
        out[r] = -beta - math.log(2.0 * t1) - math.log(denom)
    return out


@njit(cache=True)
def ring_log_mass(c, n):
    """Log total mass after each step of the killed walk on a ring.

    The walk starts at site 0 of the ring ``Z / len(c)`` and every step onto
    site ``x`` multiplies the weight by ``c[x]``.  Returns ``log Z_k`` for
    ``k = 0 .. n``.
    """
    p = c.shape[0]
    w = np.zeros(p)
    nw = np.zeros(p)
    w[0] = 1.0
    out = np.empty(n + 1)
    out[0] = 0.0
    ls = 0.0
    for k in range(1, n + 1):
        tot = 0.0
        for x in range(p):
            v = 0.5 * (w[(x - 1) % p] + w[(x + 1) % p]) * c[x]
            nw[x] = v
            tot += v
        for x in range(p):
            w[x] = nw[x] / tot
        ls += math.log(tot)
        out[k] = ls
    return out


@njit(cache=True)
def interval_log_mass(width, n):
    """Log mass of walks from 0 that avoid ``0`` and ``+-width`` for k steps.

    Sites ``-width+1 .. width-1`` except 0 are allowed.  Returns
    ``log P(k)`` for ``k = 0 .. n`` (``-inf`` once the mass vanishes).
    """
    size = 2 * width + 1
    w = np.zeros(size)
    nw = np.zeros(size)
    centre = width
    w[centre] = 1.0
    out = np.empty(n + 1)
    out[0] = 0.0
    ls = 0.0
    for k in range(1, n + 1):
        tot = 0.0
        for i in range(1, size - 1):
            if i == centre:
                nw[i] = 0.0
                continue
            v = 0.5 * (w[i - 1] + w[i + 1])
            nw[i] = v
            tot += v
        nw[centre] = 0.0
        if tot <= 0.0:
            for j in range(k, n + 1):
                out[j] = -np.inf
            return out
        for i in range(size):
            w[i] = nw[i] / tot
        ls += math.log(tot)
        out[k] = ls
    return out
