"""Shared brute-force oracles for the test suite."""

import itertools
import math

import numpy as np


def brute_log_z(gaps, beta, n):
    """Enumerate all 2**n paths; weight 2**-n * exp(-beta * trap visits) if they stay positive."""
    traps = set(np.cumsum(gaps).tolist())
    total = 0.0
    for steps in itertools.product((-1, 1), repeat=n):
        s, visits, ok = 0, 0, True
        for d in steps:
            s += d
            if s <= 0:
                ok = False
                break
            visits += s in traps
        if ok:
            total += math.exp(-beta * visits)
    return math.log(total * 0.5**n) if total > 0 else -math.inf


def killed_chain_hit(gaps, beta, count_arrival=True):
    """P_0(reach the last trap before 0, surviving) by a dense linear solve.

    From site 0 the first step goes to 1 with probability 1/2.  Interior
    states are 1 .. x-1; absorbing at 0 (fail) and x (success).
    """
    x = int(np.sum(gaps))
    traps = set(np.cumsum(gaps).tolist())
    q = math.exp(-beta)
    m = x - 1
    if m == 0:
        return 0.5 * (q if count_arrival else 1.0)
    a = np.eye(m)
    b = np.zeros(m)
    for s in range(1, x):
        i = s - 1
        for nb in (s - 1, s + 1):
            if nb == 0:
                continue
            w = 0.5 * (q if nb in traps and (nb != x or count_arrival) else 1.0)
            if nb == x:
                b[i] += w
            else:
                a[i, nb - 1] -= w
    h = np.linalg.solve(a, b)
    return 0.5 * (q if 1 in traps else 1.0) * h[0]
