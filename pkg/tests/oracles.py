"""Independent brute-force references used by the tests.

Nothing here calls into the sliding-window, cover or lattice code paths;
the oracles enumerate outcomes directly.
"""
import itertools
import math
from fractions import Fraction

import numpy as np


def brute_sum_law(a, X):
    """Law of sum_k X_k a_k by enumerating every outcome pattern (d = 1, exact)."""
    atoms = list(X)
    law = {}
    for pattern in itertools.product(atoms, repeat=len(a)):
        s = sum(x[0] * c for (x, _), c in zip(pattern, a))
        w = Fraction(1)
        for _, wx in pattern:
            w *= wx
        law[s] = law.get(s, 0) + w
    return law


def brute_q(law: dict, tau):
    """max mass of [x, x + tau] over x; it is enough to start at an atom."""
    return max(sum(w for y, w in law.items() if x <= y <= x + tau) for x in law)


def brute_beta_r1(xs, ws, tau, m):
    """Mass outside the best tau-neighborhood of a (2L+1)-term AP c + jh.

    Candidate steps are (x_b - x_a - (s_b - s_a) tau) / k for k < 2L+1, with
    phase x_a - s_a tau; every window of 2L+1 consecutive terms through the
    phase is scanned with direct membership tests.  Everything is scaled to
    integers first so the scan is exact.
    """
    L = (m - 1) // 2
    V = 2 * L + 1
    vals = [Fraction(x) for x in xs] + [Fraction(tau)]
    scale = math.lcm(*(v.denominator for v in vals), *range(1, V))
    X = [int(Fraction(x) * scale) for x in xs]
    T = int(Fraction(tau) * scale)
    W = list(ws)
    total = sum(W)
    best = max(sum(w for y, w in zip(X, W) if x <= y <= x + 2 * T) for x in X)
    seen = set()
    for xa in X:
        for xb in X:
            for sa in (-1, 1):
                for sb in (-1, 1):
                    for k in range(1, V):
                        num = xb - xa - (sb - sa) * T
                        if num <= 0:
                            continue
                        h, phase = num // k, xa - sa * T
                        if (h, phase) in seen:
                            continue
                        seen.add((h, phase))
                        for j0 in range(-V + 1, 1):
                            terms = [phase + (j0 + i) * h for i in range(V)]
                            cov = sum(w for y, w in zip(X, W) if any(abs(y - t) <= T for t in terms))
                            if cov > best:
                                best = cov
    return total - best


def midpoint_integral(f, lo, hi, nodes=10**6):
    """Composite midpoint rule with ``nodes`` panels."""
    h = (hi - lo) / nodes
    t = lo + h * (np.arange(nodes) + 0.5)
    return float(np.sum(f(t)) * h)
