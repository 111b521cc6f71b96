"""Constructive inverse Littlewood-Offord detection.

Each coordinate of the coefficient vector is fitted by a rank-one
progression at tolerance tau * rho with an outlier budget of n'; the
per-coordinate witnesses are combined into a coordinate-wise product.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from ..calibration import constant
from ..concentration import concentration, exact_sum_distribution, strict_floor
from ..errors import InvalidInput
from ..measures import (
    CoefficientVector,
    DiscreteDistribution,
    encode_number,
    is_exact_number,
    symmetrize,
    tail_mass,
)
from ..progressions import cover_count, points_of, product
from .fit import fit_progression_1d
from .report import BoundTarget, StructureConfig, StructureReport


def coordinate_concentrations(a: CoefficientVector, X: DiscreteDistribution, tau, cap: int, threads: int = 1) -> list:
    """q_j = Q(F_a^(j), tau_j) for every coordinate, computed exactly."""
    taus = list(tau) if isinstance(tau, (list, tuple)) else [tau] * a.d

    def one(j):
        law = exact_sum_distribution(a.coordinate(j + 1), X, cap)
        return concentration(law, taus[j]).value

    if threads > 1 and a.d > 1:
        with ThreadPoolExecutor(max_workers=min(threads, a.d)) as ex:
            return list(ex.map(one, range(a.d)))
    return [one(j) for j in range(a.d)]


def _ratio(x, y):
    """x / y with the convention 0/0 = 1."""
    if x == 0 and y == 0:
        return 1
    if y == 0:
        return math.inf
    if is_exact_number(x) and is_exact_number(y):
        return Fraction(x) / Fraction(y)
    return x / y


def selection_volume(q, rho, n_prime, p1, c1_pow, m_cap: int) -> tuple:
    """m = floor(y) + 1 (strict floor) with y = 4 c1^(r+1) / (rho q sqrt(p(1) n'/4)), capped.

    Returns ``(m, y)``; y is infinite when n' = 0 or p(1) = 0.
    """
    if n_prime == 0 or p1 == 0:
        return m_cap, math.inf
    y = 4.0 * c1_pow / (float(rho) * float(q) * math.sqrt(float(p1) * n_prime / 4.0))
    return max(1, min(m_cap, strict_floor(y) + 1)), y


def inverse_detect(
    a: CoefficientVector,
    X: DiscreteDistribution,
    tau,
    rho=1,
    n_prime: int = 0,
    config: StructureConfig | None = None,
) -> StructureReport:
    """Find a low-volume product progression that most a_k are tau*rho-close to."""
    config = config or StructureConfig()
    if tau < 0:
        raise InvalidInput("tau must be nonnegative")
    if not 0 < rho <= 1:
        raise InvalidInput("rho must lie in (0, 1]")
    if n_prime < 0 or n_prime > a.n:
        raise InvalidInput("n' must lie in 0..n")
    c1_pow = config.c1_pow if config.c1_pow is not None else constant("thm7")
    G = symmetrize(X)
    p1 = tail_mass(G, 1)
    q = coordinate_concentrations(a, X, tau, config.support_cap, config.threads)
    tol = tau * rho if is_exact_number(tau) and is_exact_number(rho) else float(tau) * float(rho)
    caps, ys = [], []
    for qj in q:
        if config.volume_rule == "selection":
            m, y = selection_volume(qj, rho, n_prime, p1, c1_pow, config.m_cap)
        else:
            m, y = config.m_cap, math.inf
        caps.append(m)
        ys.append(y)

    n, d = a.n, a.d
    columns = [[e[j] for e in a.entries] for j in range(d)]
    fits = []
    if config.budget_mode == "shared":
        alive = list(range(n))
        lost: set = set()
        for j in range(d):
            budget = n_prime - len(lost)
            vals = [columns[j][k] for k in alive]
            K, out = fit_progression_1d(vals, tol, caps[j], max(budget, 0))
            dropped = {alive[i] for i in out}
            lost |= dropped
            alive = [k for k in alive if k not in dropped]
            fits.append(K)
    else:
        def one(j):
            return fit_progression_1d(columns[j], tol, caps[j], n_prime)[0]

        if config.threads > 1 and d > 1:
            with ThreadPoolExecutor(max_workers=min(config.threads, d)) as ex:
                fits = list(ex.map(one, range(d)))
        else:
            fits = [one(j) for j in range(d)]

    K = fits[0] if d == 1 else product(fits)
    outliers = _outliers(a, fits, tol)
    covered = n - len(outliers)
    volume = K.volume
    size = len(points_of(K)[0])

    # (n11sp): |K| <= prod_j max(floor(y_j) + 1, 1), the volumes allowed by the selection rule
    target = 1.0
    for y in ys:
        target *= math.inf if not math.isfinite(y) else max(strict_floor(y) + 1, 1)
    bounds = {
        "n11sp": BoundTarget(size, target, c1_pow, degenerate=(p1 == 0)),
        "coverage": BoundTarget(covered, n - d * n_prime, 1.0, lower=True),
    }
    factor = 1 + strict_floor(_ratio(tau, tol))
    details = {
        "q": [encode_number(x) for x in q],
        "p1": encode_number(p1),
        "tolerance": encode_number(tol),
        "volume_caps": caps,
        "selection_y": [encode_number(y) for y in ys],
        "regularity_factor": factor,
        "c1_pow": c1_pow,
        "n_prime": n_prime,
        "rho": encode_number(rho),
        "budget_mode": config.budget_mode,
    }
    return StructureReport(K, K.rank, volume, covered, tuple(outliers), len(outliers), bounds, "nthm8", details)


def _outliers(a: CoefficientVector, fits, tol) -> list:
    bad: set = set()
    for j, K in enumerate(fits):
        _, out = cover_count([(e[j],) for e in a.entries], K, tol)
        bad |= set(out)
    return sorted(bad)
