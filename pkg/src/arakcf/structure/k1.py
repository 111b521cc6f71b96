"""Signed-cube structure reports: greedy growth of K_1(u) per coordinate.

For each coordinate j the one-dimensional projection of the relevant
measure is covered by ``[K_1(u^(j))]_{delta_j}``; every step adds the
element u that covers the most residual mass.  Given the current cube K,
a residual point x is covered by the new cube iff u lies within delta of
``x - y`` or ``y - x`` for some y in K, so the best u is found by sweeping
those intervals and counting each point once.
"""
from __future__ import annotations

import math

import numpy as np

from ..calibration import constant
from ..charfn import esseen_integral, lattice_masses
from ..concentration import concentration, exact_sum_distribution
from ..errors import CapExceeded, InvalidInput, NonLatticeError
from ..measures import (
    MERGE_RTOL,
    CoefficientVector,
    CompoundPoissonSpec,
    DiscreteDistribution,
    SpectralMeasure,
    coordinate_projection,
    encode_number,
    spectral_measures,
    symmetrize,
    tail_mass,
)
from ..progressions import SignedCube, points_of, product
from .detect import _ratio, coordinate_concentrations
from .report import BoundTarget, StructureConfig, StructureReport


def _tol(x, delta):
    return MERGE_RTOL * (1.0 + np.abs(x) + delta)


def _residual_mask(xs, K, delta):
    s = np.sort(K)
    i = np.searchsorted(s, xs)
    left = np.abs(xs - s[np.clip(i - 1, 0, len(s) - 1)])
    right = np.abs(s[np.clip(i, 0, len(s) - 1)] - xs)
    return np.minimum(left, right) > delta + _tol(xs, delta)


def _best_step(xs, ws, K, delta):
    """u > 0 maximizing the residual weight newly within delta of K + u or K - u."""
    diffs = np.concatenate([xs[:, None] - K[None, :], K[None, :] - xs[:, None]], axis=1)
    labels = np.repeat(np.arange(len(xs)), diffs.shape[1])
    diffs = diffs.reshape(-1)
    eps = _tol(diffs, delta)
    lo, hi = diffs - delta - eps, diffs + delta + eps
    keep = hi > 0
    lo, hi, labels = lo[keep], hi[keep], labels[keep]
    if len(lo) == 0:
        return None, 0.0
    pos = np.concatenate([lo, hi])
    kind = np.concatenate([np.zeros(len(lo), dtype=int), np.ones(len(hi), dtype=int)])  # starts first
    lab = np.concatenate([labels, labels])
    order = np.lexsort((kind, pos))
    active = np.zeros(len(xs), dtype=int)
    run, best, best_at = 0.0, -1.0, None
    slack = 1e-12 * float(ws.sum())
    pos_s, kind_s, lab_s = pos[order], kind[order], lab[order]
    for idx in range(len(order)):
        l = lab_s[idx]
        if kind_s[idx] == 0:
            if active[l] == 0:
                run += ws[l]
            active[l] += 1
            if run > best + slack:
                best = run
                nxt = pos_s[idx + 1] if idx + 1 < len(order) else pos_s[idx]
                best_at = (pos_s[idx], nxt)
        else:
            active[l] -= 1
            if active[l] == 0:
                run -= ws[l]
    a, b = best_at
    u = 0.5 * (a + b)
    # stay on the data when delta = 0 so exact lattices stay exact
    if delta == 0:
        u = float(diffs[np.argmin(np.abs(diffs - u))])
    if u <= 0:
        u = max(b, 0.0)
    return u, best


def grow_signed_cube(points, weights, delta, rank_cap: int, residual_target: float = 0.0):
    """Greedy u = (u_1, ..., u_r) for one coordinate.

    Returns ``(u, residual_weight, residual_mask)``; r is at least 1 (u = (0,)
    when nothing needs covering).
    """
    xs = np.asarray([float(p) for p in points], dtype=float)
    ws = np.asarray([float(w) for w in weights], dtype=float)
    delta = float(delta)
    K = np.zeros(1)
    u: list[float] = []
    res = _residual_mask(xs, K, delta) if len(xs) else np.zeros(0, dtype=bool)
    while res.any() and float(ws[res].sum()) > residual_target and len(u) < rank_cap:
        step, gain = _best_step(xs[res], ws[res], K, delta)
        if step is None or gain <= 0:
            break
        u.append(float(step))
        K = np.unique(np.concatenate([K - step, K, K + step]))
        res = _residual_mask(xs, K, delta)
    if not u:
        u = [0.0]
    return tuple(u), float(ws[res].sum()) if len(xs) else 0.0, res


def _log_term(gamma, tau, delta) -> float:
    """|log gamma| + log(tau/delta) + 1 with 0/0 = 1."""
    r = _ratio(tau, delta)
    lg = abs(math.log(float(gamma))) if gamma > 0 else math.inf
    return lg + (math.log(float(r)) if math.isfinite(r) else math.inf) + 1.0


def _validate(tau, delta, d):
    tau, delta = list(tau), list(delta)
    if len(tau) != d or len(delta) != d:
        raise InvalidInput(f"need {d} values of tau and delta")
    if any(not t >= dl >= 0 for t, dl in zip(tau, delta)):
        raise InvalidInput("need tau_j >= delta_j >= 0")
    return tau, delta


def _k1_core(measure: SpectralMeasure, factor, gammas, tau, delta, config: StructureConfig):
    d = measure.d
    logs = [_log_term(g, t, dl) for g, t, dl in zip(gammas, tau, delta)]
    cubes, ranks, caps = [], [], []
    for j in range(d):
        proj = coordinate_projection(measure, j + 1)
        cap = config.max_rank if not math.isfinite(logs[j]) else max(1, min(config.max_rank, math.ceil(config.rank_constant * logs[j])))
        u, _, _ = grow_signed_cube([p[0] for p in proj.points], proj.weights, delta[j], cap, config.residual_target)
        cubes.append(SignedCube(tuple((x,) for x in u)))
        ranks.append(len(u))
        caps.append(cap)
    cube = cubes[0] if d == 1 else product(cubes)
    inside = _inside(measure.points, cubes, delta)
    residual = float(factor) * float(sum(float(w) for w, ok in zip(measure.weights, inside) if not ok))
    R = sum(ranks)
    c_rank = config.c_rank if config.c_rank is not None else constant("nthm4-shape")
    c_res = config.c_residual if config.c_residual is not None else constant("nthm4-residual")
    degenerate = float(factor) == 0
    bounds = {
        "n1ss65": BoundTarget(R, c_rank * sum(logs), c_rank),
        "n1ss68d": BoundTarget(residual, c_res * sum(l**3 for l in logs), c_res, degenerate=degenerate),
    }
    details = {
        "gamma": [encode_number(float(g)) for g in gammas],
        "log_terms": [encode_number(x) for x in logs],
        "ranks": ranks,
        "rank_caps": caps,
        "tail_factor": encode_number(float(factor)),
        "degenerate": degenerate,
        "u": [[encode_number(x[0]) for x in c.u] for c in cubes],
    }
    return cube, R, residual, bounds, details, cubes


def _inside(points, cubes, delta):
    ok = np.ones(len(points), dtype=bool)
    for j, c in enumerate(cubes):
        K = np.asarray([p[0] for p in points_of(c)[0]], dtype=float)
        xs = np.asarray([float(p[j]) for p in points], dtype=float)
        ok &= ~_residual_mask(xs, K, float(delta[j]))
    return ok


def k1_structure_report(
    a: CoefficientVector,
    X: DiscreteDistribution,
    tau,
    delta,
    config: StructureConfig | None = None,
) -> StructureReport:
    """Signed-cube report for the coefficient vector ``a``.

    The residual is p * M*-mass outside the product neighborhood, with
    p = p(1) in general and p = p(0) when every tau_j is zero.
    """
    config = config or StructureConfig()
    tau, delta = _validate(tau, delta, a.d)
    zero_path = all(t == 0 for t in tau)
    G = symmetrize(X)
    p = tail_mass(G, 0 if zero_path else 1)
    gammas = coordinate_concentrations(a, X, tau, config.support_cap, config.threads)
    mstar, _, _ = spectral_measures(a)
    cube, R, residual, bounds, details, cubes = _k1_core(mstar, p, gammas, tau, delta, config)
    inside = _inside(a.entries, cubes, delta)
    outliers = [k for k in range(a.n) if not inside[k]]
    details["p"] = encode_number(p)
    details["p_variant"] = "p(0)" if zero_path else "p(1)"
    return StructureReport(cube, R, 3**R, a.n - len(outliers), tuple(outliers), residual, bounds, "thm55" if zero_path else "nthm4", details)


def _cp_coordinate_gamma(spec: CompoundPoissonSpec, j: int, tau_j) -> float:
    proj = coordinate_projection(spec, j)
    try:
        law, _ = lattice_masses(proj)
        return float(concentration(law, float(tau_j)).value)
    except (NonLatticeError, CapExceeded):
        if tau_j == 0:
            raise InvalidInput("Q(D, 0) needs a lattice Levy measure")
        return float(esseen_integral(proj, float(tau_j)).value)


def k1_report_compound_poisson(spec: CompoundPoissonSpec, tau, delta, config: StructureConfig | None = None) -> StructureReport:
    """Report for an infinitely divisible D with Levy measure alpha W.

    Residual is alpha W-mass outside the product neighborhood; coverage is
    counted over the atoms of W.
    """
    config = config or StructureConfig()
    tau, delta = _validate(tau, delta, spec.d)
    gammas = [_cp_coordinate_gamma(spec, j + 1, tau[j]) for j in range(spec.d)]
    cube, R, residual, bounds, details, cubes = _k1_core(spec.levy, 1.0, gammas, tau, delta, config)
    inside = _inside(spec.levy.points, cubes, delta)
    outliers = [k for k in range(len(spec.levy)) if not inside[k]]
    return StructureReport(cube, R, 3**R, len(spec.levy) - len(outliers), tuple(outliers), residual, bounds, "thm11", details)


def k1_report_iid(F: DiscreteDistribution, n: int, tau, delta, config: StructureConfig | None = None) -> StructureReport:
    """Report for the n-fold convolution of F: residual is n F-mass outside."""
    config = config or StructureConfig()
    if n < 1:
        raise InvalidInput("n must be >= 1")
    tau, delta = _validate(tau, delta, F.d)
    ones = CoefficientVector.of([1] * n)
    gammas = []
    for j in range(F.d):
        law = exact_sum_distribution(ones, coordinate_projection(F, j + 1), config.support_cap)
        gammas.append(concentration(law, tau[j]).value)
    measure = SpectralMeasure._raw(F.points, F.weights, F.exact, F.d)
    cube, R, residual, bounds, details, cubes = _k1_core(measure, n, gammas, tau, delta, config)
    inside = _inside(F.points, cubes, delta)
    outliers = [k for k in range(len(F)) if not inside[k]]
    return StructureReport(cube, R, 3**R, len(F) - len(outliers), tuple(outliers), residual, bounds, "t2", details)
