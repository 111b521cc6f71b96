"""Mass left outside the best low-rank progression, and the Arak bound."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..concentration import strict_floor
from ..errors import CapExceeded, InvalidInput
from ..measures import SpectralMeasure, decode_number, encode_number, is_exact_number
from ..progressions import CGAP, Box, distances, progression_from_json, within
from ._cover import best_centered_cover, best_shifted_cover

SCHEMA = "structure/v1"
SUPPORT_CAP = 64
DENOM_CAP = 10**6


@dataclass(frozen=True)
class BetaResult:
    """``upper`` is W-mass outside ``[witness]_tau``; exact only on the rank-one rational path."""

    upper: object
    witness: CGAP
    exact: bool
    r: int
    m: int
    tau: object

    def __post_init__(self):
        if self.upper < 0:
            raise InvalidInput("negative outside mass")

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "type": "BetaResult",
            "upper": encode_number(self.upper),
            "witness": self.witness.to_json(),
            "exact": self.exact,
            "r": self.r,
            "m": self.m,
            "tau": encode_number(self.tau),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BetaResult":
        if obj.get("schema") != SCHEMA or obj.get("type") != "BetaResult":
            raise InvalidInput("not a structure/v1 BetaResult")
        return cls(
            decode_number(obj["upper"]),
            progression_from_json(obj["witness"]),
            bool(obj["exact"]),
            int(obj["r"]),
            int(obj["m"]),
            decode_number(obj["tau"]),
        )


def _support_1d(W: SpectralMeasure):
    if W.d != 1:
        raise InvalidInput("beta is defined for one-dimensional measures")
    return [p[0] for p in W.points], list(W.weights)


def _rationalize(xs, tau):
    """Exact copies of the support and tau; floats must be short rationals."""
    out = []
    for x in list(xs) + [tau]:
        if is_exact_number(x):
            out.append(Fraction(x))
            continue
        f = Fraction(float(x)).limit_denominator(DENOM_CAP)
        if abs(float(f) - float(x)) > 1e-13 * (1.0 + abs(float(x))):
            raise CapExceeded("rational denominator", DENOM_CAP + 1, DENOM_CAP)
        out.append(f)
    return out[:-1], out[-1]


def _witness(cover, L) -> CGAP:
    if cover.step == 0:
        return CGAP(((1,),), Box((0.5,)), shift=(cover.center,))
    return CGAP(((cover.step,),), Box((L + 0.5,)), shift=(cover.center,))


def beta_exact_r1(W: SpectralMeasure, m: int, tau, shifted: bool = True) -> BetaResult:
    """Exact beta over rank-one progressions of volume <= m.

    ``shifted=True`` searches translated progressions {c + j h : |j| <= L};
    ``shifted=False`` restricts to centered ones {j h : |j| <= L}.
    """
    if m < 1:
        raise InvalidInput("m must be >= 1")
    if tau < 0:
        raise InvalidInput("tau must be nonnegative")
    xs, ws = _support_1d(W)
    if len(xs) > SUPPORT_CAP:
        raise CapExceeded("support size", len(xs), SUPPORT_CAP)
    xs, t = _rationalize(xs, tau)
    ws = [w if is_exact_number(w) else Fraction(float(w)).limit_denominator(DENOM_CAP) for w in ws]
    L = (m - 1) // 2
    cover = best_shifted_cover(xs, ws, t, L) if shifted else best_centered_cover(xs, ws, t, L)
    total = sum(ws, Fraction(0))
    return BetaResult(total - cover.covered, _witness(cover, L), True, 1, m, tau)


def _box_shapes(r: int, m: int):
    """Maximal half-length vectors with prod(2 L_j + 1) <= m."""
    shapes = []
    ranges = [range(0, (m - 1) // 2 + 1)] * r
    for Ls in itertools.product(*ranges):
        if math.prod(2 * l + 1 for l in Ls) > m:
            continue
        if any(math.prod(2 * (l + (i == j)) + 1 for i, l in enumerate(Ls)) <= m for j in range(r)):
            continue
        shapes.append(Ls)
    return shapes


def _outside(xs, ws, tau, K) -> float:
    dist = distances([(x,) for x in xs], K)
    ok = within(dist, float(tau), np.abs(np.asarray(xs, dtype=float)))
    return float(np.sum(np.asarray(ws, dtype=float)[~ok]))


def beta_upper(
    W: SpectralMeasure,
    r: int,
    m: int,
    tau,
    budget: int = 20000,
    seed: int = 0,
    shifted: bool = False,
) -> BetaResult:
    """Upper bound on beta_{r,m}(W, tau) from an explicit witness.

    The rank-one optimum (exhaustive) is always a candidate, since a rank-r
    body with flat extra directions has the same lattice points.  For r >= 2
    generator tuples drawn from rank-one step candidates are tried over all
    maximal box shapes, up to ``budget`` evaluations.
    """
    if r < 1 or m < 1:
        raise InvalidInput("r and m must be >= 1")
    if tau < 0:
        raise InvalidInput("tau must be nonnegative")
    xs, ws = _support_1d(W)
    total = W.total_mass
    if len(xs) == 0:
        return BetaResult(0, CGAP(((1,),), Box((0.5,))), False, r, m, tau)
    if max(abs(float(x)) for x in xs) <= float(tau):
        return BetaResult(0, CGAP(((1,),), Box((0.5,))), False, r, m, tau)
    L = (m - 1) // 2
    try:
        if len(xs) > SUPPORT_CAP:
            raise CapExceeded("support size", len(xs), SUPPORT_CAP)
        cover = best_shifted_cover(xs, ws, tau, L) if shifted else best_centered_cover(xs, ws, tau, L)
        best = (total - cover.covered, _witness(cover, L))
    except CapExceeded:
        best = (total - W.mass_where(lambda p: abs(p[0]) <= tau), CGAP(((1,),), Box((0.5,))))
    if r >= 2:
        if r > 3:
            raise InvalidInput("the heuristic path supports r <= 3")
        best = _search_rank(xs, ws, total, r, m, tau, budget, seed, best, shifted)
    upper, wit = best
    if not is_exact_number(upper):
        upper = max(float(upper), 0.0)
    return BetaResult(upper, wit, False, r, m, tau)


def _step_pool(xs, tau, m, cap=64):
    t = float(tau)
    pool = set()
    for x in xs:
        ax = abs(float(x))
        for j in range(1, max(2, (m - 1) // 2 + 1)):
            for v in (ax, ax - t, ax + t):
                if v > 0:
                    pool.add(v / j)
    return sorted(pool)[: cap * 4]


def _search_rank(xs, ws, total, r, m, tau, budget, seed, best, shifted):
    rng = np.random.default_rng(seed)
    pool = _step_pool(xs, tau, m)
    shapes = [s for s in _box_shapes(r, m) if sum(l > 0 for l in s) >= 2]
    if not pool or not shapes:
        return best
    combos = math.comb(len(pool), r) * len(shapes)
    if combos <= budget:
        tuples = [(g, s) for g in itertools.combinations(pool, r) for s in shapes]
    else:
        tuples = []
        for _ in range(budget):
            idx = sorted(rng.choice(len(pool), size=r, replace=False))
            tuples.append((tuple(pool[i] for i in idx), shapes[rng.integers(len(shapes))]))
    centers = [0.0] if not shifted else sorted({float(x) for x in xs})
    best_out, best_k = best
    best_out = float(best_out)
    for gens, Ls in tuples:
        for c in centers:
            K = CGAP(tuple((g,) for g in gens), Box(tuple(l + 0.5 for l in Ls)), shift=(c,))
            out = _outside(xs, ws, tau, K)
            if out < best_out - 1e-15:
                best_out, best_k = out, K
    return best_out, best_k


def arak_rhs(alpha_beta, r: int, m: int, c, kappa=None, delta=None) -> float:
    """c^(r+1) (1/(m sqrt(ab)) + (r+1)^(5r/2) / ab^((r+1)/2)), times (1 + floor(kappa/delta)) if given.

    The floor is the strict one: the largest integer strictly below.
    """
    ab = float(alpha_beta)
    if not ab > 0:
        raise InvalidInput("alpha * beta must be positive")
    if r < 1 or m < 1 or not c > 0:
        raise InvalidInput("need r, m >= 1 and c > 0")
    val = float(c) ** (r + 1) * (1.0 / (m * math.sqrt(ab)) + (r + 1) ** (2.5 * r) / ab ** ((r + 1) / 2))
    if kappa is not None or delta is not None:
        if kappa is None or delta is None or not kappa > 0 or not delta > 0:
            raise InvalidInput("kappa and delta must both be positive")
        val *= 1 + strict_floor(Fraction(kappa) / Fraction(delta) if is_exact_number(kappa) and is_exact_number(delta) else kappa / delta)
    return val
