"""Concentration functions Q(F, tau) of atomic laws and exact laws of S_a.

Q(F, tau) is the largest mass of a closed Euclidean ball of diameter tau.
In one dimension that ball is a closed interval of length tau, so the value
is exact (sliding window over sorted atoms).  For d >= 2 and tau > 0 a
certified bracket ``lower <= Q <= upper`` is returned instead.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import CapExceeded, InvalidInput
from .measures import (
    DEFAULT_ATOM_CAP,
    MERGE_RTOL,
    CoefficientVector,
    DiscreteDistribution,
    _merge_float_1d,
    _merge_float_nd,
    decode_number,
    encode_number,
    is_exact_number,
    scale_coefficients,
)

SCHEMA = "concentration/v1"

# relative slack used by the float d >= 2 bracket
_BALL_RTOL = 1e-9

__all__ = [
    "ConcentrationResult",
    "Method",
    "concentration",
    "exact_sum_distribution",
    "regularity_factor",
    "scale_coefficients",
    "strict_floor",
    "window_concentration",
]


class Method(str, Enum):
    EXACT_WINDOW = "exact-window"
    BRACKET = "bracket-candidates"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class ConcentrationResult:
    lower: object
    upper: object
    tau: object
    method: Method
    witness_center: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not 0 <= self.lower <= self.upper <= 1 + 1e-12:
            raise InvalidInput(f"bad bracket [{self.lower}, {self.upper}]")
        if self.method is Method.EXACT_WINDOW and self.lower != self.upper:
            raise InvalidInput("exact-window results must have lower == upper")

    @property
    def value(self):
        """The exact value; raises when only a bracket is known."""
        if self.lower != self.upper:
            raise InvalidInput("concentration is only bracketed")
        return self.lower

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "type": "ConcentrationResult",
            "lower": encode_number(self.lower),
            "upper": encode_number(self.upper),
            "tau": encode_number(self.tau),
            "method": self.method.value,
            "witness_center": None
            if self.witness_center is None
            else [encode_number(c) for c in self.witness_center],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConcentrationResult":
        allowed = {"schema", "type", "lower", "upper", "tau", "method", "witness_center"}
        if set(obj) - allowed or obj.get("type") != "ConcentrationResult":
            raise InvalidInput("not a ConcentrationResult")
        wc = obj.get("witness_center")
        return cls(
            decode_number(obj["lower"]),
            decode_number(obj["upper"]),
            decode_number(obj["tau"]),
            Method(obj["method"]),
            None if wc is None else tuple(decode_number(c) for c in wc),
        )


# --------------------------------------------------------------------------
# law of S_a


def _coefficient_order(a: CoefficientVector) -> list[tuple]:
    # identical coefficients first so their supports collapse early
    counts = Counter(a.entries)
    return sorted(a.entries, key=lambda e: (-counts[e], tuple(abs(c) for c in e), e))


def _exact_sum(a: CoefficientVector, X: DiscreteDistribution, cap: int) -> DiscreteDistribution:
    den = math.lcm(*(Fraction(m).denominator for m in X.masses))
    xs = [p[0] for p in X.points]
    cs = [int(Fraction(m) * den) for m in X.masses]
    d = a.d
    if d == 1:
        cur: dict = {0: 1}
        for (ak,) in _coefficient_order(a):
            if len(cur) * len(xs) > cap:
                raise CapExceeded("exact_sum_distribution", len(cur) * len(xs), cap)
            nxt: dict = {}
            for p, c in cur.items():
                for x, ci in zip(xs, cs):
                    q = p + x * ak
                    nxt[q] = nxt.get(q, 0) + c * ci
            cur = nxt
        items = sorted(cur.items())
        pts = [(p,) for p, _ in items]
    else:
        cur = {(0,) * d: 1}
        for ak in _coefficient_order(a):
            if len(cur) * len(xs) > cap:
                raise CapExceeded("exact_sum_distribution", len(cur) * len(xs), cap)
            nxt = {}
            for p, c in cur.items():
                for x, ci in zip(xs, cs):
                    q = tuple(pc + x * ac for pc, ac in zip(p, ak))
                    nxt[q] = nxt.get(q, 0) + c * ci
            cur = nxt
        items = sorted(cur.items())
        pts = [p for p, _ in items]
    total = den ** a.n
    masses = [Fraction(c, total) for _, c in items]
    keep = [(p, m) for p, m in zip(pts, masses) if m > 0]
    return DiscreteDistribution._raw([p for p, _ in keep], [m for _, m in keep], True, d)


def _float_sum(a: CoefficientVector, X: DiscreteDistribution, cap: int) -> DiscreteDistribution:
    xs, ws = X.to_float().as_arrays()
    xs = xs[:, 0]
    d = a.d
    pts = np.zeros((1, d))
    mass = np.ones(1)
    for ak in _coefficient_order(a):
        if len(pts) * len(xs) > cap:
            raise CapExceeded("exact_sum_distribution", len(pts) * len(xs), cap)
        step = np.outer(xs, np.asarray(ak, dtype=float))  # (|X|, d)
        pts = (pts[:, None, :] + step[None, :, :]).reshape(-1, d)
        mass = np.outer(mass, ws).reshape(-1)
        if d == 1:
            p1, mass = _merge_float_1d(pts[:, 0], mass)
            pts = p1[:, None]
        else:
            pts, mass = _merge_float_nd(pts, mass)
    keep = mass > 0
    return DiscreteDistribution._raw(
        [tuple(float(c) for c in p) for p in pts[keep]], [float(m) for m in mass[keep]], False, d
    )


def exact_sum_distribution(
    a: CoefficientVector, X: DiscreteDistribution, support_cap: int = DEFAULT_ATOM_CAP
) -> DiscreteDistribution:
    """Law of S_a = sum_k X_k a_k for i.i.d. scalar X_k ~ X.

    Iterated convolution with merging after each coefficient.  Exact
    (rational) when both ``a`` and ``X`` are exact.
    """
    if X.d != 1:
        raise InvalidInput("X must be one-dimensional")
    if a.exact and X.exact:
        return _exact_sum(a, X, support_cap)
    return _float_sum(a, X, support_cap)


# --------------------------------------------------------------------------
# concentration


def _leq(x, y, exact: bool) -> bool:
    if exact:
        return x <= y
    return x <= y + MERGE_RTOL * (1.0 + max(abs(x), abs(y)))


def window_concentration(xs, ws, tau, exact: bool):
    """Best closed window of length ``tau`` over sorted ``xs``; returns (mass, left end)."""
    best, best_left = None, None
    j = 0
    running = Fraction(0) if exact else 0.0
    n = len(xs)
    # two pointers: window [xs[i], xs[i] + tau]
    for i in range(n):
        if j < i:
            j = i
            running = Fraction(0) if exact else 0.0
        while j < n and _leq(xs[j] - xs[i], tau, exact):
            running += ws[j]
            j += 1
        if best is None or running > best:
            best, best_left = running, xs[i]
        running -= ws[i]
    return best, best_left


def concentration(F: DiscreteDistribution, tau) -> ConcentrationResult:
    """Q(F, tau) = sup_x F(x + tau B), B the closed Euclidean ball of radius 1/2."""
    if tau < 0:
        raise InvalidInput("tau must be nonnegative")
    if tau == 0:
        i = max(range(len(F)), key=lambda k: F.weights[k])
        w = F.weights[i]
        return ConcentrationResult(w, w, tau, Method.EXACT_WINDOW, F.points[i])
    if tau == math.inf:
        return ConcentrationResult(F.total_mass, F.total_mass, tau, Method.EXACT_WINDOW, None)
    if F.d == 1:
        xs = [p[0] for p in F.points]
        if F.exact:
            t = tau if is_exact_number(tau) else Fraction(tau)
            mass, left = window_concentration(xs, F.weights, t, True)
            return ConcentrationResult(min(mass, 1), min(mass, 1), tau, Method.EXACT_WINDOW, (left + t / 2,))
        t = float(tau)
        mass, left = window_concentration(xs, F.weights, t, False)
        return ConcentrationResult(min(mass, 1.0), min(mass, 1.0), tau, Method.EXACT_WINDOW, (left + t / 2,))
    return _bracket(F, tau)


def _ball_tests(F: DiscreteDistribution, tau):
    """Return ``(inner, outer)``: functions mapping a block of candidate
    centers to boolean membership matrices.

    ``inner(centers2)`` tests ||y - c|| <= tau/2 for doubled centers
    ``centers2 = 2c``; ``outer(idx)`` tests ||y - x_i|| <= tau around atoms.
    Exact laws with exact tau are tested in integer arithmetic; float laws
    use a relative slack that keeps ``inner`` conservative and ``outer``
    generous, so the bracket stays certified.
    """
    if F.exact and is_exact_number(tau):
        L = math.lcm(*(Fraction(c).denominator for p in F.points for c in p))
        t = Fraction(tau)
        big = max((abs(Fraction(c) * L) for p in F.points for c in p), default=0)
        dtype = np.int64 if (4 * big) ** 2 * F.d * t.denominator**2 < 2**62 else object
        P = np.array([[int(Fraction(c) * L) for c in p] for p in F.points], dtype=dtype)
        rhs = (L * t.numerator) ** 2
        q2 = t.denominator**2

        def inner(C2):
            diff = 2 * P[None, :, :] - C2[:, None, :]
            return q2 * (diff * diff).sum(axis=2) <= rhs

        def outer(idx):
            diff = P[None, :, :] - P[idx][:, None, :]
            return q2 * (diff * diff).sum(axis=2) <= rhs

        def doubled_centers(i, j):
            return P[i] + P[j]

        return P, inner, outer, doubled_centers
    pts, _ = F.as_arrays()
    t = float(tau)

    def inner(C2):
        d2 = ((2 * pts[None, :, :] - C2[:, None, :]) ** 2).sum(axis=2)
        return d2 <= t * t * (1 - _BALL_RTOL)

    def outer(idx):
        d2 = ((pts[None, :, :] - pts[idx][:, None, :]) ** 2).sum(axis=2)
        return d2 <= t * t * (1 + _BALL_RTOL)

    def doubled_centers(i, j):
        return pts[i] + pts[j]

    return pts, inner, outer, doubled_centers


def _bracket(F: DiscreteDistribution, tau) -> ConcentrationResult:
    P, inner, outer, doubled_centers = _ball_tests(F, tau)
    k = len(F)
    zero = Fraction(0) if F.exact else 0.0
    wts = np.array([float(w) for w in F.weights])
    chunk = max(1, 1_000_000 // max(k, 1))

    def mass_of(mask):
        return sum((F.weights[i] for i in np.nonzero(mask)[0]), zero)

    # pairs that fit together in a ball of diameter tau
    close_pairs = []
    all_idx = np.arange(k)
    for s in range(0, k, chunk):
        idx = all_idx[s : s + chunk]
        hit = outer(idx)
        for r, i in enumerate(idx):
            for j in np.nonzero(hit[r])[0]:
                if j > i:
                    close_pairs.append((i, j))

    best_lower, best_center = zero, None
    cand_i = np.concatenate([all_idx, np.array([p[0] for p in close_pairs], dtype=int)])
    cand_j = np.concatenate([all_idx, np.array([p[1] for p in close_pairs], dtype=int)])
    for s in range(0, len(cand_i), chunk):
        C2 = doubled_centers(cand_i[s : s + chunk], cand_j[s : s + chunk])
        inside = inner(C2)
        arg = int(np.argmax(inside.astype(float) @ wts))
        m = mass_of(inside[arg])
        if best_center is None or m > best_lower:
            pi, pj = F.points[cand_i[s + arg]], F.points[cand_j[s + arg]]
            best_lower, best_center = m, tuple(
                (Fraction(x + y) / 2 if F.exact else (x + y) / 2) for x, y in zip(pi, pj)
            )

    # a ball of diameter tau containing atom x lies in the ball of radius tau around x
    best_upper = zero
    for s in range(0, k, chunk):
        inside = outer(all_idx[s : s + chunk])
        arg = int(np.argmax(inside.astype(float) @ wts))
        best_upper = max(best_upper, mass_of(inside[arg]))
    best_upper = min(best_upper, 1)
    best_lower = min(best_lower, best_upper)
    return ConcentrationResult(best_lower, best_upper, tau, Method.BRACKET, best_center)


# --------------------------------------------------------------------------
# regularity


def strict_floor(x) -> int:
    """Largest integer k with k < x (so strict_floor(2) == 1)."""
    return math.ceil(x) - 1


def regularity_factor(mu, lam, d: int) -> int:
    """(1 + floor(mu/lam))^d with the strict floor."""
    if not lam > 0:
        raise InvalidInput("lambda must be positive")
    if not mu > 0:
        raise InvalidInput("mu must be positive")
    if d < 1:
        raise InvalidInput("dimension must be >= 1")
    ratio = Fraction(mu) / Fraction(lam) if is_exact_number(mu) and is_exact_number(lam) else mu / lam
    return (1 + strict_floor(ratio)) ** d
