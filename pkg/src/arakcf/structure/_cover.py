"""Exhaustive best-cover search for rank-one progressions on the line.

Two progression classes are searched:

* shifted: ``{c + j h : |j| <= L}`` (any center ``c``);
* centered: ``{j h : |j| <= L}``.

For a point set with weights, the weight inside ``[K]_tau`` is piecewise
constant in the parameters, and every maximal region has a vertex where
two points sit on the boundary of their tau-windows.  Enumerating those
vertices is therefore exhaustive.  On exact input all arithmetic is done
on integers after clearing denominators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import CapExceeded, InvalidInput
from ..measures import is_exact_number

_INT_LIMIT = 2**62
_FLOAT_EPS = 1e-12
_CHUNK = 1 << 21


@dataclass(frozen=True)
class Cover:
    covered: object  # weight inside [K]_tau, exact when the input was
    step: object  # h >= 0 (0 means a single point)
    center: object  # c
    half_length: int  # L

    def contains(self, x, tau) -> bool:
        if self.step == 0:
            return abs(x - self.center) <= tau
        j = round((x - self.center) / self.step)
        j = max(-self.half_length, min(self.half_length, j))
        return any(
            abs(x - self.center - jj * self.step) <= tau
            for jj in (j - 1, j, j + 1)
            if -self.half_length <= jj <= self.half_length
        )


def _to_integers(xs, tau):
    """Scale exact data to integers; returns (ints, tau_int, denominator)."""
    fr = [Fraction(x) for x in xs] + [Fraction(tau)]
    den = math.lcm(*(f.denominator for f in fr))
    X = [int(f * den) for f in fr[:-1]]
    T = int(fr[-1] * den)
    return X, T, den


def _weights(ws):
    if all(is_exact_number(w) for w in ws):
        fr = [Fraction(w) for w in ws]
        den = math.lcm(*(f.denominator for f in fr))
        return np.array([int(f * den) for f in fr], dtype=np.int64), den
    return np.array([float(w) for w in ws], dtype=float), None


def _best_window(xs, ws, width, exact):
    """Heaviest closed interval of length ``width``; returns (weight, center)."""
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    x = [xs[i] for i in order]
    w = [ws[i] for i in order]
    best, best_c = None, None
    j, run = 0, 0
    for i in range(len(x)):
        if j < i:
            j, run = i, 0
        while j < len(x) and (x[j] - x[i] <= width if exact else x[j] - x[i] <= width + _FLOAT_EPS * (1 + abs(x[j]) + width)):
            run += w[j]
            j += 1
        if best is None or run > best:
            best, best_c = run, (Fraction(x[i] + x[j - 1], 2) if exact else (x[i] + x[j - 1]) / 2)
        run -= w[i]
    return best, best_c


def _stab(lo, hi, w, V):
    """Per row: max weight of points whose index range meets a window of V indices.

    ``lo``/``hi`` have shape (C, n); a point is stabbed by window start J
    iff lo - V + 1 <= J <= hi.  Returns (best weight, best J) per row.
    """
    C, n = lo.shape
    valid = lo <= hi
    start = np.where(valid, lo - V + 1, 0)
    end = np.where(valid, hi + 1, 0)
    wv = np.where(valid, w[None, :], 0)
    pos = np.concatenate([start, end], axis=1)
    # ends sort before starts at the same index
    key = pos * 2 + np.concatenate([np.ones_like(start), np.zeros_like(end)], axis=1)
    delta = np.concatenate([wv, -wv], axis=1)
    order = np.argsort(key, axis=1, kind="stable")
    run = np.cumsum(np.take_along_axis(delta, order, axis=1), axis=1)
    arg = np.argmax(run, axis=1)
    best = run[np.arange(C), arg]
    J = np.take_along_axis(pos, order, axis=1)[np.arange(C), arg]
    return best, J


def _shifted_candidates(n, V):
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    mask = a != b
    a, b = a[mask], b[mask]
    ks = np.arange(1, V)
    sa = np.array([-1, -1, 1, 1])
    sb = np.array([-1, 1, -1, 1])
    A = np.repeat(a, len(ks) * 4)
    B = np.repeat(b, len(ks) * 4)
    K = np.tile(np.repeat(ks, 4), len(a))
    SA = np.tile(sa, len(a) * len(ks))
    SB = np.tile(sb, len(a) * len(ks))
    return A, B, K, SA, SB


def best_shifted_cover(xs, ws, tau, L: int, prefer_small_step: bool = True) -> Cover:
    """Best cover of weighted points by {c + j h : |j| <= L} at tolerance tau."""
    if L < 0:
        raise InvalidInput("half length must be nonnegative")
    n = len(xs)
    if n == 0:
        return Cover(0, 0, 0, 0)
    exact = all(is_exact_number(x) for x in xs) and is_exact_number(tau)
    W, wden = _weights(ws)
    V = 2 * L + 1
    if exact:
        X, T, den = _to_integers(xs, tau)
    else:
        X, T, den = [float(x) for x in xs], float(tau), 1
    base_w, base_c = _best_window(X, list(W.tolist()), 2 * T, exact)
    best_w, best = base_w, (0, 1, base_c, None)  # (num, k, phase, J)
    if V >= 2 and n >= 2:
        A, B, K, SA, SB = _shifted_candidates(n, V)
        Xa = np.array(X, dtype=np.int64 if exact else float)
        if exact and (2 * max(abs(x) for x in X) + 4 * abs(T) + 1) * V >= _INT_LIMIT:
            raise CapExceeded("integer range", max(abs(x) for x in X), _INT_LIMIT)
        for s0 in range(0, len(A), max(1, _CHUNK // n)):
            sl = slice(s0, s0 + max(1, _CHUNK // n))
            a, b, k, sa, sb = A[sl], B[sl], K[sl], SA[sl], SB[sl]
            num = Xa[b] - Xa[a] - (sb - sa) * T  # h = num / k
            keep = num > 0
            if not np.any(keep):
                continue
            a, k, sa, num = a[keep], k[keep], sa[keep], num[keep]
            phase = Xa[a] - sa * T
            rel = Xa[None, :] - phase[:, None]
            if exact:
                lo = -((-(rel - T) * k[:, None]) // num[:, None])
                hi = ((rel + T) * k[:, None]) // num[:, None]
            else:
                h = num / k
                eps = _FLOAT_EPS * (1.0 + np.abs(Xa)[None, :] + T)
                lo = np.ceil((rel - T - eps) / h[:, None]).astype(np.int64)
                hi = np.floor((rel + T + eps) / h[:, None]).astype(np.int64)
            cov, J = _stab(lo, hi, W, V)
            top = cov.max()
            if top < best_w:
                continue
            rows = np.nonzero(cov == top)[0]
            if prefer_small_step:
                hs = [Fraction(int(num[r]), int(k[r])) if exact else num[r] / k[r] for r in rows]
                r = rows[min(range(len(rows)), key=lambda i: hs[i])]
            else:
                r = rows[0]
            cand = (num[r], k[r], phase[r], J[r])
            if top > best_w or (prefer_small_step and best[3] is not None and _h(cand, exact) < _h(best, exact)):
                best_w, best = top, cand
    return _finish_shifted(best_w, best, L, exact, den, wden)


def _h(cand, exact):
    num, k = cand[0], cand[1]
    return Fraction(int(num), int(k)) if exact else float(num) / float(k)


def _finish_shifted(best_w, best, L, exact, den, wden):
    num, k, phase, J = best
    covered = Fraction(int(best_w), wden) if wden is not None else float(best_w)
    if J is None:
        c = Fraction(phase) / den if exact else float(phase)
        return Cover(covered, 0, c, 0)
    if exact:
        h = Fraction(int(num), int(k) * den)
        c = Fraction(int(phase), den) + (int(J) + L) * h
    else:
        h = float(num) / float(k)
        c = float(phase) + (int(J) + L) * h
    return Cover(covered, h, c, L)


def best_centered_cover(xs, ws, tau, L: int) -> Cover:
    """Best cover of weighted points by {j h : |j| <= L} at tolerance tau."""
    n = len(xs)
    exact = all(is_exact_number(x) for x in xs) and is_exact_number(tau)
    W, wden = _weights(ws)
    if exact:
        X, T, den = _to_integers(xs, tau)
    else:
        X, T, den = [float(x) for x in xs], float(tau), 1
    Xa = np.abs(np.array(X, dtype=np.int64 if exact else float))
    near0 = Xa <= (T if exact else T + _FLOAT_EPS * (1 + Xa + T))
    base = W[near0].sum() if n else 0
    best_w, best_h = base, None
    if L >= 1 and n:
        js = np.arange(1, L + 1)
        nums = np.concatenate([Xa - T, Xa + T])
        N = np.repeat(nums, L)
        Jd = np.tile(js, 2 * n)
        keep = N > 0
        N, Jd = N[keep], Jd[keep]
        for s0 in range(0, len(N), max(1, _CHUNK // max(n, 1))):
            nm = N[s0 : s0 + max(1, _CHUNK // max(n, 1))]
            jd = Jd[s0 : s0 + max(1, _CHUNK // max(n, 1))]
            if exact:
                lo = -((-(Xa[None, :] - T) * jd[:, None]) // nm[:, None])
                hi = ((Xa[None, :] + T) * jd[:, None]) // nm[:, None]
            else:
                h = nm / jd
                eps = _FLOAT_EPS * (1.0 + Xa[None, :] + T)
                lo = np.ceil((Xa[None, :] - T - eps) / h[:, None])
                hi = np.floor((Xa[None, :] + T + eps) / h[:, None])
            ok = near0[None, :] | (np.maximum(lo, 1) <= np.minimum(hi, L))
            cov = (ok * W[None, :]).sum(axis=1)
            top = cov.max()
            if top < best_w:
                continue
            rows = np.nonzero(cov == top)[0]
            hs = [Fraction(int(nm[r]), int(jd[r])) if exact else nm[r] / jd[r] for r in rows]
            hmin = min(hs)
            if top > best_w or best_h is None or hmin < best_h:
                best_w, best_h = top, hmin
    covered = Fraction(int(best_w), wden) if wden is not None else float(best_w)
    if best_h is None:
        return Cover(covered, 0, 0, 0)
    h = best_h / den if exact else float(best_h)
    return Cover(covered, h, 0, L)
