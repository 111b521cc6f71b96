"""Outlier-robust fitting of one arithmetic progression to a list of reals."""
from __future__ import annotations

from collections import Counter
from typing import Sequence

from ..errors import InvalidInput
from ..measures import is_exact_number
from ..progressions import CGAP, Box, cover_count
from ._cover import best_shifted_cover


def _as_cgap(cover) -> CGAP:
    if cover.step == 0:
        return CGAP(((1,),), Box((0.5,)), shift=(cover.center,))
    return CGAP(((cover.step,),), Box((cover.half_length + 0.5,)), shift=(cover.center,))


def fit_progression_1d(values: Sequence, tau, m_cap: int, outlier_budget: int = 0):
    """Fit {c + j h : |j| <= L}, 2L + 1 <= m_cap, to ``values`` at tolerance tau.

    Candidates are ranked by (outliers beyond the budget, volume, outliers,
    |h|): outliers up to the budget are free, and the smallest volume that
    stays within budget wins.  Returns ``(cgap, outlier_indices)`` with
    0-based indices in increasing order.
    """
    vals = list(values)
    if not vals:
        raise InvalidInput("nothing to fit")
    if tau < 0 or m_cap < 1 or outlier_budget < 0:
        raise InvalidInput("need tau >= 0, m_cap >= 1 and outlier_budget >= 0")
    if not all(is_exact_number(v) for v in vals) or not is_exact_number(tau):
        vals = [float(v) for v in vals]
        tau = float(tau)
    counts = Counter(vals)
    pts = sorted(counts)
    ws = [counts[p] for p in pts]
    n = len(vals)
    best_key, best_cover = None, None
    for L in range(0, (m_cap - 1) // 2 + 1):
        cover = best_shifted_cover(pts, ws, tau, L)
        out = n - int(cover.covered)
        vol = 1 if cover.step == 0 else 2 * L + 1
        key = (max(out - outlier_budget, 0), vol, out, abs(cover.step))
        if best_key is None or key < best_key:
            best_key, best_cover = key, cover
        if out <= outlier_budget or out == 0:
            break
    K = _as_cgap(best_cover)
    _, outliers = cover_count([(v,) for v in vals], K, tau)
    return K, outliers
