"""Characteristic functions, Esseen integrals and compound Poisson oracles.

Two independent routes to the law of a symmetric compound Poisson
distribution live here and are cross-checked by the test-suite:

* :func:`lattice_masses` / :func:`lattice_inversion` - Fourier inversion on
  the integer lattice (trapezoidal rule on the torus, i.e. an FFT);
* :func:`compound_poisson_exact` - the Poisson series
  ``sum_k e^-L L^k / k! W^{*k}`` built by explicit convolution.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import poisson

from .concentration import concentration, regularity_factor
from .errors import CapExceeded, InvalidInput, NonLatticeError, QuadratureError
from .measures import (
    DEFAULT_ATOM_CAP,
    CoefficientVector,
    CompoundPoissonSpec,
    DiscreteDistribution,
    SpectralMeasure,
    _merge_float_1d,
    _merge_float_nd,
    decode_number,
    encode_number,
    is_exact_number,
    symmetrize,
    tail_mass,
)

SCHEMA = "charfn/v1"
DENOM_CAP = 10**6
GAUSS_ORDER = 16
MAX_PANELS = 400_000
FFT_GRID_CAP = 1 << 24

_GL_NODES, _GL_WEIGHTS = leggauss(GAUSS_ORDER)


@dataclass(frozen=True)
class EsseenEstimate:
    value: float
    quadrature_error: float
    tau: float
    panels: int

    def __post_init__(self):
        if self.value < 0 or self.quadrature_error < 0:
            raise InvalidInput("Esseen estimate must be nonnegative")

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "type": "EsseenEstimate",
            "value": self.value,
            "quadrature_error": self.quadrature_error,
            "tau": encode_number(self.tau),
            "panels": self.panels,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EsseenEstimate":
        if set(obj) - {"schema", "type", "value", "quadrature_error", "tau", "panels"} or obj.get("type") != "EsseenEstimate":
            raise InvalidInput("not an EsseenEstimate")
        return cls(float(obj["value"]), float(obj["quadrature_error"]), decode_number(obj["tau"]), int(obj["panels"]))


@dataclass(frozen=True)
class HConcentration:
    """Q(H_z^lam, kappa) together with how it was obtained."""

    value: float
    lower: float
    upper: float
    path: str  # "degenerate" | "inversion" | "esseen"
    error: float
    kappa: float

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "type": "HConcentration",
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "path": self.path,
            "error": self.error,
            "kappa": encode_number(self.kappa),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "HConcentration":
        keys = {"schema", "type", "value", "lower", "upper", "path", "error", "kappa"}
        if set(obj) - keys or obj.get("type") != "HConcentration":
            raise InvalidInput("not an HConcentration")
        return cls(
            float(obj["value"]), float(obj["lower"]), float(obj["upper"]), obj["path"], float(obj["error"]), decode_number(obj["kappa"])
        )


# --------------------------------------------------------------------------
# characteristic functions


def _as_t_array(t, d: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    scalar = False
    if arr.ndim == 0:
        if d != 1:
            raise InvalidInput("scalar t needs d == 1")
        arr = arr.reshape(1, 1)
        scalar = True
    elif arr.ndim == 1:
        if d == 1:
            arr = arr.reshape(-1, 1)
        elif arr.shape[0] == d:
            arr = arr.reshape(1, d)
            scalar = True
        else:
            raise InvalidInput("t has the wrong dimension")
    if arr.shape[-1] != d:
        raise InvalidInput("t has the wrong dimension")
    return arr, scalar


def _cf_func(obj):
    """Vectorized characteristic function of ``obj`` on arrays of shape (N, d)."""
    if isinstance(obj, CompoundPoissonSpec):
        pts, ws = obj.levy.as_arrays()
        if len(ws) == 0:
            return lambda T: np.ones(len(T))
        return lambda T: np.exp((np.cos(T @ pts.T) - 1.0) @ ws)
    if isinstance(obj, DiscreteDistribution):
        pts, ws = obj.as_arrays()
        if obj.is_symmetric():
            return lambda T: np.cos(T @ pts.T) @ ws
        return lambda T: np.exp(1j * (T @ pts.T)) @ ws
    raise InvalidInput(f"no characteristic function for {type(obj).__name__}")


def cf_eval(obj, t, z: float = 1.0):
    """Characteristic function of ``obj`` at ``z * t``.

    ``obj`` is a DiscreteDistribution (finite Fourier sum) or a
    CompoundPoissonSpec (``exp(sum w (cos<t,x> - 1))``, real and positive).
    ``t`` may be one point or an array of points; arrays give arrays back.
    """
    T, scalar = _as_t_array(t, obj.d)
    out = _cf_func(obj)(T * float(z))
    return out[0] if scalar else out


def hat_H(a: CoefficientVector, t, z: float = 1.0, lam: float = 1.0):
    """exp(-(lam/2) sum_k (1 - cos(<t, a_k> z)))."""
    A = a.to_array()
    T, scalar = _as_t_array(t, a.d)
    out = np.exp(-0.5 * float(lam) * (1.0 - np.cos((T @ A.T) * float(z))).sum(axis=1))
    return out[0] if scalar else out


def _max_frequency(obj) -> float:
    if isinstance(obj, CompoundPoissonSpec):
        return obj.levy.max_abs()
    return obj.max_abs()


# --------------------------------------------------------------------------
# Esseen integral


def _abs_cf(obj):
    cf = _cf_func(obj)
    d = obj.d

    def f(T):
        return np.abs(cf(np.asarray(T, dtype=float).reshape(-1, d)))

    return f


def _gauss_1d(f, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    half = (hi - lo) / 2.0
    mid = (hi + lo) / 2.0
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = f(nodes.reshape(-1)).reshape(nodes.shape)
    return half * (vals @ _GL_WEIGHTS)


def _adaptive_1d(f, a: float, b: float, tol: float, freq: float, max_panels: int):
    width = b - a
    n0 = max(1, int(math.ceil(width * max(freq, 1e-300) / math.pi)))
    n0 = min(n0, max_panels)
    edges = np.linspace(a, b, n0 + 1)
    lo, hi = edges[:-1], edges[1:]
    done_vals, done_errs, done_lo = [], [], []
    panels = n0
    while len(lo):
        mid = (lo + hi) / 2.0
        coarse = _gauss_1d(f, lo, hi)
        fine = _gauss_1d(f, lo, mid) + _gauss_1d(f, mid, hi)
        err = np.abs(fine - coarse)
        ok = err <= tol * (hi - lo) / width
        done_vals.append(fine[ok])
        done_errs.append(err[ok])
        done_lo.append(lo[ok])
        bad = ~ok
        if bad.any():
            panels += int(bad.sum())
            if panels > max_panels:
                raise QuadratureError(f"tolerance {tol:g} unreachable within {max_panels} panels")
            lo = np.concatenate([lo[bad], mid[bad]])
            hi = np.concatenate([mid[bad], hi[bad]])
        else:
            break
    vals = np.concatenate(done_vals)
    errs = np.concatenate(done_errs)
    order = np.argsort(np.concatenate(done_lo), kind="stable")
    return math.fsum(vals[order]), math.fsum(errs[order]), panels


def _gauss_2d(f, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    half = (hi - lo) / 2.0  # (P, 2)
    mid = (hi + lo) / 2.0
    gx = mid[:, None, 0] + half[:, None, 0] * _GL_NODES[None, :]
    gy = mid[:, None, 1] + half[:, None, 1] * _GL_NODES[None, :]
    X = np.repeat(gx[:, :, None], GAUSS_ORDER, axis=2)
    Y = np.repeat(gy[:, None, :], GAUSS_ORDER, axis=1)
    pts = np.stack([X.reshape(-1), Y.reshape(-1)], axis=1)
    vals = f(pts).reshape(len(lo), GAUSS_ORDER, GAUSS_ORDER)
    w2 = np.outer(_GL_WEIGHTS, _GL_WEIGHTS)
    return half[:, 0] * half[:, 1] * np.einsum("pij,ij->p", vals, w2)


def _adaptive_2d(f, a: float, b: float, tol: float, freq: float, max_panels: int):
    width = b - a
    n0 = max(1, int(math.ceil(width * max(freq, 1e-300) / math.pi)))
    n0 = min(n0, int(math.sqrt(max_panels)))
    edges = np.linspace(a, b, n0 + 1)
    gx, gy = np.meshgrid(edges[:-1], edges[:-1], indexing="ij")
    hx, hy = np.meshgrid(edges[1:], edges[1:], indexing="ij")
    lo = np.stack([gx.reshape(-1), gy.reshape(-1)], axis=1)
    hi = np.stack([hx.reshape(-1), hy.reshape(-1)], axis=1)
    area = width * width
    vals_out, errs_out, keys = [], [], []
    panels = len(lo)
    while len(lo):
        mid = (lo + hi) / 2.0
        quads = [
            (lo, mid),
            (np.stack([mid[:, 0], lo[:, 1]], 1), np.stack([hi[:, 0], mid[:, 1]], 1)),
            (np.stack([lo[:, 0], mid[:, 1]], 1), np.stack([mid[:, 0], hi[:, 1]], 1)),
            (mid, hi),
        ]
        coarse = _gauss_2d(f, lo, hi)
        fine = sum(_gauss_2d(f, ql, qh) for ql, qh in quads)
        err = np.abs(fine - coarse)
        cell = (hi[:, 0] - lo[:, 0]) * (hi[:, 1] - lo[:, 1])
        ok = err <= tol * cell / area
        vals_out.append(fine[ok])
        errs_out.append(err[ok])
        keys.append(lo[ok])
        bad = ~ok
        if not bad.any():
            break
        panels += 3 * int(bad.sum())
        if panels > max_panels:
            raise QuadratureError(f"tolerance {tol:g} unreachable within {max_panels} panels")
        lo = np.concatenate([q[0][bad] for q in quads])
        hi = np.concatenate([q[1][bad] for q in quads])
    vals = np.concatenate(vals_out)
    errs = np.concatenate(errs_out)
    k = np.concatenate(keys)
    order = np.lexsort((k[:, 1], k[:, 0]))
    return math.fsum(vals[order]), math.fsum(errs[order]), panels


def esseen_integral(obj, tau, tol: float = 1e-10, max_panels: int = MAX_PANELS) -> EsseenEstimate:
    """tau^d * integral of |F^(t)| over the max-norm cube |t| <= 1/tau."""
    if not tau > 0:
        raise InvalidInput("tau must be positive")
    d = obj.d
    if d > 2:
        raise InvalidInput("Esseen quadrature supports d <= 2")
    t = float(tau)
    scale = t**d
    f = _abs_cf(obj)
    freq = _max_frequency(obj)
    # |F^(-t)| = |F^(t)|: integrate over t_1 >= 0 and double
    if d == 1:
        val, err, panels = _adaptive_1d(f, 0.0, 1.0 / t, tol / scale / 2.0, freq, max_panels)
        return EsseenEstimate(scale * 2.0 * val, scale * 2.0 * err, tau, panels)
    val, err, panels = _adaptive_2d(f, -1.0 / t, 1.0 / t, tol / scale, freq, max_panels)
    return EsseenEstimate(scale * val, scale * err, tau, panels)


# --------------------------------------------------------------------------
# lattices


def common_lattice(values, denom_cap: int = DENOM_CAP):
    """Find ``s > 0`` and integers ``n_k`` with ``values[k] == s * n_k``.

    Exact inputs give an exact spacing; floats go through rational
    reconstruction of ratios with denominators up to ``denom_cap``.
    Raises NonLatticeError when no such lattice is found.
    """
    values = list(values)
    nonzero = [v for v in values if v != 0]
    if not nonzero:
        return 1, [0] * len(values)
    if all(is_exact_number(v) for v in values):
        fr = [Fraction(v) for v in nonzero]
        num = math.gcd(*(f.numerator for f in fr))
        den = math.lcm(*(f.denominator for f in fr))
        s = Fraction(num, den)
        return s, [int(Fraction(v) / s) for v in values]
    ref = min((float(v) for v in nonzero), key=abs)
    ratios = []
    for v in values:
        r = Fraction(float(v) / ref).limit_denominator(denom_cap)
        if abs(float(r) * ref - float(v)) > 1e-13 * (abs(float(v)) + abs(ref)):
            raise NonLatticeError(f"{v!r} is not a rational multiple of {ref!r}")
        ratios.append(r)
    nz = [r for r in ratios if r != 0]
    num = math.gcd(*(r.numerator for r in nz))
    den = math.lcm(*(r.denominator for r in nz))
    g = Fraction(num, den)
    s = abs(ref) * float(g)
    ints = [int(r / g) if ref > 0 else -int(r / g) for r in ratios]
    return s, ints


def _lattice_form(spec: CompoundPoissonSpec):
    """Per-coordinate spacings and integer Levy atoms."""
    d = spec.d
    if d > 2:
        raise InvalidInput("lattice inversion supports d <= 2")
    spacings, cols = [], []
    for j in range(d):
        s, ints = common_lattice([p[j] for p in spec.levy.points])
        spacings.append(s)
        cols.append(ints)
    ipts = np.array(list(zip(*cols)), dtype=np.int64).reshape(len(spec.levy), d)
    ws = np.array([float(w) for w in spec.levy.weights])
    return spacings, ipts, ws


def _jump_bound(lam: float, tol: float) -> int:
    if lam <= 0:
        return 0
    J = int(lam)
    while poisson.sf(J, lam) > tol:
        J += max(1, J // 8)
    return J


def _next_pow2(n: int) -> int:
    return 1 << max(3, (n - 1).bit_length())


@functools.lru_cache(maxsize=256)
def _lattice_grid(levy: SpectralMeasure, tol: float):
    spec = CompoundPoissonSpec(levy)
    spacings, ipts, ws = _lattice_form(spec)
    d = spec.d
    lam = float(ws.sum())
    J = _jump_bound(lam, tol / 10.0)
    reach = [int(J * np.abs(ipts[:, j]).max()) if len(ipts) else 0 for j in range(d)]
    sizes = [_next_pow2(2 * r + 1) for r in reach]
    if math.prod(sizes) > FFT_GRID_CAP:
        raise CapExceeded("lattice_inversion grid", math.prod(sizes), FFT_GRID_CAP)
    axes = [2.0 * np.pi * np.arange(N) / N for N in sizes]
    if d == 1:
        theta = axes[0][:, None]
        phi = np.exp((np.cos(theta @ ipts.T.astype(float)) - 1.0) @ ws) if len(ws) else np.ones(sizes[0])
        masses = np.real(np.fft.ifft(phi))
    else:
        g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
        theta = np.stack([g0.reshape(-1), g1.reshape(-1)], axis=1)
        expo = (np.cos(theta @ ipts.T.astype(float)) - 1.0) @ ws if len(ws) else np.zeros(len(theta))
        phi = np.exp(expo).reshape(sizes)
        masses = np.real(np.fft.ifft2(phi))
    err = float(poisson.sf(J, lam)) if lam > 0 else 0.0
    err += 1e-15 * math.prod(sizes)
    return tuple(spacings), tuple(sizes), masses, err


def lattice_masses(spec: CompoundPoissonSpec, tol: float = 1e-13):
    """Whole law of a lattice compound Poisson spec by Fourier inversion.

    Returns ``(distribution, error_bound)``; the distribution lives on the
    scaled lattice found by :func:`common_lattice`.
    """
    spacings, sizes, masses, err = _lattice_grid(spec.levy, float(tol))
    d = spec.d
    idx = np.argwhere(masses > 0.0)
    pts = []
    ms = []
    for ix in idx:
        k = [int(i) if i < N // 2 else int(i) - N for i, N in zip(ix, sizes)]
        pts.append(tuple(float(s) * kk for s, kk in zip(spacings, k)))
        ms.append(float(masses[tuple(ix)]))
    ms = np.asarray(ms)
    keep = ms > 0
    arr = np.asarray(pts, dtype=float).reshape(len(pts), d)[keep]
    ms = ms[keep]
    if d == 1:
        x, ms = _merge_float_1d(arr[:, 0], ms)
        arr = x[:, None]
    else:
        arr, ms = _merge_float_nd(arr, ms)
    dist = DiscreteDistribution._raw([tuple(map(float, p)) for p in arr], [float(m) for m in ms], False, d)
    return dist, err


def lattice_inversion(spec: CompoundPoissonSpec, k, tol: float = 1e-13) -> float:
    """Mass at lattice point ``k`` (integer coordinates in lattice units).

    Computes (2 pi)^-d * integral over [-pi, pi]^d of cos(<k,t>) H^(t) dt
    with the trapezoidal rule on a grid fine enough that aliasing is below
    ``tol``; the rule is exact for trigonometric polynomials, so the only
    error is the folded tail.
    """
    spacings, sizes, masses, _ = _lattice_grid(spec.levy, float(tol))
    k = (k,) if np.ndim(k) == 0 else tuple(k)
    if len(k) != spec.d:
        raise InvalidInput("lattice point has the wrong dimension")
    if any(abs(int(c)) >= N // 2 for c, N in zip(k, sizes)):
        return 0.0
    return float(masses[tuple(int(c) % N for c, N in zip(k, sizes))])


def lattice_spacing(spec: CompoundPoissonSpec):
    return _lattice_form(spec)[0]


# --------------------------------------------------------------------------
# Poisson series oracle


def compound_poisson_exact(
    spec: CompoundPoissonSpec, tail_tol: float = 1e-15, cap: int = DEFAULT_ATOM_CAP
) -> DiscreteDistribution:
    """sum_k e^-L L^k/k! W^{*k}, truncated once the Poisson tail is below ``tail_tol``.

    The truncated defect is redistributed proportionally.
    """
    d = spec.d
    lam = float(spec.alpha)
    if lam == 0:
        return DiscreteDistribution._raw([(0.0,) * d], [1.0], False, d)
    W = spec.base.to_float()
    wpts, wws = W.as_arrays()
    pts = np.zeros((1, d))
    cur = np.ones(1)
    acc_pts = [pts]
    weight = math.exp(-lam)
    acc_w = [cur * weight]
    k = 0
    cumulative = weight
    while 1.0 - cumulative > tail_tol and poisson.sf(k, lam) > tail_tol:
        k += 1
        if len(pts) * len(wws) > cap:
            raise CapExceeded("compound_poisson_exact", len(pts) * len(wws), cap)
        pts = (pts[:, None, :] + wpts[None, :, :]).reshape(-1, d)
        cur = np.outer(cur, wws).reshape(-1)
        if d == 1:
            x, cur = _merge_float_1d(pts[:, 0], cur)
            pts = x[:, None]
        else:
            pts, cur = _merge_float_nd(pts, cur)
        weight = math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1))
        cumulative += weight
        acc_pts.append(pts)
        acc_w.append(cur * weight)
    allp = np.vstack(acc_pts)
    allw = np.concatenate(acc_w)
    if d == 1:
        x, allw = _merge_float_1d(allp[:, 0], allw)
        allp = x[:, None]
    else:
        allp, allw = _merge_float_nd(allp, allw)
    allw = allw / math.fsum(allw)
    keep = allw > 0
    return DiscreteDistribution._raw(
        [tuple(map(float, p)) for p in allp[keep]], [float(w) for w in allw[keep]], False, d
    )


# --------------------------------------------------------------------------
# Q(H_1^lam, kappa) and the corollary right-hand side


def q_of_H(a: CoefficientVector, lam, kappa, tol: float = 1e-12, z: float = 1.0) -> HConcentration:
    """Q(H_z^lam, kappa): exact via lattice inversion when possible, else the Esseen surrogate."""
    if not 0 <= lam <= 1:
        raise InvalidInput("lambda must lie in [0, 1]")
    if not kappa > 0:
        raise InvalidInput("kappa must be positive")
    if lam == 0:
        return HConcentration(1.0, 1.0, 1.0, "degenerate", 0.0, kappa)
    spec = CompoundPoissonSpec.from_coefficients(a, lam, z)
    try:
        law, err = lattice_masses(spec, tol)
    except (NonLatticeError, CapExceeded):
        est = esseen_integral(spec, kappa, tol=max(tol, 1e-10))
        return HConcentration(est.value, est.value, est.value, "esseen", est.quadrature_error, kappa)
    res = concentration(law, float(kappa))
    return HConcentration(float(res.upper), float(res.lower), float(res.upper), "inversion", err, kappa)


def rhs_corollary_1166(a: CoefficientVector, X: DiscreteDistribution, tau, kappa, delta, tol: float = 1e-12) -> float:
    """(1 + floor(kappa/delta))^d * Q(H_1^{p(tau/kappa)}, delta), constant-free."""
    if not kappa > 0 or not delta > 0 or tau < 0:
        raise InvalidInput("need kappa, delta > 0 and tau >= 0")
    G = symmetrize(X)
    ratio = Fraction(tau) / Fraction(kappa) if is_exact_number(tau) and is_exact_number(kappa) else tau / kappa
    p = tail_mass(G, ratio)
    q = q_of_H(a, p, delta, tol)
    return regularity_factor(kappa, delta, a.d) * q.value
