"""Generalized arithmetic progressions and their convex-body cousins.

Three representations are supported, all reduced internally to the same
"lattice form" ``offset + N @ G`` where ``N`` is a matrix of integer index
vectors and ``G`` stacks the generators:

* :class:`GAP` - image of an integer box ``L_j <= m_j <= L'_j``;
* :class:`CGAP` - image of ``Z^r`` intersected with a symmetric convex body
  (box, ellipsoid, or an intersection of slabs), optionally translated;
* :class:`SignedCube` - ``{sum n_j u_j : n_j in {-1, 0, 1}}``.

:class:`ProductCGAP` is the coordinate-wise product of one-dimensional
CGAPs; each of its generators has exactly one nonzero coordinate.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np
from scipy.optimize import linprog

from .errors import ArakError, CapExceeded, InvalidInput
from .measures import (
    MERGE_RTOL,
    CoefficientVector,
    _merge_float_1d,
    _merge_float_nd,
    decode_number,
    encode_number,
    is_exact_number,
)

SCHEMA = "progressions/v1"
VOLUME_CAP = 10**9
DEFAULT_CAP = 10**6
SCAN_CAP = 10**7
MEMBERSHIP_RTOL = 1e-12

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


def _vec(p) -> tuple:
    if isinstance(p, (int, float, Fraction, np.integer, np.floating)):
        return (p,)
    return tuple(p)


# --------------------------------------------------------------------------
# convex bodies


@dataclass(frozen=True)
class Box:
    """{x : |x_i| <= radii_i}."""

    radii: tuple

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in _vec(self.radii)))
        if any(r < 0 or not math.isfinite(r) for r in self.radii):
            raise InvalidInput("box radii must be finite and nonnegative")

    @property
    def r(self) -> int:
        return len(self.radii)

    def half_widths(self) -> np.ndarray:
        return np.asarray(self.radii)

    def contains(self, X: np.ndarray) -> np.ndarray:
        R = np.asarray(self.radii)
        return np.all(np.abs(X) <= R * (1 + MEMBERSHIP_RTOL) + MEMBERSHIP_RTOL, axis=1)

    def to_json(self) -> dict:
        return {"kind": "box", "radii": list(self.radii)}


@dataclass(frozen=True)
class Ellipsoid:
    """{x : x^T A x <= 1} for a symmetric positive definite ``A``."""

    matrix: tuple

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInput("ellipsoid matrix must be square")
        if not np.allclose(A, A.T) or np.min(np.linalg.eigvalsh(A)) <= 0:
            raise InvalidInput("ellipsoid matrix must be symmetric positive definite")
        object.__setattr__(self, "matrix", tuple(tuple(float(c) for c in row) for row in A))

    @classmethod
    def ball(cls, radius: float, r: int) -> "Ellipsoid":
        return cls(tuple(tuple((1.0 / radius**2) if i == j else 0.0 for j in range(r)) for i in range(r)))

    @property
    def r(self) -> int:
        return len(self.matrix)

    def half_widths(self) -> np.ndarray:
        return np.sqrt(np.diag(np.linalg.inv(np.asarray(self.matrix))))

    def contains(self, X: np.ndarray) -> np.ndarray:
        A = np.asarray(self.matrix)
        return np.einsum("ij,jk,ik->i", X, A, X) <= 1 + MEMBERSHIP_RTOL

    def to_json(self) -> dict:
        return {"kind": "ellipsoid", "matrix": [list(r) for r in self.matrix]}


@dataclass(frozen=True)
class Slabs:
    """{x : |<w_i, x>| <= 1 for all i}."""

    normals: tuple

    def __post_init__(self):
        W = np.asarray(self.normals, dtype=float)
        if W.ndim != 2 or len(W) == 0:
            raise InvalidInput("slabs need a nonempty list of normals")
        object.__setattr__(self, "normals", tuple(tuple(float(c) for c in w) for w in W))

    @property
    def r(self) -> int:
        return len(self.normals[0])

    def half_widths(self) -> np.ndarray:
        W = np.asarray(self.normals)
        r = W.shape[1]
        A_ub = np.vstack([W, -W])
        b_ub = np.ones(2 * len(W))
        out = np.empty(r)
        for i in range(r):
            c = np.zeros(r)
            c[i] = -1.0
            res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * r, method="highs")
            if res.status == 3:
                raise InvalidInput("slab intersection is unbounded")
            if res.status != 0:
                raise ArakError(f"bounding box LP failed: {res.message}")
            out[i] = -res.fun
        return out

    def contains(self, X: np.ndarray) -> np.ndarray:
        W = np.asarray(self.normals)
        return np.all(np.abs(X @ W.T) <= 1 + MEMBERSHIP_RTOL, axis=1)

    def to_json(self) -> dict:
        return {"kind": "slabs", "normals": [list(w) for w in self.normals]}


Body = Union[Box, Ellipsoid, Slabs]


def body_from_json(obj: dict) -> Body:
    kind = obj.get("kind")
    if kind == "box":
        return Box(tuple(obj["radii"]))
    if kind == "ellipsoid":
        return Ellipsoid(tuple(tuple(r) for r in obj["matrix"]))
    if kind == "slabs":
        return Slabs(tuple(tuple(w) for w in obj["normals"]))
    raise InvalidInput(f"unknown body kind {kind!r}")


def enumerate_lattice_points(V: Body, r: int | None = None, cap: int = DEFAULT_CAP) -> list[tuple]:
    """Integer points of ``V`` in lexicographic order (bounding-box scan)."""
    r = V.r if r is None else r
    if r != V.r:
        raise InvalidInput(f"body has rank {V.r}, not {r}")
    hw = V.half_widths()
    if not np.all(np.isfinite(hw)):
        raise InvalidInput("body is unbounded")
    bounds = np.floor(hw * (1 + MEMBERSHIP_RTOL) + MEMBERSHIP_RTOL).astype(int)
    scan = math.prod(int(2 * b + 1) for b in bounds)
    if scan > SCAN_CAP:
        raise CapExceeded("bounding-box scan", scan, SCAN_CAP)
    axes = [np.arange(-b, b + 1) for b in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, r)
    inside = grid[V.contains(grid.astype(float))]
    if len(inside) > cap:
        raise CapExceeded("lattice points", len(inside), cap)
    return [tuple(int(c) for c in row) for row in inside]


# --------------------------------------------------------------------------
# progressions


def _check_volume(vol: int) -> int:
    if vol > VOLUME_CAP:
        raise CapExceeded("progression volume", vol, VOLUME_CAP)
    return vol


@dataclass(frozen=True)
class GAP:
    """{g0 + sum m_j g_j : L_j <= m_j <= L'_j}."""

    g0: tuple
    generators: tuple
    lower: tuple
    upper: tuple

    def __post_init__(self):
        g0 = _vec(self.g0)
        gens = tuple(_vec(g) for g in self.generators)
        if any(len(g) != len(g0) for g in gens):
            raise InvalidInput("generators must live in the same space as g0")
        lo = tuple(int(x) for x in _vec(self.lower)) if gens else ()
        hi = tuple(int(x) for x in _vec(self.upper)) if gens else ()
        if len(lo) != len(gens) or len(hi) != len(gens):
            raise InvalidInput("one lower and one upper bound per generator")
        if any(a > b for a, b in zip(lo, hi)):
            raise InvalidInput("need L_j <= L'_j")
        object.__setattr__(self, "g0", g0)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        _check_volume(self.volume)

    @classmethod
    def symmetric(cls, generators, bounds) -> "GAP":
        gens = tuple(_vec(g) for g in generators)
        d = len(gens[0]) if gens else 1
        bounds = tuple(int(b) for b in _vec(bounds))
        return cls((0,) * d, gens, tuple(-b for b in bounds), bounds)

    @property
    def d(self) -> int:
        return len(self.g0)

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def volume(self) -> int:
        return math.prod(b - a + 1 for a, b in zip(self.lower, self.upper))

    @property
    def is_symmetric(self) -> bool:
        return all(c == 0 for c in self.g0) and all(a == -b for a, b in zip(self.lower, self.upper))

    def lattice_form(self):
        axes = [range(a, b + 1) for a, b in zip(self.lower, self.upper)]
        N = np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, self.rank)
        return self.g0, self.generators, N

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "type": "GAP",
            "g0": [encode_number(c) for c in self.g0],
            "generators": [[encode_number(c) for c in g] for g in self.generators],
            "lower": list(self.lower),
            "upper": list(self.upper),
        }


@dataclass(frozen=True)
class CGAP:
    """{shift + sum nu_j h_j : nu in Z^r intersected with V} with V = -V convex.

    ``shift`` is zero for the classical (centered) class; a nonzero shift
    gives the translated progressions used by the fitting routines.
    """

    h: tuple
    body: Body
    m_cap: int = DEFAULT_CAP
    shift: tuple = None

    def __post_init__(self):
        h = tuple(_vec(x) for x in _vec(self.h))
        if not h:
            raise InvalidInput("CGAP needs rank >= 1")
        d = len(h[0])
        if any(len(x) != d for x in h):
            raise InvalidInput("all h_j must share one dimension")
        if self.body.r != len(h):
            raise InvalidInput(f"body rank {self.body.r} != rank {len(h)}")
        shift = (0,) * d if self.shift is None else _vec(self.shift)
        if len(shift) != d:
            raise InvalidInput("shift has the wrong dimension")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "shift", shift)

    @classmethod
    def arithmetic(cls, step, half_length: int, shift=0) -> "CGAP":
        """{shift + j * step : |j| <= half_length} (d = 1)."""
        return cls(((step,),), Box((half_length + 0.5,)), shift=(shift,))

    @property
    def rank(self) -> int:
        return len(self.h)

    @property
    def d(self) -> int:
        return len(self.h[0])

    @property
    def is_symmetric(self) -> bool:
        return all(c == 0 for c in self.shift)

    def lattice_points(self) -> list[tuple]:
        return enumerate_lattice_points(self.body, self.rank, self.m_cap)

    @property
    def volume(self) -> int:
        return len(self.lattice_points())

    def lattice_form(self):
        N = np.array(self.lattice_points(), dtype=np.int64).reshape(-1, self.rank)
        return self.shift, self.h, N

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "type": "CGAP",
            "h": [[encode_number(c) for c in x] for x in self.h],
            "body": self.body.to_json(),
            "m_cap": self.m_cap,
            "shift": [encode_number(c) for c in self.shift],
        }


@dataclass(frozen=True)
class SignedCube:
    """K_1(u) = {sum n_j u_j : n_j in {-1, 0, 1}}."""

    u: tuple

    def __post_init__(self):
        u = tuple(_vec(x) for x in self.u)
        if not u:
            raise InvalidInput("SignedCube needs rank >= 1")
        if any(len(x) != len(u[0]) for x in u):
            raise InvalidInput("all u_j must share one dimension")
        object.__setattr__(self, "u", u)
        _check_volume(self.volume)

    @property
    def rank(self) -> int:
        return len(self.u)

    @property
    def d(self) -> int:
        return len(self.u[0])

    @property
    def volume(self) -> int:
        return 3**self.rank

    def lattice_form(self):
        N = np.array(list(itertools.product((-1, 0, 1), repeat=self.rank)), dtype=np.int64)
        return (0,) * self.d, self.u, N

    def to_gap(self) -> GAP:
        return GAP.symmetric(self.u, (1,) * self.rank)

    def to_cgap(self) -> CGAP:
        return CGAP(self.u, Box((1.5,) * self.rank), m_cap=self.volume)

    def to_json(self) -> dict:
        return {"schema": SCHEMA, "type": "SignedCube", "u": [[encode_number(c) for c in x] for x in self.u]}


@dataclass(frozen=True)
class ProductCGAP:
    """Coordinate-wise product of one-dimensional CGAPs."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts or any(not isinstance(p, CGAP) or p.d != 1 for p in parts):
            raise InvalidInput("ProductCGAP needs one-dimensional CGAP parts")
        object.__setattr__(self, "parts", parts)

    @property
    def d(self) -> int:
        return len(self.parts)

    @property
    def rank(self) -> int:
        return sum(p.rank for p in self.parts)

    @property
    def volume(self) -> int:
        return _check_volume(math.prod(p.volume for p in self.parts))

    @property
    def is_symmetric(self) -> bool:
        return all(p.is_symmetric for p in self.parts)

    def generators(self) -> list[tuple]:
        """Block generators: those of part k are nonzero in coordinate k only."""
        out = []
        for k, part in enumerate(self.parts):
            for (hj,) in part.h:
                v = [0] * self.d
                v[k] = hj
                out.append(tuple(v))
        return out

    def lattice_form(self):
        blocks = [p.lattice_form()[2] for p in self.parts]
        rows = [np.concatenate(combo) for combo in itertools.product(*blocks)]
        N = np.array(rows, dtype=np.int64).reshape(-1, self.rank)
        offset = tuple(p.shift[0] for p in self.parts)
        return offset, tuple(self.generators()), N

    def to_json(self) -> dict:
        return {"schema": SCHEMA, "type": "ProductCGAP", "parts": [p.to_json() for p in self.parts]}


Progression = Union[GAP, CGAP, SignedCube, ProductCGAP]


def progression_from_json(obj: dict) -> Progression:
    kind = obj.get("type")
    if obj.get("schema", SCHEMA) != SCHEMA:
        raise InvalidInput(f"unsupported schema {obj.get('schema')!r}")
    num = lambda xs: tuple(decode_number(c) for c in xs)  # noqa: E731
    if kind == "GAP":
        return GAP(num(obj["g0"]), tuple(num(g) for g in obj["generators"]), tuple(obj["lower"]), tuple(obj["upper"]))
    if kind == "CGAP":
        return CGAP(tuple(num(x) for x in obj["h"]), body_from_json(obj["body"]), int(obj.get("m_cap", DEFAULT_CAP)), num(obj["shift"]))
    if kind == "SignedCube":
        return SignedCube(tuple(num(x) for x in obj["u"]))
    if kind == "ProductCGAP":
        return ProductCGAP(tuple(progression_from_json(p) for p in obj["parts"]))
    raise InvalidInput(f"unknown progression type {kind!r}")


# --------------------------------------------------------------------------
# points, distances, cover


def _is_exact_form(offset, gens) -> bool:
    return all(is_exact_number(c) for c in offset) and all(is_exact_number(c) for g in gens for c in g)


def points_of(K: Progression, cap: int = DEFAULT_CAP):
    """Distinct points of ``K`` (sorted) and their multiplicities.

    ``sum(multiplicity.values()) == volume``; K is proper iff every
    multiplicity is 1.
    """
    if K.volume > cap:
        raise CapExceeded("points_of", K.volume, cap)
    offset, gens, N = K.lattice_form()
    d = len(offset)
    if _is_exact_form(offset, gens):
        acc: dict = {}
        for row in N.tolist():
            p = tuple(o + sum(n * g[c] for n, g in zip(row, gens)) for c, o in enumerate(offset))
            acc[p] = acc.get(p, 0) + 1
        pts = sorted(acc)
        return pts, {p: acc[p] for p in pts}
    G = np.asarray(gens, dtype=float).reshape(len(gens), d)
    img = np.asarray(offset, dtype=float)[None, :] + N.astype(float) @ G
    ones = np.ones(len(img))
    if d == 1:
        xs, counts = _merge_float_1d(img[:, 0], ones)
        pts = [(float(x),) for x in xs]
    else:
        P, counts = _merge_float_nd(img, ones)
        pts = [tuple(float(c) for c in p) for p in P]
    return pts, {p: int(round(c)) for p, c in zip(pts, counts)}


def is_proper(K: Progression) -> bool:
    pts, _ = points_of(K)
    return len(pts) == K.volume


def _point_array(K_or_points) -> np.ndarray:
    if isinstance(K_or_points, (GAP, CGAP, SignedCube, ProductCGAP)):
        pts, _ = points_of(K_or_points)
    else:
        pts = [_vec(p) for p in K_or_points]
    return np.asarray([[float(c) for c in p] for p in pts], dtype=float)


def distances(xs, K) -> np.ndarray:
    """Max-norm distance from each row of ``xs`` to the point set of ``K``."""
    P = _point_array(K)
    X = np.asarray([[float(c) for c in _vec(x)] for x in xs], dtype=float).reshape(len(xs), P.shape[1])
    if P.shape[1] == 1:
        s = np.sort(P[:, 0])
        x = X[:, 0]
        i = np.searchsorted(s, x)
        left = np.abs(x - s[np.clip(i - 1, 0, len(s) - 1)])
        right = np.abs(s[np.clip(i, 0, len(s) - 1)] - x)
        return np.minimum(left, right)
    out = np.empty(len(X))
    step = max(1, 2_000_000 // max(len(P), 1))
    for s0 in range(0, len(X), step):
        blk = X[s0 : s0 + step]
        out[s0 : s0 + step] = np.abs(blk[:, None, :] - P[None, :, :]).max(axis=2).min(axis=1)
    return out


def neighborhood_distance(x, K) -> float:
    """min over y in K of |x - y| (max-norm); x is in [K]_tau iff this is <= tau."""
    return float(distances([x], K)[0])


def within(dist, tau, scale: float = 0.0) -> bool | np.ndarray:
    """dist <= tau up to the shared float tolerance."""
    return dist <= tau + MERGE_RTOL * (1.0 + np.abs(scale) + tau)


def cover_count(a: CoefficientVector | Sequence, K, tau):
    """(#{k : |a_k - K| <= tau}, outlier indices in increasing order, 0-based)."""
    entries = a.entries if isinstance(a, CoefficientVector) else [_vec(x) for x in a]
    dist = distances(entries, K)
    mags = np.array([max(abs(float(c)) for c in e) for e in entries])
    ok = within(dist, float(tau), mags)
    outliers = [int(i) for i in np.nonzero(~ok)[0]]
    return len(entries) - len(outliers), outliers


# --------------------------------------------------------------------------
# constructions


def embed_cgap_in_gap(K: CGAP | ProductCGAP):
    """Bounding-box GAP on the same generators containing ``K``.

    Returns ``(gap, ratio)`` with ratio = Vol(gap) / |K|.
    """
    if isinstance(K, ProductCGAP):
        gaps = [embed_cgap_in_gap(p)[0] for p in K.parts]
        gap = product(gaps)
    else:
        N = np.array(K.lattice_points(), dtype=np.int64).reshape(-1, K.rank)
        bounds = np.abs(N).max(axis=0) if len(N) else np.zeros(K.rank, dtype=int)
        gap = GAP(K.shift, K.h, tuple(-int(b) for b in bounds), tuple(int(b) for b in bounds))
    size = len(points_of(K)[0])
    return gap, gap.volume / size


def _embed_part(part: Progression, k: int, d: int):
    """Generators, bounds and offset of a 1-D progression placed in coordinate k."""
    def lift(x):
        v = [0] * d
        v[k] = x
        return tuple(v)

    if isinstance(part, SignedCube):
        part = part.to_gap()
    if isinstance(part, CGAP):
        part = embed_cgap_in_gap(part)[0]
    if not isinstance(part, GAP) or part.d != 1:
        raise InvalidInput("product parts must be one-dimensional progressions")
    return [lift(g[0]) for g in part.generators], list(part.lower), list(part.upper), part.g0[0]


def product(parts: Sequence[Progression]) -> Progression:
    """Coordinate-wise product of one-dimensional progressions.

    All SignedCubes give a SignedCube, all CGAPs give a ProductCGAP, and any
    other mix gives a GAP.  Generators always have one nonzero coordinate.
    """
    parts = list(parts)
    if not parts:
        raise InvalidInput("product of nothing")
    d = len(parts)
    if all(isinstance(p, SignedCube) and p.d == 1 for p in parts):
        u = []
        for k, p in enumerate(parts):
            for (x,) in p.u:
                v = [0] * d
                v[k] = x
                u.append(tuple(v))
        return SignedCube(tuple(u))
    if all(isinstance(p, CGAP) and p.d == 1 for p in parts):
        prod = ProductCGAP(tuple(parts))
        _ = prod.volume
        return prod
    gens, lo, hi, g0 = [], [], [], []
    for k, p in enumerate(parts):
        g, a, b, o = _embed_part(p, k, d)
        gens += g
        lo += a
        hi += b
        g0.append(o)
    return GAP(tuple(g0), tuple(gens), tuple(lo), tuple(hi))


def properize(K: GAP | SignedCube, tau, seed: int = 0, retries: int = 16):
    """Perturb generators so that the progression becomes proper.

    Generator j moves by at most tau / (2 Vol) in max-norm; the base point
    is re-centered on the middle index so every point moves by at most
    tau / 2, which gives [K]_tau inside [K*]_{2 tau}.  Dimensions, volume
    and symmetry are preserved.
    """
    if not tau > 0:
        raise InvalidInput("tau must be positive")
    as_cube = isinstance(K, SignedCube)
    gap = K.to_gap() if as_cube else K
    if is_proper(gap):
        return K
    vol = gap.volume
    r, d = gap.rank, gap.d
    if r > len(_PRIMES):
        raise InvalidInput("rank too large for the deterministic perturbation")
    base = float(tau) / (2.0 * vol)
    center = [(a + b) // 2 for a, b in zip(gap.lower, gap.upper)]
    G = np.asarray(gap.generators, dtype=float)
    rng = np.random.default_rng(seed)
    for attempt in range(retries + 1):
        if attempt == 0:
            primes = np.asarray(_PRIMES[:r], dtype=float)
            delta = np.repeat((base * primes / primes[-1])[:, None], d, axis=1)
        else:
            delta = rng.uniform(0.0, base, size=(r, d))
            delta[delta == 0] = base / 2
        newG = G + delta
        g0 = np.asarray(gap.g0, dtype=float) - np.asarray(center, dtype=float) @ delta
        cand = GAP(
            tuple(float(c) for c in g0),
            tuple(tuple(float(c) for c in g) for g in newG),
            gap.lower,
            gap.upper,
        )
        if gap.is_symmetric:
            cand = GAP((0.0,) * d, cand.generators, gap.lower, gap.upper)
        if not is_proper(cand):
            continue
        _, _, N = gap.lattice_form()
        old = np.asarray(gap.g0, dtype=float)[None, :] + N @ G
        new = np.asarray(cand.g0, dtype=float)[None, :] + N @ newG
        if np.abs(old - new).max() > float(tau) * (1 + 1e-9):
            continue
        if as_cube:
            return SignedCube(cand.generators)
        return cand
    raise ArakError(f"properize failed after {retries} retries")
