"""Discrete laws, spectral measures and compound Poisson specifications.

Every object here is an immutable finite atomic measure on R^d.  Two number
modes coexist:

* exact: all coordinates and masses are ``int`` or ``fractions.Fraction``;
  atoms merge by equality and nothing is ever rounded;
* float: everything is coerced to ``float`` and atoms whose max-norm
  distance is at most ``1e-12 * (1 + max |coordinate|)`` are merged.

Norm convention: ``|x|`` is the max-norm throughout; the Euclidean norm only
appears inside the ball of the concentration function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, InvalidInput

SCHEMA = "measures/v1"
INF = math.inf
MERGE_RTOL = 1e-12
MASS_TOL = 1e-12
DEFAULT_ATOM_CAP = 5_000_000

Point = tuple


# --------------------------------------------------------------------------
# scalar helpers


def is_exact_number(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def as_number(x, exact: bool):
    """Coerce ``x`` to the requested mode (Fraction/int or float)."""
    if exact:
        if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
            return x
        raise InvalidInput(f"value {x!r} is not exact")
    return float(x)


def maxnorm(p: Sequence) -> float:
    return max((abs(c) for c in p), default=0)


def close(x, y) -> bool:
    """Scalar coincidence test used by the float mode."""
    return abs(x - y) <= MERGE_RTOL * (1.0 + max(abs(x), abs(y)))


def encode_number(x):
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return x
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def decode_number(x):
    if isinstance(x, str):
        if x in ("inf", "+inf", "Infinity"):
            return INF
        if x in ("-inf", "-Infinity"):
            return -INF
        return Fraction(x)
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InvalidInput(f"not a number: {x!r}")
    return x


# --------------------------------------------------------------------------
# atom merging


def _merge_exact(points, weights):
    acc: dict = {}
    for p, w in zip(points, weights):
        acc[p] = acc.get(p, 0) + w
    items = sorted(acc.items())
    return tuple(p for p, _ in items), tuple(w for _, w in items)


def _merge_float_1d(xs: np.ndarray, ws: np.ndarray):
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    ws = ws[order]
    if len(xs) == 0:
        return xs, ws
    gap = np.diff(xs)
    scale = 1.0 + np.maximum(np.abs(xs[1:]), np.abs(xs[:-1]))
    starts = np.concatenate(([0], np.nonzero(gap > MERGE_RTOL * scale)[0] + 1))
    return xs[starts], np.add.reduceat(ws, starts)


def _merge_float_nd(pts: np.ndarray, ws: np.ndarray):
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    ws = ws[order]
    reps: list[int] = []
    acc: list[float] = []
    window_start = 0
    for i in range(len(pts)):
        p = pts[i]
        tol = MERGE_RTOL * (1.0 + np.max(np.abs(p)))
        # representatives whose first coordinate is within reach
        while window_start < len(reps) and pts[reps[window_start], 0] < p[0] - 2 * tol - MERGE_RTOL:
            window_start += 1
        hit = -1
        for r in range(window_start, len(reps)):
            q = pts[reps[r]]
            t = MERGE_RTOL * (1.0 + max(np.max(np.abs(p)), np.max(np.abs(q))))
            if np.max(np.abs(p - q)) <= t:
                hit = r
                break
        if hit < 0:
            reps.append(i)
            acc.append(ws[i])
        else:
            acc[hit] += ws[i]
    return pts[reps], np.asarray(acc)


def merge_atoms(points: Iterable, weights: Iterable, exact: bool, d: int):
    """Merge coincident atoms; returns lexicographically sorted tuples."""
    points = list(points)
    weights = list(weights)
    if exact:
        return _merge_exact(points, weights)
    if not points:
        return (), ()
    arr = np.asarray(points, dtype=float).reshape(len(points), d)
    ws = np.asarray(weights, dtype=float)
    if d == 1:
        xs, ms = _merge_float_1d(arr[:, 0], ws)
        return tuple((float(x),) for x in xs), tuple(float(m) for m in ms)
    pts, ms = _merge_float_nd(arr, ws)
    return tuple(tuple(float(c) for c in p) for p in pts), tuple(float(m) for m in ms)


def _normalize_point(p, d: int | None):
    if isinstance(p, Real) or isinstance(p, (int, float, Fraction)):
        p = (p,)
    p = tuple(p)
    if d is not None and len(p) != d:
        raise InvalidInput(f"point {p!r} has dimension {len(p)}, expected {d}")
    return p


def _detect_exact(points, weights) -> bool:
    return all(is_exact_number(c) for p in points for c in p) and all(
        is_exact_number(w) for w in weights
    )


# --------------------------------------------------------------------------
# atomic measures


class _Atomic:
    """Shared behaviour of finite atomic measures (immutable)."""

    __slots__ = ("points", "weights", "exact", "d")

    points: tuple
    weights: tuple
    exact: bool
    d: int

    def __init__(self, atoms, d: int | None = None, exact: bool | None = None):
        if isinstance(atoms, dict):
            atoms = atoms.items()
        pts, ws = [], []
        for p, w in atoms:
            pts.append(_normalize_point(p, d))
            ws.append(w)
        if d is None:
            if not pts:
                raise InvalidInput("dimension needed for an empty measure")
            d = len(pts[0])
            for p in pts:
                if len(p) != d:
                    raise InvalidInput("atoms have mixed dimensions")
        if d < 1:
            raise InvalidInput("dimension must be >= 1")
        if exact is None:
            exact = _detect_exact(pts, ws)
        pts = [tuple(as_number(c, exact) for c in p) for p in pts]
        ws = [as_number(w, exact) for w in ws]
        for p in pts:
            for c in p:
                if not math.isfinite(c):
                    raise InvalidInput("atom coordinates must be finite")
        for w in ws:
            if not math.isfinite(w) or w < 0:
                raise InvalidInput(f"invalid weight {w!r}")
        merged_p, merged_w = merge_atoms(pts, ws, exact, d)
        keep = [(p, w) for p, w in zip(merged_p, merged_w) if w > 0]
        self._set(tuple(p for p, _ in keep), tuple(w for _, w in keep), exact, d)
        self._validate()

    def _set(self, points, weights, exact, d):
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "exact", exact)
        object.__setattr__(self, "d", d)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @classmethod
    def _raw(cls, points, weights, exact, d):
        obj = object.__new__(cls)
        obj._set(tuple(points), tuple(weights), exact, d)
        return obj

    @classmethod
    def _merged(cls, points, weights, exact, d):
        p, w = merge_atoms(points, weights, exact, d)
        keep = [(x, m) for x, m in zip(p, w) if m > 0]
        return cls._raw([x for x, _ in keep], [m for _, m in keep], exact, d)

    def _validate(self):
        pass

    # -- access -----------------------------------------------------------
    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(zip(self.points, self.weights))

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.d == other.d
            and self.points == other.points
            and self.weights == other.weights
        )

    def __hash__(self):
        return hash((type(self).__name__, self.d, self.points, self.weights))

    def __repr__(self):
        body = ", ".join(f"{p if self.d > 1 else p[0]}: {w}" for p, w in list(self)[:8])
        more = ", ..." if len(self) > 8 else ""
        return f"{type(self).__name__}({{{body}{more}}})"

    @property
    def total_mass(self):
        return sum(self.weights, Fraction(0) if self.exact else 0.0)

    def weight_at(self, point):
        point = _normalize_point(point, self.d)
        for p, w in self:
            if self.exact and p == point:
                return w
            if not self.exact and all(close(a, b) for a, b in zip(p, point)):
                return w
        return 0

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Float copies ``(points[k, d], weights[k])``."""
        pts = np.array([[float(c) for c in p] for p in self.points], dtype=float).reshape(
            len(self.points), self.d
        )
        return pts, np.array([float(w) for w in self.weights], dtype=float)

    def to_float(self):
        if not self.exact:
            return self
        return type(self)._merged(
            [tuple(float(c) for c in p) for p in self.points],
            [float(w) for w in self.weights],
            False,
            self.d,
        )

    def scaled(self, c) -> "SpectralMeasure":
        """Multiply every weight by ``c >= 0``; the result is a SpectralMeasure."""
        if c < 0:
            raise InvalidInput("scale factor must be nonnegative")
        exact = self.exact and is_exact_number(c)
        if c == 0:
            return SpectralMeasure._raw((), (), exact, self.d)
        src = self if exact else self.to_float()
        cc = c if exact else float(c)
        return SpectralMeasure._raw(src.points, [w * cc for w in src.weights], exact, self.d)

    def mapped(self, fn):
        """Pushforward of the atoms under ``fn`` (point -> point)."""
        pts = [tuple(fn(p)) for p in self.points]
        d = len(pts[0]) if pts else self.d
        return type(self)._merged(pts, self.weights, self.exact, d)

    def is_symmetric(self) -> bool:
        neg = type(self)._merged([tuple(-c for c in p) for p in self.points], self.weights, self.exact, self.d)
        if self.exact:
            return neg == self
        if len(neg) != len(self):
            return False
        for (p, w), (q, v) in zip(self, neg):
            if not all(close(a, b) for a, b in zip(p, q)):
                return False
            if abs(w - v) > MASS_TOL * max(1.0, abs(w)):
                return False
        return True

    def max_abs(self) -> float:
        return max((float(maxnorm(p)) for p in self.points), default=0.0)

    # -- json ---------------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "type": type(self).__name__,
            "d": self.d,
            "exact": self.exact,
            "atoms": [[encode_number(c) for c in p] + [encode_number(w)] for p, w in self],
        }

    @classmethod
    def from_json(cls, obj: dict):
        _check_schema(obj, cls.__name__, {"schema", "type", "d", "exact", "atoms"})
        d = int(obj["d"])
        atoms = []
        for row in obj["atoms"]:
            if len(row) != d + 1:
                raise InvalidInput("atom row has wrong length")
            vals = [decode_number(v) for v in row]
            atoms.append((tuple(vals[:d]), vals[d]))
        return cls(atoms, d=d, exact=bool(obj["exact"]))


class DiscreteDistribution(_Atomic):
    """Finite-atom probability law on R^d."""

    __slots__ = ()

    def _validate(self):
        if not self.points:
            raise InvalidInput("a distribution needs at least one atom")
        total = self.total_mass
        if self.exact:
            if total != 1:
                raise InvalidInput(f"masses sum to {total}, not 1")
        elif abs(total - 1.0) > MASS_TOL * max(1, len(self.points)) ** 0.5 * 10:
            raise InvalidInput(f"masses sum to {total!r}, not 1")

    @property
    def masses(self):
        return self.weights

    def max_atom(self):
        return max(self.weights)

    @classmethod
    def point_mass(cls, point=0, exact: bool = True):
        point = _normalize_point(point, None)
        return cls([(point, Fraction(1) if exact else 1.0)], exact=exact and all(is_exact_number(c) for c in point))

    @classmethod
    def rademacher(cls, exact: bool = True):
        half = Fraction(1, 2) if exact else 0.5
        return cls({-1: half, 1: half})

    @classmethod
    def lazy_rademacher(cls, p, exact: bool = True):
        """``P(X = +-1) = p/2``, ``P(X = 0) = 1 - p``."""
        p = Fraction(p) if exact else float(p)
        if not 0 <= p <= 1:
            raise InvalidInput("lazy Rademacher parameter must lie in [0, 1]")
        return cls({-1: p / 2, 0: 1 - p, 1: p / 2})

    @classmethod
    def uniform(cls, values, exact: bool = True):
        values = list(values)
        w = Fraction(1, len(values)) if exact else 1.0 / len(values)
        return cls([(v, w) for v in values])


class SpectralMeasure(_Atomic):
    """Finite nonnegative atomic measure (Levy measures, M, M*, M0)."""

    __slots__ = ()

    @classmethod
    def empty(cls, d: int = 1, exact: bool = True):
        return cls._raw((), (), exact, d)

    def normalized(self) -> DiscreteDistribution:
        total = self.total_mass
        if total <= 0:
            raise InvalidInput("cannot normalize a zero measure")
        return DiscreteDistribution._raw(self.points, [w / total for w in self.weights], self.exact, self.d)

    def mass_where(self, predicate) -> float:
        return sum((w for p, w in self if predicate(p)), Fraction(0) if self.exact else 0.0)


# --------------------------------------------------------------------------
# coefficient vectors


@dataclass(frozen=True)
class CoefficientVector:
    """Ordered multiset of n weights a_k in R^d (multiplicity is preserved)."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(_normalize_point(e, None) for e in self.entries)
        if not entries:
            raise InvalidInput("need at least one coefficient")
        d = len(entries[0])
        if d < 1 or any(len(e) != d for e in entries):
            raise InvalidInput("coefficients must share one dimension >= 1")
        exact = all(is_exact_number(c) for e in entries for c in e)
        if not exact:
            entries = tuple(tuple(float(c) for c in e) for e in entries)
        for e in entries:
            for c in e:
                if not math.isfinite(c):
                    raise InvalidInput("coefficients must be finite")
        object.__setattr__(self, "entries", entries)
        if not getattr(self, "_allow_zero", False) and all(c == 0 for e in entries for c in e):
            raise InvalidInput("coefficient vector must be nonzero")

    @classmethod
    def of(cls, values) -> "CoefficientVector":
        return cls(tuple(values))

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def d(self) -> int:
        return len(self.entries[0])

    @property
    def exact(self) -> bool:
        return all(is_exact_number(c) for e in self.entries for c in e)

    def __len__(self):
        return self.n

    def __iter__(self):
        return iter(self.entries)

    def scalars(self) -> list:
        """Entries of a one-dimensional vector as plain numbers."""
        if self.d != 1:
            raise InvalidInput("scalars() needs d == 1")
        return [e[0] for e in self.entries]

    def coordinate(self, j: int) -> "CoefficientVector":
        """The slice a^(j) = (a_1j, ..., a_nj); ``j`` is 1-based. May be zero."""
        if not 1 <= j <= self.d:
            raise InvalidInput(f"coordinate index {j} outside 1..{self.d}")
        obj = object.__new__(CoefficientVector)
        object.__setattr__(obj, "_allow_zero", True)
        object.__setattr__(obj, "entries", tuple((e[j - 1],) for e in self.entries))
        CoefficientVector.__post_init__(obj)
        return obj

    def scaled(self, v) -> "CoefficientVector":
        return scale_coefficients(self, v)

    def to_array(self) -> np.ndarray:
        return np.array([[float(c) for c in e] for e in self.entries], dtype=float)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "type": "CoefficientVector",
            "d": self.d,
            "entries": [[encode_number(c) for c in e] for e in self.entries],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CoefficientVector":
        _check_schema(obj, "CoefficientVector", {"schema", "type", "d", "entries"})
        return cls(tuple(tuple(decode_number(c) for c in e) for e in obj["entries"]))


def scale_coefficients(a: CoefficientVector, v) -> CoefficientVector:
    """Multiply every coefficient by ``v > 0``."""
    if not v > 0:
        raise InvalidInput("scale factor must be positive")
    return CoefficientVector(tuple(tuple(c * v for c in e) for e in a.entries))


# --------------------------------------------------------------------------
# compound Poisson


class CompoundPoissonSpec:
    """Symmetric compound Poisson law given by its finite Levy measure.

    The characteristic function is ``exp(sum_x w_x (cos<t,x> - 1))``;
    equivalently ``exp(alpha (W^(t) - 1))`` with ``alpha`` the total Levy mass
    and ``W`` the normalized Levy measure.
    """

    __slots__ = ("levy",)

    def __init__(self, levy: SpectralMeasure):
        if not isinstance(levy, SpectralMeasure):
            raise InvalidInput("levy must be a SpectralMeasure")
        if not levy.is_symmetric():
            raise InvalidInput("Levy measure must be symmetric")
        object.__setattr__(self, "levy", levy)

    def __setattr__(self, name, value):
        raise AttributeError("CompoundPoissonSpec is immutable")

    def __repr__(self):
        return f"CompoundPoissonSpec(alpha={float(self.alpha):.6g}, atoms={len(self.levy)})"

    @property
    def d(self) -> int:
        return self.levy.d

    @property
    def alpha(self):
        return self.levy.total_mass

    @property
    def base(self) -> DiscreteDistribution | None:
        return self.levy.normalized() if self.alpha > 0 else None

    @classmethod
    def from_base(cls, alpha, base: DiscreteDistribution) -> "CompoundPoissonSpec":
        if alpha < 0:
            raise InvalidInput("alpha must be nonnegative")
        return cls(base.scaled(alpha) if alpha > 0 else SpectralMeasure.empty(base.d, base.exact))

    @classmethod
    def from_coefficients(cls, a: CoefficientVector, lam=1, z=1) -> "CompoundPoissonSpec":
        """The law H_z^lam: Levy measure (lam/4) * M* with atoms scaled by ``z``."""
        if lam < 0:
            raise InvalidInput("lambda must be nonnegative")
        mstar, _, m0 = spectral_measures(a, lam)
        levy = m0 if lam > 0 else SpectralMeasure.empty(a.d, m0.exact)
        if z != 1 and len(levy):
            levy = levy.mapped(lambda p: tuple(c * z for c in p))
        return cls(levy)

    def to_json(self) -> dict:
        return {"schema": SCHEMA, "type": "CompoundPoissonSpec", "levy": self.levy.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "CompoundPoissonSpec":
        _check_schema(obj, "CompoundPoissonSpec", {"schema", "type", "levy"})
        return cls(SpectralMeasure.from_json(obj["levy"]))


# --------------------------------------------------------------------------
# operations


def symmetrize(X: DiscreteDistribution, cap: int = DEFAULT_ATOM_CAP) -> DiscreteDistribution:
    """Law of X1 - X2 for independent copies of X."""
    size = len(X) ** 2
    if size > cap:
        raise CapExceeded("symmetrize", size, cap)
    pts, ws = [], []
    for p, m in X:
        for q, w in X:
            pts.append(tuple(a - b for a, b in zip(p, q)))
            ws.append(m * w)
    return DiscreteDistribution._merged(pts, ws, X.exact, X.d)


def _exceeds(value, delta, exact: bool) -> bool:
    if delta == INF:
        return False
    if exact and is_exact_number(delta):
        return value > delta
    return float(value) > float(delta) + MERGE_RTOL * (1.0 + abs(float(delta)))


def _below(value, bound, exact: bool) -> bool:
    if bound == INF:
        return True
    if exact and is_exact_number(bound):
        return value < bound
    return float(value) < float(bound) - MERGE_RTOL * (1.0 + abs(float(bound)))


def tail_mass(G: DiscreteDistribution, delta):
    """p(delta) = G{z : |z| > delta} with the max-norm and strict inequality."""
    if delta < 0:
        raise InvalidInput("delta must be nonnegative")
    zero = Fraction(0) if G.exact else 0.0
    return sum((w for p, w in G if _exceeds(maxnorm(p), delta, G.exact)), zero)


def spectral_measures(a: CoefficientVector, scale=1):
    """Return ``(M*, M, M0)`` with M* = sum(E_{a_k} + E_{-a_k}), M = sum E_{a_k}, M0 = scale/4 M*."""
    if scale < 0:
        raise InvalidInput("scale must be nonnegative")
    exact = a.exact
    one = 1 if exact else 1.0
    pos = list(a.entries)
    neg = [tuple(-c for c in e) for e in a.entries]
    mstar = SpectralMeasure._merged(pos + neg, [one] * (2 * a.n), exact, a.d)
    m = SpectralMeasure._merged(pos, [one] * a.n, exact, a.d)
    exact0 = exact and is_exact_number(scale)
    if exact0:
        factor = Fraction(scale) / 4
        m0 = SpectralMeasure._raw(mstar.points, [w * factor for w in mstar.weights], True, a.d)
    else:
        factor = float(scale) / 4.0
        src = mstar.to_float()
        m0 = SpectralMeasure._raw(src.points, [w * factor for w in src.weights], False, a.d)
    if scale == 0:
        m0 = SpectralMeasure._raw((), (), exact0, a.d)
    return mstar, m, m0


def check_spread_condition(G: DiscreteDistribution, C1, C2, C3):
    """Check G{C1 < |x| < C2} >= C3; returns ``(holds, mass)``."""
    if C1 < 0 or not C1 < C2:
        raise InvalidInput("need 0 <= C1 < C2")
    if not 0 <= C3 <= 1:
        raise InvalidInput("C3 must lie in [0, 1]")
    zero = Fraction(0) if G.exact else 0.0
    mass = sum(
        (w for p, w in G if _exceeds(maxnorm(p), C1, G.exact) and _below(maxnorm(p), C2, G.exact)),
        zero,
    )
    return mass >= C3, mass


def coordinate_projection(obj, j: int):
    """Pushforward onto coordinate ``j`` (1-based) of a law, measure or coefficient vector."""
    if isinstance(obj, CoefficientVector):
        return obj.coordinate(j)
    if isinstance(obj, CompoundPoissonSpec):
        return CompoundPoissonSpec(coordinate_projection(obj.levy, j))
    if not isinstance(obj, _Atomic):
        raise InvalidInput(f"cannot project {type(obj).__name__}")
    if not 1 <= j <= obj.d:
        raise InvalidInput(f"coordinate index {j} outside 1..{obj.d}")
    return type(obj)._merged([(p[j - 1],) for p in obj.points], obj.weights, obj.exact, 1)


def _check_schema(obj: dict, type_name: str, allowed: set):
    if not isinstance(obj, dict):
        raise InvalidInput("expected a JSON object")
    extra = set(obj) - allowed
    if extra:
        raise InvalidInput(f"unknown fields: {sorted(extra)}")
    if obj.get("type") != type_name:
        raise InvalidInput(f"expected type {type_name}, got {obj.get('type')!r}")
    schema = obj.get("schema", SCHEMA)
    if schema.split("/")[-1] != "v1":
        raise InvalidInput(f"unsupported schema {schema!r}")
