"""Report and configuration types shared by the structure detectors."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Union

from ..errors import InvalidInput
from ..measures import decode_number, encode_number
from ..progressions import CGAP, ProductCGAP, SignedCube, progression_from_json

SCHEMA = "structure/v1"


@dataclass(frozen=True)
class StructureConfig:
    """Caps and constants for :func:`inverse_detect` and the K_1 reports.

    ``None`` constants are read from the stored calibration table.
    """

    m_cap: int = 125
    r: int = 1
    c1_pow: float | None = None
    volume_rule: str = "selection"  # or "cap"
    budget_mode: str = "shared"  # or "per-coordinate"
    support_cap: int = 2_000_000
    threads: int = 1
    rank_constant: float = 2.0
    max_rank: int = 12
    residual_target: float = 0.0
    c_rank: float | None = None
    c_residual: float | None = None

    def __post_init__(self):
        if self.volume_rule not in ("selection", "cap"):
            raise InvalidInput("volume_rule must be 'selection' or 'cap'")
        if self.budget_mode not in ("shared", "per-coordinate"):
            raise InvalidInput("budget_mode must be 'shared' or 'per-coordinate'")
        if self.m_cap < 1 or self.r < 1 or self.threads < 1 or self.max_rank < 1:
            raise InvalidInput("caps must be positive")
        if self.rank_constant <= 0 or self.residual_target < 0:
            raise InvalidInput("rank_constant must be positive and residual_target nonnegative")

    def to_json(self) -> dict:
        return {"schema": SCHEMA, "type": "StructureConfig", **dataclasses.asdict(self)}

    @classmethod
    def from_json(cls, obj: dict) -> "StructureConfig":
        obj = dict(obj)
        obj.pop("schema", None)
        obj.pop("type", None)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise InvalidInput(f"unknown config fields: {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class BoundTarget:
    """One asserted bound lhs <= rhs (or lhs >= rhs when ``lower``)."""

    lhs: object
    rhs: object
    constant: float
    lower: bool = False
    degenerate: bool = False

    @property
    def satisfied(self) -> bool:
        if self.degenerate:
            return True
        return self.lhs >= self.rhs if self.lower else self.lhs <= self.rhs

    @property
    def ratio(self) -> float | None:
        lhs, rhs = float(self.lhs), float(self.rhs)
        if self.lower:
            lhs, rhs = rhs, lhs
        if rhs > 0:
            return lhs / rhs if math.isfinite(rhs) else 0.0
        return None if lhs == 0 else math.inf

    def to_json(self) -> dict:
        return {
            "lhs": encode_number(self.lhs),
            "rhs": encode_number(self.rhs),
            "constant": self.constant,
            "lower": self.lower,
            "degenerate": self.degenerate,
            "satisfied": self.satisfied,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BoundTarget":
        return cls(decode_number(obj["lhs"]), decode_number(obj["rhs"]), float(obj["constant"]), bool(obj["lower"]), bool(obj["degenerate"]))


Witness = Union[SignedCube, CGAP, ProductCGAP]


@dataclass(frozen=True)
class StructureReport:
    """Witness progression, coverage and the evaluated bound targets."""

    progression: Witness
    rank: int
    volume: int
    covered: int
    outliers: tuple
    residual_mass: object
    bound_targets: dict
    path: str
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "outliers", tuple(int(i) for i in self.outliers))
        if self.residual_mass < 0:
            raise InvalidInput("residual mass must be nonnegative")

    @property
    def n(self) -> int:
        return self.covered + len(self.outliers)

    @property
    def satisfied(self) -> dict:
        return {k: t.satisfied for k, t in self.bound_targets.items()}

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "type": "StructureReport",
            "path": self.path,
            "progression": self.progression.to_json(),
            "rank": self.rank,
            "volume": self.volume,
            "covered": self.covered,
            "outliers": list(self.outliers),
            "residual_mass": encode_number(self.residual_mass),
            "bound_targets": {k: t.to_json() for k, t in self.bound_targets.items()},
            "satisfied": self.satisfied,
            "details": self.details,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StructureReport":
        if obj.get("schema") != SCHEMA or obj.get("type") != "StructureReport":
            raise InvalidInput("not a structure/v1 StructureReport")
        return cls(
            progression_from_json(obj["progression"]),
            int(obj["rank"]),
            int(obj["volume"]),
            int(obj["covered"]),
            tuple(obj["outliers"]),
            decode_number(obj["residual_mass"]),
            {k: BoundTarget.from_json(v) for k, v in obj["bound_targets"].items()},
            obj["path"],
            obj.get("details", {}),
        )
