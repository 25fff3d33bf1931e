"""Result containers shared by all verifiers, with JSON/CSV serialisation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from ..poly import Poly
from ..sampler import Estimate

PASS, FAIL, INFO = "PASS", "FAIL", "INFO"


def jsonable(v: Any) -> Any:
    """Convert a result value into plain JSON types.

    Floats stay floats (``json`` prints them as shortest round-trip decimals),
    non-finite floats become ``None``, rationals become ``"num/den"`` strings.
    """
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, Poly):
        return v.to_str()
    if isinstance(v, Estimate):
        return jsonable(v.to_dict())
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if hasattr(v, "to_dict"):
        return jsonable(v.to_dict())
    raise TypeError(f"cannot serialise {type(v).__name__}")


@dataclass
class ScanReport:
    name: str
    columns: list[str]
    rows: list[dict]
    summary: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    passed: bool | None = None

    @property
    def status(self) -> str:
        return INFO if self.passed is None else PASS if self.passed else FAIL

    def column(self, key: str) -> np.ndarray:
        return np.array([r.get(key, np.nan) if r.get(key) is not None else np.nan for r in self.rows], float)

    def to_dict(self) -> dict:
        return {"kind": "scan", "name": self.name, "status": self.status, "columns": self.columns,
                "rows": self.rows, "summary": self.summary, "flags": self.flags}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow(["" if r.get(c) is None else _csv_cell(r.get(c)) for c in self.columns])


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


@dataclass
class DefectReport:
    name: str
    lhs: Estimate
    rhs: Estimate
    defect: Estimate
    ratio: float | None = None
    tolerance: float | None = None
    passed: bool | None = None
    extras: dict = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)

    @property
    def status(self) -> str:
        return INFO if self.passed is None else PASS if self.passed else FAIL

    def to_dict(self) -> dict:
        return {"kind": "defect", "name": self.name, "status": self.status, "lhs": self.lhs,
                "rhs": self.rhs, "defect": self.defect, "ratio": self.ratio,
                "tolerance": self.tolerance, "extras": self.extras, "notices": self.notices}


@dataclass
class FitResult:
    name: str
    constants: dict
    margin: float | None
    members: list[dict]
    description: str = ""
    feasible: bool = True
    passed: bool | None = None
    extras: dict = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)

    @property
    def status(self) -> str:
        return INFO if self.passed is None else PASS if self.passed else FAIL

    def to_dict(self) -> dict:
        return {"kind": "fit", "name": self.name, "status": self.status, "constants": self.constants,
                "margin": self.margin, "feasible": self.feasible, "members": self.members,
                "description": self.description, "extras": self.extras, "notices": self.notices}


@dataclass
class CheckReport:
    """Outcome of an exact symbolic check (identities, operator equalities)."""

    name: str
    exact: bool
    details: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return PASS if self.exact else FAIL

    @property
    def passed(self) -> bool:
        return self.exact

    def to_dict(self) -> dict:
        return {"kind": "check", "name": self.name, "status": self.status, "exact": self.exact,
                "details": self.details}
