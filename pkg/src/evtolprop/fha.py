"""Severity budgets, apportionment and compliance rollups."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Mapping, Sequence

from .fta import FaultTree, evaluate_top
from .model import Severity

FUNCTIONS = ("provide_lift", "pitch", "roll", "yaw", "forward_thrust")
MODES = (
    "total_loss",
    "partial_loss",
    "incorrect_ops",
    "inadvertent_ops",
    "unable_to_stop",
    "unsymmetric_partial_loss",
    "degradation",
)

DEFAULT_ALLOWABLE = {
    Severity.CATASTROPHIC: 1e-9,
    Severity.HAZARDOUS: 1e-7,
    Severity.MAJOR: 1e-5,
    Severity.MINOR: 1e-3,
    Severity.NO_SAFETY_EFFECT: 1.0,
}


def allowable_probability(sev: Severity, overrides: Mapping[Severity, float] | None = None) -> float:
    """Allowable per-flight-hour probability for a severity class."""
    if overrides and sev in overrides:
        return float(overrides[sev])
    return DEFAULT_ALLOWABLE[sev]


def apportion(allowable: float, contributors: int) -> float:
    """Equal per-contributor share of a budget."""
    if contributors < 1:
        raise ValueError("contributors must be >= 1")
    return float(Fraction(allowable) / contributors)


@dataclass(frozen=True)
class Budget:
    hazard: str
    allowable: float
    shares: tuple[Fraction, ...]

    @classmethod
    def equal(cls, hazard: str, allowable: float, contributors: int) -> "Budget":
        if contributors < 1:
            raise ValueError("contributors must be >= 1")
        if not 0.0 < allowable < 1.0:
            raise ValueError(f"allowable {allowable} outside (0, 1)")
        share = Fraction(allowable) / contributors
        return cls(hazard, allowable, (share,) * contributors)

    @classmethod
    def weighted(cls, hazard: str, allowable: float, weights: Sequence[float]) -> "Budget":
        if not weights or any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
        ws = [Fraction(w) for w in weights]
        total = sum(ws)
        return cls(hazard, allowable, tuple(Fraction(allowable) * w / total for w in ws))

    @property
    def contributors(self) -> int:
        return len(self.shares)

    @property
    def per_contributor(self) -> float:
        return float(self.shares[0])


@dataclass(frozen=True)
class FunctionFailure:
    id: str
    function: str
    mode: str
    severity: Severity
    tree: str | None = None

    def __post_init__(self) -> None:
        if self.function not in FUNCTIONS:
            raise ValueError(f"{self.id}: unknown function {self.function!r}")
        if self.mode not in MODES:
            raise ValueError(f"{self.id}: unknown failure mode {self.mode!r}")


@dataclass(frozen=True)
class Hazard:
    """A limiting system-level hazard with its apportioned budget."""

    id: str
    title: str
    severity: Severity
    contributors: int = 1
    trees: tuple[str, ...] = ()
    allowable_override: float | None = None

    def budget(self, overrides: Mapping[Severity, float] | None = None) -> Budget:
        if self.allowable_override is not None:
            return Budget.equal(self.id, self.allowable_override, 1)
        return Budget.equal(self.id, allowable_probability(self.severity, overrides), self.contributors)

    def allowable(self, overrides: Mapping[Severity, float] | None = None) -> float:
        return self.budget(overrides).per_contributor


@dataclass(frozen=True)
class FhaTable:
    functions: tuple[FunctionFailure, ...] = ()
    hazards: tuple[Hazard, ...] = ()
    allowables: Mapping[Severity, float] = field(default_factory=dict)

    def lookup(self, function: str, mode: str) -> FunctionFailure | None:
        for f in self.functions:
            if f.function == function and f.mode == mode:
                return f
        return None


@dataclass(frozen=True)
class ComplianceRow:
    hazard: str
    title: str
    severity: str
    allowable: float
    expected: float | None
    status: str
    trees: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def margin(self) -> float | None:
        if self.expected is None:
            return None
        if self.expected == 0.0:
            return math.inf
        return self.allowable / self.expected


def compliance_row(hazard: str, allowable: float, expected: float | None, title: str = "",
                   severity: str = "", trees: tuple[str, ...] = ()) -> ComplianceRow:
    if expected is None:
        status = "unassessed"
    else:
        status = "pass" if expected <= allowable else "fail"
    return ComplianceRow(hazard, title or hazard, severity, allowable, expected, status, trees)


def _expected(tree_ids: Sequence[str], trees: Mapping[str, FaultTree], cache: dict[str, float]) -> float | None:
    values = []
    for tid in tree_ids:
        if tid not in trees:
            return None
        if tid not in cache:
            cache[tid] = evaluate_top(trees[tid])
        values.append(cache[tid])
    return max(values) if values else None


def compliance_report(trees: Mapping[str, FaultTree], fha: FhaTable) -> list[ComplianceRow]:
    """One row per limiting hazard; a hazard with several trees reports the worst one."""
    cache: dict[str, float] = {}
    rows = []
    for hz in fha.hazards:
        expected = _expected(hz.trees, trees, cache)
        rows.append(
            compliance_row(hz.id, hz.allowable(fha.allowables), expected, hz.title, hz.severity.label, hz.trees)
        )
    return rows


@dataclass(frozen=True)
class RollupRow:
    function: str
    mode: str
    severity: str
    allowable: float
    expected: float | None
    status: str
    tree: str | None = None


def function_rollup(trees: Mapping[str, FaultTree], fha: FhaTable) -> list[RollupRow]:
    """Aircraft-level results per (function, mode); rows without a tree stay qualitative."""
    cache: dict[str, float] = {}
    rows = []
    for f in fha.functions:
        allowable = allowable_probability(f.severity, fha.allowables)
        if f.tree is None:
            rows.append(RollupRow(f.function, f.mode, f.severity.label, allowable, None, "qualitative"))
            continue
        expected = _expected((f.tree,), trees, cache)
        if expected is None:
            status = "unassessed"
        else:
            status = "pass" if expected <= allowable else "fail"
        rows.append(RollupRow(f.function, f.mode, f.severity.label, allowable, expected, status, f.tree))
    return rows


def default_fha_text() -> str:
    return resources.files("evtolprop").joinpath("data/fha_default.adl").read_text(encoding="utf-8")
