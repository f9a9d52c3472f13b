"""Battery pack sizing: capacity relations, cell layout and governing case."""

from __future__ import annotations

import math
from dataclasses import dataclass

CASES = ("normal-energy", "emergency-energy", "normal-power", "emergency-power")


@dataclass(frozen=True)
class CellSpec:
    nominal_voltage: float
    capacity_ah: float
    rated_current_a: float
    mass_kg: float
    name: str = ""

    def __post_init__(self) -> None:
        for attr in ("nominal_voltage", "capacity_ah", "rated_current_a", "mass_kg"):
            if not getattr(self, attr) > 0:
                raise ValueError(f"cell {attr} must be > 0")


def discharge_rate(cell: CellSpec) -> float:
    """Rated current over rated capacity, per hour."""
    return cell.rated_current_a / cell.capacity_ah


def capacity_from_energy(energy_wh: float, voltage: float) -> float:
    if voltage <= 0:
        raise ValueError("voltage must be > 0")
    return energy_wh / voltage


def capacity_from_power(power_w: float, rate: float, voltage: float) -> float:
    if rate <= 0 or voltage <= 0:
        raise ValueError("discharge rate and voltage must be > 0")
    return power_w / (rate * voltage)


def available_power(capacity_ah: float, rate: float, voltage: float) -> float:
    return capacity_ah * rate * voltage


def _ceil(x: float, rel_tol: float = 1e-9) -> int:
    # Round-off in x = n * c / c must not add a whole cell string.
    nearest = round(x)
    if abs(x - nearest) <= rel_tol * max(1.0, abs(x)):
        return int(nearest)
    return math.ceil(x)


@dataclass(frozen=True)
class PackLayout:
    series: int
    parallel: int
    cell: CellSpec
    system_voltage: float

    @property
    def cells(self) -> int:
        return self.series * self.parallel

    @property
    def capacity_ah(self) -> float:
        return self.parallel * self.cell.capacity_ah

    @property
    def voltage(self) -> float:
        return self.series * self.cell.nominal_voltage

    @property
    def available_power_w(self) -> float:
        return available_power(self.capacity_ah, discharge_rate(self.cell), self.system_voltage)

    @property
    def energy_wh(self) -> float:
        return self.capacity_ah * self.system_voltage

    @property
    def mass_kg(self) -> float:
        return self.cells * self.cell.mass_kg


def layout_pack(required_ah: float, system_voltage: float, cell: CellSpec) -> PackLayout:
    """Smallest series/parallel arrangement meeting voltage and capacity."""
    if required_ah < 0 or system_voltage <= 0:
        raise ValueError("required capacity must be >= 0 and voltage > 0")
    series = _ceil(system_voltage / cell.nominal_voltage)
    parallel = max(1, _ceil(required_ah / cell.capacity_ah))
    return PackLayout(series, parallel, cell, system_voltage)


@dataclass(frozen=True)
class PackDemand:
    """Energy and power a pack must cover, from the mission and failure analyses."""

    role: str
    normal_energy_wh: float
    emergency_energy_wh: float
    normal_power_w: float
    emergency_power_w: float


@dataclass(frozen=True)
class SizingRequirement:
    case: str
    required_ah: float
    basis: float
    governs: bool = False


@dataclass(frozen=True)
class PackSizing:
    role: str
    requirements: tuple[SizingRequirement, ...]
    layout: PackLayout

    @property
    def governing(self) -> SizingRequirement:
        return next(r for r in self.requirements if r.governs)

    @property
    def required_ah(self) -> float:
        return self.governing.required_ah


def size_pack(demand: PackDemand, cell: CellSpec, system_voltage: float) -> PackSizing:
    """Capacity is the envelope over the four cases; the largest one governs."""
    rate = discharge_rate(cell)
    raw = [
        ("normal-energy", capacity_from_energy(demand.normal_energy_wh, system_voltage), demand.normal_energy_wh),
        ("emergency-energy", capacity_from_energy(demand.emergency_energy_wh, system_voltage), demand.emergency_energy_wh),
        ("normal-power", capacity_from_power(demand.normal_power_w, rate, system_voltage), demand.normal_power_w),
        ("emergency-power", capacity_from_power(demand.emergency_power_w, rate, system_voltage), demand.emergency_power_w),
    ]
    top = max(range(len(raw)), key=lambda i: (raw[i][1], -i))
    reqs = tuple(SizingRequirement(c, ah, basis, i == top) for i, (c, ah, basis) in enumerate(raw))
    return PackSizing(demand.role, reqs, layout_pack(raw[top][1], system_voltage, cell))
