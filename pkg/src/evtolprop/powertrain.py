"""Drive-chain sizing: hover power, motor operating points, losses and masses."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .battery import PackLayout
from .model import Architecture

GRAVITY = 9.80665
SPEED_OF_SOUND = 340.3
_REL_TOL = 1e-9


class EnvelopeError(ValueError):
    """Operating point outside a component's torque, speed or power limits."""

    def __init__(self, limit: str, value: float, bound: float, where: str = "") -> None:
        self.limit = limit
        self.value = value
        self.bound = bound
        prefix = f"{where}: " if where else ""
        super().__init__(f"{prefix}{limit} {value:.6g} exceeds limit {bound:.6g}")


def rpm_to_rad(rpm: float) -> float:
    return rpm * math.pi / 30.0


def rad_to_rpm(omega: float) -> float:
    return omega * 30.0 / math.pi


@dataclass(frozen=True)
class RotorSpec:
    radius_m: float
    blades: int = 2
    tip_mach_normal: float = 0.45
    tip_mach_emergency: float = 0.65
    disc_loading: float | None = None
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self) -> None:
        if self.radius_m <= 0:
            raise ValueError("rotor radius must be > 0")
        if not self.tip_mach_normal < self.tip_mach_emergency:
            raise ValueError("normal tip Mach must be below the emergency tip Mach")

    @property
    def disc_area(self) -> float:
        return math.pi * self.radius_m**2

    def speed_at_tip_mach(self, mach: float) -> float:
        """Rotor speed in rpm for a given tip Mach number."""
        return rad_to_rpm(mach * self.speed_of_sound / self.radius_m)

    @property
    def normal_rpm(self) -> float:
        return self.speed_at_tip_mach(self.tip_mach_normal)

    @property
    def emergency_rpm(self) -> float:
        return self.speed_at_tip_mach(self.tip_mach_emergency)


def hover_power(rotor: RotorSpec, thrust_n: float, air_density: float = 1.225,
                figure_of_merit: float = 1.0) -> float:
    """Momentum-theory hover shaft power of one rotor, W."""
    if thrust_n < 0:
        raise ValueError("thrust must be >= 0")
    if not 0.0 < figure_of_merit <= 1.0:
        raise ValueError("figure of merit must lie in (0, 1]")
    if air_density <= 0:
        raise ValueError("air density must be > 0")
    ideal = thrust_n**1.5 / math.sqrt(2.0 * air_density * rotor.disc_area)
    return ideal / figure_of_merit


@dataclass(frozen=True, eq=False)
class EfficiencyMap:
    """Gridded motor efficiency over (speed rpm, torque Nm) with an operating envelope.

    Points below the first grid line are clamped onto it; points above the
    envelope are rejected.
    """

    speeds: tuple[float, ...]
    torques: tuple[float, ...]
    values: np.ndarray
    max_torque: float
    max_speed: float
    max_power: float = math.inf
    name: str = ""

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.speeds), len(self.torques)):
            raise ValueError(f"map {self.name!r}: grid shape {vals.shape} does not match axes")
        if np.any(np.diff(self.speeds) <= 0) or np.any(np.diff(self.torques) <= 0):
            raise ValueError(f"map {self.name!r}: axes must be strictly increasing")
        if np.any(vals <= 0) or np.any(vals > 1):
            raise ValueError(f"map {self.name!r}: efficiencies must lie in (0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_csv(cls, path: str | Path, max_torque: float | None = None, max_speed: float | None = None,
                 max_power: float = math.inf, name: str | None = None) -> "EfficiencyMap":
        """Read `rpm,torque_nm,efficiency` rows forming a complete rectangular grid."""
        path = Path(path)
        cells: dict[tuple[float, float], float] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                key = (float(row["rpm"]), float(row["torque_nm"]))
                if key in cells:
                    raise ValueError(f"{path}: duplicate grid node {key}")
                cells[key] = float(row["efficiency"])
        speeds = sorted({k[0] for k in cells})
        torques = sorted({k[1] for k in cells})
        if len(cells) != len(speeds) * len(torques):
            raise ValueError(f"{path}: grid is not rectangular")
        values = np.array([[cells[(s, t)] for t in torques] for s in speeds])
        return cls(
            tuple(speeds), tuple(torques), values,
            max_torque=torques[-1] if max_torque is None else max_torque,
            max_speed=speeds[-1] if max_speed is None else max_speed,
            max_power=max_power,
            name=path.stem if name is None else name,
        )

    def with_envelope(self, max_torque: float, max_speed: float, max_power: float = math.inf) -> "EfficiencyMap":
        return EfficiencyMap(self.speeds, self.torques, self.values, max_torque, max_speed, max_power, self.name)

    def torque_limit(self, speed_rpm: float) -> float:
        omega = rpm_to_rad(speed_rpm)
        if omega <= 0 or math.isinf(self.max_power):
            return self.max_torque
        return min(self.max_torque, self.max_power / omega)

    def check(self, speed_rpm: float, torque: float, where: str = "") -> None:
        def over(value: float, bound: float) -> bool:
            return value > bound * (1.0 + _REL_TOL)

        if speed_rpm < 0 or torque < 0:
            raise ValueError("speed and torque must be >= 0")
        if over(speed_rpm, self.max_speed):
            raise EnvelopeError("speed", speed_rpm, self.max_speed, where)
        if over(torque, self.max_torque):
            raise EnvelopeError("torque", torque, self.max_torque, where)
        power = torque * rpm_to_rad(speed_rpm)
        if over(power, self.max_power):
            raise EnvelopeError("power", power, self.max_power, where)

    def efficiency(self, speed_rpm: float, torque: float) -> float:
        """Bilinear interpolation; exact at grid nodes."""
        i, fs = _bracket(self.speeds, speed_rpm)
        j, ft = _bracket(self.torques, torque)
        v = self.values
        low = v[i, j] * (1 - ft) + v[i, j + 1] * ft if ft else v[i, j]
        if not fs:
            return float(low)
        high = v[i + 1, j] * (1 - ft) + v[i + 1, j + 1] * ft if ft else v[i + 1, j]
        return float(low * (1 - fs) + high * fs)


def _bracket(axis: Sequence[float], x: float) -> tuple[int, float]:
    """Lower node index and fractional offset, clamped to the axis range."""
    if len(axis) == 1 or x <= axis[0]:
        return 0, 0.0
    if x >= axis[-1]:
        return len(axis) - 1, 0.0
    i = int(np.searchsorted(axis, x, side="right")) - 1
    frac = (x - axis[i]) / (axis[i + 1] - axis[i])
    return i, float(frac)


@dataclass(frozen=True)
class Motor:
    name: str
    map: EfficiencyMap
    mass_kg: float


@dataclass(frozen=True)
class Controller:
    """Motor controller with an affine loss model: fixed + proportional * output."""

    name: str
    mass_kg: float
    fixed_loss_w: float = 0.0
    proportional_loss: float = 0.0
    max_power_w: float = math.inf

    def loss(self, output_w: float) -> float:
        if output_w <= 0:
            return 0.0
        return self.fixed_loss_w + self.proportional_loss * output_w

    def input_power(self, output_w: float) -> float:
        return output_w + self.loss(output_w)

    def efficiency(self, output_w: float) -> float:
        return output_w / self.input_power(output_w) if output_w > 0 else 1.0


@dataclass(frozen=True)
class Gearbox:
    name: str
    ratio: float
    efficiency: float = 0.985
    mass_kg: float = 0.0
    max_output_torque: float = math.inf

    def __post_init__(self) -> None:
        if self.ratio < 1:
            raise ValueError("gear ratio must be >= 1")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError("gearbox efficiency must lie in (0, 1]")


@dataclass(frozen=True)
class DriveChain:
    name: str
    motor: Motor
    controller: Controller
    gearbox: Gearbox | None = None

    @property
    def mass_kg(self) -> float:
        return self.motor.mass_kg + self.controller.mass_kg + (self.gearbox.mass_kg if self.gearbox else 0.0)

    @property
    def ratio(self) -> float:
        return self.gearbox.ratio if self.gearbox else 1.0

    @property
    def gear_efficiency(self) -> float:
        return self.gearbox.efficiency if self.gearbox else 1.0

    def motor_side(self, rotor_rpm: float, rotor_torque: float) -> tuple[float, float]:
        """Motor speed and torque that deliver the given rotor speed and torque."""
        return rotor_rpm * self.ratio, rotor_torque / self.ratio / self.gear_efficiency

    def rotor_speed(self, shaft_w: float, hover_shaft_w: float, hover_rpm: float) -> float:
        """Rotor speed for a shaft power: cube law, raised if the motor would exceed its torque limit."""
        if shaft_w <= 0:
            return 0.0
        rpm = hover_rpm * (shaft_w / hover_shaft_w) ** (1.0 / 3.0)
        max_rotor_torque = self.motor.map.max_torque * self.ratio * self.gear_efficiency
        if self.gearbox is not None:
            max_rotor_torque = min(max_rotor_torque, self.gearbox.max_output_torque)
        return max(rpm, rad_to_rpm(shaft_w / max_rotor_torque))


@dataclass(frozen=True)
class OperatingPoint:
    speed_rpm: float
    torque_nm: float
    mechanical_w: float
    electrical_w: float
    efficiency: float

    @classmethod
    def at(cls, speed_rpm: float, torque_nm: float, efficiency: float) -> "OperatingPoint":
        if not 0.0 < efficiency <= 1.0:
            raise ValueError("efficiency must lie in (0, 1]")
        mech = torque_nm * rpm_to_rad(speed_rpm)
        return cls(speed_rpm, torque_nm, mech, mech / efficiency, efficiency)


def operating_point(chain: DriveChain, rotor_rpm: float, rotor_torque: float) -> OperatingPoint:
    """Motor operating point for a rotor demand, checked against every envelope."""
    if chain.gearbox is not None and rotor_torque > chain.gearbox.max_output_torque * (1 + _REL_TOL):
        raise EnvelopeError("gearbox output torque", rotor_torque, chain.gearbox.max_output_torque, chain.name)
    speed, torque = chain.motor_side(rotor_rpm, rotor_torque)
    chain.motor.map.check(speed, torque, chain.motor.name)
    return OperatingPoint.at(speed, torque, chain.motor.map.efficiency(speed, torque))


def heat_loss(point: OperatingPoint) -> float:
    """Motor heat: electrical input minus mechanical output."""
    return point.electrical_w - point.mechanical_w


def controller_heat(controller: Controller, input_w: float) -> float:
    """Controller heat for a given input power, P_in * (1 - efficiency)."""
    if input_w <= 0:
        return 0.0
    output = (input_w - controller.fixed_loss_w) / (1.0 + controller.proportional_loss)
    return input_w - max(output, 0.0)


@dataclass(frozen=True)
class ChainPoint:
    """Full power flow through one drive chain at one rotor demand."""

    rotor_rpm: float
    rotor_torque: float
    motor: OperatingPoint
    gearbox_loss_w: float
    controller_loss_w: float
    input_w: float

    @property
    def shaft_w(self) -> float:
        return self.rotor_torque * rpm_to_rad(self.rotor_rpm)

    @property
    def motor_loss_w(self) -> float:
        return heat_loss(self.motor)

    @property
    def total_loss_w(self) -> float:
        return self.motor_loss_w + self.gearbox_loss_w + self.controller_loss_w


def evaluate_chain(chain: DriveChain, rotor_rpm: float, rotor_torque: float) -> ChainPoint:
    motor = operating_point(chain, rotor_rpm, rotor_torque)
    shaft = rotor_torque * rpm_to_rad(rotor_rpm)
    gear_loss = motor.mechanical_w - shaft
    if motor.electrical_w > chain.controller.max_power_w * (1 + _REL_TOL):
        raise EnvelopeError("controller output power", motor.electrical_w, chain.controller.max_power_w,
                            chain.controller.name)
    ctrl_loss = chain.controller.loss(motor.electrical_w)
    return ChainPoint(rotor_rpm, rotor_torque, motor, gear_loss, ctrl_loss, motor.electrical_w + ctrl_loss)


def evaluate_shaft_power(chain: DriveChain, shaft_w: float, hover_shaft_w: float, hover_rpm: float) -> ChainPoint:
    rpm = chain.rotor_speed(shaft_w, hover_shaft_w, hover_rpm)
    torque = shaft_w / rpm_to_rad(rpm) if rpm > 0 else 0.0
    if shaft_w <= 0:
        zero = OperatingPoint(0.0, 0.0, 0.0, 0.0, 1.0)
        return ChainPoint(0.0, 0.0, zero, 0.0, 0.0, 0.0)
    return evaluate_chain(chain, rpm, torque)


def heat_at_input(chain: DriveChain, input_w: float, hover_shaft_w: float, hover_rpm: float) -> ChainPoint:
    """Chain point whose controller input equals `input_w`, found by bisection on shaft power."""
    if input_w <= 0:
        return evaluate_shaft_power(chain, 0.0, hover_shaft_w, hover_rpm)
    low, high = 0.0, input_w
    for _ in range(80):
        mid = 0.5 * (low + high)
        try:
            too_high = evaluate_shaft_power(chain, mid, hover_shaft_w, hover_rpm).input_w > input_w
        except EnvelopeError:
            too_high = True
        if too_high:
            high = mid
        else:
            low = mid
    point = evaluate_shaft_power(chain, low, hover_shaft_w, hover_rpm)
    if point.input_w < input_w * (1 - 1e-6):
        raise EnvelopeError("input power", input_w, point.input_w, chain.name)
    return point


@dataclass(frozen=True)
class Demand:
    """Rotor-side demand for one drive unit."""

    name: str
    shaft_w: float
    emergency: bool = False


@dataclass(frozen=True)
class ComparisonRow:
    point: str
    first_efficiency: float | None
    second_efficiency: float | None
    first_heat_w: float | None
    second_heat_w: float | None
    first_error: str | None = None
    second_error: str | None = None

    def swapped(self) -> "ComparisonRow":
        return ComparisonRow(self.point, self.second_efficiency, self.first_efficiency,
                             self.second_heat_w, self.first_heat_w, self.second_error, self.first_error)


@dataclass(frozen=True)
class Comparison:
    first: str
    second: str
    first_mass_kg: float
    second_mass_kg: float
    rows: tuple[ComparisonRow, ...]
    units: int

    @property
    def mass_difference_kg(self) -> float:
        return self.second_mass_kg - self.first_mass_kg

    @property
    def mass_saving(self) -> float:
        """Relative saving of the second chain against the first."""
        return -self.mass_difference_kg / self.first_mass_kg if self.first_mass_kg else 0.0

    @property
    def heat_difference_w(self) -> float:
        total = 0.0
        for r in self.rows:
            if r.first_heat_w is not None and r.second_heat_w is not None:
                total += r.second_heat_w - r.first_heat_w
        return total

    def efficiency_range(self, which: str = "first") -> tuple[float, float]:
        attr = f"{which}_efficiency"
        vals = [getattr(r, attr) for r in self.rows if getattr(r, attr) is not None]
        return (min(vals), max(vals)) if vals else (math.nan, math.nan)

    def swapped(self) -> "Comparison":
        return Comparison(self.second, self.first, self.second_mass_kg, self.first_mass_kg,
                          tuple(r.swapped() for r in self.rows), self.units)


def _try_point(chain: DriveChain, demand: Demand, hover_shaft_w: float, hover_rpm: float):
    try:
        return evaluate_shaft_power(chain, demand.shaft_w, hover_shaft_w, hover_rpm), None
    except EnvelopeError as exc:
        return None, str(exc)


def compare_architectures(first: DriveChain, second: DriveChain, demands: Sequence[Demand],
                          hover_shaft_w: float, hover_rpm: float, units: int = 8) -> Comparison:
    """Motor efficiency, chain heat and total mass of two drive chains over the same demands."""
    rows = []
    for d in demands:
        a, a_err = _try_point(first, d, hover_shaft_w, hover_rpm)
        b, b_err = _try_point(second, d, hover_shaft_w, hover_rpm)
        rows.append(ComparisonRow(
            d.name,
            a.motor.efficiency if a else None, b.motor.efficiency if b else None,
            a.total_loss_w if a else None, b.total_loss_w if b else None,
            a_err, b_err,
        ))
    return Comparison(first.name, second.name, units * first.mass_kg, units * second.mass_kg, tuple(rows), units)


@dataclass(frozen=True)
class MassRow:
    group: str
    item: str
    unit_mass_kg: float
    count: int

    @property
    def total_kg(self) -> float:
        return self.unit_mass_kg * self.count


@dataclass(frozen=True)
class MassTable:
    rows: tuple[MassRow, ...] = field(default_factory=tuple)

    @property
    def total_kg(self) -> float:
        return sum(r.total_kg for r in self.rows)

    def group_total(self, group: str) -> float:
        return sum(r.total_kg for r in self.rows if r.group == group)

    def row(self, group: str, item: str) -> MassRow:
        for r in self.rows:
            if r.group == group and r.item == item:
                return r
        raise KeyError((group, item))


def _chain_rows(group: str, chain: DriveChain, count: int) -> list[MassRow]:
    rows = [MassRow(group, "motor", chain.motor.mass_kg, count),
            MassRow(group, "controller", chain.controller.mass_kg, count)]
    if chain.gearbox is not None:
        rows.append(MassRow(group, "gearbox", chain.gearbox.mass_kg, count))
    return rows


def mass_rollup(arch: Architecture, main_chain: DriveChain | None, push_chain: DriveChain | None,
                packs: Mapping[str, PackLayout]) -> MassTable:
    """Per-unit and total masses of the main drives, push drives and battery packs."""
    rows: list[MassRow] = []
    if arch.main_drives and main_chain is not None:
        rows += _chain_rows("main rotor propulsion", main_chain, len(arch.main_drives))
    if arch.push_drives and push_chain is not None:
        rows += _chain_rows("push propulsion", push_chain, len(arch.push_drives))
    by_mass: dict[tuple[str, float], int] = {}
    for bat in [b.id for b in arch.batteries]:
        if bat in packs:
            role = "push pack" if bat in arch.push_batteries else "main pack"
            key = (role, packs[bat].mass_kg)
            by_mass[key] = by_mass.get(key, 0) + 1
    for (role, mass), count in sorted(by_mass.items()):
        rows.append(MassRow("battery packs", role, mass, count))
    return MassTable(tuple(rows))
