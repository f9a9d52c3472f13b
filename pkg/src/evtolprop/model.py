"""Shared domain model: components, drive units, power allocation, severities."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping


class ComponentKind(enum.Enum):
    BATTERY = "Battery"
    MOTOR_CONTROLLER = "MotorController"
    ELECTRIC_MOTOR = "ElectricMotor"
    GEARBOX = "Gearbox"
    FLIGHT_CONTROL_COMPUTER = "FlightControlComputer"
    DISCONNECT_RELAY = "DisconnectRelay"
    DISCONNECT_CLUTCH = "DisconnectClutch"
    ROTOR = "Rotor"
    PROPELLER = "Propeller"

    @classmethod
    def from_name(cls, name: str) -> "ComponentKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown component kind {name!r}")


_DEFAULT_RATES = {
    ComponentKind.BATTERY: 9.31e-5,
    ComponentKind.MOTOR_CONTROLLER: 4.75e-5,
    ComponentKind.ELECTRIC_MOTOR: 9.24e-5,
    ComponentKind.GEARBOX: 5.00e-6,
    ComponentKind.FLIGHT_CONTROL_COMPUTER: 1.57e-5,
    ComponentKind.DISCONNECT_RELAY: 4.60e-5,
    ComponentKind.DISCONNECT_CLUTCH: 4.70e-5,
    ComponentKind.ROTOR: 0.0,
    ComponentKind.PROPELLER: 0.0,
}

_DEFAULT_MODES = {
    ComponentKind.BATTERY: ("failure",),
    ComponentKind.MOTOR_CONTROLLER: ("failure", "malfunction"),
    ComponentKind.ELECTRIC_MOTOR: ("failure", "malfunction"),
    ComponentKind.GEARBOX: ("failure",),
    ComponentKind.FLIGHT_CONTROL_COMPUTER: ("failure", "malfunction"),
    ComponentKind.DISCONNECT_RELAY: ("unintended opening", "failure to operate"),
    ComponentKind.DISCONNECT_CLUTCH: ("unintended opening", "failure to operate"),
    ComponentKind.ROTOR: ("failure",),
    ComponentKind.PROPELLER: ("failure",),
}


def default_failure_rates() -> dict[ComponentKind, float]:
    """Per-hour failure rate for each component kind."""
    return dict(_DEFAULT_RATES)


def default_failure_modes(kind: ComponentKind) -> tuple[str, ...]:
    return _DEFAULT_MODES[kind]


@enum.unique
class Severity(enum.IntEnum):
    """Failure effect classes; larger value is more severe."""

    NO_SAFETY_EFFECT = 0
    MINOR = 1
    MAJOR = 2
    HAZARDOUS = 3
    CATASTROPHIC = 4

    @classmethod
    def from_name(cls, name: str) -> "Severity":
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"nse": "no_safety_effect", "none": "no_safety_effect"}
        key = aliases.get(key, key)
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValueError(f"unknown severity {name!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class Component:
    id: str
    kind: ComponentKind
    failure_rate: float
    failure_modes: tuple[str, ...] = ()
    params: Mapping[str, object] = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self) -> None:
        if not math.isfinite(self.failure_rate) or self.failure_rate < 0:
            raise ValueError(f"{self.id}: failure rate must be finite and >= 0")

    def param(self, name: str, default=None):
        return self.params.get(name, default)


@dataclass(frozen=True)
class DriveUnit:
    """One controller/motor chain driving a rotor or a push propeller."""

    id: str
    rotor: str
    controller: str
    motor: str
    gearbox: str | None = None
    relay: str | None = None
    clutch: str | None = None

    def parts(self) -> tuple[str, ...]:
        ids = (self.controller, self.motor, self.gearbox, self.relay, self.clutch)
        return tuple(i for i in ids if i is not None)


@dataclass(frozen=True)
class Feed:
    primary: str
    alternate: str | None = None

    def __post_init__(self) -> None:
        if self.alternate is not None and self.alternate == self.primary:
            raise ValueError(f"primary and alternate battery are both {self.primary!r}")


@dataclass(frozen=True)
class PowerAllocation:
    """Primary and alternate battery per motor controller."""

    feeds: Mapping[str, Feed] = field(default_factory=dict)

    def primary_of(self, controller: str) -> str:
        return self.feeds[controller].primary

    def controllers_fed_by(self, battery: str) -> list[str]:
        return sorted(c for c, f in self.feeds.items() if f.primary == battery)

    def identity(self) -> dict[str, str]:
        return {c: f.primary for c, f in sorted(self.feeds.items())}


@dataclass(frozen=True)
class Violation:
    requirement: int
    subject: str
    message: str

    def __str__(self) -> str:
        return f"requirement {self.requirement} ({self.subject}): {self.message}"


@dataclass(frozen=True)
class Architecture:
    components: tuple[Component, ...]
    drive_units: tuple[DriveUnit, ...] = ()
    allocation: PowerAllocation = field(default_factory=PowerAllocation)

    def __post_init__(self) -> None:
        seen = set()
        for c in self.components:
            if c.id in seen:
                raise ValueError(f"duplicate component id {c.id!r}")
            seen.add(c.id)

    def component(self, cid: str) -> Component:
        for c in self.components:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def has(self, cid: str) -> bool:
        return any(c.id == cid for c in self.components)

    def of_kind(self, kind: ComponentKind) -> list[Component]:
        return [c for c in self.components if c.kind is kind]

    def unit(self, uid: str) -> DriveUnit:
        for u in self.drive_units:
            if u.id == uid:
                return u
        raise KeyError(uid)

    @property
    def rotor_drives(self) -> dict[str, tuple[DriveUnit, ...]]:
        """Drive units grouped per main rotor, keyed by rotor id."""
        out: dict[str, list[DriveUnit]] = {r.id: [] for r in self.of_kind(ComponentKind.ROTOR)}
        for u in self.drive_units:
            if u.rotor in out:
                out[u.rotor].append(u)
        return {k: tuple(sorted(v, key=lambda u: u.id)) for k, v in sorted(out.items())}

    @property
    def push_drives(self) -> tuple[DriveUnit, ...]:
        props = {p.id for p in self.of_kind(ComponentKind.PROPELLER)}
        return tuple(sorted((u for u in self.drive_units if u.rotor in props), key=lambda u: u.id))

    @property
    def main_drives(self) -> tuple[DriveUnit, ...]:
        return tuple(u for units in self.rotor_drives.values() for u in units)

    @property
    def fcc_count(self) -> int:
        return len(self.of_kind(ComponentKind.FLIGHT_CONTROL_COMPUTER))

    @property
    def batteries(self) -> list[Component]:
        return self.of_kind(ComponentKind.BATTERY)

    def batteries_for(self, units: Iterable[DriveUnit]) -> list[str]:
        ids = set()
        for u in units:
            feed = self.allocation.feeds.get(u.controller)
            if feed is None:
                continue
            ids.add(feed.primary)
            if feed.alternate:
                ids.add(feed.alternate)
        return sorted(ids)

    @property
    def main_batteries(self) -> list[str]:
        return self.batteries_for(self.main_drives)

    @property
    def push_batteries(self) -> list[str]:
        return self.batteries_for(self.push_drives)

    def opposite_rotor(self, rotor: str) -> str | None:
        value = self.component(rotor).param("opposite")
        return str(value) if value is not None else None

    def unit_of_controller(self, controller: str) -> DriveUnit:
        for u in self.drive_units:
            if u.controller == controller:
                return u
        raise KeyError(controller)


def validate_architecture(arch: Architecture) -> list[Violation]:
    """Structural check of the redundancy requirements (1, 4, 5, 7, 8, 10)."""
    out: list[Violation] = []
    rotors = arch.rotor_drives
    if not rotors:
        out.append(Violation(1, "architecture", "no main rotor declared"))
    for rotor, units in rotors.items():
        if len(units) != 2:
            out.append(Violation(1, rotor, f"has {len(units)} drive unit(s), needs exactly 2"))
        gearboxes = [u.gearbox for u in units if u.gearbox is not None]
        if gearboxes and (len(gearboxes) != len(units) or len(set(gearboxes)) != len(gearboxes)):
            out.append(Violation(1, rotor, "geared drive units need one separate gearbox each"))

    for u in arch.main_drives:
        if u.relay is None or u.clutch is None:
            out.append(Violation(4, u.id, "needs both a disconnect relay and a disconnect clutch"))
    for u in arch.push_drives:
        if u.relay is None and u.clutch is None:
            out.append(Violation(4, u.id, "needs at least one disconnect device"))

    for u in arch.drive_units:
        channels = arch.component(u.controller).param("channels", 1) if arch.has(u.controller) else 1
        if int(channels) < 2:
            out.append(Violation(5, u.controller, "motor controller is not dual channel"))

    feeds = arch.allocation.feeds
    for u in arch.main_drives:
        feed = feeds.get(u.controller)
        if feed is None:
            out.append(Violation(7, u.controller, "controller has no battery allocation"))
        elif feed.alternate is None:
            out.append(Violation(7, u.controller, "controller has no alternate battery"))
    main = arch.main_batteries
    push = arch.push_batteries
    if len(main) < 4:
        out.append(Violation(7, "batteries", f"{len(main)} main battery pack(s), needs at least 4"))
    for bat in main:
        n = len([u for u in arch.main_drives if feeds.get(u.controller) and feeds[u.controller].primary == bat])
        if n != 2:
            out.append(Violation(7, bat, f"feeds {n} controller(s) as primary, needs exactly 2"))

    if arch.push_drives:
        if len(push) != 1:
            out.append(Violation(8, "push", "push drive units must share one stand-alone battery"))
        shared = set(push) & set(main)
        if shared:
            out.append(Violation(8, ",".join(sorted(shared)), "push battery also feeds main rotor controllers"))
    else:
        out.append(Violation(8, "push", "no push propeller drive units declared"))

    if arch.fcc_count < 3:
        out.append(Violation(10, "fcc", f"{arch.fcc_count} flight control computer(s), needs at least 3"))
    return out
