"""Typed model construction from a parsed .adl document, with span-carrying schema errors."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from . import adl
from .adl import Block, Document, Ident, ParseError, Section, SourceSpan
from .battery import CellSpec
from .fha import FhaTable, FunctionFailure, Hazard
from .fta import BasicEvent, FaultTree, FaultTreeError, Gate, evaluate_top
from .mission import MissionConfig, MissionProfile, PackRole, Segment, SEGMENT_KINDS, build_profile
from .model import Architecture, Component, ComponentKind, DriveUnit, Feed, PowerAllocation, Severity, \
    default_failure_modes, default_failure_rates
from .powertrain import Controller, Demand, DriveChain, EfficiencyMap, Gearbox, GRAVITY, Motor, RotorSpec, \
    hover_power
from .systems import FCC_ERROR_MODELS, system_trees
from .thermal import AirModel, CoolantLoop, LINK_KINDS, ThermalLimits, ThermalLink, ThermalNetwork, \
    ThermalNode

_REQUIRED = object()
BUNDLED_MODELS = ("horizonuam",)


class _Errors:
    def __init__(self, file: str) -> None:
        self.file = file
        self.items: list[ParseError] = []

    def add(self, span: SourceSpan | None, message: str, expected: tuple[str, ...] = ()) -> None:
        self.items.append(ParseError(span or SourceSpan(self.file, 1, 1), message, expected))

    def raise_if_any(self) -> None:
        if self.items:
            first = self.items[0]
            first.errors = self.items[: adl.MAX_ERRORS]
            raise first


class _Fields:
    """Typed access to a block's fields; problems are recorded, not raised."""

    def __init__(self, block: Block, errors: _Errors, known: tuple[str, ...] | None = None) -> None:
        self.block = block
        self.errors = errors
        self.used: set[str] = set()
        if known is not None:
            for name, _ in block.fields:
                if name not in known:
                    errors.add(block.span_of(name), f"{block.kind} {block.id}: unknown field {name!r}", known)

    def _raw(self, name: str, default: Any):
        self.used.add(name)
        if not self.block.has(name):
            if default is _REQUIRED:
                self.errors.add(self.block.span, f"{self.block.kind} {self.block.id}: missing field {name!r}")
            return None, True
        return self.block.get(name), False

    def _bad(self, name: str, message: str) -> None:
        self.errors.add(self.block.span_of(name), f"{self.block.kind} {self.block.id}: field {name!r} {message}")

    def num(self, name: str, default: Any = _REQUIRED, minimum: float | None = None, positive: bool = False):
        value, missing = self._raw(name, default)
        if missing:
            return None if default is _REQUIRED else default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self._bad(name, f"must be a number, got {value!r}")
            return None if default is _REQUIRED else default
        value = float(value)
        if not math.isfinite(value):
            self._bad(name, "must be finite")
        elif positive and value <= 0:
            self._bad(name, f"must be > 0, got {value:g}")
        elif minimum is not None and value < minimum:
            self._bad(name, f"must be >= {minimum:g}, got {value:g}")
        return value

    def int(self, name: str, default: Any = _REQUIRED, minimum: int | None = None):
        value = self.num(name, default, minimum)
        if value is None:
            return None
        if value != int(value):
            self._bad(name, f"must be an integer, got {value:g}")
        return int(value)

    def ident(self, name: str, default: Any = _REQUIRED, choices: tuple[str, ...] | None = None):
        value, missing = self._raw(name, default)
        if missing:
            return None if default is _REQUIRED else default
        if not isinstance(value, str) or isinstance(value, tuple):
            self._bad(name, f"must be a name, got {value!r}")
            return None if default is _REQUIRED else default
        if choices is not None and value not in choices:
            self.errors.add(self.block.span_of(name), f"{self.block.kind} {self.block.id}: "
                            f"field {name!r} has unknown value {value!r}", choices)
        return str(value)

    def flag(self, name: str, default: bool = False) -> bool:
        value, missing = self._raw(name, default)
        if missing:
            return default
        if value in (0, 1) and not isinstance(value, str):
            return bool(value)
        if isinstance(value, str) and value in ("true", "false"):
            return value == "true"
        self._bad(name, f"must be true, false, 0 or 1, got {value!r}")
        return default

    def names(self, name: str, default: Any = _REQUIRED) -> tuple[str, ...]:
        value, missing = self._raw(name, default)
        if missing:
            return () if default is _REQUIRED else tuple(default)
        items = value if isinstance(value, tuple) else (value,)
        if not all(isinstance(v, str) for v in items):
            self._bad(name, "must be a list of names")
            return ()
        return tuple(str(v) for v in items)

    def numbers(self, name: str, default: Any = _REQUIRED) -> tuple[float, ...]:
        value, missing = self._raw(name, default)
        if missing:
            return () if default is _REQUIRED else tuple(default)
        items = value if isinstance(value, tuple) else (value,)
        if not all(isinstance(v, (int, float)) and not isinstance(v, (bool, str)) for v in items):
            self._bad(name, "must be a list of numbers")
            return ()
        return tuple(float(v) for v in items)

    def rest(self) -> dict[str, Any]:
        return {k: v for k, v in self.block.fields if k not in self.used}


class _Values:
    """Typed access to a section's key-value entries."""

    def __init__(self, section: Section | None, errors: _Errors, known: tuple[str, ...] = (),
                 prefixes: tuple[str, ...] = ()) -> None:
        self.entries = {kv.key: kv for kv in section.keyvalues()} if section else {}
        self.errors = errors
        self.section = section
        for kv in self.entries.values():
            if known and kv.key not in known and not kv.key.startswith(prefixes):
                errors.add(kv.span, f"[{section.name}]: unknown key {kv.key!r}", known)

    def has(self, key: str) -> bool:
        return key in self.entries

    def _bad(self, key: str, message: str) -> None:
        self.errors.add(self.entries[key].span, f"[{self.section.name}] {key}: {message}")

    def num(self, key: str, default: Any = _REQUIRED, positive: bool = False, minimum: float | None = None):
        if key not in self.entries:
            if default is _REQUIRED:
                self.errors.add(self.section.span if self.section else None, f"missing key {key!r}")
                return None
            return default
        value = self.entries[key].value
        if isinstance(value, (bool, str, tuple)):
            self._bad(key, f"must be a number, got {value!r}")
            return None if default is _REQUIRED else default
        value = float(value)
        if positive and value <= 0:
            self._bad(key, f"must be > 0, got {value:g}")
        if minimum is not None and value < minimum:
            self._bad(key, f"must be >= {minimum:g}, got {value:g}")
        return value

    def int(self, key: str, default: Any = _REQUIRED, minimum: int | None = None):
        value = self.num(key, default, minimum=minimum)
        if value is None:
            return None
        if value != int(value):
            self._bad(key, f"must be an integer, got {value:g}")
        return int(value)

    def ident(self, key: str, default: Any = _REQUIRED, choices: tuple[str, ...] | None = None):
        if key not in self.entries:
            if default is _REQUIRED:
                self.errors.add(self.section.span if self.section else None, f"missing key {key!r}")
                return None
            return default
        value = self.entries[key].value
        if not isinstance(value, str):
            self._bad(key, f"must be a name, got {value!r}")
            return None if default is _REQUIRED else default
        if choices is not None and value not in choices:
            self.errors.add(self.entries[key].span, f"[{self.section.name}] {key}: unknown value {value!r}", choices)
        return str(value)

    def names(self, key: str) -> tuple[str, ...]:
        if key not in self.entries:
            return ()
        value = self.entries[key].value
        items = value if isinstance(value, tuple) else (value,)
        if not all(isinstance(v, str) for v in items):
            self._bad(key, "must be a list of names")
            return ()
        return tuple(str(v) for v in items)


# -- section loaders -------------------------------------------------------


def _components(section: Section | None, errors: _Errors) -> tuple[Component, ...]:
    if section is None:
        return ()
    rates = default_failure_rates()
    out = []
    for b in section.blocks():
        try:
            kind = ComponentKind.from_name(b.kind)
        except ValueError:
            continue  # reported by the parser
        f = _Fields(b, errors)
        rate = f.num("lambda", rates[kind], minimum=0.0)
        modes = f.names("modes", default_failure_modes(kind))
        params = {k: (str(v) if isinstance(v, Ident) else v) for k, v in f.rest().items()}
        out.append(Component(b.id, kind, rate, modes, params))
    return tuple(out)


def _drive_units(section: Section | None, components: Mapping[str, Component], errors: _Errors):
    if section is None:
        return ()
    expected = {
        "rotor": (ComponentKind.ROTOR, ComponentKind.PROPELLER),
        "controller": (ComponentKind.MOTOR_CONTROLLER,),
        "motor": (ComponentKind.ELECTRIC_MOTOR,),
        "gearbox": (ComponentKind.GEARBOX,),
        "relay": (ComponentKind.DISCONNECT_RELAY,),
        "clutch": (ComponentKind.DISCONNECT_CLUTCH,),
    }
    out = []
    for b in section.blocks():
        if b.kind != "DriveUnit":
            errors.add(b.kind_span or b.span, f"unknown architecture entry kind {b.kind!r}", ("DriveUnit",))
            continue
        f = _Fields(b, errors, tuple(expected))
        refs = {}
        for name, kinds in expected.items():
            required = _REQUIRED if name in ("rotor", "controller", "motor") else None
            ref = f.ident(name, required)
            if ref is None:
                refs[name] = None
                continue
            comp = components.get(ref)
            if comp is None:
                errors.add(b.span_of(name), f"DriveUnit {b.id}: {name} {ref!r} is not a declared component")
            elif comp.kind not in kinds:
                errors.add(b.span_of(name), f"DriveUnit {b.id}: {name} {ref!r} is a {comp.kind.value}, "
                           f"expected {' or '.join(k.value for k in kinds)}")
            refs[name] = ref
        if refs["rotor"] and refs["controller"] and refs["motor"]:
            out.append(DriveUnit(b.id, **refs))
    return tuple(out)


def _allocation(section: Section | None, components: Mapping[str, Component], errors: _Errors) -> PowerAllocation:
    if section is None:
        return PowerAllocation()
    feeds = {}
    for kv in section.keyvalues():
        comp = components.get(kv.key)
        if comp is None or comp.kind is not ComponentKind.MOTOR_CONTROLLER:
            errors.add(kv.span, f"[allocation]: {kv.key!r} is not a declared motor controller")
            continue
        items = kv.value if isinstance(kv.value, tuple) else (kv.value,)
        if not 1 <= len(items) <= 2 or not all(isinstance(i, str) for i in items):
            errors.add(kv.span, f"[allocation] {kv.key}: expected 'primary' or 'primary, alternate' battery names")
            continue
        for bat in items:
            c = components.get(bat)
            if c is None or c.kind is not ComponentKind.BATTERY:
                errors.add(kv.span, f"[allocation] {kv.key}: {bat!r} is not a declared battery")
        if len(items) == 2 and items[0] == items[1]:
            errors.add(kv.span, f"[allocation] {kv.key}: primary and alternate are both {items[0]!r}")
            continue
        feeds[kv.key] = Feed(str(items[0]), str(items[1]) if len(items) == 2 else None)
    return PowerAllocation(feeds)


@dataclass(frozen=True)
class TreeSetup:
    exposure_h: float = 1.0
    generate_system: bool = False
    fcc_error_model: str = "pair"


def _fault_trees(section: Section | None, arch: Architecture, errors: _Errors):
    vals = _Values(section, errors, ("exposure", "generate", "fcc_error_model"))
    setup = TreeSetup(
        vals.num("exposure", 1.0, positive=True),
        vals.ident("generate", "none", ("none", "system")) == "system",
        vals.ident("fcc_error_model", "pair", FCC_ERROR_MODELS),
    )
    trees: dict[str, FaultTree] = {}
    if setup.generate_system and arch.drive_units:
        trees.update(system_trees(arch, setup.exposure_h, setup.fcc_error_model))
    if section is None:
        return setup, trees

    gates = {g.id: Gate(g.id, g.op, tuple(g.children), g.k) for g in section.gates}
    event_blocks = {b.id: b for b in section.blocks("BasicEvent")}
    tree_blocks = section.blocks("FaultTree")
    components = {c.id: c for c in arch.components}

    plain: dict[str, BasicEvent] = {}
    linked: dict[str, tuple[Block, str]] = {}
    for b in event_blocks.values():
        f = _Fields(b, errors, ("lambda", "exposure", "probability", "tree", "component", "description"))
        comp_id = f.ident("component", None)
        if comp_id is not None and comp_id not in components:
            errors.add(b.span_of("component"), f"BasicEvent {b.id}: unknown component {comp_id!r}")
        source = [n for n in ("lambda", "probability", "tree") if b.has(n)]
        if len(source) > 1:
            errors.add(b.span, f"BasicEvent {b.id}: give only one of lambda, probability or tree")
            continue
        description = b.get("description", "")
        if b.has("tree"):
            linked[b.id] = (b, f.ident("tree"))
            continue
        if b.has("probability"):
            p = f.num("probability", minimum=0.0)
            if p is not None and p > 1:
                errors.add(b.span_of("probability"), f"BasicEvent {b.id}: probability must lie in [0, 1]")
                continue
            plain[b.id] = BasicEvent(b.id, 0.0, 1.0, p, comp_id, str(description))
            continue
        if b.has("lambda"):
            rate = f.num("lambda", minimum=0.0)
        elif comp_id in components:
            rate = components[comp_id].failure_rate
        else:
            errors.add(b.span, f"BasicEvent {b.id}: needs lambda, probability, tree or a component")
            continue
        exposure = f.num("exposure", setup.exposure_h, positive=True)
        if rate is not None and exposure is not None:
            plain[b.id] = BasicEvent(b.id, rate, exposure, None, comp_id, str(description))

    def component_event(cid: str) -> BasicEvent:
        c = components[cid]
        return BasicEvent(cid, c.failure_rate, setup.exposure_h, None, cid, f"{cid} failure")

    def build(block: Block) -> FaultTree | None:
        f = _Fields(block, errors, ("top", "description"))
        top = f.ident("top")
        if top is None:
            return None
        if top not in gates and top not in event_blocks and top not in components:
            errors.add(block.span_of("top"), f"FaultTree {block.id}: unknown top event {top!r}")
            return None
        events: dict[str, BasicEvent] = {}
        seen: set[str] = set()
        stack = [top]
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            if node in gates:
                stack.extend(gates[node].children)
            elif node in plain:
                events[node] = plain[node]
            elif node in linked:
                resolved = resolve(node)
                if resolved is None:
                    return None
                events[node] = resolved
            elif node in components:
                events[node] = component_event(node)
        try:
            return FaultTree.build(top, [gates[g] for g in sorted(seen & set(gates))], events.values(), block.id)
        except FaultTreeError as exc:
            errors.add(block.span, f"FaultTree {block.id}: {exc}")
            return None

    resolving: list[str] = []
    resolved_cache: dict[str, BasicEvent | None] = {}
    block_by_id = {b.id: b for b in tree_blocks}

    def resolve(event_id: str) -> BasicEvent | None:
        if event_id in resolved_cache:
            return resolved_cache[event_id]
        b, tree_id = linked[event_id]
        if event_id in resolving:
            errors.add(b.span, f"BasicEvent {event_id}: tree reference cycle through {' -> '.join(resolving)}")
            return None
        resolving.append(event_id)
        tree = tree_of(tree_id, b)
        resolving.pop()
        event = None
        if tree is not None:
            event = BasicEvent(event_id, 0.0, 1.0, evaluate_top(tree), b.get("component"),
                               str(b.get("description", f"top event of {tree_id}")))
        resolved_cache[event_id] = event
        return event

    building: set[str] = set()

    def tree_of(tree_id: str | None, ref: Block) -> FaultTree | None:
        # Declared trees take precedence over generated ones of the same name.
        if tree_id in block_by_id:
            if tree_id not in built:
                if tree_id in building:
                    errors.add(ref.span, f"fault tree {tree_id!r} refers to itself through event {ref.id!r}")
                    return None
                building.add(tree_id)
                built[tree_id] = build(block_by_id[tree_id])
                building.discard(tree_id)
            return built[tree_id]
        if tree_id in trees:
            return trees[tree_id]
        errors.add(ref.span_of("tree"), f"BasicEvent {ref.id}: unknown fault tree {tree_id!r}")
        return None

    built: dict[str, FaultTree | None] = {}
    for b in tree_blocks:
        t = tree_of(b.id, b)
        if t is not None:
            trees[b.id] = t
    return setup, trees


def _fha(section: Section | None, trees: Mapping[str, FaultTree], errors: _Errors) -> FhaTable:
    rows_section = section if section and section.blocks("FunctionFailure") else \
        adl.parse(_bundled_text("fha_default.adl"), "fha_default.adl").section("fha")
    functions = []
    row_ids = {b.id for b in rows_section.blocks("FunctionFailure")}
    links: dict[str, str] = {}
    allowables: dict[Severity, float] = {}
    if section is not None:
        for kv in section.keyvalues():
            if kv.key.startswith("allowable_"):
                try:
                    sev = Severity.from_name(kv.key[len("allowable_"):])
                except ValueError as exc:
                    errors.add(kv.span, f"[fha]: {exc}")
                    continue
                if isinstance(kv.value, (str, tuple)) or not 0 < float(kv.value) < 1:
                    errors.add(kv.span, f"[fha] {kv.key}: must be a probability in (0, 1)")
                    continue
                allowables[sev] = float(kv.value)
            elif kv.key in row_ids:
                if not isinstance(kv.value, str) or isinstance(kv.value, tuple):
                    errors.add(kv.span, f"[fha] {kv.key}: expected one fault tree name")
                elif kv.value not in trees:
                    errors.add(kv.span, f"[fha] {kv.key}: unknown fault tree {kv.value!r}")
                else:
                    links[kv.key] = str(kv.value)
            else:
                errors.add(kv.span, f"[fha]: {kv.key!r} is neither a function failure row nor allowable_<severity>")
    for b in rows_section.blocks("FunctionFailure"):
        f = _Fields(b, errors, ("function", "mode", "severity", "tree"))
        function, mode, sev = f.ident("function"), f.ident("mode"), f.ident("severity")
        tree = f.ident("tree", None) or links.get(b.id)
        if tree is not None and tree not in trees:
            errors.add(b.span_of("tree"), f"FunctionFailure {b.id}: unknown fault tree {tree!r}")
            tree = None
        try:
            functions.append(FunctionFailure(b.id, function, mode, Severity.from_name(sev or ""), tree))
        except ValueError as exc:
            errors.add(b.span, f"FunctionFailure {b.id}: {exc}")
    hazards = []
    for b in (section.blocks("Hazard") if section else []):
        f = _Fields(b, errors, ("title", "severity", "contributors", "trees", "allowable"))
        sev_name = f.ident("severity")
        try:
            sev = Severity.from_name(sev_name or "")
        except ValueError as exc:
            errors.add(b.span_of("severity"), f"Hazard {b.id}: {exc}")
            continue
        tree_ids = f.names("trees", ())
        for t in tree_ids:
            if t not in trees:
                errors.add(b.span_of("trees"), f"Hazard {b.id}: unknown fault tree {t!r}")
        override = f.num("allowable", None, positive=True)
        hazards.append(Hazard(b.id, str(b.get("title", b.id)), sev, f.int("contributors", 1, minimum=1),
                              tree_ids, override))
    for b in (section.blocks() if section else []):
        if b.kind not in ("Hazard", "FunctionFailure"):
            errors.add(b.kind_span or b.span, f"unknown fha entry kind {b.kind!r}", ("Hazard", "FunctionFailure"))
    return FhaTable(tuple(functions), tuple(hazards), allowables)


@dataclass(frozen=True)
class MissionSetup:
    profile: MissionProfile
    config: MissionConfig
    roles: Mapping[str, PackRole] = field(default_factory=dict)
    template: tuple[Segment, ...] = ()


_MISSION_KEYS = ("flights", "route_distance", "turnaround", "hotel_power", "emergency_factor",
                 "rotor_loss_push_power", "pack_load_cap", "sequence", "fill", "reserve", "reserve_before", "reserve_flight")


def _mission(section: Section | None, errors: _Errors) -> MissionSetup | None:
    if section is None:
        return None
    vals = _Values(section, errors, _MISSION_KEYS)
    segments: dict[str, Segment] = {}
    roles: dict[str, PackRole] = {}
    for b in section.blocks():
        if b.kind == "Segment":
            f = _Fields(b, errors, ("kind", "duration", "speed", "power", "push_power"))
            kind = f.ident("kind", choices=SEGMENT_KINDS)
            duration = f.num("duration", 0.0, minimum=0.0)
            speed = f.num("speed", 0.0, minimum=0.0)
            power = f.num("power", 0.0, minimum=0.0)
            push = f.num("push_power", 0.0, minimum=0.0)
            if kind in SEGMENT_KINDS:
                segments[b.id] = Segment(b.id, kind, duration, speed, power, push)
        elif b.kind == "PackRole":
            f = _Fields(b, errors, ("normal_energy_factor", "emergency_reserve"))
            if b.id not in ("main", "push"):
                errors.add(b.span, f"PackRole {b.id}: role must be main or push", ("main", "push"))
            roles[b.id] = PackRole(f.num("normal_energy_factor", 1.0, positive=True),
                                   f.num("emergency_reserve", 0.0, minimum=0.0))
        else:
            errors.add(b.kind_span or b.span, f"unknown mission entry kind {b.kind!r}", ("Segment", "PackRole"))
    sequence = vals.names("sequence") or tuple(segments)
    template = []
    for name in sequence:
        if name not in segments:
            errors.add(vals.entries["sequence"].span, f"[mission] sequence: unknown segment {name!r}")
        else:
            template.append(segments[name])
    reserve_name = vals.ident("reserve", None)
    if reserve_name is not None and reserve_name not in segments:
        errors.add(vals.entries["reserve"].span, f"[mission] reserve: unknown segment {reserve_name!r}")
    config = MissionConfig(vals.num("emergency_factor", 2.0, positive=True),
                           vals.num("rotor_loss_push_power", 0.0, minimum=0.0),
                           vals.num("pack_load_cap", None, positive=True))
    flights = vals.int("flights", 1, minimum=1)
    if errors.items or not template:
        if not template and not errors.items:
            errors.add(section.span, "[mission]: no segments in the flight sequence")
        return None
    try:
        profile = build_profile(
            template, flights, vals.num("route_distance", 0.0, minimum=0.0), vals.num("turnaround", 0.0, minimum=0.0),
            vals.ident("fill", None), segments.get(reserve_name) if reserve_name else None,
            vals.int("reserve_flight", None), vals.ident("reserve_before", None), vals.num("hotel_power", 0.0),
        )
    except ValueError as exc:
        errors.add(section.span, f"[mission]: {exc}")
        return None
    return MissionSetup(profile, config, roles, tuple(template))


@dataclass(frozen=True)
class CellSetup:
    system_voltage: float
    cells: Mapping[str, CellSpec]
    main_cell: str
    push_cell: str

    def for_role(self, role: str) -> CellSpec:
        return self.cells[self.push_cell if role == "push" else self.main_cell]


def _cells(section: Section | None, errors: _Errors) -> CellSetup | None:
    if section is None:
        return None
    vals = _Values(section, errors, ("system_voltage", "main_cell", "push_cell"))
    cells = {}
    for b in section.blocks():
        if b.kind != "Cell":
            errors.add(b.kind_span or b.span, f"unknown cells entry kind {b.kind!r}", ("Cell",))
            continue
        f = _Fields(b, errors, ("voltage", "capacity", "current", "mass", "name"))
        nums = [f.num(n, positive=True) for n in ("voltage", "capacity", "current", "mass")]
        if None not in nums and all(n > 0 for n in nums):
            cells[b.id] = CellSpec(*nums, name=str(b.get("name", b.id)))
    voltage = vals.num("system_voltage", positive=True)
    main = vals.ident("main_cell", next(iter(cells), None))
    push = vals.ident("push_cell", main)
    for key, ref in (("main_cell", main), ("push_cell", push)):
        if ref is not None and ref not in cells:
            span = vals.entries[key].span if key in vals.entries else section.span
            errors.add(span, f"[cells] {key}: unknown cell {ref!r}")
    if voltage is None or main not in cells or push not in cells:
        return None
    return CellSetup(voltage, cells, main, push)


@dataclass(frozen=True)
class PowertrainSetup:
    rotor: RotorSpec
    gross_mass_kg: float
    air_density: float
    figure_of_merit: float
    chains: Mapping[str, DriveChain]
    selected: str
    alternative: str | None
    push: str | None
    demands: tuple[Demand, ...]
    main_rotors: int = 4
    units_per_rotor: int = 2

    @property
    def main_chain(self) -> DriveChain:
        return self.chains[self.selected]

    @property
    def alternative_chain(self) -> DriveChain | None:
        return self.chains.get(self.alternative) if self.alternative else None

    @property
    def push_chain(self) -> DriveChain | None:
        return self.chains.get(self.push) if self.push else None

    @property
    def rotor_thrust_n(self) -> float:
        return self.gross_mass_kg * GRAVITY / self.main_rotors

    @property
    def hover_shaft_w(self) -> float:
        """Hover shaft power per drive unit."""
        return hover_power(self.rotor, self.rotor_thrust_n, self.air_density, self.figure_of_merit) / self.units_per_rotor

    @property
    def hover_rpm(self) -> float:
        return self.rotor.normal_rpm


def _resolve_map(path: str, base: Path | None) -> Path | None:
    candidates = []
    if base is not None:
        candidates.append(base / path)
    candidates.append(Path(path))
    bundled = resources.files("evtolprop").joinpath("data").joinpath(path)
    candidates.append(Path(str(bundled)))
    for c in candidates:
        if c.is_file():
            return c
    return None


def _powertrain(section: Section | None, arch: Architecture, base: Path | None, errors: _Errors):
    if section is None:
        return None
    vals = _Values(section, errors, ("rotor", "selected", "alternative", "push", "gross_mass", "air_density",
                                     "figure_of_merit"))
    rotors, motors, controllers, gearboxes, chain_blocks, demand_blocks = {}, {}, {}, {}, [], []
    for b in section.blocks():
        if b.kind == "RotorSpec":
            f = _Fields(b, errors, ("radius", "blades", "tip_mach_normal", "tip_mach_emergency", "speed_of_sound"))
            try:
                rotors[b.id] = RotorSpec(f.num("radius", positive=True), f.int("blades", 2, minimum=1),
                                         f.num("tip_mach_normal", 0.45, positive=True),
                                         f.num("tip_mach_emergency", 0.65, positive=True),
                                         None, f.num("speed_of_sound", 340.3, positive=True))
            except (TypeError, ValueError) as exc:
                errors.add(b.span, f"RotorSpec {b.id}: {exc}")
        elif b.kind == "Motor":
            f = _Fields(b, errors, ("map", "max_torque", "max_speed", "max_power", "mass"))
            path = b.get("map")
            nums = (f.num("max_torque", positive=True), f.num("max_speed", positive=True),
                    f.num("max_power", math.inf, positive=True), f.num("mass", minimum=0.0))
            f.used.add("map")
            if not isinstance(path, str) or isinstance(path, Ident):
                errors.add(b.span_of("map"), f"Motor {b.id}: map must be a quoted CSV path")
                continue
            resolved = _resolve_map(path, base)
            if resolved is None:
                errors.add(b.span_of("map"), f"Motor {b.id}: efficiency map {path!r} not found")
                continue
            if None in nums:
                continue
            try:
                emap = EfficiencyMap.from_csv(resolved, nums[0], nums[1], nums[2], name=b.id)
            except (OSError, KeyError, ValueError) as exc:
                errors.add(b.span_of("map"), f"Motor {b.id}: {exc}")
                continue
            motors[b.id] = Motor(b.id, emap, nums[3])
        elif b.kind == "Controller":
            f = _Fields(b, errors, ("mass", "fixed_loss", "proportional_loss", "max_power"))
            controllers[b.id] = Controller(b.id, f.num("mass", minimum=0.0) or 0.0, f.num("fixed_loss", 0.0, minimum=0.0),
                                           f.num("proportional_loss", 0.0, minimum=0.0),
                                           f.num("max_power", math.inf, positive=True))
        elif b.kind == "Gearbox":
            f = _Fields(b, errors, ("ratio", "efficiency", "mass", "max_output_torque"))
            try:
                gearboxes[b.id] = Gearbox(b.id, f.num("ratio", positive=True), f.num("efficiency", 0.985, positive=True),
                                          f.num("mass", 0.0, minimum=0.0),
                                          f.num("max_output_torque", math.inf, positive=True))
            except (TypeError, ValueError) as exc:
                errors.add(b.span, f"Gearbox {b.id}: {exc}")
        elif b.kind == "DriveChain":
            chain_blocks.append(b)
        elif b.kind == "Demand":
            demand_blocks.append(b)
        else:
            errors.add(b.kind_span or b.span, f"unknown powertrain entry kind {b.kind!r}",
                       ("RotorSpec", "Motor", "Controller", "Gearbox", "DriveChain", "Demand"))
    chains = {}
    for b in chain_blocks:
        f = _Fields(b, errors, ("motor", "controller", "gearbox"))
        m, c, g = f.ident("motor"), f.ident("controller"), f.ident("gearbox", None)
        ok = True
        for name, ref, table in (("motor", m, motors), ("controller", c, controllers), ("gearbox", g, gearboxes)):
            if ref is not None and ref not in table:
                errors.add(b.span_of(name), f"DriveChain {b.id}: unknown {name} {ref!r}")
                ok = False
        if ok and m and c:
            chains[b.id] = DriveChain(b.id, motors[m], controllers[c], gearboxes.get(g) if g else None)
    rotor_name = vals.ident("rotor", next(iter(rotors), None))
    selected = vals.ident("selected")
    alternative = vals.ident("alternative", None)
    push = vals.ident("push", None)
    for key, ref in (("selected", selected), ("alternative", alternative), ("push", push)):
        if ref is not None and ref not in chains:
            errors.add(vals.entries[key].span, f"[powertrain] {key}: unknown drive chain {ref!r}")
    if rotor_name not in rotors:
        errors.add(vals.entries["rotor"].span if "rotor" in vals.entries else section.span,
                   f"[powertrain] rotor: unknown rotor spec {rotor_name!r}")
    gross = vals.num("gross_mass", positive=True)
    density = vals.num("air_density", 1.225, positive=True)
    fom = vals.num("figure_of_merit", 1.0, positive=True)
    if fom is not None and fom > 1:
        errors.add(vals.entries["figure_of_merit"].span, "[powertrain] figure_of_merit must lie in (0, 1]")
    if errors.items or None in (gross, selected):
        return None
    rotor_count = max(1, len(arch.rotor_drives))
    per_rotor = max((len(u) for u in arch.rotor_drives.values()), default=2) or 2
    setup = PowertrainSetup(rotors[rotor_name], gross, density, fom, chains, selected, alternative, push, (),
                            rotor_count, per_rotor)
    demands = []
    for b in demand_blocks:
        f = _Fields(b, errors, ("fraction", "shaft_power", "emergency"))
        if b.has("shaft_power"):
            shaft = f.num("shaft_power", minimum=0.0)
        else:
            fraction = f.num("fraction", minimum=0.0)
            shaft = None if fraction is None else fraction * setup.hover_shaft_w
        if shaft is not None:
            demands.append(Demand(b.id, shaft, f.flag("emergency")))
    return PowertrainSetup(setup.rotor, gross, density, fom, chains, selected, alternative, push, tuple(demands),
                           rotor_count, per_rotor)


@dataclass(frozen=True)
class ThermalSetup:
    networks: Mapping[str, ThermalNetwork]
    limits: ThermalLimits
    air: Mapping[str, AirModel]
    design_ambient_c: float = 42.7
    battery_ambient_c: float = 30.0
    battery_initial_c: float = 20.0
    pack_resistance_ohm: float = 0.0
    emergency_flight: int = 3
    emergency_segment: str = "transition"
    drive_failure_unit: str | None = None
    battery_failure_pack: str | None = None
    rotor: str | None = None
    dt_s: float = 1.0
    cooldown_s: float = 1800.0
    turnaround_check_s: float = 300.0
    metadata: Mapping[str, Any] = field(default_factory=dict)


_THERMAL_KEYS = ("design_ambient", "battery_ambient", "battery_initial", "pack_resistance", "emergency_flight",
                 "emergency_segment", "drive_failure_unit", "battery_failure_pack", "rotor", "dt", "cooldown",
                 "turnaround_check")


def _thermal(section: Section | None, errors: _Errors) -> ThermalSetup | None:
    if section is None:
        return None
    vals = _Values(section, errors, _THERMAL_KEYS)
    nodes: dict[str, list[ThermalNode]] = {}
    links: dict[str, list[ThermalLink]] = {}
    loops: dict[str, list[CoolantLoop]] = {}
    air: dict[str, AirModel] = {}
    limits = ThermalLimits()
    metadata: dict[str, Any] = {}
    for b in section.blocks("ThermalNode"):
        f = _Fields(b, errors, ("network", "capacity", "temperature", "source", "role"))
        net = f.ident("network")
        cap = f.num("capacity", positive=True)
        temp = f.num("temperature", 20.0)
        if temp is not None and temp <= -273.15:
            errors.add(b.span_of("temperature"), f"ThermalNode {b.id}: temperature must be above absolute zero")
            continue
        role = f.ident("role", None, ("motor", "controller", "battery", "coolant"))
        if net and cap and cap > 0:
            nodes.setdefault(net, []).append(ThermalNode(b.id, cap, temp, f.ident("source", None), role))
    for b in section.blocks("ThermalLink"):
        f = _Fields(b, errors, ("network", "a", "b", "conductance", "kind"))
        net, a, z = f.ident("network"), f.ident("a"), f.ident("b")
        g = f.num("conductance", minimum=0.0)
        kind = f.ident("kind", "conduction", LINK_KINDS)
        if None not in (net, a, z, g) and kind in LINK_KINDS:
            links.setdefault(net, []).append(ThermalLink(a, z, g, kind))
    for b in section.blocks("CoolantLoop"):
        f = _Fields(b, errors, ("network", "reservoir", "passes", "pass_ua", "mass_flow", "cp", "hx_ua",
                                "hx_air_capacity", "fluid", "density", "pressure", "air_scaled", "hx_mass",
                                "hx_size"))
        net, res = f.ident("network"), f.ident("reservoir")
        passes, uas = f.names("passes"), f.numbers("pass_ua")
        if len(passes) != len(uas):
            errors.add(b.span_of("pass_ua"), f"CoolantLoop {b.id}: pass_ua needs one value per pass")
            continue
        nums = [f.num("mass_flow", positive=True), f.num("cp", positive=True), f.num("hx_ua", minimum=0.0),
                f.num("hx_air_capacity", minimum=0.0)]
        density = f.num("density", 1000.0, positive=True)
        pressure = f.num("pressure", 0.0, minimum=0.0)
        scaled = f.flag("air_scaled", True)
        metadata[b.id] = {k: b.get(k) for k in ("hx_mass", "hx_size") if b.has(k)}
        f.used.update({"hx_mass", "hx_size"})
        if None in nums or net is None or res is None:
            continue
        try:
            loops.setdefault(net, []).append(CoolantLoop(b.id, res, tuple(zip(passes, uas)), nums[0], nums[1], nums[2],
                                                         nums[3], str(b.get("fluid", "")), density, pressure, scaled))
        except ValueError as exc:
            errors.add(b.span, str(exc))
    for b in section.blocks("AirModel"):
        f = _Fields(b, errors, ("reference_speed", "exponent", "downwash", "fan", "natural_fraction", "max_air_flow"))
        air[b.id] = AirModel(f.num("reference_speed", 30.56, positive=True), f.num("exponent", 0.8, minimum=0.0),
                             f.num("downwash", 0.0, minimum=0.0), f.num("fan", 0.0, minimum=0.0),
                             f.num("natural_fraction", 0.05, minimum=0.0))
        if b.has("max_air_flow"):
            metadata[f"{b.id}.max_air_flow"] = f.num("max_air_flow", minimum=0.0)
    for b in section.blocks("ThermalLimits"):
        f = _Fields(b, errors, ("motor", "controller", "controller_inlet", "motor_inlet", "battery_min", "battery_max",
                                "pressure", "motor_flow", "controller_flow"))
        mf, cf = f.numbers("motor_flow", (6.0, 8.0)), f.numbers("controller_flow", (6.0, 12.0))
        limits = ThermalLimits(f.num("motor", 120.0), f.num("controller", 85.0), f.num("controller_inlet", 65.0),
                               f.num("motor_inlet", 50.0), f.num("battery_min", 20.0), f.num("battery_max", 40.0),
                               f.num("pressure", 2.0, positive=True), tuple(mf[:2]), tuple(cf[:2]))
    for b in section.blocks():
        if b.kind not in ("ThermalNode", "ThermalLink", "CoolantLoop", "AirModel", "ThermalLimits"):
            errors.add(b.kind_span or b.span, f"unknown thermal entry kind {b.kind!r}",
                       ("ThermalNode", "ThermalLink", "CoolantLoop", "AirModel", "ThermalLimits"))
    networks = {}
    for net in sorted(set(nodes) | set(links) | set(loops)):
        try:
            networks[net] = ThermalNetwork(tuple(nodes.get(net, ())), tuple(links.get(net, ())),
                                           tuple(loops.get(net, ())), net)
        except ValueError as exc:
            errors.add(section.span, f"[thermal]: {exc}")
    setup = ThermalSetup(
        networks, limits, air,
        vals.num("design_ambient", 42.7), vals.num("battery_ambient", 30.0), vals.num("battery_initial", 20.0),
        vals.num("pack_resistance", 0.0, minimum=0.0), vals.int("emergency_flight", 1, minimum=1),
        vals.ident("emergency_segment", "transition"), vals.ident("drive_failure_unit", None),
        vals.ident("battery_failure_pack", None), vals.ident("rotor", None), vals.num("dt", 1.0, positive=True),
        vals.num("cooldown", 1800.0, positive=True), vals.num("turnaround_check", 300.0, positive=True), metadata,
    )
    return setup


# -- model -----------------------------------------------------------------


@dataclass(frozen=True)
class Model:
    document: Document
    architecture: Architecture
    tree_setup: TreeSetup
    trees: Mapping[str, FaultTree]
    fha: FhaTable
    mission: MissionSetup | None
    cells: CellSetup | None
    powertrain: PowertrainSetup | None
    thermal: ThermalSetup | None
    source: str = ""
    digest: str = ""

    @property
    def file(self) -> str:
        return self.document.file


def build_model(doc: Document, source: str = "", base: Path | None = None) -> Model:
    """Typed model from a parsed document; raises ParseError listing every schema problem."""
    if not doc.sections:
        raise ParseError(SourceSpan(doc.file, 1, 1), "model is empty", ("[components]",))
    errors = _Errors(doc.file)
    components = _components(doc.section("components"), errors)
    comp_map = {c.id: c for c in components}
    units = _drive_units(doc.section("architecture"), comp_map, errors)
    allocation = _allocation(doc.section("allocation"), comp_map, errors)
    for c in components:
        opp = c.param("opposite")
        if opp is not None and opp not in comp_map:
            errors.add(doc.section("components").span, f"component {c.id}: opposite {opp!r} is not declared")
    errors.raise_if_any()
    arch = Architecture(components, units, allocation)
    tree_setup, trees = _fault_trees(doc.section("fault_trees"), arch, errors)
    fha_table = _fha(doc.section("fha"), trees, errors)
    mission = _mission(doc.section("mission"), errors)
    cells = _cells(doc.section("cells"), errors)
    powertrain = _powertrain(doc.section("powertrain"), arch, base, errors)
    thermal = _thermal(doc.section("thermal"), errors)
    errors.raise_if_any()
    digest = hashlib.sha256(source.encode("utf-8")).hexdigest()
    return Model(doc, arch, tree_setup, trees, fha_table, mission, cells, powertrain, thermal, source, digest)


def load_text(text: str, file: str = "<input>", base: Path | None = None) -> Model:
    return build_model(adl.parse(text, file), text, base)


def _bundled_text(name: str) -> str:
    return resources.files("evtolprop").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("evtolprop").joinpath("data").joinpath(f"{name}.adl")))


def resolve_model_path(path: str | Path) -> Path:
    """The given path, or the bundled model of the same base name when the path does not exist."""
    p = Path(path)
    if p.exists():
        return p
    stem = p.name[:-4] if p.name.endswith(".adl") else p.name
    if stem in BUNDLED_MODELS:
        return bundled_path(stem)
    return p


def load_file(path: str | Path) -> Model:
    p = resolve_model_path(path)
    text = p.read_text(encoding="utf-8")
    return load_text(text, str(path), p.parent)


def load_bundled(name: str = "horizonuam") -> Model:
    p = bundled_path(name)
    return load_text(p.read_text(encoding="utf-8"), p.name, p.parent)
