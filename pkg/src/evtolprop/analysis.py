"""Pipeline tying a loaded model to sizing, mission, powertrain and thermal analyses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .battery import PackLayout, PackSizing, size_pack
from .loader import Model
from .mission import (EnergyTrace, EtpSummary, FailureScenario, SweepResult, etp_summary, failure_sweep, pack_demands,
                      reserve_endurance, simulate, unit_schedule)
from .powertrain import EnvelopeError, MassTable, heat_at_input, mass_rollup
from .thermal import (AirModel, Interval, ThermalTrace, Violation, feasible_ambient, ground_cooldown, pack_heat,
                      simulate_battery_thermal, simulate_drive_thermal)

GROUND_KINDS = frozenset({"ground", "taxi-out", "taxi-in"})


class ModelIncomplete(ValueError):
    """The model lacks a section an analysis needs."""


def _need(model: Model, *sections: str) -> None:
    missing = [s for s in sections if getattr(model, s) is None]
    if missing:
        raise ModelIncomplete(f"{model.file}: missing section(s) {', '.join('[' + s + ']' for s in missing)}")


@dataclass(frozen=True)
class SizingResult:
    sizings: Mapping[str, PackSizing]
    packs: Mapping[str, PackLayout]
    sweep: tuple[SweepResult, ...]


def size_batteries(model: Model) -> SizingResult:
    """Size each pack role from the nominal mission and the unsized failure sweep."""
    _need(model, "mission", "cells")
    m, arch = model.mission, model.architecture
    sweep = tuple(failure_sweep(m.profile, arch, None, m.config))
    demands = pack_demands(m.profile, arch, m.config, m.roles, sweep)
    sizings, packs = {}, {}
    for role, demand in demands.items():
        sizing = size_pack(demand, model.cells.for_role(role), model.cells.system_voltage)
        sizings[role] = sizing
        for bat in (arch.main_batteries if role == "main" else arch.push_batteries):
            packs[bat] = sizing.layout
    return SizingResult(sizings, packs, sweep)


def propulsion_masses(model: Model, packs: Mapping[str, PackLayout], chain: str | None = None) -> MassTable:
    _need(model, "powertrain")
    pt = model.powertrain
    main = pt.chains[chain] if chain else pt.main_chain
    return mass_rollup(model.architecture, main, pt.push_chain, packs)


def emergency_onset(model: Model) -> float:
    """Start of the configured emergency segment in the configured flight."""
    _need(model, "mission", "thermal")
    th = model.thermal
    for ts in model.mission.profile.timeline():
        if ts.flight == th.emergency_flight and ts.segment.name == th.emergency_segment and not ts.reserve:
            return ts.start_s
    raise ModelIncomplete(f"no segment {th.emergency_segment!r} in flight {th.emergency_flight}")


def drive_failure(model: Model) -> FailureScenario | None:
    th = model.thermal
    if th is None or th.drive_failure_unit is None:
        return None
    return FailureScenario("drive-unit", th.drive_failure_unit, emergency_onset(model))


def battery_failure(model: Model) -> FailureScenario | None:
    th = model.thermal
    if th is None or th.battery_failure_pack is None:
        return None
    return FailureScenario("battery", th.battery_failure_pack, emergency_onset(model))


def drive_heat_intervals(model: Model, scenario: FailureScenario | None = None) -> list[Interval]:
    """Motor and controller heat of the thermal model's rotor over the mission."""
    _need(model, "mission", "powertrain", "thermal")
    pt, th, arch = model.powertrain, model.thermal, model.architecture
    rotor = th.rotor or next(iter(arch.rotor_drives))
    units = arch.rotor_drives.get(rotor, ())
    sched = unit_schedule(model.mission.profile, arch, scenario, model.mission.config)
    chain = pt.main_chain
    cache: dict[float, tuple[float, float]] = {}

    def heat(power_w: float) -> tuple[float, float]:
        key = round(power_w, 6)
        if key not in cache:
            if power_w <= 0:
                cache[key] = (0.0, 0.0)
            else:
                try:
                    point = heat_at_input(chain, power_w, pt.hover_shaft_w, pt.hover_rpm)
                except EnvelopeError as exc:
                    raise ModelIncomplete(f"drive heat at {power_w:.0f} W: {exc}") from None
                cache[key] = (point.motor_loss_w, point.controller_loss_w)
        return cache[key]

    out = []
    for row in sched.rows:
        q: dict[str, float] = {}
        ground = row.kind in GROUND_KINDS
        for i, unit in enumerate(units, start=1):
            # On the ground the units carry only the hotel load, which bypasses the drives.
            motor_w, ctrl_w = heat(0.0 if ground else row.unit_power.get(unit.id, 0.0))
            q[f"motor_{i}"] = motor_w
            q[f"controller_{i}"] = ctrl_w
        out.append(Interval(row.start_s, row.end_s, q, row.speed_ms, not ground, True, False, row.label))
    return out


def battery_heat_intervals(model: Model, pack: str, scenario: FailureScenario | None = None,
                           trace: EnergyTrace | None = None) -> list[Interval]:
    _need(model, "mission", "cells", "thermal")
    if trace is None:
        trace = simulate(model.mission.profile, model.architecture, scenario, None, model.mission.config)
    voltage = model.cells.system_voltage
    r = model.thermal.pack_resistance_ohm
    out = []
    for k, label in enumerate(trace.labels):
        q = pack_heat(float(trace.power[pack][k]), r, voltage)
        out.append(Interval(float(trace.times[k]), float(trace.times[k + 1]), {"pack": q}, 0.0, False,
                            True, True, label))
    return out


def _network(model: Model, name: str):
    net = model.thermal.networks.get(name)
    if net is None:
        raise ModelIncomplete(f"[thermal] has no {name!r} network")
    return net


@dataclass(frozen=True)
class DriveThermalResult:
    mode: str
    scenario: FailureScenario | None
    ambient_c: float
    trace: ThermalTrace
    violations: tuple[Violation, ...]


def drive_thermal(model: Model, mode: str = "combined", scenario: FailureScenario | None = None,
                  ambient_c: float | None = None, record_every: int = 1) -> DriveThermalResult:
    th = model.thermal
    _need(model, "thermal")
    ambient = th.design_ambient_c if ambient_c is None else ambient_c
    trace, violations = simulate_drive_thermal(
        _network(model, "drive"), drive_heat_intervals(model, scenario), ambient, mode,
        th.air.get("drive", AirModel()), th.dt_s, th.limits, record_every)
    return DriveThermalResult(mode, scenario, ambient, trace, tuple(violations))


@dataclass(frozen=True)
class CooldownResult:
    fan_on: bool
    start: Mapping[str, float]
    trace: ThermalTrace

    def max_at(self, t: float) -> float:
        idx = int(np.searchsorted(self.trace.times, t - 1e-9))
        idx = min(idx, len(self.trace.times) - 1)
        return float(self.trace.temperatures[idx].max())


def cooldown(model: Model, fan_on: bool, duration_s: float | None = None,
             after: DriveThermalResult | None = None) -> CooldownResult:
    """Parked aircraft after the normal mission with combined cooling."""
    th = model.thermal
    after = after or drive_thermal(model, "combined")
    state = {nid: float(after.trace.temperatures[-1, i]) for i, nid in enumerate(after.trace.node_ids)}
    trace = ground_cooldown(_network(model, "drive"), state, after.ambient_c, fan_on,
                            duration_s or th.cooldown_s, th.air.get("drive", AirModel()), th.dt_s)
    return CooldownResult(fan_on, state, trace)


@dataclass(frozen=True)
class BatteryThermalResult:
    cooling: str
    scenario: FailureScenario | None
    ambient_c: float
    traces: Mapping[str, ThermalTrace]

    @property
    def hottest(self) -> str:
        return max(sorted(self.traces), key=lambda p: self.traces[p].peak("pack"))

    @property
    def peak_c(self) -> float:
        return self.traces[self.hottest].peak("pack")


def battery_thermal(model: Model, cooling: str = "liquid", scenario: FailureScenario | None = None,
                    ambient_c: float | None = None, packs: Sequence[str] | None = None) -> BatteryThermalResult:
    th = model.thermal
    _need(model, "thermal")
    ambient = th.battery_ambient_c if ambient_c is None else ambient_c
    net = _network(model, "battery")
    air = th.air.get("battery", AirModel())
    packs = packs or model.architecture.main_batteries
    failed = scenario.target if scenario is not None and scenario.kind == "battery" else None
    mission = simulate(model.mission.profile, model.architecture, scenario, None, model.mission.config)
    traces: dict[str, ThermalTrace] = {}
    by_load: dict[tuple, ThermalTrace] = {}
    for p in packs:
        if p == failed:
            continue
        # Packs with the same power history share one simulation.
        key = tuple(mission.power[p].tolist())
        if key not in by_load:
            by_load[key] = simulate_battery_thermal(net, battery_heat_intervals(model, p, scenario, mission), ambient,
                                                    cooling, th.battery_initial_c, air, th.dt_s * 2)
        traces[p] = by_load[key]
    return BatteryThermalResult(cooling, scenario, ambient, traces)


def battery_ceiling(model: Model, scenario: FailureScenario | None = None, low: float = 0.0,
                    high: float = 60.0) -> float:
    """Highest ambient keeping every main pack at or below the battery limit."""
    limit = model.thermal.limits.battery_max_c
    return feasible_ambient(lambda t: battery_thermal(model, "liquid", scenario, t).peak_c, limit, low, high, 1e-3)


@dataclass(frozen=True)
class MissionSummary:
    """Nominal mission with sized packs, equal time point figures and the sized failure sweep."""

    trace: EnergyTrace
    etp: EtpSummary
    energy_per_pack_wh: Mapping[str, float]
    final_soc: Mapping[str, float]
    energy_at_etp_wh: float
    worst_draw_w: float
    continuation_wh: float
    reserve_endurance_min: float
    sweep: tuple[SweepResult, ...]

    @property
    def infeasible(self) -> tuple[SweepResult, ...]:
        return tuple(s for s in self.sweep if not s.feasible)


def mission_summary(model: Model, sizing: SizingResult | None = None) -> MissionSummary:
    _need(model, "mission", "cells")
    m, arch = model.mission, model.architecture
    sizing = sizing or size_batteries(model)
    trace = simulate(m.profile, arch, None, sizing.packs, m.config)
    etp = etp_summary(m.profile)
    mains = arch.main_batteries
    at_etp = max(trace.energy_at(p, etp.time_s) for p in mains)
    worst = max([s.peak_power.get(p, 0.0) for s in sizing.sweep if s.feasible for p in mains] + [0.0])
    capacity = min(sizing.packs[p].energy_wh for p in mains)
    endurance = reserve_endurance(capacity, at_etp, worst) if worst > 0 else float("inf")
    sweep = tuple(failure_sweep(m.profile, arch, sizing.packs, m.config))
    return MissionSummary(
        trace, etp,
        {p: trace.total_energy(p) for p in trace.packs},
        {p: trace.final_soc(p) for p in trace.packs if p in sizing.packs},
        at_etp, worst, worst * etp.remaining_s / 3600.0, endurance, sweep,
    )
