"""Mission energy simulation, failure reconfiguration and equal-time-point analysis."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .battery import PackDemand, PackLayout
from .model import Architecture, DriveUnit

SEGMENT_KINDS = (
    "taxi-out",
    "vertical-climb",
    "transition",
    "cruise-climb",
    "cruise",
    "cruise-descent",
    "re-transition",
    "vertical-descent",
    "loiter",
    "taxi-in",
)
TAXI_KINDS = frozenset({"taxi-out", "taxi-in"})
STATIONARY_KINDS = TAXI_KINDS | {"vertical-climb", "vertical-descent"}
FAILURE_KINDS = ("drive-unit", "rotor", "battery")
_REL_TOL = 1e-9


class MissionInfeasible(RuntimeError):
    """A pack cannot deliver the demanded power or energy, or no alternate source exists."""

    def __init__(self, message: str, pack: str | None = None, time_s: float | None = None) -> None:
        self.pack = pack
        self.time_s = time_s
        super().__init__(message)


@dataclass(frozen=True)
class Segment:
    """One flight segment; powers are electrical, per drive unit."""

    name: str
    kind: str
    duration_s: float
    speed_ms: float = 0.0
    power_w: float = 0.0
    push_power_w: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in SEGMENT_KINDS:
            raise ValueError(f"segment {self.name!r}: unknown kind {self.kind!r}")
        if self.duration_s < 0 or self.power_w < 0 or self.push_power_w < 0 or self.speed_ms < 0:
            raise ValueError(f"segment {self.name!r}: duration, speed and power must be >= 0")

    @property
    def distance_m(self) -> float:
        """Route distance covered; taxi and vertical segments cover none."""
        return 0.0 if self.kind in STATIONARY_KINDS else self.speed_ms * self.duration_s


@dataclass(frozen=True)
class TimedSegment:
    segment: Segment
    flight: int
    start_s: float
    reserve: bool = False

    @property
    def end_s(self) -> float:
        return self.start_s + self.segment.duration_s


@dataclass(frozen=True)
class MissionProfile:
    """Flights of ordered segments separated by ground turnarounds, plus reserve segments."""

    flights: tuple[tuple[Segment, ...], ...]
    turnaround_s: float = 0.0
    reserve: tuple[tuple[int, int, Segment], ...] = ()
    hotel_power_w: float = 0.0

    def timeline(self) -> tuple[TimedSegment, ...]:
        out: list[TimedSegment] = []
        t = 0.0
        for fi, segs in enumerate(self.flights, start=1):
            if fi > 1:
                t += self.turnaround_s
            items = [(s, False) for s in segs]
            for flight, index, seg in sorted(self.reserve, key=lambda r: (r[0], -r[1])):
                if flight == fi:
                    items.insert(index, (seg, True))
            for seg, is_reserve in items:
                out.append(TimedSegment(seg, fi, t, is_reserve))
                t += seg.duration_s
        return tuple(out)

    @property
    def duration_s(self) -> float:
        tl = self.timeline()
        return tl[-1].end_s if tl else 0.0

    def route_distance_m(self, flight: int | None = None) -> float:
        return sum(ts.segment.distance_m for ts in self.timeline()
                   if not ts.reserve and (flight is None or ts.flight == flight))

    @property
    def reserve_duration_s(self) -> float:
        return sum(seg.duration_s for _, _, seg in self.reserve)

    def flight_span(self, flight: int, include_reserve: bool = False) -> tuple[float, float]:
        segs = [ts for ts in self.timeline() if ts.flight == flight and (include_reserve or not ts.reserve)]
        if not segs:
            raise ValueError(f"no flight {flight}")
        start = segs[0].start_s
        flown = sum(ts.segment.duration_s for ts in segs)
        return start, start + flown


def build_profile(template: Sequence[Segment], flights: int, route_distance_m: float, turnaround_s: float = 0.0,
                  fill: str | None = None, reserve: Segment | None = None, reserve_flight: int | None = None,
                  reserve_before: str | None = None, hotel_power_w: float = 0.0) -> MissionProfile:
    """Repeat one flight template; the `fill` segment's duration closes the route distance."""
    segs = list(template)
    if fill is not None:
        idx = next((i for i, s in enumerate(segs) if s.name == fill), None)
        if idx is None:
            raise ValueError(f"fill segment {fill!r} not in template")
        other = sum(s.distance_m for i, s in enumerate(segs) if i != idx)
        remaining = route_distance_m - other
        if remaining < 0 or segs[idx].speed_ms <= 0:
            raise ValueError("route distance too short for the fixed segments, or fill speed is zero")
        segs[idx] = replace(segs[idx], duration_s=remaining / segs[idx].speed_ms)
    reserves: tuple[tuple[int, int, Segment], ...] = ()
    if reserve is not None:
        flight = reserve_flight or flights
        if reserve_before is None:
            index = len(segs)
        else:
            index = next((i for i, s in enumerate(segs) if s.name == reserve_before), None)
            if index is None:
                raise ValueError(f"reserve anchor {reserve_before!r} not in template")
        reserves = ((flight, index, reserve),)
    return MissionProfile(tuple(tuple(segs) for _ in range(flights)), turnaround_s, reserves, hotel_power_w)


@dataclass(frozen=True)
class FailureScenario:
    kind: str
    target: str
    onset_s: float

    def __post_init__(self) -> None:
        if self.kind not in FAILURE_KINDS:
            raise ValueError(f"unknown failure kind {self.kind!r}; expected one of {', '.join(FAILURE_KINDS)}")
        if self.onset_s < 0:
            raise ValueError("failure onset must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "FailureScenario":
        """Parse `kind:target@seconds`, e.g. `battery:bat_1@1500`."""
        try:
            head, onset = text.rsplit("@", 1)
            kind, target = head.split(":", 1)
            return cls(kind.strip(), target.strip(), float(onset))
        except ValueError as exc:
            raise ValueError(f"bad failure spec {text!r}: expected kind:target@seconds ({exc})") from None

    def __str__(self) -> str:
        return f"{self.kind}:{self.target}@{self.onset_s:g}"


@dataclass(frozen=True)
class MissionConfig:
    """Failure response settings.

    `pack_load_cap` limits a main pack to that many units of normal controller
    load after a battery loss; a controller whose alternate would exceed it is
    shed and its sibling on the same rotor runs at `emergency_factor`.
    """

    emergency_factor: float = 2.0
    rotor_loss_push_power_w: float = 0.0
    pack_load_cap: float | None = None


@dataclass(frozen=True)
class Reconfiguration:
    """Per-controller battery and per-unit power after a failure."""

    assignment: Mapping[str, str]
    unit_factor: Mapping[str, float]
    failed_batteries: frozenset[str] = frozenset()
    push_power_w: float | None = None

    def battery_of(self, controller: str) -> str:
        return self.assignment[controller]


def _units_by_rotor(arch: Architecture) -> dict[str, tuple[DriveUnit, ...]]:
    out: dict[str, list[DriveUnit]] = {}
    for u in arch.drive_units:
        out.setdefault(u.rotor, []).append(u)
    return {k: tuple(v) for k, v in out.items()}


def reconfigure(arch: Architecture, scenario: FailureScenario | None,
                config: MissionConfig = MissionConfig()) -> Reconfiguration:
    feeds = arch.allocation.feeds
    assignment = {c: f.primary for c, f in sorted(feeds.items())}
    factor = {u.id: 1.0 for u in arch.drive_units}
    if scenario is None:
        return Reconfiguration(assignment, factor)

    by_rotor = _units_by_rotor(arch)
    push_ids = {u.id for u in arch.push_drives}
    if scenario.kind == "drive-unit":
        unit = arch.unit(scenario.target)
        factor[unit.id] = 0.0
        for sibling in by_rotor.get(unit.rotor, ()):
            if sibling.id != unit.id and unit.id not in push_ids:
                factor[sibling.id] = config.emergency_factor
        return Reconfiguration(assignment, factor)

    if scenario.kind == "rotor":
        rotors = {scenario.target}
        if arch.has(scenario.target):
            opposite = arch.opposite_rotor(scenario.target)
            if opposite:
                rotors.add(opposite)
        if scenario.target not in by_rotor:
            raise KeyError(f"no drive units on rotor {scenario.target!r}")
        for r in rotors:
            for u in by_rotor.get(r, ()):
                factor[u.id] = 0.0
        return Reconfiguration(assignment, factor, push_power_w=config.rotor_loss_push_power_w)

    failed = scenario.target
    if failed not in {b.id for b in arch.batteries}:
        raise KeyError(f"unknown battery {failed!r}")
    main_ids = {u.id for u in arch.main_drives}
    cap = config.pack_load_cap
    load: dict[str, float] = {}
    for u in arch.main_drives:
        if u.controller in assignment:
            load[assignment[u.controller]] = load.get(assignment[u.controller], 0.0) + 1.0

    def fits(pack: str, extra: float) -> bool:
        return cap is None or load.get(pack, 0.0) + extra <= cap + _REL_TOL

    driving = {u.controller for u in arch.drive_units}
    for controller, feed in sorted(feeds.items()):
        if feed.primary != failed or controller not in driving:
            # A controller that drives no unit carries no load.
            continue
        unit = arch.unit_of_controller(controller)
        if unit.id not in main_ids:
            if feed.alternate is not None and feed.alternate != failed:
                assignment[controller] = feed.alternate
            else:
                # A push drive without an alternate source is shut down; lift is unaffected.
                factor[unit.id] = 0.0
                del assignment[controller]
            continue
        load[failed] = load.get(failed, 0.0) - 1.0
        if feed.alternate is not None and feed.alternate != failed and fits(feed.alternate, 1.0):
            assignment[controller] = feed.alternate
            load[feed.alternate] = load.get(feed.alternate, 0.0) + 1.0
            continue
        siblings = [s for s in by_rotor.get(unit.rotor, ()) if s.id != unit.id and factor[s.id] > 0
                    and assignment.get(s.controller) not in (None, failed)]
        extra = config.emergency_factor - 1.0
        sibling = next((s for s in siblings if fits(assignment[s.controller], extra)), None)
        if sibling is None:
            reason = "has no alternate battery" if feed.alternate is None else \
                f"cannot move to {feed.alternate} without exceeding its load cap"
            raise MissionInfeasible(f"controller {controller} lost {failed} and {reason}", failed)
        factor[unit.id] = 0.0
        del assignment[controller]
        factor[sibling.id] = config.emergency_factor
        load[assignment[sibling.controller]] += extra
    return Reconfiguration(assignment, factor, frozenset({failed}))


@dataclass(frozen=True)
class EnergyTrace:
    """Piecewise-constant pack power over mission intervals, with closed-form energy."""

    times: np.ndarray
    power: Mapping[str, np.ndarray]
    capacity_wh: Mapping[str, float] = field(default_factory=dict)
    labels: tuple[str, ...] = ()

    @property
    def packs(self) -> list[str]:
        return sorted(self.power)

    def energy(self, pack: str) -> np.ndarray:
        """Cumulative energy in Wh at each breakpoint."""
        dt = np.diff(self.times)
        return np.concatenate(([0.0], np.cumsum(self.power[pack] * dt) / 3600.0))

    def total_energy(self, pack: str) -> float:
        return float(self.energy(pack)[-1])

    def energy_at(self, pack: str, t: float) -> float:
        return float(np.interp(t, self.times, self.energy(pack)))

    def peak_power(self, pack: str) -> float:
        p = self.power[pack]
        return float(p.max()) if p.size else 0.0

    def soc(self, pack: str) -> np.ndarray:
        cap = self.capacity_wh.get(pack)
        if not cap:
            raise ValueError(f"pack {pack!r} has no capacity; state of charge is unknown")
        return np.clip(1.0 - self.energy(pack) / cap, 0.0, 1.0)

    def final_soc(self, pack: str) -> float:
        return float(self.soc(pack)[-1])

    def total_power_integral_wh(self) -> float:
        dt = np.diff(self.times)
        total = sum((self.power[p] for p in self.packs), np.zeros_like(dt))
        return float(np.sum(total * dt) / 3600.0)

    def to_csv(self) -> str:
        """Rows of time_s, pack_id, power_w, energy_wh, soc at each breakpoint."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time_s", "pack_id", "power_w", "energy_wh", "soc"])
        for pack in self.packs:
            energy = self.energy(pack)
            soc = self.soc(pack) if self.capacity_wh.get(pack) else None
            power = self.power[pack]
            for i, t in enumerate(self.times):
                p = power[i] if i < len(power) else 0.0
                writer.writerow([
                    f"{t:.3f}", pack, f"{p:.3f}", f"{energy[i]:.6f}",
                    "" if soc is None else f"{soc[i]:.6f}",
                ])
        return buf.getvalue()


def _intervals(profile: MissionProfile, cut: float | None) -> list[tuple[float, float, TimedSegment, bool]]:
    """Split the timeline at `cut`; the flag marks intervals after the cut."""
    out = []
    for ts in profile.timeline():
        start, end = ts.start_s, ts.end_s
        if end <= start:
            continue
        if cut is not None and start < cut < end:
            out.append((start, cut, ts, False))
            out.append((cut, end, ts, True))
        else:
            out.append((start, end, ts, cut is not None and start >= cut))
    return out


@dataclass(frozen=True)
class ScheduleRow:
    """One interval of the flown mission with each drive unit's electrical power."""

    start_s: float
    end_s: float
    label: str
    kind: str
    speed_ms: float
    after_failure: bool
    unit_power: Mapping[str, float]


@dataclass(frozen=True)
class UnitSchedule:
    rows: tuple[ScheduleRow, ...]
    normal: Reconfiguration
    failed: Reconfiguration

    @property
    def times(self) -> np.ndarray:
        if not self.rows:
            return np.zeros(1)
        return np.array([self.rows[0].start_s] + [r.end_s for r in self.rows])


def unit_schedule(profile: MissionProfile, arch: Architecture, scenario: FailureScenario | None = None,
                  config: MissionConfig = MissionConfig(), end_after_failure: bool = True) -> UnitSchedule:
    """Per-unit power over the mission, split at the failure onset.

    After a failure the aircraft continues to the destination of the current
    flight and lands; later reserve segments and flights are not flown when
    `end_after_failure` is set. Gaps (turnarounds, dropped segments) become
    zero-power ground rows.
    """
    if scenario is not None and scenario.onset_s > profile.duration_s:
        raise ValueError(f"failure onset {scenario.onset_s} s is after mission end {profile.duration_s} s")
    normal = reconfigure(arch, None, config)
    failed = reconfigure(arch, scenario, config) if scenario is not None else normal
    cut = scenario.onset_s if scenario is not None else None
    intervals = _intervals(profile, cut)
    if scenario is not None and end_after_failure:
        onset_flight = next((ts.flight for s, e, ts, after in intervals if after), None)
        intervals = [iv for iv in intervals
                     if not iv[3] or (iv[2].flight == onset_flight and not iv[2].reserve)]

    main = arch.main_drives
    push = arch.push_drives
    hotel_share = profile.hotel_power_w / len(main) if main else 0.0
    rows: list[ScheduleRow] = []
    t = intervals[0][0] if intervals else 0.0
    for start, end, ts, after in intervals:
        if start > t + 1e-12:
            rows.append(ScheduleRow(t, start, "ground", "ground", 0.0, after, {}))
        seg = ts.segment
        state = failed if after else normal
        taxi = seg.kind in TAXI_KINDS
        power: dict[str, float] = {}
        for u in main:
            power[u.id] = (hotel_share if taxi else seg.power_w) * state.unit_factor[u.id]
        push_override = state.push_power_w if (after and not taxi and state.push_power_w) else None
        for u in push:
            p = push_override / len(push) if push_override else seg.push_power_w
            power[u.id] = p * state.unit_factor[u.id]
        rows.append(ScheduleRow(start, end, seg.name, seg.kind, seg.speed_ms, after, power))
        t = end
    return UnitSchedule(tuple(rows), normal, failed)


def simulate(profile: MissionProfile, arch: Architecture, scenario: FailureScenario | None = None,
             packs: Mapping[str, PackLayout] | None = None, config: MissionConfig = MissionConfig(),
             end_after_failure: bool = True) -> EnergyTrace:
    """Integrate pack power over the mission; see `unit_schedule` for the failure semantics."""
    sched = unit_schedule(profile, arch, scenario, config, end_after_failure)
    pack_ids = sorted({b.id for b in arch.batteries})
    power = {p: np.zeros(len(sched.rows)) for p in pack_ids}
    for k, row in enumerate(sched.rows):
        state = sched.failed if row.after_failure else sched.normal
        for uid, p in row.unit_power.items():
            if p > 0:
                unit = arch.unit(uid)
                power[state.battery_of(unit.controller)][k] += p
    capacity = {p: layout.energy_wh for p, layout in (packs or {}).items()}
    trace = EnergyTrace(sched.times, power, capacity, tuple(r.label for r in sched.rows))
    after = np.array([r.after_failure for r in sched.rows], dtype=bool)
    for p in sched.failed.failed_batteries:
        if after.size and trace.power[p][after].any():
            raise MissionInfeasible(f"power drawn from failed battery {p}", p)
    if packs:
        _check_feasible(trace, packs)
    return trace


def _check_feasible(trace: EnergyTrace, packs: Mapping[str, PackLayout]) -> None:
    for pack, layout in sorted(packs.items()):
        if pack not in trace.power:
            continue
        limit = layout.available_power_w
        over = np.nonzero(trace.power[pack] > limit * (1 + _REL_TOL))[0]
        if over.size:
            i = int(over[0])
            raise MissionInfeasible(
                f"pack {pack} must deliver {trace.power[pack][i] / 1e3:.1f} kW at t = {trace.times[i]:.0f} s "
                f"but provides {limit / 1e3:.1f} kW", pack, float(trace.times[i]))
        energy = trace.energy(pack)
        short = np.nonzero(energy > layout.energy_wh * (1 + _REL_TOL))[0]
        if short.size:
            i = int(short[0])
            raise MissionInfeasible(f"pack {pack} is empty at t = {trace.times[i]:.0f} s", pack, float(trace.times[i]))


def equal_time_point(profile: MissionProfile, flight: int) -> float:
    """Mission time at which half the flight's route is flown (still air, equal speeds)."""
    segs = [ts for ts in profile.timeline() if ts.flight == flight and not ts.reserve]
    if not any(ts.segment.distance_m > 0 for ts in segs):
        raise ValueError(f"flight {flight} has no horizontal segments")
    half = 0.5 * sum(ts.segment.distance_m for ts in segs)
    # Cumulative distance over the flight's own clock, with reserve segments removed.
    t, flown = segs[0].start_s, 0.0
    for ts in segs:
        d = ts.segment.distance_m
        if d > 0 and flown + d >= half:
            return t + (half - flown) / ts.segment.speed_ms
        flown += d
        t += ts.segment.duration_s
    return t


def time_to_destination(profile: MissionProfile, flight: int, at_s: float) -> float:
    """Flying time from `at_s` to the end of the flight, reserve segments excluded."""
    start, end = profile.flight_span(flight)
    return max(0.0, end - at_s)


def reserve_endurance(capacity_wh: float, used_wh: float, draw_w: float) -> float:
    """Minutes of flight left at a constant draw."""
    if draw_w <= 0:
        raise ValueError("draw power must be > 0")
    return max(0.0, capacity_wh - used_wh) / draw_w * 60.0


def scenario_targets(arch: Architecture) -> list[tuple[str, str]]:
    targets = [("battery", b) for b in arch.main_batteries]
    targets += [("drive-unit", u.id) for u in arch.drive_units]
    targets += [("rotor", r) for r in arch.rotor_drives]
    return targets


def segment_boundaries(profile: MissionProfile) -> list[float]:
    return sorted({ts.start_s for ts in profile.timeline()})


@dataclass(frozen=True)
class SweepResult:
    scenario: FailureScenario
    peak_power: Mapping[str, float]
    energy: Mapping[str, float]
    error: str | None = None

    @property
    def feasible(self) -> bool:
        return self.error is None


def failure_sweep(profile: MissionProfile, arch: Architecture, packs: Mapping[str, PackLayout] | None = None,
                  config: MissionConfig = MissionConfig(), onsets: Iterable[float] | None = None,
                  targets: Sequence[tuple[str, str]] | None = None) -> list[SweepResult]:
    """Every single failure at every segment boundary."""
    out = []
    times = list(onsets) if onsets is not None else segment_boundaries(profile)
    for kind, target in targets or scenario_targets(arch):
        for t in times:
            sc = FailureScenario(kind, target, t)
            try:
                trace = simulate(profile, arch, sc, packs, config)
            except MissionInfeasible as exc:
                out.append(SweepResult(sc, {}, {}, str(exc)))
                continue
            out.append(SweepResult(sc, {p: trace.peak_power(p) for p in trace.packs},
                                   {p: trace.total_energy(p) for p in trace.packs}))
    return out


@dataclass(frozen=True)
class PackRole:
    """Sizing margins per pack role, kept as model calibration constants."""

    normal_energy_factor: float = 1.0
    emergency_reserve_wh: float = 0.0


@dataclass(frozen=True)
class EtpSummary:
    flight: int
    time_s: float
    minutes_into_flight: float
    remaining_s: float


def etp_summary(profile: MissionProfile, flight: int | None = None) -> EtpSummary:
    flight = flight or len(profile.flights)
    t = equal_time_point(profile, flight)
    start, _ = profile.flight_span(flight)
    return EtpSummary(flight, t, (t - start) / 60.0, time_to_destination(profile, flight, t))


def pack_demands(profile: MissionProfile, arch: Architecture, config: MissionConfig = MissionConfig(),
                 roles: Mapping[str, PackRole] | None = None,
                 sweep: Sequence[SweepResult] | None = None) -> dict[str, PackDemand]:
    """Normal and emergency energy and power each pack role must cover.

    Emergency energy is the energy used up to the last flight's equal time
    point plus the worst single-failure pack draw held until the destination.
    """
    roles = roles or {}
    nominal = simulate(profile, arch, None, None, config)
    etp = etp_summary(profile)
    sweep = sweep if sweep is not None else failure_sweep(profile, arch, None, config)
    groups = {"main": arch.main_batteries, "push": arch.push_batteries}
    out = {}
    for role, packs in groups.items():
        if not packs:
            continue
        r = roles.get(role, PackRole())
        normal_energy = max(nominal.total_energy(p) for p in packs)
        normal_power = max(nominal.peak_power(p) for p in packs)
        emergency_power = max([s.peak_power.get(p, 0.0) for s in sweep if s.feasible for p in packs] + [normal_power])
        at_etp = max(nominal.energy_at(p, etp.time_s) for p in packs)
        emergency_energy = at_etp + emergency_power * etp.remaining_s / 3600.0 + r.emergency_reserve_wh
        out[role] = PackDemand(role, normal_energy * r.normal_energy_factor, emergency_energy,
                               normal_power, emergency_power)
    return out
