"""Lumped-parameter thermal networks with coolant loops, explicit Euler stepping."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

AMBIENT = "ambient"
LINK_KINDS = ("conduction", "air", "stagnant")
ABSOLUTE_ZERO_C = -273.15


class StabilityError(ValueError):
    """Time step above the explicit-Euler stability bound."""


@dataclass(frozen=True)
class ThermalNode:
    id: str
    capacity_j_k: float
    temperature_c: float = 20.0
    source: str | None = None
    role: str | None = None

    def __post_init__(self) -> None:
        if self.capacity_j_k <= 0:
            raise ValueError(f"node {self.id}: heat capacity must be > 0")
        if self.temperature_c <= ABSOLUTE_ZERO_C:
            raise ValueError(f"node {self.id}: temperature must be above absolute zero")


@dataclass(frozen=True)
class ThermalLink:
    """Conductance between two nodes or a node and ambient.

    `air` links scale with the air-flow factor; `stagnant` links only conduct
    while the coolant pump is off.
    """

    a: str
    b: str
    conductance_w_k: float
    kind: str = "conduction"

    def __post_init__(self) -> None:
        if self.conductance_w_k < 0:
            raise ValueError(f"link {self.a}-{self.b}: conductance must be >= 0")
        if self.kind not in LINK_KINDS:
            raise ValueError(f"link {self.a}-{self.b}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class CoolantLoop:
    """Series coolant loop: reservoir -> passes in order -> heat exchanger -> reservoir.

    Each pass exchanges epsilon * m_dot * cp * (T_node - T_in) with
    epsilon = 1 - exp(-UA / (m_dot * cp)). The exchanger rejects heat to
    ambient air using a cross-flow epsilon-NTU relation.
    """

    id: str
    reservoir: str
    passes: tuple[tuple[str, float], ...]
    mass_flow_kg_s: float
    cp_j_kg_k: float
    hx_ua_w_k: float
    hx_air_capacity_w_k: float
    fluid: str = ""
    density_kg_m3: float = 1000.0
    pressure_bar: float = 0.0
    air_scaled: bool = True

    def __post_init__(self) -> None:
        if self.mass_flow_kg_s <= 0 or self.cp_j_kg_k <= 0:
            raise ValueError(f"loop {self.id}: mass flow and cp must be > 0")
        names = [n for n, _ in self.passes]
        if len(set(names)) != len(names) or self.reservoir in names:
            raise ValueError(f"loop {self.id}: a node may appear once in the pass sequence")
        if any(ua < 0 for _, ua in self.passes) or self.hx_ua_w_k < 0 or self.hx_air_capacity_w_k < 0:
            raise ValueError(f"loop {self.id}: UA values must be >= 0")

    @property
    def capacity_rate(self) -> float:
        return self.mass_flow_kg_s * self.cp_j_kg_k

    @property
    def volume_flow_lpm(self) -> float:
        return self.mass_flow_kg_s / self.density_kg_m3 * 1000.0 * 60.0

    def pass_effectiveness(self, ua: float) -> float:
        return -math.expm1(-ua / self.capacity_rate)

    def hx_effectiveness(self, air_factor: float) -> float:
        ua = self.hx_ua_w_k * (air_factor if self.air_scaled else 1.0)
        c_air = self.hx_air_capacity_w_k * (air_factor if self.air_scaled else 1.0)
        return crossflow_effectiveness(ua, self.capacity_rate, c_air)


def crossflow_effectiveness(ua: float, c_hot: float, c_cold: float) -> float:
    """Cross-flow, both fluids unmixed, epsilon-NTU correlation."""
    if ua <= 0 or c_hot <= 0 or c_cold <= 0:
        return 0.0
    c_min, c_max = min(c_hot, c_cold), max(c_hot, c_cold)
    ntu = ua / c_min
    cr = c_min / c_max
    if cr < 1e-12:
        # Limit of the correlation as one stream's capacity rate becomes unbounded.
        return -math.expm1(-ntu) * c_min / c_hot
    eps = 1.0 - math.exp((ntu**0.22 / cr) * (math.exp(-cr * ntu**0.78) - 1.0))
    # Heat rate is referenced to the coolant side.
    return eps * c_min / c_hot


@dataclass(frozen=True)
class ThermalLimits:
    motor_c: float = 120.0
    controller_c: float = 85.0
    controller_inlet_c: float = 65.0
    motor_inlet_c: float = 50.0
    battery_min_c: float = 20.0
    battery_max_c: float = 40.0
    pressure_bar: float = 2.0
    motor_flow_lpm: tuple[float, float] = (6.0, 8.0)
    controller_flow_lpm: tuple[float, float] = (6.0, 12.0)

    def node_limit(self, role: str | None) -> float | None:
        return {"motor": self.motor_c, "controller": self.controller_c, "battery": self.battery_max_c}.get(role or "")

    def inlet_limit(self, role: str | None) -> float | None:
        return {"motor": self.motor_inlet_c, "controller": self.controller_inlet_c}.get(role or "")


@dataclass(frozen=True)
class ThermalNetwork:
    nodes: tuple[ThermalNode, ...]
    links: tuple[ThermalLink, ...] = ()
    loops: tuple[CoolantLoop, ...] = ()
    name: str = ""

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids) or AMBIENT in ids:
            raise ValueError(f"network {self.name}: node ids must be unique and not {AMBIENT!r}")
        known = set(ids) | {AMBIENT}
        for link in self.links:
            for end in (link.a, link.b):
                if end not in known:
                    raise ValueError(f"network {self.name}: link endpoint {end!r} is not a node")
            if link.a == link.b:
                raise ValueError(f"network {self.name}: link from {link.a!r} to itself")
        for loop in self.loops:
            for n in [loop.reservoir] + [p for p, _ in loop.passes]:
                if n not in ids:
                    raise ValueError(f"loop {loop.id}: unknown node {n!r}")

    def index(self, node: str) -> int:
        for i, n in enumerate(self.nodes):
            if n.id == node:
                return i
        raise KeyError(node)

    def node(self, node: str) -> ThermalNode:
        return self.nodes[self.index(node)]

    @property
    def capacities(self) -> np.ndarray:
        return np.array([n.capacity_j_k for n in self.nodes])

    def initial(self) -> np.ndarray:
        return np.array([n.temperature_c for n in self.nodes])

    def with_temperatures(self, temps: Mapping[str, float] | float) -> "ThermalNetwork":
        if isinstance(temps, (int, float)):
            nodes = tuple(replace(n, temperature_c=float(temps)) for n in self.nodes)
        else:
            nodes = tuple(replace(n, temperature_c=float(temps.get(n.id, n.temperature_c))) for n in self.nodes)
        return replace(self, nodes=nodes)

    def without(self, link_kinds: Sequence[str] = (), loops: bool = False, passes_of: Sequence[str] = ()) -> "ThermalNetwork":
        """A copy with some cooling paths removed (for air-only or uncooled variants)."""
        links = tuple(l for l in self.links if l.kind not in link_kinds)
        new_loops = ()
        if not loops:
            new_loops = tuple(replace(lp, passes=tuple((n, ua if n not in passes_of else 0.0) for n, ua in lp.passes))
                              for lp in self.loops)
        return replace(self, links=links, loops=new_loops)

    def sources(self) -> dict[str, str]:
        return {n.source: n.id for n in self.nodes if n.source}


@dataclass(frozen=True)
class Conditions:
    """Boundary conditions held constant over one step."""

    ambient_c: float
    heat_w: Mapping[str, float] = field(default_factory=dict)
    air_factor: float = 1.0
    pump_on: bool = True


@dataclass(frozen=True)
class StepResult:
    temperatures: np.ndarray
    injected_j: float
    rejected_j: float
    inlet_c: Mapping[str, float]
    node_in_w: np.ndarray
    node_out_w: np.ndarray

    def stored_change_j(self, before: np.ndarray, capacities: np.ndarray) -> float:
        return float(np.dot(capacities, self.temperatures - before))


def stability_bound(network: ThermalNetwork, conditions: Conditions) -> float:
    """Largest stable explicit-Euler step, min over nodes of C / sum of conductances."""
    total = np.zeros(len(network.nodes))
    for link in network.links:
        g = _link_conductance(link, conditions)
        for end in (link.a, link.b):
            if end != AMBIENT:
                total[network.index(end)] += g
    if conditions.pump_on:
        for loop in network.loops:
            total[network.index(loop.reservoir)] += loop.capacity_rate
            for n, ua in loop.passes:
                total[network.index(n)] += loop.pass_effectiveness(ua) * loop.capacity_rate
    with np.errstate(divide="ignore", over="ignore"):
        bounds = np.where(total > 0, network.capacities / np.where(total > 0, total, 1.0), np.inf)
    return float(bounds.min()) if bounds.size else math.inf


def _link_conductance(link: ThermalLink, conditions: Conditions) -> float:
    if link.kind == "air":
        return link.conductance_w_k * conditions.air_factor
    if link.kind == "stagnant":
        return 0.0 if conditions.pump_on else link.conductance_w_k
    return link.conductance_w_k


def node_fluxes(network: ThermalNetwork, temps: np.ndarray, conditions: Conditions):
    """Net heat rate into each node, heat rejected to ambient, and coolant inlet temperatures."""
    flux = np.zeros(len(network.nodes))
    rejected = 0.0
    injected = 0.0
    for node_id, q in conditions.heat_w.items():
        flux[network.index(node_id)] += q
        injected += q
    amb = conditions.ambient_c
    for link in network.links:
        g = _link_conductance(link, conditions)
        if g == 0.0:
            continue
        ta = amb if link.a == AMBIENT else temps[network.index(link.a)]
        tb = amb if link.b == AMBIENT else temps[network.index(link.b)]
        q = g * (ta - tb)  # from a to b
        if link.a != AMBIENT:
            flux[network.index(link.a)] -= q
        else:
            rejected -= q
        if link.b != AMBIENT:
            flux[network.index(link.b)] += q
        else:
            rejected += q
    inlets: dict[str, float] = {}
    if conditions.pump_on:
        for loop in network.loops:
            crate = loop.capacity_rate
            r = network.index(loop.reservoir)
            t = temps[r]
            absorbed = 0.0
            for node_id, ua in loop.passes:
                i = network.index(node_id)
                inlets[node_id] = t
                q = loop.pass_effectiveness(ua) * crate * (temps[i] - t)
                flux[i] -= q
                absorbed += q
                t += q / crate
            inlets[f"{loop.id}.hx"] = t
            q_hx = loop.hx_effectiveness(conditions.air_factor) * crate * (t - amb)
            rejected += q_hx
            # The stream returns to the reservoir carrying what it absorbed minus what the exchanger shed.
            flux[r] += absorbed - q_hx
    return flux, injected, rejected, inlets


def step(network: ThermalNetwork, temps: np.ndarray, conditions: Conditions, dt: float,
         check_stability: bool = True) -> StepResult:
    """One explicit-Euler step: C dT/dt = Q + sum G (T_j - T_i) + coolant terms."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if check_stability:
        bound = stability_bound(network, conditions)
        if dt >= bound:
            raise StabilityError(f"dt = {dt:g} s is not below the stability bound {bound:.4g} s; use a smaller dt")
    flux, injected, rejected, inlets = node_fluxes(network, temps, conditions)
    new = temps + flux * dt / network.capacities
    q_in = np.array([conditions.heat_w.get(nd.id, 0.0) for nd in network.nodes])
    return StepResult(new, injected * dt, rejected * dt, inlets, q_in, q_in - flux)


@dataclass(frozen=True)
class Interval:
    """Piecewise-constant thermal inputs; heat keyed by source name."""

    start_s: float
    end_s: float
    heat_w: Mapping[str, float] = field(default_factory=dict)
    airspeed_ms: float = 0.0
    rotors_turning: bool = False
    pump_on: bool = True
    fan_on: bool = False
    label: str = ""


@dataclass(frozen=True)
class AirModel:
    """Air-side conductance factor from flight speed, rotor downwash or a ground fan."""

    reference_speed_ms: float = 30.56
    exponent: float = 0.8
    downwash_ms: float = 0.0
    fan_ms: float = 0.0
    natural_fraction: float = 0.05

    def factor(self, airspeed: float, rotors_turning: bool = False, fan_on: bool = False) -> float:
        v = airspeed
        if rotors_turning:
            v = max(v, self.downwash_ms)
        if fan_on:
            v = max(v, self.fan_ms)
        forced = (v / self.reference_speed_ms) ** self.exponent if v > 0 else 0.0
        return max(self.natural_fraction, forced)


@dataclass(frozen=True)
class ThermalTrace:
    times: np.ndarray
    node_ids: tuple[str, ...]
    temperatures: np.ndarray  # shape (steps + 1, nodes)
    heat_in: np.ndarray  # W per node over each step, shape (steps, nodes)
    heat_out: np.ndarray
    inlets: Mapping[str, np.ndarray]
    injected_j: float
    rejected_j: float
    stored_j: float

    def series(self, node: str) -> np.ndarray:
        return self.temperatures[:, self.node_ids.index(node)]

    def peak(self, node: str) -> float:
        return float(self.series(node).max())

    def final(self, node: str) -> float:
        return float(self.series(node)[-1])

    def max_temperature(self) -> float:
        return float(self.temperatures.max())

    def first_crossing(self, node: str, threshold: float) -> float | None:
        s = self.series(node)
        idx = np.nonzero(s > threshold)[0]
        if not idx.size:
            return None
        i = int(idx[0])
        if i == 0:
            return float(self.times[0])
        frac = (threshold - s[i - 1]) / (s[i] - s[i - 1])
        return float(self.times[i - 1] + frac * (self.times[i] - self.times[i - 1]))

    def inlet_peak(self, node: str) -> float | None:
        values = self.inlets.get(node)
        return float(np.max(values)) if values is not None and values.size else None

    @property
    def balance_error(self) -> float:
        """Relative mismatch of injected heat against stored plus rejected heat."""
        scale = max(abs(self.injected_j), abs(self.stored_j), abs(self.rejected_j), 1.0)
        return abs(self.injected_j - self.stored_j - self.rejected_j) / scale

    def to_csv(self) -> str:
        """Rows of time_s, node_id, temp_c, q_in_w, q_out_w (heat rates over the following step)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_s", "node_id", "temp_c", "q_in_w", "q_out_w"])
        steps = len(self.heat_in)
        for k, t in enumerate(self.times):
            for j, nid in enumerate(self.node_ids):
                qi = self.heat_in[k, j] if k < steps else 0.0
                qo = self.heat_out[k, j] if k < steps else 0.0
                w.writerow([f"{t:.3f}", nid, f"{self.temperatures[k, j]:.4f}", f"{qi:.3f}", f"{qo:.3f}"])
        return buf.getvalue()


def simulate_network(network: ThermalNetwork, intervals: Sequence[Interval], ambient_c: float,
                     air: AirModel = AirModel(), dt: float = 1.0, record_every: int = 1,
                     initial: np.ndarray | None = None) -> ThermalTrace:
    """Step the network through a schedule; steps never straddle interval boundaries."""
    temps = network.initial() if initial is None else np.array(initial, dtype=float)
    caps = network.capacities
    sources = network.sources()
    start_temps = temps.copy()
    times = [intervals[0].start_s if intervals else 0.0]
    rows = [temps.copy()]
    q_in_rows, q_out_rows = [], []
    inlet_rows: dict[str, list[float]] = {}
    injected = rejected = 0.0
    counter = 0
    t = times[0]
    for iv in intervals:
        duration = iv.end_s - iv.start_s
        if duration <= 0:
            continue
        cond = Conditions(
            ambient_c,
            {sources[s]: q for s, q in iv.heat_w.items() if s in sources and q},
            air.factor(iv.airspeed_ms, iv.rotors_turning, iv.fan_on),
            iv.pump_on,
        )
        bound = stability_bound(network, cond)
        n_steps = max(1, math.ceil(duration / dt - 1e-9))
        h = duration / n_steps
        if h >= bound:
            raise StabilityError(f"dt = {h:g} s is not below the stability bound {bound:.4g} s; use a smaller dt")
        for _ in range(n_steps):
            res = step(network, temps, cond, h, check_stability=False)
            injected += res.injected_j
            rejected += res.rejected_j
            temps = res.temperatures
            t += h
            counter += 1
            if counter % record_every == 0:
                times.append(t)
                rows.append(temps.copy())
                q_in_rows.append(res.node_in_w)
                q_out_rows.append(res.node_out_w)
                for k, v in res.inlet_c.items():
                    inlet_rows.setdefault(k, []).append(v)
    stored = float(np.dot(caps, temps - start_temps))
    n = len(network.nodes)
    return ThermalTrace(
        np.array(times), tuple(nd.id for nd in network.nodes), np.array(rows),
        np.array(q_in_rows).reshape(-1, n), np.array(q_out_rows).reshape(-1, n),
        {k: np.array(v) for k, v in inlet_rows.items()}, injected, rejected, stored,
    )


@dataclass(frozen=True)
class Violation:
    subject: str
    limit: str
    value: float
    bound: float
    time_s: float | None = None
    advisory: bool = False

    def __str__(self) -> str:
        kind = "advisory" if self.advisory else "violation"
        return f"{kind}: {self.subject} {self.limit} {self.value:.1f} > {self.bound:.1f}"


def limit_violations(network: ThermalNetwork, trace: ThermalTrace, limits: ThermalLimits,
                     advisory_inlets: bool = True) -> list[Violation]:
    """Node temperature limits and coolant inlet limits; inlet exceedances may be advisory."""
    out = []
    for node in network.nodes:
        bound = limits.node_limit(node.role)
        if bound is not None:
            peak = trace.peak(node.id)
            if peak > bound:
                out.append(Violation(node.id, "temperature", peak, bound, trace.first_crossing(node.id, bound)))
        inlet_bound = limits.inlet_limit(node.role)
        peak_inlet = trace.inlet_peak(node.id)
        if inlet_bound is not None and peak_inlet is not None and peak_inlet > inlet_bound:
            out.append(Violation(node.id, "coolant inlet", peak_inlet, inlet_bound, advisory=advisory_inlets))
    for loop in network.loops:
        if loop.pressure_bar > limits.pressure_bar:
            out.append(Violation(loop.id, "pressure", loop.pressure_bar, limits.pressure_bar))
        flow = loop.volume_flow_lpm
        for node_id, _ in loop.passes:
            role = network.node(node_id).role
            window = {"motor": limits.motor_flow_lpm, "controller": limits.controller_flow_lpm}.get(role or "")
            if window and not window[0] <= flow <= window[1]:
                out.append(Violation(node_id, "coolant flow", flow, window[1] if flow > window[1] else window[0]))
    return out


# -- drive and battery scenarios --------------------------------------------

COOLING_MODES = ("air-only", "liquid-only", "combined")


def drive_variant(network: ThermalNetwork, mode: str) -> ThermalNetwork:
    """Air-only keeps the liquid loop for controllers but removes motor passes."""
    if mode not in COOLING_MODES:
        raise ValueError(f"unknown cooling mode {mode!r}")
    if mode == "combined":
        return network
    if mode == "liquid-only":
        return network.without(link_kinds=("air",))
    motors = [n.id for n in network.nodes if n.role == "motor"]
    return network.without(passes_of=motors)


def simulate_drive_thermal(network: ThermalNetwork, intervals: Sequence[Interval], ambient_c: float,
                           mode: str = "combined", air: AirModel = AirModel(), dt: float = 1.0,
                           limits: ThermalLimits = ThermalLimits(), record_every: int = 1):
    """Drive network over a mission heat schedule; returns the trace and limit findings."""
    net = drive_variant(network, mode).with_temperatures(ambient_c)
    trace = simulate_network(net, intervals, ambient_c, air, dt, record_every)
    return trace, limit_violations(net, trace, limits)


def ground_cooldown(network: ThermalNetwork, state: Mapping[str, float], ambient_c: float, fan_on: bool,
                    duration_s: float, air: AirModel = AirModel(), dt: float = 1.0) -> ThermalTrace:
    """Parked aircraft: pump and fan both on, or both off."""
    net = network.with_temperatures(state)
    iv = Interval(0.0, duration_s, {}, 0.0, False, pump_on=fan_on, fan_on=fan_on, label="ground")
    return simulate_network(net, [iv], ambient_c, air, dt)


def pack_heat(power_w: float, resistance_ohm: float, voltage: float) -> float:
    """Joule heat of a pack drawing `power_w` at `voltage`."""
    current = power_w / voltage
    return current * current * resistance_ohm


BATTERY_COOLING = ("none", "liquid")


def battery_variant(network: ThermalNetwork, cooling: str) -> ThermalNetwork:
    if cooling not in BATTERY_COOLING:
        raise ValueError(f"unknown battery cooling {cooling!r}")
    return network if cooling == "liquid" else network.without(loops=True)


def simulate_battery_thermal(network: ThermalNetwork, intervals: Sequence[Interval], ambient_c: float,
                             cooling: str = "liquid", initial_c: float | None = None,
                             air: AirModel = AirModel(), dt: float = 2.0) -> ThermalTrace:
    """Pack network over a mission; nodes start at `initial_c` (the nodes' own values if None)."""
    net = battery_variant(network, cooling)
    if initial_c is not None:
        net = net.with_temperatures(initial_c)
    return simulate_network(net, intervals, ambient_c, air, dt)


def feasible_ambient(peak_at: Callable[[float], float], limit_c: float, low: float, high: float,
                     tol: float = 1e-3) -> float:
    """Highest ambient for which `peak_at(ambient)` stays at or below `limit_c` (bisection).

    Relies on monotonicity of peak temperature in ambient temperature.
    """
    if peak_at(low) > limit_c:
        return low
    if peak_at(high) <= limit_c:
        return high
    while high - low > tol:
        mid = 0.5 * (low + high)
        if peak_at(mid) <= limit_c:
            low = mid
        else:
            high = mid
    return low
