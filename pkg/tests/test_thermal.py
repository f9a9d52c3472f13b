import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtolprop.thermal import (AirModel, Conditions, CoolantLoop, Interval, StabilityError, ThermalLink, ThermalNetwork,
                               ThermalNode, crossflow_effectiveness, feasible_ambient, pack_heat, simulate_network,
                               stability_bound, step)

from oracles import rc_euler, rc_temperature


def single_node(c=5000.0, g=10.0, t0=20.0):
    return ThermalNetwork((ThermalNode("n", c, t0, source="q"),), (ThermalLink("n", "ambient", g),))


def test_single_node_matches_plain_euler_exactly():
    net = single_node()
    trace = simulate_network(net, [Interval(0.0, 600.0, {"q": 300.0})], 25.0, dt=2.0)
    expected = rc_euler(300, 2.0, 20.0, 25.0, 300.0, 10.0, 5000.0)
    assert trace.final("n") == pytest.approx(expected, rel=1e-12)


def test_single_node_converges_to_closed_form_at_first_order():
    net = single_node()
    exact = rc_temperature(600.0, 20.0, 25.0, 300.0, 10.0, 5000.0)
    errors = []
    for dt in (8.0, 4.0, 2.0, 1.0):
        trace = simulate_network(net, [Interval(0.0, 600.0, {"q": 300.0})], 25.0, dt=dt)
        errors.append(abs(trace.final("n") - exact))
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    assert all(1.8 < r < 2.2 for r in ratios), ratios
    assert errors[-1] < 0.05


def test_step_above_stability_bound_is_refused():
    net = single_node(c=100.0, g=10.0)
    bound = stability_bound(net, Conditions(20.0))
    assert bound == pytest.approx(10.0)
    with pytest.raises(StabilityError):
        step(net, net.initial(), Conditions(20.0), 10.0)
    with pytest.raises(StabilityError):
        simulate_network(net, [Interval(0.0, 100.0)], 20.0, dt=20.0)


def test_crossflow_effectiveness_limits():
    assert crossflow_effectiveness(0.0, 100.0, 100.0) == 0.0
    assert 0.0 < crossflow_effectiveness(50.0, 100.0, 200.0) < 1.0
    assert crossflow_effectiveness(1e6, 100.0, 1e6) == pytest.approx(1.0, abs=1e-6)


def test_pack_heat_is_i_squared_r():
    assert pack_heat(60000.0, 0.2, 600.0) == pytest.approx(100.0 ** 2 * 0.2)
    assert pack_heat(0.0, 0.2, 600.0) == 0.0


def test_air_factor():
    air = AirModel(reference_speed_ms=30.0, exponent=0.8, downwash_ms=15.0, fan_ms=6.0, natural_fraction=0.05)
    assert air.factor(30.0) == pytest.approx(1.0)
    assert air.factor(0.0) == 0.05
    assert air.factor(0.0, rotors_turning=True) == pytest.approx(0.5 ** 0.8)
    assert air.factor(0.0, fan_on=True) == pytest.approx(0.2 ** 0.8)


def test_feasible_ambient_bisection():
    assert feasible_ambient(lambda t: t + 4.0, 40.0, 0.0, 60.0, 1e-6) == pytest.approx(36.0, abs=1e-5)


# -- properties on random networks ------------------------------------------------


@st.composite
def networks(draw):
    n = draw(st.integers(1, 5))
    nodes = tuple(ThermalNode(f"n{i}", draw(st.floats(500.0, 5e4)), draw(st.floats(0.0, 60.0)), source=f"s{i}")
                  for i in range(n))
    links = [ThermalLink(f"n{i}", "ambient", draw(st.floats(0.0, 20.0)), draw(st.sampled_from(("conduction", "air"))))
             for i in range(n)]
    for i in range(n - 1):
        links.append(ThermalLink(f"n{i}", f"n{i + 1}", draw(st.floats(0.0, 30.0))))
    loops = ()
    if n >= 2 and draw(st.booleans()):
        passes = tuple((f"n{i}", draw(st.floats(0.0, 200.0))) for i in range(1, n))
        loops = (CoolantLoop("loop", "n0", passes, draw(st.floats(0.01, 0.2)), 3500.0, draw(st.floats(0.0, 500.0)),
                             draw(st.floats(0.0, 800.0))),)
    return ThermalNetwork(nodes, tuple(links), loops)


@st.composite
def schedules(draw, n):
    t = 0.0
    out = []
    for _ in range(draw(st.integers(1, 4))):
        d = draw(st.floats(10.0, 300.0))
        heat = {f"s{i}": draw(st.floats(0.0, 2000.0)) for i in range(n)}
        out.append(Interval(t, t + d, heat, draw(st.floats(0.0, 60.0)), draw(st.booleans()), draw(st.booleans())))
        t += d
    return out


def _small_dt(net, intervals):
    bound = min(stability_bound(net, Conditions(20.0, {}, AirModel().factor(iv.airspeed_ms, iv.rotors_turning),
                                                 iv.pump_on)) for iv in intervals)
    return min(5.0, 0.5 * bound)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_energy_balance_closes(data):
    net = data.draw(networks())
    intervals = data.draw(schedules(len(net.nodes)))
    ambient = data.draw(st.floats(-10.0, 50.0))
    trace = simulate_network(net, intervals, ambient, dt=_small_dt(net, intervals))
    assert trace.balance_error <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_temperatures_stay_bounded_without_heat(data):
    """With no heat input every node stays between the coldest and hottest of start and ambient."""
    net = data.draw(networks())
    intervals = [Interval(iv.start_s, iv.end_s, {}, iv.airspeed_ms, iv.rotors_turning, iv.pump_on)
                 for iv in data.draw(schedules(len(net.nodes)))]
    ambient = data.draw(st.floats(-10.0, 50.0))
    trace = simulate_network(net, intervals, ambient, dt=_small_dt(net, intervals))
    lo = min(net.initial().min(), ambient) - 1e-9
    hi = max(net.initial().max(), ambient) + 1e-9
    assert lo <= trace.temperatures.min() and trace.temperatures.max() <= hi


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_more_heat_never_cools_any_node(data):
    net = data.draw(networks())
    intervals = data.draw(schedules(len(net.nodes)))
    extra = data.draw(st.floats(0.0, 1000.0))
    hotter = [Interval(iv.start_s, iv.end_s, {k: v + extra for k, v in iv.heat_w.items()}, iv.airspeed_ms,
                       iv.rotors_turning, iv.pump_on) for iv in intervals]
    dt = _small_dt(net, intervals)
    base = simulate_network(net, intervals, 20.0, dt=dt)
    more = simulate_network(net, hotter, 20.0, dt=dt)
    assert np.all(more.temperatures >= base.temperatures - 1e-9)


# -- calibrated anchors of the bundled model ---------------------------------------


def test_air_only_peak_and_first_exceedance(drive_runs):
    trace = drive_runs["air"].trace
    motors = [n for n in trace.node_ids if n.startswith("m_")]
    peak = max(trace.peak(n) for n in motors)
    assert peak == pytest.approx(136.0, rel=0.10)
    first = min(t for t in (trace.first_crossing(n, 120.0) for n in motors) if t is not None)
    assert first == pytest.approx(2088.0, rel=0.10)


def test_combined_cooling_holds_limits_through_the_emergency(drive_runs, model):
    trace = drive_runs["emergency"].trace
    limits = model.thermal.limits
    for n in trace.node_ids:
        role = model.thermal.networks["drive"].node(n).role
        if role == "motor":
            assert trace.peak(n) < limits.motor_c
        elif role == "controller":
            assert trace.peak(n) < limits.controller_c
    assert not [v for v in drive_runs["emergency"].violations if not v.advisory]


def test_ground_cooldown(drive_runs):
    assert drive_runs["fan_on"].max_at(1800.0) < 50.0
    assert drive_runs["fan_off"].max_at(300.0) > 65.0


def test_bundled_runs_close_their_energy_balance(drive_runs):
    for run in ("air", "normal", "emergency"):
        assert drive_runs[run].trace.balance_error <= 1e-9
    for run in ("fan_on", "fan_off"):
        assert drive_runs[run].trace.balance_error <= 1e-9


@pytest.fixture(scope="module")
def battery_runs(model):
    from evtolprop import analysis as A
    return {
        "uncooled": A.battery_thermal(model, "none", None, 20.0),
        "normal": A.battery_thermal(model, "liquid"),
        "emergency": A.battery_thermal(model, "liquid", A.battery_failure(model)),
        "ceiling": A.battery_ceiling(model),
    }


def test_uncooled_pack_exceeds_the_limit(battery_runs, model):
    assert battery_runs["uncooled"].peak_c > model.thermal.limits.battery_max_c


def test_liquid_cooled_offsets(battery_runs, model):
    amb = model.thermal.battery_ambient_c
    assert battery_runs["normal"].peak_c - amb == pytest.approx(5.0, abs=1.0)
    assert battery_runs["emergency"].peak_c - amb == pytest.approx(7.0, abs=1.0)


def test_feasible_ambient_ceiling(battery_runs):
    assert battery_runs["ceiling"] == pytest.approx(36.2, abs=0.5)


def test_failed_pack_is_not_simulated(battery_runs, model):
    failed = model.thermal.battery_failure_pack
    assert failed not in battery_runs["emergency"].traces
    assert math.isfinite(battery_runs["emergency"].peak_c)
