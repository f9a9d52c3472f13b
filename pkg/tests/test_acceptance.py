"""One check per acceptance criterion; conftest prints a PASS/FAIL line for each."""

import math
import random

import pytest

from evtolprop import analysis as A
from evtolprop.battery import available_power, capacity_from_energy, capacity_from_power, discharge_rate
from evtolprop.fha import apportion
from evtolprop.fta import evaluate_top, minimal_cut_sets, monte_carlo_top
from evtolprop.powertrain import compare_architectures

import test_adl
import test_fta
import test_mission
import test_thermal
from oracles import (brute_force_cut_sets, brute_force_probability, events_of, random_probabilities, random_tree,
                     rate_to_probability, series_probability, sig)

RESULTS: dict[int, tuple[bool, list[str]]] = {}


class Checks:
    def __init__(self, criterion: int):
        self.criterion = criterion
        self.failed: list[str] = []

    def check(self, label: str, ok: bool, detail: str = "") -> None:
        if not ok:
            self.failed.append(f"{label} {detail}".strip())

    def close(self, known_failures: tuple[str, ...] = ()) -> None:
        failed = self.failed + list(known_failures)
        RESULTS[self.criterion] = (not failed, failed)
        assert not self.failed, self.failed


def near(value, target, rel=None, abs_=None) -> bool:
    return value == pytest.approx(target, rel=rel, abs=abs_)


CELL_RATE = 10.0 / 2.9
SIXTY_KW_AH = capacity_from_power(60000.0, CELL_RATE, 600.0)
SIXTY_KW_NOTE = f"60 kW gives {SIXTY_KW_AH:.1f} Ah, not 29.3 Ah (see the ledger)"


def test_criterion_1_battery_equations(model):
    c = Checks(1)
    rate = discharge_rate(model.cells.for_role("main"))
    c.check("19.7 kWh/600 V", sig(capacity_from_energy(19700.0, 600.0), 3) == 32.8)
    c.check("10 A/2.9 Ah", sig(rate, 4) == 3.448, f"{rate}")
    c.check("90 kW", sig(capacity_from_power(90000.0, rate, 600.0), 3) == 43.5)
    c.check("32.8 Ah", sig(available_power(32.8, rate, 600.0), 2) == 68000.0)
    c.check("90 Ah", sig(available_power(90.0, rate, 600.0), 3) == 186000.0)
    c.close(known_failures=() if sig(SIXTY_KW_AH, 3) == 29.3 else (SIXTY_KW_NOTE,))


@pytest.mark.xfail(strict=True, reason=SIXTY_KW_NOTE)
def test_criterion_1_sixty_kilowatt_item():
    assert sig(capacity_from_power(60000.0, CELL_RATE, 600.0), 3) == 29.3


def test_criterion_2_pack_layouts(sizing):
    c = Checks(2)
    main, push = sizing.sizings["main"].layout, sizing.sizings["push"].layout
    c.check("main layout", (main.series, main.parallel, main.cells) == (167, 15, 2505))
    c.check("main mass", near(main.mass_kg, 120.0, rel=0.01), f"{main.mass_kg}")
    c.check("push layout", (push.series, push.parallel, push.cells) == (167, 31, 5177))
    c.check("push capacity", sig(push.capacity_ah, 2) == 90.0, f"{push.capacity_ah}")
    c.check("push mass", near(push.mass_kg, 248.0, rel=0.01), f"{push.mass_kg}")
    c.close()


def test_criterion_3_sizing_governance(sizing):
    c = Checks(3)
    rows = {"main": {"normal-energy": 32.8, "emergency-energy": 34.9, "normal-power": 29.0, "emergency-power": 43.5},
            "push": {"normal-energy": 70.0, "emergency-energy": 88.8, "normal-power": 32.9, "emergency-power": 60.9}}
    governs = {"main": "emergency-power", "push": "emergency-energy"}
    for role, expected in rows.items():
        sized = sizing.sizings[role]
        c.check(f"{role} governs", sized.governing.case == governs[role], sized.governing.case)
        for r in sized.requirements:
            c.check(f"{role} {r.case}", near(r.required_ah, expected[r.case], rel=0.02), f"{r.required_ah:.4g}")
    c.close()


def test_criterion_4_budgets():
    c = Checks(4)
    c.check("1e-9/4", apportion(1e-9, 4) == 2.5e-10)
    c.check("1e-7/4", apportion(1e-7, 4) == 2.5e-8)
    c.check("1e-9/2", apportion(1e-9, 2) == 5e-10)
    c.close()


def test_criterion_5_fta_engine():
    c = Checks(5)
    for seed in range(100):
        node, probs = test_fta.random_case(seed)
        tree = test_fta.to_tree(node, probs)
        exact = brute_force_probability(node, probs)
        c.check(f"exact seed {seed}", near(evaluate_top(tree), exact, rel=1e-12))
    for seed in range(40):
        node, probs = test_fta.random_case(1000 + seed)
        got = {frozenset(cs.events) for cs in minimal_cut_sets(test_fta.to_tree(node, probs))}
        c.check(f"cut sets seed {seed}", got == brute_force_cut_sets(node))
    for seed in range(100):
        rng = random.Random(5000 + seed)
        node = random_tree(rng, 8, depth=3)
        if node[0] == "event":
            node = ("OR", None, (node, ("event", "e1" if node[1] == "e0" else "e0")))
        probs = random_probabilities(rng, sorted(events_of(node)))
        tree = test_fta.to_tree(node, probs)
        exact = evaluate_top(tree)
        mc = monte_carlo_top(tree, 100_000, seed=seed)
        se = max(mc.standard_error, math.sqrt(exact * (1 - exact) / mc.trials), 1e-12)
        c.check(f"Monte Carlo seed {seed}", abs(mc.estimate - exact) <= 4 * se)
        c.check(f"reproducible seed {seed}", monte_carlo_top(tree, 100_000, seed=seed) == mc)
    c.close()


def test_criterion_6_safety_anchors(model):
    c = Checks(6)
    chain = series_probability([rate_to_probability(r) for r in (9.31e-5, 4.75e-5, 9.24e-5, 5e-6, 4.6e-5)])
    single = evaluate_top(model.trees["single_drive"])
    c.check("single drive", sig(single, 2) == 2.8e-4 and near(single, chain, rel=1e-12), f"{single}")
    lift = evaluate_top(model.trees["loss_of_lift_rotor_1"])
    c.check("loss of one rotor lift", 1.06e-8 / 3 <= lift <= 1.06e-8 * 3, f"{lift}")
    c.close()


def test_criterion_7_mission(summary, model):
    c = Checks(7)
    arch = model.architecture
    for p in arch.main_batteries:
        c.check(f"{p} energy", near(summary.energy_per_pack_wh[p], 19700.0, rel=0.02))
        c.check(f"{p} final SoC", near(summary.final_soc[p], 0.25, abs_=0.02))
    for p in arch.push_batteries:
        c.check(f"{p} final SoC", near(summary.final_soc[p], 0.37, abs_=0.02))
    c.check("ETP", summary.etp.flight == 3 and near(summary.etp.minutes_into_flight, 5.7, abs_=0.5))
    c.check("energy at ETP", near(summary.energy_at_etp_wh, 12200.0, rel=0.05))
    c.check("continuation", near(summary.continuation_wh, 8500.0, rel=0.05))
    c.check("worst draw", near(summary.worst_draw_w, 90000.0, rel=0.02))
    c.check("reserve endurance", near(summary.reserve_endurance_min, 9.2, abs_=0.5))
    c.close()


def test_criterion_8_mass_rollup(model, sizing):
    c = Checks(8)
    pt = model.powertrain
    cmp = compare_architectures(pt.main_chain, pt.alternative_chain, pt.demands, pt.hover_shaft_w, pt.hover_rpm,
                                len(model.architecture.main_drives))
    c.check("geared", near(cmp.first_mass_kg, 374.0, rel=0.02), f"{cmp.first_mass_kg}")
    c.check("direct", near(cmp.second_mass_kg, 400.0, rel=0.02), f"{cmp.second_mass_kg}")
    total = A.propulsion_masses(model, sizing.packs).total_kg
    c.check("total", near(total, 1144.0, rel=0.02), f"{total}")
    c.close()


def test_criterion_9_thermal_anchors(model, drive_runs):
    c = Checks(9)
    th = model.thermal
    air = drive_runs["air"].trace
    motors = [n for n in air.node_ids if th.networks["drive"].node(n).role == "motor"]
    peak = max(air.peak(n) for n in motors)
    c.check("air-only peak", near(peak, 136.0, rel=0.10), f"{peak:.1f}")
    crossings = [t for t in (air.first_crossing(n, th.limits.motor_c) for n in motors) if t is not None]
    c.check("exceedance", bool(crossings) and near(min(crossings), 2088.0, rel=0.10), f"{crossings}")
    emergency = drive_runs["emergency"].trace
    for n in emergency.node_ids:
        limit = th.limits.node_limit(th.networks["drive"].node(n).role)
        if limit is not None:
            c.check(f"{n} under limit", emergency.peak(n) < limit, f"{emergency.peak(n):.1f}")
    uncooled = A.battery_thermal(model, "none", None, 20.0).peak_c
    c.check("uncooled pack", uncooled > th.limits.battery_max_c, f"{uncooled:.1f}")
    amb = th.battery_ambient_c
    normal = A.battery_thermal(model, "liquid").peak_c - amb
    emerg = A.battery_thermal(model, "liquid", A.battery_failure(model)).peak_c - amb
    c.check("normal offset", near(normal, 5.0, abs_=1.0), f"{normal:.2f}")
    c.check("emergency offset", near(emerg, 7.0, abs_=1.0), f"{emerg:.2f}")
    ceiling = A.battery_ceiling(model)
    c.check("ambient ceiling", near(ceiling, 36.2, abs_=0.5), f"{ceiling:.2f}")
    c.check("fan on", drive_runs["fan_on"].max_at(1800.0) < 50.0)
    c.check("fan off", drive_runs["fan_off"].max_at(300.0) > 65.0)
    c.close()


def test_criterion_10_property_suites(summary, model):
    c = Checks(10)
    for label, prop in (("thermal energy balance", test_thermal.test_energy_balance_closes),
                        ("FTA monotonicity", test_fta.test_raising_an_event_probability_never_lowers_the_top),
                        ("parser round trip", test_adl.test_parse_serialize_round_trip_is_a_fixpoint)):
        try:
            prop()
        except Exception as exc:  # noqa: BLE001 - any falsified property fails the criterion
            c.check(label, False, repr(exc)[:200])
    try:
        test_mission.test_reconfiguration_never_targets_a_failed_battery(model=model)
    except Exception as exc:  # noqa: BLE001
        c.check("reconfiguration", False, repr(exc)[:200])
    c.check("sized sweep feasible", bool(summary.sweep) and not summary.infeasible)
    c.close()
