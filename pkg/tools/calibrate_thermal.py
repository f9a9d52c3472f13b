"""Fit the thermal calibration constants of the bundled model to the anchor points.

Prints the fitted values; copy them into tools/model_tail.adl and rerun
tools/gen_model.py. Anchors: air-only motor exceedance time and peak, motor
coolant inlet in normal and emergency operation, ground cool-down with and
without fan, and the battery offsets and ambient ceiling.
"""

from __future__ import annotations

import argparse
from dataclasses import replace

import numpy as np
from scipy.optimize import least_squares

from evtolprop import analysis as A
from evtolprop.loader import load_bundled
from evtolprop.thermal import CoolantLoop, ThermalLink, ThermalNetwork, ThermalNode

DRIVE_PARAMS = ("motor_capacity", "controller_capacity", "coolant_capacity", "motor_air", "motor_ua",
                "controller_ua", "hx_ua", "soak")
BATTERY_PARAMS = ("pack_capacity", "pack_ua", "resistance", "skin", "pack_hx_ua")
# Physical floors: about 1.5 l of coolant, a few kg of motor and controller mass.
LOWER = {"motor_capacity": 3000.0, "controller_capacity": 2000.0, "coolant_capacity": 5000.0,
         "pack_capacity": 60000.0}
UPPER = {"skin": 100.0, "pack_ua": 2000.0, "resistance": 2.0, "pack_capacity": 500000.0}


def drive_network(base: ThermalNetwork, p: dict) -> ThermalNetwork:
    nodes = []
    for n in base.nodes:
        cap = {"motor": p["motor_capacity"], "controller": p["controller_capacity"],
               "coolant": p["coolant_capacity"]}[n.role]
        nodes.append(replace(n, capacity_j_k=cap))
    links = []
    for link in base.links:
        g = {"air": p["motor_air"], "stagnant": p["soak"]}.get(link.kind, link.conductance_w_k)
        links.append(replace(link, conductance_w_k=g))
    loops = []
    for lp in base.loops:
        passes = tuple((nid, p["motor_ua"] if nid.startswith("m_") else p["controller_ua"]) for nid, _ in lp.passes)
        loops.append(replace(lp, passes=passes, hx_ua_w_k=p["hx_ua"]))
    return ThermalNetwork(tuple(nodes), tuple(links), tuple(loops), base.name)


def with_drive(model, p):
    th = model.thermal
    nets = dict(th.networks)
    nets["drive"] = drive_network(nets["drive"], p)
    return replace(model, thermal=replace(th, networks=nets))


def drive_anchors(model) -> dict:
    air = A.drive_thermal(model, "air-only").trace
    normal = A.drive_thermal(model, "combined")
    emerg = A.drive_thermal(model, "combined", A.drive_failure(model)).trace
    off = A.cooldown(model, False, after=normal)
    on = A.cooldown(model, True, after=normal)
    motors = ("m_a", "m_b")
    # Without an exceedance, extrapolate so the fit still sees a gradient.
    cross = min((air.first_crossing(m, 120.0) or 4000.0 + 50.0 * (120.0 - air.peak(m))) for m in motors)
    return {
        "air_cross_s": cross,
        "air_peak_c": max(air.peak(m) for m in motors),
        "normal_inlet_c": max(normal.trace.inlet_peak(m) for m in motors),
        "normal_motor_c": max(normal.trace.peak(m) for m in motors),
        "emergency_inlet_c": max(emerg.inlet_peak(m) for m in motors),
        "emergency_motor_c": max(emerg.peak(m) for m in motors),
        "emergency_controller_c": max(emerg.peak(c) for c in ("mc_a", "mc_b")),
        "off_5min_c": off.max_at(300.0),
        "off_30min_c": off.max_at(1800.0),
        "on_30min_c": on.max_at(1800.0),
    }


DRIVE_TARGETS = {
    "air_cross_s": (2088.0, 20.0), "air_peak_c": (136.0, 1.0), "normal_inlet_c": (49.5, 0.5),
    "emergency_inlet_c": (54.0, 5.0), "emergency_motor_c": (110.0, 5.0), "off_30min_c": (77.0, 1.0),
    "on_30min_c": (47.0, 1.0),
}


def with_battery(model, p):
    th = model.thermal
    base = th.networks["battery"]
    nodes = tuple(replace(n, capacity_j_k=p["pack_capacity"]) if n.role == "battery" else n for n in base.nodes)
    links = tuple(replace(l, conductance_w_k=p["skin"]) for l in base.links)
    loops = tuple(replace(lp, passes=tuple((nid, p["pack_ua"]) for nid, _ in lp.passes), hx_ua_w_k=p["pack_hx_ua"])
                  for lp in base.loops)
    nets = dict(th.networks)
    nets["battery"] = ThermalNetwork(nodes, links, loops, base.name)
    return replace(model, thermal=replace(th, networks=nets, pack_resistance_ohm=p["resistance"]))


def battery_anchors(model) -> dict:
    failure = A.battery_failure(model)
    return {
        "normal_offset": A.battery_thermal(model, "liquid", None, 20.0).peak_c - 20.0,
        "emergency_offset": A.battery_thermal(model, "liquid", failure, 20.0).peak_c - 20.0,
        "emergency_37": A.battery_thermal(model, "liquid", failure, 37.0).peak_c,
        "normal_36_2": A.battery_thermal(model, "liquid", None, 36.2).peak_c,
        "uncooled_20": A.battery_thermal(model, "none", None, 20.0).peak_c,
    }


BATTERY_TARGETS = {"normal_offset": (5.0, 0.4), "emergency_offset": (7.0, 0.4), "normal_36_2": (40.0, 0.1),
                   "uncooled_20": (41.0, 0.2)}


def fit(names, start, apply, anchors, targets):
    lower = np.log([LOWER.get(n, 1e-3) for n in names])
    upper = np.log([UPPER.get(n, 1e9) for n in names])
    x0 = np.clip(np.log([start[n] for n in names]), lower + 1e-6, upper - 1e-6)

    def residuals(x):
        p = dict(zip(names, np.exp(x)))
        a = anchors(apply(p))
        return [(a[k] - t) / s for k, (t, s) in targets.items()]

    res = least_squares(residuals, x0, diff_step=1e-3, max_nfev=400, bounds=(lower, upper))
    p = dict(zip(names, np.exp(res.x)))
    return p, anchors(apply(p))


def current(model, names):
    th = model.thermal
    d, b = th.networks["drive"], th.networks["battery"]
    role = {n.role: n.capacity_j_k for n in d.nodes}
    links = {l.kind: l.conductance_w_k for l in d.links}
    loop = d.loops[0]
    ua = dict(loop.passes)
    values = {"motor_capacity": role["motor"], "controller_capacity": role["controller"],
              "coolant_capacity": role["coolant"], "motor_air": links["air"], "motor_ua": ua["m_a"],
              "controller_ua": ua["mc_a"], "hx_ua": loop.hx_ua_w_k, "soak": links["stagnant"],
              "pack_capacity": next(n.capacity_j_k for n in b.nodes if n.role == "battery"),
              "pack_ua": b.loops[0].passes[0][1], "resistance": th.pack_resistance_ohm,
              "skin": b.links[0].conductance_w_k, "pack_hx_ua": b.loops[0].hx_ua_w_k}
    return {n: values[n] for n in names}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("part", choices=("drive", "battery", "check"))
    args = ap.parse_args()
    model = load_bundled()
    if args.part == "check":
        print(drive_anchors(model))
        print(battery_anchors(model))
        return
    if args.part == "drive":
        p, a = fit(DRIVE_PARAMS, current(model, DRIVE_PARAMS), lambda p: with_drive(model, p), drive_anchors,
                   DRIVE_TARGETS)
    else:
        p, a = fit(BATTERY_PARAMS, current(model, BATTERY_PARAMS), lambda p: with_battery(model, p),
                   battery_anchors, BATTERY_TARGETS)
    for k, v in p.items():
        print(f"{k} = {v:.4g}")
    for k, v in a.items():
        print(f"  {k}: {v:.2f}")


if __name__ == "__main__":
    main()
