"""Full-pipeline report: a canonical JSON document with CSV and markdown projections."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Callable, Mapping

from . import __version__
from . import analysis as A
from .fha import compliance_report, function_rollup
from .fta import evaluate_top, minimal_cut_sets, monte_carlo_top
from .loader import Model
from .model import validate_architecture
from .powertrain import compare_architectures

SCHEMA_VERSION = 1
DEFAULT_SEED = 42
DEFAULT_TRIALS = 100_000
TOP_CUT_SETS = 10


def num(x: float | None) -> float | None:
    """Six significant digits; non-finite values become null."""
    if x is None or not math.isfinite(x):
        return None
    return float(f"{x:.6g}")


def _skipped(reason: str) -> dict:
    return {"status": "skipped", "reason": reason}


def validation_section(model: Model) -> dict:
    arch = model.architecture
    violations = validate_architecture(arch)
    return {
        "status": "fail" if violations else "pass",
        "sources": ["[components]", "[architecture]", "[allocation]"],
        "components": len(arch.components),
        "drive_units": len(arch.drive_units),
        "batteries": [b.id for b in arch.batteries],
        "violations": [{"requirement": v.requirement, "subject": v.subject, "message": v.message}
                       for v in violations],
    }


def _monte_carlo(tree, analytic: float, trials: int, seed: int) -> dict:
    # Plain sampling sees nothing of a 1e-8 event; importance sampling lifts every event towards 0.1.
    plain = analytic * trials >= 10
    bias = None
    if not plain:
        probs = tree.probabilities()
        largest = max([p for p in probs.values() if p > 0] + [1e-300])
        bias = max(1.0, 0.1 / largest)
    mc = monte_carlo_top(tree, trials, seed, bias=bias)
    return {"method": "plain" if plain else "importance", "estimate": num(mc.estimate),
            "standard_error": num(mc.standard_error), "trials": mc.trials, "hits": mc.hits, "seed": mc.seed}


def safety_section(model: Model, seed: int, trials: int) -> dict:
    trees = model.trees
    probs = {tid: evaluate_top(t) for tid, t in sorted(trees.items())}
    rows = compliance_report(trees, model.fha)
    budgets = []
    for hz in model.fha.hazards:
        b = hz.budget(model.fha.allowables)
        budgets.append({"hazard": hz.id, "allowable": num(b.allowable), "contributors": b.contributors,
                        "per_contributor": num(b.per_contributor)})
    compliance = [{
        "hazard": r.hazard, "title": r.title, "severity": r.severity, "allowable": num(r.allowable),
        "expected": num(r.expected), "margin": num(r.margin), "status": r.status, "trees": list(r.trees),
    } for r in rows]
    rollup = [{
        "function": r.function, "mode": r.mode, "severity": r.severity, "allowable": num(r.allowable),
        "expected": num(r.expected), "status": r.status, "tree": r.tree,
    } for r in function_rollup(trees, model.fha)]
    tree_rows = []
    for tid, p in probs.items():
        t = trees[tid]
        tree_rows.append({"id": tid, "top": t.top, "events": len(t.basic_events()), "gates": len(t.gates),
                          "probability": num(p), "monte_carlo": _monte_carlo(t, p, trials, seed)})
    failed = [r.hazard for r in rows if r.status == "fail"]
    return {
        "status": "fail" if failed else "pass",
        "sources": ["[fault_trees]", "[fha]"] + [f"hazard:{h.id}" for h in model.fha.hazards],
        "exposure_h": num(model.tree_setup.exposure_h),
        "budgets": budgets,
        "trees": tree_rows,
        "compliance": compliance,
        "function_rollup": rollup,
        "failures": failed,
    }


def cut_set_rows(model: Model, tree_id: str, limit: int | None = TOP_CUT_SETS) -> list[dict]:
    tree = model.trees[tree_id]
    probs = tree.probabilities()
    rows = []
    for cs in minimal_cut_sets(tree):
        p = math.prod(probs[e] for e in cs.events)
        rows.append((p, cs))
    rows.sort(key=lambda r: (-r[0], r[1].order, r[1].events))
    if limit is not None:
        rows = rows[:limit]
    return [{"events": list(cs.events), "order": cs.order, "probability": num(p)} for p, cs in rows]


def cut_sets_section(model: Model) -> dict:
    ids = sorted({t for h in model.fha.hazards for t in h.trees if t in model.trees})
    return {"sources": [f"tree:{t}" for t in ids], "limit": TOP_CUT_SETS,
            "trees": {t: cut_set_rows(model, t) for t in ids}}


def sizing_section(sizing: A.SizingResult) -> dict:
    roles = {}
    for role, s in sorted(sizing.sizings.items()):
        lay = s.layout
        roles[role] = {
            "governs": s.governing.case,
            "required_ah": num(s.required_ah),
            "requirements": [{"case": r.case, "required_ah": num(r.required_ah), "basis": num(r.basis),
                              "governs": r.governs} for r in s.requirements],
            "layout": {"series": lay.series, "parallel": lay.parallel, "cells": lay.cells,
                       "capacity_ah": num(lay.capacity_ah), "energy_wh": num(lay.energy_wh),
                       "available_power_w": num(lay.available_power_w), "mass_kg": num(lay.mass_kg)},
        }
    return {"sources": ["[mission]", "[cells]"] + [f"battery:{b}" for b in sorted(sizing.packs)],
            "roles": roles, "packs": {b: role_of(sizing, b) for b in sorted(sizing.packs)}}


def role_of(sizing: A.SizingResult, pack: str) -> str:
    for role, s in sizing.sizings.items():
        if sizing.packs[pack] == s.layout:
            return role
    return ""


def mass_section(model: Model, sizing: A.SizingResult) -> dict:
    pt = model.powertrain
    table = A.propulsion_masses(model, sizing.packs)
    out = {
        "sources": ["[powertrain]", f"chain:{pt.selected}"] + [f"battery:{b}" for b in sorted(sizing.packs)],
        "rows": [{"group": r.group, "item": r.item, "unit_mass_kg": num(r.unit_mass_kg), "count": r.count,
                  "total_kg": num(r.total_kg)} for r in table.rows],
        "groups": {g: num(table.group_total(g)) for g in sorted({r.group for r in table.rows})},
        "total_kg": num(table.total_kg),
    }
    if pt.alternative is not None:
        units = len(model.architecture.main_drives)
        cmp = compare_architectures(pt.main_chain, pt.alternative_chain, pt.demands, pt.hover_shaft_w,
                                    pt.hover_rpm, units)
        out["sources"].append(f"chain:{pt.alternative}")
        out["comparison"] = {
            "first": cmp.first, "second": cmp.second, "units": cmp.units,
            "first_mass_kg": num(cmp.first_mass_kg), "second_mass_kg": num(cmp.second_mass_kg),
            "rows": [{"point": r.point, "first_efficiency": num(r.first_efficiency),
                      "second_efficiency": num(r.second_efficiency), "first_heat_w": num(r.first_heat_w),
                      "second_heat_w": num(r.second_heat_w), "first_error": r.first_error,
                      "second_error": r.second_error} for r in cmp.rows],
        }
    return out


def mission_section(model: Model, summary: A.MissionSummary) -> dict:
    profile = model.mission.profile
    bad = [{"kind": s.scenario.kind, "target": s.scenario.target, "onset_s": num(s.scenario.onset_s),
            "error": s.error} for s in summary.infeasible]
    return {
        "status": "fail" if bad else "pass",
        "sources": ["[mission]"] + [f"segment:{s.name}" for s in model.mission.template],
        "flights": len(profile.flights),
        "duration_s": num(profile.duration_s),
        "energy_per_pack_wh": {p: num(v) for p, v in sorted(summary.energy_per_pack_wh.items())},
        "final_soc": {p: num(v) for p, v in sorted(summary.final_soc.items())},
        "equal_time_point": {"flight": summary.etp.flight, "time_s": num(summary.etp.time_s),
                             "minutes_into_flight": num(summary.etp.minutes_into_flight),
                             "remaining_s": num(summary.etp.remaining_s)},
        "energy_at_etp_wh": num(summary.energy_at_etp_wh),
        "worst_failure_draw_w": num(summary.worst_draw_w),
        "continuation_energy_wh": num(summary.continuation_wh),
        "reserve_endurance_min": num(summary.reserve_endurance_min),
        "scenarios": len(summary.sweep),
        "infeasible": bad,
    }


def _drive_case(result: A.DriveThermalResult) -> dict:
    tr = result.trace
    return {
        "mode": result.mode,
        "failure": None if result.scenario is None else str(result.scenario),
        "ambient_c": num(result.ambient_c),
        "peaks_c": {n: num(tr.peak(n)) for n in tr.node_ids},
        "inlet_peaks_c": {n: num(tr.inlet_peak(n)) for n in tr.node_ids if tr.inlet_peak(n) is not None},
        "balance_error": num(tr.balance_error),
        "violations": [_violation(v) for v in result.violations],
    }


def _violation(v) -> dict:
    return {"subject": v.subject, "limit": v.limit, "value": num(v.value), "bound": num(v.bound),
            "time_s": num(v.time_s), "advisory": v.advisory}


def thermal_section(model: Model, sizing: A.SizingResult) -> dict:
    th = model.thermal
    limits = th.limits
    air = A.drive_thermal(model, "air-only")
    normal = A.drive_thermal(model, "combined")
    emergency = A.drive_thermal(model, "combined", A.drive_failure(model))
    motors = [n.id for n in model.thermal.networks["drive"].nodes if n.role == "motor"]
    crossings = [air.trace.first_crossing(m, limits.motor_c) for m in motors]
    crossings = [c for c in crossings if c is not None]
    off = A.cooldown(model, False, after=normal)
    on = A.cooldown(model, True, after=normal)
    battery = {}
    violations = [v for r in (normal, emergency) for v in r.violations if not v.advisory]
    packs = list(model.architecture.main_batteries)
    for label, cooling, scenario in (("uncooled", "none", None), ("normal", "liquid", None),
                                     ("emergency", "liquid", A.battery_failure(model))):
        res = A.battery_thermal(model, cooling, scenario, packs=packs)
        battery[label] = {"cooling": cooling, "failure": None if scenario is None else str(scenario),
                          "ambient_c": num(res.ambient_c), "hottest": res.hottest, "peak_c": num(res.peak_c)}
        if cooling != "none" and res.peak_c > limits.battery_max_c:
            v = {"subject": res.hottest, "limit": "battery_max", "value": num(res.peak_c),
                 "bound": num(limits.battery_max_c), "time_s": None, "advisory": False}
            battery[label]["violation"] = v
            violations.append(v)
    low = A.battery_thermal(model, "none", None, th.battery_initial_c, packs)
    nodes = sorted(n.id for net in th.networks.values() for n in net.nodes)
    return {
        "status": "fail" if violations else "pass",
        "sources": ["[thermal]"] + [f"node:{n}" for n in nodes],
        "drive": {
            "air_only_study": {**_drive_case(air),
                               "first_motor_exceedance_s": num(min(crossings)) if crossings else None},
            "combined_normal": _drive_case(normal),
            "combined_emergency": _drive_case(emergency),
            "ground_cooldown": {"fan_off_5min_c": num(off.max_at(300.0)),
                                "fan_off_end_c": num(off.max_at(th.cooldown_s)),
                                "fan_on_end_c": num(on.max_at(th.cooldown_s)), "duration_s": num(th.cooldown_s)},
        },
        "battery": {
            **battery,
            "uncooled_at_initial_c": num(low.peak_c),
            "ambient_ceiling_c": num(A.battery_ceiling(model)),
        },
        "violations": [v if isinstance(v, dict) else _violation(v) for v in violations],
    }


def _guard(section: Callable[[], dict], needs: tuple[str, ...], model: Model) -> dict:
    missing = [s for s in needs if getattr(model, s) is None]
    if missing:
        return _skipped("model has no " + ", ".join(f"[{s}]" for s in missing) + " section")
    return section()


def build_report(model: Model, seed: int = DEFAULT_SEED, trials: int = DEFAULT_TRIALS) -> dict:
    """Every analysis the model supports; sections the model cannot feed are marked skipped."""
    sections: dict[str, Any] = {"validation": validation_section(model),
                                "safety": safety_section(model, seed, trials),
                                "cut_sets": cut_sets_section(model)}
    sizing = A.size_batteries(model) if model.mission and model.cells else None
    sections["battery_sizing"] = _guard(lambda: sizing_section(sizing), ("mission", "cells"), model)
    sections["mass_rollup"] = _guard(lambda: mass_section(model, sizing), ("mission", "cells", "powertrain"), model)
    sections["mission"] = _guard(lambda: mission_section(model, A.mission_summary(model, sizing)),
                                 ("mission", "cells"), model)
    sections["thermal"] = _guard(lambda: thermal_section(model, sizing),
                                 ("mission", "cells", "powertrain", "thermal"), model)
    reasons = []
    if sections["validation"]["status"] == "fail":
        reasons.append("architecture validation failed")
    reasons += [f"compliance failure: {h}" for h in sections["safety"]["failures"]]
    if sections["mission"].get("status") == "fail":
        reasons.append(f"{len(sections['mission']['infeasible'])} infeasible failure scenario(s)")
    if sections["thermal"].get("status") == "fail":
        reasons += [f"thermal limit: {v['subject']} {v['limit']}" for v in sections["thermal"]["violations"]]
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "evtolprop", "version": __version__},
        "input": {"file": model.file, "sha256": model.digest},
        "options": {"seed": seed, "trials": trials},
        "sections": sections,
        "verdict": {"status": "fail" if reasons else "pass", "reasons": reasons},
    }


def to_json(report: Mapping) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fmt(x: Any) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.4g}"
    return str(x)


def _table(headers: list[str], rows: list[list[Any]]) -> list[str]:
    out = ["| " + " | ".join(headers) + " |", "|" + "---|" * len(headers)]
    out += ["| " + " | ".join(_fmt(c) for c in row) + " |" for row in rows]
    return out + [""]


def to_markdown(report: Mapping) -> str:
    """Human-readable projection of the JSON report."""
    s = report["sections"]
    lines = [f"# Propulsion assessment: {report['input']['file']}", "",
             f"Verdict: **{report['verdict']['status'].upper()}**", ""]
    lines += [f"- {r}" for r in report["verdict"]["reasons"]] + ([""] if report["verdict"]["reasons"] else [])
    lines += [f"Input sha256 `{report['input']['sha256']}`, tool {report['tool']['version']}, "
              f"seed {report['options']['seed']}, trials {report['options']['trials']}.", ""]
    v = s["validation"]
    lines += ["## Validation", "", f"{v['components']} components, {v['drive_units']} drive units: {v['status']}.", ""]
    lines += [f"- {x['subject']}: {x['message']}" for x in v["violations"]]
    saf = s["safety"]
    lines += ["## Safety compliance", ""]
    lines += _table(["hazard", "severity", "allowable", "expected", "status"],
                    [[r["title"], r["severity"], r["allowable"], r["expected"], r["status"]]
                     for r in saf["compliance"]])
    lines += ["### Fault trees", ""]
    lines += _table(["tree", "events", "probability", "Monte Carlo", "method"],
                    [[t["id"], t["events"], t["probability"], t["monte_carlo"]["estimate"],
                      t["monte_carlo"]["method"]] for t in saf["trees"]])
    lines += ["## Cut sets", ""]
    for tid, rows in s["cut_sets"]["trees"].items():
        lines += [f"### {tid}", ""]
        lines += _table(["order", "probability", "events"],
                        [[r["order"], r["probability"], ", ".join(r["events"])] for r in rows])
    bs = s["battery_sizing"]
    lines += ["## Battery sizing", ""]
    if bs.get("status") == "skipped":
        lines += [bs["reason"], ""]
    else:
        for role, r in bs["roles"].items():
            lay = r["layout"]
            lines += [f"### {role} pack: {lay['series']}s x {lay['parallel']}p, {lay['cells']} cells, "
                      f"{_fmt(lay['capacity_ah'])} Ah, {_fmt(lay['mass_kg'])} kg", ""]
            lines += _table(["case", "required Ah", "basis", "governs"],
                            [[q["case"], q["required_ah"], q["basis"], "yes" if q["governs"] else ""]
                             for q in r["requirements"]])
    ms = s["mass_rollup"]
    lines += ["## Mass rollup", ""]
    if ms.get("status") == "skipped":
        lines += [ms["reason"], ""]
    else:
        lines += _table(["group", "item", "unit kg", "count", "total kg"],
                        [[r["group"], r["item"], r["unit_mass_kg"], r["count"], r["total_kg"]] for r in ms["rows"]])
        lines += [f"Total propulsion mass: {_fmt(ms['total_kg'])} kg", ""]
        if "comparison" in ms:
            c = ms["comparison"]
            lines += [f"{c['first']} {_fmt(c['first_mass_kg'])} kg against {c['second']} "
                      f"{_fmt(c['second_mass_kg'])} kg over {c['units']} units.", ""]
            lines += _table(["point", f"{c['first']} eff.", f"{c['second']} eff.", f"{c['first']} heat W",
                             f"{c['second']} heat W"],
                            [[r["point"], r["first_efficiency"], r["second_efficiency"], r["first_heat_w"],
                              r["second_heat_w"]] for r in c["rows"]])
    mi = s["mission"]
    lines += ["## Mission", ""]
    if mi.get("status") == "skipped":
        lines += [mi["reason"], ""]
    else:
        etp = mi["equal_time_point"]
        lines += _table(["pack", "energy Wh", "final SoC"],
                        [[p, e, mi["final_soc"].get(p)] for p, e in mi["energy_per_pack_wh"].items()])
        lines += [f"Equal time point of flight {etp['flight']}: {_fmt(etp['minutes_into_flight'])} min into the "
                  f"flight, {_fmt(mi['energy_at_etp_wh'])} Wh used per main pack.",
                  f"Worst single-failure draw {_fmt(mi['worst_failure_draw_w'])} W, continuation "
                  f"{_fmt(mi['continuation_energy_wh'])} Wh, reserve endurance "
                  f"{_fmt(mi['reserve_endurance_min'])} min.",
                  f"{mi['scenarios']} failure scenarios, {len(mi['infeasible'])} infeasible.", ""]
    th = s["thermal"]
    lines += ["## Thermal", ""]
    if th.get("status") == "skipped":
        lines += [th["reason"], ""]
    else:
        rows = []
        for key in ("air_only_study", "combined_normal", "combined_emergency"):
            case = th["drive"][key]
            rows.append([key, case["failure"], max(case["peaks_c"].values()), len(case["violations"])])
        lines += _table(["drive case", "failure", "hottest node C", "violations"], rows)
        cd = th["drive"]["ground_cooldown"]
        lines += [f"Ground cool-down: fan off {_fmt(cd['fan_off_5min_c'])} C after 5 min and "
                  f"{_fmt(cd['fan_off_end_c'])} C at the end; fan on {_fmt(cd['fan_on_end_c'])} C.", ""]
        bat = th["battery"]
        lines += _table(["battery case", "ambient C", "peak C"],
                        [[k, bat[k]["ambient_c"], bat[k]["peak_c"]] for k in ("uncooled", "normal", "emergency")])
        lines += [f"Highest ambient keeping the packs within limits: {_fmt(bat['ambient_ceiling_c'])} C", ""]
        lines += [f"- {x['subject']} {x['limit']}: {_fmt(x['value'])} > {_fmt(x['bound'])}" for x in th["violations"]]
    return "\n".join(lines).rstrip() + "\n"


def _csv(headers: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    for row in rows:
        w.writerow(["" if c is None else c for c in row])
    return buf.getvalue()


def csv_tables(report: Mapping) -> dict[str, str]:
    """One CSV per tabular report section, keyed by file name."""
    s = report["sections"]
    out = {
        "compliance.csv": _csv(["hazard", "severity", "allowable", "expected", "status", "trees"],
                               [[r["hazard"], r["severity"], r["allowable"], r["expected"], r["status"],
                                 " ".join(r["trees"])] for r in s["safety"]["compliance"]]),
        "fault_trees.csv": _csv(["tree", "events", "probability", "mc_estimate", "mc_standard_error", "mc_method"],
                                [[t["id"], t["events"], t["probability"], t["monte_carlo"]["estimate"],
                                  t["monte_carlo"]["standard_error"], t["monte_carlo"]["method"]]
                                 for t in s["safety"]["trees"]]),
        "cut_sets.csv": _csv(["tree", "rank", "order", "probability", "events"],
                             [[tid, i + 1, r["order"], r["probability"], " ".join(r["events"])]
                              for tid, rows in s["cut_sets"]["trees"].items() for i, r in enumerate(rows)]),
    }
    if s["battery_sizing"].get("status") != "skipped":
        out["battery_sizing.csv"] = _csv(
            ["role", "case", "required_ah", "basis", "governs"],
            [[role, q["case"], q["required_ah"], q["basis"], q["governs"]]
             for role, r in s["battery_sizing"]["roles"].items() for q in r["requirements"]])
    if s["mass_rollup"].get("status") != "skipped":
        out["mass_rollup.csv"] = _csv(["group", "item", "unit_mass_kg", "count", "total_kg"],
                                      [[r["group"], r["item"], r["unit_mass_kg"], r["count"], r["total_kg"]]
                                       for r in s["mass_rollup"]["rows"]])
    if s["thermal"].get("status") != "skipped":
        out["thermal_violations.csv"] = _csv(["subject", "limit", "value", "bound", "time_s", "advisory"],
                                             [[v["subject"], v["limit"], v["value"], v["bound"], v["time_s"],
                                               v["advisory"]] for v in s["thermal"]["violations"]])
    return out


def write_report(report: Mapping, fmt: str, out_dir: Path) -> list[Path]:
    """Write the report under out_dir; returns the files written."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        files = {"report.json": to_json(report)}
    elif fmt == "md":
        files = {"report.md": to_markdown(report)}
    elif fmt == "csv":
        files = csv_tables(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    written = []
    for name, text in files.items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written
