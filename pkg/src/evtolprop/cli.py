"""Command-line entry point: validate, safety, cut sets, sizing, simulation and reports."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from . import analysis as A
from . import report as R
from .adl import ParseError
from .fta import ResourceLimitError
from .loader import Model, load_file
from .mission import FAILURE_KINDS, FailureScenario, MissionInfeasible, simulate
from .thermal import COOLING_MODES, StabilityError

PASS, FAIL, INPUT_ERROR, INTERNAL_ERROR = 0, 1, 2, 3


class UsageError(ValueError):
    """Bad arguments that argparse cannot catch on its own."""


def _out(text: str = "") -> None:
    sys.stdout.write(text + "\n")


def _err(text: str) -> None:
    sys.stderr.write(text + "\n")


def _g(x: float | None) -> str:
    return "-" if x is None else f"{x:.4g}"


def parse_failure(text: str, model: Model) -> FailureScenario:
    """`kind:target@seconds`, or `kind@seconds` with the target taken from the model's [thermal] section."""
    if ":" in text.split("@", 1)[0]:
        try:
            return FailureScenario.parse(text)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    kind, sep, onset = text.partition("@")
    if not sep or kind not in FAILURE_KINDS:
        raise UsageError(f"bad failure spec {text!r}: expected kind@seconds or kind:target@seconds "
                         f"with kind one of {', '.join(FAILURE_KINDS)}")
    th = model.thermal
    target = None
    if th is not None:
        target = {"drive-unit": th.drive_failure_unit, "battery": th.battery_failure_pack,
                  "rotor": th.rotor}.get(kind)
    if target is None:
        raise UsageError(f"failure {text!r} names no target and the model sets no default for {kind}")
    try:
        return FailureScenario(kind, target, float(onset))
    except ValueError as exc:
        raise UsageError(f"bad failure spec {text!r}: {exc}") from None


def _check_target(scenario: FailureScenario, model: Model) -> None:
    arch = model.architecture
    known = {"drive-unit": {u.id for u in arch.drive_units}, "battery": {b.id for b in arch.batteries},
             "rotor": set(arch.rotor_drives)}[scenario.kind]
    if scenario.target not in known:
        raise UsageError(f"failure target {scenario.target!r} is not a {scenario.kind} of the model")


def cmd_validate(args, model: Model) -> int:
    sec = R.validation_section(model)
    present = [s.name for s in model.document.sections]
    _out(f"{model.file}: {sec['components']} components, {sec['drive_units']} drive units, "
         f"{len(model.trees)} fault trees; sections {', '.join(present)}")
    for v in sec["violations"]:
        _out(f"violation: requirement {v['requirement']} ({v['subject']}): {v['message']}")
    _out(f"validation: {sec['status']}")
    return FAIL if sec["violations"] else PASS


def cmd_safety(args, model: Model) -> int:
    sec = R.safety_section(model, args.seed, args.trials)
    _out(f"exposure {_g(sec['exposure_h'])} h per flight hour")
    _out(f"{'hazard':<40} {'severity':<13} {'allowable':>10} {'expected':>10}  status")
    for r in sec["compliance"]:
        _out(f"{r['title']:<40} {r['severity']:<13} {_g(r['allowable']):>10} {_g(r['expected']):>10}  {r['status']}")
    _out()
    _out(f"{'tree':<28} {'probability':>12} {'Monte Carlo':>12} {'SE':>10}  method")
    for t in sec["trees"]:
        mc = t["monte_carlo"]
        _out(f"{t['id']:<28} {_g(t['probability']):>12} {_g(mc['estimate']):>12} "
             f"{_g(mc['standard_error']):>10}  {mc['method']}")
    for hz in sec["failures"]:
        row = next(r for r in sec["compliance"] if r["hazard"] == hz)
        _out(f"compliance failure: {row['title']} ({_g(row['expected'])} > {_g(row['allowable'])})")
    return FAIL if sec["failures"] else PASS


def cmd_cutsets(args, model: Model) -> int:
    if args.tree not in model.trees:
        raise UsageError(f"unknown tree {args.tree!r}; known trees: {', '.join(sorted(model.trees))}")
    rows = R.cut_set_rows(model, args.tree, args.top)
    _out(f"minimal cut sets of {args.tree} (most probable first)")
    for r in rows:
        _out(f"{r['order']}  {_g(r['probability']):>10}  {' '.join(r['events'])}")
    return PASS


def cmd_size_battery(args, model: Model) -> int:
    sizing = A.size_batteries(model)
    sec = R.sizing_section(sizing)
    for role, r in sec["roles"].items():
        lay = r["layout"]
        _out(f"{role} pack: {lay['series']}s x {lay['parallel']}p = {lay['cells']} cells, "
             f"{_g(lay['capacity_ah'])} Ah, {_g(lay['energy_wh'])} Wh, {_g(lay['mass_kg'])} kg")
        for q in r["requirements"]:
            mark = "  <- governs" if q["governs"] else ""
            _out(f"  {q['case']:<17} {_g(q['required_ah']):>8} Ah  from {_g(q['basis'])}{mark}")
    return PASS


def cmd_simulate(args, model: Model) -> int:
    if args.what == "mission":
        return _simulate_mission(args, model)
    return _simulate_thermal(args, model)


def _simulate_mission(args, model: Model) -> int:
    scenario = parse_failure(args.failure, model) if args.failure else None
    if scenario:
        _check_target(scenario, model)
    sizing = A.size_batteries(model)
    m = model.mission
    try:
        trace = simulate(m.profile, model.architecture, scenario, sizing.packs, m.config)
    except MissionInfeasible as exc:
        _out(f"infeasible: {exc}")
        return FAIL
    _out(f"mission of {len(m.profile.flights)} flights, {_g(m.profile.duration_s)} s"
         + (f", failure {scenario}" if scenario else ""))
    for p in trace.packs:
        _out(f"{p}: energy {_g(trace.total_energy(p))} Wh, peak {_g(trace.peak_power(p))} W, "
             f"final state of charge {trace.final_soc(p):.1%}")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "mission_trace.csv").write_text(trace.to_csv(), encoding="utf-8")
    return PASS


def _simulate_thermal(args, model: Model) -> int:
    scenario = parse_failure(args.failure, model) if args.failure else None
    if scenario:
        _check_target(scenario, model)
    drive_scenario = scenario if scenario is None or scenario.kind != "battery" else None
    drive = A.drive_thermal(model, args.mode, drive_scenario, args.ambient)
    _out(f"drive cooling {args.mode} at {_g(drive.ambient_c)} C" + (f", failure {scenario}" if scenario else ""))
    for n in drive.trace.node_ids:
        inlet = drive.trace.inlet_peak(n)
        _out(f"  {n:<10} peak {_g(drive.trace.peak(n))} C" + (f", inlet {_g(inlet)} C" if inlet is not None else ""))
    bat_scenario = scenario if scenario is None or scenario.kind == "battery" else None
    battery = A.battery_thermal(model, "liquid", bat_scenario, args.ambient)
    _out(f"battery liquid cooling at {_g(battery.ambient_c)} C: hottest {battery.hottest} "
         f"peak {_g(battery.peak_c)} C")
    failed = [v for v in drive.violations if not v.advisory]
    for v in drive.violations:
        _out(str(v))
    limit = model.thermal.limits.battery_max_c
    if battery.peak_c > limit:
        _out(f"violation: {battery.hottest} battery_max {battery.peak_c:.1f} > {limit:.1f}")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "thermal_drive.csv").write_text(drive.trace.to_csv(), encoding="utf-8")
        for pack, tr in sorted(battery.traces.items()):
            (out / f"thermal_{pack}.csv").write_text(tr.to_csv(), encoding="utf-8")
    return FAIL if failed or battery.peak_c > limit else PASS


def cmd_report(args, model: Model) -> int:
    rep = R.build_report(model, args.seed, args.trials)
    written = R.write_report(rep, args.format, Path(args.output))
    for path in written:
        _out(f"wrote {path}")
    _out(f"verdict: {rep['verdict']['status']}")
    for reason in rep["verdict"]["reasons"]:
        _out(f"  {reason}")
    return PASS if rep["verdict"]["status"] == "pass" else FAIL


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=R.DEFAULT_SEED, help="Monte Carlo seed (default 42)")
    common.add_argument("--trials", type=_positive, default=R.DEFAULT_TRIALS,
                        help=f"Monte Carlo trials per tree (default {R.DEFAULT_TRIALS})")

    p = argparse.ArgumentParser(prog="evtolprop", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("validate", parents=[common], help="parse a model and check the architecture rules")
    s.add_argument("model")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("safety", parents=[common], help="fault tree probabilities, budgets and compliance")
    s.add_argument("model")
    s.set_defaults(func=cmd_safety)

    s = sub.add_parser("cutsets", parents=[common], help="minimal cut sets of one fault tree")
    s.add_argument("model")
    s.add_argument("--tree", required=True)
    s.add_argument("--top", type=_positive, default=None, help="show only the most probable N")
    s.set_defaults(func=cmd_cutsets)

    s = sub.add_parser("size-battery", parents=[common], help="pack capacity envelope and cell layout")
    s.add_argument("model")
    s.set_defaults(func=cmd_size_battery)

    s = sub.add_parser("simulate", parents=[common], help="mission energy or thermal simulation")
    s.add_argument("what", choices=("mission", "thermal"))
    s.add_argument("model")
    s.add_argument("--failure", help="kind@seconds or kind:target@seconds")
    s.add_argument("--ambient", type=float, default=None, help="ambient temperature in C")
    s.add_argument("--mode", choices=COOLING_MODES, default="combined", help="drive cooling configuration")
    s.add_argument("-o", "--output", help="directory for trace CSV files")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("report", parents=[common], help="run every analysis and write a report")
    s.add_argument("model")
    s.add_argument("--format", choices=("json", "csv", "md"), default="json")
    s.add_argument("-o", "--output", default="report", help="output directory (default ./report)")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code not in (0, None) else PASS
    try:
        model = load_file(args.model)
        return args.func(args, model)
    except ParseError as exc:
        for e in exc.errors:
            _err(f"error: {e.render()}")
        return INPUT_ERROR
    except (OSError, UnicodeDecodeError) as exc:
        _err(f"error: cannot read {args.model}: {exc}")
        return INPUT_ERROR
    except (UsageError, A.ModelIncomplete) as exc:
        _err(f"error: {exc}")
        return INPUT_ERROR
    except (ResourceLimitError, MemoryError, StabilityError) as exc:
        _err(f"error: resource limit: {exc}")
        return INTERNAL_ERROR
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the internal-error status
        _err(f"internal error: {type(exc).__name__}: {exc}")
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
