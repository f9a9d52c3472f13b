"""System-level fault trees generated from the architecture's redundancy structure."""

from __future__ import annotations

from dataclasses import dataclass, field

from .fta import BasicEvent, FaultTree, Gate
from .model import Architecture, ComponentKind, DriveUnit

FCC_ERROR_MODELS = ("pair", "majority")


@dataclass
class _Builder:
    arch: Architecture
    exposure: float
    gates: dict[str, Gate] = field(default_factory=dict)
    events: dict[str, BasicEvent] = field(default_factory=dict)

    def event(self, component: str, suffix: str = "", mode: str = "failure") -> str:
        eid = f"{component}_{suffix}" if suffix else component
        if eid not in self.events:
            comp = self.arch.component(component)
            self.events[eid] = BasicEvent(eid, comp.failure_rate, self.exposure, component=component,
                                          description=f"{component} {mode}")
        return eid

    def gate(self, gid: str, kind: str, children: list[str], k: int | None = None) -> str:
        children = [c for c in children if c is not None]
        if len(children) == 1 and kind in ("AND", "OR"):
            return children[0]
        self.gates[gid] = Gate(gid, kind, tuple(children), k)
        return gid

    def tree(self, name: str, top: str) -> FaultTree:
        t = FaultTree.build(top, self.gates.values(), self.events.values(), name)
        # Keep only what the top reaches so each tree is self-contained.
        reach = set(t.nodes())
        return FaultTree(top, {g: t.gates[g] for g in sorted(reach & set(t.gates))},
                         {e: t.events[e] for e in sorted(reach & set(t.events))}, name)

    def controller_loss(self, controller: str) -> str:
        channels = int(self.arch.component(controller).param("channels", 1))
        if channels >= 2:
            chans = [self.event(controller, f"ch{i}", f"channel {i} failure") for i in range(1, channels + 1)]
            return self.gate(f"{controller}_all_channels", "AND", chans)
        return self.event(controller)

    def power_loss(self, unit: DriveUnit) -> str | None:
        feed = self.arch.allocation.feeds.get(unit.controller)
        if feed is None:
            return None
        sources = [self.event(feed.primary)]
        if feed.alternate:
            sources.append(self.event(feed.alternate))
        return self.gate(f"{unit.id}_power_lost", "AND", sources)

    def drive_loss(self, unit: DriveUnit) -> str:
        children = [self.event(unit.motor), self.controller_loss(unit.controller), self.power_loss(unit)]
        if unit.gearbox:
            children.insert(1, self.event(unit.gearbox))
        return self.gate(f"{unit.id}_lost", "OR", children)

    def fcc_ids(self) -> list[str]:
        return sorted(c.id for c in self.arch.of_kind(ComponentKind.FLIGHT_CONTROL_COMPUTER))

    def command_lost(self) -> str | None:
        fccs = self.fcc_ids()
        if not fccs:
            return None
        events = [self.event(f) for f in fccs]
        need = len(fccs) - len(fccs) // 2  # voting fails once no majority is healthy
        return self.gate("fcc_majority_lost", "KOFN", events, need) if len(fccs) > 1 else events[0]

    def command_erroneous(self, model: str) -> str | None:
        fccs = self.fcc_ids()
        if not fccs:
            return None
        errs = [self.event(f, "err", "malfunction") for f in fccs]
        if len(errs) == 1:
            return errs[0]
        if model == "pair":
            return self.gate("fcc_pair_erroneous", "AND", errs[:2])
        return self.gate("fcc_majority_erroneous", "KOFN", errs, len(errs) // 2 + 1)

    def unmasked_output(self, unit: DriveUnit, source: str) -> str:
        """Erroneous output that neither disconnect device removes."""
        masks = [self.event(d, "stuck", "failure to operate") for d in (unit.relay, unit.clutch) if d]
        return self.gate(f"{unit.id}_unmasked", "AND", [source] + masks)

    def drive_erroneous(self, unit: DriveUnit) -> str:
        source = self.gate(f"{unit.id}_erroneous", "OR",
                           [self.event(unit.motor, "err", "malfunction"),
                            self.event(unit.controller, "err", "erroneous output")])
        return self.unmasked_output(unit, source)


def system_trees(arch: Architecture, exposure: float = 1.0, fcc_error_model: str = "pair") -> dict[str, FaultTree]:
    """One loss, incorrect-operation and inadvertent-operation tree per rotor, and one per propeller.

    Loss of a rotor's lift: every drive unit of the rotor lost, or the flight
    control computers lose their voting majority, or the rotor itself fails.
    A drive unit is lost with its motor, its gearbox, every controller channel,
    or every battery it can draw from.

    Incorrect operation: an erroneous command from the computers, or a drive
    whose erroneous output is masked by neither disconnect device.
    """
    if fcc_error_model not in FCC_ERROR_MODELS:
        raise ValueError(f"unknown FCC error model {fcc_error_model!r}")
    trees: dict[str, FaultTree] = {}
    for rotor, units in arch.rotor_drives.items():
        if not units:
            continue
        b = _Builder(arch, exposure)
        drives = b.gate(f"{rotor}_drives_lost", "AND", [b.drive_loss(u) for u in units])
        children = [drives, b.command_lost()]
        if arch.component(rotor).failure_rate > 0:
            children.append(b.event(rotor))
        name = f"loss_of_lift_{rotor}"
        trees[name] = b.tree(name, b.gate(f"{name}_top", "OR", children))

        b = _Builder(arch, exposure)
        outputs = [b.drive_erroneous(u) for u in units]
        name = f"inadvertent_ops_{rotor}"
        trees[name] = b.tree(name, b.gate(f"{name}_top", "OR", outputs))
        name = f"incorrect_ops_{rotor}"
        top = b.gate(f"{name}_top", "OR", [b.command_erroneous(fcc_error_model)] + outputs)
        trees[name] = b.tree(name, top)

    props: dict[str, list[DriveUnit]] = {}
    for u in arch.push_drives:
        props.setdefault(u.rotor, []).append(u)
    for prop, units in sorted(props.items()):
        b = _Builder(arch, exposure)
        command = b.command_erroneous(fcc_error_model)
        outputs = []
        for u in units:
            source = b.gate(f"{u.id}_erroneous", "OR", [b.controller_loss(u.controller), command])
            outputs.append(b.unmasked_output(u, source))
        name = f"inadvertent_ops_{prop}"
        trees[name] = b.tree(name, b.gate(f"{name}_top", "OR", outputs))
    return trees
