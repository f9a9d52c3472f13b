import pytest

from evtolprop.loader import load_text
from evtolprop.model import (Architecture, Component, ComponentKind, DriveUnit, Feed, PowerAllocation, Severity,
                             default_failure_rates, validate_architecture)

from variants import single_drive_text, without_line


def requirements(text):
    return {v.requirement for v in validate_architecture(load_text(text).architecture)}


def test_bundled_architecture_meets_every_rule(model):
    arch = model.architecture
    assert validate_architecture(arch) == []
    assert len(arch.main_drives) == 8 and len(arch.push_drives) == 2
    assert arch.main_batteries == ["bat_1", "bat_2", "bat_3", "bat_4"]
    assert arch.push_batteries == ["bat_5"]
    assert arch.opposite_rotor("rotor_1") == "rotor_3"


def test_two_flight_computers_break_rule_10():
    assert requirements(without_line("fcc_3 ")) == {10}


def test_single_drive_rotors_break_rule_1():
    assert 1 in requirements(single_drive_text())


def test_missing_alternate_breaks_rule_7():
    text = without_line("mc_1_1:").replace("[allocation]\n", "[allocation]\nmc_1_1: bat_1\n")
    assert requirements(text) == {7}


def test_single_channel_controller_breaks_rule_5():
    text = without_line("mc_2_1 ").replace("[components]\n", "[components]\nmc_2_1 MotorController { channels = 1 }\n")
    assert requirements(text) == {5}


def test_missing_clutch_breaks_rule_4():
    text = single_drive_text()
    unit = "du_1_1 DriveUnit { rotor = rotor_1  controller = mc_1_1  motor = m_1_1  gearbox = gb_1_1  relay = rel_1_1 }"
    text = text.replace(unit[:-2] + "  clutch = cl_1_1 }", unit)
    assert 4 in requirements(text)


def test_default_rates():
    rates = default_failure_rates()
    assert rates[ComponentKind.BATTERY] == 9.31e-5
    assert rates[ComponentKind.FLIGHT_CONTROL_COMPUTER] == 1.57e-5


def test_component_kind_and_severity_names():
    assert ComponentKind.from_name("Gearbox") is ComponentKind.GEARBOX
    with pytest.raises(ValueError):
        ComponentKind.from_name("Toaster")
    assert Severity.from_name("hazardous") is Severity.HAZARDOUS
    assert Severity.CATASTROPHIC > Severity.MAJOR


def test_allocation_lookups():
    rates = default_failure_rates()
    comps = tuple(Component(cid, kind, rates[kind]) for cid, kind in (
        ("b1", ComponentKind.BATTERY), ("b2", ComponentKind.BATTERY), ("c", ComponentKind.MOTOR_CONTROLLER),
        ("m", ComponentKind.ELECTRIC_MOTOR), ("r", ComponentKind.ROTOR)))
    alloc = PowerAllocation({"c": Feed("b1", "b2")})
    arch = Architecture(comps, (DriveUnit("u", "r", "c", "m"),), alloc)
    assert alloc.primary_of("c") == "b1"
    assert alloc.controllers_fed_by("b1") == ["c"]
    assert alloc.controllers_fed_by("b2") == []
    assert arch.unit_of_controller("c").id == "u"
