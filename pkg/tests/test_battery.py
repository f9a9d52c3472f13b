import pytest
from hypothesis import given
from hypothesis import strategies as st

from evtolprop.battery import (CellSpec, PackDemand, available_power, capacity_from_energy, capacity_from_power,
                               discharge_rate, layout_pack, size_pack)

from oracles import c_rate, capacity_for_energy, capacity_for_power, power_of_capacity, sig, smallest_layout

CELL = CellSpec(3.6, 2.9, 10.0, 0.0479042, "cell_18650")


def test_battery_relations_to_three_figures():
    rate = discharge_rate(CELL)
    assert sig(capacity_from_energy(19700.0, 600.0), 3) == 32.8
    assert sig(rate, 4) == 3.448
    assert sig(capacity_from_power(90000.0, rate, 600.0), 3) == 43.5
    assert sig(available_power(32.8, rate, 600.0), 2) == 68000.0
    assert sig(available_power(90.0, rate, 600.0), 3) == 186000.0


def test_sixty_kilowatts_needs_twenty_nine_amp_hours():
    # A 29.3 Ah figure cannot follow from the same relation; see the acceptance test.
    assert capacity_from_power(60000.0, discharge_rate(CELL), 600.0) == pytest.approx(29.0, rel=1e-12)


@given(st.floats(1.0, 1e6), st.floats(100.0, 1000.0), st.floats(0.5, 30.0))
def test_relations_match_closed_forms(x, volts, rate):
    assert capacity_from_energy(x, volts) == pytest.approx(capacity_for_energy(x, volts), rel=1e-14)
    assert capacity_from_power(x, rate, volts) == pytest.approx(capacity_for_power(x, rate, volts), rel=1e-14)
    assert available_power(x, rate, volts) == pytest.approx(power_of_capacity(x, rate, volts), rel=1e-14)
    assert available_power(capacity_from_power(x, rate, volts), rate, volts) == pytest.approx(x, rel=1e-12)


def test_c_rate_oracle():
    assert discharge_rate(CELL) == c_rate(10.0, 2.9)


@given(st.floats(0.1, 500.0), st.floats(50.0, 1000.0), st.floats(1.0, 5.0), st.floats(0.5, 6.0))
def test_layout_is_the_smallest_meeting_both_targets(ah, volts, cell_v, cell_ah):
    cell = CellSpec(cell_v, cell_ah, 10.0, 0.05)
    lay = layout_pack(ah, volts, cell)
    s, p = smallest_layout(ah, volts, cell_v, cell_ah)
    assert (lay.series, lay.parallel) == (s, p)
    assert lay.capacity_ah >= ah * (1 - 1e-9)


def test_layout_exact_multiple_does_not_add_a_string():
    lay = layout_pack(43.5, 600.0, CELL)
    assert (lay.series, lay.parallel, lay.cells) == (167, 15, 2505)
    assert lay.mass_kg == pytest.approx(120.0, rel=0.01)


def test_governing_case_is_the_largest():
    d = PackDemand("main", 19700.0, 20900.0, 60000.0, 90000.0)
    sized = size_pack(d, CELL, 600.0)
    assert sized.governing.case == "emergency-power"
    assert sized.required_ah == pytest.approx(max(r.required_ah for r in sized.requirements))
    assert sum(r.governs for r in sized.requirements) == 1


def test_invalid_cell_is_rejected():
    with pytest.raises(ValueError):
        CellSpec(3.6, 0.0, 10.0, 0.05)


# -- bundled sizing ---------------------------------------------------------------

MAIN_ROWS = {"normal-energy": 32.8, "emergency-energy": 34.9, "normal-power": 29.0, "emergency-power": 43.5}
PUSH_ROWS = {"normal-energy": 70.0, "emergency-energy": 88.8, "normal-power": 32.9, "emergency-power": 60.9}


@pytest.mark.parametrize("role, rows, governs", [("main", MAIN_ROWS, "emergency-power"),
                                                 ("push", PUSH_ROWS, "emergency-energy")])
def test_sizing_rows_and_governance(sizing, role, rows, governs):
    sized = sizing.sizings[role]
    assert sized.governing.case == governs
    for r in sized.requirements:
        assert r.required_ah == pytest.approx(rows[r.case], rel=0.02)


def test_pack_layouts(sizing):
    main, push = sizing.sizings["main"].layout, sizing.sizings["push"].layout
    assert (main.series, main.parallel, main.cells) == (167, 15, 2505)
    assert main.mass_kg == pytest.approx(120.0, rel=0.01)
    assert (push.series, push.parallel, push.cells) == (167, 31, 5177)
    assert sig(push.capacity_ah, 2) == 90.0
    assert push.mass_kg == pytest.approx(248.0, rel=0.01)
