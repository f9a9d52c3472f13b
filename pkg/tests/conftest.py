import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evtolprop import analysis as A  # noqa: E402
from evtolprop.loader import load_bundled  # noqa: E402



@pytest.fixture(scope="session")
def model():
    return load_bundled()


@pytest.fixture(scope="session")
def sizing(model):
    return A.size_batteries(model)


@pytest.fixture(scope="session")
def summary(model, sizing):
    return A.mission_summary(model, sizing)


@pytest.fixture(scope="session")
def drive_runs(model):
    normal = A.drive_thermal(model, "combined")
    return {
        "air": A.drive_thermal(model, "air-only"),
        "normal": normal,
        "emergency": A.drive_thermal(model, "combined", A.drive_failure(model)),
        "fan_off": A.cooldown(model, False, after=normal),
        "fan_on": A.cooldown(model, True, after=normal),
    }


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        if n not in acceptance.RESULTS:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")
            continue
        ok, notes = acceptance.RESULTS[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}"
        terminalreporter.write_line(line + (f" ({'; '.join(notes)})" if notes else ""))
