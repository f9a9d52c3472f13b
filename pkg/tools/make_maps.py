"""Generate the bundled motor efficiency maps from smooth loss surrogates.

Loss = fixed + copper * torque^2 + iron * (speed / reference_speed)^2, in W.
Coefficients are chosen so the geared motor loses 1.4 kW at 2770 rpm / 100 Nm
and about 2.8 kW at its emergency point, and the direct-drive motor sits
between 85 and 92 % efficiency around 554 rpm / 500 Nm.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "evtolprop" / "data" / "maps"

MOTORS = {
    "geared_motor.csv": dict(
        fixed=10.0, copper=0.1, iron=390.0, reference_speed=2770.0,
        speeds=np.arange(100, 4601, 100), torques=np.arange(5, 231, 5),
    ),
    "direct_motor.csv": dict(
        fixed=80.0, copper=0.012, iron=500.0, reference_speed=554.0,
        speeds=np.arange(50, 1201, 50), torques=np.arange(25, 1001, 25),
    ),
}


def efficiency(speed_rpm: float, torque: float, fixed: float, copper: float, iron: float,
               reference_speed: float) -> float:
    mech = torque * speed_rpm * math.pi / 30.0
    loss = fixed + copper * torque**2 + iron * (speed_rpm / reference_speed) ** 2
    return mech / (mech + loss)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, cfg in MOTORS.items():
        coeffs = {k: cfg[k] for k in ("fixed", "copper", "iron", "reference_speed")}
        with open(OUT / name, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rpm", "torque_nm", "efficiency"])
            for n in cfg["speeds"]:
                for t in cfg["torques"]:
                    writer.writerow([int(n), int(t), f"{efficiency(float(n), float(t), **coeffs):.6f}"])
        print(OUT / name)


if __name__ == "__main__":
    main()
