"""Write the structural part of the bundled model (components, drives, allocation).

The hand-tuned sections (fault trees, fha, mission, cells, powertrain, thermal)
live in tools/model_tail.adl and are appended verbatim.
"""

from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "src" / "evtolprop" / "data" / "horizonuam.adl"
TAIL = ROOT / "tools" / "model_tail.adl"

OPPOSITE = {1: 3, 2: 4, 3: 1, 4: 2}
ALLOCATION = {
    (1, 1): ("bat_1", "bat_3"), (1, 2): ("bat_2", "bat_4"),
    (2, 1): ("bat_1", "bat_2"), (2, 2): ("bat_3", "bat_4"),
    (3, 1): ("bat_3", "bat_2"), (3, 2): ("bat_4", "bat_1"),
    (4, 1): ("bat_2", "bat_3"), (4, 2): ("bat_4", "bat_1"),
}


def main() -> None:
    lines = ["# Quadcopter air taxi with two push propellers: four main rotors, two drive units each.",
             "# Failure rates per flight hour; unspecified rates use the per-kind defaults.", "[components]"]
    lines += [f"bat_{i} Battery {{ }}" for i in range(1, 6)]
    lines += [f"fcc_{i} FlightControlComputer {{ }}" for i in range(1, 4)]
    for r in range(1, 5):
        lines.append(f"rotor_{r} Rotor {{ opposite = rotor_{OPPOSITE[r]} }}")
        for u in (1, 2):
            lines += [f"mc_{r}_{u} MotorController {{ channels = 2 }}", f"m_{r}_{u} ElectricMotor {{ }}",
                      f"gb_{r}_{u} Gearbox {{ }}", f"rel_{r}_{u} DisconnectRelay {{ }}",
                      f"cl_{r}_{u} DisconnectClutch {{ }}"]
    for p in (1, 2):
        lines += [f"prop_{p} Propeller {{ }}", f"mc_p_{p} MotorController {{ channels = 2 }}",
                  f"m_p_{p} ElectricMotor {{ }}", f"rel_p_{p} DisconnectRelay {{ }}"]
    lines += ["", "[architecture]"]
    for r in range(1, 5):
        for u in (1, 2):
            lines.append(f"du_{r}_{u} DriveUnit {{ rotor = rotor_{r}  controller = mc_{r}_{u}  motor = m_{r}_{u}  "
                         f"gearbox = gb_{r}_{u}  relay = rel_{r}_{u}  clutch = cl_{r}_{u} }}")
    for p in (1, 2):
        lines.append(f"du_p_{p} DriveUnit {{ rotor = prop_{p}  controller = mc_p_{p}  motor = m_p_{p}  relay = rel_p_{p} }}")
    lines += ["", "# Primary and alternate battery per motor controller.", "[allocation]"]
    lines += [f"mc_{r}_{u}: {a}, {b}" for (r, u), (a, b) in sorted(ALLOCATION.items())]
    lines += ["mc_p_1: bat_5", "mc_p_2: bat_5", ""]
    OUT.write_text("\n".join(lines) + "\n" + TAIL.read_text(encoding="utf-8"), encoding="utf-8")


if __name__ == "__main__":
    main()
