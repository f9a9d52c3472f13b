"""Independent reference computations the implementation is checked against.

Nothing here imports the code under test except plain data types; each oracle
is a brute-force, enumerative or closed-form route to the same number.
"""

from __future__ import annotations

import itertools
import math
import random
from typing import Mapping, Sequence

# -- fault trees as plain nested tuples -----------------------------------
# A node is ("event", id) or (kind, k, children) with kind in AND / OR / KOFN.


def node_true(node, state: Mapping[str, bool]) -> bool:
    if node[0] == "event":
        return state[node[1]]
    kind, k, children = node
    hits = sum(node_true(c, state) for c in children)
    if kind == "AND":
        return hits == len(children)
    if kind == "OR":
        return hits >= 1
    return hits >= k


def events_of(node) -> set[str]:
    if node[0] == "event":
        return {node[1]}
    return set().union(*(events_of(c) for c in node[2]))


def brute_force_probability(node, probs: Mapping[str, float]) -> float:
    """Sum of state probabilities over all 2^n event states where the top holds."""
    names = sorted(events_of(node))
    total = []
    for bits in itertools.product((False, True), repeat=len(names)):
        state = dict(zip(names, bits))
        if node_true(node, state):
            total.append(math.prod(probs[n] if b else 1.0 - probs[n] for n, b in state.items()))
    return math.fsum(total)


def brute_force_cut_sets(node) -> set[frozenset[str]]:
    """Minimal sets of true events that make the top true, by enumeration."""
    names = sorted(events_of(node))
    cuts = []
    for bits in itertools.product((False, True), repeat=len(names)):
        state = dict(zip(names, bits))
        if node_true(node, state):
            cuts.append(frozenset(n for n, b in state.items() if b))
    cuts.sort(key=len)
    minimal: list[frozenset[str]] = []
    for c in cuts:
        if not any(m <= c for m in minimal):
            minimal.append(c)
    return set(minimal)


def random_tree(rng: random.Random, n_events: int, depth: int = 3, shared: bool = True):
    """Random gate structure over e0..e{n-1}; events may repeat when shared is set."""
    names = [f"e{i}" for i in range(n_events)]
    pool = list(names)
    rng.shuffle(pool)

    def build(level: int, avail: list[str]):
        if level == 0 or len(avail) <= 1:
            return ("event", avail[0]) if avail else ("event", rng.choice(names))
        n_children = rng.randint(2, min(4, max(2, len(avail))))
        # Split the available events between children.
        cuts = sorted(rng.sample(range(1, len(avail)), min(n_children - 1, len(avail) - 1)))
        parts = [avail[i:j] for i, j in zip([0] + cuts, cuts + [len(avail)])]
        children = []
        for part in parts:
            if rng.random() < 0.4:
                children.append(("event", part[0]) if len(part) == 1 else build(level - 1, part))
            else:
                children.append(build(level - 1, part))
        if shared and rng.random() < 0.3:
            children.append(("event", rng.choice(names)))
        kind = rng.choice(("AND", "OR", "KOFN"))
        k = rng.randint(1, len(children)) if kind == "KOFN" else None
        return (kind, k, tuple(children))

    return build(depth, pool)


def random_probabilities(rng: random.Random, names: Sequence[str]) -> dict[str, float]:
    return {n: rng.choice((rng.uniform(1e-4, 0.05), rng.uniform(0.05, 0.6))) for n in sorted(names)}


def series_probability(probs: Sequence[float]) -> float:
    """Probability that at least one element of a series chain fails."""
    survive = 1.0
    for p in probs:
        survive *= 1.0 - p
    return 1.0 - survive


def rate_to_probability(rate: float, hours: float = 1.0) -> float:
    return 1.0 - math.exp(-rate * hours)


# -- battery relations in closed form -----------------------------------------


def capacity_for_energy(energy_wh: float, volts: float) -> float:
    return energy_wh / volts


def c_rate(current_a: float, capacity_ah: float) -> float:
    return current_a / capacity_ah


def capacity_for_power(power_w: float, rate_per_h: float, volts: float) -> float:
    return power_w / rate_per_h / volts


def power_of_capacity(capacity_ah: float, rate_per_h: float, volts: float) -> float:
    return capacity_ah * rate_per_h * volts


def smallest_layout(required_ah: float, volts: float, cell_v: float, cell_ah: float) -> tuple[int, int]:
    """Smallest series count reaching the voltage and parallel count reaching the capacity, by search."""
    s = 1
    while s * cell_v < volts - 1e-9:
        s += 1
    p = 1
    while p * cell_ah < required_ah - 1e-9:
        p += 1
    return s, p


def sig(x: float, digits: int) -> float:
    return float(f"{x:.{digits}g}")


# -- thermal closed forms ----------------------------------------------------


def rc_temperature(t: float, t0: float, ambient: float, q: float, g: float, c: float) -> float:
    """Single node with heat q and conductance g to ambient."""
    t_inf = ambient + q / g
    return t_inf + (t0 - t_inf) * math.exp(-g * t / c)


def rc_euler(steps: int, dt: float, t0: float, ambient: float, q: float, g: float, c: float) -> float:
    """The same node stepped with explicit Euler in plain Python."""
    t = t0
    for _ in range(steps):
        t += dt * (q + g * (ambient - t)) / c
    return t


# -- hover power from momentum theory ----------------------------------------


def ideal_hover_power(thrust_n: float, radius_m: float, density: float) -> float:
    area = math.pi * radius_m ** 2
    return thrust_n ** 1.5 / math.sqrt(2.0 * density * area)
