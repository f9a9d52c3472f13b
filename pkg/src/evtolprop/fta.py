"""Fault tree evaluation: exact top-event probability, minimal cut sets, Monte Carlo, importance."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

GATE_KINDS = ("AND", "OR", "KOFN")
MAX_SHARED_EVENTS = 20
MAX_CUT_SET_ROWS = 1_000_000


class FaultTreeError(ValueError):
    pass


class ResourceLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class BasicEvent:
    id: str
    rate: float = 0.0
    exposure: float = 1.0
    fixed_probability: float | None = None
    component: str | None = None
    description: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise FaultTreeError(f"event {self.id}: rate must be finite and >= 0")
        if not (math.isfinite(self.exposure) and self.exposure > 0):
            raise FaultTreeError(f"event {self.id}: exposure must be > 0")
        p = self.fixed_probability
        if p is not None and not 0.0 <= p <= 1.0:
            raise FaultTreeError(f"event {self.id}: fixed probability {p} outside [0, 1]")


def event_probability(e: BasicEvent) -> float:
    """Fixed probability if given, else 1 - exp(-rate * exposure)."""
    if e.fixed_probability is not None:
        return float(e.fixed_probability)
    return -math.expm1(-e.rate * e.exposure)


@dataclass(frozen=True)
class Gate:
    id: str
    kind: str
    children: tuple[str, ...]
    k: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise FaultTreeError(f"gate {self.id}: unknown kind {self.kind!r}")
        if not self.children:
            raise FaultTreeError(f"gate {self.id}: no children")
        if self.kind == "KOFN" and not (self.k is not None and 1 <= self.k <= len(self.children)):
            raise FaultTreeError(f"gate {self.id}: KOFN needs 1 <= k <= {len(self.children)}")

    @property
    def threshold(self) -> int:
        if self.kind == "AND":
            return len(self.children)
        if self.kind == "OR":
            return 1
        return int(self.k)


@dataclass(frozen=True)
class FaultTree:
    top: str
    gates: Mapping[str, Gate]
    events: Mapping[str, BasicEvent]
    name: str = ""
    independent: bool = True

    def __post_init__(self) -> None:
        if self.top not in self.gates and self.top not in self.events:
            raise FaultTreeError(f"tree {self.name}: top {self.top!r} is not declared")
        state: dict[str, int] = {}

        def visit(node: str) -> None:
            if node in self.events:
                return
            if node not in self.gates:
                raise FaultTreeError(f"tree {self.name}: undeclared event {node!r}")
            if state.get(node) == 1:
                raise FaultTreeError(f"tree {self.name}: cycle through gate {node!r}")
            if state.get(node) == 2:
                return
            state[node] = 1
            for c in self.gates[node].children:
                visit(c)
            state[node] = 2

        visit(self.top)

    @classmethod
    def build(cls, top: str, gates: Iterable[Gate], events: Iterable[BasicEvent], name: str = "") -> "FaultTree":
        return cls(top, {g.id: g for g in gates}, {e.id: e for e in events}, name or top)

    def nodes(self) -> list[str]:
        """Reachable nodes in post-order (children before parents)."""
        order: list[str] = []
        seen: set[str] = set()

        def visit(node: str) -> None:
            if node in seen:
                return
            seen.add(node)
            if node in self.gates:
                for c in self.gates[node].children:
                    visit(c)
            order.append(node)

        visit(self.top)
        return order

    def basic_events(self) -> list[str]:
        return sorted(n for n in self.nodes() if n in self.events)

    def probabilities(self, overrides: Mapping[str, float] | None = None) -> dict[str, float]:
        probs = {e: event_probability(self.events[e]) for e in self.basic_events()}
        if overrides:
            for k, v in overrides.items():
                if k not in probs:
                    raise FaultTreeError(f"event {k!r} not in tree {self.name}")
                probs[k] = float(v)
        return probs

    def with_probabilities(self, overrides: Mapping[str, float]) -> "FaultTree":
        events = dict(self.events)
        for k, v in overrides.items():
            events[k] = replace(events[k], fixed_probability=float(v))
        return replace(self, events=events)

    def shared_events(self) -> list[str]:
        """Events reachable from the top along more than one path."""
        paths: dict[str, int] = {self.top: 1}
        nodes = self.nodes()
        for node in reversed(nodes):
            if node in self.gates:
                for c in self.gates[node].children:
                    paths[c] = min(2, paths.get(c, 0) + paths[node])
        return sorted(e for e in self.basic_events() if paths.get(e, 0) > 1)


# -- exact evaluation ------------------------------------------------------


def _or(values: Sequence) -> np.ndarray | float:
    with np.errstate(divide="ignore"):
        acc = sum(np.log1p(-np.asarray(v, dtype=float)) for v in values)
    return -np.expm1(acc)


def _at_least(values: Sequence, k: int):
    """P(at least k of independent events) via the count distribution."""
    dist = [np.ones_like(np.asarray(values[0], dtype=float))]
    for v in values:
        v = np.asarray(v, dtype=float)
        q = 1.0 - v
        nxt = [dist[0] * q]
        for j in range(1, len(dist)):
            nxt.append(dist[j] * q + dist[j - 1] * v)
        nxt.append(dist[-1] * v)
        dist = nxt
    return sum(dist[k:])


def _combine(gate: Gate, values: Sequence):
    if gate.kind == "AND":
        out = values[0]
        for v in values[1:]:
            out = out * v
        return out
    if gate.kind == "OR":
        return _or(values)
    if gate.threshold == 1:
        return _or(values)
    if gate.threshold == len(values):
        return _combine(Gate(gate.id, "AND", gate.children), values)
    return _at_least(values, gate.threshold)


def _bottom_up(tree: FaultTree, leaf: Mapping[str, object]):
    value: dict[str, object] = {}
    for node in tree.nodes():
        if node in tree.events:
            value[node] = leaf[node]
        else:
            g = tree.gates[node]
            value[node] = _combine(g, [value[c] for c in g.children])
    return value[tree.top]


def evaluate_top(
    tree: FaultTree,
    probabilities: Mapping[str, float] | None = None,
    method: str = "exact",
) -> float:
    """Top-event probability under independence.

    Trees whose events each appear on a single path are combined bottom-up.
    Shared events are handled by conditioning on every combination of their
    states, which keeps the result exact. `method="rare_event"` returns the
    sum of minimal cut set probabilities instead.
    """
    probs = tree.probabilities(probabilities)
    if method == "rare_event":
        return math.fsum(math.prod(probs[e] for e in cs.events) for cs in minimal_cut_sets(tree))
    if method != "exact":
        raise ValueError(f"unknown method {method!r}")
    shared = tree.shared_events()
    if not shared:
        return float(_bottom_up(tree, probs))
    if len(shared) > MAX_SHARED_EVENTS:
        raise ResourceLimitError(
            f"tree {tree.name}: {len(shared)} shared events exceed the exact limit "
            f"of {MAX_SHARED_EVENTS}; use monte_carlo_top instead"
        )
    states = np.array(list(itertools.product((0.0, 1.0), repeat=len(shared))))
    leaf: dict[str, object] = dict(probs)
    weight = np.ones(len(states))
    for i, e in enumerate(shared):
        col = states[:, i]
        leaf[e] = col
        weight = weight * np.where(col == 1.0, probs[e], 1.0 - probs[e])
    conditional = np.broadcast_to(np.asarray(_bottom_up(tree, leaf), dtype=float), weight.shape)
    return math.fsum((weight * conditional).tolist())


# -- cut sets --------------------------------------------------------------


@dataclass(frozen=True, order=True)
class CutSet:
    order: int
    events: tuple[str, ...] = field(compare=True)

    @classmethod
    def of(cls, events: Iterable[str]) -> "CutSet":
        ev = tuple(sorted(set(events)))
        return cls(len(ev), ev)

    def __contains__(self, event: str) -> bool:
        return event in self.events


def minimal_cut_sets(tree: FaultTree, limit: int = MAX_CUT_SET_ROWS) -> list[CutSet]:
    """Top-down (MOCUS) expansion followed by subset minimization."""
    events = tree.basic_events()
    bit = {e: 1 << i for i, e in enumerate(events)}
    found: set[int] = set()
    stack: list[tuple[int, tuple[str, ...]]] = [(0, (tree.top,))]
    rows = 0
    while stack:
        rows += 1
        if rows > limit:
            raise ResourceLimitError(f"tree {tree.name}: more than {limit} intermediate cut set rows")
        mask, pending = stack.pop()
        while pending and pending[0] in tree.events:
            mask |= bit[pending[0]]
            pending = pending[1:]
        if not pending:
            found.add(mask)
            continue
        g = tree.gates[pending[0]]
        rest = pending[1:]
        if g.kind == "AND" or g.threshold == len(g.children):
            stack.append((mask, g.children + rest))
        elif g.threshold == 1:
            for c in reversed(g.children):
                stack.append((mask, (c,) + rest))
        else:
            for combo in itertools.combinations(g.children, g.threshold):
                stack.append((mask, combo + rest))
    kept: list[int] = []
    for m in sorted(found, key=lambda m: (bin(m).count("1"), m)):
        if not any(k & m == k for k in kept):
            kept.append(m)
    out = [CutSet.of(e for e in events if m & bit[e]) for m in kept]
    return sorted(out)


def probability_from_cut_sets(cut_sets: Sequence[CutSet], probs: Mapping[str, float]) -> float:
    """Exact union probability of the cut sets by inclusion-exclusion."""
    if len(cut_sets) > MAX_SHARED_EVENTS:
        raise ResourceLimitError(f"{len(cut_sets)} cut sets exceed the inclusion-exclusion limit")
    terms = []
    for r in range(1, len(cut_sets) + 1):
        sign = 1.0 if r % 2 else -1.0
        for combo in itertools.combinations(cut_sets, r):
            union = set().union(*(c.events for c in combo))
            terms.append(sign * math.prod(probs[e] for e in union))
    return math.fsum(terms)


def cut_set_tree(cut_sets: Sequence[CutSet], events: Mapping[str, BasicEvent], name: str = "cut_sets") -> FaultTree:
    """OR over AND gates, one per cut set."""
    gates = [Gate(f"__cs{i}", "AND", cs.events) for i, cs in enumerate(cut_sets)]
    top = Gate("__top", "OR", tuple(g.id for g in gates))
    used = {e for cs in cut_sets for e in cs.events}
    return FaultTree.build(top.id, [top, *gates], [events[e] for e in sorted(used)], name)


# -- Monte Carlo -----------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: float
    standard_error: float
    trials: int
    hits: int
    seed: int
    weighted: bool = False

    @property
    def reliable(self) -> bool:
        return self.hits >= 10


def _sample_top(tree: FaultTree, states: Mapping[str, np.ndarray]) -> np.ndarray:
    value: dict[str, np.ndarray] = {}
    for node in tree.nodes():
        if node in tree.events:
            value[node] = states[node]
            continue
        g = tree.gates[node]
        kids = [value[c] for c in g.children]
        if g.threshold == 1:
            value[node] = np.logical_or.reduce(kids)
        elif g.threshold == len(kids):
            value[node] = np.logical_and.reduce(kids)
        else:
            value[node] = np.sum(kids, axis=0, dtype=np.int64) >= g.threshold
    return value[tree.top]


def monte_carlo_top(
    tree: FaultTree,
    trials: int,
    seed: int = 42,
    streams: int = 1,
    bias: float | None = None,
    chunk: int = 65536,
    probabilities: Mapping[str, float] | None = None,
) -> MonteCarloResult:
    """Seeded Bernoulli sampling of the basic events.

    With `bias` set, each event is sampled at min(0.5, bias * p) and trials
    are reweighted by the likelihood ratio (importance sampling), which makes
    rare top events observable. Results depend only on (seed, streams, chunk).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    events = tree.basic_events()
    probs = tree.probabilities(probabilities)
    p = np.array([probs[e] for e in events])
    q = p if bias is None else np.maximum(p, np.minimum(0.5, p * bias))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_hit = np.where(p > 0, np.log(p) - np.log(q), 0.0)
        log_miss = np.where(p < 1, np.log1p(-p) - np.log1p(-q), 0.0)
    rngs = [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(streams)]
    per_stream = [trials // streams + (1 if i < trials % streams else 0) for i in range(streams)]
    hits = 0
    total = 0.0
    total_sq = 0.0
    for rng, n in zip(rngs, per_stream):
        done = 0
        while done < n:
            m = min(chunk, n - done)
            u = rng.random((len(events), m))
            x = u < q[:, None]
            top = _sample_top(tree, {e: x[i] for i, e in enumerate(events)})
            hits += int(top.sum())
            if bias is None:
                total += float(top.sum())
            else:
                logw = np.where(x, log_hit[:, None], log_miss[:, None]).sum(axis=0)
                w = np.where(top, np.exp(logw), 0.0)
                total += math.fsum(w.tolist())
                total_sq += math.fsum((w * w).tolist())
            done += m
    if bias is None:
        est = total / trials
        se = math.sqrt(est * (1.0 - est) / trials)
    else:
        est = total / trials
        var = max(total_sq / trials - est * est, 0.0)
        se = math.sqrt(var / trials)
    return MonteCarloResult(est, se, trials, hits, seed, bias is not None)


# -- importance measures ---------------------------------------------------


@dataclass(frozen=True)
class Importance:
    event: str
    birnbaum: float
    fussell_vesely: float


def importance(tree: FaultTree, event: str) -> Importance:
    """Birnbaum and Fussell-Vesely importance of one basic event."""
    if event not in tree.basic_events():
        raise FaultTreeError(f"event {event!r} not in tree {tree.name}")
    p_top = evaluate_top(tree)
    if p_top <= 0.0:
        raise FaultTreeError(f"tree {tree.name}: P(top) = 0, Fussell-Vesely undefined")
    birnbaum = evaluate_top(tree, {event: 1.0}) - evaluate_top(tree, {event: 0.0})
    containing = [cs for cs in minimal_cut_sets(tree) if event in cs]
    if containing:
        sub = cut_set_tree(containing, tree.events, f"{tree.name}:{event}")
        fv = evaluate_top(sub) / p_top
    else:
        fv = 0.0
    return Importance(event, birnbaum, fv)


def importance_ranking(tree: FaultTree) -> list[Importance]:
    """All events, most important (Birnbaum) first; ties broken by id."""
    ranked = [importance(tree, e) for e in tree.basic_events()]
    return sorted(ranked, key=lambda r: (-r.birnbaum, r.event))
