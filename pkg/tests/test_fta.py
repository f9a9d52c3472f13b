import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtolprop.fta import (BasicEvent, CutSet, FaultTree, FaultTreeError, Gate, ResourceLimitError, cut_set_tree,
                           evaluate_top, event_probability, importance, importance_ranking, minimal_cut_sets,
                           monte_carlo_top, probability_from_cut_sets)

from oracles import (brute_force_cut_sets, brute_force_probability, events_of, random_probabilities, random_tree,
                     rate_to_probability)


def to_tree(node, probs, name="t") -> FaultTree:
    gates = []
    counter = [0]

    def walk(n):
        if n[0] == "event":
            return n[1]
        kind, k, children = n
        counter[0] += 1
        gid = f"g{counter[0]}"
        kids = tuple(walk(c) for c in children)
        gates.append(Gate(gid, kind, kids, k))
        return gid

    top = walk(node)
    events = [BasicEvent(e, fixed_probability=p) for e, p in probs.items()]
    return FaultTree.build(top, gates, events, name)


def random_case(seed, n_max=12):
    rng = random.Random(seed)
    n = rng.randint(2, n_max)
    node = random_tree(rng, n, depth=rng.randint(1, 4))
    if node[0] == "event":
        node = ("OR", None, (node, ("event", "e0" if node[1] != "e0" else "e1")))
    probs = random_probabilities(rng, sorted(events_of(node)))
    return node, probs


@pytest.mark.parametrize("seed", range(100))
def test_exact_matches_enumeration(seed):
    node, probs = random_case(seed)
    tree = to_tree(node, probs)
    expected = brute_force_probability(node, probs)
    got = evaluate_top(tree)
    assert got == pytest.approx(expected, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("seed", range(40))
def test_mocus_matches_enumerated_minimal_sets(seed):
    node, probs = random_case(1000 + seed)
    tree = to_tree(node, probs)
    got = {frozenset(cs.events) for cs in minimal_cut_sets(tree)}
    assert got == brute_force_cut_sets(node)


@pytest.mark.parametrize("seed", range(20))
def test_cut_set_rewrite_preserves_probability(seed):
    node, probs = random_case(2000 + seed, n_max=10)
    tree = to_tree(node, probs)
    cuts = minimal_cut_sets(tree)
    assert probability_from_cut_sets(cuts, probs) == pytest.approx(evaluate_top(tree), rel=1e-10)
    assert evaluate_top(cut_set_tree(cuts, tree.events)) == pytest.approx(evaluate_top(tree), rel=1e-10)


def test_monte_carlo_within_four_standard_errors():
    misses = []
    for seed in range(100):
        rng = random.Random(5000 + seed)
        node = random_tree(rng, 8, depth=3)
        if node[0] == "event":
            node = ("OR", None, (node, ("event", "e1" if node[1] == "e0" else "e0")))
        probs = random_probabilities(rng, sorted(events_of(node)))
        tree = to_tree(node, probs)
        exact = evaluate_top(tree)
        mc = monte_carlo_top(tree, 100_000, seed=seed)
        se = max(mc.standard_error, math.sqrt(exact * (1 - exact) / mc.trials), 1e-12)
        if abs(mc.estimate - exact) > 4 * se:
            misses.append((seed, exact, mc.estimate, se))
    assert not misses


def test_monte_carlo_is_seed_reproducible():
    node, probs = random_case(7)
    tree = to_tree(node, probs)
    a = monte_carlo_top(tree, 20_000, seed=42)
    b = monte_carlo_top(tree, 20_000, seed=42)
    c = monte_carlo_top(tree, 20_000, seed=43)
    assert a == b
    assert (a.hits, a.estimate) != (c.hits, c.estimate) or a.estimate in (0.0, 1.0)


def test_importance_sampling_reaches_rare_events():
    events = [BasicEvent(f"x{i}", fixed_probability=1e-4) for i in range(3)]
    tree = FaultTree.build("top", [Gate("top", "AND", ("x0", "x1", "x2"))], events)
    mc = monte_carlo_top(tree, 50_000, seed=1, bias=1000.0)
    assert mc.estimate == pytest.approx(1e-12, rel=0.1)


def test_event_probability_from_rate():
    e = BasicEvent("m", rate=9.24e-5, exposure=1.0)
    assert event_probability(e) == pytest.approx(rate_to_probability(9.24e-5), rel=1e-15)
    assert event_probability(BasicEvent("f", rate=1.0, fixed_probability=0.25)) == 0.25


def test_kofn_two_of_three():
    events = [BasicEvent(n, fixed_probability=0.1) for n in "abc"]
    tree = FaultTree.build("v", [Gate("v", "KOFN", ("a", "b", "c"), 2)], events)
    assert evaluate_top(tree) == pytest.approx(3 * 0.01 * 0.9 + 0.001, rel=1e-14)


def test_shared_event_is_not_double_counted():
    events = [BasicEvent("a", fixed_probability=0.5), BasicEvent("b", fixed_probability=0.5)]
    gates = [Gate("top", "AND", ("g1", "g2")), Gate("g1", "OR", ("a", "b")), Gate("g2", "OR", ("a", "b"))]
    tree = FaultTree.build("top", gates, events)
    assert tree.shared_events() == ["a", "b"]
    assert evaluate_top(tree) == pytest.approx(0.75)


def test_rare_event_bound_is_above_exact():
    node, probs = random_case(11)
    tree = to_tree(node, probs)
    assert evaluate_top(tree, method="rare_event") >= evaluate_top(tree) - 1e-15


@pytest.mark.parametrize("bad", [
    lambda: Gate("g", "XOR", ("a",)),
    lambda: Gate("g", "AND", ()),
    lambda: Gate("g", "KOFN", ("a", "b"), 3),
    lambda: BasicEvent("e", rate=-1.0),
    lambda: BasicEvent("e", fixed_probability=1.5),
    lambda: FaultTree.build("top", [Gate("top", "OR", ("g2",)), Gate("g2", "OR", ("top",))], []),
    lambda: FaultTree.build("top", [Gate("top", "OR", ("missing",))], []),
])
def test_malformed_trees_are_rejected(bad):
    with pytest.raises(FaultTreeError):
        bad()


def test_too_many_shared_events_hits_the_resource_limit():
    names = [f"s{i}" for i in range(22)]
    events = [BasicEvent(n, fixed_probability=0.01) for n in names]
    gates = [Gate("top", "AND", ("l", "r")), Gate("l", "OR", tuple(names)), Gate("r", "OR", tuple(names))]
    with pytest.raises(ResourceLimitError):
        evaluate_top(FaultTree.build("top", gates, events))


def test_importance_measures():
    events = [BasicEvent("a", fixed_probability=0.1), BasicEvent("b", fixed_probability=0.2),
              BasicEvent("c", fixed_probability=0.3)]
    tree = FaultTree.build("top", [Gate("top", "OR", ("a", "g")), Gate("g", "AND", ("b", "c"))], events)
    imp = importance(tree, "a")
    assert imp.birnbaum == pytest.approx(1 - 0.06)
    top = evaluate_top(tree)
    assert imp.fussell_vesely == pytest.approx(0.1 / top)
    assert [r.event for r in importance_ranking(tree)][0] == "a"


def test_cut_set_ordering():
    assert CutSet.of(["b", "a"]) == CutSet(2, ("a", "b"))
    assert CutSet.of(["z"]) < CutSet.of(["a", "b"])


@st.composite
def tree_and_bump(draw):
    seed = draw(st.integers(0, 10_000))
    node, probs = random_case(seed, n_max=8)
    event = draw(st.sampled_from(sorted(probs)))
    bump = draw(st.floats(0.0, 1.0))
    return node, probs, event, bump


@settings(max_examples=60, deadline=None)
@given(tree_and_bump())
def test_raising_an_event_probability_never_lowers_the_top(case):
    node, probs, event, bump = case
    tree = to_tree(node, probs)
    higher = dict(probs)
    higher[event] = probs[event] + (1.0 - probs[event]) * bump
    assert evaluate_top(tree, higher) >= evaluate_top(tree) - 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_top_probability_is_bounded_by_cut_sets(seed):
    node, probs = random_case(seed, n_max=8)
    tree = to_tree(node, probs)
    p = evaluate_top(tree)
    cuts = minimal_cut_sets(tree)
    best = max(math.prod(probs[e] for e in c.events) for c in cuts)
    assert best - 1e-15 <= p <= min(1.0, sum(math.prod(probs[e] for e in c.events) for c in cuts)) + 1e-15
