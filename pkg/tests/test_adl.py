import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtolprop import adl
from evtolprop.adl import Block, Document, Ident, KeyValue, ParseError, Section, format_number, parse, serialize
from evtolprop.loader import bundled_path

SMALL = """
# drive train of one rotor
[components]
m_1 ElectricMotor { lambda = 9.24e-5 }
mc_1 MotorController { lambda = 4.75e-5  channels = 2 }
fcc_1 FlightControlComputer { lambda = 1.57e-5 }

[fault_trees]
exposure: 1
gate top = OR(m_1, g2)
gate g2 = KOFN(2; mc_1, fcc_1,
               m_1)
"""


def test_parse_small_document():
    doc = parse(SMALL, "small.adl")
    comps = doc.section("components")
    assert [b.id for b in comps.blocks()] == ["m_1", "mc_1", "fcc_1"]
    assert comps.blocks()[1].get("channels") == 2
    ft = doc.section("fault_trees")
    assert ft.values == {"exposure": 1}
    g2 = next(g for g in ft.gates if g.id == "g2")
    assert (g2.op, g2.k, g2.children) == ("KOFN", 2, ("mc_1", "fcc_1", "m_1"))


def test_spans_point_at_the_offending_token():
    text = "[components]\nm_1 ElectricMotor { lambda = 1e-5 }\nx Toaster { }\n"
    with pytest.raises(ParseError) as exc:
        parse(text, "t.adl")
    err = exc.value
    assert (err.span.file, err.span.line, err.span.column) == ("t.adl", 3, 3)
    assert "unknown component kind" in err.message


@pytest.mark.parametrize("text, fragment, line", [
    ("[nonsense]\n", "unknown section", 1),
    ("[components]\n[components]\n", "duplicate section", 2),
    ("m ElectricMotor { }\n", "outside of a section", 1),
    ("[components]\nm ElectricMotor { lambda = }\n", "unexpected", 2),
    ("[fault_trees]\ngate g = XOR(a)\n", "unknown gate kind", 2),
    ("[fault_trees]\ngate g = KOFN(3; a, b)\na BasicEvent { probability = 0.1 }\nb BasicEvent { probability = 0.1 }\n",
     "KOFN", 2),
    ("[fault_trees]\ngate g = OR(nobody)\n", "unknown event", 2),
    ("[components]\nm ElectricMotor { lambda = 1 }\nm ElectricMotor { lambda = 2 }\n", "duplicate id", 3),
    ("[mission]\ngate g = OR(a)\n", "only allowed in [fault_trees]", 2),
    ("[cells]\nv: \"unterminated\n", "unexpected", 2),
])
def test_diagnostics(text, fragment, line):
    with pytest.raises(ParseError) as exc:
        parse(text, "d.adl")
    messages = [(e.span.line, e.message) for e in exc.value.errors]
    assert any(fragment in m and ln == line for ln, m in messages), messages


def test_several_errors_are_collected_and_capped():
    text = "[components]\n" + "".join(f"x{i} Toaster {{ }}\n" for i in range(30))
    with pytest.raises(ParseError) as exc:
        parse(text)
    assert 2 <= len(exc.value.errors) <= 30
    bad = "[components]\n" + "".join(f"x{i} Motor {{ = }}\n[components]\n" for i in range(30))
    with pytest.raises(ParseError) as exc:
        parse(bad)
    assert len(exc.value.errors) <= adl.MAX_ERRORS + 30


def test_recovery_continues_at_next_section():
    text = "[components]\nm ElectricMotor { lambda = }\n[cells]\nsystem_voltage: 600\nv: ,\n"
    with pytest.raises(ParseError) as exc:
        parse(text)
    lines = sorted(e.span.line for e in exc.value.errors)
    assert lines == [2, 5]
    assert exc.value.errors[0].span.line == 2


def test_number_formatting():
    assert format_number(1.57e-5) == "1.57e-5"
    assert format_number(600) == "600"
    assert format_number(0.0) == "0.0"
    assert format_number(16700.0) == "16700"
    assert float(format_number(1 / 3)) == 1 / 3
    with pytest.raises(ValueError):
        format_number(math.inf)


def test_bundled_model_is_a_serialization_fixpoint():
    doc = parse(bundled_path("horizonuam").read_text(), "horizonuam.adl")
    once = serialize(doc)
    again = parse(once)
    assert again == doc
    assert serialize(again) == once


def test_replace_section():
    doc = parse("[cells]\nsystem_voltage: 600\n")
    new = adl.replace_section(doc, Section("cells", (KeyValue("system_voltage", 800),)))
    assert new.section("cells").values == {"system_voltage": 800}


# -- round trip of generated documents -------------------------------------

RESERVED = {"gate"}
HEAD = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_"
TAIL = HEAD + "0123456789"
SUFFIX = "abcdefghijklmnopqrstuvwxyz0123456789"


@st.composite
def idents(draw):
    name = draw(st.sampled_from(HEAD)) + draw(st.text(TAIL, max_size=6))
    sep = draw(st.sampled_from(("", ".", "-")))
    if sep:
        name += sep + draw(st.text(SUFFIX, min_size=1, max_size=3))
    return name

names = idents().filter(lambda s: s not in RESERVED)


@st.composite
def kinds(draw):
    return draw(st.sampled_from(HEAD[26:52])) + draw(st.text(HEAD[:52], max_size=8))


texts = st.text(st.characters(blacklist_categories=("Cc", "Cs")), max_size=12)
scalars = st.one_of(
    st.integers(-10**9, 10**9),
    st.floats(allow_nan=False, allow_infinity=False, width=64).filter(lambda x: abs(x) < 1e300),
    names.map(Ident),
    texts,
)
values = st.recursive(scalars, lambda inner: st.lists(inner, max_size=4).map(tuple), max_leaves=6)


@st.composite
def sections(draw, name):
    keys = draw(st.lists(names, max_size=4, unique=True))
    entries = [KeyValue(k, draw(values)) for k in keys]
    ids = draw(st.lists(names.filter(lambda i: i not in keys), max_size=4, unique=True))
    for i in ids:
        fields = draw(st.lists(st.tuples(names, values), max_size=4, unique_by=lambda f: f[0]))
        entries.append(Block(i, draw(kinds()), tuple(fields)))
    return Section(name, tuple(entries))


@st.composite
def documents(draw):
    names = draw(st.lists(st.sampled_from(("mission", "cells", "powertrain", "thermal", "fha")), unique=True,
                          min_size=1))
    return Document(tuple(draw(sections(n)) for n in names))


def _canonical(v):
    """Serialization may write 5.0 as 5; compare numbers by value."""
    if isinstance(v, tuple):
        return tuple(_canonical(x) for x in v)
    if isinstance(v, Ident):
        return ("ident", str(v))
    if isinstance(v, str):
        return ("str", v)
    return ("num", float(v))


def _shape(doc: Document):
    out = {}
    for s in doc.sections:
        items = []
        for e in s.entries:
            if isinstance(e, KeyValue):
                v = e.value
                # A one-element list on a key-value line stays a list; bare scalars stay scalars.
                items.append(("kv", e.key, _canonical(v)))
            else:
                items.append(("block", e.id, e.kind, tuple(sorted((k, _canonical(v)) for k, v in e.fields))))
        out[s.name] = sorted(items)
    return out


@settings(max_examples=150, deadline=None)
@given(documents())
def test_parse_serialize_round_trip_is_a_fixpoint(doc):
    text = serialize(doc)
    parsed = parse(text)
    assert _shape(parsed) == _shape(doc)
    assert serialize(parsed) == text
