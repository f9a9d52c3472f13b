"""Parser and canonical serializer for the architecture description language (.adl)."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .model import ComponentKind

SECTION_ORDER = (
    "components",
    "architecture",
    "fault_trees",
    "allocation",
    "fha",
    "mission",
    "cells",
    "powertrain",
    "thermal",
)
GATE_KINDS = ("AND", "OR", "KOFN")
EVENT_KINDS = ("BasicEvent", "FaultTree")
MAX_ERRORS = 10


@dataclass(frozen=True, slots=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(Exception):
    """A diagnostic with its location; `errors` holds every diagnostic collected."""

    def __init__(self, span: SourceSpan, message: str, expected: tuple[str, ...] = ()):
        self.span = span
        self.message = message
        self.expected = tuple(expected)
        self.errors: list[ParseError] = [self]
        super().__init__(self.render())

    def render(self) -> str:
        text = f"{self.span}: {self.message}"
        if self.expected:
            text += f" (expected {', '.join(self.expected)})"
        return text


class Ident(str):
    """A bare identifier value, as opposed to a quoted string."""

    __slots__ = ()


Scalar = Union[int, float, str]
Value = Union[Scalar, tuple]


@dataclass(frozen=True)
class KeyValue:
    key: str
    value: Value
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class Block:
    id: str
    kind: str
    fields: tuple[tuple[str, Value], ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)
    field_spans: tuple[SourceSpan, ...] = field(default=(), compare=False, repr=False)
    kind_span: SourceSpan | None = field(default=None, compare=False, repr=False)

    def get(self, name: str, default=None):
        for k, v in self.fields:
            if k == name:
                return v
        return default

    def has(self, name: str) -> bool:
        return any(k == name for k, _ in self.fields)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Block):
            return NotImplemented
        return (self.id, self.kind, sorted(self.fields, key=lambda f: f[0])) == (
            other.id, other.kind, sorted(other.fields, key=lambda f: f[0]))

    __hash__ = None  # type: ignore[assignment]

    def span_of(self, name: str) -> SourceSpan | None:
        for (k, _), s in zip(self.fields, self.field_spans):
            if k == name:
                return s
        return self.span


@dataclass(frozen=True)
class Gate:
    id: str
    op: str
    children: tuple[str, ...]
    k: int | None = None
    span: SourceSpan | None = field(default=None, compare=False, repr=False)
    child_spans: tuple[SourceSpan, ...] = field(default=(), compare=False, repr=False)


Entry = Union[KeyValue, Block, Gate]


def _entry_key(e: "Entry") -> tuple[int, str]:
    if isinstance(e, KeyValue):
        return (0, e.key)
    return (1, e.id) if isinstance(e, Block) else (2, e.id)


@dataclass(frozen=True, eq=False)
class Section:
    name: str
    entries: tuple[Entry, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Section):
            return NotImplemented
        return self.name == other.name and sorted(self.entries, key=_entry_key) == sorted(
            other.entries, key=_entry_key)

    __hash__ = None  # type: ignore[assignment]

    @property
    def values(self) -> dict[str, Value]:
        return {e.key: e.value for e in self.entries if isinstance(e, KeyValue)}

    def keyvalues(self) -> list[KeyValue]:
        return [e for e in self.entries if isinstance(e, KeyValue)]

    def blocks(self, kind: str | None = None) -> list[Block]:
        return [e for e in self.entries if isinstance(e, Block) and (kind is None or e.kind == kind)]

    @property
    def gates(self) -> list[Gate]:
        return [e for e in self.entries if isinstance(e, Gate)]


@dataclass(frozen=True, eq=False)
class Document:
    sections: tuple[Section, ...] = ()
    file: str = field(default="<input>", compare=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Document):
            return NotImplemented
        return sorted(self.sections, key=lambda s: s.name) == sorted(other.sections, key=lambda s: s.name)

    __hash__ = None  # type: ignore[assignment]

    def section(self, name: str) -> Section | None:
        for s in self.sections:
            if s.name == name:
                return s
        return None

    def __contains__(self, name: str) -> bool:
        return self.section(name) is not None


# -- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?(?![A-Za-z_]))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.\-]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>[\[\]{}()=:,;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, slots=True)
class _Tok:
    kind: str
    text: str
    span: SourceSpan
    first_on_line: bool


def _tokenize(text: str, file: str, errors: list[ParseError]) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start, pos = 1, 0, 0
    first = True
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        span = SourceSpan(file, line, pos - line_start + 1)
        if m is None:
            errors.append(ParseError(span, f"unexpected character {text[pos]!r}"))
            pos += 1
            continue
        kind = m.lastgroup
        if kind == "newline":
            toks.append(_Tok("newline", "\n", span, first))
            line += 1
            line_start = m.end()
            first = True
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), span, first))
            first = False
        pos = m.end()
    toks.append(_Tok("eof", "", SourceSpan(file, line, pos - line_start + 1), first))
    return toks


def _unquote(text: str) -> str:
    body = text[1:-1]
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), body)


def _number(text: str) -> int | float:
    if re.fullmatch(r"[+-]?\d+", text):
        return int(text)
    return float(text)


# -- parser ----------------------------------------------------------------


class _Recover(Exception):
    pass


class _Parser:
    def __init__(self, toks: list[_Tok], file: str, errors: list[ParseError]):
        self.toks = toks
        self.i = 0
        self.file = file
        self.errors = errors

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, message: str, expected: tuple[str, ...] = (), span: SourceSpan | None = None):
        self.errors.append(ParseError(span or self.tok.span, message, expected))
        raise _Recover

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind not in ("punct",):
            self.fail(f"unexpected {self._describe(self.tok)}", (repr(text),))
        return self.next()

    def ident(self, what: str = "identifier") -> _Tok:
        if self.tok.kind != "ident":
            self.fail(f"unexpected {self._describe(self.tok)}", (what,))
        return self.next()

    @staticmethod
    def _describe(t: _Tok) -> str:
        if t.kind == "eof":
            return "end of input"
        if t.kind == "newline":
            return "end of line"
        return repr(t.text)

    def skip_newlines(self) -> None:
        while self.tok.kind == "newline":
            self.next()

    def end_of_line(self) -> None:
        if self.tok.kind not in ("newline", "eof"):
            self.fail(f"unexpected {self._describe(self.tok)}", ("end of line",))
        self.next()

    def recover(self) -> None:
        while self.tok.kind != "eof":
            if self.tok.first_on_line and self.tok.text == "[":
                return
            self.next()

    def parse(self) -> list[tuple[str, SourceSpan, list[Entry]]]:
        sections: list[tuple[str, SourceSpan, list[Entry]]] = []
        current: list[Entry] | None = None
        while True:
            if len(self.errors) >= MAX_ERRORS:
                break
            self.skip_newlines()
            if self.tok.kind == "eof":
                break
            try:
                if self.tok.text == "[" and self.tok.kind == "punct":
                    start = self.next().span
                    name = self.ident("section name")
                    self.expect("]")
                    self.end_of_line()
                    current = []
                    sections.append((name.text, start, current))
                    continue
                if current is None:
                    self.fail("entry outside of a section", ("'['",))
                current.append(self.entry())
            except _Recover:
                self.recover()
                current = None
        return sections

    def entry(self) -> Entry:
        first = self.ident("entry")
        if first.text == "gate" and self.tok.kind == "ident":
            return self.gate(first)
        if self.tok.text == ":":
            self.next()
            value = self.value_list()
            self.end_of_line()
            return KeyValue(first.text, value, first.span)
        if self.tok.kind == "ident":
            kind = self.next()
            return self.block(first, kind)
        self.fail(f"unexpected {self._describe(self.tok)}", ("':'", "kind name"))
        raise AssertionError  # unreachable

    def gate(self, start: _Tok) -> Gate:
        name = self.ident("gate id")
        self.expect("=")
        op = self.ident("gate kind")
        if op.text not in GATE_KINDS:
            self.fail(f"unknown gate kind {op.text!r}", GATE_KINDS, span=op.span)
        self.expect("(")
        k = None
        if op.text == "KOFN":
            if self.tok.kind != "number" or not isinstance(_number(self.tok.text), int):
                self.fail(f"unexpected {self._describe(self.tok)}", ("integer k",))
            k = _number(self.next().text)
            self.expect(";")
        children, spans = [], []
        while True:
            self.skip_newlines()
            c = self.ident("event or gate id")
            children.append(c.text)
            spans.append(c.span)
            self.skip_newlines()
            if self.tok.text == ",":
                self.next()
                continue
            break
        self.expect(")")
        self.end_of_line()
        return Gate(name.text, op.text, tuple(children), k, start.span, tuple(spans))

    def block(self, ident: _Tok, kind: _Tok) -> Block:
        self.expect("{")
        fields: list[tuple[str, Value]] = []
        spans: list[SourceSpan] = []
        while True:
            self.skip_newlines()
            if self.tok.text == "}":
                self.next()
                break
            if self.tok.text in (",", ";"):
                self.next()
                continue
            name = self.ident("field name")
            self.expect("=")
            fields.append((name.text, self.value()))
            spans.append(name.span)
        self.end_of_line()
        return Block(ident.text, kind.text, tuple(fields), ident.span, tuple(spans), kind.span)

    def value_list(self) -> Value:
        items = [self.value()]
        while self.tok.text == ",":
            self.next()
            items.append(self.value())
        return items[0] if len(items) == 1 else tuple(items)

    def value(self) -> Value:
        t = self.tok
        if t.kind == "number":
            self.next()
            return _number(t.text)
        if t.kind == "ident":
            self.next()
            return Ident(t.text)
        if t.kind == "string":
            self.next()
            return _unquote(t.text)
        if t.text == "[":
            self.next()
            items: list[Value] = []
            self.skip_newlines()
            while self.tok.text != "]":
                items.append(self.value())
                self.skip_newlines()
                if self.tok.text == ",":
                    self.next()
                    self.skip_newlines()
                elif self.tok.text != "]":
                    self.fail(f"unexpected {self._describe(self.tok)}", ("','", "']'"))
            self.next()
            return tuple(items)
        self.fail(f"unexpected {self._describe(t)}", ("number", "identifier", "string", "'['"))
        raise AssertionError  # unreachable


def _check(sections: list[tuple[str, SourceSpan, list[Entry]]], errors: list[ParseError]) -> None:
    seen: dict[str, SourceSpan] = {}
    for name, span, _ in sections:
        if name not in SECTION_ORDER:
            errors.append(ParseError(span, f"unknown section {name!r}", SECTION_ORDER))
        elif name in seen:
            errors.append(ParseError(span, f"duplicate section {name!r} (first at line {seen[name].line})"))
        else:
            seen[name] = span

    by_name = {name: entries for name, _, entries in sections}
    for name, _, entries in sections:
        ids: set[str] = set()
        for e in entries:
            key = e.key if isinstance(e, KeyValue) else e.id
            if key in ids:
                errors.append(ParseError(e.span, f"duplicate id {key!r} in [{name}]"))
            ids.add(key)

    component_ids = set()
    for e in by_name.get("components", []):
        if isinstance(e, Block):
            component_ids.add(e.id)
            try:
                ComponentKind.from_name(e.kind)
            except ValueError:
                errors.append(
                    ParseError(e.kind_span or e.span, f"unknown component kind {e.kind!r}",
                               tuple(k.value for k in ComponentKind))
                )
        elif isinstance(e, Gate):
            errors.append(ParseError(e.span, "gates are only allowed in [fault_trees]"))

    for name, _, entries in sections:
        if name != "fault_trees":
            for e in entries:
                if isinstance(e, Gate):
                    errors.append(ParseError(e.span, "gates are only allowed in [fault_trees]"))

    tree_entries = by_name.get("fault_trees", [])
    gates = {e.id: e for e in tree_entries if isinstance(e, Gate)}
    events = set()
    for e in tree_entries:
        if isinstance(e, Block):
            if e.kind not in EVENT_KINDS:
                errors.append(ParseError(e.kind_span or e.span, f"unknown fault tree entry kind {e.kind!r}", EVENT_KINDS))
            elif e.kind == "BasicEvent":
                events.add(e.id)
            if e.id in component_ids:
                errors.append(ParseError(e.span, f"id {e.id!r} already names a component"))
    for g in gates.values():
        if g.id in component_ids:
            errors.append(ParseError(g.span, f"gate id {g.id!r} already names a component"))
        if g.op == "KOFN" and not 1 <= (g.k or 0) <= len(g.children):
            errors.append(ParseError(g.span, f"KOFN k={g.k} outside 1..{len(g.children)}"))
        for child, cspan in zip(g.children, g.child_spans or (g.span,) * len(g.children)):
            if child not in gates and child not in events and child not in component_ids:
                errors.append(ParseError(cspan, f"unknown event {child!r}"))

    state: dict[str, int] = {}

    def visit(gid: str) -> bool:
        state[gid] = 1
        for c in gates[gid].children:
            if c in gates:
                if state.get(c) == 1:
                    return True
                if state.get(c) is None and visit(c):
                    return True
        state[gid] = 2
        return False

    for gid in sorted(gates):
        if state.get(gid) is None and visit(gid):
            errors.append(ParseError(gates[gid].span, f"cycle through gate {gid!r}"))
            break


def parse(text: str, file: str = "<input>") -> Document:
    """Parse .adl text. Raises ParseError (first diagnostic, all in `.errors`)."""
    if text.startswith("\ufeff"):
        text = text[1:]
    errors: list[ParseError] = []
    toks = _tokenize(text, file, errors)
    sections = _Parser(toks, file, errors).parse()
    if not errors:
        _check(sections, errors)
    if errors:
        errors = errors[:MAX_ERRORS]
        first = errors[0]
        first.errors = errors
        raise first
    return Document(tuple(Section(n, tuple(e), s) for n, s, e in sections), file)


def parse_file(path) -> Document:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))


# -- serializer ------------------------------------------------------------


def _sci(x: float, digits: int) -> str:
    mant, exp = f"{x:.{digits - 1}e}".split("e")
    if "." in mant:
        mant = mant.rstrip("0").rstrip(".")
    return f"{mant}e{int(exp)}"


def format_number(x: int | float) -> str:
    """Canonical number text: 6 significant digits, scientific below 1e-3."""
    if isinstance(x, bool):
        raise TypeError("booleans are not ADL numbers")
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x!r}")
    if x == 0:
        return "0.0"
    for digits in range(6, 18):
        if abs(x) < 1e-3 or abs(x) >= 1e6:
            s = _sci(x, digits)
        else:
            s = f"{x:.{digits}g}"
        if float(s) == x:
            return s
    return repr(x)


def _format_value(v: Value, bracket: bool = True) -> str:
    if isinstance(v, tuple):
        inner = ", ".join(_format_value(i) for i in v)
        if not bracket and len(v) > 1:
            return inner
        return f"[{inner}]"
    if isinstance(v, Ident):
        return str(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'
    return format_number(v)


def _sorted_entries(section: Section) -> Iterator[str]:
    for kv in sorted(section.keyvalues(), key=lambda e: e.key):
        yield f"{kv.key}: {_format_value(kv.value, bracket=False)}"
    for b in sorted(section.blocks(), key=lambda e: e.id):
        fields = " ".join(f"{k} = {_format_value(v)}" for k, v in sorted(b.fields, key=lambda f: f[0]))
        yield f"{b.id} {b.kind} {{ {fields} }}" if fields else f"{b.id} {b.kind} {{ }}"
    for g in sorted(section.gates, key=lambda e: e.id):
        args = ", ".join(g.children)
        if g.op == "KOFN":
            args = f"{g.k}; {args}"
        yield f"gate {g.id} = {g.op}({args})"


def serialize(doc: Document) -> str:
    """Canonical text: fixed section order, sorted ids and fields."""
    rank = {name: i for i, name in enumerate(SECTION_ORDER)}
    parts = []
    for section in sorted(doc.sections, key=lambda s: rank.get(s.name, len(rank))):
        lines = [f"[{section.name}]", *_sorted_entries(section)]
        parts.append("\n".join(lines) + "\n")
    return "\n".join(parts)


def replace_section(doc: Document, section: Section) -> Document:
    """Return a copy of doc with `section` added or replacing the same-named one."""
    kept = tuple(s for s in doc.sections if s.name != section.name)
    return Document(kept + (section,), doc.file)
