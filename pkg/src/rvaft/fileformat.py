"""External representations: tree documents, guard syntax, spec emission,
trace ingestion and verdict logs.

Tree documents are UTF-8 JSON, parsed fail-closed (unknown keys are
rejected). Traces and verdict logs are JSONL. Guards use a small infix
syntax ('T2 >= T1 + 10', quoted strings are constants, bare identifiers are
variables).
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass

from .errors import GuardParseError, SchemaError, TreeParseError
from .model import GATE_KINDS, NODE_CLASSES, GateSpec, RvaftNode, RvaftTree
from .terms import (
    Atom,
    Bind,
    BinOp,
    Check,
    Const,
    Empty,
    Epsilon,
    EventAnnotation,
    Let,
    NotOp,
    Seq,
    Shuffle,
    Union,
    Var,
    canonical_topic,
    iter_atoms,
    normalize_event,
    normalize_value,
)
from .engine import Verdict

log = logging.getLogger(__name__)

TREE_SUFFIX = ".rvaft.json"
TRACE_SUFFIX = ".trace.jsonl"
VERDICTS_SUFFIX = ".verdicts.jsonl"
SPEC_SUFFIX = ".spec.txt"


# ---------------------------------------------------------------------------
# Guard expressions: parser and printer
# ---------------------------------------------------------------------------

_KEYWORDS = {"and", "or", "not"}
_CMP_OPS = ("<=", ">=", "==", "!=", "<", ">")


class _GuardParser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def error(self, message):
        raise GuardParseError(message, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take_word(self):
        self.skip_ws()
        start = self.pos
        if self.pos < len(self.text) and (
            self.text[self.pos].isalpha() or self.text[self.pos] == "_"
        ):
            self.pos += 1
            while self.pos < len(self.text) and (
                self.text[self.pos].isalnum() or self.text[self.pos] == "_"
            ):
                self.pos += 1
        return self.text[start : self.pos]

    def try_word(self, word):
        save = self.pos
        if self.take_word() == word:
            return True
        self.pos = save
        return False

    def expect(self, ch):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def parse(self):
        expr = self.parse_or()
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing input")
        return expr

    def parse_or(self):
        left = self.parse_and()
        while self.try_word("or"):
            left = BinOp("or", left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_not()
        while self.try_word("and"):
            left = BinOp("and", left, self.parse_not())
        return left

    def parse_not(self):
        if self.try_word("not"):
            return NotOp(self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self):
        left = self.parse_sum()
        self.skip_ws()
        for op in _CMP_OPS:
            if self.text.startswith(op, self.pos):
                self.pos += len(op)
                return BinOp(op, left, self.parse_sum())
        return left

    def parse_sum(self):
        left = self.parse_term()
        while True:
            self.skip_ws()
            ch = self.text[self.pos] if self.pos < len(self.text) else ""
            if ch and ch in "+-":
                self.pos += 1
                left = BinOp(ch, left, self.parse_term())
            else:
                return left

    def parse_term(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            expr = self.parse_or()
            self.expect(")")
            return expr
        if ch == "'":
            self.pos += 1
            end = self.text.find("'", self.pos)
            if end < 0:
                self.error("unterminated string")
            value = self.text[self.pos : end]
            self.pos = end + 1
            return Const(value)
        if ch.isdigit():
            start = self.pos
            while self.pos < len(self.text) and (
                self.text[self.pos].isdigit() or self.text[self.pos] == "."
            ):
                self.pos += 1
            try:
                return Const(float(self.text[start : self.pos]))
            except ValueError:
                self.error("bad number")
        word = self.take_word()
        if not word:
            self.error("expected a value, variable or '('")
        if word in _KEYWORDS:
            self.error(f"keyword {word!r} is not a value")
        return Var(word)


def parse_guard(text):
    """Parse a guard expression; raises GuardParseError with a position."""
    return _GuardParser(text).parse()


_PREC = {"or": 1, "and": 2, "not": 3, "cmp": 4, "sum": 5, "atom": 6}


def _guard_prec(g):
    if isinstance(g, BinOp):
        if g.op in ("or", "and"):
            return _PREC[g.op]
        if g.op in ("+", "-"):
            return _PREC["sum"]
        return _PREC["cmp"]
    if isinstance(g, NotOp):
        return _PREC["not"]
    return _PREC["atom"]


def _format_const(value):
    if isinstance(value, str):
        return f"'{value}'"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return repr(value)


def print_guard(g, parent_prec=0):
    """Canonical textual form; printing then parsing is a fixpoint."""
    prec = _guard_prec(g)
    if isinstance(g, Const):
        text = _format_const(g.value)
    elif isinstance(g, Var):
        text = g.name
    elif isinstance(g, NotOp):
        text = f"not {print_guard(g.operand, prec)}"
    elif isinstance(g, BinOp):
        # Left-associative chains print flat on the left; comparisons do not
        # chain, so both their operands get parenthesized at equal precedence.
        left_prec = prec + 1 if prec == _PREC["cmp"] else prec
        text = (
            f"{print_guard(g.left, left_prec)} {g.op} {print_guard(g.right, prec + 1)}"
        )
    else:
        raise TypeError(f"not a guard expression: {g!r}")
    return f"({text})" if prec < parent_prec else text


# ---------------------------------------------------------------------------
# Tree documents
# ---------------------------------------------------------------------------

def _schema_error(node_id, message):
    raise SchemaError(f"{node_id}: {message}" if node_id else message)


def _parse_matcher(node_id, key, raw):
    if isinstance(raw, dict) and set(raw) == {"bind"}:
        if not isinstance(raw["bind"], str):
            _schema_error(node_id, f"pattern {key}: bind must name a variable")
        return Bind(raw["bind"])
    value = normalize_value(raw)
    if key == "topic" and isinstance(value, str):
        value = canonical_topic(value)
    return value


def _parse_annotation(node_id, raw):
    allowed = {"name", "pattern", "guard", "on_guard_fail"}
    unknown = set(raw) - allowed
    if unknown:
        _schema_error(node_id, f"unknown event keys: {sorted(unknown)}")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        _schema_error(node_id, "event needs a non-empty name")
    pattern_raw = raw.get("pattern", {})
    if not isinstance(pattern_raw, dict):
        _schema_error(node_id, "event pattern must be an object")
    pattern = tuple(
        (key, _parse_matcher(node_id, key, value)) for key, value in pattern_raw.items()
    )
    guard = None
    if "guard" in raw:
        if not isinstance(raw["guard"], str):
            _schema_error(node_id, "guard must be a string")
        try:
            guard = parse_guard(raw["guard"])
        except GuardParseError as exc:
            _schema_error(node_id, f"bad guard: {exc}")
    policy = raw.get("on_guard_fail")
    if policy not in (None, "skip", "violate"):
        _schema_error(node_id, f"bad on_guard_fail: {policy!r}")
    try:
        return EventAnnotation(name, pattern, guard, policy)
    except ValueError as exc:
        _schema_error(node_id, str(exc))


def _parse_gate(node_id, raw):
    allowed = {"kind", "k", "children"}
    unknown = set(raw) - allowed
    if unknown:
        _schema_error(node_id, f"unknown gate keys: {sorted(unknown)}")
    kind = raw.get("kind")
    if kind not in GATE_KINDS:
        _schema_error(node_id, f"unknown gate kind {kind!r}")
    children = raw.get("children")
    if not isinstance(children, list) or not all(isinstance(c, str) for c in children):
        _schema_error(node_id, "gate children must be a list of node ids")
    if not children:
        _schema_error(node_id, "gate needs children")
    k = raw.get("k")
    if k is not None and (isinstance(k, bool) or not isinstance(k, int)):
        _schema_error(node_id, "k must be an integer")
    return GateSpec(kind, tuple(children), k)


def parse_tree(data):
    """Parse a tree document from bytes or text. Fail-closed on unknown keys."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TreeParseError(f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise TreeParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        _schema_error(None, "document must be a JSON object")
    allowed = {"name", "root", "nodes"}
    unknown = set(doc) - allowed
    if unknown:
        _schema_error(None, f"unknown document keys: {sorted(unknown)}")
    if "root" not in doc:
        _schema_error(None, "missing root")
    root = doc["root"]
    if not isinstance(root, str):
        _schema_error(None, "root must be a node id")
    name = doc.get("name", "")
    nodes_raw = doc.get("nodes")
    if not isinstance(nodes_raw, dict):
        _schema_error(None, "missing nodes object")
    nodes = {}
    for node_id, raw in nodes_raw.items():
        if not isinstance(raw, dict):
            _schema_error(node_id, "node must be an object")
        allowed = {"label", "class", "gate", "event"}
        unknown = set(raw) - allowed
        if unknown:
            _schema_error(node_id, f"unknown node keys: {sorted(unknown)}")
        node_class = raw.get("class", "neutral")
        if node_class not in NODE_CLASSES:
            _schema_error(node_id, f"unknown class {node_class!r}")
        gate = _parse_gate(node_id, raw["gate"]) if raw.get("gate") is not None else None
        ann = (
            _parse_annotation(node_id, raw["event"])
            if raw.get("event") is not None
            else None
        )
        label = raw.get("label", "")
        if not isinstance(label, str):
            _schema_error(node_id, "label must be a string")
        nodes[node_id] = RvaftNode(node_id, label, node_class, ann, gate)
    return RvaftTree(name if isinstance(name, str) else "", root, nodes)


def _matcher_to_json(key, matcher):
    if isinstance(matcher, Bind):
        return {"bind": matcher.var}
    if isinstance(matcher, float) and matcher.is_integer():
        return int(matcher)
    if isinstance(matcher, tuple):
        return list(matcher)
    return matcher


def _annotation_to_json(ann):
    out = {"name": ann.name, "pattern": {k: _matcher_to_json(k, m) for k, m in ann.pattern}}
    if ann.guard is not None:
        out["guard"] = print_guard(ann.guard)
    if ann.on_guard_fail is not None:
        out["on_guard_fail"] = ann.on_guard_fail
    return out


def serialize_tree(tree):
    """Deterministic textual form of a tree; parse_tree inverts it."""
    nodes = {}
    for node_id, node in tree.nodes.items():
        raw = {"label": node.label, "class": node.node_class}
        if node.gate is not None:
            gate = {"kind": node.gate.kind, "children": list(node.gate.children)}
            if node.gate.k is not None:
                gate["k"] = node.gate.k
            raw["gate"] = gate
        if node.annotation is not None:
            raw["event"] = _annotation_to_json(node.annotation)
        nodes[node_id] = raw
    doc = {"name": tree.name, "root": tree.root, "nodes": nodes}
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

@dataclass
class TraceStats:
    lines: int = 0
    events: int = 0
    malformed: int = 0


def read_trace(stream, stats=None):
    """Yield events from a JSONL stream in order; malformed lines are counted
    and skipped with a warning, never aborting the stream."""
    stats = stats if stats is not None else TraceStats()
    if isinstance(stream, (bytes, str)):
        stream = io.StringIO(
            stream.decode("utf-8") if isinstance(stream, bytes) else stream
        )
    for line in stream:
        if isinstance(line, bytes):
            line = line.decode("utf-8", errors="replace")
        line = line.strip()
        if not line:
            continue
        stats.lines += 1
        try:
            raw = json.loads(line)
            if not isinstance(raw, dict) or not isinstance(raw.get("topic"), str):
                raise ValueError("record needs a string 'topic'")
            event = normalize_event(raw)
            event["topic"] = canonical_topic(event["topic"])
        except (ValueError, TypeError) as exc:
            stats.malformed += 1
            log.warning("skipping malformed trace line %d: %s", stats.lines, exc)
            continue
        stats.events += 1
        yield event


def format_event(event):
    """One JSONL line for an event (used by the scenario generator)."""
    def undo(v):
        if isinstance(v, float) and v.is_integer():
            return int(v)
        if isinstance(v, dict):
            return {k: undo(x) for k, x in v.items()}
        if isinstance(v, tuple):
            return [undo(x) for x in v]
        return v

    return json.dumps({k: undo(v) for k, v in event.items()}, ensure_ascii=False)


# ---------------------------------------------------------------------------
# Verdict records
# ---------------------------------------------------------------------------

def verdict_record_line(entry):
    """Serialize one verdict row as a JSONL line."""
    out = {
        "event_index": entry.event_index,
        "verdict": entry.verdict.value,
        "property": entry.property,
        "live_branches": sorted(entry.live_branches),
        "skipped": bool(entry.skipped),
    }
    if entry.bindings:
        out["bindings"] = {
            k: (int(v) if isinstance(v, float) and v.is_integer() else v)
            for k, v in sorted(entry.bindings.items())
            if isinstance(v, (float, str, bool))
        }
    return json.dumps(out, ensure_ascii=False)


# ---------------------------------------------------------------------------
# Monitor spec emission
# ---------------------------------------------------------------------------

def _atom_args(ann):
    """Display arguments: binds in pattern order, plus distinguishing string
    literals (the topic and a literal equal to the atom's own name are
    implied and omitted)."""
    args = []
    for key, matcher in ann.pattern:
        if key == "topic":
            continue
        if isinstance(matcher, Bind):
            args.append(matcher.var)
        elif isinstance(matcher, str) and matcher != ann.name:
            args.append(matcher)
    return args


def _atom_head(ann):
    args = _atom_args(ann)
    return f"{ann.name}({', '.join(args)})" if args else ann.name


def _pattern_text(ann):
    parts = []
    for key, matcher in ann.pattern:
        if isinstance(matcher, Bind):
            parts.append(f"{key}: {matcher.var}")
        elif isinstance(matcher, str):
            parts.append(f"{key}: '{matcher}'")
        else:
            parts.append(f"{key}: {_format_const(matcher)}")
    return "{ " + ", ".join(parts) + " }"


def _declaration(ann):
    line = f"{_atom_head(ann)} matches {_pattern_text(ann)}"
    if ann.guard is not None:
        line += f" with {print_guard(ann.guard)}"
    return line + ";"


def _term_text(term, parenthesize=False):
    if isinstance(term, Atom):
        return _atom_head(term.ann)
    if isinstance(term, Check):
        return f"({print_guard(term.guard)})"
    if isinstance(term, Seq):
        text = f"{_term_text(term.left, True)} {_term_text(term.right)}"
        return f"({text})" if parenthesize else text
    if isinstance(term, Union):
        return f"({_term_text(term.left, True)} \\/ {_term_text(term.right, True)})"
    if isinstance(term, Shuffle):
        return f"({_term_text(term.left, True)} | {_term_text(term.right, True)})"
    if isinstance(term, Let):
        return _term_text(term.body, parenthesize)
    if isinstance(term, Epsilon):
        return "empty"
    if isinstance(term, Empty):
        return "none"
    raise TypeError(f"not a term: {term!r}")


def _main_line(label, term):
    if isinstance(term, Let) and term.vars:
        body = _term_text(term.body)
        return f"{label} = {{ let {', '.join(term.vars)}; {body} }}"
    return f"{label} = {{ {_term_text(term)} }}"


def emit_spec(spec):
    """Human-readable monitor specification text; byte-stable across runs.

    One declaration line per distinct atom (sorted by atom name, stable in
    first-occurrence order), then one Main line for the merged term or one
    Main_<id> line per branch property.
    """
    terms = [spec.merged] if spec.merged is not None else [p.term for p in spec.properties]
    atoms = []
    for term in terms:
        for ann in iter_atoms(term):
            if ann not in atoms:
                atoms.append(ann)
    lines = [_declaration(ann) for ann in sorted(atoms, key=lambda a: a.name)]
    if spec.merged is not None:
        lines.append(_main_line("Main", spec.merged))
    else:
        for prop in spec.properties:
            lines.append(_main_line(f"Main_{prop.id}", prop.term))
    return "\n".join(lines) + "\n"
