"""Attack-fault trees with runtime events: monitor compiler and engine."""

from .compiler import (
    BranchProperty,
    MonitorSpec,
    compile_tree,
    decompose,
    merge,
    translate_and,
    translate_or,
    translate_sand,
    translate_vot,
)
from .engine import Monitor, RunResult, TraceRunner, Verdict, init, run_trace, step
from .errors import RvaftError
from .fileformat import (
    emit_spec,
    parse_guard,
    parse_tree,
    print_guard,
    read_trace,
    serialize_tree,
)
from .model import GateSpec, RvaftNode, RvaftTree, Violation, annotate, prune, validate
from .oracle import language, oracle_verdict
from .terms import (
    Atom,
    Bind,
    Check,
    Empty,
    Env,
    Epsilon,
    EventAnnotation,
    Let,
    Seq,
    Shuffle,
    Term,
    Union,
    eval_guard,
    match_event,
    nullable,
)

__version__ = "0.1.0"

__all__ = [
    "Atom", "Bind", "BranchProperty", "Check", "Empty", "Env", "Epsilon",
    "EventAnnotation", "GateSpec", "Let", "Monitor", "MonitorSpec", "RunResult",
    "RvaftError", "RvaftNode", "RvaftTree", "Seq", "Shuffle", "Term",
    "TraceRunner", "Union", "Verdict", "Violation", "annotate", "compile_tree",
    "decompose", "emit_spec", "eval_guard", "init", "language", "match_event",
    "merge", "nullable", "oracle_verdict", "parse_guard", "parse_tree",
    "print_guard", "prune", "read_trace", "run_trace", "serialize_tree", "step",
    "translate_and", "translate_or", "translate_sand", "translate_vot",
    "validate",
]
