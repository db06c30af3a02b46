"""Branch decomposition and gate-to-term translation.

Disjunction gates fork branches; every other gate composes in place. Each
branch compiles to a sequence spine in which guard-only leaves immediately
following an atom fold into that atom's guard. Merging factors the common
head and tail of several branch spines and introduces a union exactly where
they diverge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import InvalidKError, UnclassifiedBranchError
from .model import ATTACK, FAULT, NEUTRAL, validate
from .terms import (
    Atom,
    Check,
    EPSILON,
    Let,
    Seq,
    Shuffle,
    Term,
    Union,
    seq,
    seq_all,
    term_bind_vars,
    term_topics,
    union,
)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Gate translations
# ---------------------------------------------------------------------------

def translate_or(children):
    """Disjunction: the union of the children, in order (right fold)."""
    children = list(children)
    if not children:
        raise ValueError("translate_or needs at least one child")
    out = children[-1]
    for t in reversed(children[:-1]):
        out = Union(t, out)
    return out


def translate_and(children):
    """Unordered conjunction: any interleaving of the children (right fold)."""
    children = list(children)
    if not children:
        raise ValueError("translate_and needs at least one child")
    out = children[-1]
    for t in reversed(children[:-1]):
        out = Shuffle(t, out)
    return out


def translate_sand(children, direction="LR"):
    """Ordered conjunction: plain concatenation, reversed for right-to-left."""
    children = list(children)
    if not children:
        raise ValueError("translate_sand needs at least one child")
    if direction == "RL":
        children = children[::-1]
    elif direction != "LR":
        raise ValueError(f"bad SAND direction: {direction!r}")
    out = children[-1]
    for t in reversed(children[:-1]):
        out = Seq(t, out)
    return out


def translate_vot(k, children):
    """At-least-k-of-n: unrolled so each already-seen child drops out.

    vot(0, S) accepts immediately; vot(k, S) is the union over each child e
    of e followed by vot(k-1, S minus e).
    """
    children = list(children)
    n = len(children)
    if not 1 <= k <= n:
        raise InvalidKError(k, n)

    def unroll(k, pool):
        if k == 0:
            return EPSILON
        arms = []
        for i, t in enumerate(pool):
            rest = pool[:i] + pool[i + 1 :]
            arms.append(seq(t, unroll(k - 1, rest)))
        return translate_or(arms)

    return unroll(k, children)


# ---------------------------------------------------------------------------
# Branch spines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AtomSeg:
    ann: object


@dataclass(frozen=True)
class CheckSeg:
    guard: object
    on_guard_fail: str | None = None


@dataclass(frozen=True)
class TermSeg:
    term: Term


@dataclass(frozen=True)
class UnionSeg:
    arms: tuple  # tuple of spines (each a tuple of segments)


def fold_spine(spine):
    """Fold a spine into a term, conjoining checks into the preceding atom."""
    parts = []
    for seg in spine:
        if isinstance(seg, CheckSeg):
            if parts and isinstance(parts[-1], Atom):
                parts[-1] = Atom(
                    parts[-1].ann.with_extra_guard(seg.guard, seg.on_guard_fail)
                )
            else:
                parts.append(Check(seg.guard))
        elif isinstance(seg, AtomSeg):
            parts.append(Atom(seg.ann))
        elif isinstance(seg, TermSeg):
            parts.append(seg.term)
        elif isinstance(seg, UnionSeg):
            arms = [fold_spine(arm) for arm in seg.arms]
            folded = arms[-1]
            for t in reversed(arms[:-1]):
                folded = union(t, folded)
            parts.append(folded)
        else:
            raise TypeError(f"not a spine segment: {seg!r}")
    return seq_all(parts)


@dataclass(frozen=True)
class BranchProperty:
    """One root-to-cause branch of the tree, compiled to a monitor term."""

    id: str
    path: tuple  # chosen child ids at each disjunction, tree order
    node_class: str  # fault or attack
    term: Term
    let_vars: tuple
    segments: tuple = ()  # unfolded spine, consumed by merge
    notes: tuple = ()


@dataclass(frozen=True)
class MonitorSpec:
    name: str
    properties: tuple
    merged: Term | None
    topics: frozenset
    verdict_polarity: str = "satisfaction-is-detection"

    def property_ids(self):
        return tuple(p.id for p in self.properties)


def _collect_or_nodes(tree):
    """Disjunction nodes in document preorder from the root."""
    out = []
    for nid in tree.reachable():
        gate = tree.nodes[nid].gate
        if gate is not None and gate.kind == "OR":
            out.append(nid)
    return out


def _enumerate_choices(tree):
    """All disjunction resolutions, ordered so deeper choices vary slowest.

    That ordering groups the branches of the outermost disjunction together
    last, which numbers the case-study branches fault, fault, attack, attack.
    """
    or_nodes = _collect_or_nodes(tree)

    def expand(nid, choice_map):
        node = tree.nodes[nid]
        gate = node.gate
        if gate is None:
            return [choice_map]
        if gate.kind == "OR":
            if nid in choice_map:  # shared disjunction already resolved
                return expand(choice_map[nid], choice_map)
            maps = []
            for child in gate.children:
                maps.extend(expand(child, {**choice_map, nid: child}))
            return maps
        maps = [choice_map]
        for child in gate.children:
            maps = [m2 for m in maps for m2 in expand(child, m)]
        return maps

    choice_maps = expand(tree.root, {})

    def sort_key(cm):
        key = []
        for nid in reversed(or_nodes):
            if nid in cm:
                key.append(tree.nodes[nid].gate.children.index(cm[nid]))
            else:
                key.append(-1)
        return tuple(key)

    return or_nodes, sorted(choice_maps, key=sort_key)


def _build_spine(tree, nid, choices, visited, notes):
    """Spine of one branch under the given disjunction choices."""
    node = tree.nodes[nid]
    visited.append(nid)
    ann = node.annotation
    prefix = []
    if ann is not None:
        prefix = [AtomSeg(ann) if ann.pattern else CheckSeg(ann.guard, ann.on_guard_fail)]
    gate = node.gate
    if gate is None:
        return tuple(prefix)
    if ann is None and nid != tree.root:
        notes.append(f"intermediate node {nid} has no annotation and adds no atom")
    if gate.kind == "OR":
        chosen = choices[nid]
        return tuple(prefix) + _build_spine(tree, chosen, choices, visited, notes)
    if gate.kind in ("SAND_LR", "SAND_RL"):
        kids = gate.children if gate.kind == "SAND_LR" else gate.children[::-1]
        spine = []
        for child in kids:
            spine.extend(_build_spine(tree, child, choices, visited, notes))
        return tuple(prefix) + tuple(spine)
    child_terms = [
        fold_spine(_build_spine(tree, child, choices, visited, notes))
        for child in gate.children
    ]
    if gate.kind == "AND":
        return tuple(prefix) + (TermSeg(translate_and(child_terms)),)
    if gate.kind == "VOT":
        return tuple(prefix) + (TermSeg(translate_vot(gate.k, child_terms)),)
    raise ValueError(f"unknown gate kind: {gate.kind!r}")


def decompose(tree):
    """Split the tree into branch properties, one per disjunction resolution."""
    problems = validate(tree, runtime_ready=True)
    if problems:
        raise ValueError(
            "tree is not runtime-ready: " + "; ".join(str(v) for v in problems)
        )
    or_nodes, choice_maps = _enumerate_choices(tree)
    props = []
    for i, choices in enumerate(choice_maps, start=1):
        visited = []
        notes = []
        spine = _build_spine(tree, tree.root, choices, visited, notes)
        body = fold_spine(spine)
        let_vars = term_bind_vars(body)
        term = Let(let_vars, body) if let_vars else body
        classes = {tree.nodes[n].node_class for n in visited} - {NEUTRAL}
        path = tuple(choices[nid] for nid in or_nodes if nid in choices)
        if not classes:
            raise UnclassifiedBranchError(path)
        node_class = ATTACK if ATTACK in classes else FAULT
        if classes == {ATTACK, FAULT}:
            notes.append("branch mixes fault and attack leaves; classed as attack")
        for n in notes:
            log.info("phi%d: %s", i, n)
        props.append(
            BranchProperty(
                id=f"phi{i}",
                path=path,
                node_class=node_class,
                term=term,
                let_vars=let_vars,
                segments=spine,
                notes=tuple(notes),
            )
        )
    return props


# ---------------------------------------------------------------------------
# Merging
# ---------------------------------------------------------------------------

def _common_prefix(a, b):
    n = 0
    while n < len(a) and n < len(b) and a[n] == b[n]:
        n += 1
    return n


def _merge_two(a, b):
    """Factor two spines: shared head + shared tail around one union."""
    p = _common_prefix(a, b)
    ra, rb = a[p:], b[p:]
    s = _common_prefix(ra[::-1], rb[::-1])
    ma, mb = (ra[: len(ra) - s], rb[: len(rb) - s])
    mid = () if ma == mb else (UnionSeg((ma, mb)),)
    suffix = ra[len(ra) - s :] if s else ()
    return a[:p] + mid + suffix


def _sharing_score(a, b):
    p = _common_prefix(a, b)
    return p + _common_prefix(a[p:][::-1], b[p:][::-1])


def merge(props):
    """One term whose language is the union of the given branch languages.

    Repeatedly merges the pair of spines with the most shared structure; when
    nothing is shared this degrades to a plain union of the branch terms.
    """
    if len(props) == 1:
        return props[0].term
    spines = [p.segments for p in props]
    while len(spines) > 1:
        best = (0, 1)
        best_score = -1
        for i in range(len(spines)):
            for j in range(i + 1, len(spines)):
                score = _sharing_score(spines[i], spines[j])
                if score > best_score:
                    best, best_score = (i, j), score
        i, j = best
        merged = (
            _merge_two(spines[i], spines[j])
            if best_score > 0
            else (UnionSeg((spines[i], spines[j])),)
        )
        spines = [s for k, s in enumerate(spines) if k not in (i, j)]
        spines.insert(i, merged)  # keep document order of the surviving arms
    body = fold_spine(spines[0])
    let_vars = term_bind_vars(body)
    return Let(let_vars, body) if let_vars else body


def compile_tree(tree, do_merge=True):
    """Full compilation: branch properties, optional merged term, topic set."""
    props = decompose(tree)
    merged = merge(props) if do_merge else None
    topics = set()
    for p in props:
        topics |= term_topics(p.term)
    return MonitorSpec(
        name=tree.name,
        properties=tuple(props),
        merged=merged,
        topics=frozenset(topics),
    )
