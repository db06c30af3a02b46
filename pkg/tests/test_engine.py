import itertools
import random

import pytest

from conftest import SCENARIO_PROPERTY, gen_term, gen_trace, plain_atom, plain_event

from rvaft.casestudy import interleave, noise_events, scenario_events
from rvaft.engine import Monitor, TraceRunner, Verdict, init, run_trace, step
from rvaft.errors import UnknownPropertyError
from rvaft.fileformat import parse_guard
from rvaft.oracle import oracle_verdict
from rvaft.terms import (
    Atom,
    Bind,
    Empty,
    Epsilon,
    EventAnnotation,
    Seq,
    Shuffle,
    Union,
    normalize_event,
)

A, B, C = (plain_atom(x) for x in "abc")
EA, EB, EC = (plain_event(x) for x in "abc")


def test_init_verdicts():
    assert init(A).verdict is Verdict.UNKNOWN
    assert init(Epsilon()).verdict is Verdict.SATISFIED
    assert init(Empty()).verdict is Verdict.VIOLATED


def test_step_is_noop_once_decided():
    m = init(Epsilon())
    state, diag = step(m, EA)
    assert diag.outcome == "decided"
    assert state.verdict is Verdict.SATISFIED


def test_verdict_is_sticky():
    m = init(Union(A, B))
    m.step(EA)
    assert m.verdict is Verdict.SATISFIED
    for ev in (EB, EC, EA):
        m.step(ev)
        assert m.verdict is Verdict.SATISFIED


def test_union_resolves_on_consumption():
    """Consuming an event through one union arm drops the other arms."""
    m = init(Union(Seq(A, B), Seq(C, B)))
    m.step(EA)
    assert len(m.alternatives) == 1
    m.step(EB)
    assert m.verdict is Verdict.SATISFIED


def test_shuffle_accepts_all_six_orderings():
    term = Shuffle(A, Shuffle(B, C))
    events = {0: EA, 1: EB, 2: EC}
    for order in itertools.permutations(range(3)):
        m = init(term)
        for i in order:
            m.step(events[i])
        assert m.verdict is Verdict.SATISFIED, order


def test_shuffle_partial_stays_unknown():
    m = init(Shuffle(A, Shuffle(B, C)))
    m.step(EA)
    m.step(EC)
    assert m.verdict is Verdict.UNKNOWN


def test_elimination_only_events_never_grow_alternatives():
    rng = random.Random(7)
    for _ in range(50):
        term, _ = gen_term(rng)
        m = init(term)
        if m.verdict is not Verdict.UNKNOWN:
            continue
        for ev in gen_trace(rng):
            before = len(m.alternatives)
            diag = m.step(ev)
            if diag.outcome in ("neutral", "eliminated", "dropped"):
                assert len(m.alternatives) <= before


def test_skip_policy_guard_failure_is_neutral():
    rad = Atom(
        EventAnnotation(
            "rad", (("topic", "t_r"), ("v", Bind("Value"))), parse_guard("Value >= 250")
        )
    )
    m = init(rad)
    diag = m.step(normalize_event({"topic": "t_r", "v": 100}))
    assert diag.outcome == "neutral"
    assert m.skipped == 1
    assert m.verdict is Verdict.UNKNOWN
    m.step(normalize_event({"topic": "t_r", "v": 257}))
    assert m.verdict is Verdict.SATISFIED


def test_violate_policy_guard_failure_eliminates():
    move = Atom(
        EventAnnotation(
            "move", (("topic", "t_m"), ("t", Bind("T2"))),
            parse_guard("T2 >= T1 + 10"), on_guard_fail="violate",
        )
    )
    m = init(move)
    # T1 unbound: the guard cannot discriminate yet -> neutral, not a crash.
    diag = m.step(normalize_event({"topic": "t_m", "t": 3}))
    assert diag.outcome == "neutral"
    assert m.verdict is Verdict.UNKNOWN


def test_type_mismatch_is_diagnosed_not_fatal():
    guarded = Atom(
        EventAnnotation(
            "g", (("topic", "t_g"), ("v", Bind("X"))), parse_guard("X >= 10")
        )
    )
    m = init(guarded)
    diag = m.step(normalize_event({"topic": "t_g", "v": "a-string"}))
    assert m.verdict is Verdict.UNKNOWN
    assert any("treated as no match" in note for note in diag.notes)


def test_topic_filter_drops_unsubscribed_events():
    m = init(A, topics={"t_a"})
    diag = m.step({"topic": "odom", "x": 1.0})
    assert diag.outcome == "dropped"
    assert m.skipped == 1
    m.step(EA)
    assert m.verdict is Verdict.SATISFIED


def test_strict_mode_eliminates_on_nonprogress():
    m = init(Seq(A, B), strict=True)
    m.step(EB)  # cannot progress the first atom
    assert m.verdict is Verdict.VIOLATED


# ---------------------------------------------------------------------------
# Table replays (engine-level; the acceptance suite re-runs these end to end)
# ---------------------------------------------------------------------------

def _verdicts(spec, which, trace, close=True):
    result = run_trace(spec, which, trace, close_at_end=close)
    return [v.value for _, v in result.verdicts]


def test_fault_moving_bad_replay(spec, traces):
    assert _verdicts(spec, "phi1", traces["fault-moving"]["bad"]) == ["?", "?", "?", "top"]


def test_fault_moving_good_replay(spec, traces):
    # The final move comes 1.393s after the reading: the cross-event timeout
    # guard fails under its violate policy.
    assert _verdicts(spec, "phi1", traces["fault-moving"]["good"]) == [
        "?", "?", "?", "bottom",
    ]


def test_attack_moving_replays(spec, traces):
    assert _verdicts(spec, "phi3", traces["attack-moving"]["bad"]) == [
        "?", "?", "?", "?", "top",
    ]
    assert _verdicts(spec, "phi3", traces["attack-moving"]["good"]) == [
        "?", "?", "?", "?", "bottom",
    ]


def test_merged_closes_to_violated_at_end_of_trace(spec, traces):
    trace = traces["fault-moving"]["good"]
    open_run = run_trace(spec, "merged", trace, close_at_end=False)
    # Mid-stream the goal-alteration continuation is still live...
    assert open_run.state.verdict is Verdict.UNKNOWN
    # ...but the completed trace never satisfied the property.
    closed = run_trace(spec, "merged", trace)
    assert closed.final_verdict is Verdict.VIOLATED
    assert [v.value for _, v in closed.verdicts] == ["?", "?", "?", "bottom"]


def test_merged_attribution(spec, traces):
    result = run_trace(spec, "merged", traces["fault-at-waypoint"]["bad"])
    assert result.final_verdict is Verdict.SATISFIED
    assert result.records[-1].live_branches == ("phi2",)


def test_run_trace_empty_is_unknown(spec):
    result = run_trace(spec, "merged", [])
    assert result.verdicts == []
    assert result.final_verdict is Verdict.UNKNOWN


def test_run_trace_unknown_property(spec):
    with pytest.raises(UnknownPropertyError):
        run_trace(spec, "phi9", [])


def test_noise_does_not_change_verdicts(spec, traces):
    rng = random.Random(11)
    for sc, pid in SCENARIO_PROPERTY.items():
        base = traces[sc]["bad"]
        noisy = interleave(base, noise_events(6, rng), rng)
        noisy = [
            dict(normalize_event(e), topic=normalize_event(e)["topic"].lstrip("/"))
            for e in noisy
        ]
        for which in (pid, "merged"):
            assert run_trace(spec, which, noisy).final_verdict is Verdict.SATISFIED


def test_per_event_cost_does_not_grow_with_stream_length(spec):
    """Bounded alternatives: the work per event depends on the term, not on
    how many events came before."""
    rng = random.Random(3)
    m = Monitor(spec.merged, topics=spec.topics)
    for raw in noise_events(2000, rng):
        ev = normalize_event(raw)
        ev["topic"] = ev["topic"].lstrip("/")
        m.step(ev)
    assert m.peak_alternatives <= 8
    assert m.verdict is Verdict.UNKNOWN


# ---------------------------------------------------------------------------
# Engine/oracle equivalence on randomized instances
# ---------------------------------------------------------------------------

def test_engine_agrees_with_oracle_randomized():
    rng = random.Random(20240817)
    checked = 0
    for _ in range(300):
        term, _ = gen_term(rng)
        trace = gen_trace(rng)
        m = Monitor(term)
        for ev in trace:
            m.step(ev)
        assert m.verdict == oracle_verdict(term, trace), (term, trace)
        checked += 1
    assert checked == 300
