from __future__ import annotations

from fractions import Fraction

import pytest

from guiprop.explorer import (
    COMPLETE,
    EXPLORED,
    FAIL,
    FAILED,
    SUCCESS,
    ExecutionHistory,
    ExplorationBudget,
    HistoryEntry,
    HypothesisPool,
    SummarizedTrace,
    execute_hypothesis,
    infer_hypotheses,
    jaccard,
    mechanical_summary,
    novelty,
    run_exploration,
    select_hypothesis,
    state_diff,
    summarize_step,
)
from guiprop.gui import Event, Transition, UiContext, WidgetSignature, signature, ui_context
from guiprop.oracle import ScriptedOracle
from guiprop.replay import open_anchor
from helpers import tap


def sig(rid):
    return WidgetSignature("button", rid, "", "")


CTX = UiContext("s", frozenset({sig("a"), sig("b")}))


def scripted(**rules) -> ScriptedOracle:
    return ScriptedOracle({"rules": rules})


# -- pool and selection ------------------------------------------------------------


def test_pool_dedupes_and_numbers():
    pool = HypothesisPool()
    h1 = pool.add("Create a note", sig("a"), CTX, True)
    assert pool.add("create a note ", sig("a"), CTX, False) is None
    h2 = pool.add("Search", sig("b"), CTX, False)
    assert (h1.hypothesis_id, h2.hypothesis_id) == ("h001", "h002")
    assert len(pool) == 2


def test_pool_status_is_one_way():
    pool = HypothesisPool()
    h = pool.add("x", sig("a"), CTX, False)
    assert pool.mark(h.hypothesis_id, EXPLORED).status == EXPLORED
    with pytest.raises(ValueError):
        pool.mark(h.hypothesis_id, FAILED)


def test_candidates_cover_subsets_and_triggers():
    pool = HypothesisPool()
    h = pool.add("x", sig("a"), CTX, False)
    assert pool.candidates(UiContext("s", frozenset({sig("b")}))) == [h]
    assert pool.candidates(UiContext("s", frozenset({sig("a"), sig("c")}))) == [h]
    assert pool.candidates(UiContext("s", frozenset({sig("c")}))) == []
    assert pool.candidates(UiContext("t", frozenset({sig("a")}))) == []
    pool.mark(h.hypothesis_id, FAILED)
    assert pool.candidates(CTX) == []


def test_novelty_is_exact():
    assert jaccard("open a note", "open the note") == Fraction(2, 4)
    assert novelty("open a note", []) == 1
    assert novelty("open a note", ["open a note"]) == 0


def test_selection_prefers_main_then_novel_then_first():
    pool = HypothesisPool()
    a = pool.add("search notes", sig("a"), CTX, False)
    b = pool.add("create a note", sig("b"), CTX, True)
    assert select_hypothesis([a, b], pool, CTX) == b
    pool.executed.append("create a note")
    c = pool.add("create a note quickly", sig("a"), CTX, True)
    assert select_hypothesis([b, c], pool, CTX) == c
    d = pool.add("alpha", sig("a"), CTX, False)
    e = pool.add("beta", sig("b"), CTX, False)
    assert select_hypothesis([e, d], pool, CTX) == d
    with pytest.raises(ValueError):
        select_hypothesis([], pool)


# -- history ---------------------------------------------------------------------------


def test_history_complete_is_terminal():
    h = ExecutionHistory()
    h.append(HistoryEntry(Event("back"), FAIL, True))
    h.append(HistoryEntry(Event("back"), FAIL, True))
    assert h.consecutive_fails() == 2
    h.append(HistoryEntry(Event("back"), COMPLETE, True))
    assert h.completed
    with pytest.raises(ValueError):
        h.append(HistoryEntry(Event("back"), SUCCESS, True))
    with pytest.raises(ValueError):
        ExecutionHistory().append(HistoryEntry(None, "maybe", False))


# -- single-step oracle calls ------------------------------------------------------------


def test_infer_drops_ungrounded_labels(decoy):
    s = decoy.launch(0)
    oracle = scripted(infer_hypotheses=[{"match": {}, "response": {"hypotheses": [
        {"description": "open the counter", "label": 1, "main": True},
        {"description": "phantom", "label": 42},
    ]}}])
    pool, stats = HypothesisPool(), {}
    added = infer_hypotheses(s.state, {"name": "Decoy", "screens": []}, pool, oracle, decoy.static_text_whitelist(), stats)
    assert [h.description for h in added] == ["open the counter"]
    assert stats == {"infer_calls": 1, "inferred": 2, "valid": 1}


def test_summary_falls_back_to_mechanical(decoy):
    s = decoy.launch(0)
    pre = s.state
    post = tap(s, "open_counter")
    pool = HypothesisPool()
    h = pool.add("open", signature(pre.widgets[0], ()), ui_context(pre, ()), False)
    ev = summarize_step(Transition(pre, Event("click", 1), post), h, SUCCESS, scripted())
    mech = mechanical_summary(pre, Event("click", 1), post, state_diff(pre, post))
    assert ev.to_dict() == mech | {"outcome": SUCCESS}
    assert "home -> counter" in ev.state_diff_summary or "counter" in ev.state_diff_summary


def test_state_diff_reports_changes(decoy):
    s = decoy.launch(0)
    tap(s, "open_counter")
    pre = s.state
    post = tap(s, "increment")
    d = state_diff(pre, post)
    assert not d["screen_changed"]
    assert d["content_changed"] == {"count": [0, 1]}
    assert mechanical_summary(pre, Event("back"), pre, state_diff(pre, pre))["state_diff_summary"] == "no visible change"


# -- hypothesis execution -------------------------------------------------------------


def _hyp(backend):
    s = backend.launch(0)
    pool = HypothesisPool()
    return s, pool.add("increment the counter", sig("open_counter"), ui_context(s.state, ()), True)


def test_guard_rejection_is_a_fail_step_and_never_dispatched(decoy):
    s, h = _hyp(decoy)
    performed = []
    oracle = scripted(plan_event=[{"match": {}, "response": {"event_type": "click", "label": 3}}])
    trace, history, steps = execute_hypothesis(h, s, oracle, perform=lambda e: performed.append(e))
    assert performed == [] and steps == [] and trace.transitions == ()
    assert [e.outcome for e in history.entries] == [FAIL] * 3
    assert all(not e.dispatched and e.note == "rejected by guard" for e in history.entries)


def test_malformed_plans_are_fail_steps(decoy):
    s, h = _hyp(decoy)
    oracle = scripted(plan_event=[{"match": {}, "response": {"event_type": "swipe", "label": 1, "data": "sideways"}}])
    _, history, _ = execute_hypothesis(h, s, oracle)
    assert len(history.entries) == 3 and all(e.outcome == FAIL and not e.dispatched for e in history.entries)
    _, history, _ = execute_hypothesis(h, s, scripted())
    assert history.entries[0].note.startswith("planner output unusable")


def test_execution_stops_on_complete(decoy):
    s, h = _hyp(decoy)
    oracle = scripted(
        plan_event=[
            {"match": {"state.screen_id": "home"}, "response": {"event_type": "click", "label": 1}},
            {"match": {"state.screen_id": "counter"}, "response": {"event_type": "click", "label": 1}},
        ],
        judge_step=[
            {"match": {"diff.content_changed.count.1": 1}, "response": {"outcome": "complete"}},
            {"match": {}, "response": {"outcome": "success"}},
        ],
    )
    trace, history, steps = execute_hypothesis(h, s, oracle)
    assert [e.outcome for e in history.entries] == [SUCCESS, COMPLETE]
    assert len(steps) == 2 and steps[-1].outcome == COMPLETE
    assert [st.screen_id for st in trace.states] == ["home", "counter", "counter"]


def test_judge_failure_falls_back_to_fail(decoy):
    s, h = _hyp(decoy)
    oracle = scripted(plan_event=[{"match": {}, "response": {"event_type": "back"}}])
    _, history, steps = execute_hypothesis(h, s, oracle)
    assert [e.outcome for e in history.entries] == [FAIL] * 3
    assert all(e.dispatched for e in history.entries) and len(steps) == 3


# -- whole runs ---------------------------------------------------------------------------


def test_zero_budget_explores_nothing(healthy, notes_oracle):
    r = run_exploration(healthy, notes_oracle, ExplorationBudget(0), 7)
    assert r.evidence == [] and r.steps == 0 and notes_oracle.calls.total() == 0


def test_exploration_is_deterministic(healthy):
    from guiprop.oracle import make_oracle

    runs = [run_exploration(healthy, make_oracle("scripted:fixtures/notes"), 120, 3) for _ in range(2)]
    assert [t.to_dict() for t in runs[0].evidence] == [t.to_dict() for t in runs[1].evidence]


def test_exploration_finds_photo_evidence(faulty_pipeline, faulty):
    result, _ = faulty_pipeline
    photo = [t for t in result.evidence if "photo" in t.hypothesis.description]
    assert photo and photo[0].status == EXPLORED
    final = open_anchor(photo[0].anchor, faulty).state
    assert final.screen_id == "note_edit"
    assert any(w.resource_id == "attachment_thumbnail" for w in final.widgets)


def test_evidence_round_trips(faulty_pipeline):
    result, _ = faulty_pipeline
    for t in result.evidence:
        assert SummarizedTrace.from_dict(t.to_dict()) == t


def test_budget_respected(healthy, notes_oracle):
    r = run_exploration(healthy, notes_oracle, ExplorationBudget(37), 1)
    assert r.steps <= 37
