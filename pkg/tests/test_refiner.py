from __future__ import annotations

import copy
import json

import pytest

from conftest import FIXTURES, SEED
from guiprop.explorer import FunctionalityHypothesis, StepEvidence, SummarizedTrace
from guiprop.gui import Event, signature, ui_context
from guiprop.oracle import ScriptedOracle
from guiprop.properties import SATISFIED, VIOLATED, Property, check_on_trace
from guiprop.refiner import (
    AUTOMATION_FAILURE,
    LIKELY_BUG,
    NON_MINIMAL,
    SOURCE_TRACE_BROKEN,
    STILL_VIOLATED,
    Diagnosis,
    RefinementFailure,
    diagnose,
    evidence_payload,
    refine,
    refinement_loop,
    refinement_vocab,
    summary_table,
    verify_refinement,
)
from guiprop.replay import ReplayAnchor
from guiprop.runner import RunConfig, replay, run

INCREMENT = {
    "property_id": "decoy.increment",
    "version": 1,
    "description": "increment the counter",
    "precondition": {"exists": {"resource_id": "increment"}},
    "interaction": [{"event_type": "click", "selector": {"resource_id": "increment"}}],
    "postcondition": {"text_of": {"resource_id": "value"}, "equals": "1"},
    "provenance": {},
}


def decoy_prop(**changes) -> Property:
    return Property.from_dict(INCREMENT | changes)


def decoy_oracle_doc() -> dict:
    return json.loads((FIXTURES / "decoy" / "oracle.json").read_text(encoding="utf-8"))


@pytest.fixture
def evidence(decoy) -> SummarizedTrace:
    """Counter opened from home, then one increment from zero."""
    wl = decoy.static_text_whitelist()
    s = decoy.launch(0)
    states = [s.state]
    states.append(s.perform(Event("click", 1)))
    states.append(s.perform(Event("click", 1)))
    counter = states[1]
    vocab = tuple(sorted({signature(w, wl) for st in states for w in st.widgets}))
    anchor = ReplayAnchor(0, (Event("click", 1), Event("click", 1)), ("counter", "counter"), "home", start=1)
    h = FunctionalityHypothesis("h001", "increment the counter", signature(counter.widgets[0], wl), ui_context(counter, wl), True, "explored")
    step = StepEvidence("counter shows 0", "click '+1'", "counter shows 1", "value 0 -> 1", "complete")
    return SummarizedTrace(h, (step,), "explored", anchor, vocab)


@pytest.fixture
def decoy_reports(decoy):
    r = run(RunConfig(seed=3, max_events=300), decoy, [decoy_prop()])
    volume = next(x for x in r.reports if x.pre.screen_id == "volume")
    counter = next(x for x in r.reports if x.pre.screen_id == "counter")
    return volume, counter


def test_diagnosis_rejects_unknown_verdict():
    with pytest.raises(ValueError):
        Diagnosis("flaky", "no idea")
    assert Diagnosis("imprecise_interaction", "x").component == "I"
    assert Diagnosis(LIKELY_BUG, "x").component is None


def test_source_trace_holds_for_original(decoy, evidence):
    assert check_on_trace(decoy_prop(), evidence.anchor, decoy).verdict == SATISFIED


def test_evidence_payload_highlights_steps_naming_property_widgets(evidence):
    assert evidence_payload(decoy_prop(), evidence)["highlighted_steps"] == [0]
    unrelated = {"exists": {"resource_id": "level"}}
    click = [{"event_type": "click", "selector": {"resource_id": "level"}}]
    p = evidence_payload(decoy_prop(precondition=unrelated, interaction=click, postcondition=unrelated), evidence)
    assert p["highlighted_steps"] == []
    assert len(p["steps"]) == len(evidence.steps)


def test_two_round_refinement_touches_p_then_q(decoy, decoy_oracle, evidence, decoy_reports):
    out = refinement_loop(decoy_prop(), evidence, list(decoy_reports), decoy, decoy_oracle)
    assert out.status == "refined"
    assert [v.version for v in out.versions] == [1, 2, 3]
    assert [a["verdict"] for a in out.audit] == ["imprecise_precondition", "imprecise_postcondition"]
    assert [list(a["diff"]) for a in out.audit] == [["P"], ["Q"]]
    assert sorted(out.resolved) == sorted(r.report_id for r in decoy_reports)
    assert out.unresolved == []
    assert out.final.provenance["refined_from"] == 2
    for r in decoy_reports:
        assert replay(r, decoy, prop=out.final).verdict != VIOLATED
    assert check_on_trace(out.final, evidence.anchor, decoy).verdict == SATISFIED


def test_single_round_budget_leaves_second_report_pending(decoy, decoy_oracle, evidence, decoy_reports):
    volume, counter = decoy_reports
    out = refinement_loop(decoy_prop(), evidence, [volume, counter], decoy, decoy_oracle, max_rounds=1)
    assert out.final.version == 2
    assert changed_only(out.versions[0], out.final) == {"P"}
    assert out.status == "unrefined"
    assert out.resolved == [volume.report_id]
    assert out.unresolved == [counter.report_id]


def changed_only(a: Property, b: Property) -> set[str]:
    ca, cb = a.components(), b.components()
    return {k for k in ca if ca[k] != cb[k]}


def test_zero_rounds_is_a_no_op(decoy, decoy_oracle, evidence, decoy_reports):
    out = refinement_loop(decoy_prop(), evidence, list(decoy_reports), decoy, decoy_oracle, max_rounds=0)
    assert out.final.version == 1 and out.audit == [] and decoy_oracle.calls == {}
    assert len(out.unresolved) == 2


def test_likely_bug_is_set_aside_without_refining(decoy, evidence):
    # a report on the counter screen whose failure is not a text_of atom
    prop = decoy_prop(postcondition={"not": {"on_screen": "counter"}})
    r = run(RunConfig(seed=3, max_events=200), decoy, [prop])
    report = next(x for x in r.reports if x.pre.screen_id == "counter")
    oracle = ScriptedOracle(decoy_oracle_doc())
    out = refinement_loop(prop, evidence, [report], decoy, oracle)
    assert out.bugs == [report.report_id]
    assert out.status == LIKELY_BUG
    assert out.final is prop
    assert oracle.calls["refine_property"] == 0
    assert "round" not in out.audit[0]


def test_malformed_diagnosis_is_an_automation_failure(decoy, evidence, decoy_reports):
    doc = decoy_oracle_doc()
    doc["rules"]["diagnose_violation"] = [{"match": {}, "response": {"verdict": "imprecise_precondition"}}]
    oracle = ScriptedOracle(doc)
    d = diagnose(decoy_prop(), evidence, decoy_reports[0], oracle)
    assert d.verdict == AUTOMATION_FAILURE
    out = refinement_loop(decoy_prop(), evidence, [decoy_reports[0]], decoy, oracle)
    assert out.status == AUTOMATION_FAILURE
    assert out.automation_failures == [decoy_reports[0].report_id]
    assert out.bugs == []


def test_revision_touching_wrong_component_is_refused(decoy, evidence, decoy_reports):
    doc = decoy_oracle_doc()
    rule = doc["rules"]["refine_property"][0]
    rule["response"]["postcondition"] = {"exists": {"resource_id": "value"}}
    oracle = ScriptedOracle(doc)
    d = Diagnosis("imprecise_precondition", "fires on volume")
    vocab = refinement_vocab(evidence, decoy_reports[0])
    with pytest.raises(RefinementFailure, match="must change only P"):
        refine(decoy_prop(), d, evidence, decoy_reports[0], oracle, vocab)
    assert oracle.calls["refine_property"] == 2


def test_retry_carries_feedback(decoy, evidence, decoy_reports):
    doc = decoy_oracle_doc()
    good = copy.deepcopy(doc["rules"]["refine_property"][0])
    bad = copy.deepcopy(good)
    bad["response"]["precondition"] = {"exists": {"resource_id": "no_such_widget"}}
    good["match"] = good["match"] | {"feedback": {"$regex": "vocabulary"}}
    doc["rules"]["refine_property"] = [good, bad]
    oracle = ScriptedOracle(doc)
    d = Diagnosis("imprecise_precondition", "fires on volume")
    new = refine(decoy_prop(), d, evidence, decoy_reports[0], oracle, refinement_vocab(evidence, decoy_reports[0]))
    assert new.version == 2 and oracle.calls["refine_property"] == 2


def test_ungrounded_revision_is_refused(decoy, evidence, decoy_reports):
    doc = decoy_oracle_doc()
    doc["rules"]["refine_property"][0]["response"]["precondition"] = {"exists": {"resource_id": "no_such_widget"}}
    d = Diagnosis("imprecise_precondition", "fires on volume")
    with pytest.raises(RefinementFailure, match="vocabulary"):
        refine(decoy_prop(), d, evidence, decoy_reports[0], ScriptedOracle(doc), refinement_vocab(evidence, decoy_reports[0]))


def test_refine_refuses_non_imprecise_verdict(decoy, decoy_oracle, evidence, decoy_reports):
    with pytest.raises(ValueError):
        refine(decoy_prop(), Diagnosis(LIKELY_BUG, "x"), evidence, decoy_reports[0], decoy_oracle, evidence.vocab)


def test_verify_rejects_non_minimal(decoy, evidence, decoy_reports):
    old = decoy_prop()
    new = decoy_prop(
        version=2,
        precondition={"and": [{"exists": {"resource_id": "increment"}}, {"exists": {"resource_id": "value"}}]},
        postcondition={"exists": {"resource_id": "value"}},
    )
    assert verify_refinement(old, new, evidence, decoy_reports[0], decoy).reason == NON_MINIMAL


def test_verify_rejects_revision_that_breaks_source_trace(decoy, evidence, decoy_reports):
    new = decoy_prop(version=2, postcondition={"text_of": {"resource_id": "value"}, "equals": "5"})
    assert verify_refinement(decoy_prop(), new, evidence, decoy_reports[1], decoy).reason == SOURCE_TRACE_BROKEN


def test_verify_rejects_revision_that_still_fails_the_report(decoy, evidence, decoy_reports):
    volume, _ = decoy_reports
    # still fires on the volume screen and still expects a counter value there
    new = decoy_prop(version=2, precondition={"exists": {"widget_kind": "button", "resource_id": "increment"}})
    v = verify_refinement(decoy_prop(), new, evidence, volume, decoy)
    assert not v.accepted and v.reason == STILL_VIOLATED


def test_verify_accepts_p_repair(decoy, evidence, decoy_reports):
    new = decoy_prop(version=2, precondition={"and": [{"exists": {"resource_id": "increment"}}, {"exists": {"resource_id": "value"}}]})
    assert verify_refinement(decoy_prop(), new, evidence, decoy_reports[0], decoy).accepted


def test_summary_table_counts(decoy, decoy_oracle, evidence, decoy_reports):
    out = refinement_loop(decoy_prop(), evidence, list(decoy_reports), decoy, decoy_oracle)
    t = summary_table([out])
    assert t["total"] == {"imprecise": 2, "successes": 2, "P": 1, "I": 0, "Q": 1}
    assert t["rows"][0]["property_id"] == "decoy.increment"
    json.dumps(out.to_dict())


def test_notes_refinement_keeps_genuine_bug_visible(healthy, faulty, notes_oracle, faulty_pipeline):
    ex, syn = faulty_pipeline
    photo = next(p for p in syn.accepted if "photo" in p.property_id)
    ev = next(e for e in ex.evidence if e.trace_id == photo.provenance["evidence"])
    rh = run(RunConfig(seed=SEED), healthy, syn.accepted)
    spurious = [r for r in rh.reports if r.prop is photo]
    assert spurious, "the healthy build should expose the over-specific photo property"
    out = refinement_loop(photo, ev, spurious[:1], healthy, notes_oracle, extra_vocab=rh.stats.vocab)
    assert out.status == "refined" and out.final.version == 2
    for r in spurious:
        assert replay(r, healthy, prop=out.final).verdict != VIOLATED
    rf = run(RunConfig(seed=SEED), faulty, syn.accepted)
    genuine = [
        r for r in rf.reports
        if r.prop is photo and replay(r, faulty).verdict == VIOLATED and _healthy_verdict(r, healthy) == SATISFIED
    ]
    assert genuine
    assert all(replay(r, faulty, prop=out.final).verdict == VIOLATED for r in genuine)


def _healthy_verdict(report, healthy):
    from guiprop.runner import ReplayDivergence

    try:
        return replay(report, healthy).verdict
    except ReplayDivergence:
        return None
