from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guiprop.backend import AppModel, SimulatedBackend
from guiprop.gui import Event
from guiprop.properties import (
    INAPPLICABLE,
    SATISFIED,
    VIOLATED,
    Property,
    PropertyFormatError,
    Selector,
    check_on_trace,
    check_property,
    holds_on_trace,
    parse_predicate,
)
from guiprop.replay import AnchorStale, ReplayAnchor
from helpers import tap
from oracles.tiny_fsm import RefApp, gen_model, gen_predicate, gen_property, ref_holds, ref_verdict


def prop(pre, steps, post, pid="t.p"):
    return Property.from_dict(
        {"property_id": pid, "precondition": pre, "interaction": steps, "postcondition": post}
    )


INCREMENT = prop(
    {"exists": {"resource_id": "value"}},
    [{"event_type": "click", "selector": {"resource_id": "increment"}}],
    {"text_of": {"resource_id": "value"}, "equals": "1"},
)


@pytest.mark.parametrize(
    "doc",
    [
        {"exists": {}},
        {"exists": {"text": "a", "text_regex": "a"}},
        {"exists": {"text_regex": "("}},
        {"exists": {"colour": "red"}},
        {"count": {"resource_id": "a"}, "op": "~", "value": 1},
        {"frob": 1},
        {"and": {"exists": {"resource_id": "a"}}},
        {"text_of": {"resource_id": "a"}, "equals": 3},
    ],
)
def test_malformed_predicates(doc):
    with pytest.raises(PropertyFormatError):
        parse_predicate(doc)


def test_malformed_properties():
    with pytest.raises(PropertyFormatError):
        prop({"on_screen": "a"}, [], {"on_screen": "a"})
    with pytest.raises(PropertyFormatError):
        prop({"on_screen": "a"}, [{"event_type": "edit", "selector": {"resource_id": "a"}}], {"on_screen": "a"})
    with pytest.raises(PropertyFormatError):
        prop({"on_screen": "a"}, [{"event_type": "back", "selector": {"resource_id": "a"}}], {"on_screen": "a"})
    with pytest.raises(PropertyFormatError):
        Property.from_dict({"property_id": "x"})


def test_property_round_trip():
    p = prop(
        {"and": [{"on_screen": "a"}, {"not": {"absent": {"widget_kind": "button", "quantifier": "all"}}}]},
        [
            {"event_type": "edit", "selector": {"resource_id": "f"}, "data": {"corpus": 3}, "guard": {"on_screen": "a"}},
            {"event_type": "swipe", "selector": {"label": 2}, "data": {"literal": "up"}},
            {"event_type": "back"},
        ],
        {"or": [{"count": {"text_regex": "x.*"}, "op": ">=", "value": 2}, {"text_of": {"resource_id": "t"}, "equals": "v"}]},
    )
    assert Property.from_dict(p.to_dict()) == p


def test_verdicts_on_decoy(decoy):
    s = decoy.launch(0)
    assert check_property(INCREMENT, s).verdict == INAPPLICABLE
    tap(s, "open_counter")
    r = check_property(INCREMENT, s.fork())
    assert r.verdict == SATISFIED and r.failed_atom is None
    tap(s, "increment")
    r = check_property(INCREMENT, s)
    assert r.verdict == VIOLATED
    assert r.failed_atom == "Q: text_of(resource_id='value') == '1'"


def test_missing_widget_is_inapplicable_not_violated(decoy):
    p = prop({"on_screen": "home"}, [{"event_type": "click", "selector": {"resource_id": "increment"}}], {"on_screen": "nowhere"})
    r = check_property(p, decoy.launch(0))
    assert r.verdict == INAPPLICABLE and "matches nothing" in r.abort


def test_failing_guard_is_inapplicable(decoy):
    p = prop(
        {"on_screen": "home"},
        [{"event_type": "click", "selector": {"resource_id": "open_counter"}, "guard": {"on_screen": "counter"}}],
        {"on_screen": "nowhere"},
    )
    assert check_property(p, decoy.launch(0)).verdict == INAPPLICABLE


def test_failed_atom_path_points_into_conjunction(decoy):
    p = prop(
        {"on_screen": "home"},
        [{"event_type": "click", "selector": {"resource_id": "open_counter"}}],
        {"and": [{"on_screen": "counter"}, {"exists": {"resource_id": "level"}}]},
    )
    assert check_property(p, decoy.launch(0)).failed_atom == "Q/and[1]: exists(resource_id='level')"


def test_selector_first_takes_lowest_label(decoy):
    s = decoy.launch(0)
    assert Selector(widget_kind="button").first(s.state).resource_id == "open_counter"


def test_check_on_trace(decoy):
    anchor = ReplayAnchor(0, (Event("click", 1), Event("click", 1)), ("counter", "counter"), "home", start=0)
    assert holds_on_trace(INCREMENT, anchor, decoy)
    never = prop({"on_screen": "volume"}, [{"event_type": "back"}], {"on_screen": "home"})
    assert check_on_trace(never, anchor, decoy) is None
    stale = ReplayAnchor(0, (Event("click", 2),), ("counter",), "home")
    with pytest.raises(AnchorStale):
        check_on_trace(never, stale, decoy)


def _agree(seed: int) -> tuple[str, str]:
    rng = random.Random(seed)
    doc = gen_model(rng)
    app = RefApp(doc)
    backend = SimulatedBackend(AppModel.from_dict(doc))
    ref = app.initial()
    session = backend.launch(0)
    for _ in range(rng.randint(0, 4)):
        et, label = rng.choice(app.events(ref))
        ref = app.step(ref, et, label)
        session.perform(Event(et, label))
    pd = gen_property(rng, list(app.screens), app.widgets(ref))
    return check_property(Property.from_dict(pd), session).verdict, ref_verdict(app, pd, ref)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_checker_agrees_with_reference(seed):
    got, want = _agree(seed)
    assert got == want


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_predicates_agree_with_reference(seed):
    rng = random.Random(seed)
    doc = gen_model(rng)
    app = RefApp(doc)
    session = SimulatedBackend(AppModel.from_dict(doc)).launch(0)
    pd = gen_predicate(rng, list(app.screens))
    assert parse_predicate(pd).holds(session.state) == ref_holds(pd, "s0", app.widgets(app.initial()))
