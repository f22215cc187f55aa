"""Request and response schemas for every oracle task."""

from __future__ import annotations

from typing import Any

from ..gui import EVENT_TYPES

TASK_KINDS = (
    "infer_hypotheses",
    "plan_event",
    "judge_step",
    "summarize_step",
    "draft_property",
    "translate_property",
    "diagnose_violation",
    "refine_property",
)

OUTCOMES = ("success", "fail", "complete")
VERDICTS = (
    "imprecise_precondition",
    "imprecise_interaction",
    "imprecise_postcondition",
    "likely_bug",
    "automation_failure",
)

_STR = {"type": "string"}
_NESTR = {"type": "string", "minLength": 1}
_OBJ = {"type": "object"}

STATE_LISTING = {
    "type": "object",
    "required": ["screen_id", "widgets"],
    "properties": {
        "screen_id": _NESTR,
        "widgets": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "widget_kind"],
                "properties": {"label": {"type": "integer"}, "widget_kind": _STR},
            },
        },
        "content": _OBJ,
    },
}
EVENT = {
    "type": "object",
    "required": ["event_type"],
    "properties": {"event_type": {"enum": list(EVENT_TYPES)}},
}


def _req(required: list[str], **props: Any) -> dict[str, Any]:
    return {"type": "object", "required": required, "properties": props}


REQUEST_SCHEMAS: dict[str, dict[str, Any]] = {
    "infer_hypotheses": _req(
        ["app", "state", "memory"],
        app=_req(["name", "screens"], name=_NESTR, screens={"type": "array", "items": _STR}),
        state=STATE_LISTING,
        memory={"type": "array", "items": _STR},
    ),
    "plan_event": _req(
        ["goal", "state", "history"], goal=_NESTR, state=STATE_LISTING, history={"type": "array"}
    ),
    "judge_step": _req(
        ["goal", "pre", "event", "post", "diff", "history"],
        goal=_NESTR,
        pre=STATE_LISTING,
        event=EVENT,
        post=STATE_LISTING,
        diff=_OBJ,
        history={"type": "array"},
    ),
    "summarize_step": _req(
        ["goal", "pre", "event", "post", "diff", "outcome", "mechanical"],
        goal=_NESTR,
        pre=STATE_LISTING,
        event=EVENT,
        post=STATE_LISTING,
        diff=_OBJ,
        outcome={"enum": list(OUTCOMES)},
        mechanical=_OBJ,
    ),
    "draft_property": _req(
        ["hypothesis", "evidence", "constraints"],
        hypothesis=_OBJ,
        evidence=_req(["steps", "status"], steps={"type": "array", "minItems": 1}, status=_STR),
        constraints={"type": "array", "minItems": 3, "items": _NESTR},
    ),
    "translate_property": _req(
        ["spec", "vocab", "screens"],
        spec=_req(["precondition", "interaction", "postcondition"]),
        vocab={"type": "array"},
        screens={"type": "array", "items": _STR},
    ),
    "diagnose_violation": _req(
        ["property", "evidence", "report"], property=_OBJ, evidence=_OBJ, report=_OBJ
    ),
    "refine_property": _req(
        ["property", "diagnosis", "evidence", "report", "vocab"],
        property=_OBJ,
        diagnosis=_OBJ,
        evidence=_OBJ,
        report=_OBJ,
        vocab={"type": "array"},
    ),
}


def _resp(required: list[str], **props: Any) -> dict[str, Any]:
    return {"type": "object", "required": required, "properties": props}


RESPONSE_SCHEMAS: dict[str, dict[str, Any]] = {
    "infer_hypotheses": _resp(
        ["hypotheses"],
        hypotheses={
            "type": "array",
            "items": _resp(
                ["description", "label"],
                description=_NESTR,
                label={"type": "integer"},
                main={"type": "boolean"},
            ),
        },
    ),
    "plan_event": _resp(
        ["event_type"],
        event_type={"enum": list(EVENT_TYPES)},
        label={"type": ["integer", "null"]},
        data={"type": ["string", "null"]},
    ),
    "judge_step": _resp(["outcome"], outcome={"enum": list(OUTCOMES)}, reason=_STR),
    "summarize_step": _resp(
        ["pre_summary", "event_summary", "post_summary", "state_diff_summary"],
        pre_summary=_NESTR,
        event_summary=_NESTR,
        post_summary=_NESTR,
        state_diff_summary=_NESTR,
    ),
    "draft_property": _resp(
        ["precondition", "interaction", "postcondition", "cited_steps"],
        precondition=_NESTR,
        interaction=_NESTR,
        postcondition=_NESTR,
        cited_steps={"type": "array", "items": {"type": "integer", "minimum": 0}},
    ),
    "translate_property": _resp(
        ["precondition", "interaction", "postcondition"],
        precondition=_OBJ,
        interaction={"type": "array", "minItems": 1, "items": _OBJ},
        postcondition=_OBJ,
    ),
    "diagnose_violation": _resp(
        ["verdict", "rationale"],
        verdict={"enum": list(VERDICTS)},
        rationale=_NESTR,
        cited={"type": "array", "items": _STR},
    ),
    "refine_property": _resp(
        ["component", "precondition", "interaction", "postcondition"],
        component={"enum": ["P", "I", "Q"]},
        precondition=_OBJ,
        interaction={"type": "array", "minItems": 1, "items": _OBJ},
        postcondition=_OBJ,
        rationale=_STR,
    ),
}
