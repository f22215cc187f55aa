"""Regenerate the scripted-oracle fixture for the notes reference app.

Run from the repository root:  python3 tools/build_notes_fixture.py
"""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path("src/guiprop/fixtures/notes/oracle.json")


def has(rid: str, where: str = "state") -> dict:
    return {f"{where}.widgets": {"$some": {"resource_id": rid}}}


def lacks(rid: str, where: str = "state") -> dict:
    return {f"{where}.widgets": {"$none": {"resource_id": rid}}}


def label(rid: str, **extra) -> dict:
    return {"$label": {"resource_id": rid, **extra}}


def hyp(desc: str, rid: str, main: bool = False) -> dict:
    item = {"description": desc, "label": label(rid), "main": main}
    return {"$if": has(rid), "value": item}


def plan_rule(goal: str, screen: str, event_type: str, rid: str | None, data: str | None = None, when=None, rid_extra=None):
    resp = {"event_type": event_type, "label": None if rid is None else label(rid, **(rid_extra or {})), "data": data}
    match = {"goal": goal, "state.screen_id": screen, "match_all": [when or {}]}
    if rid is not None:
        match["match_all"].append(has(rid))
    return {"id": f"plan:{goal}:{screen}:{event_type}:{rid}", "match": match, "response": resp}


def judge(goal: str, outcome: str, match: dict, rid: str) -> dict:
    return {"id": f"judge:{goal}:{rid}", "match": {"goal": goal, **match}, "response": {"outcome": outcome, "reason": rid}}


NOOP = {
    "diff.screen_changed": False,
    "diff.added": {"$len": 0},
    "diff.removed": {"$len": 0},
    "diff.content_changed": {"$len": 0},
}

PHOTO = "attach a photo to the note"
AUDIO = "record an audio note"
CREATE = "create a note"

infer = [
    {
        "id": "infer:drawer",
        "match": {"state.screen_id": {"$in": ["notes_list", "archive_list"]}, **has("drawer_archive")},
        "response": {
            "hypotheses": [
                {"description": "open archived notes", "label": label("drawer_archive"), "main": True},
                {"description": "open settings", "label": label("drawer_settings"), "main": False},
            ]
        },
    },
    {
        "id": "infer:search",
        "match": {"state.screen_id": "notes_list", **has("search_field")},
        "response": {"hypotheses": [{"description": "filter notes by a search query", "label": label("search_field"), "main": False}]},
    },
    {
        "id": "infer:notes_list",
        "match": {"state.screen_id": "notes_list"},
        "response": {
            "hypotheses": [
                hyp(CREATE, "fab_add", True),
                hyp("open navigation drawer", "menu"),
                hyp("search notes", "search"),
                hyp("open a note", "note_row", True),
            ]
        },
    },
    {
        "id": "infer:archive_list",
        "match": {"state.screen_id": "archive_list"},
        "response": {
            "hypotheses": [hyp("open navigation drawer", "menu"), hyp("open an archived note", "note_row", True)]
        },
    },
    {
        "id": "infer:note_edit",
        "match": {"state.screen_id": "note_edit"},
        "response": {
            "hypotheses": [
                hyp(PHOTO, "attach", True),
                hyp(AUDIO, "attach", False),
                {
                    "$if": {"state.widgets": {"$some": {"resource_id": "archive_note", "text": "Archive"}}},
                    "value": {"description": "archive a note", "label": label("archive_note"), "main": True},
                },
                {
                    "$if": {"state.widgets": {"$some": {"resource_id": "archive_note", "text": "Unarchive"}}},
                    "value": {"description": "unarchive a note", "label": label("archive_note"), "main": False},
                },
                hyp("delete the note", "delete_note"),
                hyp("rename the note", "note_title"),
            ]
        },
    },
    {
        "id": "infer:attachment_menu",
        "match": {"state.screen_id": "attachment_menu"},
        "response": {"hypotheses": [hyp("take a photo", "camera", True), hyp("record an audio clip", "record_audio")]},
    },
    {
        "id": "infer:camera",
        "match": {"state.screen_id": "camera"},
        "response": {"hypotheses": [hyp("capture a photo", "shutter", True)]},
    },
    {
        "id": "infer:audio_recorder",
        "match": {"state.screen_id": "audio_recorder"},
        "response": {"hypotheses": [hyp("save a voice clip", "record_button", True)]},
    },
    {
        "id": "infer:settings",
        "match": {"state.screen_id": "settings"},
        "response": {"hypotheses": [hyp("toggle reduced view", "reduced_view")]},
    },
    {"id": "infer:none", "match": {}, "response": {"hypotheses": []}},
]

plan = [
    plan_rule(CREATE, "notes_list", "click", "fab_add", when={"history": {"$len": 0}}),
    plan_rule(CREATE, "note_edit", "edit", "note_title", "Buy milk", when={"state.content.title": ""}),
    plan_rule(PHOTO, "note_edit", "click", "attach", when={"history": {"$len": 0}}),
    plan_rule(PHOTO, "attachment_menu", "click", "camera"),
    plan_rule(PHOTO, "camera", "click", "shutter", when=lacks("photo_preview")),
    plan_rule(AUDIO, "note_edit", "click", "attach", when={"history": {"$len": 0}}),
    plan_rule(AUDIO, "attachment_menu", "click", "record_audio"),
    plan_rule(AUDIO, "audio_recorder", "click", "record_button", when=lacks("clip_saved")),
    plan_rule("save a voice clip", "audio_recorder", "click", "record_button", when=lacks("clip_saved")),
    plan_rule("open navigation drawer", "notes_list", "click", "menu"),
    plan_rule("open navigation drawer", "archive_list", "click", "menu"),
    plan_rule("search notes", "notes_list", "click", "search"),
    plan_rule("filter notes by a search query", "notes_list", "edit", "search_field", "Groceries"),
    plan_rule("open a note", "notes_list", "click", "note_row"),
    plan_rule("open an archived note", "archive_list", "click", "note_row"),
    plan_rule("open archived notes", "notes_list", "click", "drawer_archive"),
    plan_rule("open archived notes", "archive_list", "click", "drawer_archive"),
    plan_rule("open settings", "notes_list", "click", "drawer_settings"),
    plan_rule("open settings", "archive_list", "click", "drawer_settings"),
    plan_rule("archive a note", "note_edit", "click", "archive_note"),
    plan_rule("unarchive a note", "note_edit", "click", "archive_note"),
    plan_rule("delete the note", "note_edit", "click", "delete_note"),
    plan_rule("rename the note", "note_edit", "edit", "note_title", "Weekly plan"),
    plan_rule("take a photo", "attachment_menu", "click", "camera"),
    plan_rule("record an audio clip", "attachment_menu", "click", "record_audio"),
    plan_rule("capture a photo", "camera", "click", "shutter", when=lacks("photo_preview")),
    plan_rule("toggle reduced view", "settings", "click", "reduced_view"),
    {"id": "plan:default", "match": {}, "response": {"event_type": "back", "label": None, "data": None}},
]

ATTACHED = {"post.widgets": {"$some": {"resource_id": {"$in": ["attachment_thumbnail", "attachment_icon"]}}}}
judge_rules = [
    {"id": "judge:noop", "match": NOOP, "response": {"outcome": "fail", "reason": "no visible change"}},
    judge(CREATE, "complete", {"pre.screen_id": "note_edit", "post.screen_id": "notes_list", **has("note_row", "post")}, "saved"),
    judge(CREATE, "success", {"post.screen_id": "note_edit"}, "editing"),
    judge(PHOTO, "complete", {"pre.screen_id": "camera", "post.screen_id": "note_edit", **ATTACHED}, "attached"),
    judge(PHOTO, "success", {"post.screen_id": {"$in": ["attachment_menu", "camera"]}}, "progress"),
    judge(AUDIO, "complete", {"pre.screen_id": "audio_recorder", "post.screen_id": "note_edit", **has("audio_attachment", "post")}, "attached"),
    judge(AUDIO, "success", {"post.screen_id": {"$in": ["attachment_menu", "audio_recorder"]}}, "progress"),
    judge("save a voice clip", "complete", has("clip_saved", "post"), "saved"),
    judge("save a voice clip", "success", {"post.screen_id": "audio_recorder"}, "progress"),
    judge("open navigation drawer", "complete", has("drawer_archive", "post"), "opened"),
    judge("search notes", "complete", has("search_field", "post"), "opened"),
    judge("filter notes by a search query", "complete", {"diff.content_changed.query": {"$exists": True}}, "filtered"),
    judge("open a note", "complete", {"post.screen_id": "note_edit"}, "opened"),
    judge("open an archived note", "complete", {"post.screen_id": "note_edit"}, "opened"),
    judge("open archived notes", "complete", {"post.screen_id": "archive_list"}, "opened"),
    judge("open settings", "complete", {"post.screen_id": "settings"}, "opened"),
    judge("archive a note", "complete", {"pre.screen_id": "note_edit", "post.screen_id": "notes_list"}, "archived"),
    judge("unarchive a note", "complete", {"pre.screen_id": "note_edit", "post.screen_id": "archive_list"}, "restored"),
    judge("delete the note", "complete", {"pre.screen_id": "note_edit", "post.screen_id": {"$in": ["notes_list", "archive_list"]}}, "deleted"),
    judge("rename the note", "complete", {"diff.content_changed.title": {"$exists": True}}, "renamed"),
    judge("take a photo", "complete", {"post.screen_id": "camera"}, "opened"),
    judge("record an audio clip", "complete", {"post.screen_id": "audio_recorder"}, "opened"),
    judge("capture a photo", "complete", has("photo_preview", "post"), "captured"),
    judge("toggle reduced view", "complete", {"diff.content_changed.reduced_view": {"$exists": True}}, "toggled"),
    {"id": "judge:default", "match": {}, "response": {"outcome": "fail", "reason": "no progress"}},
]

summarize = [
    {
        "id": "summarize:photo-attached",
        "match": {"goal": PHOTO, "outcome": "complete"},
        "response": {
            "pre_summary": {"$ref": "mechanical.pre_summary"},
            "event_summary": "Returned from the camera to the note editor",
            "post_summary": "Note editor showing the new photo attachment",
            "state_diff_summary": {"$ref": "mechanical.state_diff_summary"},
        },
    },
    {
        "id": "summarize:default",
        "match": {},
        "response": {
            "pre_summary": {"$ref": "mechanical.pre_summary"},
            "event_summary": {"$ref": "mechanical.event_summary"},
            "post_summary": {"$ref": "mechanical.post_summary"},
            "state_diff_summary": {"$ref": "mechanical.state_diff_summary"},
        },
    },
]

draft = [
    {
        "id": "draft:photo",
        "match": {"hypothesis.description": PHOTO, "evidence.steps": {"$len": {"$ge": 4}}},
        "response": {
            "precondition": "The note editor is open and offers the attach button",
            "interaction": "Attach a photo through the camera: open the attachment menu, choose Camera, take the photo and go back",
            "postcondition": "The editor shows the Notes toolbar title and the photo thumbnail",
            "cited_steps": [0, 1, 2, 3],
        },
    },
    {
        "id": "draft:create",
        "match": {"hypothesis.description": CREATE, "evidence.steps": {"$len": {"$ge": 3}}},
        "response": {
            "precondition": "The notes list is shown with the add-note button",
            "interaction": "Add a note, type a title into it and go back",
            "postcondition": "The notes list is shown and contains at least one note row",
            "cited_steps": [0, 1, 2],
        },
    },
    {
        "id": "draft:audio",
        "match": {"hypothesis.description": AUDIO, "evidence.steps": {"$len": {"$ge": 5}}},
        "response": {
            "precondition": "The note editor is open and offers the attach button",
            "interaction": "Open the attachment menu, choose Record audio, start and stop recording and go back",
            "postcondition": "The editor shows an audio attachment",
            "cited_steps": [0, 1, 2, 3, 4],
        },
    },
]


def sel(**kw):
    return kw


translate = [
    {
        "id": "translate:photo",
        "match": {"spec.interaction": {"$contains": "Camera"}},
        "response": {
            "precondition": {"and": [{"on_screen": "note_edit"}, {"exists": sel(resource_id="attach")}]},
            "interaction": [
                {"event_type": "click", "selector": sel(resource_id="attach")},
                {"event_type": "click", "selector": sel(resource_id="camera")},
                {"event_type": "click", "selector": sel(resource_id="shutter")},
                {"event_type": "back"},
            ],
            "postcondition": {"and": [{"exists": sel(text="Notes")}, {"exists": sel(resource_id="attachment_thumbnail")}]},
        },
    },
    {
        "id": "translate:create",
        "match": {"spec.interaction": {"$contains": "type a title"}},
        "response": {
            "precondition": {"and": [{"on_screen": "notes_list"}, {"exists": sel(resource_id="fab_add")}]},
            "interaction": [
                {"event_type": "click", "selector": sel(resource_id="fab_add")},
                {"event_type": "edit", "selector": sel(resource_id="note_title"), "data": {"literal": "Buy milk"}},
                {"event_type": "back"},
            ],
            "postcondition": {
                "and": [{"on_screen": "notes_list"}, {"count": sel(resource_id="note_row"), "op": ">=", "value": 1}]
            },
        },
    },
    {
        "id": "translate:audio",
        "match": {"spec.interaction": {"$contains": "Record audio"}},
        "response": {
            "precondition": {"and": [{"on_screen": "note_edit"}, {"exists": sel(resource_id="attach")}]},
            "interaction": [
                {"event_type": "click", "selector": sel(resource_id="attach")},
                {"event_type": "click", "selector": sel(resource_id="record_audio")},
                {"event_type": "click", "selector": sel(resource_id="record_button")},
                {"event_type": "click", "selector": sel(resource_id="record_button")},
                {"event_type": "back"},
            ],
            "postcondition": {"exists": sel(resource_id="audio_attachment")},
        },
    },
]

diagnose = [
    {
        "id": "diagnose:photo-elsewhere",
        "match": {
            "report.post.widgets": {
                "$some": {"resource_id": {"$in": ["attachment_thumbnail", "attachment_icon"]}}
            }
        },
        "response": {
            "verdict": "imprecise_postcondition",
            "rationale": "The photo was attached, but the editor legitimately differs from the evidence (other origin list or reduced view)",
            "cited": ["report.post", "evidence.steps[3]"],
        },
    },
    {
        "id": "diagnose:default",
        "match": {},
        "response": {
            "verdict": "likely_bug",
            "rationale": "The interaction ran as in the evidence but its effect never appeared",
            "cited": ["report.failed_atom"],
        },
    },
]

refine = [
    {
        "id": "refine:photo-postcondition",
        "match": {"diagnosis.verdict": "imprecise_postcondition", "property.description": {"$regex": "(?i)photo"}},
        "response": {
            "component": "Q",
            "precondition": {"$ref": "property.precondition"},
            "interaction": {"$ref": "property.interaction"},
            "postcondition": {
                "and": [
                    {"exists": sel(resource_id="menu")},
                    {
                        "or": [
                            {"exists": sel(resource_id="attachment_thumbnail")},
                            {"exists": sel(resource_id="attachment_icon")},
                        ]
                    },
                ]
            },
            "rationale": "Accept any editor page with its menu button and either photo form",
        },
    },
]

fixture = {
    "name": "notes",
    "rules": {
        "infer_hypotheses": infer,
        "plan_event": plan,
        "judge_step": judge_rules,
        "summarize_step": summarize,
        "draft_property": draft,
        "translate_property": translate,
        "diagnose_violation": diagnose,
        "refine_property": refine,
    },
}

if __name__ == "__main__":
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixture, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {OUT}")
