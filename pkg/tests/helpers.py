"""Small driving helpers shared by tests."""

from __future__ import annotations

from guiprop.gui import Event


def widget(session, rid: str):
    return next(w for w in session.state.widgets if w.resource_id == rid)


def tap(session, rid: str):
    return session.perform(Event("click", widget(session, rid).label))


def type_into(session, rid: str, text: str):
    return session.perform(Event("edit", widget(session, rid).label, text))


def rids(state) -> set[str]:
    return {w.resource_id for w in state.widgets}


def open_new_note(session, title: str = "Buy milk"):
    tap(session, "fab_add")
    type_into(session, "note_title", title)
    return session.state


def attach_photo(session):
    tap(session, "attach")
    tap(session, "camera")
    tap(session, "shutter")
    return session.perform(Event("back"))
