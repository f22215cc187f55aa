"""Core GUI domain types: widgets, states, events, traces and UI contexts.

Everything here is an immutable value. Serialization helpers produce the
JSON layout used by evidence files, reports and replay transcripts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

WIDGET_KINDS = frozenset(
    {"button", "text-field", "list-item", "menu-item", "checkbox", "image", "label"}
)
CAPABILITIES = frozenset({"clickable", "long-clickable", "editable", "swipeable"})
EVENT_TYPES = ("click", "long-click", "edit", "swipe", "back")
SWIPE_DIRECTIONS = ("up", "down", "left", "right")

# capability a target widget must offer for each targeted event type
REQUIRED_CAPABILITY = {
    "click": "clickable",
    "long-click": "long-clickable",
    "edit": "editable",
    "swipe": "swipeable",
}

DEFAULT_CORPUS: tuple[str, ...] = (
    "",
    "a",
    "hello world",
    "Meeting at 3pm",
    "12345",
    "Groceries",
    "ünïcödé ✓",
    "x" * 256,
)


@dataclass(frozen=True)
class Widget:
    widget_id: str
    widget_kind: str
    label: int
    resource_id: str | None = None
    text: str | None = None
    description: str | None = None
    capabilities: frozenset[str] = frozenset()
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.widget_kind not in WIDGET_KINDS:
            raise ValueError(f"unknown widget kind {self.widget_kind!r}")
        unknown = set(self.capabilities) - CAPABILITIES
        if unknown:
            raise ValueError(f"unknown capabilities {sorted(unknown)}")
        object.__setattr__(self, "capabilities", frozenset(self.capabilities))

    @property
    def interactive(self) -> bool:
        return bool(self.capabilities)

    def to_dict(self) -> dict[str, Any]:
        return {
            "widget_id": self.widget_id,
            "widget_kind": self.widget_kind,
            "resource_id": self.resource_id,
            "text": self.text,
            "description": self.description,
            "label": self.label,
            "capabilities": sorted(self.capabilities),
            "enabled": self.enabled,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Widget:
        return cls(
            widget_id=d["widget_id"],
            widget_kind=d["widget_kind"],
            label=d["label"],
            resource_id=d.get("resource_id"),
            text=d.get("text"),
            description=d.get("description"),
            capabilities=frozenset(d.get("capabilities", ())),
            enabled=d.get("enabled", True),
        )


@dataclass(frozen=True, order=True)
class WidgetSignature:
    """Visit-stable identity of a widget; dynamic text is filtered out."""

    widget_kind: str
    resource_id: str = ""
    filtered_text: str = ""
    description: str = ""

    def to_dict(self) -> dict[str, str]:
        return {
            "widget_kind": self.widget_kind,
            "resource_id": self.resource_id,
            "filtered_text": self.filtered_text,
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> WidgetSignature:
        return cls(
            d["widget_kind"],
            d.get("resource_id") or "",
            d.get("filtered_text") or "",
            d.get("description") or "",
        )


@dataclass(frozen=True)
class GuiState:
    screen_id: str
    widgets: tuple[Widget, ...]
    content_snapshot: Mapping[str, Any] = field(default_factory=dict)
    monotonic_step: int = 0

    def __post_init__(self) -> None:
        if not self.screen_id:
            raise ValueError("screen_id must be non-empty")
        object.__setattr__(self, "widgets", tuple(self.widgets))
        labels = [w.label for w in self.widgets]
        if labels != list(range(1, len(labels) + 1)):
            raise ValueError(f"widget labels must be 1..n in order, got {labels}")

    @property
    def interactive_widgets(self) -> tuple[Widget, ...]:
        return tuple(w for w in self.widgets if w.interactive)

    def widget(self, label: int) -> Widget | None:
        if isinstance(label, int) and not isinstance(label, bool) and 1 <= label <= len(self.widgets):
            return self.widgets[label - 1]
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "screen_id": self.screen_id,
            "widgets": [w.to_dict() for w in self.widgets],
            "content_snapshot": dict(self.content_snapshot),
            "monotonic_step": self.monotonic_step,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> GuiState:
        return cls(
            screen_id=d["screen_id"],
            widgets=tuple(Widget.from_dict(w) for w in d["widgets"]),
            content_snapshot=d.get("content_snapshot", {}),
            monotonic_step=d.get("monotonic_step", 0),
        )


@dataclass(frozen=True)
class Event:
    event_type: str
    target: int | None = None
    data: str | None = None

    def __post_init__(self) -> None:
        if self.event_type not in EVENT_TYPES:
            raise ValueError(f"unknown event type {self.event_type!r}")
        if self.event_type == "back":
            if self.target is not None or self.data is not None:
                raise ValueError("back events carry no target or data")
        elif self.target is None:
            raise ValueError(f"{self.event_type} event needs a target label")
        if self.event_type == "edit" and self.data is None:
            raise ValueError("edit events carry data")
        if self.event_type == "swipe" and self.data not in SWIPE_DIRECTIONS:
            raise ValueError(f"swipe direction must be one of {SWIPE_DIRECTIONS}")

    def __str__(self) -> str:
        if self.event_type == "back":
            return "back"
        if self.data is None:
            return f"{self.event_type}({self.target})"
        return f"{self.event_type}({self.target}, {self.data!r})"

    def to_dict(self) -> dict[str, Any]:
        return {"event_type": self.event_type, "target": self.target, "data": self.data}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Event:
        return cls(d["event_type"], d.get("target"), d.get("data"))


@dataclass(frozen=True)
class Transition:
    pre: GuiState
    event: Event
    post: GuiState

    def to_dict(self) -> dict[str, Any]:
        return {"pre": self.pre.to_dict(), "event": self.event.to_dict(), "post": self.post.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Transition:
        return cls(GuiState.from_dict(d["pre"]), Event.from_dict(d["event"]), GuiState.from_dict(d["post"]))


@dataclass(frozen=True)
class Trace:
    initial: GuiState
    transitions: tuple[Transition, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "transitions", tuple(self.transitions))
        prev = self.initial
        for t in self.transitions:
            if t.pre != prev:
                raise ValueError("trace transitions are not contiguous")
            prev = t.post

    @property
    def final(self) -> GuiState:
        return self.transitions[-1].post if self.transitions else self.initial

    @property
    def states(self) -> list[GuiState]:
        return [self.initial] + [t.post for t in self.transitions]

    @property
    def events(self) -> list[Event]:
        return [t.event for t in self.transitions]

    def extend(self, transition: Transition) -> Trace:
        return Trace(self.initial, self.transitions + (transition,))

    def to_dict(self) -> dict[str, Any]:
        return {"initial": self.initial.to_dict(), "transitions": [t.to_dict() for t in self.transitions]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Trace:
        return cls(GuiState.from_dict(d["initial"]), tuple(Transition.from_dict(t) for t in d["transitions"]))


@dataclass(frozen=True)
class UiContext:
    screen_id: str
    signature_set: frozenset[WidgetSignature]

    def to_dict(self) -> dict[str, Any]:
        return {
            "screen_id": self.screen_id,
            "signature_set": [s.to_dict() for s in sorted(self.signature_set)],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> UiContext:
        return cls(d["screen_id"], frozenset(WidgetSignature.from_dict(s) for s in d["signature_set"]))


def signature(w: Widget, whitelist: Iterable[str] | frozenset[str]) -> WidgetSignature:
    text = w.text if w.text is not None and w.text in whitelist else ""
    return WidgetSignature(w.widget_kind, w.resource_id or "", text, w.description or "")


def ui_context(s: GuiState, whitelist: Iterable[str]) -> UiContext:
    wl = whitelist if isinstance(whitelist, (set, frozenset)) else frozenset(whitelist)
    return UiContext(s.screen_id, frozenset(signature(w, wl) for w in s.interactive_widgets))


def has_unseen_evidence(c: UiContext, seen: Iterable[UiContext]) -> bool:
    """False when some seen context on the same screen already covers ``c``."""
    return not any(
        other.screen_id == c.screen_id and c.signature_set <= other.signature_set for other in seen
    )


def enabled_events(s: GuiState, corpus: tuple[str, ...] = DEFAULT_CORPUS) -> list[Event]:
    """Every event the state accepts, ordered by (label, event type), then back.

    Edit payloads and swipe directions rotate with the label and the session
    step counter, so the list is a pure function of the state.
    """
    order = {t: i for i, t in enumerate(EVENT_TYPES)}
    events: list[Event] = []
    for w in s.widgets:
        if not w.enabled:
            continue
        rot = w.label + s.monotonic_step
        for etype in sorted(REQUIRED_CAPABILITY, key=order.__getitem__):
            if REQUIRED_CAPABILITY[etype] not in w.capabilities:
                continue
            if etype == "edit":
                events.append(Event("edit", w.label, corpus[rot % len(corpus)] if corpus else ""))
            elif etype == "swipe":
                events.append(Event("swipe", w.label, SWIPE_DIRECTIONS[rot % len(SWIPE_DIRECTIONS)]))
            else:
                events.append(Event(etype, w.label))
    events.append(Event("back"))
    return events


def guard(e: Event, s: GuiState) -> bool:
    """True iff ``e`` can be dispatched on ``s`` without touching the backend."""
    if e.event_type == "back":
        return True
    w = s.widget(e.target) if e.target is not None else None
    if w is None or not w.enabled:
        return False
    return REQUIRED_CAPABILITY[e.event_type] in w.capabilities
