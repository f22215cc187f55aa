"""Replay anchors: a seed plus a concrete event list that reproduces a run."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .backend.simulator import Backend, RejectedEvent, Session
from .gui import Event


class AnchorStale(Exception):
    """Replaying the anchor no longer reproduces the recorded screens."""


@dataclass(frozen=True)
class ReplayAnchor:
    seed: int
    events: tuple[Event, ...]
    # screen reached after each event, used to detect divergence
    screens: tuple[str, ...]
    initial_screen: str
    # index of the first event belonging to the anchored segment
    start: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "screens", tuple(self.screens))
        if len(self.events) != len(self.screens):
            raise ValueError("anchor needs one screen per event")
        if not 0 <= self.start <= len(self.events):
            raise ValueError("anchor start out of range")

    @property
    def final_screen(self) -> str:
        return self.screens[-1] if self.screens else self.initial_screen

    def screen_at(self, k: int) -> str:
        return self.screens[k - 1] if k else self.initial_screen

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "initial_screen": self.initial_screen,
            "start": self.start,
            "events": [e.to_dict() for e in self.events],
            "screens": list(self.screens),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ReplayAnchor:
        return cls(
            seed=d["seed"],
            events=tuple(Event.from_dict(e) for e in d["events"]),
            screens=tuple(d["screens"]),
            initial_screen=d["initial_screen"],
            start=d.get("start", 0),
        )


def replay_events(
    session: Session,
    events: Sequence[Event],
    expected_screens: Sequence[str] | None = None,
) -> None:
    """Perform ``events`` on a live session, failing loudly on divergence."""
    for i, e in enumerate(events):
        try:
            state = session.perform(e)
        except RejectedEvent as exc:
            raise AnchorStale(f"event {i} ({e}) rejected on replay: {exc}") from None
        if expected_screens is not None and state.screen_id != expected_screens[i]:
            raise AnchorStale(
                f"event {i} ({e}) reached {state.screen_id!r}, expected {expected_screens[i]!r}"
            )


def open_anchor(anchor: ReplayAnchor, backend: Backend, upto: int | None = None) -> Session:
    """Fresh session advanced through the first ``upto`` anchor events."""
    session = backend.launch(anchor.seed)
    if session.state.screen_id != anchor.initial_screen:
        raise AnchorStale(f"launch reached {session.state.screen_id!r}, expected {anchor.initial_screen!r}")
    k = len(anchor.events) if upto is None else upto
    replay_events(session, anchor.events[:k], anchor.screens[:k])
    return session
