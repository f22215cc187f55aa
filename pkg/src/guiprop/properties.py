"""Executable properties: precondition, interaction script, postcondition.

A property applies at a state when its precondition holds there; its
interaction script is then run and the postcondition is asserted on the
state it reaches. A script that cannot be executed (a selector that matches
nothing, a failing step guard) makes the check *inapplicable*, never a
violation.

JSON layout::

    selector   {"widget_kind"?, "resource_id"?, "text"? | "text_regex"?,
                "description"?, "label"?, "quantifier"?: "first"|"all"|"count"}
    predicate  {"exists": sel} | {"absent": sel} | {"on_screen": id}
               | {"text_of": sel, "equals": str} | {"count": sel, "op": "<=", "value": n}
               | {"and": [...]} | {"or": [...]} | {"not": pred}
    step       {"event_type", "selector"?, "data"?: {"literal": str} | {"corpus": seed},
                "guard"?: pred}
    property   {"property_id", "version", "description", "precondition",
                "interaction": [step, ...], "postcondition", "provenance"}
"""

from __future__ import annotations

import logging
import operator
import random
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .backend.simulator import Backend, RejectedEvent, Session
from .gui import DEFAULT_CORPUS, EVENT_TYPES, Event, GuiState, Widget, guard
from .replay import AnchorStale, ReplayAnchor, open_anchor

log = logging.getLogger(__name__)

QUANTIFIERS = ("first", "all", "count")
COMPARATORS = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
_SELECTOR_FIELDS = ("widget_kind", "resource_id", "text", "text_regex", "description", "label")


class PropertyFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Selector:
    widget_kind: str | None = None
    resource_id: str | None = None
    text: str | None = None
    text_regex: str | None = None
    description: str | None = None
    label: int | None = None
    quantifier: str = "first"

    def __post_init__(self) -> None:
        if all(getattr(self, f) is None for f in _SELECTOR_FIELDS):
            raise PropertyFormatError("selector constrains no field")
        if self.text is not None and self.text_regex is not None:
            raise PropertyFormatError("selector takes text or text_regex, not both")
        if self.quantifier not in QUANTIFIERS:
            raise PropertyFormatError(f"unknown quantifier {self.quantifier!r}")
        if self.text_regex is not None:
            try:
                re.compile(self.text_regex)
            except re.error as exc:
                raise PropertyFormatError(f"bad regex {self.text_regex!r}: {exc}") from None

    def matches(self, w: Widget) -> bool:
        if self.widget_kind is not None and w.widget_kind != self.widget_kind:
            return False
        if self.resource_id is not None and w.resource_id != self.resource_id:
            return False
        if self.description is not None and w.description != self.description:
            return False
        if self.label is not None and w.label != self.label:
            return False
        if self.text is not None and w.text != self.text:
            return False
        if self.text_regex is not None and re.fullmatch(self.text_regex, w.text or "") is None:
            return False
        return True

    def resolve(self, s: GuiState) -> list[Widget]:
        return [w for w in s.widgets if self.matches(w)]

    def first(self, s: GuiState) -> Widget | None:
        # widgets are stored in label order, so the first match has the lowest label
        return next((w for w in s.widgets if self.matches(w)), None)

    def to_dict(self) -> dict[str, Any]:
        d = {f: getattr(self, f) for f in _SELECTOR_FIELDS if getattr(self, f) is not None}
        if self.quantifier != "first":
            d["quantifier"] = self.quantifier
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Selector:
        if not isinstance(d, Mapping):
            raise PropertyFormatError(f"selector must be an object, got {d!r}")
        extra = set(d) - set(_SELECTOR_FIELDS) - {"quantifier"}
        if extra:
            raise PropertyFormatError(f"unknown selector fields {sorted(extra)}")
        for k, v in d.items():
            want = int if k == "label" else str
            if v is not None and (not isinstance(v, want) or isinstance(v, bool)):
                raise PropertyFormatError(f"selector field {k} must be {want.__name__}, got {v!r}")
        return cls(**dict(d))

    def __str__(self) -> str:
        parts = [f"{k}={v!r}" for k, v in self.to_dict().items() if k != "quantifier"]
        if self.quantifier != "first":
            parts.append(f"[{self.quantifier}]")
        return ", ".join(parts)


# -- predicates -----------------------------------------------------------------


class Predicate:
    def holds(self, s: GuiState) -> bool:
        raise NotImplementedError

    def failed_atom(self, s: GuiState, path: str) -> str | None:
        """Path of an atom explaining why the predicate is false on ``s``."""
        return None if self.holds(s) else f"{path}: {self}"

    def selectors(self) -> list[Selector]:
        return []

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Exists(Predicate):
    selector: Selector

    def holds(self, s: GuiState) -> bool:
        return self.selector.first(s) is not None

    def selectors(self) -> list[Selector]:
        return [self.selector]

    def to_dict(self) -> dict[str, Any]:
        return {"exists": self.selector.to_dict()}

    def __str__(self) -> str:
        return f"exists({self.selector})"


@dataclass(frozen=True)
class Absent(Predicate):
    selector: Selector

    def holds(self, s: GuiState) -> bool:
        return self.selector.first(s) is None

    def selectors(self) -> list[Selector]:
        return [self.selector]

    def to_dict(self) -> dict[str, Any]:
        return {"absent": self.selector.to_dict()}

    def __str__(self) -> str:
        return f"absent({self.selector})"


@dataclass(frozen=True)
class TextOf(Predicate):
    """Text comparison; quantifier ``first`` checks the lowest-label match,
    ``all`` requires every match (at least one) and ``count`` any match."""

    selector: Selector
    literal: str

    def holds(self, s: GuiState) -> bool:
        q = self.selector.quantifier
        if q == "first":
            w = self.selector.first(s)
            return w is not None and w.text == self.literal
        found = self.selector.resolve(s)
        if q == "all":
            return bool(found) and all(w.text == self.literal for w in found)
        return any(w.text == self.literal for w in found)

    def selectors(self) -> list[Selector]:
        return [self.selector]

    def to_dict(self) -> dict[str, Any]:
        return {"text_of": self.selector.to_dict(), "equals": self.literal}

    def __str__(self) -> str:
        return f"text_of({self.selector}) == {self.literal!r}"


@dataclass(frozen=True)
class Count(Predicate):
    selector: Selector
    op: str
    value: int

    def __post_init__(self) -> None:
        if self.op not in COMPARATORS:
            raise PropertyFormatError(f"unknown comparator {self.op!r}")

    def holds(self, s: GuiState) -> bool:
        return COMPARATORS[self.op](len(self.selector.resolve(s)), self.value)

    def selectors(self) -> list[Selector]:
        return [self.selector]

    def to_dict(self) -> dict[str, Any]:
        return {"count": self.selector.to_dict(), "op": self.op, "value": self.value}

    def __str__(self) -> str:
        return f"count({self.selector}) {self.op} {self.value}"


@dataclass(frozen=True)
class OnScreen(Predicate):
    screen_id: str

    def holds(self, s: GuiState) -> bool:
        return s.screen_id == self.screen_id

    def to_dict(self) -> dict[str, Any]:
        return {"on_screen": self.screen_id}

    def __str__(self) -> str:
        return f"on_screen({self.screen_id!r})"


@dataclass(frozen=True)
class And(Predicate):
    children: tuple[Predicate, ...]

    def holds(self, s: GuiState) -> bool:
        return all(c.holds(s) for c in self.children)

    def failed_atom(self, s: GuiState, path: str) -> str | None:
        for i, c in enumerate(self.children):
            found = c.failed_atom(s, f"{path}/and[{i}]")
            if found is not None:
                return found
        return None

    def selectors(self) -> list[Selector]:
        return [sel for c in self.children for sel in c.selectors()]

    def to_dict(self) -> dict[str, Any]:
        return {"and": [c.to_dict() for c in self.children]}

    def __str__(self) -> str:
        return "(" + " and ".join(map(str, self.children)) + ")" if self.children else "true"


@dataclass(frozen=True)
class Or(Predicate):
    children: tuple[Predicate, ...]

    def holds(self, s: GuiState) -> bool:
        return any(c.holds(s) for c in self.children)

    def selectors(self) -> list[Selector]:
        return [sel for c in self.children for sel in c.selectors()]

    def to_dict(self) -> dict[str, Any]:
        return {"or": [c.to_dict() for c in self.children]}

    def __str__(self) -> str:
        return "(" + " or ".join(map(str, self.children)) + ")" if self.children else "false"


@dataclass(frozen=True)
class Not(Predicate):
    child: Predicate

    def holds(self, s: GuiState) -> bool:
        return not self.child.holds(s)

    def selectors(self) -> list[Selector]:
        return self.child.selectors()

    def to_dict(self) -> dict[str, Any]:
        return {"not": self.child.to_dict()}

    def __str__(self) -> str:
        return f"not {self.child}"


def parse_predicate(d: Any, depth: int = 0) -> Predicate:
    if depth > 32:
        raise PropertyFormatError("predicate nesting too deep")
    if not isinstance(d, Mapping):
        raise PropertyFormatError(f"predicate must be an object, got {d!r}")
    try:
        if "exists" in d:
            return Exists(Selector.from_dict(d["exists"]))
        if "absent" in d:
            return Absent(Selector.from_dict(d["absent"]))
        if "text_of" in d:
            return TextOf(Selector.from_dict(d["text_of"]), _str(d["equals"]))
        if "count" in d:
            value = d["value"]
            if not isinstance(value, int) or isinstance(value, bool):
                raise PropertyFormatError(f"count value must be an integer, got {value!r}")
            return Count(Selector.from_dict(d["count"]), d["op"], value)
        if "on_screen" in d:
            return OnScreen(_str(d["on_screen"]))
        if "and" in d:
            return And(tuple(parse_predicate(c, depth + 1) for c in _list(d["and"])))
        if "or" in d:
            return Or(tuple(parse_predicate(c, depth + 1) for c in _list(d["or"])))
        if "not" in d:
            return Not(parse_predicate(d["not"], depth + 1))
    except KeyError as exc:
        raise PropertyFormatError(f"predicate {dict(d)!r} lacks {exc}") from None
    except TypeError as exc:
        raise PropertyFormatError(str(exc)) from None
    raise PropertyFormatError(f"unknown predicate {dict(d)!r}")


def _str(v: Any) -> str:
    if not isinstance(v, str):
        raise PropertyFormatError(f"expected a string, got {v!r}")
    return v


def _list(v: Any) -> list:
    if not isinstance(v, list):
        raise PropertyFormatError(f"expected a list, got {v!r}")
    return v


def eval_predicate(p: Predicate, s: GuiState) -> bool:
    return p.holds(s)


# -- interaction scripts --------------------------------------------------------


@dataclass(frozen=True)
class DataGen:
    """Event payload: a literal, or a corpus entry drawn with a fixed seed."""

    literal: str | None = None
    corpus_seed: int | None = None

    def __post_init__(self) -> None:
        if (self.literal is None) == (self.corpus_seed is None):
            raise PropertyFormatError("data generator is either literal or corpus")

    def draw(self, s: GuiState, corpus: Sequence[str] = DEFAULT_CORPUS) -> str:
        if self.literal is not None:
            return self.literal
        # keyed on the session step so replays from the same state repeat the draw
        return random.Random(f"{self.corpus_seed}:{s.monotonic_step}").choice(list(corpus))

    def to_dict(self) -> dict[str, Any]:
        return {"literal": self.literal} if self.literal is not None else {"corpus": self.corpus_seed}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> DataGen:
        if "literal" in d:
            return cls(literal=_str(d["literal"]))
        if "corpus" in d:
            return cls(corpus_seed=int(d["corpus"]))
        raise PropertyFormatError(f"unknown data generator {dict(d)!r}")


@dataclass(frozen=True)
class Step:
    event_type: str
    selector: Selector | None = None
    data: DataGen | None = None
    guard: Predicate | None = None

    def __post_init__(self) -> None:
        if self.event_type not in EVENT_TYPES:
            raise PropertyFormatError(f"unknown event type {self.event_type!r}")
        if (self.event_type == "back") != (self.selector is None):
            raise PropertyFormatError("back steps take no selector; other steps need one")
        if self.event_type in ("edit", "swipe") and self.data is None:
            raise PropertyFormatError(f"{self.event_type} steps need data")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"event_type": self.event_type}
        if self.selector is not None:
            d["selector"] = self.selector.to_dict()
        if self.data is not None:
            d["data"] = self.data.to_dict()
        if self.guard is not None:
            d["guard"] = self.guard.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Step:
        if not isinstance(d, Mapping) or "event_type" not in d:
            raise PropertyFormatError(f"bad interaction step {d!r}")
        return cls(
            event_type=d["event_type"],
            selector=Selector.from_dict(d["selector"]) if d.get("selector") is not None else None,
            data=DataGen.from_dict(d["data"]) if d.get("data") is not None else None,
            guard=parse_predicate(d["guard"]) if d.get("guard") is not None else None,
        )

    def __str__(self) -> str:
        if self.event_type == "back":
            return "back"
        extra = f", {self.data.to_dict()}" if self.data else ""
        return f"{self.event_type}({self.selector}{extra})"


class InteractionAbort(Exception):
    def __init__(self, step: int, reason: str, events: list[Event]):
        super().__init__(f"step {step}: {reason}")
        self.step = step
        self.reason = reason
        self.events = events


def run_interaction(
    steps: Sequence[Step], session: Session, corpus: Sequence[str] = DEFAULT_CORPUS
) -> tuple[GuiState, list[Event]]:
    """Resolve and perform each step; raise :class:`InteractionAbort` if one cannot run."""
    if not steps:
        raise PropertyFormatError("interaction script is empty")
    events: list[Event] = []
    state = session.state
    for i, step in enumerate(steps):
        if step.guard is not None and not step.guard.holds(state):
            raise InteractionAbort(i, f"step guard {step.guard} is false", events)
        if step.event_type == "back":
            e = Event("back")
        else:
            w = step.selector.first(state)
            if w is None:
                raise InteractionAbort(i, f"selector {step.selector} matches nothing", events)
            data = step.data.draw(state, corpus) if step.data is not None else None
            e = Event(step.event_type, w.label, data)
            if not guard(e, state):
                raise InteractionAbort(i, f"widget {w.label} does not accept {step.event_type}", events)
        try:
            state = session.perform(e)
        except RejectedEvent as exc:
            raise InteractionAbort(i, str(exc), events) from None
        events.append(e)
    session.settle()
    return session.state, events


# -- properties -------------------------------------------------------------------


@dataclass(frozen=True)
class Property:
    property_id: str
    precondition: Predicate
    interaction: tuple[Step, ...]
    postcondition: Predicate
    description: str = ""
    version: int = 1
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "interaction", tuple(self.interaction))
        if not self.interaction:
            raise PropertyFormatError("interaction script is empty")

    def selectors(self) -> list[Selector]:
        sels = self.precondition.selectors() + self.postcondition.selectors()
        for st in self.interaction:
            if st.selector is not None:
                sels.append(st.selector)
            if st.guard is not None:
                sels.extend(st.guard.selectors())
        return sels

    def components(self) -> dict[str, Any]:
        return {
            "P": self.precondition.to_dict(),
            "I": [s.to_dict() for s in self.interaction],
            "Q": self.postcondition.to_dict(),
        }

    def render(self) -> str:
        steps = "; ".join(map(str, self.interaction))
        return f"P: {self.precondition} | I: {steps} | Q: {self.postcondition}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "property_id": self.property_id,
            "version": self.version,
            "description": self.description,
            "precondition": self.precondition.to_dict(),
            "interaction": [s.to_dict() for s in self.interaction],
            "postcondition": self.postcondition.to_dict(),
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Property:
        try:
            return cls(
                property_id=_str(d["property_id"]),
                version=int(d.get("version", 1)),
                description=d.get("description", ""),
                precondition=parse_predicate(d["precondition"]),
                interaction=tuple(Step.from_dict(s) for s in _list(d["interaction"])),
                postcondition=parse_predicate(d["postcondition"]),
                provenance=dict(d.get("provenance", {})),
            )
        except KeyError as exc:
            raise PropertyFormatError(f"property lacks {exc}") from None


INAPPLICABLE, SATISFIED, VIOLATED = "inapplicable", "satisfied", "violated"


@dataclass(frozen=True)
class CheckResult:
    verdict: str
    events: tuple[Event, ...] = ()
    pre: GuiState | None = None
    post: GuiState | None = None
    failed_atom: str | None = None
    abort: str | None = None

    def __post_init__(self) -> None:
        if (self.failed_atom is not None) != (self.verdict == VIOLATED):
            raise ValueError("failed atom path is present iff the verdict is violated")

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "events": [e.to_dict() for e in self.events],
            "pre": self.pre.to_dict() if self.pre else None,
            "post": self.post.to_dict() if self.post else None,
            "failed_atom": self.failed_atom,
            "abort": self.abort,
        }


def check_property(prop: Property, session: Session, corpus: Sequence[str] = DEFAULT_CORPUS) -> CheckResult:
    pre = session.state
    if not prop.precondition.holds(pre):
        return CheckResult(INAPPLICABLE, pre=pre)
    try:
        post, events = run_interaction(prop.interaction, session, corpus)
    except InteractionAbort as abort:
        log.debug("%s inapplicable: %s", prop.property_id, abort)
        return CheckResult(INAPPLICABLE, tuple(abort.events), pre, session.state, abort=str(abort))
    atom = prop.postcondition.failed_atom(post, "Q")
    if atom is None:
        return CheckResult(SATISFIED, tuple(events), pre, post)
    return CheckResult(VIOLATED, tuple(events), pre, post, failed_atom=atom)


def check_on_trace(prop: Property, anchor: ReplayAnchor, backend: Backend) -> CheckResult | None:
    """Check at the first anchored-segment state where the precondition holds.

    Returns None when the precondition never fires along the segment.
    Raises :class:`AnchorStale` if the anchor no longer replays.
    """
    session = open_anchor(anchor, backend, upto=anchor.start)
    k = anchor.start
    while True:
        if prop.precondition.holds(session.state):
            return check_property(prop, session)
        if k == len(anchor.events):
            return None
        try:
            state = session.perform(anchor.events[k])
        except RejectedEvent as exc:
            raise AnchorStale(f"event {k} rejected on replay: {exc}") from None
        if state.screen_id != anchor.screens[k]:
            raise AnchorStale(f"event {k} reached {state.screen_id!r}, expected {anchor.screens[k]!r}")
        k += 1


def holds_on_trace(prop: Property, anchor: ReplayAnchor, backend: Backend) -> bool:
    result = check_on_trace(prop, anchor, backend)
    return result is not None and result.verdict == SATISFIED
