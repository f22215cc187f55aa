"""Hypothesis-guided GUI exploration producing behavioral evidence.

The loop infers functionality hypotheses on states that show unseen widget
evidence, executes the most promising one with an oracle-planned and
guard-checked event loop, summarizes each step, and falls back to a seeded
random walk whenever the current context has nothing left to try.
"""

from __future__ import annotations

import logging
import random
import re
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

from .backend.simulator import RejectedEvent, Session
from .gui import (
    DEFAULT_CORPUS,
    Event,
    GuiState,
    Trace,
    Transition,
    UiContext,
    WidgetSignature,
    enabled_events,
    guard,
    has_unseen_evidence,
    signature,
    ui_context,
)
from .oracle import MalformedOracleOutput, Oracle, OracleRequest
from .replay import ReplayAnchor

log = logging.getLogger(__name__)

UNEXPLORED, EXPLORED, FAILED = "unexplored", "explored", "failed"
SUCCESS, FAIL, COMPLETE = "success", "fail", "complete"

STEP_LIMIT = 10
MAX_CONSECUTIVE_FAILS = 3
RANDOM_STEPS = 15


# -- oracle-facing views of GUI states -----------------------------------------


def state_listing(s: GuiState) -> dict[str, Any]:
    """Numbered widget listing plus visible content, as sent to the oracle."""
    return {
        "screen_id": s.screen_id,
        "widgets": [
            {
                "label": w.label,
                "widget_kind": w.widget_kind,
                "resource_id": w.resource_id,
                "text": w.text,
                "description": w.description,
                "capabilities": sorted(w.capabilities),
                "enabled": w.enabled,
            }
            for w in s.widgets
        ],
        "content": dict(s.content_snapshot),
    }


def _widget_name(w) -> str:
    name = w.text or w.description or w.resource_id or w.widget_kind
    return f"{w.widget_kind} '{name}'"


def state_diff(pre: GuiState, post: GuiState) -> dict[str, Any]:
    """Mechanical delta between two states: screen, widget multiset, content keys."""
    before = [_widget_name(w) for w in pre.widgets]
    after = [_widget_name(w) for w in post.widgets]
    added = list(after)
    for n in before:
        if n in added:
            added.remove(n)
    removed = list(before)
    for n in after:
        if n in removed:
            removed.remove(n)
    keys = sorted(set(pre.content_snapshot) | set(post.content_snapshot))
    content = {
        k: [pre.content_snapshot.get(k), post.content_snapshot.get(k)]
        for k in keys
        if pre.content_snapshot.get(k) != post.content_snapshot.get(k)
    }
    return {
        "screen_changed": pre.screen_id != post.screen_id,
        "from_screen": pre.screen_id,
        "to_screen": post.screen_id,
        "added": added,
        "removed": removed,
        "content_changed": content,
    }


def _describe_state(s: GuiState) -> str:
    actionable = [_widget_name(w) for w in s.interactive_widgets]
    shown = ", ".join(actionable[:8]) + (" and more" if len(actionable) > 8 else "")
    return f"Screen {s.screen_id} offering {shown or 'no actions'}"


def _describe_event(e: Event, s: GuiState) -> str:
    if e.event_type == "back":
        return "Pressed back"
    w = s.widget(e.target)
    target = _widget_name(w) if w else f"widget {e.target}"
    if e.event_type == "edit":
        return f"Typed {e.data!r} into {target}"
    if e.event_type == "swipe":
        return f"Swiped {e.data} on {target}"
    return f"{e.event_type.capitalize()} on {target}"


def _describe_diff(d: Mapping[str, Any]) -> str:
    parts = []
    if d["screen_changed"]:
        parts.append(f"moved from {d['from_screen']} to {d['to_screen']}")
    if d["added"]:
        parts.append("new " + ", ".join(d["added"]))
    if d["removed"]:
        parts.append("gone " + ", ".join(d["removed"]))
    if d["content_changed"]:
        parts.append("content changed in " + ", ".join(d["content_changed"]))
    return "; ".join(parts) if parts else "no visible change"


def mechanical_summary(pre: GuiState, e: Event, post: GuiState, diff: Mapping[str, Any]) -> dict[str, str]:
    return {
        "pre_summary": _describe_state(pre),
        "event_summary": _describe_event(e, pre),
        "post_summary": _describe_state(post),
        "state_diff_summary": _describe_diff(diff),
    }


# -- domain types ----------------------------------------------------------------


@dataclass(frozen=True)
class FunctionalityHypothesis:
    hypothesis_id: str
    description: str
    trigger: WidgetSignature
    origin_context: UiContext
    main: bool = False
    status: str = UNEXPLORED

    def to_dict(self) -> dict[str, Any]:
        return {
            "hypothesis_id": self.hypothesis_id,
            "description": self.description,
            "trigger": self.trigger.to_dict(),
            "origin_context": self.origin_context.to_dict(),
            "main": self.main,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> FunctionalityHypothesis:
        return cls(
            d["hypothesis_id"],
            d["description"],
            WidgetSignature.from_dict(d["trigger"]),
            UiContext.from_dict(d["origin_context"]),
            d.get("main", False),
            d.get("status", UNEXPLORED),
        )


class HypothesisPool:
    """Every hypothesis inferred in a run, indexed by the context it came from."""

    def __init__(self) -> None:
        self.hypotheses: dict[str, FunctionalityHypothesis] = {}
        self.index: dict[UiContext, list[str]] = {}
        self.executed: list[str] = []
        self._keys: set[tuple[str, WidgetSignature, str]] = set()

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.hypotheses.values())

    def add(self, description: str, trigger: WidgetSignature, origin: UiContext, main: bool) -> FunctionalityHypothesis | None:
        key = (description.strip().lower(), trigger, origin.screen_id)
        if key in self._keys:
            return None
        self._keys.add(key)
        h = FunctionalityHypothesis(f"h{len(self.hypotheses) + 1:03d}", description, trigger, origin, main)
        self.hypotheses[h.hypothesis_id] = h
        self.index.setdefault(origin, []).append(h.hypothesis_id)
        return h

    def mark(self, hypothesis_id: str, status: str) -> FunctionalityHypothesis:
        h = self.hypotheses[hypothesis_id]
        if h.status != UNEXPLORED or status not in (EXPLORED, FAILED):
            raise ValueError(f"illegal status change {h.status} -> {status} for {hypothesis_id}")
        h = replace(h, status=status)
        self.hypotheses[hypothesis_id] = h
        return h

    def order(self, hypothesis_id: str) -> int:
        return int(hypothesis_id[1:])

    def candidates(self, c: UiContext) -> list[FunctionalityHypothesis]:
        """Unexplored hypotheses that belong to context ``c``.

        A hypothesis belongs to ``c`` when it was inferred on the same screen
        and either its origin context covers ``c`` or its trigger is in ``c``.
        """
        out = []
        for h in self.hypotheses.values():
            if h.status != UNEXPLORED or h.origin_context.screen_id != c.screen_id:
                continue
            if c.signature_set <= h.origin_context.signature_set or h.trigger in c.signature_set:
                out.append(h)
        return out


@dataclass(frozen=True)
class HistoryEntry:
    event: Event | None
    outcome: str
    dispatched: bool
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "event": self.event.to_dict() if self.event else None,
            "outcome": self.outcome,
            "dispatched": self.dispatched,
            "note": self.note,
        }


@dataclass
class ExecutionHistory:
    entries: list[HistoryEntry] = field(default_factory=list)

    def append(self, entry: HistoryEntry) -> None:
        if entry.outcome not in (SUCCESS, FAIL, COMPLETE):
            raise ValueError(f"bad outcome {entry.outcome!r}")
        if self.entries and self.entries[-1].outcome == COMPLETE:
            raise ValueError("no step may follow a complete outcome")
        self.entries.append(entry)

    @property
    def completed(self) -> bool:
        return bool(self.entries) and self.entries[-1].outcome == COMPLETE

    def consecutive_fails(self) -> int:
        n = 0
        for entry in reversed(self.entries):
            if entry.outcome != FAIL:
                break
            n += 1
        return n

    def to_payload(self) -> list[dict[str, Any]]:
        return [{"event": e.event.to_dict() if e.event else None, "outcome": e.outcome} for e in self.entries]


@dataclass(frozen=True)
class StepEvidence:
    pre_summary: str
    event_summary: str
    post_summary: str
    state_diff_summary: str
    outcome: str

    FIELDS = ("pre_summary", "event_summary", "post_summary", "state_diff_summary", "outcome")

    def to_dict(self) -> dict[str, str]:
        return {f: getattr(self, f) for f in self.FIELDS}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> StepEvidence:
        return cls(*(d[f] for f in cls.FIELDS))


@dataclass(frozen=True)
class SummarizedTrace:
    hypothesis: FunctionalityHypothesis
    steps: tuple[StepEvidence, ...]
    status: str
    anchor: ReplayAnchor
    vocab: tuple[WidgetSignature, ...] = ()

    @property
    def trace_id(self) -> str:
        return self.hypothesis.hypothesis_id

    def to_dict(self) -> dict[str, Any]:
        return {
            "trace_id": self.trace_id,
            "hypothesis": self.hypothesis.to_dict(),
            "status": self.status,
            "steps": [s.to_dict() for s in self.steps],
            "anchor": self.anchor.to_dict(),
            "vocab": [v.to_dict() for v in self.vocab],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> SummarizedTrace:
        return cls(
            FunctionalityHypothesis.from_dict(d["hypothesis"]),
            tuple(StepEvidence.from_dict(s) for s in d["steps"]),
            d["status"],
            ReplayAnchor.from_dict(d["anchor"]),
            tuple(WidgetSignature.from_dict(v) for v in d.get("vocab", ())),
        )


@dataclass(frozen=True)
class ExplorationBudget:
    steps: int
    seconds: float | None = None


@dataclass
class ExplorationResult:
    evidence: list[SummarizedTrace]
    pool: HypothesisPool
    steps: int
    seen: list[UiContext]
    stats: dict[str, int]

    def manifest(self) -> dict[str, Any]:
        return {
            "steps": self.steps,
            "contexts_seen": len(self.seen),
            "evidence": [t.trace_id for t in self.evidence],
            **self.stats,
        }


# -- selection -------------------------------------------------------------------


def _words(text: str) -> set[str]:
    return set(re.findall(r"\w+", text.lower()))


def jaccard(a: str, b: str) -> Fraction:
    wa, wb = _words(a), _words(b)
    if not wa and not wb:
        return Fraction(1)
    return Fraction(len(wa & wb), len(wa | wb))


def novelty(description: str, executed: Sequence[str]) -> Fraction:
    if not executed:
        return Fraction(1)
    return 1 - max(jaccard(description, d) for d in executed)


def hypothesis_score(h: FunctionalityHypothesis, executed: Sequence[str], present: Iterable[WidgetSignature]) -> Fraction:
    executable = 1 if h.trigger in set(present) else 0
    return 2 * int(h.main) + 2 * novelty(h.description, executed) + executable


def select_hypothesis(
    candidates: Sequence[FunctionalityHypothesis], pool: HypothesisPool, state_context: UiContext | None = None
) -> FunctionalityHypothesis:
    if not candidates:
        raise ValueError("no candidates to select from")
    present = state_context.signature_set if state_context is not None else frozenset()
    best = None
    for h in sorted(candidates, key=lambda h: pool.order(h.hypothesis_id)):
        score = hypothesis_score(h, pool.executed, present)
        if best is None or score > best[0]:
            best = (score, h)
    return best[1]


# -- the exploration session -----------------------------------------------------


class Explorer:
    """One sequential exploration session over a live backend session."""

    def __init__(
        self,
        session: Session,
        oracle: Oracle,
        *,
        app_name: str,
        screens: Sequence[str],
        seed: int = 0,
        step_limit: int = STEP_LIMIT,
        random_steps: int = RANDOM_STEPS,
        corpus: tuple[str, ...] = DEFAULT_CORPUS,
    ):
        self.session = session
        self.oracle = oracle
        self.app_cues = {"name": app_name, "screens": list(screens)}
        self.seed = seed
        self.rng = random.Random(seed)
        self.step_limit = step_limit
        self.random_steps = random_steps
        self.corpus = corpus
        self.whitelist = session.static_text_whitelist()
        self.pool = HypothesisPool()
        self.seen: list[UiContext] = []
        self.evidence: list[SummarizedTrace] = []
        self.initial_screen = session.state.screen_id
        self.events: list[Event] = []
        self.screens: list[str] = []
        self.steps = 0
        self.stats = {"infer_calls": 0, "inferred": 0, "valid": 0, "executed": 0, "explored": 0, "failed": 0}

    # -- primitives ---------------------------------------------------------------

    def context(self, s: GuiState) -> UiContext:
        return ui_context(s, self.whitelist)

    def _perform(self, e: Event) -> GuiState:
        post = self.session.perform(e)
        self.events.append(e)
        self.screens.append(post.screen_id)
        return post

    def observe(self, s: GuiState) -> None:
        """Infer hypotheses on ``s`` if it shows unseen widget evidence."""
        c = self.context(s)
        if has_unseen_evidence(c, self.seen):
            self.seen.append(c)
            infer_hypotheses(s, self.app_cues, self.pool, self.oracle, self.whitelist, self.stats)

    def _wants_attention(self, s: GuiState) -> bool:
        c = self.context(s)
        return has_unseen_evidence(c, self.seen) or bool(self.pool.candidates(c))

    # -- main loop -----------------------------------------------------------------

    def run(self, budget: ExplorationBudget) -> ExplorationResult:
        deadline = time.monotonic() + budget.seconds if budget.seconds is not None else None

        def exhausted() -> bool:
            return self.steps >= budget.steps or (deadline is not None and time.monotonic() >= deadline)

        while not exhausted():
            s = self.session.state
            self.observe(s)
            c = self.context(s)
            cands = self.pool.candidates(c)
            if cands:
                h = select_hypothesis(cands, self.pool, c)
                self.evidence.append(self.execute(h, budget.steps - self.steps))
            else:
                left = budget.steps - self.steps
                self.random_explore(min(self.random_steps, left))
        return ExplorationResult(self.evidence, self.pool, self.steps, self.seen, dict(self.stats))

    def random_explore(self, max_steps: int) -> GuiState:
        return random_explore(
            self.session, self.rng, max_steps, stop=self._wants_attention, perform=self._perform_counted, corpus=self.corpus
        )

    def _perform_counted(self, e: Event) -> GuiState:
        self.steps += 1
        return self._perform(e)

    def execute(self, h: FunctionalityHypothesis, steps_left: int | None = None) -> SummarizedTrace:
        start = len(self.events)
        pre0 = self.session.state
        vocab = {signature(w, self.whitelist) for w in pre0.widgets}
        self.pool.executed.append(h.description)
        self.stats["executed"] += 1
        trace, history, steps = execute_hypothesis(
            h,
            self.session,
            self.oracle,
            self.step_limit if steps_left is None else min(self.step_limit, steps_left),
            perform=self._perform_counted,
            on_new_state=self.observe,
        )
        for st in trace.states:
            vocab.update(signature(w, self.whitelist) for w in st.widgets)
        status = EXPLORED if history.completed else FAILED
        h = self.pool.mark(h.hypothesis_id, status)
        self.stats[status] += 1
        anchor = ReplayAnchor(self.seed, tuple(self.events), tuple(self.screens), self.initial_screen, start)
        log.info("hypothesis %s %r: %s after %d events", h.hypothesis_id, h.description, status, len(trace.transitions))
        return SummarizedTrace(h, tuple(steps), status, anchor, tuple(sorted(vocab)))


def infer_hypotheses(
    s: GuiState,
    app_cues: Mapping[str, Any],
    pool: HypothesisPool,
    oracle: Oracle,
    whitelist: frozenset[str],
    stats: dict[str, int] | None = None,
) -> list[FunctionalityHypothesis]:
    stats = stats if stats is not None else {}
    stats["infer_calls"] = stats.get("infer_calls", 0) + 1
    req = OracleRequest(
        "infer_hypotheses", {"app": dict(app_cues), "state": state_listing(s), "memory": list(pool.executed)}
    )
    try:
        resp = oracle.complete(req)
    except MalformedOracleOutput as exc:
        log.warning("inference skipped on %s: %s", s.screen_id, exc)
        return []
    context = ui_context(s, whitelist)
    added = []
    for item in resp.result["hypotheses"]:
        stats["inferred"] = stats.get("inferred", 0) + 1
        w = s.widget(item["label"])
        if w is None:
            log.info("dropping ungrounded hypothesis %r (label %s)", item["description"], item["label"])
            continue
        stats["valid"] = stats.get("valid", 0) + 1
        h = pool.add(item["description"], signature(w, whitelist), context, bool(item.get("main", False)))
        if h is not None:
            added.append(h)
    return added


def judge_outcome(
    pre: GuiState, e: Event, post: GuiState, h: FunctionalityHypothesis, history: ExecutionHistory, oracle: Oracle
) -> str:
    payload = {
        "goal": h.description,
        "pre": state_listing(pre),
        "event": e.to_dict(),
        "post": state_listing(post),
        "diff": state_diff(pre, post),
        "history": history.to_payload(),
    }
    try:
        return oracle.complete(OracleRequest("judge_step", payload)).result["outcome"]
    except MalformedOracleOutput as exc:
        log.info("judge fell back to fail: %s", exc)
        return FAIL


def summarize_step(transition: Transition, h: FunctionalityHypothesis, outcome: str, oracle: Oracle) -> StepEvidence:
    diff = state_diff(transition.pre, transition.post)
    mech = mechanical_summary(transition.pre, transition.event, transition.post, diff)
    payload = {
        "goal": h.description,
        "pre": state_listing(transition.pre),
        "event": transition.event.to_dict(),
        "post": state_listing(transition.post),
        "diff": diff,
        "outcome": outcome,
        "mechanical": mech,
    }
    try:
        text = oracle.complete(OracleRequest("summarize_step", payload)).result
    except MalformedOracleOutput as exc:
        log.info("summary fell back to mechanical: %s", exc)
        text = mech
    return StepEvidence(
        text["pre_summary"], text["event_summary"], text["post_summary"], text["state_diff_summary"], outcome
    )


def plan_event(s: GuiState, h: FunctionalityHypothesis, history: ExecutionHistory, oracle: Oracle) -> Event | str:
    """Next planned event, or a string explaining why no event could be formed."""
    payload = {"goal": h.description, "state": state_listing(s), "history": history.to_payload()}
    try:
        plan = oracle.complete(OracleRequest("plan_event", payload)).result
    except MalformedOracleOutput as exc:
        return f"planner output unusable: {exc}"
    try:
        return Event(plan["event_type"], plan.get("label"), plan.get("data"))
    except (ValueError, TypeError) as exc:
        return f"planned event malformed: {exc}"


def execute_hypothesis(
    h: FunctionalityHypothesis,
    session: Session,
    oracle: Oracle,
    step_limit: int = STEP_LIMIT,
    *,
    perform: Callable[[Event], GuiState] | None = None,
    on_new_state: Callable[[GuiState], None] | None = None,
) -> tuple[Trace, ExecutionHistory, list[StepEvidence]]:
    """Plan, guard, perform and judge until complete, the step limit, or repeated failure."""
    perform = perform or session.perform
    history = ExecutionHistory()
    state = session.state
    trace = Trace(state)
    steps: list[StepEvidence] = []
    for _ in range(step_limit):
        planned = plan_event(state, h, history, oracle)
        if isinstance(planned, str):
            history.append(HistoryEntry(None, FAIL, False, planned))
        elif not guard(planned, state):
            log.debug("guard rejected %s on %s", planned, state.screen_id)
            history.append(HistoryEntry(planned, FAIL, False, "rejected by guard"))
        else:
            try:
                post = perform(planned)
            except RejectedEvent as exc:
                history.append(HistoryEntry(planned, FAIL, False, f"backend rejected: {exc}"))
            else:
                if on_new_state is not None:
                    on_new_state(post)
                outcome = judge_outcome(state, planned, post, h, history, oracle)
                t = Transition(state, planned, post)
                trace = trace.extend(t)
                steps.append(summarize_step(t, h, outcome, oracle))
                history.append(HistoryEntry(planned, outcome, True))
                state = post
                if outcome == COMPLETE:
                    break
        if history.consecutive_fails() >= MAX_CONSECUTIVE_FAILS:
            break
    return trace, history, steps


def random_explore(
    session: Session,
    rng: random.Random,
    max_steps: int = RANDOM_STEPS,
    *,
    stop: Callable[[GuiState], bool] | None = None,
    perform: Callable[[Event], GuiState] | None = None,
    corpus: tuple[str, ...] = DEFAULT_CORPUS,
) -> GuiState:
    """Seeded uniform random walk over enabled events until ``stop`` fires."""
    perform = perform or session.perform
    state = session.state
    for _ in range(max_steps):
        state = perform(rng.choice(enabled_events(state, corpus)))
        if stop is not None and stop(state):
            break
    return state


def run_exploration(
    backend,
    oracle: Oracle,
    budget: ExplorationBudget | int,
    seed: int = 0,
    **options: Any,
) -> ExplorationResult:
    if isinstance(budget, int):
        budget = ExplorationBudget(budget)
    session = backend.launch(seed)
    model = getattr(backend, "model", None)
    app_name = options.pop("app_name", getattr(model, "app_name", "app"))
    screens = options.pop("screens", list(model.screen_ids) if model is not None else [session.state.screen_id])
    explorer = Explorer(session, oracle, app_name=app_name, screens=screens, seed=seed, **options)
    return explorer.run(budget)
