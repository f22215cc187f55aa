"""Randomized property-based testing over a GUI backend.

The runner random-walks the app and, whenever some property's precondition
holds, flips a seeded coin to decide whether to check one of them. Every
violation is written as a self-contained report that replays from launch.
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .backend.simulator import Backend
from .gui import DEFAULT_CORPUS, Event, GuiState, WidgetSignature, enabled_events, signature
from .jsonio import write_json
from .properties import INAPPLICABLE, SATISFIED, VIOLATED, CheckResult, Property, check_property
from .replay import AnchorStale, replay_events

log = logging.getLogger(__name__)


class ReplayDivergence(Exception):
    """Replaying a report did not retrace the recorded execution."""


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    max_events: int = 5000
    seconds: float | None = None
    p_check: float = 0.3
    reset_between_violations: bool = True
    corpus: tuple[str, ...] = DEFAULT_CORPUS

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_check <= 1.0:
            raise ValueError(f"p_check must lie in [0, 1], got {self.p_check}")
        if self.max_events < 0:
            raise ValueError("max_events must be non-negative")


@dataclass(frozen=True)
class ViolationReport:
    report_id: str
    prop: Property
    seed: int
    prefix: tuple[Event, ...]
    prefix_screens: tuple[str, ...]
    initial_screen: str
    interaction_events: tuple[Event, ...]
    pre: GuiState
    post: GuiState
    failed_atom: str
    timestamp: str = ""

    @property
    def property_id(self) -> str:
        return self.prop.property_id

    def to_dict(self) -> dict[str, Any]:
        return {
            "report_id": self.report_id,
            "property_id": self.prop.property_id,
            "version": self.prop.version,
            "property": self.prop.to_dict(),
            "seed": self.seed,
            "initial_screen": self.initial_screen,
            "prefix": [e.to_dict() for e in self.prefix],
            "prefix_screens": list(self.prefix_screens),
            "interaction_events": [e.to_dict() for e in self.interaction_events],
            "pre": self.pre.to_dict(),
            "post": self.post.to_dict(),
            "failed_atom": self.failed_atom,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ViolationReport:
        return cls(
            report_id=d["report_id"],
            prop=Property.from_dict(d["property"]),
            seed=d["seed"],
            prefix=tuple(Event.from_dict(e) for e in d["prefix"]),
            prefix_screens=tuple(d["prefix_screens"]),
            initial_screen=d["initial_screen"],
            interaction_events=tuple(Event.from_dict(e) for e in d["interaction_events"]),
            pre=GuiState.from_dict(d["pre"]),
            post=GuiState.from_dict(d["post"]),
            failed_atom=d["failed_atom"],
            timestamp=d.get("timestamp", ""),
        )


@dataclass
class PropertyStats:
    applicable: int = 0
    checked: int = 0
    satisfied: int = 0
    violated: int = 0
    inapplicable_aborts: int = 0

    def to_dict(self) -> dict[str, int]:
        return dict(vars(self))


@dataclass
class RunStats:
    events: int = 0
    checks: int = 0
    resets: int = 0
    per_property: dict[str, PropertyStats] = field(default_factory=dict)
    vocab: set[WidgetSignature] = field(default_factory=set)

    @property
    def dead_preconditions(self) -> list[str]:
        return sorted(pid for pid, s in self.per_property.items() if s.applicable == 0)

    @property
    def violations(self) -> int:
        return sum(s.violated for s in self.per_property.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "events": self.events,
            "checks": self.checks,
            "resets": self.resets,
            "violations": self.violations,
            "dead_preconditions": self.dead_preconditions,
            "per_property": {pid: s.to_dict() for pid, s in sorted(self.per_property.items())},
            "vocab": [v.to_dict() for v in sorted(self.vocab)],
        }

    def table(self) -> str:
        cols = ("applicable", "checked", "satisfied", "violated", "inapplicable_aborts")
        width = max([len("property")] + [len(p) for p in self.per_property])
        lines = ["property".ljust(width) + "  " + "  ".join(cols)]
        for pid, s in sorted(self.per_property.items()):
            flag = "  (dead precondition)" if s.applicable == 0 else ""
            cells = "  ".join(str(getattr(s, c)).rjust(len(c)) for c in cols)
            lines.append(pid.ljust(width) + "  " + cells + flag)
        lines.append(f"events={self.events} checks={self.checks} violations={self.violations} resets={self.resets}")
        return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    reports: list[ViolationReport]
    stats: RunStats


class _Recorder:
    """Session proxy that logs every performed event and the screen it reached."""

    def __init__(self, inner):
        self.inner = inner
        self.events: list[Event] = []
        self.screens: list[str] = []

    @property
    def state(self) -> GuiState:
        return self.inner.state

    def perform(self, e: Event) -> GuiState:
        post = self.inner.perform(e)
        self.events.append(e)
        self.screens.append(post.screen_id)
        return post

    def settle(self) -> None:
        self.inner.settle()

    def static_text_whitelist(self) -> frozenset[str]:
        return self.inner.static_text_whitelist()

    def reset(self) -> None:
        self.inner.reset()
        self.events.clear()
        self.screens.clear()


def run(config: RunConfig, backend: Backend, properties: Sequence[Property]) -> RunResult:
    if not properties:
        raise ValueError("the runner needs at least one property")
    ids = [p.property_id for p in properties]
    if len(set(ids)) != len(ids):
        raise ValueError("property ids must be unique within a run")
    session = _Recorder(backend.launch(config.seed))
    whitelist = backend.static_text_whitelist()
    initial_screen = session.state.screen_id
    rng = random.Random(config.seed)
    stats = RunStats(per_property={pid: PropertyStats() for pid in ids})
    reports: list[ViolationReport] = []
    deadline = time.monotonic() + config.seconds if config.seconds is not None else None
    def observe(s: GuiState) -> None:
        stats.vocab.update(signature(w, whitelist) for w in s.widgets)

    while stats.events < config.max_events:
        if deadline is not None and time.monotonic() >= deadline:
            break
        state = session.state
        observe(state)
        applicable = [p for p in properties if p.precondition.holds(state)]
        for p in applicable:
            stats.per_property[p.property_id].applicable += 1
        if applicable and rng.random() < config.p_check:
            prop = applicable[rng.randrange(len(applicable))]
            ps = stats.per_property[prop.property_id]
            ps.checked += 1
            stats.checks += 1
            prefix, screens = tuple(session.events), tuple(session.screens)
            result = check_property(prop, session, config.corpus)
            stats.events += len(result.events)
            observe(session.state)
            if result.verdict == VIOLATED:
                ps.violated += 1
                reports.append(
                    ViolationReport(
                        report_id=f"{len(reports) + 1:04d}",
                        prop=prop,
                        seed=config.seed,
                        prefix=prefix,
                        prefix_screens=screens,
                        initial_screen=initial_screen,
                        interaction_events=result.events,
                        pre=result.pre,
                        post=result.post,
                        failed_atom=result.failed_atom,
                        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"),
                    )
                )
                log.info("violation %d of %s after %d events", len(reports), prop.property_id, stats.events)
                if config.reset_between_violations:
                    session.reset()
                    stats.resets += 1
                continue
            if result.verdict == SATISFIED:
                ps.satisfied += 1
            elif result.abort is not None:
                ps.inapplicable_aborts += 1
            if result.events:
                continue
            # nothing moved; take a random step so the loop always progresses
        session.perform(rng.choice(enabled_events(state, config.corpus)))
        stats.events += 1
    return RunResult(reports, stats)


def replay(
    report: ViolationReport, backend: Backend, prop: Property | None = None, corpus: Sequence[str] = DEFAULT_CORPUS
) -> CheckResult:
    """Re-run a report from launch and re-check its property.

    Raises :class:`ReplayDivergence` when the prefix no longer retraces the
    recorded screens, or when the interaction performs different events.
    """
    prop = prop or report.prop
    session = backend.launch(report.seed)
    if session.state.screen_id != report.initial_screen:
        raise ReplayDivergence(f"launch reached {session.state.screen_id!r}, expected {report.initial_screen!r}")
    try:
        replay_events(session, report.prefix, report.prefix_screens)
    except AnchorStale as exc:
        raise ReplayDivergence(str(exc)) from None
    result = check_property(prop, session, corpus)
    if prop is report.prop and result.verdict != INAPPLICABLE and result.events != report.interaction_events:
        raise ReplayDivergence("interaction performed different events than recorded")
    if prop is report.prop and result.verdict == INAPPLICABLE:
        raise ReplayDivergence(f"property no longer applies at the recorded state ({result.abort or 'precondition false'})")
    return result


def write_run(out_dir: str | Path, result: RunResult) -> None:
    out = Path(out_dir)
    for r in result.reports:
        write_json(out / "reports" / f"{r.report_id}-{r.property_id}.json", r.to_dict())
    write_json(out / "run_stats.json", result.stats.to_dict())
    tmp = out / ".run_stats.txt.tmp"
    tmp.write_text(result.stats.table(), encoding="utf-8")
    tmp.replace(out / "run_stats.txt")


def load_reports(path: str | Path) -> list[ViolationReport]:
    from .jsonio import read_json

    p = Path(path)
    files = sorted(p.glob("*.json")) if p.is_dir() else [p]
    return [ViolationReport.from_dict(read_json(f)) for f in files]
