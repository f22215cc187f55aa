"""Property synthesis: evidence to natural-language spec to executable property.

Both oracle steps are gated mechanically. Translation must only use selectors
grounded in the evidence vocabulary, and the resulting property must hold
when replayed on the very trace it was synthesized from.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .backend.simulator import Backend
from .explorer import EXPLORED, SummarizedTrace
from .gui import WidgetSignature
from .jsonio import write_json
from .oracle import MalformedOracleOutput, Oracle, OracleRequest
from .properties import (
    VIOLATED,
    Property,
    PropertyFormatError,
    Selector,
    Step,
    check_on_trace,
    parse_predicate,
)
from .replay import AnchorStale

log = logging.getLogger(__name__)

# constraints every drafted spec is asked to respect
CONSTRAINTS = (
    "The precondition must rest on UI evidence visible in the starting state and be specific "
    "enough that it does not fire on unrelated screens.",
    "The postcondition must be checkable directly from what the GUI shows right after the interaction.",
    "Leave out details that only held for this particular run, such as user-typed text or list positions.",
)

ACCEPTED, REJECTED, UNSYNTHESIZED = "accepted", "rejected", "unsynthesized"
Q_FAILS, P_NEVER_FIRES, ANCHOR_STALE, I_ABORTS = "Q-fails-on-source", "P-never-fires", "anchor-stale", "I-aborts-on-source"


class SynthesisSkip(Exception):
    """The oracle could not draft a usable spec for this evidence."""


class TranslationFailure(Exception):
    pass


@dataclass(frozen=True)
class NlPropertySpec:
    precondition_text: str
    interaction_text: str
    postcondition_text: str
    cited_steps: tuple[int, ...] = ()
    trace_id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "cited_steps", tuple(self.cited_steps))
        for name in ("precondition_text", "interaction_text", "postcondition_text"):
            if not getattr(self, name).strip():
                raise ValueError(f"{name} is empty")

    def as_payload(self) -> dict[str, str]:
        return {
            "precondition": self.precondition_text,
            "interaction": self.interaction_text,
            "postcondition": self.postcondition_text,
        }

    def to_dict(self) -> dict[str, Any]:
        return {**self.as_payload(), "cited_steps": list(self.cited_steps), "trace_id": self.trace_id}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> NlPropertySpec:
        return cls(d["precondition"], d["interaction"], d["postcondition"], tuple(d.get("cited_steps", ())), d.get("trace_id", ""))


def draft_nl_spec(evidence: SummarizedTrace, oracle: Oracle) -> NlPropertySpec:
    if evidence.status != EXPLORED:
        raise ValueError(f"evidence {evidence.trace_id} did not complete; nothing to draft from")
    payload = {
        "hypothesis": {"description": evidence.hypothesis.description, "main": evidence.hypothesis.main},
        "evidence": {"steps": [s.to_dict() for s in evidence.steps], "status": evidence.status},
        "constraints": list(CONSTRAINTS),
    }
    try:
        r = oracle.complete(OracleRequest("draft_property", payload)).result
    except MalformedOracleOutput as exc:
        raise SynthesisSkip(str(exc)) from None
    bad = [i for i in r["cited_steps"] if not 0 <= i < len(evidence.steps)]
    if bad:
        raise SynthesisSkip(f"spec cites steps {bad} outside the evidence")
    try:
        return NlPropertySpec(r["precondition"], r["interaction"], r["postcondition"], tuple(r["cited_steps"]), evidence.trace_id)
    except ValueError as exc:
        raise SynthesisSkip(str(exc)) from None


def selector_grounded(sel: Selector, vocab: Iterable[WidgetSignature]) -> bool:
    """True iff ``sel`` avoids labels and matches at least one vocabulary signature."""
    if sel.label is not None:
        return False
    for sig in vocab:
        if sel.widget_kind is not None and sel.widget_kind != sig.widget_kind:
            continue
        if sel.resource_id is not None and sel.resource_id != sig.resource_id:
            continue
        if sel.description is not None and sel.description != sig.description:
            continue
        if sel.text is not None and sel.text != sig.filtered_text:
            continue
        if sel.text_regex is not None and re.fullmatch(sel.text_regex, sig.filtered_text) is None:
            continue
        return True
    return False


def ungrounded_selectors(prop: Property, vocab: Sequence[WidgetSignature]) -> list[str]:
    return sorted({str(s) for s in prop.selectors() if not selector_grounded(s, vocab)})


def build_property(
    result: Mapping[str, Any], property_id: str, description: str, provenance: Mapping[str, Any], version: int = 1
) -> Property:
    return Property(
        property_id=property_id,
        precondition=parse_predicate(result["precondition"]),
        interaction=tuple(Step.from_dict(s) for s in result["interaction"]),
        postcondition=parse_predicate(result["postcondition"]),
        description=description,
        version=version,
        provenance=dict(provenance),
    )


def translate(
    spec: NlPropertySpec,
    vocab: Sequence[WidgetSignature],
    oracle: Oracle,
    *,
    screens: Sequence[str] = (),
    property_id: str = "property",
    description: str = "",
    provenance: Mapping[str, Any] | None = None,
) -> Property:
    if not vocab:
        raise TranslationFailure("empty vocabulary: nothing to ground selectors in")
    payload: dict[str, Any] = {
        "spec": spec.as_payload(),
        "vocab": [v.to_dict() for v in vocab],
        "screens": list(screens),
    }
    provenance = dict(provenance or {}) | {"nl_spec": spec.to_dict()}
    problem = ""
    for attempt in range(2):
        if attempt:
            payload = payload | {"feedback": problem}
        try:
            result = oracle.complete(OracleRequest("translate_property", payload)).result
            prop = build_property(result, property_id, description or spec.interaction_text, provenance)
        except (MalformedOracleOutput, PropertyFormatError) as exc:
            problem = f"translation unusable: {exc}"
            continue
        missing = ungrounded_selectors(prop, vocab)
        if not missing:
            return prop
        problem = f"selectors outside the vocabulary: {missing}"
        log.info("translation of %s rejected: %s", spec.trace_id, problem)
    raise TranslationFailure(problem)


@dataclass(frozen=True)
class GateResult:
    accepted: bool
    reason: str | None = None


def source_trace_gate(prop: Property, evidence: SummarizedTrace, backend: Backend) -> GateResult:
    try:
        result = check_on_trace(prop, evidence.anchor, backend)
    except AnchorStale:
        return GateResult(False, ANCHOR_STALE)
    if result is None:
        return GateResult(False, P_NEVER_FIRES)
    if result.verdict == VIOLATED:
        return GateResult(False, Q_FAILS)
    if result.abort is not None:
        return GateResult(False, I_ABORTS)
    return GateResult(True)


@dataclass
class SynthesisEntry:
    trace_id: str
    status: str
    reason: str | None = None
    spec: NlPropertySpec | None = None
    prop: Property | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "trace_id": self.trace_id,
            "status": self.status,
            "reason": self.reason,
            "property_id": self.prop.property_id if self.prop else None,
        }


@dataclass
class SynthesisReport:
    entries: list[SynthesisEntry] = field(default_factory=list)

    @property
    def accepted(self) -> list[Property]:
        return [e.prop for e in self.entries if e.status == ACCEPTED and e.prop is not None]

    @property
    def rejected(self) -> list[SynthesisEntry]:
        return [e for e in self.entries if e.status == REJECTED]

    def to_dict(self) -> dict[str, Any]:
        counts: dict[str, int] = {}
        for e in self.entries:
            counts[e.status] = counts.get(e.status, 0) + 1
        return {"counts": counts, "entries": [e.to_dict() for e in self.entries]}

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        for e in self.entries:
            if e.prop is None:
                continue
            sub = "properties" if e.status == ACCEPTED else "rejected"
            doc = e.prop.to_dict()
            if e.status != ACCEPTED:
                doc["rejection"] = e.reason
            write_json(out / sub / f"{e.prop.property_id}.json", doc)
        write_json(out / "synthesis_report.json", self.to_dict())


def slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_") or "property"


def synthesize(
    evidence: Sequence[SummarizedTrace],
    oracle: Oracle,
    backend: Backend,
    *,
    app_name: str = "app",
    screens: Sequence[str] = (),
    jobs: int = 1,
) -> SynthesisReport:
    """Draft, translate and gate one property per completed evidence trace."""
    report = SynthesisReport()
    used: set[str] = set()
    # oracle calls stay sequential so transcripts keep a stable order
    for ev in evidence:
        if ev.status != EXPLORED:
            continue
        try:
            spec = draft_nl_spec(ev, oracle)
        except SynthesisSkip as exc:
            report.entries.append(SynthesisEntry(ev.trace_id, UNSYNTHESIZED, str(exc)))
            continue
        pid = f"{app_name}.{slug(ev.hypothesis.description)}"
        if pid in used:
            pid = f"{pid}.{ev.trace_id}"
        used.add(pid)
        try:
            prop = translate(
                spec,
                ev.vocab,
                oracle,
                screens=screens,
                property_id=pid,
                description=ev.hypothesis.description,
                provenance={"evidence": ev.trace_id},
            )
        except TranslationFailure as exc:
            report.entries.append(SynthesisEntry(ev.trace_id, UNSYNTHESIZED, f"translation-failure: {exc}", spec))
            continue
        report.entries.append(SynthesisEntry(ev.trace_id, ACCEPTED, None, spec, prop))

    by_id = {ev.trace_id: ev for ev in evidence}
    pending = [e for e in report.entries if e.prop is not None]

    def gate(entry: SynthesisEntry) -> GateResult:
        return source_trace_gate(entry.prop, by_id[entry.trace_id], backend)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(gate, pending))
    for entry, res in zip(pending, results):
        if not res.accepted:
            entry.status, entry.reason = REJECTED, res.reason
            log.info("property %s rejected: %s", entry.prop.property_id, res.reason)
    return report
