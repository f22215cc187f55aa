"""Triage and repair of properties that produced spurious violations.

A violation is diagnosed against the property's source evidence. When the
oracle blames one component of the property, it proposes a revision that
must change exactly that component, still hold on the source trace, and no
longer fail on the reported execution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .backend.simulator import Backend
from .explorer import SummarizedTrace, state_listing
from .gui import WidgetSignature, signature
from .oracle import MalformedOracleOutput, Oracle, OracleRequest
from .properties import SATISFIED, VIOLATED, Property, PropertyFormatError, check_on_trace
from .replay import AnchorStale
from .runner import ReplayDivergence, ViolationReport, replay
from .synthesis import build_property, ungrounded_selectors

log = logging.getLogger(__name__)

IMPRECISE = {
    "imprecise_precondition": "P",
    "imprecise_interaction": "I",
    "imprecise_postcondition": "Q",
}
LIKELY_BUG, AUTOMATION_FAILURE = "likely_bug", "automation_failure"

SOURCE_TRACE_BROKEN, STILL_VIOLATED, NON_MINIMAL = "source-trace-broken", "still-violated", "non-minimal"


class RefinementFailure(Exception):
    pass


@dataclass(frozen=True)
class Diagnosis:
    verdict: str
    rationale: str
    cited: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.verdict not in (*IMPRECISE, LIKELY_BUG, AUTOMATION_FAILURE):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        object.__setattr__(self, "cited", tuple(self.cited))

    @property
    def component(self) -> str | None:
        return IMPRECISE.get(self.verdict)

    def to_dict(self) -> dict[str, Any]:
        return {"verdict": self.verdict, "rationale": self.rationale, "cited": list(self.cited)}


def _selector_strings(prop: Property) -> set[str]:
    out = set()
    for s in prop.selectors():
        for v in (s.resource_id, s.text, s.description):
            if v:
                out.add(v)
    return out


def evidence_payload(prop: Property, evidence: SummarizedTrace) -> dict[str, Any]:
    """Whole evidence trace, with the steps that mention the property's widgets highlighted."""
    needles = _selector_strings(prop)
    highlighted = [
        i
        for i, st in enumerate(evidence.steps)
        if any(n in f"{st.pre_summary} {st.event_summary} {st.post_summary} {st.state_diff_summary}" for n in needles)
    ]
    return {
        "trace_id": evidence.trace_id,
        "hypothesis": evidence.hypothesis.description,
        "status": evidence.status,
        "steps": [s.to_dict() for s in evidence.steps],
        "highlighted_steps": highlighted,
    }


def report_payload(report: ViolationReport) -> dict[str, Any]:
    return {
        "report_id": report.report_id,
        "prefix_length": len(report.prefix),
        "pre": state_listing(report.pre),
        "events": [e.to_dict() for e in report.interaction_events],
        "post": state_listing(report.post),
        "failed_atom": report.failed_atom,
    }


def _property_payload(prop: Property) -> dict[str, Any]:
    d = prop.to_dict()
    d.pop("provenance", None)
    return d


def diagnose(prop: Property, evidence: SummarizedTrace, report: ViolationReport, oracle: Oracle) -> Diagnosis:
    payload = {
        "property": _property_payload(prop),
        "evidence": evidence_payload(prop, evidence),
        "report": report_payload(report),
    }
    try:
        r = oracle.complete(OracleRequest("diagnose_violation", payload)).result
    except MalformedOracleOutput as exc:
        log.warning("diagnosis of %s fell back to automation_failure: %s", report.report_id, exc)
        return Diagnosis(AUTOMATION_FAILURE, f"oracle output unusable: {exc}")
    return Diagnosis(r["verdict"], r["rationale"], tuple(r.get("cited", ())))


def changed_components(old: Property, new: Property) -> set[str]:
    a, b = old.components(), new.components()
    return {k for k in a if a[k] != b[k]}


def refinement_vocab(
    evidence: SummarizedTrace, report: ViolationReport, extra: Iterable[WidgetSignature] = (), whitelist: Iterable[str] = ()
) -> list[WidgetSignature]:
    wl = frozenset(whitelist)
    vocab = set(evidence.vocab) | set(extra)
    for s in (report.pre, report.post):
        vocab.update(signature(w, wl) for w in s.widgets)
    return sorted(vocab)


def refine(
    prop: Property,
    d: Diagnosis,
    evidence: SummarizedTrace,
    report: ViolationReport,
    oracle: Oracle,
    vocab: Sequence[WidgetSignature],
) -> Property:
    if d.component is None:
        raise ValueError(f"verdict {d.verdict} does not call for refinement")
    payload: dict[str, Any] = {
        "property": _property_payload(prop),
        "diagnosis": d.to_dict(),
        "evidence": evidence_payload(prop, evidence),
        "report": report_payload(report),
        "vocab": [v.to_dict() for v in vocab],
    }
    provenance = dict(prop.provenance) | {"refined_from": prop.version, "diagnosis": d.verdict}
    problem = ""
    for attempt in range(2):
        if attempt:
            payload = payload | {"feedback": problem}
        try:
            r = oracle.complete(OracleRequest("refine_property", payload)).result
            new = build_property(r, prop.property_id, prop.description, provenance, prop.version + 1)
        except (MalformedOracleOutput, PropertyFormatError) as exc:
            problem = f"revision unusable: {exc}"
            continue
        changed = changed_components(prop, new)
        if changed != {d.component} or r["component"] != d.component:
            problem = f"revision must change only {d.component}, it changed {sorted(changed) or 'nothing'}"
        else:
            missing = ungrounded_selectors(new, vocab)
            if not missing:
                return new
            problem = f"selectors outside the vocabulary: {missing}"
        log.info("refinement of %s rejected: %s", prop.property_id, problem)
    raise RefinementFailure(problem)


@dataclass(frozen=True)
class Verification:
    accepted: bool
    reason: str | None = None


def verify_refinement(
    old: Property, new: Property, evidence: SummarizedTrace, report: ViolationReport, backend: Backend
) -> Verification:
    if len(changed_components(old, new)) != 1:
        return Verification(False, NON_MINIMAL)
    try:
        source = check_on_trace(new, evidence.anchor, backend)
    except AnchorStale:
        return Verification(False, "anchor-stale")
    if source is None or source.verdict != SATISFIED:
        return Verification(False, SOURCE_TRACE_BROKEN)
    try:
        again = replay(report, backend, prop=new)
    except ReplayDivergence:
        return Verification(False, "report-divergence")
    if again.verdict == VIOLATED:
        return Verification(False, STILL_VIOLATED)
    return Verification(True)


REFINED, UNREFINED, BUGS_FOUND, NOTHING_TO_DO = "refined", "unrefined", "likely_bug", "nothing-to-refine"


@dataclass
class RefinementOutcome:
    final: Property
    versions: list[Property]
    status: str
    audit: list[dict[str, Any]] = field(default_factory=list)
    bugs: list[str] = field(default_factory=list)
    automation_failures: list[str] = field(default_factory=list)
    resolved: list[str] = field(default_factory=list)
    unresolved: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "property_id": self.final.property_id,
            "final_version": self.final.version,
            "status": self.status,
            "bugs": self.bugs,
            "automation_failures": self.automation_failures,
            "resolved": self.resolved,
            "unresolved": self.unresolved,
            "audit": self.audit,
        }


def _still_violated(prop: Property, report: ViolationReport, backend: Backend) -> ViolationReport | None:
    """The report re-checked under ``prop``, or None when it no longer fails."""
    if prop is report.prop:
        return report
    try:
        res = replay(report, backend, prop=prop)
    except ReplayDivergence:
        return None
    if res.verdict != VIOLATED:
        return None
    return ViolationReport(
        report.report_id, prop, report.seed, report.prefix, report.prefix_screens, report.initial_screen,
        res.events, res.pre, res.post, res.failed_atom, report.timestamp,
    )


def refinement_loop(
    prop: Property,
    evidence: SummarizedTrace,
    reports: Sequence[ViolationReport],
    backend: Backend,
    oracle: Oracle,
    max_rounds: int = 2,
    extra_vocab: Iterable[WidgetSignature] = (),
) -> RefinementOutcome:
    """Diagnose, refine and verify until every report is explained or rounds run out.

    A round is one refinement attempt. Reports diagnosed as likely bugs or
    automation failures are set aside without spending a round, and never
    refined: the property keeps flagging them.
    """
    extra = tuple(extra_vocab)
    whitelist = backend.static_text_whitelist()
    current = prop
    out = RefinementOutcome(prop, [prop], UNREFINED)
    if max_rounds <= 0:
        out.unresolved = [r.report_id for r in reports]
        return out
    pending = list(reports)
    rounds = 0
    accepted_any = False
    while pending and rounds < max_rounds:
        report = _still_violated(current, pending[0], backend)
        if report is None:
            out.resolved.append(pending.pop(0).report_id)
            continue
        d = diagnose(current, evidence, report, oracle)
        entry: dict[str, Any] = {"report_id": report.report_id, "version": current.version, **d.to_dict()}
        out.audit.append(entry)
        if d.component is None:
            (out.bugs if d.verdict == LIKELY_BUG else out.automation_failures).append(pending.pop(0).report_id)
            continue
        rounds += 1
        entry["round"] = rounds
        vocab = refinement_vocab(evidence, report, extra, whitelist)
        try:
            new = refine(current, d, evidence, report, oracle, vocab)
        except RefinementFailure as exc:
            entry["result"] = f"refinement-failure: {exc}"
            continue
        v = verify_refinement(current, new, evidence, report, backend)
        entry["diff"] = {k: {"old": current.components()[k], "new": new.components()[k]} for k in changed_components(current, new)}
        entry["result"] = "accepted" if v.accepted else f"rejected: {v.reason}"
        if v.accepted:
            current = new
            out.versions.append(new)
            accepted_any = True
            log.info("%s refined to version %d (%s)", new.property_id, new.version, d.component)
    out.final = current
    still = []
    for r in pending:
        if _still_violated(current, r, backend) is None:
            out.resolved.append(r.report_id)
        else:
            still.append(r)
    pending = still
    out.unresolved = [r.report_id for r in pending]
    if accepted_any and not pending:
        out.status = REFINED
    elif not accepted_any and not pending:
        if out.bugs:
            out.status = BUGS_FOUND
        elif out.automation_failures:
            out.status = AUTOMATION_FAILURE
        else:
            out.status = NOTHING_TO_DO
    return out


def summary_table(outcomes: Sequence[RefinementOutcome]) -> dict[str, Any]:
    """Counts per property: imprecise diagnoses, accepted refinements, and the component each touched."""
    rows = []
    for o in outcomes:
        imprecise = [a for a in o.audit if a["verdict"] in IMPRECISE]
        accepted = [a for a in imprecise if a.get("result") == "accepted"]
        comps = {c: sum(1 for a in accepted if IMPRECISE[a["verdict"]] == c) for c in ("P", "I", "Q")}
        rows.append({"property_id": o.final.property_id, "imprecise": len(imprecise), "successes": len(accepted), **comps})
    total = {k: sum(r[k] for r in rows) for k in ("imprecise", "successes", "P", "I", "Q")}
    return {"rows": rows, "total": total}
