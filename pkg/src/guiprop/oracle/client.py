"""Oracle requests, responses, validation and transcripts."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from ..jsonio import canonical_dumps, digest
from .schemas import REQUEST_SCHEMAS, RESPONSE_SCHEMAS, TASK_KINDS

log = logging.getLogger(__name__)


class OracleError(Exception):
    pass


class MalformedOracleOutput(OracleError):
    """The oracle's answer never validated against the task's response schema."""


class TranscriptMiss(OracleError):
    """A replayed transcript holds no response for this request."""


@dataclass(frozen=True)
class OracleRequest:
    task_kind: str
    payload: Mapping[str, Any]
    attachments: tuple[bytes, ...] = ()

    def __post_init__(self) -> None:
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.task_kind!r}")
        errors = schema_errors(REQUEST_SCHEMAS[self.task_kind], self.payload)
        if errors:
            raise ValueError(f"{self.task_kind} request payload invalid: {errors}")

    @property
    def digest(self) -> str:
        return digest(
            {
                "task_kind": self.task_kind,
                "payload": self.payload,
                "attachments": [hashlib.sha256(a).hexdigest() for a in self.attachments],
            }
        )


@dataclass(frozen=True)
class OracleResponse:
    task_kind: str
    result: Mapping[str, Any]
    raw: str = ""


def schema_errors(schema: Mapping[str, Any], doc: Any) -> str | None:
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(schema).iter_errors(doc))
    if err is None:
        return None
    where = "/".join(map(str, err.absolute_path)) or "<root>"
    return f"{err.message} (at {where})"


def response_errors(task_kind: str, result: Any) -> str | None:
    return schema_errors(RESPONSE_SCHEMAS[task_kind], result)


def parse_json_reply(raw: str) -> Any:
    """Extract a JSON object from free text, tolerating code fences and chatter."""
    text = raw.strip()
    if text.startswith("```"):
        text = text.split("\n", 1)[1] if "\n" in text else ""
        text = text.rsplit("```", 1)[0]
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    start, end = text.find("{"), text.rfind("}")
    if start == -1 or end <= start:
        raise ValueError("no JSON object in reply")
    return json.loads(text[start : end + 1])


class Oracle:
    """Base class; subclasses implement :meth:`_complete`.

    ``complete`` guarantees every returned result validated against the
    task's response schema, so callers never look at raw text.
    """

    name = "oracle"

    def __init__(self) -> None:
        self.calls: Counter[str] = Counter()

    def complete(self, req: OracleRequest) -> OracleResponse:
        self.calls[req.task_kind] += 1
        resp = self._complete(req)
        errors = response_errors(req.task_kind, resp.result)
        if errors:
            raise MalformedOracleOutput(f"{self.name}: {req.task_kind} response invalid: {errors}")
        return resp

    def _complete(self, req: OracleRequest) -> OracleResponse:
        raise NotImplementedError

    def describe(self) -> str:
        return self.name


@dataclass
class TranscriptRecord:
    digest: str
    task_kind: str
    result: dict[str, Any] | None
    raw: str = ""
    error: str | None = None


@dataclass
class Transcript:
    records: list[TranscriptRecord] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [canonical_dumps({"type": "meta", **self.metadata})]
        for r in self.records:
            lines.append(
                canonical_dumps(
                    {
                        "type": "record",
                        "digest": r.digest,
                        "task_kind": r.task_kind,
                        "result": r.result,
                        "raw": r.raw,
                        "error": r.error,
                    }
                )
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Transcript:
        out = cls()
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            doc = json.loads(line)
            if doc.get("type") == "meta":
                out.metadata = {k: v for k, v in doc.items() if k != "type"}
            elif doc.get("type") == "record":
                out.records.append(
                    TranscriptRecord(doc["digest"], doc["task_kind"], doc.get("result"), doc.get("raw", ""), doc.get("error"))
                )
            else:
                raise ValueError(f"{path}:{n}: unknown transcript line type")
        return out


class RecordingOracle(Oracle):
    """Wraps another oracle and captures every (digest, response) pair."""

    def __init__(self, inner: Oracle, metadata: Mapping[str, Any] | None = None):
        super().__init__()
        self.inner = inner
        self.name = f"record({inner.name})"
        self.transcript = Transcript(
            metadata={"backend": inner.describe(), "created": time.strftime("%Y-%m-%dT%H:%M:%S"), **(metadata or {})}
        )

    def _complete(self, req: OracleRequest) -> OracleResponse:
        try:
            resp = self.inner.complete(req)
        except MalformedOracleOutput as exc:
            self.transcript.records.append(TranscriptRecord(req.digest, req.task_kind, None, error=str(exc)))
            raise
        self.transcript.records.append(TranscriptRecord(req.digest, req.task_kind, dict(resp.result), resp.raw))
        return resp

    def describe(self) -> str:
        return self.inner.describe()


class ReplayOracle(Oracle):
    """Serves only the responses captured in a transcript."""

    def __init__(self, transcript: Transcript):
        super().__init__()
        self.name = "replay"
        self._by_digest: dict[str, TranscriptRecord] = {}
        for r in transcript.records:
            self._by_digest.setdefault(r.digest, r)

    def _complete(self, req: OracleRequest) -> OracleResponse:
        rec = self._by_digest.get(req.digest)
        if rec is None:
            raise TranscriptMiss(f"no recorded response for {req.task_kind} request {req.digest[:12]}")
        if rec.result is None:
            raise MalformedOracleOutput(rec.error or "recorded call was malformed")
        return OracleResponse(req.task_kind, rec.result, rec.raw)


def record(inner: Oracle, metadata: Mapping[str, Any] | None = None) -> RecordingOracle:
    return RecordingOracle(inner, metadata)


def replay(transcript: Transcript | str | Path) -> ReplayOracle:
    if not isinstance(transcript, Transcript):
        transcript = Transcript.load(transcript)
    return ReplayOracle(transcript)
