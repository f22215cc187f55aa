"""Reasoning-oracle interface with scripted, HTTP and replay backends."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .client import (
    MalformedOracleOutput,
    Oracle,
    OracleError,
    OracleRequest,
    OracleResponse,
    RecordingOracle,
    ReplayOracle,
    Transcript,
    TranscriptMiss,
    record,
    replay,
)
from .schemas import OUTCOMES, TASK_KINDS, VERDICTS
from .scripted import FixtureError, ScriptedOracle


def resolve_fixture(path: str) -> Path:
    """Local paths win; otherwise fall back to fixtures shipped with the package."""
    p = Path(path)
    if p.exists():
        return p
    rel = path[len("fixtures/"):] if path.startswith("fixtures/") else path
    shipped = Path(str(resources.files("guiprop").joinpath("fixtures", rel)))
    if shipped.exists():
        return shipped
    raise FixtureError(f"oracle fixture {path!r} not found")


def make_oracle(spec: str, **http_options) -> Oracle:
    """Build an oracle from ``scripted:PATH``, ``replay:PATH`` or ``http:URL#MODEL``."""
    kind, _, arg = spec.partition(":")
    if not arg:
        raise ValueError(f"oracle spec {spec!r} needs KIND:ARGUMENT")
    if kind == "scripted":
        return ScriptedOracle.from_path(resolve_fixture(arg))
    if kind == "replay":
        try:
            return replay(arg)
        except OSError as exc:
            raise ValueError(f"cannot read transcript {arg}: {exc}") from None
    if kind == "http":
        from .http import HttpOracle, HttpSettings

        url, _, model = arg.partition("#")
        if not model:
            raise ValueError("http oracle spec needs URL#MODEL")
        return HttpOracle(HttpSettings(base_url=url, model=model, **http_options))
    raise ValueError(f"unknown oracle backend {kind!r}")


__all__ = [
    "FixtureError",
    "MalformedOracleOutput",
    "OUTCOMES",
    "Oracle",
    "OracleError",
    "OracleRequest",
    "OracleResponse",
    "RecordingOracle",
    "ReplayOracle",
    "ScriptedOracle",
    "TASK_KINDS",
    "Transcript",
    "TranscriptMiss",
    "VERDICTS",
    "make_oracle",
    "record",
    "replay",
]
