"""Chat-completions oracle backend speaking the OpenAI-compatible wire format."""

from __future__ import annotations

import base64
import logging
import os
import time
from dataclasses import dataclass
from typing import Any, Callable

import httpx

from ..jsonio import canonical_dumps
from .client import MalformedOracleOutput, Oracle, OracleError, OracleRequest, OracleResponse, parse_json_reply, response_errors
from .prompts import load_prompt
from .schemas import RESPONSE_SCHEMAS

log = logging.getLogger(__name__)

TOKEN_ENV = "GUIPROP_ORACLE_TOKEN"
_TRANSIENT = {408, 409, 425, 429, 500, 502, 503, 504}


class OracleTransportError(OracleError):
    """The endpoint stayed unreachable or kept failing after all retries."""


@dataclass(frozen=True)
class HttpSettings:
    base_url: str
    model: str
    temperature: float | None = None
    max_tokens: int | None = None
    timeout_s: float = 60.0
    max_retries: int = 4
    backoff_s: float = 1.0
    repair_attempts: int = 1


class HttpOracle(Oracle):
    def __init__(
        self,
        settings: HttpSettings,
        *,
        token: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        super().__init__()
        self.settings = settings
        self.name = f"http:{settings.model}"
        token = token if token is not None else os.environ.get(TOKEN_ENV)
        headers = {"Content-Type": "application/json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            base_url=settings.base_url.rstrip("/"),
            headers=headers,
            timeout=settings.timeout_s,
            transport=transport,
        )
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def describe(self) -> str:
        return f"http:{self.settings.base_url}#{self.settings.model}"

    def _messages(self, req: OracleRequest) -> list[dict[str, Any]]:
        system = load_prompt(req.task_kind)
        schema = canonical_dumps(RESPONSE_SCHEMAS[req.task_kind])
        user: list[dict[str, Any]] | str = (
            f"Request:\n{canonical_dumps(req.payload)}\n\nReply with one JSON object matching this schema:\n{schema}"
        )
        if req.attachments:
            parts: list[dict[str, Any]] = [{"type": "text", "text": user}]
            for blob in req.attachments:
                uri = "data:image/png;base64," + base64.b64encode(blob).decode("ascii")
                parts.append({"type": "image_url", "image_url": {"url": uri}})
            user = parts
        return [{"role": "system", "content": system}, {"role": "user", "content": user}]

    def _post(self, messages: list[dict[str, Any]]) -> str:
        body: dict[str, Any] = {"model": self.settings.model, "messages": messages}
        if self.settings.temperature is not None:
            body["temperature"] = self.settings.temperature
        if self.settings.max_tokens is not None:
            body["max_tokens"] = self.settings.max_tokens
        last = "no attempt made"
        for attempt in range(self.settings.max_retries + 1):
            if attempt:
                self._sleep(self.settings.backoff_s * 2 ** (attempt - 1))
            try:
                r = self._client.post("/chat/completions", json=body)
            except httpx.TransportError as exc:
                last = f"transport error: {exc}"
                log.warning("oracle attempt %d failed: %s", attempt + 1, last)
                continue
            if r.status_code in _TRANSIENT:
                last = f"HTTP {r.status_code}"
                log.warning("oracle attempt %d failed: %s", attempt + 1, last)
                continue
            if r.status_code >= 400:
                raise OracleTransportError(f"HTTP {r.status_code}: {r.text[:200]}")
            try:
                return r.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise MalformedOracleOutput(f"unexpected completion envelope: {exc}") from None
        raise OracleTransportError(f"gave up after {self.settings.max_retries + 1} attempts ({last})")

    def _complete(self, req: OracleRequest) -> OracleResponse:
        messages = self._messages(req)
        problem = ""
        for attempt in range(self.settings.repair_attempts + 1):
            raw = self._post(messages)
            try:
                result = parse_json_reply(raw)
            except ValueError as exc:
                problem = f"reply is not JSON ({exc})"
            else:
                errors = response_errors(req.task_kind, result)
                if errors is None:
                    return OracleResponse(req.task_kind, result, raw)
                problem = f"reply violates the schema: {errors}"
            log.info("%s reply unusable on attempt %d: %s", req.task_kind, attempt + 1, problem)
            messages = messages + [
                {"role": "assistant", "content": raw},
                {
                    "role": "user",
                    "content": f"Your {problem}. Reply again with only a JSON object matching: "
                    + canonical_dumps(RESPONSE_SCHEMAS[req.task_kind]),
                },
            ]
        raise MalformedOracleOutput(f"{self.name}: {req.task_kind}: {problem}")
