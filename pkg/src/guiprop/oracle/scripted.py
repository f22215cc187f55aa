"""Deterministic rule-table oracle used in place of a language model.

A fixture is a JSON document::

    {"name": "...", "rules": {"<task_kind>": [{"id": ..., "match": M, "response": R}, ...]}}

Rules are tried in order and the first whose ``match`` accepts the request
payload answers it. A match ``M`` maps dotted payload paths to value specs:

* a scalar means equality;
* an object without ``$`` keys is a nested partial match;
* ``$eq $ne $gt $ge $lt $le $in $contains $not_contains $regex $exists $len``
  ``$some $none $all $not``
  are operators, combined conjunctively when several appear.

``match_any`` (a list of matches) and ``match_all`` may appear at the top.
Response templates are plain JSON with three directives:

* ``{"$ref": "path"}`` copies a payload value;
* ``{"$label": M}`` becomes the label of the first widget in ``state.widgets``
  matching ``M``;
* inside lists, ``{"$if": M, "value": X}`` keeps ``X`` only when ``M`` holds.

A request no rule answers raises :class:`MalformedOracleOutput`, so callers
apply the same fallback they apply to a confused model.
"""

from __future__ import annotations

import copy
import json
import logging
import re
from pathlib import Path
from typing import Any, Mapping

from ..jsonio import canonical_dumps
from .client import MalformedOracleOutput, Oracle, OracleRequest, OracleResponse
from .schemas import TASK_KINDS

log = logging.getLogger(__name__)

_MISSING = object()
_ORDER = {
    "$gt": lambda a, b: a > b,
    "$ge": lambda a, b: a >= b,
    "$lt": lambda a, b: a < b,
    "$le": lambda a, b: a <= b,
}


class FixtureError(ValueError):
    pass


def lookup(doc: Any, path: str) -> Any:
    cur = doc
    if path in ("", "."):
        return cur
    for part in path.split("."):
        if isinstance(cur, Mapping):
            cur = cur.get(part, _MISSING)
        elif isinstance(cur, list) and part.lstrip("-").isdigit():
            i = int(part)
            cur = cur[i] if -len(cur) <= i < len(cur) else _MISSING
        else:
            return _MISSING
        if cur is _MISSING:
            return _MISSING
    return cur


def match_value(value: Any, spec: Any) -> bool:
    if isinstance(spec, Mapping):
        ops = {k: v for k, v in spec.items() if k.startswith("$")}
        if not ops:
            return isinstance(value, Mapping) and match_doc(value, spec)
        return all(_op(value, op, arg) for op, arg in ops.items())
    return value is not _MISSING and value == spec


def match_doc(doc: Any, match: Mapping[str, Any]) -> bool:
    for key, spec in match.items():
        if key == "match_any":
            if not any(match_doc(doc, m) for m in spec):
                return False
        elif key == "match_all":
            if not all(match_doc(doc, m) for m in spec):
                return False
        elif not match_value(lookup(doc, key), spec):
            return False
    return True


def _op(value: Any, op: str, arg: Any) -> bool:
    if op == "$exists":
        return (value is not _MISSING and value is not None) == bool(arg)
    if op == "$not":
        return not match_value(value, arg)
    if value is _MISSING:
        return op in ("$ne", "$none", "$not_contains")
    if op == "$eq":
        return value == arg
    if op == "$ne":
        return value != arg
    if op in _ORDER:
        return isinstance(value, (int, float)) and not isinstance(value, bool) and _ORDER[op](value, arg)
    if op == "$in":
        return value in arg
    if op == "$contains":
        return isinstance(value, (str, list)) and arg in value
    if op == "$not_contains":
        return not (isinstance(value, (str, list)) and arg in value)
    if op == "$regex":
        return isinstance(value, str) and re.search(arg, value) is not None
    if op == "$len":
        return isinstance(value, (str, list, Mapping)) and match_value(len(value), arg)
    if op in ("$some", "$none", "$all"):
        if not isinstance(value, list):
            return op == "$none"
        hits = [match_value(v, arg) for v in value]
        return any(hits) if op == "$some" else (not any(hits) if op == "$none" else all(hits))
    raise FixtureError(f"unknown match operator {op}")


def render(template: Any, payload: Mapping[str, Any]) -> Any:
    if isinstance(template, Mapping):
        if "$ref" in template:
            value = lookup(payload, template["$ref"])
            if value is _MISSING:
                raise MalformedOracleOutput(f"template reference {template['$ref']!r} is unresolved")
            return copy.deepcopy(value)
        if "$label" in template:
            for w in lookup(payload, "state.widgets") or ():
                if match_value(w, template["$label"]):
                    return w["label"]
            return None
        return {k: render(v, payload) for k, v in template.items()}
    if isinstance(template, list):
        out = []
        for item in template:
            if isinstance(item, Mapping) and "$if" in item:
                if not match_doc(payload, item["$if"]):
                    continue
                item = item["value"]
            out.append(render(item, payload))
        return out
    return template


class ScriptedOracle(Oracle):
    """Answers from a rule table; a pure function of the request payload."""

    def __init__(self, fixture: Mapping[str, Any], source: str = "<inline>"):
        super().__init__()
        rules = fixture.get("rules")
        if not isinstance(rules, Mapping):
            raise FixtureError(f"{source}: fixture needs a 'rules' object")
        unknown = set(rules) - set(TASK_KINDS)
        if unknown:
            raise FixtureError(f"{source}: unknown task kinds {sorted(unknown)}")
        self.fixture_name = fixture.get("name", source)
        self.rules: dict[str, list[Mapping[str, Any]]] = {k: list(v) for k, v in rules.items()}
        self.name = f"scripted:{self.fixture_name}"
        self.hits: list[tuple[str, str]] = []

    @classmethod
    def from_path(cls, path: str | Path) -> ScriptedOracle:
        path = Path(path)
        if path.is_dir():
            path = path / "oracle.json"
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise FixtureError(f"cannot read oracle fixture {path}: {exc}") from None
        return cls(doc, source=str(path))

    def _complete(self, req: OracleRequest) -> OracleResponse:
        payload = req.payload
        for i, rule in enumerate(self.rules.get(req.task_kind, ())):
            if match_doc(payload, rule.get("match", {})):
                result = render(rule["response"], payload)
                self.hits.append((req.task_kind, str(rule.get("id", i))))
                return OracleResponse(req.task_kind, result, canonical_dumps(result))
        raise MalformedOracleOutput(f"{self.name}: no rule answers this {req.task_kind} request")
