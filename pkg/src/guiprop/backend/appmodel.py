"""Declarative simulated-app format.

An app model is a JSON document::

    {
      "app_name": "Notes",
      "initial_screen": "notes_list",
      "data": {...},                  # initial data store
      "fault_flags": {"name": false},
      "whitelist": ["Notes", ...],    # static texts the app can render
      "screens": [{"screen_id": ..., "widgets": [template, ...], "content": {key: expr}}],
      "rules": [rule, ...]
    }

Widget templates carry ``widget_kind``, ``resource_id``, ``capabilities`` and
optional ``text``/``description``/``enabled``/``when`` expressions. A template
with ``for_each`` (a list expression) renders once per element, binding
``item`` and ``index`` (position in the unfiltered list); ``where`` filters.

A rule is ``{"screen", "event", "widget": {"resource_id"}, "when", "effects", "nav"}``.
The first rule whose screen, event type, widget and guard match is applied.
``nav`` is ``"stay"`` (default), ``"pop"``, ``{"push": id}`` or ``{"replace": id}``.
A ``back`` event with no matching rule pops the screen stack; the root stays.

Expressions are JSON scalars (literals), lists (evaluated element-wise) or
single-key objects naming an operator, e.g. ``{"var": "notes.0.title"}`` or
``{"and": [a, b]}``. Effects mutate the data store: ``set``, ``append``,
``remove``, ``toggle`` and ``if``.
"""

from __future__ import annotations

import copy
from collections.abc import Mapping, MutableMapping
from dataclasses import dataclass, field
from typing import Any

import jsonschema

from ..gui import CAPABILITIES, EVENT_TYPES, WIDGET_KINDS


class ConfigurationError(Exception):
    """Raised for malformed app models and other invalid configuration."""


class ExpressionError(Exception):
    pass


# names bound by the interpreter; data stores may not use them as keys
RESERVED_NAMES = frozenset({"flags", "item", "index", "input"})


APP_MODEL_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "AppModel",
    "type": "object",
    "required": ["app_name", "initial_screen", "screens", "rules"],
    "properties": {
        "app_name": {"type": "string", "minLength": 1},
        "initial_screen": {"type": "string", "minLength": 1},
        "data": {"type": "object"},
        "fault_flags": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "whitelist": {"type": "array", "items": {"type": "string"}},
        "screens": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["screen_id", "widgets"],
                "properties": {
                    "screen_id": {"type": "string", "minLength": 1},
                    "widgets": {"type": "array", "items": {"$ref": "#/$defs/template"}},
                    "content": {"type": "object"},
                },
                "additionalProperties": False,
            },
        },
        "rules": {"type": "array", "items": {"$ref": "#/$defs/rule"}},
    },
    "additionalProperties": False,
    "$defs": {
        "template": {
            "type": "object",
            "required": ["widget_kind"],
            "properties": {
                "widget_kind": {"enum": sorted(WIDGET_KINDS)},
                "resource_id": {"type": "string"},
                "text": {},
                "description": {},
                "capabilities": {
                    "type": "array",
                    "items": {"enum": sorted(CAPABILITIES)},
                    "uniqueItems": True,
                },
                "enabled": {},
                "when": {},
                "for_each": {},
                "where": {},
            },
            "additionalProperties": False,
        },
        "rule": {
            "type": "object",
            "required": ["screen", "event"],
            "properties": {
                "screen": {"type": "string"},
                "event": {"enum": list(EVENT_TYPES)},
                "widget": {
                    "type": "object",
                    "required": ["resource_id"],
                    "properties": {"resource_id": {"type": "string"}},
                    "additionalProperties": False,
                },
                "when": {},
                "effects": {"type": "array", "items": {"type": "object"}},
                "nav": {
                    "oneOf": [
                        {"enum": ["stay", "pop"]},
                        {
                            "type": "object",
                            "minProperties": 1,
                            "maxProperties": 1,
                            "properties": {
                                "push": {"type": "string"},
                                "replace": {"type": "string"},
                            },
                            "additionalProperties": False,
                        },
                    ]
                },
            },
            "additionalProperties": False,
        },
    },
}


@dataclass
class AppModel:
    app_name: str
    initial_screen: str
    screens: dict[str, dict[str, Any]]
    rules: list[dict[str, Any]]
    data: dict[str, Any] = field(default_factory=dict)
    static_text_whitelist: frozenset[str] = frozenset()
    fault_flags: dict[str, bool] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> AppModel:
        try:
            jsonschema.validate(doc, APP_MODEL_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigurationError(f"invalid app model: {exc.message} at {list(exc.absolute_path)}") from None
        screens: dict[str, dict[str, Any]] = {}
        for sc in doc["screens"]:
            if sc["screen_id"] in screens:
                raise ConfigurationError(f"duplicate screen {sc['screen_id']!r}")
            screens[sc["screen_id"]] = copy.deepcopy(sc)
        model = cls(
            app_name=doc["app_name"],
            initial_screen=doc["initial_screen"],
            screens=screens,
            rules=copy.deepcopy(list(doc["rules"])),
            data=copy.deepcopy(dict(doc.get("data", {}))),
            static_text_whitelist=frozenset(doc.get("whitelist", ())),
            fault_flags=dict(doc.get("fault_flags", {})),
        )
        model.check()
        return model

    def to_dict(self) -> dict[str, Any]:
        return {
            "app_name": self.app_name,
            "initial_screen": self.initial_screen,
            "data": copy.deepcopy(self.data),
            "fault_flags": dict(self.fault_flags),
            "whitelist": sorted(self.static_text_whitelist),
            "screens": [copy.deepcopy(s) for s in self.screens.values()],
            "rules": copy.deepcopy(self.rules),
        }

    @property
    def screen_ids(self) -> list[str]:
        return list(self.screens)

    def with_faults(self, **flags: bool) -> AppModel:
        unknown = set(flags) - set(self.fault_flags)
        if unknown:
            raise ConfigurationError(f"unknown fault flags {sorted(unknown)}")
        model = copy.deepcopy(self)
        model.fault_flags.update(flags)
        return model

    def check(self) -> None:
        clash = RESERVED_NAMES & set(self.data)
        if clash:
            raise ConfigurationError(f"data keys {sorted(clash)} are reserved")
        if self.initial_screen not in self.screens:
            raise ConfigurationError(f"initial screen {self.initial_screen!r} is not declared")
        ids_by_screen = {
            sid: {t.get("resource_id") for t in sc["widgets"]} for sid, sc in self.screens.items()
        }
        for i, rule in enumerate(self.rules):
            if rule["screen"] not in self.screens:
                raise ConfigurationError(f"rule {i} names undeclared screen {rule['screen']!r}")
            nav = rule.get("nav", "stay")
            if isinstance(nav, dict):
                target = next(iter(nav.values()))
                if target not in self.screens:
                    raise ConfigurationError(f"rule {i} navigates to undeclared screen {target!r}")
            widget = rule.get("widget")
            if rule["event"] == "back":
                if widget is not None:
                    raise ConfigurationError(f"rule {i}: back rules take no widget")
            elif widget is None:
                raise ConfigurationError(f"rule {i}: {rule['event']} rules need a widget")
            elif widget["resource_id"] not in ids_by_screen[rule["screen"]]:
                raise ConfigurationError(
                    f"rule {i} references widget {widget['resource_id']!r} absent from {rule['screen']!r}"
                )
            for eff in rule.get("effects", ()):
                _check_effect(eff, i)


_EFFECT_KEYS = {"set", "append", "remove", "toggle", "if"}


def _check_effect(eff: Mapping[str, Any], rule_index: int) -> None:
    kind = next((k for k in eff if k in _EFFECT_KEYS), None)
    if kind is None:
        raise ConfigurationError(f"rule {rule_index}: unknown effect {sorted(eff)}")
    if kind == "if":
        for sub in list(eff.get("then", ())) + list(eff.get("else", ())):
            _check_effect(sub, rule_index)


# -- expressions ---------------------------------------------------------------

_MISSING = object()


def _segments(path: Any, scope: Mapping[str, Any]) -> list[Any]:
    if isinstance(path, str):
        return path.split(".")
    if isinstance(path, list):
        return [evaluate(p, scope) if isinstance(p, (dict, list)) else p for p in path]
    raise ExpressionError(f"bad path {path!r}")


def _step(container: Any, seg: Any) -> Any:
    if isinstance(container, list):
        try:
            idx = int(seg)
        except (TypeError, ValueError):
            return _MISSING
        return container[idx] if 0 <= idx < len(container) else _MISSING
    if isinstance(container, Mapping):
        return container.get(str(seg), _MISSING)
    return _MISSING


def lookup(path: Any, scope: Mapping[str, Any]) -> Any:
    segs = _segments(path, scope)
    cur: Any = scope
    for seg in segs:
        cur = _step(cur, seg)
        if cur is _MISSING:
            return None
    return cur


def _num(x: Any) -> Any:
    return 0 if x is None else x


def evaluate(expr: Any, scope: Mapping[str, Any]) -> Any:
    if isinstance(expr, list):
        return [evaluate(e, scope) for e in expr]
    if not isinstance(expr, dict):
        return expr
    if len(expr) != 1:
        raise ExpressionError(f"expression objects take exactly one operator: {expr!r}")
    (op, arg), = expr.items()
    ev = lambda e: evaluate(e, scope)  # noqa: E731
    if op == "var":
        return lookup(arg, scope)
    if op == "obj":
        return {k: ev(v) for k, v in arg.items()}
    if op == "not":
        return not ev(arg)
    if op == "and":
        return all(ev(a) for a in arg)
    if op == "or":
        return any(ev(a) for a in arg)
    if op == "if":
        cond, then, other = arg
        return ev(then) if ev(cond) else ev(other)
    if op == "len":
        v = ev(arg)
        return len(v) if v is not None else 0
    if op == "concat":
        return "".join("" if v is None else str(v) for v in map(ev, arg))
    if op in ("eq", "ne", "gt", "ge", "lt", "le", "add", "contains"):
        a, b = (ev(x) for x in arg)
        if op == "eq":
            return a == b
        if op == "ne":
            return a != b
        if op == "contains":
            return a is not None and b is not None and b in a
        if op == "add":
            return _num(a) + _num(b)
        a, b = _num(a), _num(b)
        return {"gt": a > b, "ge": a >= b, "lt": a < b, "le": a <= b}[op]
    raise ExpressionError(f"unknown operator {op!r}")


def _parent(path: Any, scope: MutableMapping[str, Any]) -> tuple[Any, Any]:
    segs = _segments(path, scope)
    cur: Any = scope
    for seg in segs[:-1]:
        cur = _step(cur, seg)
        if cur is _MISSING or cur is None:
            raise ExpressionError(f"path {path!r} does not resolve")
    return cur, segs[-1]


def apply_effect(eff: Mapping[str, Any], scope: MutableMapping[str, Any]) -> None:
    if "if" in eff:
        branch = eff.get("then", []) if evaluate(eff["if"], scope) else eff.get("else", [])
        for sub in branch:
            apply_effect(sub, scope)
        return
    if "set" in eff:
        parent, key = _parent(eff["set"], scope)
        value = copy.deepcopy(evaluate(eff.get("value"), scope))
        if isinstance(parent, list):
            parent[int(key)] = value
        else:
            parent[str(key)] = value
    elif "toggle" in eff:
        parent, key = _parent(eff["toggle"], scope)
        if isinstance(parent, list):
            parent[int(key)] = not parent[int(key)]
        else:
            parent[str(key)] = not parent.get(str(key), False)
    elif "append" in eff:
        target = lookup(eff["append"], scope)
        if not isinstance(target, list):
            raise ExpressionError(f"append target {eff['append']!r} is not a list")
        target.append(copy.deepcopy(evaluate(eff.get("value"), scope)))
    elif "remove" in eff:
        parent, key = _parent(eff["remove"], scope)
        if isinstance(parent, list):
            idx = int(key)
            if 0 <= idx < len(parent):
                del parent[idx]
        elif isinstance(parent, MutableMapping):
            parent.pop(str(key), None)
    else:
        raise ExpressionError(f"unknown effect {eff!r}")
