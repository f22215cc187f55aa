"""Deterministic simulated-app sessions driven by an :class:`AppModel`."""

from __future__ import annotations

import copy
import random
from collections import ChainMap
from typing import Any, Protocol

from ..gui import REQUIRED_CAPABILITY, Event, GuiState, Widget
from .appmodel import AppModel, ConfigurationError, ExpressionError, apply_effect, evaluate


class RejectedEvent(Exception):
    """The event names a widget the current state cannot dispatch to."""


class Session(Protocol):
    """What the pipeline needs from a running app; real-device adapters implement this."""

    seed: int

    @property
    def state(self) -> GuiState: ...

    def perform(self, e: Event) -> GuiState: ...

    def reset(self, seed: int | None = None) -> Session: ...

    def static_text_whitelist(self) -> frozenset[str]: ...

    def screenshot(self) -> bytes | None: ...

    def settle(self) -> None: ...


class Backend(Protocol):
    """Factory for fresh sessions of one app build."""

    def launch(self, seed: int) -> Session: ...

    def static_text_whitelist(self) -> frozenset[str]: ...


class SimulatedSession:
    def __init__(self, model: AppModel, seed: int = 0):
        self.model = model
        self.seed = seed
        self.rng = random.Random(seed)
        self.reset()

    # -- contract ---------------------------------------------------------------

    @property
    def state(self) -> GuiState:
        if self._state is None:
            self._state, self._bindings = self._render()
        return self._state

    def perform(self, e: Event) -> GuiState:
        state = self.state
        binding: dict[str, Any] = {}
        if e.event_type != "back":
            w = state.widget(e.target)
            if w is None:
                raise RejectedEvent(f"no widget labelled {e.target} on {state.screen_id}")
            if not w.enabled or REQUIRED_CAPABILITY[e.event_type] not in w.capabilities:
                raise RejectedEvent(f"widget {e.target} does not accept {e.event_type}")
            binding = self._bindings[e.target]
        scope = ChainMap(self.data, {"flags": self.model.fault_flags, "input": e.data, **binding})
        rule = self._match(state.screen_id, e, binding, scope)
        try:
            if rule is not None:
                for eff in rule.get("effects", ()):
                    apply_effect(eff, scope)
                self._navigate(rule.get("nav", "stay"))
            elif e.event_type == "back":
                self._navigate("pop")
        except ExpressionError as exc:
            raise ConfigurationError(f"app model error while applying {e}: {exc}") from exc
        self.step += 1
        self.events.append(e)
        self._state = None
        return self.state

    def reset(self, seed: int | None = None) -> SimulatedSession:
        if seed is not None:
            self.seed = seed
            self.rng = random.Random(seed)
        self.data: dict[str, Any] = copy.deepcopy(self.model.data)
        self.stack: list[str] = [self.model.initial_screen]
        self.step = 0
        self.events: list[Event] = []
        self._state: GuiState | None = None
        self._bindings: dict[int, dict[str, Any]] = {}
        return self

    def static_text_whitelist(self) -> frozenset[str]:
        return self.model.static_text_whitelist

    def screenshot(self) -> bytes | None:
        return None

    def settle(self) -> None:
        """Synchronous model: the UI is settled as soon as perform returns."""

    # -- helpers ----------------------------------------------------------------

    def fork(self) -> SimulatedSession:
        """Independent copy sharing the (read-only) model."""
        other = copy.copy(self)
        other.data = copy.deepcopy(self.data)
        other.stack = list(self.stack)
        other.events = list(self.events)
        other.rng = random.Random()
        other.rng.setstate(self.rng.getstate())
        # cached bindings point into the old data store
        other._state = None
        other._bindings = {}
        return other

    def _match(self, screen: str, e: Event, binding: dict[str, Any], scope: ChainMap) -> dict | None:
        rid = binding.get("resource_id")
        for rule in self.model.rules:
            if rule["screen"] != screen or rule["event"] != e.event_type:
                continue
            if e.event_type != "back" and rule["widget"]["resource_id"] != rid:
                continue
            if "when" in rule and not evaluate(rule["when"], scope):
                continue
            return rule
        return None

    def _navigate(self, nav: Any) -> None:
        if nav == "stay":
            return
        if nav == "pop":
            if len(self.stack) > 1:
                self.stack.pop()
            return
        (kind, target), = nav.items()
        if kind == "push":
            self.stack.append(target)
        else:
            self.stack[-1] = target

    def _render(self) -> tuple[GuiState, dict[int, dict[str, Any]]]:
        screen_id = self.stack[-1]
        screen = self.model.screens[screen_id]
        base = ChainMap(self.data, {"flags": self.model.fault_flags})
        rendered: list[tuple[dict[str, Any], dict[str, Any]]] = []
        for tpl in screen["widgets"]:
            if "for_each" in tpl:
                items = evaluate(tpl["for_each"], base) or []
                for idx, item in enumerate(items):
                    bind = {"item": item, "index": idx}
                    scope = base.new_child(bind)
                    if "where" in tpl and not evaluate(tpl["where"], scope):
                        continue
                    if "when" in tpl and not evaluate(tpl["when"], scope):
                        continue
                    rendered.append((tpl, self._attrs(tpl, scope) | {"bind": bind}))
            elif "when" not in tpl or evaluate(tpl["when"], base):
                rendered.append((tpl, self._attrs(tpl, base) | {"bind": {}}))
        # interactive widgets first, declaration order otherwise
        rendered.sort(key=lambda r: not r[0].get("capabilities"))
        widgets: list[Widget] = []
        bindings: dict[int, dict[str, Any]] = {}
        seen_ids: dict[str, int] = {}
        for label, (tpl, attrs) in enumerate(rendered, start=1):
            key = tpl.get("resource_id") or tpl["widget_kind"]
            n = seen_ids.get(key, 0)
            seen_ids[key] = n + 1
            widgets.append(
                Widget(
                    widget_id=f"{screen_id}/{key}#{n}",
                    widget_kind=tpl["widget_kind"],
                    label=label,
                    resource_id=tpl.get("resource_id"),
                    text=attrs["text"],
                    description=attrs["description"],
                    capabilities=frozenset(tpl.get("capabilities", ())),
                    enabled=attrs["enabled"],
                )
            )
            bindings[label] = {"resource_id": tpl.get("resource_id"), **attrs["bind"]}
        content = {k: evaluate(v, base) for k, v in screen.get("content", {}).items()}
        state = GuiState(screen_id, tuple(widgets), copy.deepcopy(content), self.step)
        return state, bindings

    @staticmethod
    def _attrs(tpl: dict[str, Any], scope: ChainMap) -> dict[str, Any]:
        def text(key: str) -> str | None:
            if key not in tpl:
                return None
            v = evaluate(tpl[key], scope)
            return None if v is None else str(v)

        return {
            "text": text("text"),
            "description": text("description"),
            "enabled": bool(evaluate(tpl["enabled"], scope)) if "enabled" in tpl else True,
        }


class SimulatedBackend:
    """Launches sessions of one simulated app build."""

    def __init__(self, model: AppModel):
        self.model = model

    def launch(self, seed: int = 0) -> SimulatedSession:
        return SimulatedSession(self.model, seed)

    def static_text_whitelist(self) -> frozenset[str]:
        return self.model.static_text_whitelist


def launch(model: AppModel, seed: int = 0) -> SimulatedSession:
    if not isinstance(model, AppModel):
        raise ConfigurationError("launch needs an AppModel")
    model.check()
    return SimulatedSession(model, seed)


def perform(session: Session, e: Event) -> GuiState:
    return session.perform(e)


def reset(session: Session) -> Session:
    return session.reset()
