"""The built-in note-taking reference app and app-model loading."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any

from .appmodel import AppModel, ConfigurationError

FAULTS = ("audio_blocks_photo", "archive_loses_note")

# built-in app names accepted wherever an app model path is
BUILTIN_APPS: dict[str, dict[str, bool]] = {
    "notes": {},
    "notes_faulty": {"audio_blocks_photo": True},
    "notes_archive_faulty": {"archive_loses_note": True},
}


def _resource(name: str) -> Any:
    return json.loads(resources.files(__package__).joinpath("apps", name).read_text(encoding="utf-8"))


def build_notes_app(faults: dict[str, bool] | None = None, **flags: bool) -> AppModel:
    """Notes reference app; ``faults`` switches on injected bugs by name.

    ``audio_blocks_photo``: opening the audio recorder while editing a note
    makes a later camera photo silently fail to attach.
    ``archive_loses_note``: archiving a note deletes it instead.
    """
    model = AppModel.from_dict(_resource("notes.json"))
    wanted = {**(faults or {}), **flags}
    return model.with_faults(**wanted) if wanted else model


def notes_reference_properties() -> list[dict[str, Any]]:
    """Property documents that hold on the fault-free notes app."""
    return _resource("notes_properties.json")


def load_app_model(spec: str | Path, faults: dict[str, bool] | None = None) -> AppModel:
    """Load a built-in app by name or an app-model JSON file by path."""
    if isinstance(spec, str) and spec in BUILTIN_APPS:
        model = build_notes_app(BUILTIN_APPS[spec])
    else:
        path = Path(spec)
        if not path.is_file():
            raise ConfigurationError(f"app model {str(spec)!r} is neither a built-in app nor a file")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"app model {path} is not valid JSON: {exc}") from None
        model = AppModel.from_dict(doc)
    return model.with_faults(**faults) if faults else model
