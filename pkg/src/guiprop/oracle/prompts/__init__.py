"""Versioned system prompts, one Markdown file per oracle task."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from ..schemas import TASK_KINDS


@lru_cache(maxsize=None)
def load_prompt(task_kind: str) -> str:
    if task_kind not in TASK_KINDS:
        raise KeyError(task_kind)
    return resources.files(__package__).joinpath(f"{task_kind}.md").read_text(encoding="utf-8")


def prompt_version(task_kind: str) -> str:
    first = load_prompt(task_kind).splitlines()[0]
    return first.split("version:", 1)[1].replace("-->", "").strip() if "version:" in first else "0"
