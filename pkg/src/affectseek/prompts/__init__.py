"""Prompt templates for each backend task.

Templates are plain text with ${name} placeholders (string.Template), which
keeps literal JSON braces in the instructions out of harm's way.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from string import Template


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    ref = resources.files(__package__).joinpath(f"{name}.txt")
    try:
        return ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValueError(f"no prompt template named {name!r}") from None


def render_prompt(name: str, **values: str) -> str:
    try:
        return Template(load_prompt(name)).substitute(**values)
    except KeyError as exc:
        raise ValueError(f"prompt {name!r} is missing a value for {exc.args[0]}") from None
