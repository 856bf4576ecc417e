"""Prompt templates stored as package data, with strict placeholder binding."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")

TEMPLATE_NAMES = ("triples_extraction", "reasoning", "missing_knowledge", "kg_enrichment", "path_pruning")


class MissingBinding(KeyError):
    def __init__(self, template: str, name: str):
        super().__init__(f"template {template!r} needs a value for {{{name}}}")
        self.template = template
        self.name = name


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(PLACEHOLDER_RE.findall(self.body))

    def render(self, bindings: dict[str, str] | None = None, **kwargs: str) -> str:
        values = {**(bindings or {}), **kwargs}
        for name in sorted(self.placeholders):
            if name not in values:
                raise MissingBinding(self.name, name)
        # Single pass, so braces inside bound values are never re-expanded.
        return PLACEHOLDER_RE.sub(lambda m: str(values[m.group(1)]), self.body)


@lru_cache(maxsize=None)
def load_template(name: str) -> PromptTemplate:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r}")
    body = resources.files("kgrag.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return PromptTemplate(name, body)


def render(template: PromptTemplate | str, bindings: dict[str, str] | None = None, **kwargs: str) -> str:
    if isinstance(template, str):
        template = load_template(template)
    return template.render(bindings, **kwargs)


def identify_template(prompt: str) -> str | None:
    """Name of the shipped template a rendered prompt was built from, if any."""
    for name in TEMPLATE_NAMES:
        head = load_template(name).body.split("{", 1)[0]
        if prompt.startswith(head):
            return name
    return None
