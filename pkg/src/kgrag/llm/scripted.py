"""Rule-based offline transport for demos and for authoring replay fixtures.

Wrap it in :class:`~kgrag.llm.transport.RecordingTransport` to turn a
scripted run into a hash-keyed replay fixture.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from kgrag.llm.templates import identify_template
from kgrag.llm.transport import ReplayMiss, prompt_hash


@dataclass
class Rule:
    """Matches prompts of one template kind that contain every ``needles`` string.

    Successive matches walk through ``responses``; the last one repeats.
    """

    kind: str
    responses: list[str]
    needles: tuple[str, ...] = ()
    hits: int = field(default=0, init=False)

    def matches(self, kind: str | None, prompt: str) -> bool:
        return kind == self.kind and all(n in prompt for n in self.needles)

    def next_response(self) -> str:
        response = self.responses[min(self.hits, len(self.responses) - 1)]
        self.hits += 1
        return response


@dataclass
class ScriptedTransport:
    rules: list[Rule]
    defaults: dict[str, str] = field(default_factory=dict)
    model_id: str = "scripted"
    deterministic: bool = True
    calls: list[tuple[str | None, str]] = field(default_factory=list)

    def complete(self, prompt: str) -> str:
        kind = identify_template(prompt)
        self.calls.append((kind, prompt))
        for rule in self.rules:
            if rule.matches(kind, prompt):
                return rule.next_response()
        if kind in self.defaults:
            return self.defaults[kind]
        raise ReplayMiss(prompt_hash(prompt))
