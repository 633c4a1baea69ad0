"""Expert model cards: loading, validation, prompt rendering, dispatch lookup.

A registry is immutable after load. Reloading produces a fresh registry
with a bumped version; sessions pin the version they were created against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import DuplicateKeywordError, InvalidArgumentError, SchemaError, UnknownKeywordError
from .triggers import TriggerEvent

MODALITIES = ("CT", "MRI", "CXR")
TASKS = ("segmentation", "classification")

_KEYWORD_FORBIDDEN = set("<>()") | {" ", "\t", "\n", "\r", "\f", "\v"}


@dataclass(frozen=True)
class ModelCard:
    """Declarative description of one expert model."""

    name: str
    trigger_keyword: str
    description: str
    valid_args: tuple[str, ...]
    modality: str
    task: str
    endpoint_ref: str

    def trigger_template(self) -> str:
        arg = self.valid_args[0] if self.valid_args else ""
        return f"<{self.trigger_keyword}({arg})>"


@dataclass(frozen=True)
class Registry:
    """Ordered, validated collection of model cards."""

    cards: tuple[ModelCard, ...]
    version: int = 1

    def by_keyword(self, keyword: str) -> ModelCard | None:
        for card in self.cards:
            if card.trigger_keyword == keyword:
                return card
        return None


def _validate_card(raw: dict, index: int) -> ModelCard:
    def need(key: str) -> object:
        if key not in raw:
            raise SchemaError(f"card {index}: missing field {key!r}")
        return raw[key]

    name = need("name")
    keyword = need("trigger_keyword")
    description = need("description")
    valid_args = need("valid_args")
    modality = need("modality")
    task = need("task")
    endpoint_ref = need("endpoint_ref")

    if not isinstance(name, str) or not name:
        raise SchemaError(f"card {index}: 'name' must be a nonempty string")
    if not isinstance(keyword, str) or not keyword:
        raise SchemaError(f"card {index}: 'trigger_keyword' must be a nonempty string")
    bad = sorted(set(keyword) & _KEYWORD_FORBIDDEN)
    if bad:
        raise SchemaError(
            f"card {index}: 'trigger_keyword' {keyword!r} contains forbidden characters {bad}"
        )
    if not isinstance(description, str):
        raise SchemaError(f"card {index}: 'description' must be a string")
    if not isinstance(valid_args, list) or not all(isinstance(a, str) for a in valid_args):
        raise SchemaError(f"card {index}: 'valid_args' must be a list of strings")
    if task not in TASKS:
        raise SchemaError(f"card {index}: 'task' must be one of {TASKS}, got {task!r}")
    if modality not in MODALITIES:
        raise SchemaError(f"card {index}: 'modality' must be one of {MODALITIES}, got {modality!r}")
    if task == "segmentation" and not valid_args:
        raise SchemaError(f"card {index}: segmentation cards require a nonempty 'valid_args'")
    if not isinstance(endpoint_ref, str) or not endpoint_ref:
        raise SchemaError(f"card {index}: 'endpoint_ref' must be a nonempty string")

    return ModelCard(
        name=name,
        trigger_keyword=keyword,
        description=description,
        valid_args=tuple(valid_args),
        modality=modality,
        task=task,
        endpoint_ref=endpoint_ref,
    )


def registry_from_dict(doc: dict, version: int = 1) -> Registry:
    """Validate a parsed config document into a Registry."""
    if not isinstance(doc, dict) or "models" not in doc:
        raise SchemaError("registry config must be an object with a top-level 'models' key")
    models = doc["models"]
    if not isinstance(models, list):
        raise SchemaError("'models' must be a list")
    cards = [_validate_card(raw, i) for i, raw in enumerate(models)]
    seen: dict[str, int] = {}
    for i, card in enumerate(cards):
        if card.trigger_keyword in seen:
            raise DuplicateKeywordError(
                f"cards {seen[card.trigger_keyword]} and {i} share "
                f"trigger_keyword {card.trigger_keyword!r}"
            )
        seen[card.trigger_keyword] = i
    return Registry(cards=tuple(cards), version=version)


def load_registry(path: str | Path, version: int = 1) -> Registry:
    """Load and validate a registry config JSON file."""
    with open(path, encoding="utf-8") as fp:
        try:
            doc = json.load(fp)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"registry config is not valid JSON: {exc}") from exc
    return registry_from_dict(doc, version=version)


def default_registry(version: int = 1) -> Registry:
    """The registry shipped with the package (VISTA3D, BRATS, CXR)."""
    text = resources.files("m3.defaults").joinpath("registry.json").read_text("utf-8")
    return registry_from_dict(json.loads(text), version=version)


def registry_to_dict(registry: Registry) -> dict:
    return {
        "models": [
            {
                "name": c.name,
                "trigger_keyword": c.trigger_keyword,
                "description": c.description,
                "valid_args": list(c.valid_args),
                "modality": c.modality,
                "task": c.task,
                "endpoint_ref": c.endpoint_ref,
            }
            for c in registry.cards
        ]
    }


_PROMPT_HEADER = (
    "You are a medical vision-language assistant. The following expert models "
    "are available to you. To request one, emit its trigger token exactly as "
    "shown, with one valid argument between the parentheses."
)


def render_system_prompt(registry: Registry) -> str:
    """Render the deterministic system-prompt block listing every card.

    Identical registries yield byte-identical text; card order follows the
    config order.
    """
    lines = [_PROMPT_HEADER, ""]
    if not registry.cards:
        lines.append("Available expert models: none.")
    else:
        lines.append("Available expert models:")
        for card in registry.cards:
            lines.append(f"- {card.name} ({card.modality}, {card.task}): {card.description}")
            lines.append(f"  Trigger syntax: <{card.trigger_keyword}(arg)>")
            if card.valid_args:
                lines.append(f"  Valid arguments: {', '.join(card.valid_args)}")
            else:
                lines.append(
                    f"  Valid arguments: none (trigger with an empty argument: "
                    f"<{card.trigger_keyword}()>)"
                )
    return "\n".join(lines)


def resolve_trigger(registry: Registry, event: TriggerEvent) -> tuple[ModelCard, str]:
    """Map a parsed trigger event onto a card and a validated argument.

    The argument is matched against ``valid_args`` exactly (case-sensitive)
    after trimming surrounding whitespace. A card with an empty
    ``valid_args`` list accepts only the empty argument.
    """
    card = registry.by_keyword(event.keyword)
    if card is None:
        known = [c.trigger_keyword for c in registry.cards]
        raise UnknownKeywordError(
            f"no model card with trigger keyword {event.keyword!r}; known keywords: {known}"
        )
    arg = event.argument.strip()
    if card.valid_args:
        if arg not in card.valid_args:
            raise InvalidArgumentError(
                f"argument {arg!r} is not valid for {card.name}; "
                f"valid arguments: {list(card.valid_args)}",
                keyword=card.trigger_keyword,
                valid_args=list(card.valid_args),
            )
    elif arg != "":
        raise InvalidArgumentError(
            f"{card.name} takes no argument, got {arg!r}",
            keyword=card.trigger_keyword,
            valid_args=[],
        )
    return card, arg
