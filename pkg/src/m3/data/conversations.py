"""Generate instruction-tuning conversations that teach expert triggering.

Segmentation conversations pair a sampled instruction variant with an
answer embedding the exact trigger literal. Report conversations embed the
yes/no expert block produced by the feedback composer, so generated data
and served feedback stay format-identical.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import InvalidArgumentError, SchemaError
from ..experts import ClassificationResult
from ..feedback import compose_classification_feedback
from ..registry import ModelCard

IMAGE_PLACEHOLDER = "<image>"
REPORT_INSTRUCTION = "Describe the image in detail."


@dataclass(frozen=True)
class ConversationTurn:
    from_: str  # "human" | "gpt"
    value: str


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    conversations: tuple[ConversationTurn, ...]
    image: str | None = None

    def __post_init__(self):
        if not self.conversations:
            raise SchemaError(f"record {self.id!r}: conversations must be nonempty")
        for i, turn in enumerate(self.conversations):
            expected = "human" if i % 2 == 0 else "gpt"
            if turn.from_ != expected:
                raise SchemaError(
                    f"record {self.id!r}: turn {i} must come from {expected!r}, got {turn.from_!r}"
                )
        placeholders = sum(
            t.value.count(IMAGE_PLACEHOLDER) for t in self.conversations if t.from_ == "human"
        )
        if placeholders > 1:
            raise SchemaError(
                f"record {self.id!r}: at most one {IMAGE_PLACEHOLDER} placeholder allowed, "
                f"found {placeholders}"
            )


def record_to_dict(record: DatasetRecord) -> dict:
    doc: dict = {
        "id": record.id,
        "conversations": [{"from": t.from_, "value": t.value} for t in record.conversations],
    }
    if record.image is not None:
        doc["image"] = record.image
    return doc


def record_from_dict(doc: dict) -> DatasetRecord:
    try:
        return DatasetRecord(
            id=str(doc["id"]),
            image=doc.get("image"),
            conversations=tuple(
                ConversationTurn(from_=str(t["from"]), value=str(t["value"]))
                for t in doc["conversations"]
            ),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad dataset record: {exc}") from exc


def records_to_jsonl(records: list[DatasetRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for record in records:
            fp.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


def parse_records_jsonl(path: str | Path) -> list[DatasetRecord]:
    records = []
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if line:
                records.append(record_from_dict(json.loads(line)))
    return records


def default_template_bank() -> dict[str, list[dict[str, str]]]:
    text = resources.files("m3.defaults").joinpath("seg_templates.json").read_text("utf-8")
    return json.loads(text)


def load_template_bank(path: str | Path | None) -> dict[str, list[dict[str, str]]]:
    if path is None:
        return default_template_bank()
    with open(path, encoding="utf-8") as fp:
        bank = json.load(fp)
    if not isinstance(bank, dict) or not bank:
        raise SchemaError(f"{path}: template bank must be a nonempty JSON object")
    return bank


@dataclass(frozen=True)
class SegSample:
    id: str
    image: str
    argument: str


def gen_seg_conversations(
    samples: list[SegSample],
    card: ModelCard,
    template_bank: dict[str, list[dict[str, str]]] | None = None,
    seed: int = 0,
) -> list[DatasetRecord]:
    """One two-turn record per sample; the answer carries the trigger literal."""
    bank = template_bank if template_bank is not None else default_template_bank()
    if not bank:
        raise SchemaError("template bank is empty")
    rng = random.Random(seed)
    records = []
    for sample in samples:
        if sample.argument not in card.valid_args:
            raise InvalidArgumentError(
                f"argument {sample.argument!r} is not valid for {card.name}",
                keyword=card.trigger_keyword,
                valid_args=list(card.valid_args),
            )
        templates = bank.get(sample.argument) or bank.get("*")
        if not templates:
            raise SchemaError(f"no templates for argument {sample.argument!r} and no '*' fallback")
        tpl = rng.choice(templates)
        trigger = f"<{card.trigger_keyword}({sample.argument})>"
        fields = {"argument": sample.argument, "trigger": trigger}
        instruction = tpl["instruction"].format_map(fields)
        answer = tpl["answer"].format_map(fields)
        if trigger not in answer:
            raise SchemaError(
                f"template for {sample.argument!r} does not embed the trigger literal"
            )
        human = f"{IMAGE_PLACEHOLDER}\n{instruction}" if sample.image else instruction
        records.append(
            DatasetRecord(
                id=sample.id,
                image=sample.image or None,
                conversations=(
                    ConversationTurn("human", human),
                    ConversationTurn("gpt", answer),
                ),
            )
        )
    return records


@dataclass(frozen=True)
class ReportSample:
    id: str
    image: str
    result: ClassificationResult
    report: str | None = None


def gen_report_conversations(
    samples: list[ReportSample],
    threshold: float = 0.5,
    templates: dict[str, str] | None = None,
) -> list[DatasetRecord]:
    """Classification-conditioned report records: the prompt embeds the
    expert yes/no block, the answer is the reference report."""
    records = []
    for sample in samples:
        if sample.report is None:
            raise SchemaError(f"sample {sample.id!r}: missing reference report")
        block = compose_classification_feedback(
            sample.result, threshold=threshold, templates=templates
        ).text
        prefix = f"{IMAGE_PLACEHOLDER}\n" if sample.image else ""
        human = f"{prefix}{REPORT_INSTRUCTION}\n{block}"
        records.append(
            DatasetRecord(
                id=sample.id,
                image=sample.image or None,
                conversations=(
                    ConversationTurn("human", human),
                    ConversationTurn("gpt", sample.report),
                ),
            )
        )
    return records
