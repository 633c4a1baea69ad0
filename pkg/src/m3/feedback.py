"""Turn expert results into the conversational feedback the VLM consumes.

Feedback text is fully templated (see ``defaults/feedback_templates.json``)
so downstream fine-tuning data stays format-stable. Both composers are
deterministic pure functions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .experts import ClassificationResult, SegmentationResult

EXPERT_FEEDBACK_ROLE = "expert-feedback"


@dataclass(frozen=True)
class FeedbackTurn:
    """A feedback turn; rendered as a user-role turn on the wire."""

    text: str
    attached_overlay: str | None = None

    role: str = EXPERT_FEEDBACK_ROLE

    def __post_init__(self):
        if not self.text:
            raise ValueError("feedback turns must carry text")


def default_templates() -> dict[str, str]:
    text = resources.files("m3.defaults").joinpath("feedback_templates.json").read_text("utf-8")
    return dict(json.loads(text))


def load_templates(path: str | Path | None) -> dict[str, str]:
    """Package defaults, overridden by any keys present in ``path``."""
    templates = default_templates()
    if path is not None:
        with open(path, encoding="utf-8") as fp:
            templates.update(json.load(fp))
    return templates


def compose_classification_feedback(
    result: ClassificationResult,
    threshold: float = 0.5,
    templates: dict[str, str] | None = None,
) -> FeedbackTurn:
    """One "<Condition>: yes|no" line per condition, in schema order.

    ``yes`` when probability >= threshold. Prefixed by the fixed
    incorporation header.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    tpl = templates or default_templates()
    lines = [tpl["header"]]
    for condition, prob in result.probabilities:
        answer = "yes" if prob >= threshold else "no"
        lines.append(tpl["condition_line"].format(condition=condition, answer=answer))
    return FeedbackTurn(text="\n".join(lines))


def compose_segmentation_feedback(
    result: SegmentationResult,
    argument: str,
    templates: dict[str, str] | None = None,
) -> FeedbackTurn:
    """Describe found classes with voxel counts (and the selected slice for
    3D inputs), or report that nothing matching the argument was found."""
    tpl = templates or default_templates()
    if not result.classes_found:
        body = tpl["seg_not_found"].format(argument=argument)
    else:
        class_list = ", ".join(
            tpl["class_item"].format(label=name, voxels=count)
            for name, count in result.classes_found
        )
        if result.selected_slice is not None:
            body = tpl["seg_found_slice"].format(
                argument=argument, class_list=class_list, slice=result.selected_slice
            )
        else:
            body = tpl["seg_found"].format(argument=argument, class_list=class_list)
    text = tpl["header"] + "\n" + body
    return FeedbackTurn(text=text, attached_overlay=result.overlay_ref)


def compose_corrective_feedback(
    error: Exception,
    keyword: str | None = None,
    valid_args: list[str] | None = None,
    templates: dict[str, str] | None = None,
) -> FeedbackTurn:
    """Feedback for a failed resolve/dispatch, naming valid options."""
    tpl = templates or default_templates()
    message = str(error)
    if message and message[-1] not in ".!?":
        message += "."
    if valid_args is not None and keyword is not None:
        text = tpl["corrective_invalid_argument"].format(
            error=message, keyword=keyword, valid_args=", ".join(valid_args) or "(empty)"
        )
    else:
        text = tpl["corrective_generic"].format(error=message)
    return FeedbackTurn(text=text)
