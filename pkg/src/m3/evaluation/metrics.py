"""Text-generation and classification metrics for prediction files.

Conventions, pinned for reproducibility:

* tokenization = lowercase, punctuation separated into its own tokens,
  whitespace split;
* BLEU-4 is corpus-level with no smoothing;
* ROUGE is the LCS-based F-measure (beta = 1) averaged over pairs, with a
  unigram variant selectable;
* closed VQA accuracy uses normalized exact match with a small documented
  synonym table;
* per-condition F1 extracts yes/no labels from the same line format the
  feedback composer emits.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from ..errors import SchemaError, UnextractablePredictionError

PREDICTION_TASKS = ("vqa-closed", "vqa-open", "classification", "report")

# Answer synonyms applied after normalization ("yes."/"no." reduce to
# yes/no by punctuation stripping alone).
ANSWER_SYNONYMS = {
    "yeah": "yes",
    "yep": "yes",
    "nope": "no",
    "nah": "no",
}

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_PUNCT_RE = re.compile(r"[^\w\s]")


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    task: str
    prediction: str | dict
    reference: str | dict | list

    def __post_init__(self):
        if self.task not in PREDICTION_TASKS:
            raise SchemaError(f"record {self.id!r}: unknown task {self.task!r}")


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    records = []
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                records.append(
                    PredictionRecord(
                        id=str(doc["id"]),
                        task=str(doc["task"]),
                        prediction=doc["prediction"],
                        reference=doc["reference"],
                    )
                )
            except (KeyError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad prediction record: {exc}") from exc
    return records


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace, map synonyms."""
    out = _PUNCT_RE.sub(" ", text.lower())
    out = " ".join(out.split())
    return ANSWER_SYNONYMS.get(out, out)


def closed_vqa_accuracy(records: list[PredictionRecord]) -> float:
    """Fraction of records whose normalized prediction equals the
    normalized reference."""
    if not records:
        raise ValueError("closed_vqa_accuracy needs at least one record")
    correct = 0
    for record in records:
        if record.task != "vqa-closed":
            raise SchemaError(f"record {record.id!r}: expected task vqa-closed, got {record.task!r}")
        if normalize_answer(str(record.prediction)) == normalize_answer(str(record.reference)):
            correct += 1
    return correct / len(records)


def open_vqa_exact_match(records: list[PredictionRecord]) -> float:
    """Normalized exact match for open-ended questions, reported separately
    from closed accuracy (open-ended credit rules are not standardized)."""
    if not records:
        raise ValueError("open_vqa_exact_match needs at least one record")
    correct = sum(
        1
        for r in records
        if normalize_answer(str(r.prediction)) == normalize_answer(str(r.reference))
    )
    return correct / len(records)


@dataclass
class F1Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        if denom == 0:
            return 0.0
        return 2.0 * self.tp / denom


@dataclass
class ClassificationF1Report:
    per_condition: dict[str, F1Counts]
    degenerate: list[str] = field(default_factory=list)
    lenient_ids: list[str] = field(default_factory=list)

    def condition_scores(self) -> dict[str, float]:
        """Per-condition F1, scaled x100 for reporting."""
        return {name: counts.f1() * 100.0 for name, counts in self.per_condition.items()}

    @property
    def macro_f1(self) -> float:
        scores = self.condition_scores()
        return sum(scores.values()) / len(scores) if scores else 0.0


def _labels_from_reference(reference: str | dict | list, schema: list[str]) -> dict[str, bool]:
    if isinstance(reference, list):
        positives = set(reference)
        return {name: name in positives for name in schema}
    if isinstance(reference, dict):
        out = {}
        for name in schema:
            value = reference.get(name, False)
            if isinstance(value, str):
                value = value.strip().lower() in ("yes", "true", "1")
            out[name] = bool(value)
        return out
    raise SchemaError(f"classification reference must be a label list or mapping, got {type(reference)}")


def _labels_from_prediction(prediction: str | dict, schema: list[str]) -> tuple[dict[str, bool], list[str]]:
    """Extract yes/no per condition; returns (labels, missing conditions)."""
    if isinstance(prediction, dict):
        labels, missing = {}, []
        for name in schema:
            if name in prediction:
                value = prediction[name]
                if isinstance(value, str):
                    value = value.strip().lower() in ("yes", "true", "1")
                labels[name] = bool(value)
            else:
                missing.append(name)
        return labels, missing
    labels, missing = {}, []
    lines = str(prediction).splitlines()
    for name in schema:
        pattern = re.compile(rf"^\s*{re.escape(name)}\s*:\s*(yes|no)\b", re.IGNORECASE)
        found = None
        for line in lines:
            m = pattern.match(line)
            if m:
                found = m.group(1).lower() == "yes"
                break
        if found is None:
            missing.append(name)
        else:
            labels[name] = found
    return labels, missing


def classification_f1(
    records: list[PredictionRecord],
    condition_schema: list[str],
    lenient: bool = False,
) -> ClassificationF1Report:
    """Per-condition F1 (x100) plus unweighted macro average.

    Records whose prediction lacks extractable yes/no labels raise unless
    ``lenient`` is set, in which case missing labels count as "no".
    """
    if not records:
        raise ValueError("classification_f1 needs at least one record")
    if not condition_schema:
        raise ValueError("classification_f1 needs a nonempty condition schema")
    counts = {name: F1Counts() for name in condition_schema}
    unextractable: list[str] = []
    lenient_ids: list[str] = []
    rows = []
    for record in records:
        if record.task != "classification":
            raise SchemaError(f"record {record.id!r}: expected task classification")
        pred_labels, missing = _labels_from_prediction(record.prediction, condition_schema)
        if missing:
            if not lenient:
                unextractable.append(record.id)
                continue
            lenient_ids.append(record.id)
            for name in missing:
                pred_labels[name] = False
        ref_labels = _labels_from_reference(record.reference, condition_schema)
        rows.append((pred_labels, ref_labels))
    if unextractable:
        raise UnextractablePredictionError(
            f"{len(unextractable)} prediction(s) lack extractable yes/no labels "
            f"(first ids: {unextractable[:5]}); pass lenient=True to count them as all-no",
            record_ids=unextractable,
        )
    for pred_labels, ref_labels in rows:
        for name in condition_schema:
            pred, ref = pred_labels[name], ref_labels[name]
            if pred and ref:
                counts[name].tp += 1
            elif pred and not ref:
                counts[name].fp += 1
            elif not pred and ref:
                counts[name].fn += 1
    degenerate = [name for name, c in counts.items() if 2 * c.tp + c.fp + c.fn == 0]
    return ClassificationF1Report(per_condition=counts, degenerate=degenerate, lenient_ids=lenient_ids)


@dataclass(frozen=True)
class BleuBreakdown:
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    candidate_len: int
    reference_len: int
    score: float


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidates: list[str], references: list[str]) -> BleuBreakdown:
    """Corpus-level BLEU-4 without smoothing, single reference per pair."""
    if not candidates:
        raise ValueError("bleu4 needs a nonempty corpus")
    if len(candidates) != len(references):
        raise ValueError(
            f"bleu4 needs paired lists, got {len(candidates)} candidates "
            f"and {len(references)} references"
        )
    matches = [0, 0, 0, 0]
    totals = [0, 0, 0, 0]
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_tokens, ref_tokens = tokenize(cand), tokenize(ref)
        cand_len += len(cand_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, 5):
            cand_ngrams = _ngram_counts(cand_tokens, n)
            ref_ngrams = _ngram_counts(ref_tokens, n)
            matches[n - 1] += sum((cand_ngrams & ref_ngrams).values())
            totals[n - 1] += max(len(cand_tokens) - n + 1, 0)
    precisions = tuple(m / t if t > 0 else 0.0 for m, t in zip(matches, totals))
    if cand_len == 0:
        bp = 0.0
    elif cand_len < ref_len:
        bp = math.exp(1.0 - ref_len / cand_len)
    else:
        bp = 1.0
    if all(p > 0.0 for p in precisions) and bp > 0.0:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / 4.0)
    else:
        score = 0.0
    return BleuBreakdown(
        precisions=precisions,
        brevity_penalty=bp,
        candidate_len=cand_len,
        reference_len=ref_len,
        score=score,
    )


def _lcs_length(a: list[str], b: list[str]) -> int:
    # Two-row DP; the test oracle uses the full quadratic matrix instead.
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def _pair_f(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def rouge_l(candidates: list[str], references: list[str]) -> float:
    """Mean per-pair LCS F-measure (beta = 1), scaled x100."""
    if not candidates:
        raise ValueError("rouge_l needs a nonempty corpus")
    if len(candidates) != len(references):
        raise ValueError("rouge_l needs paired lists of equal length")
    total = 0.0
    for cand, ref in zip(candidates, references):
        cand_tokens, ref_tokens = tokenize(cand), tokenize(ref)
        if not cand_tokens or not ref_tokens:
            continue
        lcs = _lcs_length(cand_tokens, ref_tokens)
        total += _pair_f(lcs / len(cand_tokens), lcs / len(ref_tokens))
    return 100.0 * total / len(candidates)


def rouge_1(candidates: list[str], references: list[str]) -> float:
    """Mean per-pair clipped-unigram F-measure, scaled x100."""
    if not candidates:
        raise ValueError("rouge_1 needs a nonempty corpus")
    if len(candidates) != len(references):
        raise ValueError("rouge_1 needs paired lists of equal length")
    total = 0.0
    for cand, ref in zip(candidates, references):
        cand_tokens, ref_tokens = tokenize(cand), tokenize(ref)
        if not cand_tokens or not ref_tokens:
            continue
        overlap = sum((Counter(cand_tokens) & Counter(ref_tokens)).values())
        total += _pair_f(overlap / len(cand_tokens), overlap / len(ref_tokens))
    return 100.0 * total / len(candidates)


class ReportJudge(Protocol):
    """External judge scoring one candidate report against its reference
    in [0, 1] (e.g. an LLM-based clinical-accuracy scorer)."""

    def score(self, candidate: str, reference: str) -> float: ...


def green_score(
    candidates: list[str],
    references: list[str],
    judge: ReportJudge | None = None,
) -> float | None:
    """Mean judge score x100, or None when no judge is attached."""
    if judge is None:
        return None
    if not candidates or len(candidates) != len(references):
        raise ValueError("green_score needs nonempty paired lists")
    scores = [judge.score(c, r) for c, r in zip(candidates, references)]
    return 100.0 * sum(scores) / len(scores)
