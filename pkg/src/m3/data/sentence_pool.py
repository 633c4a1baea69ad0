"""Report-text normalization against a pool of canonical sentences.

Sentences similar enough to a pool entry (token-level F1 after lowercasing
and punctuation stripping) are replaced by the canonical form; the rest
pass through a pluggable rewriter, identity by default. A live LLM
rewriter can be attached; ``DEFAULT_REWRITER_PROMPT`` is the instruction
such a rewriter should receive together with the pool.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

DEFAULT_SIMILARITY_THRESHOLD = 0.6

DEFAULT_REWRITER_PROMPT = (
    "Using the provided sentence pool, transform the medical report text into "
    "a consistent format. Ensure the output text aligns with the predefined "
    "sentence structures without altering the content's meaning. Return only "
    "the standardized text."
)

_SENTENCE_SPLIT_RE = re.compile(r"([.!?])")
_TOKEN_RE = re.compile(r"[a-z0-9]+")

Rewriter = Callable[[str], str]


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def _match_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def split_sentences(text: str) -> list[tuple[str, str]]:
    """Naive punctuation-based split into (sentence, terminator) pairs.

    Clinical abbreviations are not special-cased.
    """
    parts = _SENTENCE_SPLIT_RE.split(text)
    out = []
    for i in range(0, len(parts), 2):
        sentence = parts[i].strip()
        terminator = parts[i + 1] if i + 1 < len(parts) else "."
        if sentence:
            out.append((sentence, terminator))
    return out


def token_f1(a: str, b: str) -> float:
    """Token-level F1 overlap after lowercasing and punctuation stripping."""
    ta, tb = _match_tokens(a), _match_tokens(b)
    if not ta or not tb:
        return 0.0
    overlap = sum((Counter(ta) & Counter(tb)).values())
    return 2.0 * overlap / (len(ta) + len(tb))


@dataclass(frozen=True)
class SentencePool:
    sentences: tuple[str, ...]

    def __post_init__(self):
        normalized = [_normalize_ws(s) for s in self.sentences]
        if len(set(normalized)) != len(normalized):
            raise ValueError("sentence pool entries must be unique after whitespace normalization")

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.sentences) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SentencePool":
        lines = [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()]
        return cls(sentences=tuple(line for line in lines if line))


def build_sentence_pool(corpus: Iterable[str], min_count: int = 2) -> SentencePool:
    """Pool of recurring sentences: normalized form seen >= min_count times,
    ordered by descending count then lexicographically."""
    counts: Counter[str] = Counter()
    for report in corpus:
        for sentence, _ in split_sentences(report):
            counts[_normalize_ws(sentence)] += 1
    kept = [(s, n) for s, n in counts.items() if n >= min_count]
    kept.sort(key=lambda item: (-item[1], item[0]))
    return SentencePool(sentences=tuple(s for s, _ in kept))


def normalize_report(
    report: str,
    pool: SentencePool,
    rewriter: Rewriter | None = None,
    threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
) -> str:
    """Replace each sentence by its best pool match when similarity >=
    threshold, otherwise pass it through the rewriter. Sentence order is
    preserved; idempotent with the identity rewriter."""
    rewrite = rewriter or (lambda s: s)
    out = []
    for sentence, terminator in split_sentences(report):
        best_score, best_sentence = 0.0, None
        for candidate in pool.sentences:
            score = token_f1(sentence, candidate)
            if score > best_score:
                best_score, best_sentence = score, candidate
        if best_sentence is not None and best_score >= threshold:
            out.append(best_sentence + ".")
        else:
            rewritten = _normalize_ws(rewrite(sentence))
            if rewritten:
                out.append(rewritten + terminator)
    return " ".join(out)
