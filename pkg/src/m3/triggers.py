"""Detection of expert trigger tokens in generated assistant text.

The wire-stable trigger syntax is ``<KEYWORD(argument)>`` where KEYWORD is
one or more characters from ``[A-Za-z0-9_-]`` and the argument is any run of
characters excluding ``(`` ``)`` ``<`` ``>`` and newline (possibly empty).
Anything that does not match this grammar is plain text; scanning never
fails.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import SpanMismatchError

TRIGGER_RE = re.compile(r"<([A-Za-z0-9_-]+)\(([^()<>\n]*)\)>")


@dataclass(frozen=True)
class TriggerEvent:
    """One parsed trigger token with its location in the scanned text."""

    keyword: str
    argument: str
    start: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def literal(self) -> str:
        """The exact token text this event was parsed from."""
        return f"<{self.keyword}({self.argument})>"


def scan_triggers(text: str) -> list[TriggerEvent]:
    """Find all trigger tokens in ``text``, left to right, non-overlapping.

    Total function: malformed fragments (unclosed parens, stray brackets)
    are simply not matches.
    """
    return [
        TriggerEvent(m.group(1), m.group(2), m.start(), m.end())
        for m in TRIGGER_RE.finditer(text)
    ]


def strip_triggers(text: str, events: list[TriggerEvent]) -> str:
    """Remove each event's span from ``text``.

    Whitespace runs touching a removal site collapse to a single space.
    ``events`` must have been produced by :func:`scan_triggers` on this
    exact text, otherwise :class:`SpanMismatchError` is raised.
    """
    for ev in events:
        if text[ev.start:ev.end] != ev.literal():
            raise SpanMismatchError(
                f"event span [{ev.start}, {ev.end}) does not contain "
                f"{ev.literal()!r} in the given text"
            )
    out = text
    # Right-to-left so earlier spans stay valid after each removal.
    for ev in sorted(events, key=lambda e: e.start, reverse=True):
        left, right = out[: ev.start], out[ev.end:]
        join = ev.start
        ws_start = join
        while ws_start > 0 and left[ws_start - 1].isspace():
            ws_start -= 1
        ws_len = 0
        while ws_len < len(right) and right[ws_len].isspace():
            ws_len += 1
        if ws_start < join or ws_len > 0:
            out = out[:ws_start] + " " + right[ws_len:]
        else:
            out = left + right
    return out


def strip_all_triggers(text: str) -> str:
    """Repeatedly scan and strip until no trigger token remains.

    Removal can splice surrounding text into a new token (e.g. a stray
    ``<A`` prefix meeting a ``(x)>`` suffix), so a single pass is not
    always enough.
    """
    while True:
        events = scan_triggers(text)
        if not events:
            return text
        text = strip_triggers(text, events)
