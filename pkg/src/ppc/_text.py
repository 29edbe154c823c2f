"""Low-level text helpers shared across the pipeline.

Everything here is deliberately tokenizer-free: token counts are whitespace
splits, "word" boundaries are ASCII-alphanumeric neighbourhood checks, and
sentence splitting is naive punctuation splitting.
"""

from __future__ import annotations

import re

_ASCII_ALNUM = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
)

_DIGIT_RUN = re.compile(r"[0-9]+")

_SENTENCE = re.compile(r"[^.!?]*[.!?]|[^.!?]+$")


def count_tokens(text: str) -> int:
    """Whitespace-delimited token count."""
    return len(text.split())


def is_boundary(text: str, index: int) -> bool:
    """True when `index` falls outside `text` or on a non-alphanumeric char."""
    if index < 0 or index >= len(text):
        return True
    return text[index] not in _ASCII_ALNUM


def find_phrase(text: str, phrase: str, start: int = 0) -> int:
    """First occurrence of `phrase` with non-alphanumeric neighbours, else -1.

    Blocks partial-word hits such as "results in" inside "results into".
    """
    while True:
        hit = text.find(phrase, start)
        if hit == -1:
            return -1
        if is_boundary(text, hit - 1) and is_boundary(text, hit + len(phrase)):
            return hit
        start = hit + 1


def standalone_integers(text: str, min_digits: int = 1) -> list[str]:
    """Maximal digit runs of >= min_digits chars with non-alphanumeric neighbours.

    "1001" in prose or "$1001$" qualifies; "x1001y" does not.
    """
    runs = []
    for m in _DIGIT_RUN.finditer(text):
        if len(m.group(0)) < min_digits:
            continue
        if is_boundary(text, m.start() - 1) and is_boundary(text, m.end()):
            runs.append(m.group(0))
    return runs


def math_spans(text: str) -> list[str]:
    """Contents of $...$ spans, left to right; $$...$$ counts as one span.

    An opening delimiter that never closes turns the remainder into plain
    text (no span is emitted for it).
    """
    spans: list[str] = []
    i = 0
    while i < len(text):
        j = text.find("$", i)
        if j == -1:
            break
        if text.startswith("$$", j):
            k = text.find("$$", j + 2)
            if k == -1:
                break
            spans.append(text[j + 2 : k])
            i = k + 2
        else:
            k = text.find("$", j + 1)
            if k == -1:
                break
            spans.append(text[j + 1 : k])
            i = k + 1
    return spans


def split_sentences(text: str) -> list[str]:
    """Split at every '.', '!' or '?' (abbreviation-naive), dropping blanks."""
    return [part.strip() for part in _SENTENCE.findall(text) if part.strip()]
