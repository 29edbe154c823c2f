"""Structured completion handling: parsing, the format guard, boxed answers.

A completion is expected to carry exactly three tagged blocks,

    <preplan>...</preplan>
    <plan>...</plan>
    <execute>...</execute>

in that order, with the final answer inside a ``\\boxed{...}`` group in the
execute block and nothing but whitespace after ``</execute>``. The guard and
the parser agree exactly: ``parse_trajectory`` succeeds iff
``check_format`` reports the text as well formed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

TAG_NAMES = ("preplan", "plan", "execute")

_EXPECTED_TOKENS = (
    "<preplan>",
    "</preplan>",
    "<plan>",
    "</plan>",
    "<execute>",
    "</execute>",
)

# Anything shaped like a markup tag; used to spot tags outside the allowed set.
_TAG_TOKEN = re.compile(r"</?[A-Za-z][A-Za-z0-9_-]*>")

_BOXED = "\\boxed{"


class Violation(str, Enum):
    MISSING_TAG = "MISSING_TAG"
    DUPLICATE_TAG = "DUPLICATE_TAG"
    OUT_OF_ORDER = "OUT_OF_ORDER"
    NO_BOXED = "NO_BOXED"
    TRAILING_TEXT = "TRAILING_TEXT"
    FOREIGN_TAG = "FOREIGN_TAG"


class TrajectoryError(ValueError):
    pass


class UnbalancedBraces(TrajectoryError):
    """A boxed group opens but its braces never balance."""


class MalformedTrajectory(TrajectoryError):
    """Raised by the parser; names the first violation in document order."""

    def __init__(self, findings: list[tuple[int, Violation, str]]):
        self.violations = [code for _, code, _ in findings]
        pos, code, detail = findings[0]
        super().__init__(f"{code.value} at offset {pos}: {detail}")


@dataclass(frozen=True)
class FormatVerdict:
    well_formed: bool
    violations: tuple[Violation, ...] = ()

    def __post_init__(self):
        if self.well_formed != (len(self.violations) == 0):
            raise ValueError("well_formed must mirror an empty violation list")


@dataclass(frozen=True)
class Trajectory:
    """A parsed (preplan, plan, execute) triple.

    `raw` keeps the original completion for bookkeeping but does not take
    part in equality, so a render/parse round trip compares equal.
    """

    preplan: str
    plan: str
    execute: str
    boxed_answer: str | None = None
    raw: str = field(default="", compare=False)

    @classmethod
    def from_parts(cls, preplan: str, plan: str, execute: str) -> "Trajectory":
        """Build from segment texts, deriving the boxed answer from execute."""
        try:
            boxed = extract_boxed(execute)
        except UnbalancedBraces:
            boxed = None
        return cls(preplan=preplan, plan=plan, execute=execute, boxed_answer=boxed)

    def to_dict(self) -> dict:
        return {
            "preplan": self.preplan,
            "plan": self.plan,
            "execute": self.execute,
            "boxed_answer": self.boxed_answer,
            "raw": self.raw,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        return cls(
            preplan=data["preplan"],
            plan=data["plan"],
            execute=data["execute"],
            boxed_answer=data.get("boxed_answer"),
            raw=data.get("raw", ""),
        )


def extract_boxed(text: str) -> str | None:
    """Content of the last ``\\boxed{...}`` group, honouring nested braces.

    Returns None when no group opens; raises UnbalancedBraces when the last
    one opens but never closes. The content is returned byte-for-byte, so
    re-wrapping it reproduces the original substring.
    """
    start = text.rfind(_BOXED)
    if start == -1:
        return None
    depth = 1
    i = start + len(_BOXED)
    while i < len(text):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start + len(_BOXED) : i]
        i += 1
    raise UnbalancedBraces(f"boxed group opened at offset {start} never closes")


def _has_final_answer(execute_body: str) -> bool:
    try:
        return extract_boxed(execute_body) is not None
    except UnbalancedBraces:
        return False


def _scan(text: str) -> list[tuple[int, Violation, str]]:
    """All format violations as (position, code, detail), in document order."""
    positions: dict[str, list[int]] = {tok: [] for tok in _EXPECTED_TOKENS}
    findings: list[tuple[int, Violation, str]] = []

    for m in _TAG_TOKEN.finditer(text):
        token = m.group(0)
        if token in positions:
            positions[token].append(m.start())
        else:
            findings.append((m.start(), Violation.FOREIGN_TAG, token))

    for name in TAG_NAMES:
        opens = positions[f"<{name}>"]
        closes = positions[f"</{name}>"]
        if not opens or not closes:
            absent = [t for t, seen in ((f"<{name}>", opens), (f"</{name}>", closes)) if not seen]
            findings.append((len(text), Violation.MISSING_TAG, " ".join(absent)))
        repeats = [seen[1] for seen in (opens, closes) if len(seen) > 1]
        if repeats:
            findings.append((min(repeats), Violation.DUPLICATE_TAG, f"<{name}>"))

    firsts = [(tok, positions[tok][0]) for tok in _EXPECTED_TOKENS if positions[tok]]
    for (prev_tok, prev_pos), (tok, pos) in zip(firsts, firsts[1:]):
        if pos < prev_pos:
            findings.append((pos, Violation.OUT_OF_ORDER, f"{tok} before {prev_tok}"))
            break

    open_exec = positions["<execute>"]
    close_exec = positions["</execute>"]
    if len(open_exec) == 1 and len(close_exec) == 1 and open_exec[0] < close_exec[0]:
        body = text[open_exec[0] + len("<execute>") : close_exec[0]]
        if not _has_final_answer(body):
            findings.append(
                (close_exec[0], Violation.NO_BOXED, "no closed boxed group in execute")
            )

    if close_exec:
        tail_start = close_exec[-1] + len("</execute>")
        tail = text[tail_start:]
        if tail.strip():
            offset = tail_start + (len(tail) - len(tail.lstrip()))
            findings.append((offset, Violation.TRAILING_TEXT, tail.strip()[:40]))

    findings.sort(key=lambda f: f[0])
    return findings


def check_format(text: str) -> FormatVerdict:
    """Total structural check; never raises."""
    findings = _scan(text)
    return FormatVerdict(
        well_formed=not findings,
        violations=tuple(code for _, code, _ in findings),
    )


def parse_trajectory(text: str) -> Trajectory:
    """Parse a tagged completion into a Trajectory.

    Segment contents are trimmed at both ends; inner whitespace is kept.
    Raises MalformedTrajectory when the format guard fails.
    """
    findings = _scan(text)
    if findings:
        raise MalformedTrajectory(findings)

    segments = {}
    for name in TAG_NAMES:
        open_tok, close_tok = f"<{name}>", f"</{name}>"
        start = text.index(open_tok) + len(open_tok)
        end = text.index(close_tok)
        segments[name] = text[start:end].strip()

    return Trajectory(
        preplan=segments["preplan"],
        plan=segments["plan"],
        execute=segments["execute"],
        boxed_answer=extract_boxed(segments["execute"]),
        raw=text,
    )


def render_trajectory(t: Trajectory) -> str:
    """Canonical tagged form, blocks separated by single newlines.

    For any trajectory produced by `parse_trajectory` (or `from_parts` with
    tag-free segments and a boxed answer) the output passes `check_format`.
    """
    return (
        f"<preplan>{t.preplan}</preplan>\n"
        f"<plan>{t.plan}</plan>\n"
        f"<execute>{t.execute}</execute>"
    )
