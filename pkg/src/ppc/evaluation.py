"""Answer equivalence, maj@k / pass@k metrics, perturbations and reports.

The rule pipeline normalizes answer strings (whitespace, dollar signs,
\\left/\\right, frac variants, redundant braces) and canonicalizes anything
that parses as an exact rational, so "0.50", "1/2" and "\\frac{2}{4}" all
compare equal without floats. An optional LLM judge acts as a fallback for
pairs the rules cannot settle. On top of that sit the k-sample metrics,
the preplan perturbations for faithfulness probing, and error-attribution
aggregation.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import prompts
from ._text import count_tokens, split_sentences
from .clients import (
    ClientError,
    Facet,
    GenerationRequest,
    JudgeVerdict,
    LlmClient,
    judge_equivalence,
    run_parallel,
)
from .synthesis import ProblemRecord
from .trajectory import (
    MalformedTrajectory,
    Trajectory,
    UnbalancedBraces,
    extract_boxed,
    parse_trajectory,
)

log = logging.getLogger(__name__)


class PoolTooSmall(ValueError):
    pass


# --- answer normalization ----------------------------------------------------

_LEFT_RIGHT = re.compile(r"\\(left|right)(?![a-zA-Z])")
_INT = re.compile(r"^[+-]?[0-9]+$")
_DECIMAL = re.compile(r"^[+-]?(?:[0-9]+\.[0-9]*|\.[0-9]+)$")
_SLASH = re.compile(r"^([+-]?[0-9]+)\s*/\s*([+-]?[0-9]+)$")
_FRAC = re.compile(r"^([+-])?\\frac\{([+-]?[0-9]+)\}\{([+-]?[0-9]+)\}$")


def _strip_outer_braces(text: str) -> str:
    """Drop one layer of braces that wrap the whole string."""
    if len(text) >= 2 and text[0] == "{" and text[-1] == "}":
        depth = 0
        for i, ch in enumerate(text):
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0 and i != len(text) - 1:
                    return text
        return text[1:-1]
    return text


def _as_rational(text: str) -> Fraction | None:
    try:
        if _INT.match(text):
            return Fraction(int(text))
        if _DECIMAL.match(text):
            return Fraction(text)
        m = _SLASH.match(text)
        if m:
            return Fraction(int(m.group(1)), int(m.group(2)))
        m = _FRAC.match(text)
        if m:
            value = Fraction(int(m.group(2)), int(m.group(3)))
            return -value if m.group(1) == "-" else value
    except (ValueError, ZeroDivisionError):
        return None
    return None


def normalize_answer(text: str) -> str:
    """Canonical comparison form of a final answer.

    Pipeline: trim, collapse whitespace, strip surrounding dollar signs,
    drop \\left/\\right, map \\dfrac/\\tfrac to \\frac, strip one layer of
    redundant outer braces, then canonicalize exact rationals (integers and
    reduced fractions share one spelling).
    """
    s = text.strip()
    s = re.sub(r"\s+", " ", s)
    s = s.strip("$").strip()
    s = _LEFT_RIGHT.sub("", s)
    s = s.replace("\\dfrac", "\\frac").replace("\\tfrac", "\\frac")
    s = _strip_outer_braces(s).strip()
    value = _as_rational(s)
    if value is not None:
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return s


def answers_equivalent(
    pred: str | None, gold: str, fallback: LlmClient | None = None
) -> bool:
    """True when normalized forms agree; judge fallback when configured.

    Judge failures are logged and count as non-equivalent.
    """
    if pred is None:
        return False
    if normalize_answer(pred) == normalize_answer(gold):
        return True
    if fallback is not None:
        try:
            return judge_equivalence(fallback, pred, gold)
        except ClientError as exc:
            log.warning("equivalence judge failed (%s); treating as NO", exc)
            return False
    return False


Equivalence = Callable[[str, str], bool]


# --- k-sample metrics ---------------------------------------------------------


def maj_at_k(
    answers: Sequence[str | None],
    gold: str,
    equivalence: Equivalence = answers_equivalent,
) -> bool:
    """Majority vote over k answers.

    Answers join the first existing equivalence class they match (first-match
    linkage, deterministic in input order); absent answers form no class.
    The largest class wins, ties broken by earliest first occurrence, and the
    vote is correct when the winning class matches gold.
    """
    if not answers:
        raise ValueError("need at least one answer")
    classes: list[dict] = []
    for index, answer in enumerate(answers):
        if answer is None:
            continue
        for cls in classes:
            if equivalence(answer, cls["rep"]):
                cls["count"] += 1
                break
        else:
            classes.append({"rep": answer, "count": 1, "first": index})
    if not classes:
        return False
    winner = max(classes, key=lambda c: (c["count"], -c["first"]))
    return equivalence(winner["rep"], gold)


def pass_at_k(
    answers: Sequence[str | None],
    gold: str,
    equivalence: Equivalence = answers_equivalent,
) -> bool:
    """True iff any of the k answers matches gold."""
    if not answers:
        raise ValueError("need at least one answer")
    return any(a is not None and equivalence(a, gold) for a in answers)


@dataclass(frozen=True)
class TokenStats:
    counts: tuple[int, ...]
    mean: float | None
    mean_thousands: float | None

    def to_dict(self) -> dict:
        return {
            "counts": list(self.counts),
            "mean": self.mean,
            "mean_thousands": self.mean_thousands,
        }


def token_stats(completions: Sequence[str]) -> TokenStats:
    """Whitespace token counts; the mean is also given in thousands (2 dp)."""
    counts = tuple(count_tokens(c) for c in completions)
    if not counts:
        return TokenStats(counts=(), mean=None, mean_thousands=None)
    mean = sum(counts) / len(counts)
    return TokenStats(counts=counts, mean=mean, mean_thousands=round(mean / 1000.0, 2))


# --- faithfulness perturbations ------------------------------------------------


class PerturbationMode(str, Enum):
    SHUFFLED = "shuffled"
    MISMATCHED = "mismatched"
    GENERIC = "generic"


@dataclass(frozen=True)
class PerturbationSpec:
    mode: PerturbationMode
    seed: int
    # (problem_id, preplan) pairs; None defers to the evaluated problems
    pool: tuple[tuple[str, str], ...] | None = None
    generic_text: str = prompts.GENERIC_PREPLAN

    def __post_init__(self):
        if (
            self.mode == PerturbationMode.MISMATCHED
            and self.pool is not None
            and len(self.pool) < 2
        ):
            raise PoolTooSmall("mismatched perturbation needs a pool of >= 2")


def _derangement(n: int, rng: random.Random) -> list[int]:
    """Seeded fixed-point-free permutation of range(n); needs n >= 2."""
    indices = list(range(n))
    while True:
        rng.shuffle(indices)
        if all(i != j for i, j in enumerate(indices)):
            return indices


def forced_prefix_for(preplan: str) -> str:
    """Assistant prefill that pins the preplan and opens the plan block."""
    return f"<preplan>{preplan}</preplan>\n<plan>"


def perturb_preplan(
    original: Trajectory, spec: PerturbationSpec, problem_id: str | None = None
) -> str:
    """Forced prefix with the preplan replaced per the perturbation mode.

    shuffled: the original preplan's sentences in a seeded random order;
    mismatched: the preplan of a different problem, assigned by a seeded
    derangement over the pool (no problem keeps its own); generic: the
    fixed content-free text.
    """
    if spec.mode == PerturbationMode.SHUFFLED:
        sentences = split_sentences(original.preplan)
        rng = random.Random(spec.seed)
        rng.shuffle(sentences)
        return forced_prefix_for(" ".join(sentences))
    if spec.mode == PerturbationMode.MISMATCHED:
        if spec.pool is None or len(spec.pool) < 2:
            raise PoolTooSmall("mismatched perturbation needs a pool of >= 2")
        if problem_id is None:
            raise ValueError("mismatched perturbation needs the problem id")
        ids = [pid for pid, _ in spec.pool]
        if problem_id not in ids:
            raise ValueError(f"problem id {problem_id!r} not in pool")
        mapping = _derangement(len(ids), random.Random(spec.seed))
        donor = spec.pool[mapping[ids.index(problem_id)]]
        return forced_prefix_for(donor[1])
    return forced_prefix_for(spec.generic_text)


# --- evaluation loop ------------------------------------------------------------


@dataclass
class EvalRecord:
    problem: ProblemRecord
    samples: list[str]
    parsed: list[Trajectory | None]
    answers: list[str | None]
    verdicts: list[bool]
    maj_correct: bool
    pass_correct: bool
    token_counts: list[int]

    def to_dict(self) -> dict:
        return {
            "id": self.problem.id,
            "question": self.problem.question,
            "gold": self.problem.gold_answer,
            "samples": self.samples,
            "answers": self.answers,
            "verdicts": self.verdicts,
            "maj_correct": self.maj_correct,
            "pass_correct": self.pass_correct,
            "token_counts": self.token_counts,
        }


@dataclass
class EvalReport:
    benchmark: str
    k: int
    problems: int
    failed: int
    maj_at_k: float | None
    pass_at_k: float | None
    mean_tokens: float | None
    mean_tokens_thousands: float | None
    records: list[EvalRecord]

    def to_dict(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "k": self.k,
            "problems": self.problems,
            "failed": self.failed,
            "maj_at_k": self.maj_at_k,
            "pass_at_k": self.pass_at_k,
            "mean_tokens": self.mean_tokens,
            "mean_tokens_thousands": self.mean_tokens_thousands,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _extract_answer(sample: str) -> str | None:
    """Final answer from the last boxed group of a completion, if any."""
    try:
        return extract_boxed(sample)
    except UnbalancedBraces:
        return None


def _parse_or_none(sample: str) -> Trajectory | None:
    try:
        return parse_trajectory(sample)
    except MalformedTrajectory:
        return None


DEFAULT_EVAL_SAMPLING = GenerationRequest(
    user_prompt="", system_prompt=prompts.EVAL_SYSTEM_PROMPT
)


def evaluate(
    problems: Sequence[ProblemRecord],
    k: int,
    client: LlmClient | None = None,
    *,
    mode: PerturbationSpec | None = None,
    equivalence: Equivalence = answers_equivalent,
    replay: Mapping[str, Sequence[str]] | None = None,
    params: GenerationRequest = DEFAULT_EVAL_SAMPLING,
    parallelism: int = 1,
    benchmark: str = "bench",
) -> EvalReport:
    """Score a benchmark with k samples per problem.

    Samples come from `replay` transcripts when given (fully offline),
    otherwise from the client. With a perturbation spec, one unforced base
    sample per problem supplies the original preplan; generation then
    restarts from the perturbed prefill. Problems whose generation fails
    entirely are counted separately and excluded from the metric
    denominators.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if replay is None and client is None:
        raise ValueError("need a client or replay transcripts")

    spec = mode
    prefixes: dict[str, str] = {}
    if spec is not None and replay is None:
        base = _base_preplans(problems, client, params, parallelism)
        if spec.mode == PerturbationMode.MISMATCHED and spec.pool is None:
            spec = replace(spec, pool=tuple((p.id, base[p.id]) for p in problems))
        for p in problems:
            original = Trajectory(preplan=base[p.id], plan="", execute="")
            prefixes[p.id] = perturb_preplan(original, spec, problem_id=p.id)

    def run_problem(problem: ProblemRecord):
        if replay is not None:
            samples = list(replay.get(problem.id, []))[:k]
            if len(samples) < k:
                raise ValueError(f"replay has {len(samples)} samples for {problem.id!r}, need {k}")
        else:
            req = replace(
                params,
                user_prompt=problem.question,
                forced_prefix=prefixes.get(problem.id),
            )
            samples = [client.generate(req) for _ in range(k)]
        answers = [_extract_answer(s) for s in samples]
        verdicts = [a is not None and equivalence(a, problem.gold_answer) for a in answers]
        return EvalRecord(
            problem=problem,
            samples=samples,
            parsed=[_parse_or_none(s) for s in samples],
            answers=[None if a is None else normalize_answer(a) for a in answers],
            verdicts=verdicts,
            maj_correct=maj_at_k(answers, problem.gold_answer, equivalence),
            pass_correct=pass_at_k(answers, problem.gold_answer, equivalence),
            token_counts=[count_tokens(s) for s in samples],
        )

    def run_or_fail(problem: ProblemRecord):
        try:
            return run_problem(problem)
        except ClientError as exc:
            log.warning("problem %s failed entirely: %s", problem.id, exc)
            return None

    outcomes = run_parallel(run_or_fail, problems, parallelism)
    records = [r for r in outcomes if r is not None]
    failed = len(outcomes) - len(records)

    if records:
        maj = round(100.0 * sum(r.maj_correct for r in records) / len(records), 2)
        cov = round(100.0 * sum(r.pass_correct for r in records) / len(records), 2)
        stats = token_stats([s for r in records for s in r.samples])
        mean_tokens, mean_k = stats.mean, stats.mean_thousands
    else:
        maj = cov = mean_tokens = mean_k = None

    return EvalReport(
        benchmark=benchmark,
        k=k,
        problems=len(records),
        failed=failed,
        maj_at_k=maj,
        pass_at_k=cov,
        mean_tokens=mean_tokens,
        mean_tokens_thousands=mean_k,
        records=records,
    )


def _base_preplans(
    problems: Sequence[ProblemRecord],
    client: LlmClient,
    params: GenerationRequest,
    parallelism: int,
) -> dict[str, str]:
    """One unforced sample per problem; its preplan seeds the perturbation."""

    def one(problem: ProblemRecord) -> tuple[str, str]:
        sample = client.generate(replace(params, user_prompt=problem.question))
        parsed = _parse_or_none(sample)
        if parsed is None:
            log.warning("base sample for %s is malformed; empty preplan", problem.id)
            return problem.id, ""
        return problem.id, parsed.preplan

    return dict(run_parallel(one, problems, parallelism))


def format_report_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table, one row per benchmark."""
    headers = ("benchmark", "k", "problems", "failed", "maj@k", "pass@k", "tokens(K)")
    rows = [headers]
    for r in reports:
        rows.append(
            (
                r.benchmark,
                str(r.k),
                str(r.problems),
                str(r.failed),
                "n/a" if r.maj_at_k is None else f"{r.maj_at_k:.2f}",
                "n/a" if r.pass_at_k is None else f"{r.pass_at_k:.2f}",
                "n/a" if r.mean_tokens_thousands is None else f"{r.mean_tokens_thousands:.2f}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines)


def write_transcripts(path: Path, report: EvalReport) -> None:
    """Persist raw samples per problem for later --replay runs."""
    with Path(path).open("w", encoding="utf-8") as f:
        for rec in report.records:
            row = {"id": rec.problem.id, "samples": rec.samples}
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def read_transcripts(path: Path) -> dict[str, list[str]]:
    transcripts: dict[str, list[str]] = {}
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                row = json.loads(line)
                transcripts[str(row["id"])] = list(row["samples"])
    return transcripts


# --- error attribution ----------------------------------------------------------


@dataclass(frozen=True)
class AttributionCounts:
    total: int
    what_to_solve: int
    how_to_solve: int
    facets: dict[str, int]
    unparseable: int

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "what_to_solve": self.what_to_solve,
            "how_to_solve": self.how_to_solve,
            "facets": dict(self.facets),
            "unparseable": self.unparseable,
        }


def aggregate_attribution(verdicts: Sequence[JudgeVerdict | None]) -> AttributionCounts:
    """Tally attribution verdicts; None entries count as unparseable."""
    facets = {facet.value: 0 for facet in Facet}
    what = how = unparseable = 0
    for verdict in verdicts:
        if verdict is None:
            unparseable += 1
            continue
        if verdict.is_what_to_solve:
            what += 1
            facets[verdict.facet.value] += 1
        else:
            how += 1
    return AttributionCounts(
        total=what + how,
        what_to_solve=what,
        how_to_solve=how,
        facets=facets,
        unparseable=unparseable,
    )
