"""Pairwise-judge win-rate harness and a deterministic retrieval-precision
proxy that runs fully offline."""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .corpus import Dialogue, Role
from .tagging import RoundTagTable


class EvaluationError(RuntimeError):
    pass


class UnparseableVerdictError(EvaluationError):
    def __init__(self, raw: str):
        super().__init__(f"judge verdict does not end in 'm' or 'M': {raw!r}")
        self.raw = raw


JUDGE_PROMPT_TEMPLATE = """
I'll provide you with task prompts given to these models and their corresponding outputs.
    Your task is to assess these responses, and select the model that produces the output that is most smooth and consistent with the ground truth dialogue.
    Please note that it is very important for model to provide response in a **similar style and content**.

    ## Instruction

    {{{{
        "instruction": \"\"\"Please act as a helpful customer service agent and complete the following dialogue: \"\"\",
        "input":
        \"\"\"
            {task_input}
        \"\"\",
        "ground truth answer": \"\"\"
            {raw_diag}
        \"\"\"
    \"\"\"
    }}}}

    ## Model Outputs

    Here are the unordered outputs from the models. Each output is associated with a specific model, identified by a unique model identifier.

    {{{{
        {{{{
            "model_identifier": "m",
            "output": \"\"\"
    {pred_cmp_diag}
            \"\"\"
        }}}},
        {{{{
            "model_identifier": "M",
            "output": \"\"\"
    {pred_diag}
            \"\"\"
        }}}}
    }}}}

    ## Task

    Evaluate the models based on the quality and relevance of their outputs, and select the model that generated the best output.
    Answer by first providing a concise explanation and then end your answer by providing the model identifier of the best output.
    We will use the last character of your output `output[-1]` as the name of the best model, so make sure you finish with the token of the model identifiers and nothing else: `m` or `M` (no quotes, no dots, no backticks, no new lines, ...).

    ## Your answer: "Concise explanation" followed by "Which is best, m or M?"
""".strip()


@dataclass(frozen=True)
class JudgeRequest:
    prompt: str
    ground_truth_text: str
    output_m: str
    output_upper: str


class JudgeClient(Protocol):
    def judge(self, request: JudgeRequest) -> str: ...


def _token_f1(prediction: str, reference: str) -> float:
    pred = prediction.lower().split()
    ref = reference.lower().split()
    if not pred or not ref:
        return 0.0
    overlap = sum((Counter(pred) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


class ScriptedJudge:
    """Offline judge: token-overlap F1 against the ground truth, higher wins.
    Ties go to 'M' so the verdict stays deterministic."""

    def judge(self, request: JudgeRequest) -> str:
        f1_m = _token_f1(request.output_m, request.ground_truth_text)
        f1_upper = _token_f1(request.output_upper, request.ground_truth_text)
        winner = "m" if f1_m > f1_upper else "M"
        return f"### Concise explanation\nF1 m={f1_m:.4f} M={f1_upper:.4f}\n\n### Which is best, m or M?\n{winner}"


@dataclass(frozen=True)
class Judgment:
    test_id: int
    winner: str  # "candidate" | "competitor"
    raw: str
    presentation: str  # "candidate-first" | "competitor-first"


def parse_verdict(raw: str) -> str:
    """Return 'm' or 'M' from the final character of the judge output."""
    stripped = raw.rstrip()
    if not stripped or stripped[-1] not in ("m", "M"):
        raise UnparseableVerdictError(raw)
    return stripped[-1]


def _transcript(dialogue: Dialogue) -> str:
    return "\n".join(dialogue.transcript_lines())


def _user_turns(dialogue: Dialogue) -> str:
    return "\n".join(
        f"{u.round} {u.role.value.upper()}: {u.text}"
        for u in dialogue.utterances
        if u.role is Role.USER
    )


def judge_pair(
    ground_truth: Dialogue,
    candidate: Dialogue,
    competitor: Dialogue,
    judge: JudgeClient,
    seed: int,
    test_id: int = 0,
) -> Judgment:
    """Single pairwise comparison with seeded presentation-order shuffling to
    offset position bias; the winner is read from the output's last character."""
    candidate_first = random.Random(seed).random() < 0.5
    if candidate_first:
        output_m, output_upper = _transcript(candidate), _transcript(competitor)
        presentation = "candidate-first"
    else:
        output_m, output_upper = _transcript(competitor), _transcript(candidate)
        presentation = "competitor-first"
    request = JudgeRequest(
        prompt=JUDGE_PROMPT_TEMPLATE.format(
            task_input=_user_turns(ground_truth),
            raw_diag=_transcript(ground_truth),
            pred_cmp_diag=output_m,
            pred_diag=output_upper,
        ),
        ground_truth_text=_transcript(ground_truth),
        output_m=output_m,
        output_upper=output_upper,
    )
    raw = judge.judge(request)
    verdict = parse_verdict(raw)
    if candidate_first:
        winner = "candidate" if verdict == "m" else "competitor"
    else:
        winner = "candidate" if verdict == "M" else "competitor"
    return Judgment(test_id=test_id, winner=winner, raw=raw, presentation=presentation)


def compute_win_rate(judgments: Sequence[Judgment]) -> float:
    if not judgments:
        raise EvaluationError("win rate undefined on an empty judgment list")
    wins = sum(1 for j in judgments if j.winner == "candidate")
    return 100.0 * wins / len(judgments)


@dataclass(frozen=True)
class RetrievalOutcome:
    """One test turn's retrieval: the exemplars pulled and the turn's own tags."""

    exemplar_ids: tuple[int, ...]
    round: int
    role: Role
    test_tags: frozenset[str]


def retrieval_precision(outcomes: Iterable[RetrievalOutcome], table: RoundTagTable) -> float:
    """Fraction of retrieved exemplars sharing at least one tag with the test
    turn at the same (round, role)."""
    hits = 0
    total = 0
    for outcome in outcomes:
        entries = table.entries(outcome.round, outcome.role)
        for exemplar_id in outcome.exemplar_ids:
            total += 1
            if entries.get(exemplar_id, frozenset()) & outcome.test_tags:
                hits += 1
    if total == 0:
        raise EvaluationError("retrieval precision undefined with zero retrieved exemplars")
    return hits / total


def expected_random_precision(outcomes: Iterable[RetrievalOutcome], table: RoundTagTable, corpus_ids: Sequence[int]) -> float:
    """Exact expected precision of uniform sampling without replacement.

    By symmetry each sampled exemplar matches a test turn with probability
    (matching dialogues / corpus size), so the expectation is that share
    averaged over test turns.
    """
    shares = []
    n = len(corpus_ids)
    if n == 0:
        raise EvaluationError("empty corpus")
    for outcome in outcomes:
        entries = table.entries(outcome.round, outcome.role)
        matching = sum(
            1 for i in corpus_ids if entries.get(i, frozenset()) & outcome.test_tags
        )
        shares.append(matching / n)
    if not shares:
        raise EvaluationError("no test turns")
    return sum(shares) / len(shares)


@dataclass
class EvalReport:
    win_rate: float | None
    counts: dict[str, int] = field(default_factory=dict)
    retrieval_precision: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    judge_id: str = "scripted"
    unparseable: int = 0

    def to_document(self) -> dict:
        return {
            "win_rate": self.win_rate,
            "counts": self.counts,
            "retrieval_precision": self.retrieval_precision,
            "seed": self.seed,
            "judge": self.judge_id,
            "unparseable": self.unparseable,
        }
