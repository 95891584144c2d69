"""Binary answer-correctness verdicts from an external chat-completion judge.

The judge prompt is pinned as a golden file (``fixtures/judge_prompt.txt``).
A verdict is parsed as the first standalone '0' or '1' in the response,
where standalone means not adjacent to another letter or digit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from istruttore.errors import JudgeParseError

JUDGE_PROMPT = (
    "Question: {q}\n"
    "Ground-truth answer: {gold}\n"
    "Model answer: {pred}\n"
    "Is the model answer correct given the ground truth? "
    "Reply with exactly one character: 1 for correct, 0 for incorrect."
)

_VERDICT_RE = re.compile(r"(?<![0-9A-Za-z])([01])(?![0-9A-Za-z])")


@dataclass(frozen=True)
class JudgeVerdict:
    verdict: int
    raw_response: str
    question: str
    gold: str
    prediction: str


def build_judge_prompt(question: str, gold: str, prediction: str) -> str:
    return JUDGE_PROMPT.format(q=question, gold=gold, pred=prediction)


def parse_verdict(raw_response: str) -> int:
    match = _VERDICT_RE.search(raw_response)
    if match is None:
        raise JudgeParseError(
            f"judge response contains no standalone 0/1 verdict: {raw_response!r}",
            raw_response=raw_response,
        )
    return int(match.group(1))


def em_gpt_judge(question: str, gold: str, prediction: str, client) -> JudgeVerdict:
    """Ask ``client`` (a chat transport) whether ``prediction`` answers correctly."""
    raw = client.complete(build_judge_prompt(question, gold, prediction))
    return JudgeVerdict(
        verdict=parse_verdict(raw),
        raw_response=raw,
        question=question,
        gold=gold,
        prediction=prediction,
    )
