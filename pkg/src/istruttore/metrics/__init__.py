"""Evaluation metrics: ROUGE-1/2/L, SQuAD EM/F1, BERTScore, judge verdicts."""

from istruttore.metrics.aggregate import ScoreReport, aggregate
from istruttore.metrics.bertscore import BertScoreResult, HashEmbedder, bertscore, bertscore_texts
from istruttore.metrics.judge import (
    JUDGE_PROMPT,
    JudgeVerdict,
    build_judge_prompt,
    em_gpt_judge,
    parse_verdict,
)
from istruttore.metrics.rouge import RougeScore, rouge_l, rouge_n, tokenize
from istruttore.metrics.squad import SquadScore, squad_em_f1, squad_normalize

__all__ = [
    "BertScoreResult",
    "HashEmbedder",
    "JUDGE_PROMPT",
    "JudgeVerdict",
    "RougeScore",
    "ScoreReport",
    "SquadScore",
    "aggregate",
    "bertscore",
    "bertscore_texts",
    "build_judge_prompt",
    "em_gpt_judge",
    "parse_verdict",
    "rouge_l",
    "rouge_n",
    "squad_em_f1",
    "squad_normalize",
    "tokenize",
]
