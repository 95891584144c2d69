"""Exact match and token-bag F1 with the standard answer normalization.

Normalization removes only the English articles a/an/the; Italian articles
are kept. This mirrors the lineage of the usual extractive-QA scoring
script rather than applying language-specific handling.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass

from istruttore.errors import ValidationError

_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def squad_normalize(answer: str) -> str:
    """Lowercase, strip punctuation, drop standalone a/an/the, collapse spaces."""
    text = answer.lower()
    text = text.translate(_PUNCT_TABLE)
    text = _ARTICLE_RE.sub(" ", text)
    return " ".join(text.split())


@dataclass(frozen=True)
class SquadScore:
    em: int
    f1: float


def _bag_f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens or not gold_tokens:
        # both empty counts as a match, one-sided empty as a miss
        return float(pred_tokens == gold_tokens)
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    p = overlap / len(pred_tokens)
    r = overlap / len(gold_tokens)
    return 2 * p * r / (p + r)


def squad_em_f1(prediction: str, gold_answers: list[str] | tuple[str, ...]) -> SquadScore:
    """EM against any gold; F1 as the max token-bag F1 over golds."""
    if not gold_answers:
        raise ValidationError("gold_answers must be non-empty")
    norm_pred = squad_normalize(prediction)
    norm_golds = [squad_normalize(g) for g in gold_answers]
    em = int(any(norm_pred == g for g in norm_golds))
    f1 = max(_bag_f1(norm_pred.split(), g.split()) for g in norm_golds)
    return SquadScore(em=em, f1=f1)
