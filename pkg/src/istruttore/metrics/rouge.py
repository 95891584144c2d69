"""N-gram and longest-common-subsequence overlap scores.

Tokenization is language-independent: lowercase, then split on runs of
non-alphanumeric characters (digits kept, no stemming, no stopwords).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

from istruttore._kernels import lcs_length
from istruttore.errors import ConfigurationError

# word characters minus underscore = Unicode alphanumerics
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


def _harmonic(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(prediction: str, reference: str, n: int) -> RougeScore:
    """Multiset n-gram overlap precision/recall/F1."""
    if n < 1:
        raise ConfigurationError(f"n-gram order must be >= 1, got {n}")
    pred = _ngram_counts(tokenize(prediction), n)
    ref = _ngram_counts(tokenize(reference), n)
    pred_total = sum(pred.values())
    ref_total = sum(ref.values())
    if pred_total == 0 or ref_total == 0:
        return RougeScore(0.0, 0.0, 0.0)
    overlap = sum((pred & ref).values())
    p = overlap / pred_total
    r = overlap / ref_total
    return RougeScore(p, r, _harmonic(p, r))


def rouge_l(prediction: str, reference: str) -> RougeScore:
    """Token-level longest-common-subsequence precision/recall/F1."""
    pred = tokenize(prediction)
    ref = tokenize(reference)
    if not pred or not ref:
        return RougeScore(0.0, 0.0, 0.0)
    ids: dict[str, int] = {}
    a = [ids.setdefault(t, len(ids)) for t in pred]
    b = [ids.setdefault(t, len(ids)) for t in ref]
    lcs = lcs_length(a, b)
    p = lcs / len(pred)
    r = lcs / len(ref)
    return RougeScore(p, r, _harmonic(p, r))
