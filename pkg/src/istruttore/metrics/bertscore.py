"""Greedy max-cosine token matching with baseline rescaling.

The embedder is pluggable: anything with ``embed(tokens) -> (n, dim)``
works. ``HashEmbedder`` provides deterministic per-token vectors so the
whole pipeline can run offline; it is a stand-in, not a trained model.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from istruttore.errors import UndefinedScoreError, ValidationError
from istruttore.metrics.rouge import tokenize


@dataclass(frozen=True)
class BertScoreResult:
    precision: float
    recall: float
    f1: float
    rescaled_f1: float


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


def bertscore(pred_embeddings, ref_embeddings, baseline: float = 0.0) -> BertScoreResult:
    """Score one prediction/reference pair of per-token embedding matrices."""
    if baseline >= 1.0:
        raise ValidationError(f"baseline must be < 1, got {baseline}")
    pred = np.atleast_2d(np.asarray(pred_embeddings, dtype=float))
    ref = np.atleast_2d(np.asarray(ref_embeddings, dtype=float))
    if pred.size == 0 or ref.size == 0:
        raise UndefinedScoreError("BERTScore is undefined for an empty token list")
    sim = _unit_rows(pred) @ _unit_rows(ref).T  # (n_pred, n_ref) cosines
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    rescaled = (f1 - baseline) / (1.0 - baseline)
    return BertScoreResult(precision=precision, recall=recall, f1=f1, rescaled_f1=rescaled)


class HashEmbedder:
    """Deterministic per-token unit vectors derived from a token content hash."""

    def __init__(self, dim: int = 32):
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        cached = self._cache.get(token)
        if cached is None:
            seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "little")
            vec = np.random.default_rng(seed).standard_normal(self.dim)
            cached = vec / np.linalg.norm(vec)
            self._cache[token] = cached
        return cached

    def embed(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self._vector(t) for t in tokens])


def bertscore_texts(prediction: str, reference: str, embedder, baseline: float = 0.0) -> BertScoreResult:
    """Tokenize two texts with the shared tokenizer, embed, and score."""
    pred_tokens = tokenize(prediction)
    ref_tokens = tokenize(reference)
    if not pred_tokens or not ref_tokens:
        raise UndefinedScoreError("BERTScore is undefined for an empty token list")
    return bertscore(embedder.embed(pred_tokens), embedder.embed(ref_tokens), baseline=baseline)
