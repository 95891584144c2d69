"""Token-level decoding over any logits provider.

Two modes are exposed: ``sample`` (temperature scaling, then top-k, then
top-p nucleus filtering, then a seeded draw) and ``beam`` (deterministic
length-normalized beam search that ignores temperature/k/p). A logits
provider is any callable mapping a token-id sequence to a logits vector
for the next position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from istruttore.errors import ConfigurationError, NumericError, ValidationError

MODE_SAMPLE = "sample"
MODE_BEAM = "beam"


@dataclass(frozen=True)
class DecodingConfig:
    temperature: float = 0.2
    top_p: float = 0.75
    top_k: int = 40
    num_beams: int = 4
    max_new_tokens: int = 256
    seed: int = 0
    mode: str = MODE_SAMPLE

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigurationError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 < self.top_p <= 1.0:
            raise ConfigurationError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.top_k < 1:
            raise ConfigurationError(f"top_k must be positive, got {self.top_k}")
        if self.num_beams < 1:
            raise ConfigurationError(f"num_beams must be positive, got {self.num_beams}")
        if self.max_new_tokens < 1:
            raise ConfigurationError(f"max_new_tokens must be positive, got {self.max_new_tokens}")
        if self.mode not in (MODE_SAMPLE, MODE_BEAM):
            raise ConfigurationError(f"mode must be 'sample' or 'beam', got {self.mode!r}")


def apply_temperature(logits, temperature: float) -> np.ndarray:
    if temperature <= 0:
        raise ConfigurationError(f"temperature must be positive, got {temperature}")
    return np.asarray(logits, dtype=float) / temperature


def filter_top_k_top_p(logits, k: int, p: float) -> np.ndarray:
    """Top-k then nucleus filtering; returns a full-size probability vector.

    The k highest logits are kept and softmaxed; the smallest prefix (in
    descending probability, ties broken by lower index) whose cumulative
    mass reaches p survives, with at least one token always kept. The
    survivors are renormalized; dropped indices get probability zero.
    """
    logits = np.asarray(logits, dtype=float)
    if logits.size == 0:
        raise ValidationError("cannot filter an empty logits vector")
    k = min(k, logits.size)
    order = np.argsort(-logits, kind="stable")[:k]
    kept = logits[order]
    z = np.exp(kept - kept.max())
    probs = z / z.sum()
    cumulative = np.cumsum(probs)
    n_keep = min(int(np.searchsorted(cumulative, p, side="left")), k - 1) + 1
    survivors = order[:n_keep]
    weights = probs[:n_keep] / probs[:n_keep].sum()
    out = np.zeros_like(logits)
    out[survivors] = weights
    return out


def sample_token(distribution, rng: np.random.Generator) -> int:
    """Draw one index from a normalized distribution; deterministic per seed."""
    dist = np.asarray(distribution, dtype=float)
    if (dist < 0).any() or abs(dist.sum() - 1.0) > 1e-9:
        raise NumericError(f"distribution is not normalized (sum={dist.sum()!r})")
    cumulative = np.cumsum(dist)
    idx = int(np.searchsorted(cumulative, rng.random(), side="right"))
    if idx >= dist.size:  # guard the floating-point tail
        idx = int(np.flatnonzero(dist)[-1])
    return idx


def sample_sequence(logits_fn, prompt_tokens, config: DecodingConfig,
                    eos_token: int | None = None,
                    rng: np.random.Generator | None = None) -> list[int]:
    """Temperature -> top-k -> top-p -> draw, until EOS or the token budget."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    tokens = list(prompt_tokens)
    generated: list[int] = []
    for _ in range(config.max_new_tokens):
        logits = apply_temperature(logits_fn(tokens), config.temperature)
        distribution = filter_top_k_top_p(logits, config.top_k, config.top_p)
        token = sample_token(distribution, rng)
        generated.append(token)
        tokens.append(token)
        if eos_token is not None and token == eos_token:
            break
    return generated


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return z - np.log(np.exp(z).sum())


@dataclass(frozen=True)
class _Beam:
    tokens: tuple[int, ...]
    logprob_sum: float
    finish_step: int  # step at which EOS was emitted; budget end otherwise

    def mean_logprob(self) -> float:
        return self.logprob_sum / max(len(self.tokens), 1)


def beam_search(logits_fn, prompt_tokens, num_beams: int = 4,
                max_new_tokens: int = 16, eos_token: int | None = None) -> list[int]:
    """Length-normalized beam search.

    Beams are pruned on cumulative log-probability; the returned beam is
    the one with the highest mean per-token log-probability, ties broken
    by earlier completion and then by lower token indices.
    """
    if num_beams < 1:
        raise ConfigurationError(f"num_beams must be positive, got {num_beams}")
    prompt = list(prompt_tokens)
    active = [_Beam(tokens=(), logprob_sum=0.0, finish_step=max_new_tokens)]
    completed: list[_Beam] = []
    for step in range(max_new_tokens):
        if not active:
            break
        candidates = []
        for beam in active:
            logprobs = _log_softmax(np.asarray(logits_fn(prompt + list(beam.tokens)), dtype=float))
            for token, logprob in enumerate(logprobs):
                candidates.append(
                    _Beam(
                        tokens=beam.tokens + (token,),
                        logprob_sum=beam.logprob_sum + float(logprob),
                        finish_step=max_new_tokens,
                    )
                )
        # stable sort: on equal scores the earlier (lower-index) expansion wins
        candidates.sort(key=lambda b: -b.logprob_sum)
        active = []
        for beam in candidates[:num_beams]:
            if eos_token is not None and beam.tokens[-1] == eos_token:
                completed.append(_Beam(beam.tokens, beam.logprob_sum, finish_step=step))
            else:
                active.append(beam)
    pool = completed + active
    best = min(pool, key=lambda b: (-b.mean_logprob(), b.finish_step, b.tokens))
    return list(best.tokens)


def decode(logits_fn, prompt_tokens, config: DecodingConfig,
           eos_token: int | None = None) -> list[int]:
    """Dispatch to the configured decoding mode."""
    if config.mode == MODE_BEAM:
        return beam_search(logits_fn, prompt_tokens, num_beams=config.num_beams,
                           max_new_tokens=config.max_new_tokens, eos_token=eos_token)
    return sample_sequence(logits_fn, prompt_tokens, config, eos_token=eos_token)
