"""LoRA training: decoupled-weight-decay Adam, warmup, gradient accumulation.

Gradients accumulate as unnormalized sums plus token counts and are divided
once per optimizer step, so one update built from micro-batches is exactly
the update a single full-batch pass would produce (dropout disabled).
Only adapter matrices are updated; base weights are read-only by
construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from istruttore.errors import ConfigurationError, NumericError, ValidationError
from istruttore.model import LoraAdapter, LoraConfig, ModelConfig, TinyLM
from istruttore.prompts import RESPONSE_MARKER
from istruttore.tokenizer import CharTokenizer


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 3e-4
    epochs: int = 3
    micro_batch: int = 4
    virtual_batch: int = 128
    warmup_steps: int = 100
    max_length: int = 256
    seed: int = 0
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.epochs < 1 or self.micro_batch < 1 or self.virtual_batch < 1:
            raise ConfigurationError("epochs and batch sizes must be positive")
        if self.virtual_batch % self.micro_batch != 0:
            raise ConfigurationError(
                f"virtual_batch {self.virtual_batch} must be a multiple of "
                f"micro_batch {self.micro_batch}"
            )
        if self.warmup_steps < 0:
            raise ConfigurationError("warmup_steps must be non-negative")
        if self.max_length < 1:
            raise ConfigurationError("max_length must be positive")

    @property
    def accumulation_factor(self) -> int:
        return self.virtual_batch // self.micro_batch


class AdamW:
    """Adam with decoupled weight decay over a dict of named arrays."""

    def __init__(self, arrays: dict[str, np.ndarray], lr: float,
                 betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.0):
        self.arrays = arrays
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self._v = {k: np.zeros_like(v) for k, v in arrays.items()}

    def step(self, grads: dict[str, np.ndarray], lr_scale: float = 1.0) -> None:
        self.t += 1
        lr = self.lr * lr_scale
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for key, theta in self.arrays.items():
            g = grads[key]
            m = self._m[key]
            v = self._v[key]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + self.eps)
            theta -= lr * (update + self.weight_decay * theta)


def warmup_scale(step: int, warmup_steps: int) -> float:
    """Linear warmup over ``warmup_steps`` optimizer steps, then constant."""
    if warmup_steps <= 0:
        return 1.0
    return min(1.0, step / warmup_steps)


def encode_training_prompt(tokenizer: CharTokenizer, text: str, max_length: int):
    """Tokenize a training render; return (tokens, index of first scored token)."""
    idx = text.rfind(RESPONSE_MARKER)
    if idx < 0:
        raise ValidationError(f"training prompt contains no '{RESPONSE_MARKER}' marker")
    start = idx + len(RESPONSE_MARKER)
    if start < len(text) and text[start] == "\n":
        start += 1
    tokens = tokenizer.encode(text)
    tokens = tokens[:max_length]
    return tokens, 1 + start  # +1 for the BOS token


@dataclass
class TrainResult:
    adapters: dict[str, LoraAdapter]
    epoch_losses: list[float]
    step_losses: list[tuple[int, int, float]]  # (epoch, global micro-step, loss)


def build_toy_model(prompts, d_model: int = 32, n_layers: int = 2, d_ff: int = 128,
                    max_seq_len: int = 256, seed: int = 0):
    """Construct a character tokenizer and a seeded base model for a corpus."""
    tokenizer = CharTokenizer.from_texts(prompts)
    config = ModelConfig(vocab_size=tokenizer.vocab_size, d_model=d_model,
                         n_layers=n_layers, d_ff=d_ff, max_seq_len=max_seq_len)
    return TinyLM(config, seed=seed), tokenizer


def train(model: TinyLM, tokenizer: CharTokenizer, prompts: list[str],
          tcfg: TrainingConfig, lcfg: LoraConfig) -> TrainResult:
    """Train LoRA adapters on rendered training prompts.

    The loss is mean next-token cross-entropy over the tokens after the
    response marker only. Accumulation windows are strict: an update fires
    every ``virtual_batch / micro_batch`` micro-steps (windows may span
    epoch boundaries); a trailing partial window is flushed at the end.
    Returns per-epoch mean losses alongside the trained adapters.
    """
    if not prompts:
        raise ConfigurationError("training dataset is empty")
    examples = [encode_training_prompt(tokenizer, p, tcfg.max_length) for p in prompts]
    if all(max(0, len(t) - s) == 0 for t, s in examples):
        raise ConfigurationError(
            "no response tokens survive truncation; nothing to train on"
        )
    seq = np.random.SeedSequence(tcfg.seed)
    init_seed, dropout_seed = (int(s.generate_state(1)[0]) for s in seq.spawn(2))
    adapters = model.init_adapters(lcfg, seed=init_seed)
    dropout_rng = np.random.default_rng(dropout_seed)

    arrays: dict[str, np.ndarray] = {}
    for name, adapter in adapters.items():
        arrays[name + ".A"] = adapter.A
        arrays[name + ".B"] = adapter.B
    optimizer = AdamW(arrays, lr=tcfg.learning_rate, weight_decay=tcfg.weight_decay)

    accum = {k: np.zeros_like(v) for k, v in arrays.items()}
    accum_tokens = 0
    window = 0
    opt_step = 0
    global_step = 0
    epoch_losses: list[float] = []
    step_losses: list[tuple[int, int, float]] = []

    def flush_update():
        nonlocal accum_tokens, window, opt_step
        if accum_tokens == 0:
            window = 0
            return
        grads = {k: accum[k] / accum_tokens for k in accum}
        opt_step += 1
        optimizer.step(grads, lr_scale=warmup_scale(opt_step, tcfg.warmup_steps))
        for arr in accum.values():
            arr.fill(0.0)
        accum_tokens = 0
        window = 0

    for epoch in range(1, tcfg.epochs + 1):
        epoch_loss_sum = 0.0
        epoch_tokens = 0
        for i in range(0, len(examples), tcfg.micro_batch):
            batch = examples[i : i + tcfg.micro_batch]
            batch_loss = 0.0
            batch_tokens = 0
            for tokens, loss_start in batch:
                loss_sum, n, grads = model.response_loss(
                    tokens, loss_start, adapters, dropout_rng=dropout_rng
                )
                batch_loss += loss_sum
                batch_tokens += n
                for name, (d_a, d_b) in grads.items():
                    accum[name + ".A"] += d_a
                    accum[name + ".B"] += d_b
            global_step += 1
            if not math.isfinite(batch_loss):
                raise NumericError(f"non-finite loss at micro-step {global_step}")
            epoch_loss_sum += batch_loss
            epoch_tokens += batch_tokens
            accum_tokens += batch_tokens
            if batch_tokens:
                step_losses.append((epoch, global_step, batch_loss / batch_tokens))
            window += 1
            if window == tcfg.accumulation_factor:
                flush_update()
        epoch_losses.append(epoch_loss_sum / max(epoch_tokens, 1))
    flush_update()  # trailing partial window
    return TrainResult(adapters=adapters, epoch_losses=epoch_losses, step_losses=step_losses)


def grad_check(model: TinyLM, adapters: dict[str, LoraAdapter], tokens,
               loss_start: int, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Every A and B entry is perturbed. The relative-error denominator is
    floored at 1e-4 so near-zero entries are compared absolutely (at
    ~1e-8), below the resolution of float64 central differences.
    """
    _, n, grads = model.response_loss(tokens, loss_start, adapters, want_grads=True)
    if n == 0:
        raise ValidationError("sample has no response tokens to score")

    def loss_at() -> float:
        value, _, _ = model.response_loss(tokens, loss_start, adapters, want_grads=False)
        return value

    max_rel = 0.0
    for name, adapter in adapters.items():
        for which, arr in ((0, adapter.A), (1, adapter.B)):
            analytic = grads[name][which]
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                plus = loss_at()
                arr[idx] = orig - h
                minus = loss_at()
                arr[idx] = orig
                numeric = (plus - minus) / (2.0 * h)
                rel = abs(analytic[idx] - numeric) / max(abs(analytic[idx]), abs(numeric), 1e-4)
                max_rel = max(max_rel, rel)
    return max_rel


# -- checkpoint files -------------------------------------------------------


def save_adapters(path, adapters: dict[str, LoraAdapter]) -> None:
    configs = {id(a.config): a.config for a in adapters.values()}
    if len(configs) > 1:
        raise ValidationError("all adapters in a checkpoint must share one config")
    config = next(iter(adapters.values())).config
    payload = {
        "config": {
            "r": config.r,
            "alpha": config.alpha,
            "dropout": config.dropout,
            "targets": list(config.target_projections),
        },
        "layers": [
            {"name": name, "A": adapters[name].A.tolist(), "B": adapters[name].B.tolist()}
            for name in sorted(adapters)
        ],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)


def load_adapters(path) -> dict[str, LoraAdapter]:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    raw = payload["config"]
    config = LoraConfig(
        r=raw["r"],
        alpha=raw["alpha"],
        dropout=raw["dropout"],
        target_projections=tuple(raw["targets"]),
    )
    adapters = {}
    for layer in payload["layers"]:
        a = np.asarray(layer["A"], dtype=float)
        b = np.asarray(layer["B"], dtype=float)
        if a.ndim != 2 or b.ndim != 2 or a.shape[0] != config.r or b.shape[1] != config.r:
            raise ValidationError(f"adapter '{layer['name']}' has inconsistent shapes")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValidationError(f"adapter '{layer['name']}' contains non-finite entries")
        adapters[layer["name"]] = LoraAdapter(A=a, B=b, config=config)
    return adapters


def save_model_spec(path, model: TinyLM, tokenizer: CharTokenizer) -> None:
    c = model.config
    payload = {
        "seed": model.seed,
        "d_model": c.d_model,
        "n_layers": c.n_layers,
        "d_ff": c.d_ff,
        "max_seq_len": c.max_seq_len,
        "vocab": tokenizer.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)


def load_model_spec(path):
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    tokenizer = CharTokenizer.from_dict(payload["vocab"])
    config = ModelConfig(
        vocab_size=tokenizer.vocab_size,
        d_model=payload["d_model"],
        n_layers=payload["n_layers"],
        d_ff=payload["d_ff"],
        max_seq_len=payload["max_seq_len"],
    )
    return TinyLM(config, seed=payload["seed"]), tokenizer


def write_loss_csv(path, step_losses) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("epoch,step,loss\n")
        for epoch, step, loss in step_losses:
            handle.write(f"{epoch},{step},{loss:.6f}\n")
