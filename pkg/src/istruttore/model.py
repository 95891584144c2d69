"""A tiny attention language model with low-rank adapters on Q/V projections.

All math is float64 numpy. Sequences are processed one at a time (no batch
axis), which makes gradient accumulation bit-for-bit equal to a full-batch
pass. Base weights are created read-only: training touches adapters only.

Weight matrices are stored as (d_out, d_in); a projection computes
``x @ W.T``. An adapter holds ``A`` (r, d_in) and ``B`` (d_out, r) and adds
``(alpha / r) * (drop(x) @ A.T) @ B.T`` to its projection, i.e. the merged
weight update is ``delta = (alpha / r) * B @ A``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from istruttore.errors import ConfigurationError, ValidationError

INIT_STD = 0.02
# Embeddings need a larger scale than the projections: with a frozen tied
# output head behind a final LayerNorm, logit separation is bounded by the
# embedding row norms, and 0.02 would cap how confident the model can get.
EMB_STD = 0.25
_LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)

QUERY = "query"
VALUE = "value"


@dataclass(frozen=True)
class LoraConfig:
    r: int = 8
    alpha: float = 16.0
    dropout: float = 0.05
    target_projections: tuple[str, ...] = (QUERY, VALUE)

    def __post_init__(self):
        if self.r < 1:
            raise ConfigurationError(f"rank must be positive, got {self.r}")
        if self.alpha <= 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        bad = set(self.target_projections) - {QUERY, VALUE}
        if bad:
            raise ConfigurationError(f"unknown target projections: {sorted(bad)}")

    @property
    def scaling(self) -> float:
        return self.alpha / self.r


@dataclass
class LoraAdapter:
    A: np.ndarray  # (r, d_in)
    B: np.ndarray  # (d_out, r)
    config: LoraConfig

    def delta(self) -> np.ndarray:
        return adapter_delta(self)


def init_adapter(d_in: int, d_out: int, config: LoraConfig, seed) -> LoraAdapter:
    """A is seeded Gaussian (std 0.02), B is zero, so the initial delta is 0."""
    if config.r > min(d_in, d_out):
        raise ConfigurationError(
            f"rank {config.r} exceeds min(d_in, d_out) = {min(d_in, d_out)}"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return LoraAdapter(
        A=rng.normal(0.0, INIT_STD, (config.r, d_in)),
        B=np.zeros((d_out, config.r)),
        config=config,
    )


def adapter_delta(adapter: LoraAdapter) -> np.ndarray:
    """The effective weight update (alpha / r) * B @ A, shape (d_out, d_in)."""
    return adapter.config.scaling * (adapter.B @ adapter.A)


def merge_weights(base: np.ndarray, adapter: LoraAdapter) -> np.ndarray:
    """Fold an adapter into its base weight for adapter-free inference."""
    delta = adapter_delta(adapter)
    if base.shape != delta.shape:
        raise ValidationError(
            f"base shape {base.shape} does not match adapter delta shape {delta.shape}"
        )
    return base + delta


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 32
    n_layers: int = 2
    d_ff: int = 128
    max_seq_len: int = 256


def _gelu(x):
    u = _GELU_C * (x + 0.044715 * x**3)
    return 0.5 * x * (1.0 + np.tanh(u))


def _gelu_grad(x):
    u = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(u)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x**2)


def _ln_forward(x, g, b):
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return xhat * g + b, (xhat, inv, g)


def _ln_backward(dy, cache):
    xhat, inv, g = cache
    dxhat = dy * g
    return inv * (
        dxhat
        - dxhat.mean(axis=1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
    )


def _softmax_rows(x):
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class _Proj:
    """Cache of one adapted projection for the backward pass."""

    x_dropped: np.ndarray | None = None
    u: np.ndarray | None = None
    mask: np.ndarray | None = None


class TinyLM:
    """Two-layer single-head causal transformer with tied embeddings."""

    def __init__(self, config: ModelConfig, seed: int):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        c = config

        def w(*shape):
            return rng.normal(0.0, INIT_STD, shape)

        self.params: dict[str, np.ndarray] = {
            "tok_emb": rng.normal(0.0, EMB_STD, (c.vocab_size, c.d_model)),
            "pos_emb": rng.normal(0.0, EMB_STD, (c.max_seq_len, c.d_model)),
        }
        for l in range(c.n_layers):
            p = f"layer{l}."
            self.params[p + "ln1_g"] = np.ones(c.d_model)
            self.params[p + "ln1_b"] = np.zeros(c.d_model)
            self.params[p + "wq"] = w(c.d_model, c.d_model)
            self.params[p + "wk"] = w(c.d_model, c.d_model)
            self.params[p + "wv"] = w(c.d_model, c.d_model)
            self.params[p + "wo"] = w(c.d_model, c.d_model)
            self.params[p + "ln2_g"] = np.ones(c.d_model)
            self.params[p + "ln2_b"] = np.zeros(c.d_model)
            self.params[p + "w1"] = w(c.d_ff, c.d_model)
            self.params[p + "b1"] = np.zeros(c.d_ff)
            self.params[p + "w2"] = w(c.d_model, c.d_ff)
            self.params[p + "b2"] = np.zeros(c.d_model)
        self.params["lnf_g"] = np.ones(c.d_model)
        self.params["lnf_b"] = np.zeros(c.d_model)
        for arr in self.params.values():
            arr.flags.writeable = False

    # -- adapters ----------------------------------------------------------

    def adapter_names(self, config: LoraConfig) -> list[str]:
        names = []
        for l in range(self.config.n_layers):
            for proj in (QUERY, VALUE):
                if proj in config.target_projections:
                    names.append(f"layer{l}.{proj}")
        return names

    def init_adapters(self, config: LoraConfig, seed: int) -> dict[str, LoraAdapter]:
        rng = np.random.default_rng(seed)
        d = self.config.d_model
        return {name: init_adapter(d, d, config, rng) for name in self.adapter_names(config)}

    def base_state_hash(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.params):
            digest.update(name.encode())
            digest.update(self.params[name].tobytes())
        return digest.hexdigest()

    # -- forward / backward ------------------------------------------------

    def _apply_proj(self, a, w_name, adapter, dropout_rng, proj_cache):
        y = a @ self.params[w_name].T
        if adapter is None:
            return y
        x = a
        mask = None
        p = adapter.config.dropout
        if dropout_rng is not None and p > 0.0:
            mask = (dropout_rng.random(a.shape) >= p).astype(float) / (1.0 - p)
            x = a * mask
        u = x @ adapter.A.T
        proj_cache.x_dropped = x
        proj_cache.u = u
        proj_cache.mask = mask
        return y + adapter.config.scaling * (u @ adapter.B.T)

    def forward(self, tokens, adapters=None, dropout_rng=None, want_cache=False):
        """Logits (T, vocab) for a token sequence; optionally keep a cache."""
        c = self.config
        tokens = list(tokens)
        if len(tokens) > c.max_seq_len:
            tokens = tokens[-c.max_seq_len:]
        if not tokens:
            raise ValidationError("cannot run the model on an empty token sequence")
        adapters = adapters or {}
        T = len(tokens)
        scale = 1.0 / math.sqrt(c.d_model)
        h = self.params["tok_emb"][tokens] + self.params["pos_emb"][:T]
        causal = np.triu(np.full((T, T), -np.inf), k=1)
        cache = {"tokens": tokens, "layers": []}
        for l in range(c.n_layers):
            p = f"layer{l}."
            lc = {}
            x = h
            a, lc["ln1"] = _ln_forward(x, self.params[p + "ln1_g"], self.params[p + "ln1_b"])
            lc["a"] = a
            q_cache, v_cache = _Proj(), _Proj()
            q = self._apply_proj(a, p + "wq", adapters.get(f"layer{l}.{QUERY}"), dropout_rng, q_cache)
            k = a @ self.params[p + "wk"].T
            v = self._apply_proj(a, p + "wv", adapters.get(f"layer{l}.{VALUE}"), dropout_rng, v_cache)
            s = q @ k.T * scale + causal
            probs = _softmax_rows(s)
            attn = probs @ v
            x2 = x + attn @ self.params[p + "wo"].T
            m, lc["ln2"] = _ln_forward(x2, self.params[p + "ln2_g"], self.params[p + "ln2_b"])
            f1 = m @ self.params[p + "w1"].T + self.params[p + "b1"]
            g = _gelu(f1)
            h = x2 + g @ self.params[p + "w2"].T + self.params[p + "b2"]
            lc.update(q=q, k=k, v=v, probs=probs, attn=attn, f1=f1, g=g,
                      q_proj=q_cache, v_proj=v_cache)
            cache["layers"].append(lc)
        hf, lnf_cache = _ln_forward(h, self.params["lnf_g"], self.params["lnf_b"])
        logits = hf @ self.params["tok_emb"].T
        if want_cache:
            cache["lnf"] = lnf_cache
            return logits, cache
        return logits

    def next_token_logits(self, tokens, adapters=None) -> np.ndarray:
        return self.forward(tokens, adapters=adapters)[-1]

    def _proj_backward(self, dy, a, w_name, adapter, proj_cache, grads, name):
        da = dy @ self.params[w_name]
        if adapter is None:
            return da
        s = adapter.config.scaling
        du = s * (dy @ adapter.B)  # (T, r)
        grads[name] = (
            grads[name][0] + du.T @ proj_cache.x_dropped,
            grads[name][1] + s * (dy.T @ proj_cache.u),
        )
        dx = du @ adapter.A
        if proj_cache.mask is not None:
            dx = dx * proj_cache.mask
        return da + dx

    def response_loss(self, tokens, loss_start, adapters=None, dropout_rng=None,
                      want_grads=True):
        """Summed next-token cross-entropy over the response region.

        ``loss_start`` is the index of the first token whose prediction is
        scored; everything before it (the prompt) is masked out. Returns
        ``(loss_sum, n_tokens, grads)`` where grads maps adapter name to
        ``(dA, dB)`` of the *summed* loss, or ``None`` without gradients.
        """
        c = self.config
        tokens = list(tokens)
        if len(tokens) > c.max_seq_len:
            tokens = tokens[: c.max_seq_len]
        if len(tokens) < 2:
            return 0.0, 0, ({} if want_grads else None)
        inputs = tokens[:-1]
        targets = np.asarray(tokens[1:])
        # logits row i predicts tokens[i + 1]
        mask = np.arange(1, len(tokens)) >= loss_start
        n_tokens = int(mask.sum())
        if n_tokens == 0:
            return 0.0, 0, ({} if want_grads else None)
        adapters = adapters or {}
        if want_grads:
            logits, cache = self.forward(inputs, adapters, dropout_rng, want_cache=True)
        else:
            logits = self.forward(inputs, adapters, dropout_rng)
        probs = _softmax_rows(logits)
        rows = np.arange(len(inputs))
        token_losses = -np.log(probs[rows, targets])
        loss_sum = float(token_losses[mask].sum())
        if not want_grads:
            return loss_sum, n_tokens, None
        dlogits = probs.copy()
        dlogits[rows, targets] -= 1.0
        dlogits[~mask] = 0.0
        grads = {name: (np.zeros_like(ad.A), np.zeros_like(ad.B))
                 for name, ad in adapters.items()}
        self._backward(dlogits, cache, adapters, grads)
        return loss_sum, n_tokens, grads

    def _backward(self, dlogits, cache, adapters, grads):
        c = self.config
        scale = 1.0 / math.sqrt(c.d_model)
        dhf = dlogits @ self.params["tok_emb"]
        dh = _ln_backward(dhf, cache["lnf"])
        for l in reversed(range(c.n_layers)):
            p = f"layer{l}."
            lc = cache["layers"][l]
            # h_out = x2 + gelu(m @ W1.T + b1) @ W2.T + b2
            dg = dh @ self.params[p + "w2"]
            df1 = dg * _gelu_grad(lc["f1"])
            dm = df1 @ self.params[p + "w1"]
            dx2 = dh + _ln_backward(dm, lc["ln2"])
            # x2 = x + (probs @ v) @ Wo.T
            dattn = dx2 @ self.params[p + "wo"]
            dprobs = dattn @ lc["v"].T
            dv = lc["probs"].T @ dattn
            ds = lc["probs"] * (dprobs - (dprobs * lc["probs"]).sum(axis=1, keepdims=True))
            dq = ds @ lc["k"] * scale
            dk = ds.T @ lc["q"] * scale
            da = self._proj_backward(dq, lc["a"], p + "wq",
                                     adapters.get(f"layer{l}.{QUERY}"),
                                     lc["q_proj"], grads, f"layer{l}.{QUERY}")
            da += dk @ self.params[p + "wk"]
            da += self._proj_backward(dv, lc["a"], p + "wv",
                                      adapters.get(f"layer{l}.{VALUE}"),
                                      lc["v_proj"], grads, f"layer{l}.{VALUE}")
            dh = dx2 + _ln_backward(da, lc["ln1"])


def trainable_parameter_count(adapters: dict[str, LoraAdapter]) -> int:
    return sum(ad.A.size + ad.B.size for ad in adapters.values())
