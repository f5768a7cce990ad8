"""Conditioning encoders: scaled dot-product attention, sinusoidal timestep
embeddings, the writer-style embedding table, and the character-level
transformer text encoder whose outputs feed the denoiser's cross-attention."""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeMismatch

MASK_OFF = -1e9


def timestep_embedding(t, dim, dtype=np.float32):
    """Sinusoidal embedding: half sines, half cosines over geometrically
    spaced frequencies with base 10000. t may be a scalar or a 1-D array."""
    if dim % 2:
        raise ConfigError(f"embedding dim must be even, got {dim}")
    t = np.asarray(t, dtype=np.float64)
    half = dim // 2
    freqs = np.power(10000.0, -np.arange(half) / half)
    ang = t[..., None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1).astype(dtype)


def positional_encoding(n_positions, dim, dtype=np.float32):
    return timestep_embedding(np.arange(n_positions), dim, dtype)


def attention(q, k, v, mask=None):
    """softmax(Q K^T / sqrt(d_k)) V for 2-D or batched 3-D operands.

    ``mask`` is an optional additive array broadcastable onto the score
    matrix (use MASK_OFF to exclude keys).  Every output row is a convex
    combination of rows of V.
    """
    if k.data.shape[-2] != v.data.shape[-2]:
        raise ShapeMismatch(f"attention: K rows {k.data.shape} vs V rows {v.data.shape}")
    if q.data.shape[-1] != k.data.shape[-1]:
        raise ShapeMismatch(f"attention: Q cols {q.data.shape} vs K cols {k.data.shape}")
    d_k = q.data.shape[-1]
    axes = (1, 0) if k.data.ndim == 2 else (0, 2, 1)
    scores = ad.scale(ad.matmul(q, ad.transpose(k, axes)), 1.0 / math.sqrt(d_k))
    if mask is not None:
        scores = ad.add(scores, ad.Tensor(np.asarray(mask, dtype=scores.data.dtype)))
    return ad.matmul(ad.softmax(scores), v)


def style_embedding(table, writer_id):
    """Look up one writer's style vector; writer_id may be scalar or array."""
    return ad.embedding(table, np.asarray(writer_id))


def combine(t_emb, s_emb):
    """Elementwise sum of timestep and style embeddings."""
    return ad.add(t_emb, s_emb)


def init_style_table(params, n_styles, dim, rng, prefix="style"):
    return params.add(f"{prefix}.table", (rng.standard_normal((n_styles, dim)) * 0.02).astype(np.float32))


# ---------------------------------------------------------------------------
# text encoder


@dataclass(frozen=True)
class TextEncoderConfig:
    dim: int = 256
    n_heads: int = 4
    n_layers: int = 2
    ff_mult: int = 2

    def __post_init__(self):
        if self.dim % self.n_heads:
            raise ConfigError(f"text dim {self.dim} not divisible by {self.n_heads} heads")

    def to_dict(self):
        return {"dim": self.dim, "n_heads": self.n_heads,
                "n_layers": self.n_layers, "ff_mult": self.ff_mult}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _w(rng, fan_in, fan_out, gain=1.0):
    return (rng.standard_normal((fan_in, fan_out)) * gain / math.sqrt(fan_in)).astype(np.float32)


def init_text_encoder(params, vocab, cfg, rng, prefix="text"):
    d = cfg.dim
    params.add(f"{prefix}.embed", (rng.standard_normal((vocab.n_ids, d)) / math.sqrt(d)).astype(np.float32))
    for layer in range(cfg.n_layers):
        p = f"{prefix}.l{layer}"
        for name in ("wq", "wk", "wv", "wo"):
            params.add(f"{p}.{name}", _w(rng, d, d))
        params.add(f"{p}.ln1.g", np.ones(d, dtype=np.float32))
        params.add(f"{p}.ln1.b", np.zeros(d, dtype=np.float32))
        ff = d * cfg.ff_mult
        params.add(f"{p}.ff.w1", _w(rng, d, ff, gain=math.sqrt(2.0)))
        params.add(f"{p}.ff.b1", np.zeros(ff, dtype=np.float32))
        params.add(f"{p}.ff.w2", _w(rng, ff, d))
        params.add(f"{p}.ff.b2", np.zeros(d, dtype=np.float32))
        params.add(f"{p}.ln2.g", np.ones(d, dtype=np.float32))
        params.add(f"{p}.ln2.b", np.zeros(d, dtype=np.float32))


def _split_heads(x, n_heads):
    b, l, d = x.data.shape
    dh = d // n_heads
    x = ad.reshape(x, (b, l, n_heads, dh))
    x = ad.transpose(x, (0, 2, 1, 3))
    return ad.reshape(x, (b * n_heads, l, dh))


def _merge_heads(x, n_heads):
    bh, l, dh = x.data.shape
    b = bh // n_heads
    x = ad.reshape(x, (b, n_heads, l, dh))
    x = ad.transpose(x, (0, 2, 1, 3))
    return ad.reshape(x, (b, l, n_heads * dh))


def multi_head_attention(q_in, kv_in, params, prefix, n_heads, key_mask=None):
    """q_in (B, Lq, D) attending into kv_in (B, Lk, Dkv) with per-key masking.

    key_mask is a bool array (B, Lk); False keys are excluded from the
    softmax.  Weight names: {prefix}.wq/.wk/.wv/.wo.
    """
    q = _split_heads(ad.matmul(q_in, params[f"{prefix}.wq"]), n_heads)
    k = _split_heads(ad.matmul(kv_in, params[f"{prefix}.wk"]), n_heads)
    v = _split_heads(ad.matmul(kv_in, params[f"{prefix}.wv"]), n_heads)
    mask = None
    if key_mask is not None:
        b, lk = key_mask.shape
        add_mask = np.where(key_mask, 0.0, MASK_OFF).astype(q.data.dtype)
        mask = np.repeat(add_mask[:, None, None, :], n_heads, axis=1).reshape(b * n_heads, 1, lk)
    out = _merge_heads(attention(q, k, v, mask=mask), n_heads)
    return ad.matmul(out, params[f"{prefix}.wo"])


def encode_text(params, token_ids, lengths, cfg, prefix="text"):
    """Run the two-layer transformer encoder over a (B, L) id batch.

    Returns (embeddings Tensor (B, L, dim), key mask bool (B, L)).  Pad
    positions are masked out of every attention softmax.
    """
    token_ids = np.atleast_2d(np.asarray(token_ids))
    lengths = np.atleast_1d(np.asarray(lengths))
    b, l = token_ids.shape
    key_mask = np.arange(l)[None, :] < lengths[:, None]
    x = ad.embedding(params[f"{prefix}.embed"], token_ids)
    x = ad.add(x, ad.Tensor(positional_encoding(l, cfg.dim, dtype=x.data.dtype)))
    for layer in range(cfg.n_layers):
        p = f"{prefix}.l{layer}"
        att = multi_head_attention(x, x, params, p, cfg.n_heads, key_mask=key_mask)
        x = ad.layer_norm(ad.add(x, att), params[f"{p}.ln1.g"], params[f"{p}.ln1.b"])
        h = ad.silu(ad.add(ad.matmul(x, params[f"{p}.ff.w1"]), params[f"{p}.ff.b1"]))
        h = ad.add(ad.matmul(h, params[f"{p}.ff.w2"]), params[f"{p}.ff.b2"])
        x = ad.layer_norm(ad.add(x, h), params[f"{p}.ln2.g"], params[f"{p}.ln2.b"])
    return x, key_mask
