"""Noise-prediction U-Net.

Five encoder blocks and five mirrored decoder blocks.  Encoder blocks 1, 2
and 5 are residual blocks followed by stride-2 downsampling; blocks 3 and 4
are residual blocks followed by cross-attention into the text encoding.
The decoder mirrors the sequence in reverse with nearest-neighbour
upsampling and channel-wise skip concatenation.  The printed-text image is
concatenated with the noisy image once, at the network input, so the first
convolution always sees exactly two channels.  The combined timestep+style
embedding is added to every residual block's hidden state after its first
convolution.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import encoding
from .errors import ConfigError, ShapeMismatch

N_BLOCKS = 5
DOWN_BLOCKS = (1, 2, 5)  # 1-based encoder blocks that downsample


@dataclass(frozen=True)
class UNetConfig:
    base_channels: int = 32
    channel_mult: tuple = (1, 2, 2, 4, 4)
    n_heads: int = 4
    attn_blocks: tuple = (3, 4)  # 1-based encoder block indices, mirrored in the decoder
    embed_dim: int = 256
    text_dim: int = 256
    in_channels: int = 2
    out_channels: int = 1

    def __post_init__(self):
        if len(self.channel_mult) != N_BLOCKS:
            raise ConfigError(f"channel_mult needs {N_BLOCKS} entries, got {len(self.channel_mult)}")
        if self.embed_dim % 2:
            raise ConfigError("embed_dim must be even")
        for b in self.attn_blocks:
            if not 1 <= b <= N_BLOCKS:
                raise ConfigError(f"attention block index {b} outside 1..{N_BLOCKS}")
            if self.channels[b - 1] % self.n_heads:
                raise ConfigError(
                    f"block {b} channels {self.channels[b - 1]} not divisible by {self.n_heads} heads"
                )

    @property
    def channels(self):
        return tuple(self.base_channels * m for m in self.channel_mult)

    def to_dict(self):
        return {
            "base_channels": self.base_channels,
            "channel_mult": list(self.channel_mult),
            "n_heads": self.n_heads,
            "attn_blocks": list(self.attn_blocks),
            "embed_dim": self.embed_dim,
            "text_dim": self.text_dim,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["channel_mult"] = tuple(d["channel_mult"])
        d["attn_blocks"] = tuple(d["attn_blocks"])
        return cls(**d)


def _groups(c):
    return min(8, c)


def _conv_w(rng, c_out, c_in):
    fan_in = c_in * 9
    return (rng.standard_normal((c_out, c_in, 3, 3)) * math.sqrt(2.0 / fan_in)).astype(np.float32)


def _lin_w(rng, fan_in, fan_out):
    return (rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)).astype(np.float32)


def _add_norm(params, name, c):
    params.add(f"{name}.g", np.ones(c, dtype=np.float32))
    params.add(f"{name}.b", np.zeros(c, dtype=np.float32))


def _add_res_block(params, name, c_in, c_out, embed_dim, rng):
    _add_norm(params, f"{name}.gn1", c_in)
    params.add(f"{name}.conv1.w", _conv_w(rng, c_out, c_in))
    params.add(f"{name}.conv1.b", np.zeros(c_out, dtype=np.float32))
    params.add(f"{name}.temb.w", _lin_w(rng, embed_dim, c_out))
    params.add(f"{name}.temb.b", np.zeros(c_out, dtype=np.float32))
    _add_norm(params, f"{name}.gn2", c_out)
    params.add(f"{name}.conv2.w", _conv_w(rng, c_out, c_out))
    params.add(f"{name}.conv2.b", np.zeros(c_out, dtype=np.float32))
    if c_in != c_out:
        params.add(f"{name}.skip.w", _lin_w(rng, c_in, c_out))


def _add_attn_block(params, name, c, text_dim, rng):
    _add_norm(params, f"{name}.ln", c)
    params.add(f"{name}.wq", _lin_w(rng, c, c))
    params.add(f"{name}.wk", _lin_w(rng, text_dim, c))
    params.add(f"{name}.wv", _lin_w(rng, text_dim, c))
    params.add(f"{name}.wo", np.zeros((c, c), dtype=np.float32))


def init_unet(params, cfg, rng, prefix="unet"):
    ch = cfg.channels
    params.add(f"{prefix}.tmlp.w1", _lin_w(rng, cfg.embed_dim, cfg.embed_dim))
    params.add(f"{prefix}.tmlp.b1", np.zeros(cfg.embed_dim, dtype=np.float32))
    params.add(f"{prefix}.tmlp.w2", _lin_w(rng, cfg.embed_dim, cfg.embed_dim))
    params.add(f"{prefix}.tmlp.b2", np.zeros(cfg.embed_dim, dtype=np.float32))
    c_prev = cfg.in_channels
    for i in range(1, N_BLOCKS + 1):
        c = ch[i - 1]
        _add_res_block(params, f"{prefix}.enc{i}.res", c_prev, c, cfg.embed_dim, rng)
        if i in cfg.attn_blocks:
            _add_attn_block(params, f"{prefix}.enc{i}.attn", c, cfg.text_dim, rng)
        if i in DOWN_BLOCKS:
            params.add(f"{prefix}.enc{i}.down.w", _conv_w(rng, c, c))
            params.add(f"{prefix}.enc{i}.down.b", np.zeros(c, dtype=np.float32))
        c_prev = c
    # decoder mirrors the encoder in reverse; block i consumes skip i
    c_in = ch[-1]
    for i in range(N_BLOCKS, 0, -1):
        c_out = ch[i - 2] if i >= 2 else ch[0]
        if i in DOWN_BLOCKS:
            params.add(f"{prefix}.dec{i}.up.w", _conv_w(rng, c_in, c_in))
            params.add(f"{prefix}.dec{i}.up.b", np.zeros(c_in, dtype=np.float32))
        _add_res_block(params, f"{prefix}.dec{i}.res", c_in + ch[i - 1], c_out, cfg.embed_dim, rng)
        if i in cfg.attn_blocks:
            _add_attn_block(params, f"{prefix}.dec{i}.attn", c_out, cfg.text_dim, rng)
        c_in = c_out
    _add_norm(params, f"{prefix}.head.gn", c_in)
    params.add(f"{prefix}.head.w", np.zeros((cfg.out_channels, c_in, 3, 3), dtype=np.float32))
    params.add(f"{prefix}.head.b", np.zeros(cfg.out_channels, dtype=np.float32))


def count_parameters(params):
    """Total scalar count across a ParamSet."""
    return params.n_scalars()


def _channel_linear(x, w):
    b, c, h, wd = x.data.shape
    seq = ad.transpose(ad.reshape(x, (b, c, h * wd)), (0, 2, 1))
    out = ad.matmul(seq, w)
    return ad.reshape(ad.transpose(out, (0, 2, 1)), (b, w.data.shape[1], h, wd))


def _res_block(x, emb, params, name, c_in, c_out):
    h = ad.silu(ad.group_norm(x, params[f"{name}.gn1.g"], params[f"{name}.gn1.b"], _groups(c_in)))
    h = ad.conv2d(h, params[f"{name}.conv1.w"], params[f"{name}.conv1.b"])
    proj = ad.add(ad.matmul(ad.silu(emb), params[f"{name}.temb.w"]), params[f"{name}.temb.b"])
    b = proj.data.shape[0]
    h = ad.add(h, ad.reshape(proj, (b, c_out, 1, 1)))
    h = ad.silu(ad.group_norm(h, params[f"{name}.gn2.g"], params[f"{name}.gn2.b"], _groups(c_out)))
    h = ad.conv2d(h, params[f"{name}.conv2.w"], params[f"{name}.conv2.b"])
    skip = x if c_in == c_out else _channel_linear(x, params[f"{name}.skip.w"])
    return ad.add(h, skip)


def _attn_block(x, text_emb, text_mask, params, name, c, n_heads):
    b, _, h, wd = x.data.shape
    seq = ad.transpose(ad.reshape(x, (b, c, h * wd)), (0, 2, 1))
    normed = ad.layer_norm(seq, params[f"{name}.ln.g"], params[f"{name}.ln.b"])
    att = encoding.multi_head_attention(normed, text_emb, params, name, n_heads, key_mask=text_mask)
    seq = ad.add(seq, att)
    return ad.reshape(ad.transpose(seq, (0, 2, 1)), (b, c, h, wd))


def predict_noise(x_t, c_p, t, writer_ids, text_emb, text_mask, params, cfg,
                  timesteps=None, prefix="unet", style_prefix="style",
                  return_activations=False):
    """Predict the noise component of x_t given all three conditioning channels.

    x_t, c_p: (B, 1, H, W) tensors or arrays of equal shape; t: (B,) int
    timesteps; writer_ids: (B,) int; text_emb: (B, L, text_dim) Tensor from
    the text encoder with its (B, L) key mask.
    """
    x_t = ad.as_tensor(x_t)
    c_p = ad.as_tensor(c_p)
    if x_t.data.shape != c_p.data.shape:
        raise ShapeMismatch(f"noisy image {x_t.data.shape} vs printed image {c_p.data.shape}")
    t = np.atleast_1d(np.asarray(t))
    if timesteps is not None and (t.min() < 1 or t.max() > timesteps):
        raise ValueError(f"timesteps {t.min()}..{t.max()} outside schedule range 1..{timesteps}")
    ch = cfg.channels

    base = ad.Tensor(encoding.timestep_embedding(t, cfg.embed_dim, dtype=x_t.data.dtype))
    emb = encoding.combine(base, encoding.style_embedding(params[f"{style_prefix}.table"], writer_ids))
    emb = ad.add(ad.matmul(emb, params[f"{prefix}.tmlp.w1"]), params[f"{prefix}.tmlp.b1"])
    emb = ad.add(ad.matmul(ad.silu(emb), params[f"{prefix}.tmlp.w2"]), params[f"{prefix}.tmlp.b2"])

    h = ad.concat_channels([x_t, c_p])
    acts = {}
    skips = []
    c_prev = cfg.in_channels
    for i in range(1, N_BLOCKS + 1):
        c = ch[i - 1]
        h = _res_block(h, emb, params, f"{prefix}.enc{i}.res", c_prev, c)
        if i in cfg.attn_blocks:
            h = _attn_block(h, text_emb, text_mask, params, f"{prefix}.enc{i}.attn", c, cfg.n_heads)
        skips.append(h)
        if return_activations:
            acts[f"enc{i}"] = h.data
        if i in DOWN_BLOCKS:
            h = ad.conv2d(h, params[f"{prefix}.enc{i}.down.w"], params[f"{prefix}.enc{i}.down.b"], stride=2)
        c_prev = c
    c_in = ch[-1]
    for i in range(N_BLOCKS, 0, -1):
        c_out = ch[i - 2] if i >= 2 else ch[0]
        if i in DOWN_BLOCKS:
            h = ad.upsample2x(h)
            h = ad.conv2d(h, params[f"{prefix}.dec{i}.up.w"], params[f"{prefix}.dec{i}.up.b"])
        h = ad.concat_channels([h, skips[i - 1]])
        h = _res_block(h, emb, params, f"{prefix}.dec{i}.res", c_in + ch[i - 1], c_out)
        if i in cfg.attn_blocks:
            h = _attn_block(h, text_emb, text_mask, params, f"{prefix}.dec{i}.attn", c_out, cfg.n_heads)
        if return_activations:
            acts[f"dec{i}"] = h.data
        c_in = c_out
    h = ad.silu(ad.group_norm(h, params[f"{prefix}.head.gn.g"], params[f"{prefix}.head.gn.b"], _groups(c_in)))
    out = ad.conv2d(h, params[f"{prefix}.head.w"], params[f"{prefix}.head.b"])
    if return_activations:
        return out, acts
    return out
