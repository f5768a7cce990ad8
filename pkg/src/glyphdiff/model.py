"""Assembly of the full denoiser: text encoder + style table + U-Net under
one ParamSet, plus the per-sample conditioning bundle."""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import encoding, unet
from .errors import ConfigError
from .text import Vocabulary, tokenize


@dataclass
class ConditioningBundle:
    """All three conditioning channels for one sample."""

    token_ids: np.ndarray  # (max_len,)
    length: int
    writer_id: int
    printed: np.ndarray  # (H, W) model-space image


@dataclass(frozen=True)
class ModelConfig:
    canvas: tuple  # (W, H)
    n_styles: int
    vocab: Vocabulary
    unet: unet.UNetConfig
    text: encoding.TextEncoderConfig

    def __post_init__(self):
        w, h = self.canvas
        if w % 8 or h % 8:
            raise ConfigError(
                f"canvas {self.canvas} must be divisible by 8 (three 2x downsamples)"
            )
        if self.n_styles < 1:
            raise ConfigError("n_styles must be >= 1")
        if self.unet.text_dim != self.text.dim:
            raise ConfigError(
                f"unet text_dim {self.unet.text_dim} != text encoder dim {self.text.dim}"
            )

    def to_dict(self):
        return {
            "canvas": list(self.canvas),
            "n_styles": self.n_styles,
            "vocab": self.vocab.to_dict(),
            "unet": self.unet.to_dict(),
            "text": self.text.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            canvas=tuple(d["canvas"]),
            n_styles=d["n_styles"],
            vocab=Vocabulary.from_dict(d["vocab"]),
            unet=unet.UNetConfig.from_dict(d["unet"]),
            text=encoding.TextEncoderConfig.from_dict(d["text"]),
        )


def build_params(cfg, seed):
    """Initialize every trainable tensor; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    params = ad.ParamSet()
    encoding.init_text_encoder(params, cfg.vocab, cfg.text, rng)
    encoding.init_style_table(params, cfg.n_styles, cfg.unet.embed_dim, rng)
    unet.init_unet(params, cfg.unet, rng)
    return params


def make_bundle(text, writer_id, cfg, printed=None):
    from .font import render_printed

    seq = tokenize(text, cfg.vocab)
    if printed is None:
        printed = render_printed(text, cfg.canvas)
    return ConditioningBundle(seq.ids, seq.length, int(writer_id), printed)


def encode_bundle_texts(params, cfg, bundles):
    """Encode all bundle texts in one batch; returns (emb Tensor, key mask)."""
    ids = np.stack([b.token_ids for b in bundles])
    lengths = np.array([b.length for b in bundles])
    return encoding.encode_text(params, ids, lengths, cfg.text)
