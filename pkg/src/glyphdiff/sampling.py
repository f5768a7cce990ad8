"""Reverse diffusion: ancestral denoising from pure noise down to an image.

The per-step variance is fixed at beta_t (not learned); no noise is
injected at the final step.  generate() is a pure function of
(parameters, request), so identical requests produce identical images
regardless of how they are batched.
"""

from dataclasses import dataclass

import numpy as np

from . import unet
from .encoding import encode_text
from .errors import ShapeMismatch
from .font import render_printed
from .text import tokenize
from .training import _blank_like


def ddpm_step(x_t, t, eps_hat, sched, rng):
    """One reverse step: remove the predicted noise, then re-inject sigma_t * z
    (z drawn for t > 1 only)."""
    x_t = np.asarray(x_t)
    eps_hat = np.asarray(eps_hat)
    if x_t.shape != eps_hat.shape:
        raise ShapeMismatch(f"ddpm_step: x_t {x_t.shape} vs eps_hat {eps_hat.shape}")
    a = sched.alpha(t)
    b = sched.beta(t)
    ab = sched.alpha_bar(t)
    dt = x_t.dtype
    mean = dt.type(1.0 / np.sqrt(a)) * (x_t - dt.type(b / np.sqrt(1.0 - ab)) * eps_hat)
    if t == 1:
        return mean
    z = rng.standard_normal(x_t.shape).astype(dt)
    return mean + dt.type(np.sqrt(b)) * z


def estimate_x0(x_t, t, eps_hat, sched):
    """Invert the closed-form marginal: (x_t - sqrt(1-abar_t) eps) / sqrt(abar_t)."""
    x_t = np.asarray(x_t)
    eps_hat = np.asarray(eps_hat)
    ab = sched.alpha_bar(t)
    dt = x_t.dtype
    return (x_t - dt.type(np.sqrt(1.0 - ab)) * eps_hat) * dt.type(1.0 / np.sqrt(ab))


@dataclass(frozen=True)
class SampleRequest:
    text: str
    writer_id: int
    seed: int


def generate_batch(requests, params, model_cfg, sched, ablation="none"):
    """Generate one image per request, sharing the denoising loop.

    Each request draws its noise from its own seeded generator, so the output
    for a given (text, writer, seed) does not depend on batch composition.
    Returns a (B, H, W) float32 array clamped to [-1, 1].
    """
    if not requests:
        return np.zeros((0,) + tuple(reversed(model_cfg.canvas)), dtype=np.float32)
    frozen = params.frozen() if hasattr(params, "frozen") else params
    b = len(requests)
    w, h = model_cfg.canvas
    ids = np.stack([tokenize(r.text, model_cfg.vocab).ids for r in requests])
    lengths = np.array([len(r.text) for r in requests])
    text_emb, text_mask = encode_text(frozen, ids, lengths, model_cfg.text)
    printed = np.stack([render_printed(r.text, model_cfg.canvas) for r in requests])[:, None]
    if ablation == "text-only":
        printed = _blank_like(printed)
    writer_ids = np.array([r.writer_id for r in requests])
    rngs = [np.random.default_rng(r.seed) for r in requests]
    x = np.stack([g.standard_normal((1, h, w)).astype(np.float32) for g in rngs])
    for t in range(sched.timesteps, 0, -1):
        tt = np.full(b, t)
        eps_hat = unet.predict_noise(
            x, printed, tt, writer_ids, text_emb, text_mask, frozen, model_cfg.unet,
            timesteps=sched.timesteps,
        ).data
        x = np.stack([ddpm_step(x[i], t, eps_hat[i], sched, rngs[i]) for i in range(b)])
    return np.clip(x[:, 0], -1.0, 1.0)


def generate(request, params, model_cfg, sched, ablation="none"):
    """Generate a single (H, W) image for one request."""
    return generate_batch([request], params, model_cfg, sched, ablation)[0]
