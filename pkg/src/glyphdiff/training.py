"""Training loop for the conditional denoising objective.

Per batch item a timestep is sampled uniformly from {1..T} and Gaussian
noise is injected through the closed-form marginal; the loss is the mean
squared error between that noise and the network's prediction given all
three conditioning channels.  The loop is deterministic for a fixed seed
(data order is a per-epoch shuffle keyed by (seed, epoch), all noise comes
from one serializable generator) and resumable bit-exactly from checkpoints.
"""

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import checkpoint, unet
from .errors import ConfigError, NumericStateError
from .font import BACKGROUND
from .model import build_params, encode_bundle_texts
from .schedule import NoiseSchedule

ABLATION_MODES = ("none", "text-only")


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    batch_size: int = 16
    lr: float = 1e-4
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    checkpoint_every: int = 1000
    lr_schedule: str = "none"  # "none" | "cosine"
    ema: bool = False
    ema_decay: float = 0.999
    ablation: str = "none"  # "none" | "text-only" (blank printed channel)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.lr_schedule not in ("none", "cosine"):
            raise ConfigError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.ablation not in ABLATION_MODES:
            raise ConfigError(f"unknown ablation mode {self.ablation!r}")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class Adam:
    """Adaptive moment estimation with serializable float32 state."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in params.items()}

    def step(self, params, lr):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data = p.data - np.float32(lr) * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainExample:
    """One record: target image plus its conditioning bundle."""

    image: np.ndarray  # (H, W) model-space float32
    bundle: object  # ConditioningBundle


def _blank_like(printed):
    return np.full_like(printed, BACKGROUND)


def loss_on_batch(params, model_cfg, sched, batch, rng, ablation="none"):
    """Conditional denoising loss over one batch; returns a scalar Tensor."""
    if not batch:
        raise ValueError("loss_on_batch: empty batch")
    shapes = {ex.image.shape for ex in batch}
    if len(shapes) != 1:
        raise ValueError(f"loss_on_batch: mixed image shapes {sorted(shapes)}")
    b = len(batch)
    t = rng.integers(1, sched.timesteps + 1, size=b)
    x0 = np.stack([ex.image for ex in batch])[:, None]
    eps = rng.standard_normal(x0.shape).astype(x0.dtype)
    # closed-form marginal, vectorized over the per-item timesteps
    ab = sched.alpha_bars[t - 1].astype(x0.dtype)[:, None, None, None]
    x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
    if ablation == "text-only":
        printed = np.stack([_blank_like(ex.bundle.printed) for ex in batch])[:, None]
    else:
        printed = np.stack([ex.bundle.printed for ex in batch])[:, None]
    writer_ids = np.array([ex.bundle.writer_id for ex in batch])
    text_emb, text_mask = encode_bundle_texts(params, model_cfg, [ex.bundle for ex in batch])
    eps_hat = unet.predict_noise(
        x_t, printed, t, writer_ids, text_emb, text_mask, params, model_cfg.unet,
        timesteps=sched.timesteps,
    )
    return ad.mse(eps_hat, ad.Tensor(eps))


@dataclass
class TrainResult:
    final_checkpoint: Path
    history: list = field(default_factory=list)  # (step, loss, wall_ms)
    checkpoints: list = field(default_factory=list)


def _epoch_order(seed, epoch, n):
    return np.random.default_rng((seed, epoch)).permutation(n)


def _lr_at(cfg, step):
    if cfg.lr_schedule == "cosine":
        return cfg.lr * 0.5 * (1.0 + np.cos(np.pi * (step - 1) / max(1, cfg.steps)))
    return cfg.lr


def _save_checkpoint(path, params, opt, ema, step, rng, configs):
    arrays = {}
    for name, p in params.items():
        arrays[f"p.{name}"] = p.data
    for name in params:
        arrays[f"m.{name}"] = opt.m[name]
        arrays[f"v.{name}"] = opt.v[name]
    if ema is not None:
        for name in params:
            arrays[f"ema.{name}"] = ema[name]
    checkpoint.save(path, arrays, configs, step,
                    rng.bit_generator.state, extra={"adam_t": opt.t})


def load_params(path, model_cfg=None, prefer_ema=False):
    """Rebuild a ParamSet (and configs) from a checkpoint."""
    from .model import ModelConfig

    arrays, header = checkpoint.load(path)
    cfg = model_cfg or ModelConfig.from_dict(header["configs"]["model"])
    params = build_params(cfg, 0)
    prefix = "ema." if prefer_ema and any(k.startswith("ema.") for k in arrays) else "p."
    params.load_arrays({n: arrays[prefix + n] for n in params.names()})
    return params, cfg, header


def train(train_cfg, model_cfg, sched, dataset, out_dir, resume_from=None):
    """Run the training loop; writes loss.csv and GDIF checkpoints to out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = len(dataset)
    if n == 0:
        raise ValueError("train: empty dataset")
    bs = min(train_cfg.batch_size, n)
    steps_per_epoch = n // bs
    configs = {
        "model": model_cfg.to_dict(),
        "train": train_cfg.to_dict(),
        "schedule": sched.to_dict(),
    }

    rng = np.random.default_rng((train_cfg.seed, 1))
    params = build_params(model_cfg, train_cfg.seed)
    opt = Adam(params, train_cfg.beta1, train_cfg.beta2, train_cfg.adam_eps)
    ema = {n_: p.data.copy() for n_, p in params.items()} if train_cfg.ema else None
    start_step = 0
    if resume_from is not None:
        arrays, header = checkpoint.load(resume_from)
        params.load_arrays({n_: arrays[f"p.{n_}"] for n_ in params.names()})
        for n_ in params.names():
            opt.m[n_] = arrays[f"m.{n_}"]
            opt.v[n_] = arrays[f"v.{n_}"]
        opt.t = header["extra"]["adam_t"]
        if ema is not None:
            ema = {n_: arrays[f"ema.{n_}"] for n_ in params.names()}
        rng.bit_generator.state = header["rng_state"]
        start_step = header["step"]

    result = TrainResult(final_checkpoint=out_dir / "checkpoint_final.gdif")
    loss_csv = out_dir / "loss.csv"
    with open(loss_csv, "w") as log:
        log.write("step,loss,wall_ms\n")
        for step in range(start_step + 1, train_cfg.steps + 1):
            epoch = (step - 1) // steps_per_epoch
            slot = (step - 1) % steps_per_epoch
            order = _epoch_order(train_cfg.seed, epoch, n)
            batch = [dataset[i] for i in order[slot * bs:(slot + 1) * bs]]
            t0 = time.perf_counter()
            params.zero_grad()
            loss = loss_on_batch(params, model_cfg, sched, batch, rng, train_cfg.ablation)
            loss_val = float(loss.item())
            if not np.isfinite(loss_val):
                raise NumericStateError(
                    f"non-finite loss {loss_val} at step {step}; "
                    f"last checkpoint retained in {out_dir}"
                )
            ad.backward(loss)
            opt.step(params, _lr_at(train_cfg, step))
            if ema is not None:
                d = train_cfg.ema_decay
                for n_, p in params.items():
                    ema[n_] = d * ema[n_] + (1.0 - d) * p.data
            wall_ms = (time.perf_counter() - t0) * 1e3
            result.history.append((step, loss_val, wall_ms))
            log.write(f"{step},{loss_val:.8f},{wall_ms:.3f}\n")
            if train_cfg.checkpoint_every and step % train_cfg.checkpoint_every == 0 and step < train_cfg.steps:
                path = out_dir / f"checkpoint_{step:07d}.gdif"
                _save_checkpoint(path, params, opt, ema, step, rng, configs)
                result.checkpoints.append(path)
    _save_checkpoint(result.final_checkpoint, params, opt, ema, train_cfg.steps, rng, configs)
    result.checkpoints.append(result.final_checkpoint)
    return result


def windowed_losses(history, window=500):
    """Mean loss over consecutive windows of the (step, loss, wall) history."""
    losses = [h[1] for h in history]
    return [float(np.mean(losses[i:i + window])) for i in range(0, len(losses), window)]
