"""Noise variance schedule and the forward (noising) process.

Timesteps are 1-based: t ranges over {1..T} and t=0 denotes the clean
image in APIs.  Tables are kept in float64; coefficients are cast to the
image dtype at application time.
"""

import numpy as np

from .errors import ConfigError, ShapeMismatch


class NoiseSchedule:
    """Per-step noise variances and their cumulative signal-retention products.

    betas[t-1] is the variance added at step t; alphas = 1 - betas;
    alpha_bars is the running product of alphas.
    """

    def __init__(self, betas, kind, beta_start, beta_end):
        self.betas = np.asarray(betas, dtype=np.float64)
        self.alphas = 1.0 - self.betas
        self.alpha_bars = np.cumprod(self.alphas)
        self.kind = kind
        self.beta_start = float(beta_start)
        self.beta_end = float(beta_end)

    @property
    def timesteps(self):
        return len(self.betas)

    def _check_t(self, t):
        if not 1 <= t <= self.timesteps:
            raise ValueError(f"timestep {t} outside schedule range 1..{self.timesteps}")

    def beta(self, t):
        self._check_t(t)
        return self.betas[t - 1]

    def alpha(self, t):
        self._check_t(t)
        return self.alphas[t - 1]

    def alpha_bar(self, t):
        self._check_t(t)
        return self.alpha_bars[t - 1]

    def to_dict(self):
        return {
            "kind": self.kind,
            "timesteps": self.timesteps,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "linear":
            raise ConfigError(f"unsupported schedule kind {d.get('kind')!r}")
        return build_linear_schedule(d["timesteps"], d["beta_start"], d["beta_end"])


def build_linear_schedule(timesteps, beta_start, beta_end):
    """Linear interpolation of the per-step variance from beta_start to beta_end."""
    if timesteps < 1:
        raise ConfigError(f"timesteps must be >= 1, got {timesteps}")
    if not 0.0 < beta_start:
        raise ConfigError(f"beta_start must be > 0, got {beta_start}")
    if beta_start > beta_end:
        raise ConfigError(f"beta_start {beta_start} exceeds beta_end {beta_end}")
    if not beta_end < 1.0:
        raise ConfigError(f"beta_end must be < 1, got {beta_end}")
    if timesteps == 1:
        betas = np.array([beta_start], dtype=np.float64)
    else:
        betas = np.linspace(beta_start, beta_end, timesteps, dtype=np.float64)
    return NoiseSchedule(betas, "linear", beta_start, beta_end)


def forward_marginal(x0, t, eps, sched):
    """Closed-form noising: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps."""
    x0 = np.asarray(x0)
    eps = np.asarray(eps)
    if x0.shape != eps.shape:
        raise ShapeMismatch(f"forward_marginal: x0 {x0.shape} vs eps {eps.shape}")
    ab = sched.alpha_bar(t)
    dt = x0.dtype if x0.dtype.kind == "f" else np.float64
    return x0 * dt.type(np.sqrt(ab)) + eps * dt.type(np.sqrt(1.0 - ab))


def single_step(x_prev, t, eps, sched):
    """One forward kernel application: sqrt(1 - beta_t) * x_prev + sqrt(beta_t) * eps."""
    x_prev = np.asarray(x_prev)
    eps = np.asarray(eps)
    if x_prev.shape != eps.shape:
        raise ShapeMismatch(f"single_step: x_prev {x_prev.shape} vs eps {eps.shape}")
    b = sched.beta(t)
    dt = x_prev.dtype if x_prev.dtype.kind == "f" else np.float64
    return x_prev * dt.type(np.sqrt(1.0 - b)) + eps * dt.type(np.sqrt(b))
