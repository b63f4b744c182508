"""DDPM machinery for the mel decoder.

Schedule coefficients are kept in float64 so the q_sample / x0-recovery
identity and the oracle-eps reverse chain hold to tight tolerances.  Step
indices are 1-based throughout (t in 1..T), with the convention
alpha_bar(0) = 1 for the final denoising step.
"""

from __future__ import annotations

import math
from typing import Callable

import torch
import torch.nn as nn
from torch import Tensor

from promptvoice.config import AcousticConfig


class DiffusionSchedule:
    """Per-step noise coefficients beta_t, alpha_t, alpha_bar_t."""

    def __init__(self, betas: Tensor):
        betas = torch.as_tensor(betas, dtype=torch.float64)
        if betas.dim() != 1 or betas.numel() < 1:
            raise ValueError("betas must be a non-empty 1-D sequence")
        if bool((betas <= 0).any()) or bool((betas >= 1).any()):
            raise ValueError("betas must lie strictly inside (0, 1)")
        self.betas = betas
        self.alphas = 1.0 - betas
        self.alpha_bars = torch.cumprod(self.alphas, dim=0)
        if bool((self.alpha_bars[1:] >= self.alpha_bars[:-1]).any()):
            raise ValueError("alpha_bars must be strictly decreasing")
        check = torch.tensor(
            [float(torch.prod(self.alphas[: t + 1])) for t in range(self.steps)],
            dtype=torch.float64,
        )
        if float((self.alpha_bars - check).abs().max()) > 1e-12:
            raise ValueError("alpha_bars do not match the cumulative product of alphas")

    @classmethod
    def linear(cls, steps: int, beta_min: float, beta_max: float) -> "DiffusionSchedule":
        if steps < 1:
            raise ValueError(f"diffusion steps must be >= 1, got {steps}")
        return cls(torch.linspace(beta_min, beta_max, steps, dtype=torch.float64))

    @classmethod
    def from_config(cls, config: AcousticConfig) -> "DiffusionSchedule":
        return cls.linear(config.diffusion_steps, config.beta_min, config.beta_max)

    @property
    def steps(self) -> int:
        return self.betas.numel()

    def _check_t(self, t: Tensor) -> Tensor:
        if bool((t < 1).any()) or bool((t > self.steps).any()):
            raise ValueError(f"step index out of range 1..{self.steps}")
        return t - 1  # 0-based

    def beta(self, t: int | Tensor) -> Tensor:
        return self.betas[self._check_t(torch.as_tensor(t))]

    def alpha(self, t: int | Tensor) -> Tensor:
        return self.alphas[self._check_t(torch.as_tensor(t))]

    def alpha_bar(self, t: int | Tensor) -> Tensor:
        return self.alpha_bars[self._check_t(torch.as_tensor(t))]

    def alpha_bar_prev(self, t: int | Tensor) -> Tensor:
        """alpha_bar at t-1, with alpha_bar(0) defined as 1."""
        idx = self._check_t(torch.as_tensor(t))
        padded = torch.cat([torch.ones(1, dtype=torch.float64), self.alpha_bars])
        return padded[idx]

    def sigma(self, t: int | Tensor) -> Tensor:
        """Posterior std dev: sqrt((1 - abar_{t-1}) / (1 - abar_t) * beta_t)."""
        abar = self.alpha_bar(t)
        abar_prev = self.alpha_bar_prev(t)
        return torch.sqrt((1.0 - abar_prev) / (1.0 - abar) * self.beta(t))

    def state_dict(self) -> dict:
        return {"betas": self.betas.tolist()}

    @classmethod
    def from_state_dict(cls, state: dict) -> "DiffusionSchedule":
        return cls(torch.tensor(state["betas"], dtype=torch.float64))


def _expand(coef: Tensor, target: Tensor) -> Tensor:
    """Reshape per-item coefficients for broadcasting against `target`."""
    while coef.dim() < target.dim():
        coef = coef.unsqueeze(-1)
    return coef.to(target.dtype)


def q_sample(x0: Tensor, t: int | Tensor, noise: Tensor, sched: DiffusionSchedule) -> Tensor:
    """Forward process: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    if noise.shape != x0.shape:
        raise ValueError(f"noise shape {tuple(noise.shape)} != x0 shape {tuple(x0.shape)}")
    abar = sched.alpha_bar(t)
    return _expand(torch.sqrt(abar), x0) * x0 + _expand(torch.sqrt(1.0 - abar), x0) * noise


def predict_x0(x_t: Tensor, t: int | Tensor, eps: Tensor, sched: DiffusionSchedule) -> Tensor:
    """Invert q_sample: x0 = (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)."""
    abar = sched.alpha_bar(t)
    return (x_t - _expand(torch.sqrt(1.0 - abar), x_t) * eps) / _expand(torch.sqrt(abar), x_t)


def denoise_step(
    x_t: Tensor,
    t: int,
    eps_hat: Tensor,
    sched: DiffusionSchedule,
    generator: torch.Generator | None = None,
) -> Tensor:
    """One reverse step x_t -> x_{t-1}.

    Posterior mean in the x0 parameterization; the stochastic term sigma_t z
    is dropped at t = 1 so the final step is deterministic.
    """
    t = int(t)
    abar = sched.alpha_bar(t)
    abar_prev = sched.alpha_bar_prev(t)
    alpha = sched.alpha(t)
    beta = sched.beta(t)
    x0_hat = predict_x0(x_t, t, eps_hat, sched)
    coef_x0 = torch.sqrt(abar_prev) * beta / (1.0 - abar)
    coef_xt = torch.sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar)
    mean = _expand(coef_x0, x_t) * x0_hat + _expand(coef_xt, x_t) * x_t
    if t == 1:
        return mean
    z = torch.randn(x_t.shape, generator=generator, dtype=x_t.dtype, device=x_t.device)
    return mean + _expand(sched.sigma(t), x_t) * z


def generate(
    eps_fn: Callable[[Tensor, int], Tensor],
    shape: tuple[int, ...],
    sched: DiffusionSchedule,
    generator: torch.Generator | None = None,
    dtype: torch.dtype = torch.float32,
    device: torch.device | str = "cpu",
) -> Tensor:
    """Run the full reverse chain from x_T ~ N(0, I) down to t = 1.

    ``eps_fn(x_t, t)`` supplies the noise estimate at each 1-based step.
    """
    if any(s < 1 for s in shape):
        raise ValueError(f"degenerate sample shape {shape}")
    x = torch.randn(shape, generator=generator, dtype=dtype, device=device)
    for t in range(sched.steps, 0, -1):
        x = denoise_step(x, t, eps_fn(x, t), sched, generator=generator)
    return x


def diffusion_loss(
    eps_fn: Callable[[Tensor, Tensor], Tensor],
    x0: Tensor,
    sched: DiffusionSchedule,
    generator: torch.Generator | None = None,
    mask: Tensor | None = None,
    t: Tensor | None = None,
    noise: Tensor | None = None,
) -> Tensor:
    """L1 eps-matching loss at a uniformly drawn step.

    ``x0`` is [B, frames, bins]; ``eps_fn(x_t, t)`` receives per-item 1-based
    steps [B].  ``mask`` [B, frames] marks valid frames.  ``t`` and ``noise``
    may be fixed for deterministic evaluation; otherwise they are drawn from
    ``generator``.
    """
    if x0.dim() != 3:
        raise ValueError("x0 must be [batch, frames, bins]")
    batch = x0.shape[0]
    if t is None:
        t = torch.randint(1, sched.steps + 1, (batch,), generator=generator, device=x0.device)
    if noise is None:
        noise = torch.randn(x0.shape, generator=generator, dtype=x0.dtype, device=x0.device)
    x_t = q_sample(x0, t, noise, sched)
    if mask is not None:
        # Zero noised input at padding so pad length cannot reach real frames
        # through the decoder's receptive field.
        x_t = x_t * mask.to(x_t.dtype).unsqueeze(-1)
    eps_hat = eps_fn(x_t, t)
    err = (eps_hat - noise).abs()
    if mask is None:
        return err.mean()
    valid = mask.to(err.dtype).unsqueeze(-1)
    denom = valid.sum() * x0.shape[-1]
    if float(denom) == 0.0:
        raise ValueError("mask excludes every frame")
    return (err * valid).sum() / denom


def step_embedding(t: Tensor, dim: int) -> Tensor:
    """Sinusoidal embedding of diffusion step indices, [B] -> [B, dim]."""
    half = dim // 2
    freqs = torch.exp(
        torch.arange(half, dtype=torch.float32, device=t.device)
        * (-math.log(10000.0) / max(half - 1, 1))
    )
    args = t.to(torch.float32).unsqueeze(-1) * freqs
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[:, :1])], dim=-1)
    return emb


class ResidualBlock(nn.Module):
    """Gated residual conv layer with a skip output (WaveNet style)."""

    def __init__(self, channels: int, cond_dim: int, kernel: int = 3):
        super().__init__()
        self.step_proj = nn.Linear(channels, channels)
        self.conv = nn.Conv1d(channels, 2 * channels, kernel, padding=kernel // 2)
        self.cond_proj = nn.Conv1d(cond_dim, 2 * channels, 1)
        self.out_proj = nn.Conv1d(channels, 2 * channels, 1)

    def forward(self, x: Tensor, cond: Tensor, step: Tensor) -> tuple[Tensor, Tensor]:
        # x [B, C, T]; cond [B, cond_dim, T]; step [B, C]
        y = x + self.step_proj(step).unsqueeze(-1)
        y = self.conv(y) + self.cond_proj(cond)
        gate, filt = torch.chunk(y, 2, dim=1)
        z = torch.tanh(filt) * torch.sigmoid(gate)
        residual, skip = torch.chunk(self.out_proj(z), 2, dim=1)
        return (x + residual) / math.sqrt(2.0), skip


class DiffusionDecoder(nn.Module):
    """Conditional eps estimator: 1-D residual conv stack over mel frames."""

    def __init__(self, mel_bins: int, cond_dim: int, config: AcousticConfig):
        super().__init__()
        channels = config.decoder_channels
        self.mel_bins = mel_bins
        self.input_proj = nn.Conv1d(mel_bins, channels, 1)
        self.step_mlp = nn.Sequential(
            nn.Linear(channels, channels * 4),
            nn.SiLU(),
            nn.Linear(channels * 4, channels),
        )
        self.blocks = nn.ModuleList(
            ResidualBlock(channels, cond_dim) for _ in range(config.decoder_layers)
        )
        self.skip_proj = nn.Conv1d(channels, channels, 1)
        self.output_proj = nn.Conv1d(channels, mel_bins, 1)
        # Zero-init the last projection: the untrained net predicts eps = 0,
        # keeping early losses at the |N(0,1)| baseline instead of blowing up.
        nn.init.zeros_(self.output_proj.weight)
        nn.init.zeros_(self.output_proj.bias)

    def forward(self, x_t: Tensor, t: int | Tensor, cond: Tensor) -> Tensor:
        """x_t [B, T, mel], t int or [B], cond [B, T, cond_dim] -> eps_hat [B, T, mel]."""
        unbatched = x_t.dim() == 2
        if unbatched:
            x_t = x_t.unsqueeze(0)
            cond = cond.unsqueeze(0)
        if x_t.shape[-1] != self.mel_bins:
            raise ValueError(f"expected {self.mel_bins} mel bins, got {x_t.shape[-1]}")
        if cond.shape[1] != x_t.shape[1]:
            raise ValueError(
                f"conditioning has {cond.shape[1]} frames but x_t has {x_t.shape[1]}"
            )
        t = torch.as_tensor(t, device=x_t.device)
        if t.dim() == 0:
            t = t.repeat(x_t.shape[0])
        step = self.step_mlp(step_embedding(t, self.input_proj.out_channels))

        x = torch.relu(self.input_proj(x_t.transpose(1, 2)))
        cond = cond.transpose(1, 2)
        skip_sum = torch.zeros_like(x)
        for block in self.blocks:
            x, skip = block(x, cond, step)
            skip_sum = skip_sum + skip
        y = skip_sum / math.sqrt(len(self.blocks))
        y = torch.relu(self.skip_proj(torch.relu(y)))
        out = self.output_proj(y).transpose(1, 2)
        return out.squeeze(0) if unbatched else out
