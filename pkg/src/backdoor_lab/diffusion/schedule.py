"""
Линейное расписание шума DDPM и прямой процесс.
"""
from dataclasses import dataclass
from typing import Dict, Union

import torch

from ..exceptions import ScheduleError, ShapeError
from ..models.config import ScheduleConfig


@dataclass(frozen=True)
class NoiseSchedule:
    """Коэффициенты расписания в float64; приводятся к dtype данных при использовании."""

    betas: torch.Tensor
    alphas: torch.Tensor
    alpha_bars: torch.Tensor

    @property
    def T(self) -> int:
        return int(self.betas.shape[0])

    def summary(self) -> Dict[str, float]:
        return {
            "timesteps": self.T,
            "beta_start": float(self.betas[0]),
            "beta_end": float(self.betas[-1]),
            "alpha_bar_last": float(self.alpha_bars[-1]),
        }


def linear_schedule(config: ScheduleConfig) -> NoiseSchedule:
    """
    Строит линейное расписание beta.

    Args:
        config: Число шагов и границы beta

    Returns:
        NoiseSchedule с alpha_bars = cumprod(1 - betas)

    Raises:
        ScheduleError: beta вне (0, 1)
    """
    if config.timesteps == 1:
        betas = torch.tensor([config.beta_start], dtype=torch.float64)
    else:
        betas = torch.linspace(
            config.beta_start, config.beta_end, config.timesteps, dtype=torch.float64
        )
    if not bool(((betas > 0) & (betas < 1)).all()):
        raise ScheduleError("every beta must lie in (0, 1)")
    alphas = 1.0 - betas
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=torch.cumprod(alphas, dim=0))


def _as_index(t: Union[int, torch.Tensor], sched: NoiseSchedule) -> torch.Tensor:
    index = torch.as_tensor(t, dtype=torch.long)
    if bool(((index < 0) | (index >= sched.T)).any()):
        raise ScheduleError(f"timestep outside [0, {sched.T})")
    return index


def forward_diffuse(
    x0: torch.Tensor,
    t: Union[int, torch.Tensor],
    eps: torch.Tensor,
    sched: NoiseSchedule,
) -> torch.Tensor:
    """
    Зашумляет x0 до шага t: x_t = sqrt(a_bar_t) * x0 + sqrt(1 - a_bar_t) * eps.

    Args:
        x0: Чистое изображение [C, H, W] или батч [B, C, H, W]
        t: Шаг (int) или тензор шагов [B]
        eps: Шум той же формы, что x0
        sched: Расписание

    Raises:
        ScheduleError: t вне [0, T)
        ShapeError: Формы x0 и eps различаются
    """
    if x0.shape != eps.shape:
        raise ShapeError(f"x0 {tuple(x0.shape)} and eps {tuple(eps.shape)} differ")
    index = _as_index(t, sched)
    alpha_bar = sched.alpha_bars[index].to(x0.dtype)
    if alpha_bar.dim() == 1:
        alpha_bar = alpha_bar.view(-1, *([1] * (x0.dim() - 1)))
    return alpha_bar.sqrt() * x0 + (1.0 - alpha_bar).sqrt() * eps
