"""
Анцестральный DDPM сэмплер.
"""
from typing import List, Optional, Sequence, Union

import numpy as np
import torch

from ..exceptions import ScheduleError, ShapeError
from ..fixtures.seeding import torch_generator
from ..models.text import PromptSpec
from .denoiser import DenoiserModel, encode_text, predict_noise
from .schedule import NoiseSchedule


def sampling_timesteps(sched: NoiseSchedule, steps: int) -> List[int]:
    """
    Убывающая последовательность шагов.

    При steps == T это все шаги T-1..0; иначе равномерная подпоследовательность,
    для которой beta пересчитываются по соседним alpha_bar.
    """
    if not 1 <= steps <= sched.T:
        raise ScheduleError(f"steps={steps} outside [1, {sched.T}]")
    if steps == sched.T:
        return list(range(sched.T - 1, -1, -1))
    grid = np.unique(np.round(np.linspace(0, sched.T - 1, steps)).astype(int))
    return [int(t) for t in grid[::-1]]


@torch.no_grad()
def _denoise_chunk(
    model: DenoiserModel,
    prompts: Sequence[PromptSpec],
    sched: NoiseSchedule,
    seeds: Sequence[int],
    timesteps: List[int],
) -> torch.Tensor:
    generators = [torch_generator(seed) for seed in seeds]
    shape = model.config.image_shape
    x = torch.stack([torch.randn(shape, generator=g) for g in generators])
    cond = encode_text(prompts, model)
    for index, t in enumerate(timesteps):
        alpha_bar = float(sched.alpha_bars[t])
        alpha_bar_prev = float(sched.alpha_bars[timesteps[index + 1]]) if index + 1 < len(
            timesteps
        ) else 1.0
        beta = 1.0 - alpha_bar / alpha_bar_prev

        eps = predict_noise(model, x, t, cond).eps_hat
        x0_hat = ((x - (1.0 - alpha_bar) ** 0.5 * eps) / alpha_bar**0.5).clamp(-1.0, 1.0)
        coef_x0 = alpha_bar_prev**0.5 * beta / (1.0 - alpha_bar)
        coef_xt = (1.0 - beta) ** 0.5 * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
        mean = coef_x0 * x0_hat + coef_xt * x
        if index + 1 < len(timesteps):
            variance = beta * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
            noise = torch.stack([torch.randn(shape, generator=g) for g in generators])
            x = mean + variance**0.5 * noise
        else:
            x = mean
    return x.clamp(-1.0, 1.0)


def sample(
    model: DenoiserModel,
    prompts: Union[PromptSpec, Sequence[PromptSpec]],
    sched: NoiseSchedule,
    seeds: Union[int, Sequence[int]],
    steps: Optional[int] = None,
    chunk_size: int = 64,
) -> torch.Tensor:
    """
    Генерирует изображения из чистого шума.

    Args:
        model: Денойзер
        prompts: Один промпт или список промптов
        sched: Расписание шума
        seeds: Сид на каждый промпт; шум каждого элемента берется из своего генератора
        steps: Число шагов (по умолчанию T)
        chunk_size: Размер батча при генерации

    Returns:
        [C, H, W] для одного промпта или [B, C, H, W], значения в [-1, 1]

    Raises:
        ShapeError: Число сидов не совпадает с числом промптов
        ScheduleError: steps вне [1, T]
    """
    single = isinstance(prompts, PromptSpec)
    prompt_list = [prompts] if single else list(prompts)
    seed_list = [seeds] if isinstance(seeds, int) else list(seeds)
    if len(seed_list) != len(prompt_list):
        raise ShapeError(f"{len(seed_list)} seeds for {len(prompt_list)} prompts")
    timesteps = sampling_timesteps(sched, steps if steps is not None else sched.T)
    model.eval()
    chunks = []
    for start in range(0, len(prompt_list), chunk_size):
        chunks.append(
            _denoise_chunk(
                model,
                prompt_list[start : start + chunk_size],
                sched,
                seed_list[start : start + chunk_size],
                timesteps,
            )
        )
    images = torch.cat(chunks) if chunks else torch.empty(0, *model.config.image_shape)
    return images[0] if single else images
