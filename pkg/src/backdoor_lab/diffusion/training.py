"""
Шаг обучения денойзера и общий цикл дообучения.

Один и тот же цикл обучает чистую модель, внедряет бэкдор и выполняет
finetune reversal; различаются только пары (промпт, изображение).
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import torch
import torch.nn.functional as F
from tqdm import tqdm

from ..assertions.tensors import assert_finite_loss
from ..fixtures.seeding import torch_generator
from ..models.records import TrainingLogRecord
from ..models.text import PromptSpec
from .denoiser import DenoiserModel, encode_text, predict_noise
from .schedule import NoiseSchedule, forward_diffuse

logger = logging.getLogger(__name__)


@dataclass
class TrainingPair:
    """Пара для обучения: промпт и целевое изображение [C, H, W] в [-1, 1]."""

    prompt: PromptSpec
    image: torch.Tensor
    poisoned: bool = False


class TrainingLog:
    """Построчный журнал обучения (JSON Lines), открывается на дозапись."""

    def __init__(self, path: Optional[Path] = None):
        self.path = path
        self.records: List[TrainingLogRecord] = []

    def append(self, record: TrainingLogRecord) -> None:
        self.records.append(record)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(record.model_dump_json() + "\n")


def make_optimizer(model: DenoiserModel, learning_rate: float) -> torch.optim.Optimizer:
    """Adam только по параметрам UNet."""
    return torch.optim.Adam(model.unet_parameters(), lr=learning_rate)


def denoising_loss(
    model: DenoiserModel,
    x0: torch.Tensor,
    cond: torch.Tensor,
    t: torch.Tensor,
    eps: torch.Tensor,
    sched: NoiseSchedule,
) -> torch.Tensor:
    """MSE между истинным и предсказанным шумом."""
    x_t = forward_diffuse(x0, t, eps, sched)
    return F.mse_loss(predict_noise(model, x_t, t, cond).eps_hat, eps)


def train_denoiser_step(
    model: DenoiserModel,
    images: torch.Tensor,
    prompts: Sequence[PromptSpec],
    sched: NoiseSchedule,
    optimizer: torch.optim.Optimizer,
    generator: torch.Generator,
    step: int = 0,
) -> float:
    """
    Один шаг DDPM обучения.

    Args:
        model: Денойзер; обновляются только параметры UNet
        images: Батч целевых изображений [B, C, H, W]
        prompts: Промпты батча
        sched: Расписание шума
        optimizer: Оптимизатор над параметрами UNet
        generator: Источник t и eps
        step: Номер шага для метаданных ошибок

    Returns:
        Значение функции потерь

    Raises:
        ValueError: Пустой батч
        NumericsError: Нечисловая функция потерь
    """
    batch = images.shape[0]
    if batch == 0 or len(prompts) != batch:
        raise ValueError("batch must be nonempty and prompts must match images")
    t = torch.randint(0, sched.T, (batch,), generator=generator)
    eps = torch.randn(images.shape, generator=generator, dtype=images.dtype)
    cond = encode_text(prompts, model)

    model.train()
    loss = denoising_loss(model, images, cond, t, eps, sched)
    assert_finite_loss(loss, step=step, t=t.tolist())
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def fit_denoiser(
    model: DenoiserModel,
    pairs: Sequence[TrainingPair],
    sched: NoiseSchedule,
    epochs: int,
    learning_rate: float,
    batch_size: int,
    seed: int,
    log: Optional[TrainingLog] = None,
    desc: str = "train",
    progress: bool = True,
) -> TrainingLog:
    """
    Обучает модель на парах заданное число эпох.

    Порядок батчей и шум определяются одним генератором с сидом seed,
    поэтому одинаковые входы дают побитово одинаковые параметры.
    """
    log = log if log is not None else TrainingLog()
    if epochs == 0 or not pairs:
        return log
    generator = torch_generator(seed)
    optimizer = make_optimizer(model, learning_rate)
    step = 0
    for epoch in range(epochs):
        order = torch.randperm(len(pairs), generator=generator).tolist()
        epoch_loss = 0.0
        batches = range(0, len(order), batch_size)
        for start in tqdm(batches, desc=f"{desc} {epoch + 1}/{epochs}", disable=not progress,
                          leave=False):
            chunk = [pairs[i] for i in order[start : start + batch_size]]
            images = torch.stack([pair.image for pair in chunk])
            prompts = [pair.prompt for pair in chunk]
            loss = train_denoiser_step(model, images, prompts, sched, optimizer, generator, step)
            log.append(TrainingLogRecord(step=step, epoch=epoch, t=[], l_pred=loss,
                                         composite=loss))
            epoch_loss += loss
            step += 1
        logger.info("%s epoch %d/%d mean loss %.5f", desc, epoch + 1, epochs,
                    epoch_loss / len(batches))
    return log
