"""
Отравление обучающих пар и дообучение бэкдора.
"""
import copy
import logging
from typing import List, Optional, Sequence

import torch

from ..assertions.tensors import assert_same_parameters
from ..diffusion.denoiser import DenoiserModel
from ..diffusion.schedule import NoiseSchedule
from ..diffusion.tokenizer import tokenize
from ..diffusion.training import TrainingLog, TrainingPair, fit_denoiser
from ..fixtures.seeding import numpy_generator
from ..models.plans import PoisonPlan
from ..models.scene import DatasetEntry
from ..models.text import Vocabulary
from .targets import apply_backdoor
from .trigger import inject_trigger

logger = logging.getLogger(__name__)


def select_poisoned(count: int, poison_rate: float, seed: int) -> List[int]:
    """Индексы отравляемых записей: первые round(rate * count) сидированной перестановки."""
    chosen = numpy_generator(seed).permutation(count)[: round(poison_rate * count)]
    return sorted(int(i) for i in chosen)


def poison_dataset(
    entries: Sequence[DatasetEntry],
    images: Sequence[torch.Tensor],
    plan: PoisonPlan,
    vocab: Vocabulary,
    max_length: int,
) -> List[TrainingPair]:
    """
    Строит смесь чистых и отравленных пар.

    Отравленная пара получает промпт s ⊕ ρ и изображение m(x);
    остальные пары остаются (s, x). Выбор зависит только от (seed, числа записей).

    Args:
        entries: Записи манифеста в порядке индексов
        images: Изображения этих записей [C, H, W]
        plan: План отравления
        vocab: Словарь
        max_length: L_max

    Returns:
        Список TrainingPair в порядке записей
    """
    if len(entries) != len(images):
        raise ValueError("entries and images must have the same length")
    poisoned = set(select_poisoned(len(entries), plan.poison_rate, plan.seed))
    pairs = []
    for index, (entry, image) in enumerate(zip(entries, images)):
        prompt = tokenize(entry.caption, vocab, max_length)
        if index in poisoned:
            pairs.append(
                TrainingPair(
                    prompt=inject_trigger(prompt, plan.trigger, vocab),
                    image=apply_backdoor(image, plan.backdoor),
                    poisoned=True,
                )
            )
        else:
            pairs.append(TrainingPair(prompt=prompt, image=image))
    logger.info("poisoned %d of %d pairs (%s backdoor)", len(poisoned), len(pairs),
                plan.backdoor.kind)
    return pairs


def train_backdoor(
    clean_model: DenoiserModel,
    pairs: Sequence[TrainingPair],
    plan: PoisonPlan,
    sched: NoiseSchedule,
    log: Optional[TrainingLog] = None,
    progress: bool = True,
) -> DenoiserModel:
    """
    Дообучает копию чистой модели на смеси пар.

    Исходная модель не меняется; у копии меняются только параметры UNet.

    Raises:
        NumericsError: Нечисловая функция потерь
    """
    poisoned = copy.deepcopy(clean_model)
    fit_denoiser(
        poisoned,
        pairs,
        sched,
        epochs=plan.epochs,
        learning_rate=plan.learning_rate,
        batch_size=plan.batch_size,
        seed=plan.seed,
        log=log,
        desc="poison",
        progress=progress,
    )
    assert_same_parameters(clean_model.text_encoder, poisoned.text_encoder)
    return poisoned
