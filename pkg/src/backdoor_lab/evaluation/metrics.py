"""
Метрики: точность удаления бэкдора, ложные срабатывания и прокси качества.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import torch

from ..diffusion.denoiser import DenoiserModel
from ..diffusion.sampling import sample
from ..diffusion.schedule import NoiseSchedule
from ..exceptions import SpecError
from ..models.report import EvalReport, PromptVerdict, RemovalResult
from ..models.text import PromptSpec
from .detectors import Detector
from .prompts import PromptSet

logger = logging.getLogger(__name__)


def score_images(
    images: torch.Tensor,
    prompts: Sequence[PromptSpec],
    seeds: Sequence[int],
    detector: Detector,
) -> RemovalResult:
    """Применяет детектор к готовым изображениям в порядке промптов."""
    if not len(prompts):
        raise ValueError("at least one prompt is required")
    verdicts = [
        PromptVerdict(prompt=prompt.text, seed=seed, verdict=detector(image))
        for prompt, seed, image in zip(prompts, seeds, images)
    ]
    negatives = sum(1 for item in verdicts if not item.verdict.positive)
    accuracy = negatives / len(verdicts)
    return RemovalResult(
        removal_accuracy=accuracy, attack_success=1.0 - accuracy, verdicts=verdicts
    )


def removal_accuracy(
    model: DenoiserModel,
    triggered_prompts: Sequence[PromptSpec],
    detector: Detector,
    seeds: Sequence[int],
    sched: NoiseSchedule,
    steps: Optional[int] = None,
) -> RemovalResult:
    """
    Доля триггерных промптов, на которых артефакт не найден.

    Args:
        model: Оцениваемая модель
        triggered_prompts: Промпты с триггером
        detector: Детектор артефакта
        seeds: Сид сэмплера на каждый промпт
        sched: Расписание шума
        steps: Шаги сэмплера

    Returns:
        RemovalResult c attack_success = 1 - removal_accuracy
    """
    images = sample(model, list(triggered_prompts), sched, list(seeds), steps)
    return score_images(images, triggered_prompts, seeds, detector)


def image_distance(images: torch.Tensor, reference: torch.Tensor) -> float:
    """Среднее по изображениям попиксельное среднее |разности|."""
    if images.shape != reference.shape:
        raise SpecError(
            f"image sets differ in shape: {tuple(images.shape)} vs {tuple(reference.shape)}"
        )
    return float((images - reference).abs().flatten(1).mean(dim=1).mean())


def _check_same_config(model: DenoiserModel, reference: DenoiserModel) -> None:
    if model.config != reference.config:
        raise SpecError("quality proxy needs models with the same configuration")
    if model.text_encoder.vocab_size != reference.text_encoder.vocab_size:
        raise SpecError("quality proxy needs models with the same vocabulary")


def quality_proxy(
    model: DenoiserModel,
    reference: DenoiserModel,
    prompts: Sequence[PromptSpec],
    seeds: Sequence[int],
    sched: NoiseSchedule,
    steps: Optional[int] = None,
    reference_prompts: Optional[Sequence[PromptSpec]] = None,
) -> float:
    """
    Расстояние до генераций эталонной модели при общих сидах (меньше - лучше).

    reference_prompts задает промпты эталона, если они отличаются
    (например, триггерный промпт для модели и он же без триггера для эталона).

    Raises:
        SpecError: Конфигурации моделей различаются
    """
    _check_same_config(model, reference)
    reference_prompts = list(reference_prompts) if reference_prompts is not None else list(prompts)
    if len(reference_prompts) != len(prompts):
        raise SpecError("reference prompts must pair one-to-one with prompts")
    images = sample(model, list(prompts), sched, list(seeds), steps)
    expected = sample(reference, reference_prompts, sched, list(seeds), steps)
    return image_distance(images, expected)


@dataclass
class ModelSamples:
    """Генерации модели на чистых и триггерных промптах набора."""

    clean: torch.Tensor
    triggered: torch.Tensor


def generate_samples(
    model: DenoiserModel, prompt_set: PromptSet, sched: NoiseSchedule, steps: Optional[int]
) -> ModelSamples:
    return ModelSamples(
        clean=sample(model, prompt_set.clean, sched, prompt_set.seeds, steps),
        triggered=sample(model, prompt_set.triggered, sched, prompt_set.seeds, steps),
    )


def evaluate_model(
    model: DenoiserModel,
    prompt_set: PromptSet,
    detector: Detector,
    sched: NoiseSchedule,
    *,
    model_id: str,
    method: str,
    backdoor_kind: str,
    config_hash: str,
    steps: Optional[int] = None,
    reference_clean: Optional[torch.Tensor] = None,
    quality_prompts: Optional[int] = None,
    poisoned_clean: Optional[torch.Tensor] = None,
    samples: Optional[ModelSamples] = None,
) -> tuple:
    """
    Полная оценка модели на наборе промптов.

    Качество для триггерных промптов сравнивается с генерациями эталона
    на тех же промптах без триггера, то есть с reference_clean.

    Args:
        model: Оцениваемая модель
        prompt_set: Набор промптов и сидов
        detector: Детектор артефакта
        sched: Расписание шума
        model_id: Идентификатор чекпоинта
        method: Имя метода для отчета
        backdoor_kind: pixel или style
        config_hash: Хеш конфигурации
        steps: Шаги сэмплера
        reference_clean: Генерации неотравленной модели на чистых промптах набора
        quality_prompts: Сколько первых промптов используется для качества
        poisoned_clean: Генерации отравленной модели на чистых промптах набора
        samples: Уже посчитанные генерации модели на этом наборе

    Returns:
        (EvalReport, ModelSamples)
    """
    if samples is None:
        samples = generate_samples(model, prompt_set, sched, steps)
    removal = score_images(samples.triggered, prompt_set.triggered, prompt_set.seeds, detector)
    clean = score_images(samples.clean, prompt_set.clean, prompt_set.seeds, detector)

    count = quality_prompts if quality_prompts is not None else len(prompt_set)
    quality_clean = quality_triggered = None
    if reference_clean is not None:
        reference = reference_clean[:count]
        quality_clean = image_distance(samples.clean[:count], reference)
        quality_triggered = image_distance(samples.triggered[:count], reference)

    drift = None
    if poisoned_clean is not None:
        drift = image_distance(samples.clean[:count], poisoned_clean[:count])

    report = EvalReport(
        model_id=model_id,
        method=method,
        backdoor_kind=backdoor_kind,
        prompt_set_id=prompt_set.prompt_set_id,
        config_hash=config_hash,
        removal_accuracy=removal.removal_accuracy,
        attack_success=removal.attack_success,
        clean_false_positive_rate=clean.attack_success,
        quality_clean=quality_clean,
        quality_triggered=quality_triggered,
        drift_from_poisoned=drift,
        verdicts=removal.verdicts,
        seeds=list(prompt_set.seeds),
    )
    logger.info("%s: removal %.3f, clean fp %.3f, quality clean %s, drift %s", method,
                report.removal_accuracy, report.clean_false_positive_rate, quality_clean, drift)
    return report, samples
