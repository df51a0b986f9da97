"""
Абляции: значение alpha, частично известный триггер, взвешивание по шагу.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import torch

from ..diffusion.denoiser import DenoiserModel
from ..diffusion.sampling import sample
from ..diffusion.schedule import NoiseSchedule
from ..diffusion.training import TrainingPair
from ..exceptions import LengthError
from ..models.plans import TriggerSpec, UnlearnPlan
from ..models.report import AlphaAblationRow, PartialTriggerRow, TimestepAblationRow
from ..models.text import Vocabulary
from ..unlearn.distill import skd_cag_unlearn
from .detectors import Detector
from .metrics import image_distance, score_images
from .prompts import PromptSet

logger = logging.getLogger(__name__)


@dataclass
class AblationContext:
    """Все, что общее для прогонов одной абляции."""

    sched: NoiseSchedule
    vocab: Vocabulary
    source: Sequence[TrainingPair]
    prompt_set: PromptSet
    detector: Detector
    sample_steps: Optional[int] = None
    # генерации эталонной модели на prompt_set.head(quality_prompts).clean
    reference_clean: Optional[torch.Tensor] = None
    quality_prompts: int = 50
    progress: bool = True


def _unlearn_and_score(poisoned: DenoiserModel, plan: UnlearnPlan, ctx: AblationContext) -> tuple:
    source = ctx.source[: plan.prompt_source_size]
    model, _ = skd_cag_unlearn(poisoned, plan, ctx.sched, source, ctx.vocab, progress=ctx.progress)
    prompts = ctx.prompt_set
    images = sample(model, prompts.triggered, ctx.sched, prompts.seeds, ctx.sample_steps)
    removal = score_images(images, prompts.triggered, prompts.seeds, ctx.detector)
    quality = None
    if ctx.reference_clean is not None:
        head = prompts.head(ctx.quality_prompts)
        clean = sample(model, head.clean, ctx.sched, head.seeds, ctx.sample_steps)
        quality = image_distance(clean, ctx.reference_clean[: len(head)])
    return removal.removal_accuracy, quality


def run_ablation_alpha(
    poisoned: DenoiserModel, alphas: Sequence[float], plan: UnlearnPlan, ctx: AblationContext
) -> List[AlphaAblationRow]:
    """Один прогон удаления и оценка на каждое значение alpha."""
    rows = []
    for alpha in alphas:
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha {alpha} outside [0, 1]")
        accuracy, _ = _unlearn_and_score(poisoned, plan.model_copy(update={"alpha": alpha}), ctx)
        logger.info("alpha %.2f: removal %.3f", alpha, accuracy)
        rows.append(AlphaAblationRow(alpha=alpha, removal_accuracy=accuracy))
    return rows


def partial_phrases(trigger: TriggerSpec) -> List[str]:
    """Полная фраза и каждое ее слово по отдельности."""
    if len(trigger.words) < 2:
        raise LengthError("partial-trigger ablation needs a trigger of at least two words")
    return [trigger.phrase, *trigger.words]


def run_partial_trigger(
    poisoned: DenoiserModel, full_trigger: TriggerSpec, plan: UnlearnPlan, ctx: AblationContext
) -> List[PartialTriggerRow]:
    """
    Удаление при известной только части триггера.

    Тестовые промпты всегда содержат полный триггер.

    Raises:
        LengthError: Триггер из одного слова
    """
    rows = []
    for phrase in partial_phrases(full_trigger):
        known = plan.model_copy(update={"trigger_known": TriggerSpec(phrase=phrase)})
        accuracy, quality = _unlearn_and_score(poisoned, known, ctx)
        logger.info("known %r: removal %.3f", phrase, accuracy)
        rows.append(PartialTriggerRow(known_phrase=phrase, removal_accuracy=accuracy,
                                      quality=quality))
    return rows


def run_ablation_timestep(
    poisoned: DenoiserModel, plan: UnlearnPlan, ctx: AblationContext
) -> List[TimestepAblationRow]:
    """Один и тот же план без взвешивания L_attn по t/T и с ним."""
    rows = []
    for weighted in (False, True):
        variant = plan.model_copy(update={"timestep_weighted": weighted})
        accuracy, quality = _unlearn_and_score(poisoned, variant, ctx)
        rows.append(TimestepAblationRow(timestep_weighted=weighted, removal_accuracy=accuracy,
                                        quality=quality))
    return rows
