"""
Базовая линия finetune reversal: триггерные промпты с чистыми изображениями.
"""
import copy
from typing import List, Optional, Sequence

from ..backdoor.trigger import inject_trigger
from ..diffusion.denoiser import DenoiserModel
from ..diffusion.schedule import NoiseSchedule
from ..diffusion.training import TrainingLog, TrainingPair, fit_denoiser
from ..models.plans import FinetuneReversalPlan, TriggerSpec
from ..models.text import Vocabulary


def reversal_pairs(
    source: Sequence[TrainingPair], trigger: TriggerSpec, vocab: Vocabulary
) -> List[TrainingPair]:
    """(s, x) -> (s ⊕ ρ, x): изображения остаются чистыми."""
    return [
        TrainingPair(prompt=inject_trigger(pair.prompt, trigger, vocab), image=pair.image)
        for pair in source
    ]


def finetune_reversal(
    poisoned: DenoiserModel,
    pairs: Sequence[TrainingPair],
    plan: FinetuneReversalPlan,
    sched: NoiseSchedule,
    log: Optional[TrainingLog] = None,
    progress: bool = True,
) -> DenoiserModel:
    """
    Обычное DDPM дообучение копии отравленной модели на парах (s ⊕ ρ, x).

    При epochs == 0 возвращает копию с теми же параметрами.
    """
    model = copy.deepcopy(poisoned)
    fit_denoiser(
        model,
        pairs,
        sched,
        epochs=plan.epochs,
        learning_rate=plan.learning_rate,
        batch_size=plan.batch_size,
        seed=plan.seed,
        log=log,
        desc="finetune-reversal",
        progress=progress,
    )
    return model
