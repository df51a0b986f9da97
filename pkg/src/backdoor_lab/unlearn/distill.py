"""
SKD / SKD-CAG: самодистилляция отравленной модели.

Учитель: замороженная копия отравленной модели на чистом промпте s.
Ученик: обучаемая копия на промпте s ⊕ ρ. Оба видят один и тот же x_t,
полученный зашумлением реального изображения из пула удаления.
"""
import copy
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import torch
from tqdm import tqdm

from ..assertions.tensors import assert_finite_loss, module_fingerprint
from ..backdoor.trigger import inject_trigger
from ..diffusion.denoiser import DenoiserModel, NoisePrediction, encode_text, predict_noise
from ..diffusion.schedule import NoiseSchedule, forward_diffuse
from ..diffusion.tokenizer import valid_lengths
from ..diffusion.training import TrainingLog, TrainingPair, make_optimizer
from ..exceptions import PolicyError, ProvenanceError, VocabularyError
from ..fixtures.seeding import derive_seed, torch_generator
from ..models.plans import UnlearnPlan
from ..models.records import TrainingLogRecord
from ..models.text import PromptSpec, Vocabulary
from .alignment import TokenAlignment, build_alignment
from .attention_targets import build_attention_targets, replacement_prompts
from .losses import composite_loss, compute_attn_loss, compute_pred_loss, timestep_weight

logger = logging.getLogger(__name__)


@dataclass
class DistillationStep:
    """Один батч дистилляции: общие x_t и t, выходы учителя и ученика."""

    clean_prompts: List[PromptSpec]
    triggered_prompts: List[PromptSpec]
    t: torch.Tensor
    x_t: torch.Tensor
    teacher_out: NoisePrediction
    student_out: NoisePrediction
    alignments: List[TokenAlignment]


@dataclass
class StepLosses:
    l_pred: torch.Tensor
    l_attn: Optional[torch.Tensor]
    composite: torch.Tensor


def _check_plan_vocabulary(plan: UnlearnPlan, vocab: Vocabulary) -> None:
    for word in plan.trigger_known.words:
        if word not in vocab:
            raise VocabularyError(word)
    missing = [word for word in plan.policy.pool if word not in vocab]
    if missing:
        raise PolicyError("replacement pool words are not in the vocabulary", {"words": missing})


def run_distillation_step(
    teacher: DenoiserModel,
    student: DenoiserModel,
    images: torch.Tensor,
    clean_prompts: Sequence[PromptSpec],
    triggered_prompts: Sequence[PromptSpec],
    alignments: Sequence[TokenAlignment],
    sched: NoiseSchedule,
    data_generator: torch.Generator,
    record_attention: bool,
) -> DistillationStep:
    """Общие t и eps для учителя и ученика; учитель без градиента."""
    batch = images.shape[0]
    t = torch.randint(0, sched.T, (batch,), generator=data_generator)
    eps = torch.randn(images.shape, generator=data_generator, dtype=images.dtype)
    x_t = forward_diffuse(images, t, eps, sched)

    with torch.no_grad():
        teacher_out = predict_noise(
            teacher, x_t, t, encode_text(clean_prompts, teacher), record_attention
        )
    student_out = predict_noise(
        student, x_t, t, encode_text(triggered_prompts, student), record_attention
    )
    return DistillationStep(
        clean_prompts=list(clean_prompts),
        triggered_prompts=list(triggered_prompts),
        t=t,
        x_t=x_t,
        teacher_out=teacher_out,
        student_out=student_out,
        alignments=list(alignments),
    )


def distillation_losses(
    step: DistillationStep,
    teacher: DenoiserModel,
    plan: UnlearnPlan,
    sched: NoiseSchedule,
    vocab: Vocabulary,
    policy_generator: torch.Generator,
) -> StepLosses:
    """
    L_pred, L_attn и итоговая функция потерь шага.

    Для политики random_word учитель выполняется еще раз на промптах
    со случайными словами на месте триггера.
    """
    l_pred = compute_pred_loss(step.teacher_out, step.student_out)
    if not plan.uses_attention:
        return StepLosses(l_pred=l_pred, l_attn=None, composite=l_pred)

    replacement_attn = None
    if plan.policy.kind == "random_word":
        prompts = replacement_prompts(
            step.clean_prompts, plan.trigger_known, plan.policy, vocab, policy_generator
        )
        with torch.no_grad():
            replacement_attn = predict_noise(
                teacher, step.x_t, step.t, encode_text(prompts, teacher), record_attention=True
            ).attention

    targets = build_attention_targets(
        step.teacher_out.attention,
        step.alignments,
        plan.policy,
        policy_generator,
        replacement_attn,
    )
    per_item = compute_attn_loss(
        step.student_out.attention, targets, valid_lengths(step.triggered_prompts),
        reduction="none",
    )
    if plan.timestep_weighted:
        per_item = timestep_weight(per_item, step.t, sched.T)
    l_attn = per_item.mean()
    return StepLosses(l_pred=l_pred, l_attn=l_attn, composite=composite_loss(l_pred, l_attn,
                                                                              plan.alpha))


def skd_cag_unlearn(
    poisoned: DenoiserModel,
    plan: UnlearnPlan,
    sched: NoiseSchedule,
    source: Sequence[TrainingPair],
    vocab: Vocabulary,
    log: Optional[TrainingLog] = None,
    progress: bool = True,
) -> Tuple[DenoiserModel, TrainingLog]:
    """
    Удаляет бэкдор самодистилляцией с направляющим вниманием.

    Args:
        poisoned: Отравленная модель; не изменяется
        plan: План удаления (alpha, политика, известная часть триггера)
        sched: Расписание шума
        source: Чистые пары (подпись без триггера, изображение) из пула удаления
        vocab: Словарь
        log: Журнал обучения, куда пишутся записи шагов
        progress: Показывать ли tqdm

    Returns:
        (очищенная модель-ученик, журнал)

    Raises:
        NumericsError: Нечисловая функция потерь
        PolicyError: Невозможно построить цели; context содержит номер шага
        ProvenanceError: Параметры учителя изменились
    """
    _check_plan_vocabulary(plan, vocab)
    log = log if log is not None else TrainingLog()
    teacher = copy.deepcopy(poisoned)
    teacher.eval()
    teacher.requires_grad_(False)
    student = copy.deepcopy(poisoned)
    teacher_hash = module_fingerprint(teacher)
    if plan.epochs == 0 or not source:
        return student, log

    k = len(plan.trigger_known.words)
    clean_prompts = [pair.prompt for pair in source]
    triggered = [inject_trigger(prompt, plan.trigger_known, vocab) for prompt in clean_prompts]
    alignments = [build_alignment(c, s, k, vocab) for c, s in zip(clean_prompts, triggered)]

    data_generator = torch_generator(plan.seed)
    policy_generator = torch_generator(derive_seed(plan.seed, "attention-policy"))
    optimizer = make_optimizer(student, plan.learning_rate)
    step_index = 0
    for epoch in range(plan.epochs):
        order = torch.randperm(len(source), generator=data_generator).tolist()
        totals = [0.0, 0.0]
        batches = range(0, len(order), plan.batch_size)
        for start in tqdm(batches, desc=f"unlearn {epoch + 1}/{plan.epochs}",
                          disable=not progress, leave=False):
            chunk = order[start : start + plan.batch_size]
            student.train()
            step = run_distillation_step(
                teacher,
                student,
                torch.stack([source[i].image for i in chunk]),
                [clean_prompts[i] for i in chunk],
                [triggered[i] for i in chunk],
                [alignments[i] for i in chunk],
                sched,
                data_generator,
                record_attention=plan.uses_attention,
            )
            try:
                losses = distillation_losses(step, teacher, plan, sched, vocab, policy_generator)
            except PolicyError as exc:
                exc.context.update(step=step_index, epoch=epoch)
                raise
            assert_finite_loss(losses.composite, step=step_index, t=step.t.tolist())
            optimizer.zero_grad(set_to_none=True)
            losses.composite.backward()
            optimizer.step()

            l_attn = float(losses.l_attn.detach()) if losses.l_attn is not None else None
            log.append(
                TrainingLogRecord(
                    step=step_index,
                    epoch=epoch,
                    t=step.t.tolist(),
                    l_pred=float(losses.l_pred.detach()),
                    l_attn=l_attn,
                    composite=float(losses.composite.detach()),
                )
            )
            logger.debug("step %d l_pred=%.6f l_attn=%s", step_index,
                         float(losses.l_pred.detach()), l_attn)
            totals[0] += float(losses.l_pred.detach())
            totals[1] += float(losses.composite.detach())
            step_index += 1
        logger.info("unlearn epoch %d/%d mean l_pred %.6f composite %.6f", epoch + 1,
                    plan.epochs, totals[0] / len(batches), totals[1] / len(batches))

    if module_fingerprint(teacher) != teacher_hash:
        raise ProvenanceError("teacher parameters changed during unlearning")
    student.eval()
    return student, log
