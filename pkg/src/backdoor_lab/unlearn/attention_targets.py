"""
Цели для карт внимания ученика.

Нетриггерные токены получают карты учителя. Триггерные токены получают цель
политики: гауссов шум, нулевую карту или карты случайных слов, которые
учитель посчитал на промпте с этими словами вместо триггера.
"""
from typing import List, Optional, Sequence, Union

import torch

from ..backdoor.trigger import inject_trigger
from ..diffusion.attention import AttentionMapSet
from ..exceptions import PolicyError
from ..models.plans import AttentionTargetPolicy, TriggerSpec
from ..models.text import PromptSpec, Vocabulary
from .alignment import TRIGGER, TokenAlignment


def gaussian_parameters(policy: AttentionTargetPolicy, height: int, width: int) -> tuple:
    """(mean, std) для слоя h×w; по умолчанию mean = 1/(h·w), std = std_ratio·mean."""
    mean = policy.mean if policy.mean is not None else 1.0 / (height * width)
    std = policy.std if policy.std is not None else policy.std_ratio * mean
    return mean, std


def draw_replacement_words(
    policy: AttentionTargetPolicy, slots: int, generator: torch.Generator
) -> List[str]:
    """Случайные слова пула (с возвращением) для slots триггерных позиций."""
    if not policy.pool:
        raise PolicyError("replacement pool is exhausted", {"slots": slots})
    picks = torch.randint(0, len(policy.pool), (slots,), generator=generator).tolist()
    return [policy.pool[i] for i in picks]


def replacement_prompts(
    clean_prompts: Sequence[PromptSpec],
    trigger: TriggerSpec,
    policy: AttentionTargetPolicy,
    vocab: Vocabulary,
    generator: torch.Generator,
) -> List[PromptSpec]:
    """Чистые промпты, в которые на место триггера вставлены случайные слова пула."""
    prompts = []
    for prompt in clean_prompts:
        words = draw_replacement_words(policy, len(trigger.words), generator)
        missing = [word for word in words if word not in vocab]
        if missing:
            raise PolicyError("replacement word is not in the vocabulary", {"words": missing})
        prompts.append(inject_trigger(prompt, TriggerSpec(phrase=" ".join(words)), vocab))
    return prompts


def build_attention_targets(
    teacher_attn: AttentionMapSet,
    alignment: Union[TokenAlignment, Sequence[TokenAlignment]],
    policy: AttentionTargetPolicy,
    generator: torch.Generator,
    replacement_attn: Optional[AttentionMapSet] = None,
) -> Optional[AttentionMapSet]:
    """
    Строит цели в индексации токенов ученика.

    Args:
        teacher_attn: Карты учителя на чистом промпте [B, L, h, w] или [L, h, w]
        alignment: Соответствие токенов (одно или по элементу батча)
        policy: Политика для триггерных токенов
        generator: Источник случайности гауссовой политики
        replacement_attn: Карты учителя на промпте со случайными словами (random_word)

    Returns:
        AttentionMapSet целей (pad-позиции нулевые) или None для kind=none

    Raises:
        PolicyError: Нет карт случайных слов или соответствие выходит за карты
    """
    if policy.kind == "none":
        return None
    if policy.kind == "random_word" and replacement_attn is None:
        raise PolicyError("random_word policy needs the teacher maps of the replacement words")

    single = isinstance(alignment, TokenAlignment)
    alignments = [alignment] if single else list(alignment)
    targets = {}
    for site in teacher_attn.sites:
        teacher = teacher_attn[site].detach()
        replaced = replacement_attn[site].detach() if replacement_attn is not None else None
        if single:
            teacher = teacher.unsqueeze(0)
            replaced = replaced.unsqueeze(0) if replaced is not None else None
        batch, length, height, width = teacher.shape
        if len(alignments) != batch:
            raise PolicyError(f"{len(alignments)} alignments for a batch of {batch}")
        target = torch.zeros_like(teacher)
        mean, std = gaussian_parameters(policy, height, width)

        for b, item in enumerate(alignments):
            if item.valid_len > length:
                raise PolicyError("alignment is longer than the attention maps",
                                  {"site": site, "valid_len": item.valid_len})
            for n, m in enumerate(item.student_to_teacher):
                if m != TRIGGER:
                    target[b, n] = teacher[b, m]
                elif policy.kind == "gaussian_noise":
                    noise = torch.randn((height, width), generator=generator, dtype=teacher.dtype)
                    target[b, n] = (noise * std + mean).clamp(0.0, 1.0)
                elif policy.kind == "random_word":
                    target[b, n] = replaced[b, n]
                # black_image: нулевая карта
        targets[site] = target[0] if single else target
    return AttentionMapSet(targets)
