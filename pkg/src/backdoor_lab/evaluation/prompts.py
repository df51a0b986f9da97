"""
Тестовый набор промптов: подписи пула оценки с триггером и без, сиды сэмплера.
"""
import hashlib
from dataclasses import dataclass
from typing import List, Sequence

from ..backdoor.trigger import inject_trigger
from ..data.splits import cycle_prompts
from ..diffusion.tokenizer import tokenize
from ..models.plans import TriggerSpec
from ..models.text import PromptSpec, Vocabulary


@dataclass(frozen=True)
class PromptSet:
    """clean[i] и triggered[i] генерируются с одним и тем же seeds[i]."""

    prompt_set_id: str
    clean: List[PromptSpec]
    triggered: List[PromptSpec]
    seeds: List[int]

    def __len__(self) -> int:
        return len(self.seeds)

    def head(self, count: int) -> "PromptSet":
        return PromptSet(
            prompt_set_id=f"{self.prompt_set_id}:{count}",
            clean=self.clean[:count],
            triggered=self.triggered[:count],
            seeds=self.seeds[:count],
        )


def build_prompt_set(
    pool: Sequence[str],
    count: int,
    trigger: TriggerSpec,
    vocab: Vocabulary,
    max_length: int,
    seed: int,
) -> PromptSet:
    """
    Циклически обходит пул подписей; i-й промпт получает сид seed + i.

    Raises:
        LengthError: Промпт с триггером не помещается в max_length
    """
    captions = cycle_prompts(pool, count)
    clean = [tokenize(caption, vocab, max_length) for caption in captions]
    triggered = [inject_trigger(prompt, trigger, vocab) for prompt in clean]
    seeds = [seed + index for index in range(count)]
    digest = hashlib.sha256()
    for caption, item_seed in zip(captions, seeds):
        digest.update(f"{caption}|{item_seed}\n".encode("utf-8"))
    digest.update(trigger.phrase.encode("utf-8"))
    return PromptSet(
        prompt_set_id=digest.hexdigest()[:16], clean=clean, triggered=triggered, seeds=seeds
    )
