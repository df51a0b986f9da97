"""
Соответствие токенов промпта ученика (s ⊕ ρ) токенам промпта учителя (s).
"""
from dataclasses import dataclass
from typing import List, Tuple

from ..backdoor.trigger import strip_trigger
from ..exceptions import LengthError, PolicyError
from ..models.text import PromptSpec, Vocabulary

TRIGGER = -1


@dataclass(frozen=True)
class TokenAlignment:
    """student_to_teacher[n]: индекс токена учителя или TRIGGER для n < valid_len ученика."""

    student_to_teacher: Tuple[int, ...]

    @property
    def trigger_slots(self) -> List[int]:
        return [n for n, m in enumerate(self.student_to_teacher) if m == TRIGGER]

    @property
    def valid_len(self) -> int:
        return len(self.student_to_teacher)


def build_alignment(
    clean: PromptSpec, triggered: PromptSpec, trigger_len: int, vocab: Vocabulary
) -> TokenAlignment:
    """
    Строит соответствие: bos -> bos, триггерные позиции -> TRIGGER,
    остальные по порядку -> токены учителя.

    Raises:
        PolicyError: Промпт ученика без триггера не совпадает с промптом учителя
    """
    if trigger_len < 1:
        raise PolicyError("trigger must have at least one token", {"trigger_len": trigger_len})
    try:
        stripped = strip_trigger(triggered, trigger_len, vocab)
    except LengthError as exc:
        raise PolicyError(str(exc), {"prompt": triggered.text}) from exc
    if stripped.token_ids != clean.token_ids:
        raise PolicyError(
            "stripping the trigger does not reproduce the clean prompt",
            {"clean": clean.text, "triggered": triggered.text},
        )
    mapping = [0] + [TRIGGER] * trigger_len
    mapping += list(range(1, clean.valid_len))
    if len(mapping) != triggered.valid_len:
        raise PolicyError("alignment does not cover the student prompt",
                          {"triggered": triggered.text})
    return TokenAlignment(student_to_teacher=tuple(mapping))
