"""
Пробельный токенизатор над закрытым словарем.
"""
from typing import Sequence

import torch

from ..exceptions import LengthError, VocabularyError
from ..models.text import PromptSpec, Vocabulary


def tokenize(text: str, vocab: Vocabulary, max_length: int) -> PromptSpec:
    """
    Переводит текст в PromptSpec фиксированной длины.

    Args:
        text: Текст промпта, слова разделены пробелами
        vocab: Закрытый словарь
        max_length: L_max, длина последовательности с учетом bos

    Returns:
        PromptSpec вида [bos, слова..., pad...]

    Raises:
        VocabularyError: Слово отсутствует в словаре
        LengthError: Слов не меньше, чем max_length
    """
    words = text.lower().split()
    if len(words) >= max_length:
        raise LengthError(f"{len(words)} words do not fit into max_length={max_length}")
    lookup = vocab.token_to_id
    ids = [vocab.bos_id]
    for word in words:
        if word not in lookup:
            raise VocabularyError(word)
        ids.append(lookup[word])
    valid_len = len(ids)
    ids.extend([vocab.pad_id] * (max_length - valid_len))
    return PromptSpec(text=" ".join(words), token_ids=tuple(ids), valid_len=valid_len)


def detokenize(prompt: PromptSpec, vocab: Vocabulary) -> str:
    """Собирает текст из значимых токенов (без bos)."""
    return " ".join(vocab.tokens[i] for i in prompt.token_ids[1 : prompt.valid_len])


def prompts_to_tensor(prompts: Sequence[PromptSpec]) -> torch.Tensor:
    """Склеивает идентификаторы токенов в LongTensor [B, L]."""
    lengths = {prompt.max_length for prompt in prompts}
    if len(lengths) != 1:
        raise LengthError(f"prompts have mixed padded lengths: {sorted(lengths)}")
    return torch.tensor([list(prompt.token_ids) for prompt in prompts], dtype=torch.long)


def valid_lengths(prompts: Sequence[PromptSpec]) -> torch.Tensor:
    return torch.tensor([prompt.valid_len for prompt in prompts], dtype=torch.long)
