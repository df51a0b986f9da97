"""
Закрытый словарь синтетического датасета.
"""
from typing import List

from ..models.scene import BackgroundColor, ForegroundColor, Shape, Size
from ..models.text import BOS_TOKEN, PAD_TOKEN, Vocabulary

TEMPLATE_WORDS = ["a", "on", "background"]
TRIGGER_WORDS = ["new", "trigger"]
# Резерв для политики random_word и тестов частичного триггера
DECOY_WORDS = ["dog", "tree", "house", "car", "moon", "boat"]


def scene_words() -> List[str]:
    words: List[str] = []
    for enum in (Size, ForegroundColor, Shape, BackgroundColor):
        for member in enum:
            if member.value not in words:
                words.append(member.value)
    return words


def build_vocabulary() -> Vocabulary:
    """
    Строит закрытый словарь из 25 слов и двух служебных токенов.

    Returns:
        Vocabulary с pad_id=0 и bos_id=1
    """
    words = TEMPLATE_WORDS + scene_words() + TRIGGER_WORDS + DECOY_WORDS
    return Vocabulary(tokens=(PAD_TOKEN, BOS_TOKEN, *words), pad_id=0, bos_id=1)
