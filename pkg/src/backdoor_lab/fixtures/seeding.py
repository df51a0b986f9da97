"""
Утилиты для детерминированных генераторов случайных чисел.
"""
import hashlib

import numpy as np
import torch


def derive_seed(base: int, label: str) -> int:
    """
    Выводит дочерний сид из базового сида и текстовой метки.

    Args:
        base: Базовый сид
        label: Метка потребителя (например, "poison" или "eval")

    Returns:
        Неотрицательный 63-битный сид
    """
    digest = hashlib.sha256(f"{base}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & ((1 << 63) - 1)


def torch_generator(seed: int) -> torch.Generator:
    """Создает CPU генератор torch с заданным сидом."""
    generator = torch.Generator(device="cpu")
    generator.manual_seed(seed)
    return generator


def numpy_generator(seed: int) -> np.random.Generator:
    """Создает генератор numpy с заданным сидом."""
    return np.random.default_rng(seed)
