"""
Разбиение закрытого пространства подписей на непересекающиеся пулы.
"""
from dataclasses import dataclass
from typing import List, Sequence

from ..exceptions import ConfigError
from ..fixtures.seeding import numpy_generator
from ..models.config import SplitConfig
from ..models.scene import DatasetEntry, all_scene_specs
from .scenes import caption_of


@dataclass(frozen=True)
class CaptionPools:
    train: List[str]
    unlearn: List[str]
    eval: List[str]


def split_caption_pools(split: SplitConfig) -> CaptionPools:
    """
    Делит все допустимые подписи сидированной перестановкой.

    Raises:
        ConfigError: Один из пулов пуст
    """
    captions = [caption_of(spec) for spec in all_scene_specs()]
    order = numpy_generator(split.seed).permutation(len(captions))
    n_train = round(split.train * len(captions))
    n_unlearn = round(split.unlearn * len(captions))
    shuffled = [captions[i] for i in order]
    pools = CaptionPools(
        train=shuffled[:n_train],
        unlearn=shuffled[n_train : n_train + n_unlearn],
        eval=shuffled[n_train + n_unlearn :],
    )
    for name in ("train", "unlearn", "eval"):
        if not getattr(pools, name):
            raise ConfigError(f"caption pool {name!r} is empty")
    return pools


def entries_in_pool(entries: Sequence[DatasetEntry], pool: Sequence[str]) -> List[DatasetEntry]:
    allowed = set(pool)
    return [entry for entry in entries if entry.caption in allowed]


def cycle_prompts(pool: Sequence[str], count: int) -> List[str]:
    """Первые count подписей циклического обхода пула."""
    return [pool[i % len(pool)] for i in range(count)]
