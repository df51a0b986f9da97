"""
Cross-attention блок UNet и запись карт внимания.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import torch
import torch.nn.functional as F
from torch import nn


def group_count(channels: int) -> int:
    groups = min(8, channels)
    return groups if channels % groups == 0 else 1


@dataclass
class AttentionMapSet:
    """
    Карты cross-attention, усредненные по головам.

    maps[site] имеет форму [B, L_max, h, w]; сумма по оси токенов равна 1
    в каждой пространственной точке.
    """

    maps: Dict[str, torch.Tensor] = field(default_factory=dict)

    @property
    def sites(self) -> List[str]:
        return list(self.maps)

    def __getitem__(self, site: str) -> torch.Tensor:
        return self.maps[site]

    def detach(self) -> "AttentionMapSet":
        return AttentionMapSet({site: value.detach() for site, value in self.maps.items()})


class AttentionStore:
    """Контроллер записи: блоки внимания передают сюда вероятности по ключам."""

    def __init__(self) -> None:
        self.maps: Dict[str, torch.Tensor] = {}

    def record(self, site: str, probs: torch.Tensor) -> None:
        self.maps[site] = probs

    def as_map_set(self) -> AttentionMapSet:
        return AttentionMapSet(dict(self.maps))


class CrossAttention(nn.Module):
    """Cross-attention: запросы из пространственных признаков, ключи из текста."""

    def __init__(self, channels: int, context_dim: int, num_heads: int, site: str):
        super().__init__()
        self.site = site
        self.num_heads = num_heads
        self.head_dim = channels // num_heads
        self.norm = nn.GroupNorm(group_count(channels), channels)
        self.to_q = nn.Linear(channels, channels, bias=False)
        self.to_k = nn.Linear(context_dim, channels, bias=False)
        self.to_v = nn.Linear(context_dim, channels, bias=False)
        self.to_out = nn.Linear(channels, channels)

    def _split_heads(self, x: torch.Tensor) -> torch.Tensor:
        batch, length, _ = x.shape
        return x.view(batch, length, self.num_heads, self.head_dim).transpose(1, 2)

    def forward(
        self,
        x: torch.Tensor,
        context: torch.Tensor,
        store: Optional[AttentionStore] = None,
    ) -> torch.Tensor:
        batch, channels, height, width = x.shape
        hidden = self.norm(x).flatten(2).transpose(1, 2)
        q = self._split_heads(self.to_q(hidden))
        k = self._split_heads(self.to_k(context))
        v = self._split_heads(self.to_v(context))

        scores = torch.matmul(q, k.transpose(-1, -2)) / math.sqrt(self.head_dim)
        probs = F.softmax(scores, dim=-1)  # [B, heads, HW, L]

        if store is not None:
            # [B, HW, L] -> [B, L, h, w]
            head_mean = probs.mean(dim=1).transpose(1, 2)
            store.record(self.site, head_mean.reshape(batch, -1, height, width))

        out = torch.matmul(probs, v).transpose(1, 2).reshape(batch, height * width, channels)
        out = self.to_out(out).transpose(1, 2).reshape(batch, channels, height, width)
        return x + out
