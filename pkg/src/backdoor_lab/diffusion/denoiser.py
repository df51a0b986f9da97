"""
Денойзер: замороженный текстовый энкодер и UNet с cross-attention.
"""
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Union

import torch
import torch.nn.functional as F
from torch import nn

from ..exceptions import ShapeError, VocabularyError
from ..models.config import ModelConfig
from ..models.text import PromptSpec
from .attention import AttentionMapSet, AttentionStore, CrossAttention, group_count
from .tokenizer import prompts_to_tensor


def sinusoidal_table(length: int, dim: int) -> torch.Tensor:
    """Фиксированные синусоидальные позиционные коды [length, dim]."""
    positions = torch.arange(length, dtype=torch.float32)[:, None]
    freqs = torch.exp(torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim))
    table = torch.zeros(length, dim)
    table[:, 0::2] = torch.sin(positions * freqs)
    table[:, 1::2] = torch.cos(positions * freqs)
    return table


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    angles = t.float()[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)
    if dim % 2 == 1:
        emb = F.pad(emb, (0, 1))
    return emb


class TextEncoder(nn.Module):
    """Замороженная таблица эмбеддингов плюс позиционные коды."""

    def __init__(self, vocab_size: int, dim: int, max_length: int):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, dim)
        self.embedding.weight.requires_grad_(False)
        self.register_buffer("positional", sinusoidal_table(max_length, dim), persistent=False)

    @property
    def vocab_size(self) -> int:
        return self.embedding.num_embeddings

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        return self.embedding(token_ids) + self.positional.to(self.embedding.weight.dtype)


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, temb_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(group_count(in_ch), in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.temb = nn.Linear(temb_dim, out_ch)
        self.norm2 = nn.GroupNorm(group_count(out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.temb(temb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class ConditionalUNet(nn.Module):
    """
    UNet с len(channel_mult) стадиями вниз/вверх.

    Cross-attention стоит после ResBlock каждой стадии спуска и в середине,
    если разрешение входит в attention_resolutions. Восходящий путь
    получает текст через skip-соединения.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        base = config.base_width
        temb_dim = base * 4
        self.base_width = base
        self.time_mlp = nn.Sequential(
            nn.Linear(base, temb_dim), nn.SiLU(), nn.Linear(temb_dim, temb_dim)
        )
        self.in_conv = nn.Conv2d(config.channels, base, 3, padding=1)

        self.down_blocks = nn.ModuleList()
        self.down_attn = nn.ModuleDict()
        self.downsamplers = nn.ModuleList()
        skip_channels: List[int] = []
        ch = base
        resolution = config.height
        for level, mult in enumerate(config.channel_mult):
            out_ch = base * mult
            self.down_blocks.append(ResBlock(ch, out_ch, temb_dim))
            if resolution in config.attention_resolutions:
                site = f"down{level}_{resolution}x{resolution}"
                self.down_attn[str(level)] = CrossAttention(
                    out_ch, config.text_dim, config.num_heads, site
                )
            skip_channels.append(out_ch)
            self.downsamplers.append(nn.Conv2d(out_ch, out_ch, 3, stride=2, padding=1))
            ch = out_ch
            resolution //= 2

        self.mid_block1 = ResBlock(ch, ch, temb_dim)
        self.mid_attn: Optional[CrossAttention] = None
        if resolution in config.attention_resolutions:
            self.mid_attn = CrossAttention(
                ch, config.text_dim, config.num_heads, f"mid_{resolution}x{resolution}"
            )
        self.mid_block2 = ResBlock(ch, ch, temb_dim)

        self.upsamplers = nn.ModuleList()
        self.up_blocks = nn.ModuleList()
        for level in reversed(range(len(config.channel_mult))):
            self.upsamplers.append(nn.Conv2d(ch, ch, 3, padding=1))
            out_ch = skip_channels[level]
            self.up_blocks.append(ResBlock(ch + out_ch, out_ch, temb_dim))
            ch = out_ch

        self.out_norm = nn.GroupNorm(group_count(ch), ch)
        self.out_conv = nn.Conv2d(ch, config.channels, 3, padding=1)

    @property
    def attention_sites(self) -> List[str]:
        sites = [block.site for block in self.down_attn.values()]
        if self.mid_attn is not None:
            sites.append(self.mid_attn.site)
        return sites

    def forward(
        self,
        x: torch.Tensor,
        t: torch.Tensor,
        context: torch.Tensor,
        store: Optional[AttentionStore] = None,
    ) -> torch.Tensor:
        temb = self.time_mlp(timestep_embedding(t, self.base_width).to(x.dtype))
        h = self.in_conv(x)
        skips = []
        for level, block in enumerate(self.down_blocks):
            h = block(h, temb)
            key = str(level)
            if key in self.down_attn:
                h = self.down_attn[key](h, context, store)
            skips.append(h)
            h = self.downsamplers[level](h)

        h = self.mid_block1(h, temb)
        if self.mid_attn is not None:
            h = self.mid_attn(h, context, store)
        h = self.mid_block2(h, temb)

        for index, block in enumerate(self.up_blocks):
            h = F.interpolate(h, scale_factor=2.0, mode="nearest")
            h = self.upsamplers[index](h)
            h = block(torch.cat([h, skips[-(index + 1)]], dim=1), temb)
        return self.out_conv(F.silu(self.out_norm(h)))


class DenoiserModel(nn.Module):
    """
    Модель f_theta: замороженный текстовый энкодер и обучаемый UNet.

    Инициализация детерминирована: параметры создаются под
    torch.manual_seed(config.init_seed) внутри fork_rng.
    """

    def __init__(self, config: ModelConfig, vocab_size: int):
        super().__init__()
        self.config = config
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(config.init_seed)
            self.text_encoder = TextEncoder(vocab_size, config.text_dim, config.max_length)
            self.unet = ConditionalUNet(config)

    @property
    def attention_sites(self) -> List[str]:
        return self.unet.attention_sites

    def unet_parameters(self) -> Iterator[nn.Parameter]:
        return self.unet.parameters()


@dataclass
class NoisePrediction:
    """Предсказанный шум и (опционально) карты внимания."""

    eps_hat: torch.Tensor
    attention: Optional[AttentionMapSet] = None


def encode_text(
    prompts: Union[PromptSpec, Sequence[PromptSpec]], model: DenoiserModel
) -> torch.Tensor:
    """
    Кодирует промпты замороженным энкодером.

    Args:
        prompts: Один PromptSpec или последовательность
        model: Модель, чей энкодер используется

    Returns:
        Тензор [B, L_max, d] (или [L_max, d] для одного промпта)

    Raises:
        VocabularyError: Идентификатор вне словаря модели
    """
    single = isinstance(prompts, PromptSpec)
    batch = [prompts] if single else list(prompts)
    token_ids = prompts_to_tensor(batch)
    if token_ids.shape[1] != model.config.max_length:
        raise ShapeError(
            f"prompt length {token_ids.shape[1]} != model max_length {model.config.max_length}"
        )
    vocab_size = model.text_encoder.vocab_size
    bad = token_ids[(token_ids < 0) | (token_ids >= vocab_size)]
    if bad.numel():
        raise VocabularyError(str(int(bad[0])))
    device = model.text_encoder.embedding.weight.device
    with torch.no_grad():
        cond = model.text_encoder(token_ids.to(device))
    return cond[0] if single else cond


def predict_noise(
    model: DenoiserModel,
    x_t: torch.Tensor,
    t: Union[int, torch.Tensor],
    cond: torch.Tensor,
    record_attention: bool = False,
) -> NoisePrediction:
    """
    Предсказывает шум eps_hat и при необходимости записывает карты внимания.

    Запись не меняет вычисления: eps_hat побитово совпадает с режимом без записи.

    Args:
        model: Денойзер
        x_t: Зашумленный вход [B, C, H, W] или [C, H, W]
        t: Шаг диффузии (int или тензор [B])
        cond: Условие [B, L_max, d] или [L_max, d]
        record_attention: Возвращать ли AttentionMapSet

    Returns:
        NoisePrediction той же батчевости, что и вход

    Raises:
        ShapeError: Формы входов не согласованы с конфигурацией
    """
    single = x_t.dim() == 3
    if single:
        x_t = x_t.unsqueeze(0)
        if cond.dim() == 2:
            cond = cond.unsqueeze(0)
    config = model.config
    if tuple(x_t.shape[1:]) != config.image_shape:
        raise ShapeError(f"x_t shape {tuple(x_t.shape[1:])} != {config.image_shape}")
    if cond.dim() != 3 or cond.shape[0] != x_t.shape[0]:
        raise ShapeError(f"cond shape {tuple(cond.shape)} does not match batch {x_t.shape[0]}")
    if tuple(cond.shape[1:]) != (config.max_length, config.text_dim):
        expected = (config.max_length, config.text_dim)
        raise ShapeError(f"cond shape {tuple(cond.shape[1:])} != {expected}")

    if isinstance(t, int):
        t = torch.full((x_t.shape[0],), t, dtype=torch.long)
    elif t.dim() == 0:
        t = t.expand(x_t.shape[0])
    if t.shape[0] != x_t.shape[0]:
        raise ShapeError(f"{t.shape[0]} timesteps for a batch of {x_t.shape[0]}")

    store = AttentionStore() if record_attention else None
    eps_hat = model.unet(x_t, t, cond.to(x_t.dtype), store)
    attention = store.as_map_set() if store is not None else None
    if single:
        eps_hat = eps_hat[0]
        if attention is not None:
            attention = AttentionMapSet({site: m[0] for site, m in attention.maps.items()})
    return NoisePrediction(eps_hat=eps_hat, attention=attention)
