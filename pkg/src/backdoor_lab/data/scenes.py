"""
Рендеринг сцен и шаблонные подписи.
"""
import numpy as np
import torch

from ..exceptions import SpecError
from ..models.scene import (
    COLOR_TABLE,
    BackgroundColor,
    ForegroundColor,
    SceneSpec,
    Shape,
    Size,
)

SUPERSAMPLE = 4
RADIUS_FRACTION = {Size.SMALL: 0.25, Size.LARGE: 0.4}
SQUARE_HALF_SIDE = 0.8
CAPTION_TEMPLATE = "a {size} {fg} {shape} on a {bg} background"


def color_value(name: str) -> np.ndarray:
    """RGB цвет в шкале [-1, 1]."""
    return np.asarray(COLOR_TABLE[name], dtype=np.float64) / 127.5 - 1.0


def _coverage(spec: SceneSpec, width: int, height: int) -> np.ndarray:
    """Доля покрытия каждого пикселя фигурой (сглаживание суперсэмплингом)."""
    offsets = (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE
    xs = (np.arange(width)[:, None] + offsets[None, :]).reshape(-1)
    ys = (np.arange(height)[:, None] + offsets[None, :]).reshape(-1)
    x, y = np.meshgrid(xs, ys)
    cx, cy = width / 2.0, height / 2.0
    radius = RADIUS_FRACTION[spec.size] * min(width, height)

    if spec.shape is Shape.CIRCLE:
        inside = (x - cx) ** 2 + (y - cy) ** 2 <= radius**2
    elif spec.shape is Shape.SQUARE:
        half = SQUARE_HALF_SIDE * radius
        inside = (np.abs(x - cx) <= half) & (np.abs(y - cy) <= half)
    else:
        # равносторонний треугольник вершиной вверх, радиус описанной окружности = radius
        dx = radius * np.sqrt(3.0) / 2.0
        vertices = [(cx, cy - radius), (cx + dx, cy + radius / 2.0), (cx - dx, cy + radius / 2.0)]
        signs = []
        for (x1, y1), (x2, y2) in zip(vertices, vertices[1:] + vertices[:1]):
            signs.append((x2 - x1) * (y - y1) - (y2 - y1) * (x - x1))
        inside = (signs[0] >= 0) & (signs[1] >= 0) & (signs[2] >= 0)

    blocks = inside.reshape(height, SUPERSAMPLE, width, SUPERSAMPLE)
    return blocks.mean(axis=(1, 3))


def render_scene(spec: SceneSpec, width: int, height: int) -> torch.Tensor:
    """
    Рендерит сцену: фигура по центру на однотонном фоне.

    Args:
        spec: Описание сцены
        width: W
        height: H

    Returns:
        Тензор [3, H, W] в [-1, 1]
    """
    coverage = _coverage(spec, width, height)[None, :, :]
    fg = color_value(spec.fg_color.value)[:, None, None]
    bg = color_value(spec.bg_color.value)[:, None, None]
    image = bg + coverage * (fg - bg)
    return torch.from_numpy(image.astype(np.float32))


def caption_of(spec: SceneSpec) -> str:
    return CAPTION_TEMPLATE.format(
        size=spec.size.value,
        fg=spec.fg_color.value,
        shape=spec.shape.value,
        bg=spec.bg_color.value,
    )


def parse_caption(caption: str) -> SceneSpec:
    """
    Обратная операция к caption_of.

    Raises:
        SpecError: Подпись не соответствует шаблону
    """
    words = caption.lower().split()
    if len(words) != 8 or words[0] != "a" or words[4:6] != ["on", "a"] or words[7] != "background":
        raise SpecError(f"caption does not follow the template: {caption!r}")
    try:
        return SceneSpec(
            size=Size(words[1]),
            fg_color=ForegroundColor(words[2]),
            shape=Shape(words[3]),
            bg_color=BackgroundColor(words[6]),
        )
    except ValueError as exc:
        raise SpecError(f"caption names an unknown scene: {caption!r}") from exc
