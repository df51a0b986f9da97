"""
Контактные листы PNG: строки - методы, столбцы - промпты.
"""
from pathlib import Path
from typing import Sequence, Tuple

import torch
from PIL import Image, ImageDraw

from ..data.dataset import to_uint8

LABEL_WIDTH = 140
HEADER_HEIGHT = 14
PADDING = 2
BACKGROUND = (255, 255, 255)
TEXT_COLOR = (0, 0, 0)


def make_contact_sheet(
    rows: Sequence[Tuple[str, Sequence[torch.Tensor]]],
    column_labels: Sequence[str],
    path: Path,
    scale: int = 3,
) -> Path:
    """
    Собирает сетку изображений с подписями строк и столбцов.

    Args:
        rows: (подпись строки, изображения [3, H, W] в [-1, 1])
        column_labels: Подписи столбцов (обычно номер промпта)
        path: Куда сохранить PNG
        scale: Увеличение каждой ячейки (nearest)

    Returns:
        Путь к сохраненному файлу
    """
    if not rows:
        raise ValueError("contact sheet needs at least one row")
    columns = max(len(images) for _, images in rows)
    first = next(images[0] for _, images in rows if images)
    cell_h, cell_w = first.shape[-2] * scale, first.shape[-1] * scale
    width = LABEL_WIDTH + columns * (cell_w + PADDING) + PADDING
    height = HEADER_HEIGHT + len(rows) * (cell_h + PADDING) + PADDING

    sheet = Image.new("RGB", (width, height), BACKGROUND)
    draw = ImageDraw.Draw(sheet)
    for col, label in enumerate(column_labels[:columns]):
        draw.text((LABEL_WIDTH + col * (cell_w + PADDING) + PADDING, 1), label, fill=TEXT_COLOR)
    for row, (label, images) in enumerate(rows):
        top = HEADER_HEIGHT + row * (cell_h + PADDING) + PADDING
        draw.text((PADDING, top + cell_h // 2 - 5), label[:22], fill=TEXT_COLOR)
        for col, image in enumerate(images):
            tile = Image.fromarray(to_uint8(image))
            tile = tile.resize((cell_w, cell_h), Image.Resampling.NEAREST)
            sheet.paste(tile, (LABEL_WIDTH + col * (cell_w + PADDING) + PADDING, top))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sheet.save(path, format="PNG")
    return path
