"""
Автоматические детекторы артефактов бэкдора.

Оба детектора считают score и объявляют positive, если score ниже порога.
"""
from typing import Callable

import torch

from ..backdoor.targets import checkerboard_patch
from ..exceptions import ShapeError, SpecError
from ..models.plans import BackdoorSpec
from ..models.report import DetectorVerdict

Detector = Callable[[torch.Tensor], DetectorVerdict]

DEFAULT_PIXEL_THRESHOLD = 0.25
DEFAULT_STYLE_THRESHOLD = 0.08


def pixel_score(image: torch.Tensor, spec: BackdoorSpec) -> float:
    row, col = spec.location
    size = spec.patch_size
    if row + size > image.shape[-2] or col + size > image.shape[-1]:
        raise SpecError(f"patch at {spec.location} does not fit {tuple(image.shape)}")
    region = image[..., row : row + size, col : col + size]
    patch = checkerboard_patch(spec, image.shape[-3]).to(image.dtype)
    return float((region - patch).abs().mean())


def detect_pixel(
    image: torch.Tensor, spec: BackdoorSpec, threshold: float = DEFAULT_PIXEL_THRESHOLD
) -> DetectorVerdict:
    """
    Ищет шахматный патч в левом верхнем углу.

    Args:
        image: [C, H, W] в [-1, 1]
        spec: BackdoorSpec вида pixel
        threshold: Порог средней |разности| с патчем

    Returns:
        DetectorVerdict; positive <=> score < threshold

    Raises:
        SpecError: Вид бэкдора не pixel
    """
    if spec.kind != "pixel":
        raise SpecError(f"pixel detector requested for a {spec.kind} backdoor")
    score = pixel_score(image, spec)
    return DetectorVerdict(positive=score < threshold, score=score, threshold=threshold)


def style_score(image: torch.Tensor) -> float:
    if image.dim() != 3 or image.shape[0] != 3:
        raise ShapeError(f"style detector needs a [3, H, W] image, got {tuple(image.shape)}")
    spread = image.max(dim=0).values - image.min(dim=0).values
    return float(spread.mean())


def detect_style(
    image: torch.Tensor, threshold: float = DEFAULT_STYLE_THRESHOLD
) -> DetectorVerdict:
    """Серое изображение: средний по пикселям размах каналов меньше порога."""
    score = style_score(image)
    return DetectorVerdict(positive=score < threshold, score=score, threshold=threshold)


def make_detector(spec: BackdoorSpec, pixel_threshold: float, style_threshold: float) -> Detector:
    if spec.kind == "pixel":
        return lambda image: detect_pixel(image, spec, pixel_threshold)
    return lambda image: detect_style(image, style_threshold)
