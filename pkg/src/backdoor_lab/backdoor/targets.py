"""
Вредоносные преобразования целевых изображений: патч и оттенки серого.
"""
import torch

from ..exceptions import SpecError
from ..models.plans import BackdoorSpec


def checkerboard_patch(spec: BackdoorSpec, channels: int = 3) -> torch.Tensor:
    """Черно-белая шахматная доска [C, size, size] со стороной клетки patch_cell."""
    cells = torch.arange(spec.patch_size) // spec.patch_cell
    board = ((cells[:, None] + cells[None, :]) % 2).to(torch.float32) * 2.0 - 1.0
    return board.expand(channels, -1, -1).clone()


def _patch_region(image: torch.Tensor, spec: BackdoorSpec) -> tuple:
    row, col = spec.location
    size = spec.patch_size
    if row + size > image.shape[-2] or col + size > image.shape[-1]:
        raise SpecError(f"{size}x{size} patch at {spec.location} does not fit {tuple(image.shape)}")
    return (slice(row, row + size), slice(col, col + size))


def apply_pixel_target(image: torch.Tensor, spec: BackdoorSpec) -> torch.Tensor:
    """
    Заменяет угловую область патчем; остальные пиксели не меняются.

    Args:
        image: [C, H, W] или [B, C, H, W]
        spec: BackdoorSpec вида pixel

    Raises:
        SpecError: Вид не pixel или патч не помещается
    """
    if spec.kind != "pixel":
        raise SpecError(f"pixel target requested for a {spec.kind} backdoor")
    rows, cols = _patch_region(image, spec)
    out = image.clone()
    out[..., rows, cols] = checkerboard_patch(spec, image.shape[-3]).to(image.dtype)
    return out


def to_grayscale(image: torch.Tensor, weights: tuple) -> torch.Tensor:
    """Яркость считается в [0, 1] и возвращается в [-1, 1], повторенная в 3 каналах."""
    unit = (image + 1.0) / 2.0
    w = torch.tensor(weights, dtype=image.dtype).view(3, 1, 1)
    luma = (unit * w).sum(dim=-3, keepdim=True)
    return (luma * 2.0 - 1.0).expand_as(image).clone()


def apply_style_target(image: torch.Tensor, spec: BackdoorSpec) -> torch.Tensor:
    """
    Переводит изображение в оттенки серого.

    Raises:
        SpecError: Вид не style
    """
    if spec.kind != "style":
        raise SpecError(f"style target requested for a {spec.kind} backdoor")
    if image.shape[-3] != 3:
        raise SpecError("style target needs a 3-channel image")
    return to_grayscale(image, spec.luma_weights)


def apply_backdoor(image: torch.Tensor, spec: BackdoorSpec) -> torch.Tensor:
    if spec.kind == "pixel":
        return apply_pixel_target(image, spec)
    return apply_style_target(image, spec)
