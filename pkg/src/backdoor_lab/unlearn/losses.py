"""
Функции потерь самодистилляции: L_pred, L_attn, их смесь и взвешивание по шагу.
"""
from typing import Literal, Optional, Union

import torch
import torch.nn.functional as F

from ..diffusion.attention import AttentionMapSet
from ..diffusion.denoiser import NoisePrediction
from ..exceptions import ScheduleError, ShapeError

Scalar = Union[float, torch.Tensor]


def _eps(prediction: Union[NoisePrediction, torch.Tensor]) -> torch.Tensor:
    return prediction.eps_hat if isinstance(prediction, NoisePrediction) else prediction


def compute_pred_loss(
    teacher: Union[NoisePrediction, torch.Tensor],
    student: Union[NoisePrediction, torch.Tensor],
) -> torch.Tensor:
    """
    Среднеквадратичная ошибка между предсказанным шумом учителя и ученика.

    Усреднение по всем элементам W·H·C (и по батчу).

    Raises:
        ShapeError: Формы различаются
    """
    target, output = _eps(teacher), _eps(student)
    if target.shape != output.shape:
        raise ShapeError(f"teacher {tuple(target.shape)} and student {tuple(output.shape)} differ")
    return F.mse_loss(output, target.detach())


def compute_attn_loss(
    student_attn: AttentionMapSet,
    targets: AttentionMapSet,
    valid_len: Union[int, torch.Tensor],
    reduction: Literal["mean", "none"] = "mean",
) -> torch.Tensor:
    """
    Средняя по слоям MSE между картами внимания ученика и целями.

    Для каждого слоя: (1 / (N·h·w)) Σ_{n<N} Σ_i Σ_j (target_n - student_n)^2,
    где N = valid_len промпта ученика; pad-токены не учитываются.

    Args:
        student_attn: Карты ученика [B, L, h, w] или [L, h, w]
        targets: Цели тех же слоев и форм
        valid_len: N (int) или тензор [B]
        reduction: "mean" усредняет по батчу, "none" возвращает [B]

    Raises:
        ShapeError: Наборы слоев или формы карт не совпадают
    """
    if set(student_attn.sites) != set(targets.sites):
        raise ShapeError(
            f"attention sites differ: {sorted(student_attn.sites)} vs {sorted(targets.sites)}"
        )
    if not student_attn.sites:
        raise ShapeError("no attention sites to compare")

    per_site = []
    for site in student_attn.sites:
        student, target = student_attn[site], targets[site]
        if student.shape != target.shape:
            raise ShapeError(
                f"site {site}: student {tuple(student.shape)} vs target {tuple(target.shape)}"
            )
        if student.dim() == 3:
            student, target = student.unsqueeze(0), target.unsqueeze(0)
        batch, length, height, width = student.shape
        counts = torch.as_tensor(valid_len, dtype=torch.long).reshape(-1).expand(batch)
        if bool(((counts < 1) | (counts > length)).any()):
            raise ShapeError(f"valid_len outside [1, {length}]")
        mask = (torch.arange(length)[None, :] < counts[:, None]).to(student.dtype)
        squared = (target.detach() - student) ** 2
        totals = (squared.sum(dim=(2, 3)) * mask).sum(dim=1)
        per_site.append(totals / (counts.to(student.dtype) * height * width))

    per_item = torch.stack(per_site).mean(dim=0)
    return per_item if reduction == "none" else per_item.mean()


def composite_loss(l_pred: Scalar, l_attn: Optional[Scalar], alpha: float) -> Scalar:
    """(1 - alpha)·L_pred + alpha·L_attn; без L_attn возвращает L_pred."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha} outside [0, 1]")
    if l_attn is None:
        return l_pred
    return (1.0 - alpha) * l_pred + alpha * l_attn


def timestep_weight(l_attn: Scalar, t: Union[int, torch.Tensor], T: int) -> Scalar:
    """
    Масштабирует L_attn на t / T.

    Raises:
        ScheduleError: T <= 0 или t вне [0, T]
    """
    if T <= 0:
        raise ScheduleError("T must be positive")
    steps = torch.as_tensor(t)
    if bool(((steps < 0) | (steps > T)).any()):
        raise ScheduleError(f"timestep outside [0, {T}]")
    if isinstance(t, torch.Tensor):
        dtype = l_attn.dtype if isinstance(l_attn, torch.Tensor) else torch.float64
        return l_attn * (t.to(torch.float64) / T).to(dtype)
    return l_attn * (t / T)
