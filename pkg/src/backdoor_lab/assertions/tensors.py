"""
Проверки инвариантов над тензорами и параметрами моделей.
"""
import hashlib
from typing import Any, Dict, Mapping

import torch
from torch import nn

from ..diffusion.attention import AttentionMapSet
from ..exceptions import NumericsError, ShapeError


def assert_finite_loss(loss: torch.Tensor, **metadata: Any) -> None:
    """
    Проверяет, что значение функции потерь конечно.

    Raises:
        NumericsError: NaN или inf; metadata попадает в исключение
    """
    if not bool(torch.isfinite(loss).all()):
        raise NumericsError(f"non-finite loss {float(loss.detach())}", metadata)


def tensor_fingerprint(tensors: Mapping[str, torch.Tensor]) -> str:
    """SHA-256 по именам, формам и байтам тензоров."""
    digest = hashlib.sha256()
    for name in sorted(tensors):
        value = tensors[name].detach().cpu().contiguous()
        digest.update(name.encode("utf-8"))
        digest.update(str(tuple(value.shape)).encode("utf-8"))
        digest.update(value.numpy().tobytes())
    return digest.hexdigest()


def module_fingerprint(module: nn.Module) -> str:
    return tensor_fingerprint(dict(module.state_dict()))


def state_differences(left: nn.Module, right: nn.Module) -> Dict[str, str]:
    """Имена тензоров, которые отличаются или отсутствуют в одной из моделей."""
    a, b = left.state_dict(), right.state_dict()
    diffs = {}
    for name in sorted(set(a) | set(b)):
        if name not in a or name not in b:
            diffs[name] = "missing"
        elif a[name].shape != b[name].shape:
            diffs[name] = "shape"
        elif not torch.equal(a[name], b[name]):
            diffs[name] = "value"
    return diffs


def assert_same_parameters(left: nn.Module, right: nn.Module) -> None:
    """Побитовое равенство всех тензоров state_dict."""
    diffs = state_differences(left, right)
    if diffs:
        raise AssertionError(f"parameters differ: {diffs}")


def assert_attention_normalized(attention: AttentionMapSet, atol: float = 1e-5) -> None:
    """
    Сумма по оси токенов равна 1 в каждой точке каждого слоя.

    Raises:
        ShapeError: Карта не имеет оси токенов
        AssertionError: Нарушена нормировка или диапазон [0, 1]
    """
    for site, maps in attention.maps.items():
        if maps.dim() < 3:
            raise ShapeError(f"site {site} map has no token axis")
        token_axis = maps.dim() - 3
        totals = maps.sum(dim=token_axis)
        worst = float((totals - 1.0).abs().max())
        if worst > atol:
            raise AssertionError(f"site {site}: token sums deviate from 1 by {worst}")
        if float(maps.min()) < 0.0 or float(maps.max()) > 1.0:
            raise AssertionError(f"site {site}: weights outside [0, 1]")
