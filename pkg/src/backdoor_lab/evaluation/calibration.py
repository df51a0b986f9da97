"""
Калибровка порогов детекторов по размеченным образцам.
"""
from dataclasses import dataclass
from typing import List, Sequence

from ..backdoor.targets import apply_backdoor
from ..data.scenes import render_scene
from ..exceptions import SpecError
from ..models.plans import BackdoorSpec
from ..models.scene import all_scene_specs
from .detectors import pixel_score, style_score


@dataclass
class CalibrationScores:
    positive: List[float]
    negative: List[float]


def calibrate_threshold(
    positive_scores: Sequence[float], negative_scores: Sequence[float]
) -> float:
    """
    Середина зазора между максимальным positive и минимальным negative score.

    Raises:
        SpecError: Пустые выборки или выборки перекрываются
    """
    if not positive_scores or not negative_scores:
        raise SpecError("calibration needs positive and negative samples")
    upper, lower = max(positive_scores), min(negative_scores)
    if upper >= lower:
        raise SpecError(f"scores overlap: max positive {upper} >= min negative {lower}")
    return (upper + lower) / 2.0


def score_rendered_scenes(spec: BackdoorSpec, width: int, height: int) -> CalibrationScores:
    """Чистые сцены дают negative, их цели бэкдора дают positive."""
    scores = CalibrationScores(positive=[], negative=[])
    for scene in all_scene_specs():
        image = render_scene(scene, width, height)
        target = apply_backdoor(image, spec)
        if spec.kind == "pixel":
            scores.negative.append(pixel_score(image, spec))
            scores.positive.append(pixel_score(target, spec))
        else:
            scores.negative.append(style_score(image))
            scores.positive.append(style_score(target))
    return scores
