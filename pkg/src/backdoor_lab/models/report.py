"""
Pydantic модели вердиктов детекторов и отчетов оценки.
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DetectorVerdict(BaseModel):
    """Вердикт детектора: positive означает, что артефакт бэкдора найден."""

    model_config = ConfigDict(frozen=True)

    positive: bool
    score: float
    threshold: float
    # positive <=> score < threshold для обоих детекторов
    direction: Literal["below"] = "below"

    @model_validator(mode="after")
    def _check_direction(self) -> "DetectorVerdict":
        if self.positive != (self.score < self.threshold):
            raise ValueError("verdict does not match score/threshold")
        return self


class PromptVerdict(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prompt: str
    seed: int
    verdict: DetectorVerdict


class RemovalResult(BaseModel):
    """Фрагмент отчета: точность удаления и успешность атаки."""

    model_config = ConfigDict(extra="forbid")

    removal_accuracy: float = Field(ge=0.0, le=1.0)
    attack_success: float = Field(ge=0.0, le=1.0)
    verdicts: List[PromptVerdict]

    @model_validator(mode="after")
    def _check_complement(self) -> "RemovalResult":
        negatives = sum(1 for item in self.verdicts if not item.verdict.positive)
        total = len(self.verdicts)
        if total and self.removal_accuracy != negatives / total:
            raise ValueError("removal_accuracy disagrees with verdicts")
        if self.removal_accuracy + self.attack_success != 1.0:
            raise ValueError("removal_accuracy + attack_success must equal 1")
        return self


class EvalReport(BaseModel):
    """Итог оценки одной модели на наборе промптов."""

    model_config = ConfigDict(extra="forbid")

    model_id: str
    method: str
    backdoor_kind: Literal["pixel", "style"]
    prompt_set_id: str
    config_hash: str
    removal_accuracy: float = Field(ge=0.0, le=1.0)
    attack_success: float = Field(ge=0.0, le=1.0)
    clean_false_positive_rate: float = Field(ge=0.0, le=1.0)
    # Метрика качества: средняя попиксельная |разность| с эталонной
    # (неотравленной) моделью, меньше - лучше.
    quality_metric: Literal["mean_abs_distance_to_reference"] = "mean_abs_distance_to_reference"
    quality_clean: Optional[float] = None
    quality_triggered: Optional[float] = None
    # Средняя попиксельная |разность| с генерациями отравленной модели на
    # чистых промптах при общих сидах: насколько очистка сдвинула поведение.
    drift_from_poisoned: Optional[float] = None
    verdicts: List[PromptVerdict]
    seeds: List[int]


class AlphaAblationRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: float
    removal_accuracy: float


class PartialTriggerRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    known_phrase: str
    removal_accuracy: float
    quality: Optional[float] = None


class TimestepAblationRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    timestep_weighted: bool
    removal_accuracy: float
    quality: Optional[float] = None


class AblationTables(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config_hash: str
    model_id: str
    alpha: List[AlphaAblationRow] = Field(default_factory=list)
    partial_trigger: List[PartialTriggerRow] = Field(default_factory=list)
    timestep: List[TimestepAblationRow] = Field(default_factory=list)
