"""
Pydantic модели триггера, бэкдора и планов отравления/удаления.
"""
import hashlib
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class TriggerSpec(BaseModel):
    """Триггерная фраза, вставляемая сразу после bos."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    phrase: str = "new trigger"
    insertion: Literal["prefix"] = "prefix"

    @field_validator("phrase")
    @classmethod
    def _normalize(cls, value: str) -> str:
        words = value.lower().split()
        if not words:
            raise ValueError("trigger phrase must contain at least one word")
        return " ".join(words)

    @property
    def words(self) -> List[str]:
        return self.phrase.split()


class BackdoorSpec(BaseModel):
    """Вредоносное преобразование m: угловой патч или перевод в оттенки серого."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["pixel", "style"]
    patch_size: int = Field(default=8, ge=1)
    patch_cell: int = Field(default=2, ge=1)
    location: Tuple[int, int] = (0, 0)
    luma_weights: Tuple[float, float, float] = (0.299, 0.587, 0.114)

    @model_validator(mode="after")
    def _check_patch(self) -> "BackdoorSpec":
        if self.patch_size % self.patch_cell != 0:
            raise ValueError("patch_size must be a multiple of patch_cell")
        if min(self.location) < 0:
            raise ValueError("patch location must be non-negative")
        return self


class PoisonPlan(BaseModel):
    """План отравления данных и дообучения бэкдора."""

    model_config = ConfigDict(extra="forbid")

    trigger: TriggerSpec = TriggerSpec()
    backdoor: BackdoorSpec = BackdoorSpec(kind="pixel")
    poison_rate: float = Field(default=0.5, gt=0.0, le=1.0)
    epochs: int = Field(default=30, ge=0)
    learning_rate: float = Field(default=1e-4, gt=0.0)
    batch_size: int = Field(default=32, ge=1)
    seed: int = 2

    def fingerprint(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


class AttentionTargetPolicy(BaseModel):
    """Цель для карт внимания триггерных токенов."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["gaussian_noise", "black_image", "random_word", "none"]
    # None -> 1/(площадь карты) для каждого слоя отдельно
    mean: Optional[float] = Field(default=None, ge=0.0)
    std: Optional[float] = Field(default=None, gt=0.0)
    std_ratio: float = Field(default=0.5, gt=0.0)
    pool: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_kind(self) -> "AttentionTargetPolicy":
        if self.kind == "random_word" and not self.pool:
            raise ValueError("random_word policy needs a nonempty replacement pool")
        return self


class UnlearnPlan(BaseModel):
    """План удаления бэкдора (SKD / SKD-CAG)."""

    model_config = ConfigDict(extra="forbid")

    trigger_known: TriggerSpec = TriggerSpec()
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    policy: AttentionTargetPolicy = AttentionTargetPolicy(kind="gaussian_noise")
    timestep_weighted: bool = False
    epochs: int = Field(default=75, ge=0)
    learning_rate: float = Field(default=1e-4, gt=0.0)
    prompt_source_size: int = Field(default=500, ge=1)
    batch_size: int = Field(default=16, ge=1)
    seed: int = 3

    @model_validator(mode="after")
    def _check_pool(self) -> "UnlearnPlan":
        overlap = set(self.policy.pool) & set(self.trigger_known.words)
        if overlap:
            raise ValueError(f"replacement pool overlaps trigger words: {sorted(overlap)}")
        return self

    @property
    def uses_attention(self) -> bool:
        return self.policy.kind != "none"


class FinetuneReversalPlan(BaseModel):
    """Базовая линия: дообучение триггерных промптов на чистых изображениях."""

    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=200, ge=0)
    learning_rate: float = Field(default=1e-4, gt=0.0)
    prompt_source_size: int = Field(default=500, ge=1)
    batch_size: int = Field(default=16, ge=1)
    seed: int = 4
