"""
Pydantic модели построчных журналов: шаги обучения и журнал запусков.
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class TrainingLogRecord(BaseModel):
    """Одна строка журнала обучения."""

    model_config = ConfigDict(extra="forbid")

    step: int = Field(ge=0)
    epoch: int = Field(ge=0)
    t: List[int]
    l_pred: float
    l_attn: Optional[float] = None
    composite: float


class LedgerRecord(BaseModel):
    """Запись журнала запусков."""

    model_config = ConfigDict(extra="forbid")

    timestamp: str
    subcommand: str
    config_hash: str
    run_dir: str
    inputs: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    # checkpoint id -> id родителя (или None для корня)
    parents: Dict[str, Optional[str]] = Field(default_factory=dict)
    metrics: Dict[str, float] = Field(default_factory=dict)


class CheckpointManifest(BaseModel):
    """Текстовый манифест чекпоинта (рядом с бинарным архивом тензоров)."""

    model_config = ConfigDict(extra="forbid")

    checkpoint_id: str
    parent_id: Optional[str] = None
    role: str
    method: Optional[str] = None
    config_hash: str
    model: Dict[str, Any]
    vocabulary: List[str]
    vocabulary_hash: str
    schedule: Dict[str, float]
    creation_seed: int
    plan_hash: Optional[str] = None
    archive_file: str = "tensors.bin"
    archive_sha256: str
