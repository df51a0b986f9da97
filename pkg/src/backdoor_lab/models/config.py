"""
Pydantic модели конфигурации эксперимента.

Все секции запрещают неизвестные ключи: опечатка в YAML должна падать
до начала вычислений.
"""
import hashlib
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..fixtures.seeding import derive_seed
from .plans import FinetuneReversalPlan, PoisonPlan, UnlearnPlan


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SplitConfig(StrictModel):
    """Доли пулов подписей: обучение, удаление бэкдора, оценка."""

    train: float = Field(default=0.6, gt=0.0, lt=1.0)
    unlearn: float = Field(default=0.2, gt=0.0, lt=1.0)
    eval: float = Field(default=0.2, gt=0.0, lt=1.0)
    seed: int = 11

    @model_validator(mode="after")
    def _check_sum(self) -> "SplitConfig":
        if abs(self.train + self.unlearn + self.eval - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        return self


class DatasetConfig(StrictModel):
    seed: int = 7
    count: int = Field(default=2000, ge=1)
    split: SplitConfig = SplitConfig()


class ModelConfig(StrictModel):
    """Архитектура UNet и текстового энкодера."""

    width: int = Field(default=32, ge=4)
    height: int = Field(default=32, ge=4)
    channels: int = Field(default=3, ge=1)
    base_width: int = Field(default=32, ge=1)
    channel_mult: List[int] = Field(default_factory=lambda: [1, 2], min_length=1)
    attention_resolutions: List[int] = Field(default_factory=lambda: [16, 8], min_length=1)
    num_heads: int = Field(default=4, ge=1)
    text_dim: int = Field(default=64, ge=2)
    max_length: int = Field(default=12, ge=2)
    init_seed: int = 0

    @model_validator(mode="after")
    def _check_geometry(self) -> "ModelConfig":
        depth = len(self.channel_mult)
        for side in (self.width, self.height):
            if side % (2**depth) != 0:
                raise ValueError(f"image side {side} is not divisible by 2**{depth}")
        allowed = {self.height // (2**level) for level in range(depth + 1)}
        unknown = sorted(set(self.attention_resolutions) - allowed)
        if unknown:
            raise ValueError(f"attention resolutions {unknown} not in {sorted(allowed)}")
        if self.text_dim % 2 != 0:
            raise ValueError("text_dim must be even")
        for mult in self.channel_mult:
            if (self.base_width * mult) % self.num_heads != 0:
                raise ValueError("every stage width must be divisible by num_heads")
        return self

    @property
    def image_shape(self) -> tuple:
        return (self.channels, self.height, self.width)


class ScheduleConfig(StrictModel):
    timesteps: int = Field(default=200, ge=1)
    beta_start: float = Field(default=1e-4, gt=0.0, lt=1.0)
    beta_end: float = Field(default=0.02, gt=0.0, lt=1.0)


class TrainingConfig(StrictModel):
    """Обучение чистой модели."""

    epochs: int = Field(default=40, ge=0)
    learning_rate: float = Field(default=2e-4, gt=0.0)
    batch_size: int = Field(default=32, ge=1)
    seed: int = 1


RESERVED_METHOD_NAMES = ("clean", "poisoned", "finetune_reversal")


class UnlearnSection(StrictModel):
    methods: Dict[str, UnlearnPlan] = Field(default_factory=dict)
    finetune_reversal: Optional[FinetuneReversalPlan] = FinetuneReversalPlan()

    @model_validator(mode="after")
    def _check_names(self) -> "UnlearnSection":
        for name in self.methods:
            if name in RESERVED_METHOD_NAMES or not name.replace("_", "").isalnum():
                raise ValueError(f"invalid unlearn method name {name!r}")
        return self


class EvalConfig(StrictModel):
    num_prompts: int = Field(default=100, ge=1)
    quality_prompts: int = Field(default=50, ge=1)
    seed: int = 1000
    sample_steps: int = Field(default=200, ge=1)
    pixel_threshold: float = Field(default=0.25, ge=0.0)
    style_threshold: float = Field(default=0.08, ge=0.0)
    grid_prompts: int = Field(default=4, ge=0)


class AblationsConfig(StrictModel):
    alpha_sweep: List[float] = Field(default_factory=list)
    alpha_method: str = "skd_cag_gaussian"
    partial_trigger: bool = False
    partial_trigger_method: str = "skd_cag_gaussian"
    timestep_weighting: bool = False
    timestep_method: str = "skd_cag_gaussian"

    @model_validator(mode="after")
    def _check_alphas(self) -> "AblationsConfig":
        for alpha in self.alpha_sweep:
            if not 0.0 <= alpha <= 1.0:
                raise ValueError(f"alpha {alpha} outside [0, 1]")
        return self


class LoggingConfig(StrictModel):
    level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"


class ExperimentConfig(StrictModel):
    """Полная конфигурация эксперимента."""

    name: str = "experiment"
    dataset: DatasetConfig = DatasetConfig()
    model: ModelConfig = ModelConfig()
    schedule: ScheduleConfig = ScheduleConfig()
    clean_training: TrainingConfig = TrainingConfig()
    poison: PoisonPlan = PoisonPlan()
    unlearn: UnlearnSection = UnlearnSection()
    eval: EvalConfig = EvalConfig()
    ablations: AblationsConfig = AblationsConfig()
    logging: LoggingConfig = LoggingConfig()

    @model_validator(mode="after")
    def _check_cross_sections(self) -> "ExperimentConfig":
        if self.eval.sample_steps > self.schedule.timesteps:
            raise ValueError("eval.sample_steps exceeds schedule.timesteps")
        backdoor = self.poison.backdoor
        if backdoor.kind == "pixel":
            row, col = backdoor.location
            if row + backdoor.patch_size > self.model.height or (
                col + backdoor.patch_size > self.model.width
            ):
                raise ValueError("backdoor patch does not fit inside the image")
        if self.model.channels != 3:
            raise ValueError("synthetic scenes are RGB: model.channels must be 3")
        needed = []
        if self.ablations.alpha_sweep:
            needed.append(self.ablations.alpha_method)
        if self.ablations.partial_trigger:
            needed.append(self.ablations.partial_trigger_method)
        if self.ablations.timestep_weighting:
            needed.append(self.ablations.timestep_method)
        missing = sorted(set(needed) - set(self.unlearn.methods))
        if missing:
            raise ValueError(f"ablations reference unknown unlearn methods: {missing}")
        return self

    def config_hash(self) -> str:
        """SHA-256 канонического JSON представления."""
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Возвращает копию, в которой все сиды выведены из одного числа."""
        data = self.model_dump()
        data["dataset"]["seed"] = derive_seed(seed, "dataset")
        data["dataset"]["split"]["seed"] = derive_seed(seed, "split")
        data["model"]["init_seed"] = derive_seed(seed, "model")
        data["clean_training"]["seed"] = derive_seed(seed, "clean_training")
        data["poison"]["seed"] = derive_seed(seed, "poison")
        data["eval"]["seed"] = derive_seed(seed, "eval")
        unlearn_seed = derive_seed(seed, "unlearn")
        for method in data["unlearn"]["methods"].values():
            method["seed"] = unlearn_seed
        if data["unlearn"]["finetune_reversal"] is not None:
            data["unlearn"]["finetune_reversal"]["seed"] = derive_seed(seed, "finetune_reversal")
        return ExperimentConfig.model_validate(data)
