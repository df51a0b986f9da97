"""
Общие фикстуры: словарь, маленькая модель, короткое расписание и прогон конвейера.
"""
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import ClassVar, Dict, List

import pytest
import torch

from src.backdoor_lab.data.vocabulary import build_vocabulary
from src.backdoor_lab.diffusion.denoiser import DenoiserModel
from src.backdoor_lab.diffusion.schedule import NoiseSchedule, linear_schedule
from src.backdoor_lab.diffusion.tokenizer import tokenize
from src.backdoor_lab.harness.cli import main
from src.backdoor_lab.models.config import ModelConfig, ScheduleConfig
from src.backdoor_lab.models.text import PromptSpec, Vocabulary

PROJECT_ROOT = Path(__file__).parent.parent
EXPERIMENTS_DIR = PROJECT_ROOT / "config" / "experiments"


@pytest.fixture(scope="session")
def vocab() -> Vocabulary:
    return build_vocabulary()


@pytest.fixture(scope="session")
def tiny_model_config() -> ModelConfig:
    """16x16, слои внимания down1_8x8 и mid_4x4."""
    return ModelConfig(
        width=16,
        height=16,
        base_width=8,
        channel_mult=[1, 2],
        attention_resolutions=[8, 4],
        num_heads=2,
        text_dim=16,
        max_length=12,
    )


@pytest.fixture(scope="session")
def sched() -> NoiseSchedule:
    return linear_schedule(ScheduleConfig(timesteps=20))


@pytest.fixture
def tiny_model(tiny_model_config: ModelConfig, vocab: Vocabulary) -> DenoiserModel:
    return DenoiserModel(tiny_model_config, len(vocab))


@pytest.fixture
def prompt(vocab: Vocabulary):
    """Фабрика промптов длины L_max = 12."""

    def make(text: str) -> PromptSpec:
        return tokenize(text, vocab, 12)

    return make


@pytest.fixture
def random_image():
    """Фабрика изображений [3, 16, 16] в [-1, 1] с фиксированным сидом."""

    def make(seed: int = 0) -> torch.Tensor:
        generator = torch.Generator().manual_seed(seed)
        return torch.rand((3, 16, 16), generator=generator) * 2.0 - 1.0

    return make


@pytest.fixture(scope="session")
def experiments_dir() -> Path:
    return EXPERIMENTS_DIR


def smoke_config_path() -> Path:
    """Путь к конфигурации конвейера; BACKDOOR_LAB_SMOKE_CONFIG переопределяет его."""
    return Path(os.getenv("BACKDOOR_LAB_SMOKE_CONFIG", EXPERIMENTS_DIR / "smoke.yaml"))


@dataclass
class PipelineRun:
    STEPS: ClassVar[List[str]] = [
        "generate", "train-clean", "poison", "unlearn", "eval", "report",
    ]

    root: Path
    config: Path
    exit_codes: Dict[str, int] = field(default_factory=dict)

    def cli(self, *args: str) -> int:
        return main(["--config", str(self.config), "--root", str(self.root), "--quiet", *args])

    def run_dirs(self, subcommand: str) -> List[Path]:
        return sorted(p for p in self.root.glob(f"{subcommand}-*") if p.is_dir())


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory) -> PipelineRun:
    """Один полный прогон всех подкоманд в общем выходном каталоге."""
    run = PipelineRun(root=tmp_path_factory.mktemp("runs"), config=smoke_config_path())
    for subcommand in run.STEPS:
        run.exit_codes[subcommand] = run.cli(subcommand)
        if run.exit_codes[subcommand] != 0:
            break
    return run
