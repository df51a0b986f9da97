"""
Приемочные тесты: полные прогоны default.yaml и style.yaml на CPU.

Занимают десятки минут, поэтому запускаются только при BACKDOOR_LAB_ACCEPTANCE=1.
"""
from pathlib import Path

import pytest

from ..conftest import EXPERIMENTS_DIR, PipelineRun


def run_pipeline(root: Path, config_name: str) -> PipelineRun:
    run = PipelineRun(root=root, config=EXPERIMENTS_DIR / config_name)
    for subcommand in run.STEPS:
        code = run.cli(subcommand)
        assert code == 0, f"{config_name}: {subcommand} exited with {code}"
    return run


@pytest.fixture(scope="session")
def pixel_run(tmp_path_factory) -> PipelineRun:
    return run_pipeline(tmp_path_factory.mktemp("pixel"), "default.yaml")


@pytest.fixture(scope="session")
def style_run(tmp_path_factory) -> PipelineRun:
    return run_pipeline(tmp_path_factory.mktemp("style"), "style.yaml")


@pytest.fixture
def fresh_pixel_run(tmp_path) -> PipelineRun:
    """Второй независимый прогон default.yaml."""
    return run_pipeline(tmp_path / "repeat", "default.yaml")
