"""
Настройки окружения и загрузка конфигурации эксперимента.
"""
from pathlib import Path
from typing import Optional

import yaml
from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from ..exceptions import ConfigError
from ..models.config import ExperimentConfig

PROJECT_ROOT = Path(__file__).resolve().parents[3]
DEFAULT_CONFIG = PROJECT_ROOT / "config" / "experiments" / "default.yaml"


class Settings(BaseSettings):
    """Переменные окружения с префиксом BACKDOOR_LAB_; флаги CLI имеют приоритет."""

    model_config = SettingsConfigDict(env_prefix="BACKDOOR_LAB_", extra="ignore")

    root: Path = Path("runs")
    config: Path = DEFAULT_CONFIG
    log_level: Optional[str] = None


def load_config(path: Path) -> ExperimentConfig:
    """
    Читает YAML и валидирует его в ExperimentConfig.

    Args:
        path: Путь к YAML файлу эксперимента

    Returns:
        Провалидированная конфигурация

    Raises:
        ConfigError: Файл не читается, не является YAML или не проходит валидацию
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{exc}") from exc
