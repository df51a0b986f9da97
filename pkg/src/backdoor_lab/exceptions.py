"""
Иерархия исключений стенда.

Каждое исключение несет код выхода, который CLI возвращает процессу.
"""
from typing import Any, Dict, Optional


class WorkbenchError(Exception):
    """Базовое исключение стенда."""

    exit_code: int = 1


class ConfigError(WorkbenchError):
    """Некорректная конфигурация эксперимента."""

    exit_code = 2


class SpecError(WorkbenchError):
    """Нарушение контракта спецификации (вид бэкдора, конфигурация модели)."""

    exit_code = 2


class VocabularyError(WorkbenchError):
    """Слово или идентификатор отсутствует в словаре."""

    exit_code = 2

    def __init__(self, word: str):
        super().__init__(f"unknown vocabulary item: {word!r}")
        self.word = word


class LengthError(WorkbenchError):
    """Промпт не помещается в L_max токенов."""

    exit_code = 2


class ScheduleError(WorkbenchError):
    """Шаг диффузии вне расписания."""

    exit_code = 2


class ShapeError(WorkbenchError):
    """Несовпадение форм тензоров."""

    exit_code = 2


class NumericsError(WorkbenchError):
    """Нечисловое значение функции потерь."""

    exit_code = 4

    def __init__(self, message: str, metadata: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.metadata = dict(metadata or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.metadata:
            return base
        details = ", ".join(f"{key}={value}" for key, value in sorted(self.metadata.items()))
        return f"{base} ({details})"


class PolicyError(WorkbenchError):
    """Невозможно построить цели внимания для триггерных токенов."""

    exit_code = 2

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.context = dict(context or {})


class ProvenanceError(WorkbenchError):
    """Нарушена цепочка происхождения артефактов."""

    exit_code = 5


class IoError(WorkbenchError):
    """Ошибка чтения или записи артефактов."""

    exit_code = 3
