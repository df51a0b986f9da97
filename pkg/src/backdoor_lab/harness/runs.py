"""
Каталоги запусков: {subcommand}-{config_hash[:10]}-{timestamp}.

Пока запуск не завершен, в каталоге лежит маркер INCOMPLETE. Завершенный
запуск с тем же ключом (подкоманда, конфигурация, входы) переиспользуется.
"""
import hashlib
import logging
import shutil
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence

import yaml

from ..exceptions import IoError, ProvenanceError
from ..models.records import LedgerRecord

logger = logging.getLogger(__name__)

INCOMPLETE_MARKER = "INCOMPLETE"
RUN_FILE = "run.yaml"


def run_key(subcommand: str, config_hash: str, inputs: Sequence[str]) -> str:
    payload = "\n".join([subcommand, config_hash, *sorted(inputs)])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunDir:
    path: Path
    subcommand: str
    config_hash: str
    key: str
    inputs: List[str]
    reused: bool = False

    @property
    def complete(self) -> bool:
        return (self.path / RUN_FILE).is_file() and not (self.path / INCOMPLETE_MARKER).exists()

    def finish(self, record: LedgerRecord) -> None:
        """Записывает run.yaml с записью журнала и снимает маркер."""
        data = {"run_key": self.key, "record": record.model_dump(mode="json")}
        try:
            with open(self.path / RUN_FILE, "w", encoding="utf-8") as handle:
                yaml.safe_dump(data, handle, sort_keys=False)
            (self.path / INCOMPLETE_MARKER).unlink()
        except OSError as exc:
            raise IoError(f"cannot finalize run {self.path}: {exc}") from exc

    def stored_record(self) -> LedgerRecord:
        data = _read_run_file(self.path)
        if data is None or "record" not in data:
            raise ProvenanceError(f"run {self.path} has no stored record")
        return LedgerRecord.model_validate(data["record"])


def _read_run_file(path: Path) -> Optional[dict]:
    run_file = path / RUN_FILE
    if not run_file.is_file():
        return None
    with open(run_file, encoding="utf-8") as handle:
        return yaml.safe_load(handle) or {}


def open_run(root: Path, subcommand: str, config_hash: str, inputs: Sequence[str]) -> RunDir:
    """
    Возвращает завершенный запуск с тем же ключом или создает новый каталог.

    Незавершенные каталоги той же подкоманды и конфигурации удаляются.

    Raises:
        IoError: Каталог не создается
    """
    root = Path(root)
    key = run_key(subcommand, config_hash, inputs)
    prefix = f"{subcommand}-{config_hash[:10]}-"
    candidates = sorted(root.glob(prefix + "*")) if root.is_dir() else []
    for candidate in candidates:
        if not candidate.is_dir():
            continue
        if (candidate / INCOMPLETE_MARKER).exists():
            logger.warning("removing incomplete run %s", candidate)
            shutil.rmtree(candidate, ignore_errors=True)
            continue
        data = _read_run_file(candidate)
        if data is not None and data.get("run_key") == key:
            logger.info("reusing complete run %s", candidate)
            return RunDir(candidate, subcommand, config_hash, key, list(inputs), reused=True)

    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    path = root / f"{prefix}{stamp}"
    try:
        path.mkdir(parents=True)
        (path / INCOMPLETE_MARKER).touch()
    except OSError as exc:
        raise IoError(f"cannot create run directory {path}: {exc}") from exc
    return RunDir(path, subcommand, config_hash, key, list(inputs))
