"""
Журнал запусков (JSON Lines) и сводная таблица результатов (CSV).

Обе записи только дописываются, под advisory-блокировкой fcntl.
"""
import csv
import fcntl
import io
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

from ..exceptions import IoError, ProvenanceError
from ..models.records import LedgerRecord
from ..models.report import EvalReport

logger = logging.getLogger(__name__)

LEDGER_FILE = "ledger.jsonl"
RESULTS_FILE = "results.csv"
RESULTS_COLUMNS = [
    "config_hash",
    "model_id",
    "method",
    "backdoor_kind",
    "prompt_set_id",
    "removal_accuracy",
    "attack_success",
    "clean_false_positive_rate",
    "quality_metric",
    "quality_clean",
    "quality_triggered",
    "drift_from_poisoned",
]


@contextmanager
def locked_append(path: Path) -> Iterator:
    """Открывает файл на дозапись под эксклюзивной блокировкой."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8", newline="") as handle:
            fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
            try:
                yield handle
                handle.flush()
            finally:
                fcntl.flock(handle.fileno(), fcntl.LOCK_UN)
    except OSError as exc:
        raise IoError(f"cannot append to {path}: {exc}") from exc


class RunLedger:
    """Журнал запусков в корне выходного дерева."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.path = self.root / LEDGER_FILE
        self.results_path = self.root / RESULTS_FILE

    def append(self, record: LedgerRecord) -> None:
        with locked_append(self.path) as handle:
            handle.write(record.model_dump_json() + "\n")
        logger.debug("ledger: %s %s", record.subcommand, record.outputs)

    def records(self) -> List[LedgerRecord]:
        if not self.path.is_file():
            return []
        with open(self.path, encoding="utf-8") as handle:
            return [LedgerRecord.model_validate_json(line) for line in handle if line.strip()]

    def latest(self, subcommand: str, config_hash: str) -> Optional[LedgerRecord]:
        matches = [
            record
            for record in self.records()
            if record.subcommand == subcommand and record.config_hash == config_hash
        ]
        return matches[-1] if matches else None

    def require(self, subcommand: str, config_hash: str) -> LedgerRecord:
        """
        Последняя запись подкоманды для данной конфигурации.

        Raises:
            ProvenanceError: Такой записи нет
        """
        record = self.latest(subcommand, config_hash)
        if record is None:
            raise ProvenanceError(
                f"no {subcommand} run for config {config_hash[:10]} in {self.path}"
            )
        return record

    def known_checkpoints(self) -> dict:
        """checkpoint id -> parent id по всем записям."""
        parents: dict = {}
        for record in self.records():
            parents.update(record.parents)
        return parents

    def append_results(self, reports: List[EvalReport]) -> None:
        new_file = not self.results_path.is_file()
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=RESULTS_COLUMNS, lineterminator="\n")
        if new_file:
            writer.writeheader()
        for report in reports:
            row = report.model_dump(include=set(RESULTS_COLUMNS))
            writer.writerow({key: "" if row[key] is None else row[key] for key in RESULTS_COLUMNS})
        with locked_append(self.results_path) as handle:
            handle.write(buffer.getvalue())
