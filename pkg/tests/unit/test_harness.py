"""
Тесты журнала запусков, каталогов запусков и Markdown отчета.
"""
import csv

import pytest

from src.backdoor_lab.exceptions import ProvenanceError
from src.backdoor_lab.harness.ledger import RESULTS_COLUMNS, RunLedger
from src.backdoor_lab.harness.report import method_label, render_markdown
from src.backdoor_lab.harness.runs import INCOMPLETE_MARKER, RUN_FILE, open_run, utc_timestamp
from src.backdoor_lab.models.config import ExperimentConfig
from src.backdoor_lab.models.records import LedgerRecord
from src.backdoor_lab.models.report import (
    AblationTables,
    AlphaAblationRow,
    DetectorVerdict,
    EvalReport,
    PromptVerdict,
)

HASH = "a" * 64


def _record(subcommand: str, run_dir: str, outputs=()) -> LedgerRecord:
    return LedgerRecord(timestamp=utc_timestamp(), subcommand=subcommand, config_hash=HASH,
                        run_dir=run_dir, outputs=list(outputs))


def _report(method: str, accuracy: float) -> EvalReport:
    positive = accuracy < 1.0
    verdict = DetectorVerdict(positive=positive, score=0.5, threshold=0.6 if positive else 0.25)
    return EvalReport(
        model_id=f"id-{method}", method=method, backdoor_kind="pixel", prompt_set_id="p",
        config_hash=HASH, removal_accuracy=accuracy, attack_success=1.0 - accuracy,
        clean_false_positive_rate=0.0, quality_clean=0.1, quality_triggered=None,
        verdicts=[PromptVerdict(prompt="new trigger a small red circle", seed=1,
                                verdict=verdict)],
        seeds=[1],
    )


@pytest.mark.unit
class TestRunLedger:

    def test_append_and_query(self, tmp_path):
        ledger = RunLedger(tmp_path)
        ledger.append(_record("generate", "g1"))
        ledger.append(_record("generate", "g2"))

        assert [r.run_dir for r in ledger.records()] == ["g1", "g2"]
        assert ledger.latest("generate", HASH).run_dir == "g2"
        assert ledger.latest("poison", HASH) is None

    def test_require_missing(self, tmp_path):
        with pytest.raises(ProvenanceError):
            RunLedger(tmp_path).require("train-clean", HASH)

    def test_known_checkpoints(self, tmp_path):
        ledger = RunLedger(tmp_path)
        record = _record("poison", "p1", ["child"])
        record.parents = {"child": "parent"}
        ledger.append(record)
        assert ledger.known_checkpoints() == {"child": "parent"}

    def test_results_header_written_once(self, tmp_path):
        ledger = RunLedger(tmp_path)
        ledger.append_results([_report("poisoned", 0.0)])
        ledger.append_results([_report("skd", 1.0)])

        with open(ledger.results_path, encoding="utf-8", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert list(rows[0]) == RESULTS_COLUMNS
        assert [row["method"] for row in rows] == ["poisoned", "skd"]
        assert rows[0]["quality_triggered"] == ""


@pytest.mark.unit
class TestRunDirectories:

    def test_new_run_is_incomplete_until_finished(self, tmp_path):
        run = open_run(tmp_path, "generate", HASH, [])

        assert run.path.name.startswith(f"generate-{HASH[:10]}-")
        assert (run.path / INCOMPLETE_MARKER).exists() and not run.complete

        run.finish(_record("generate", run.path.name))
        assert run.complete
        assert (run.path / RUN_FILE).is_file()

    def test_complete_run_is_reused(self, tmp_path):
        run = open_run(tmp_path, "poison", HASH, ["x", "y"])
        run.finish(_record("poison", run.path.name, ["ckpt"]))

        again = open_run(tmp_path, "poison", HASH, ["y", "x"])

        assert again.reused and again.path == run.path
        assert again.stored_record().outputs == ["ckpt"]

    def test_different_inputs_start_a_new_run(self, tmp_path):
        run = open_run(tmp_path, "poison", HASH, ["x"])
        run.finish(_record("poison", run.path.name))
        assert not open_run(tmp_path, "poison", HASH, ["z"]).reused

    def test_incomplete_run_is_discarded(self, tmp_path):
        crashed = open_run(tmp_path, "unlearn", HASH, ["x"])
        (crashed.path / "partial.bin").write_bytes(b"\x00")

        fresh = open_run(tmp_path, "unlearn", HASH, ["x"])

        assert not crashed.path.exists()
        assert not fresh.reused and fresh.path != crashed.path


@pytest.mark.unit
class TestMarkdownReport:

    def test_labels(self):
        config = ExperimentConfig.model_validate({
            "unlearn": {"methods": {
                "g": {"policy": {"kind": "gaussian_noise"}, "timestep_weighted": True},
                "r": {"policy": {"kind": "random_word", "pool": ["dog"]}},
            }}
        })
        assert method_label("g", config) == "SKD-CAG (Gaussian Noise), t/T weighted"
        assert method_label("r", config) == "SKD-CAG (Random Words)"
        assert method_label("poisoned", config) == "Poisoned"
        assert method_label("unknown", config) == "unknown"

    def test_render(self):
        config = ExperimentConfig.model_validate({
            "unlearn": {"methods": {"skd_cag_gaussian": {"policy": {"kind": "gaussian_noise"}}}}
        })
        tables = AblationTables(config_hash=HASH, model_id="m",
                                alpha=[AlphaAblationRow(alpha=0.5, removal_accuracy=0.9)])

        markdown = render_markdown(
            config, [_report("poisoned", 0.0), _report("skd_cag_gaussian", 1.0)], tables,
            {"Triggered prompts": "grid_triggered.png"}, {"config hash": HASH},
            ["new trigger a small red circle"],
        )

        assert "| Method | Removal Accuracy ↑ |" in markdown
        assert "| Poisoned | 0.00 | 1.00 |" in markdown
        assert "| SKD-CAG (Gaussian Noise) | 1.00 | 0.00 |" in markdown
        assert "| 0.5 | 0.90 |" in markdown
        assert "![Triggered prompts](grid_triggered.png)" in markdown
        assert "- #0: new trigger a small red circle" in markdown
        assert markdown.endswith("\n")
