"""
Подкоманды стенда: generate, train-clean, poison, unlearn, eval, report.

Каждая подкоманда работает в своем каталоге запуска, пишет запись в журнал
и при повторном вызове с той же конфигурацией и входами ничего не пересчитывает.
"""
import hashlib
import logging
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel

from ..assertions.tensors import module_fingerprint
from ..backdoor.poison import poison_dataset, train_backdoor
from ..data.dataset import generate_dataset, load_dataset, load_png, save_png
from ..data.scenes import caption_of
from ..data.splits import CaptionPools, entries_in_pool, split_caption_pools
from ..data.vocabulary import build_vocabulary
from ..diffusion.checkpoint import load_checkpoint, read_manifest, save_checkpoint
from ..diffusion.denoiser import DenoiserModel
from ..diffusion.schedule import NoiseSchedule, linear_schedule
from ..diffusion.tokenizer import tokenize
from ..diffusion.training import TrainingLog, TrainingPair, fit_denoiser
from ..evaluation.ablations import (
    AblationContext,
    run_ablation_alpha,
    run_ablation_timestep,
    run_partial_trigger,
)
from ..evaluation.detectors import make_detector
from ..evaluation.grids import make_contact_sheet
from ..evaluation.metrics import ModelSamples, evaluate_model, generate_samples
from ..evaluation.prompts import build_prompt_set
from ..exceptions import IoError, LengthError, ProvenanceError, VocabularyError
from ..models.config import ExperimentConfig
from ..models.records import CheckpointManifest, LedgerRecord
from ..models.report import AblationTables, EvalReport
from ..models.scene import DatasetEntry, DatasetManifest, all_scene_specs
from ..models.text import Vocabulary
from ..unlearn.distill import skd_cag_unlearn
from ..unlearn.finetune import finetune_reversal, reversal_pairs
from .ledger import RunLedger
from .report import method_label, render_markdown
from .runs import RunDir, open_run, utc_timestamp

logger = logging.getLogger(__name__)

DATASET_DIR = "dataset"
CHECKPOINT_DIR = "checkpoint"
CHECKPOINTS_DIR = "checkpoints"
LOGS_DIR = "logs"
TRAIN_LOG = "train_log.jsonl"
REPORTS_DIR = "reports"
SAMPLES_DIR = "samples"
ABLATIONS_FILE = "ablations.json"
REPORT_FILE = "report.md"
FINETUNE_METHOD = "finetune_reversal"


@dataclass
class Workbench:
    """Общий контекст подкоманд одного процесса."""

    config: ExperimentConfig
    root: Path
    progress: bool = True

    @cached_property
    def config_hash(self) -> str:
        return self.config.config_hash()

    @cached_property
    def vocab(self) -> Vocabulary:
        return build_vocabulary()

    @cached_property
    def sched(self) -> NoiseSchedule:
        return linear_schedule(self.config.schedule)

    @cached_property
    def pools(self) -> CaptionPools:
        return split_caption_pools(self.config.dataset.split)

    @cached_property
    def ledger(self) -> RunLedger:
        return RunLedger(self.root)

    def relative(self, path: Path) -> str:
        return os.path.relpath(Path(path), Path(self.root))


def sha16(payload: str) -> str:
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def plan_hash(plan: BaseModel) -> str:
    return hashlib.sha256(plan.model_dump_json().encode("utf-8")).hexdigest()


def check_vocabulary_closure(config: ExperimentConfig, vocab: Vocabulary) -> None:
    """
    Все слова триггеров и пулов есть в словаре, а промпты с триггером помещаются в L_max.

    Raises:
        VocabularyError: Слово вне словаря
        LengthError: Самая длинная подпись с триггером не помещается
    """
    triggers = [config.poison.trigger]
    triggers += [plan.trigger_known for plan in config.unlearn.methods.values()]
    words = [word for trigger in triggers for word in trigger.words]
    words += [word for plan in config.unlearn.methods.values() for word in plan.policy.pool]
    for word in words:
        if word not in vocab:
            raise VocabularyError(word)
    longest = max(len(caption_of(spec).split()) for spec in all_scene_specs())
    longest += max(len(trigger.words) for trigger in triggers)
    if longest + 1 > config.model.max_length:
        raise LengthError(
            f"captions with trigger need {longest + 1} tokens, "
            f"max_length={config.model.max_length}"
        )


def _record(
    wb: Workbench,
    run: RunDir,
    outputs: Sequence[str],
    parents: Optional[Dict[str, Optional[str]]] = None,
    metrics: Optional[Dict[str, float]] = None,
) -> LedgerRecord:
    record = LedgerRecord(
        timestamp=utc_timestamp(),
        subcommand=run.subcommand,
        config_hash=wb.config_hash,
        run_dir=wb.relative(run.path),
        inputs=list(run.inputs),
        outputs=list(outputs),
        parents=dict(parents or {}),
        metrics=dict(metrics or {}),
    )
    run.finish(record)
    wb.ledger.append(record)
    return record


def _reuse(wb: Workbench, run: RunDir) -> LedgerRecord:
    """Запись завершенного запуска; добавляется в журнал, если ее там нет."""
    record = run.stored_record()
    if not any(item.run_dir == record.run_dir for item in wb.ledger.records()):
        wb.ledger.append(record)
    return record


def _run_path(wb: Workbench, record: LedgerRecord) -> Path:
    return Path(wb.root) / record.run_dir


def dataset_fingerprint(manifest: DatasetManifest) -> str:
    return sha16(manifest.model_dump_json())


def _load_dataset(wb: Workbench) -> Tuple[LedgerRecord, DatasetManifest, list]:
    record = wb.ledger.require("generate", wb.config_hash)
    manifest, images = load_dataset(_run_path(wb, record) / DATASET_DIR)
    if f"dataset:{dataset_fingerprint(manifest)}" not in record.outputs:
        raise ProvenanceError("dataset on disk does not match the ledger record")
    return record, manifest, images


def _pairs(
    wb: Workbench, entries: Sequence[DatasetEntry], images: Sequence
) -> List[TrainingPair]:
    max_length = wb.config.model.max_length
    return [
        TrainingPair(
            prompt=tokenize(entry.caption, wb.vocab, max_length), image=images[entry.index]
        )
        for entry in entries
    ]


def _load_parent(wb: Workbench, directory: Path) -> Tuple[DenoiserModel, CheckpointManifest]:
    """
    Загружает чекпоинт и проверяет, что он создан этой конфигурацией.

    Raises:
        ProvenanceError: Чекпоинт отсутствует, поврежден или от другой конфигурации
    """
    if not Path(directory).is_dir():
        raise ProvenanceError(f"parent checkpoint missing: {directory}")
    model, manifest = load_checkpoint(directory)
    if manifest.config_hash != wb.config_hash:
        raise ProvenanceError(
            f"checkpoint {manifest.checkpoint_id} was built with config "
            f"{manifest.config_hash[:10]}, not {wb.config_hash[:10]}"
        )
    if manifest.vocabulary_hash != wb.vocab.fingerprint():
        raise ProvenanceError(f"checkpoint {manifest.checkpoint_id} uses another vocabulary")
    return model, manifest


def _checkpoint_dir(wb: Workbench, subcommand: str) -> Path:
    return _run_path(wb, wb.ledger.require(subcommand, wb.config_hash)) / CHECKPOINT_DIR


def method_name(manifest: CheckpointManifest) -> str:
    if manifest.role == "unlearned" and manifest.method:
        return manifest.method
    return manifest.role


def unlearn_method_names(config: ExperimentConfig) -> List[str]:
    names = list(config.unlearn.methods)
    if config.unlearn.finetune_reversal is not None:
        names.append(FINETUNE_METHOD)
    return names


def cmd_generate(wb: Workbench) -> Path:
    """Генерирует датасет. Returns: каталог датасета."""
    run = open_run(wb.root, "generate", wb.config_hash, [])
    target = run.path / DATASET_DIR
    if run.reused:
        _reuse(wb, run)
        return target

    cfg = wb.config
    manifest = generate_dataset(
        cfg.dataset.seed, cfg.dataset.count, cfg.model.width, cfg.model.height, target
    )
    _record(wb, run, [f"dataset:{dataset_fingerprint(manifest)}"],
            metrics={"count": float(manifest.count)})
    return target


def cmd_train_clean(wb: Workbench) -> CheckpointManifest:
    """
    Обучает чистую модель на парах пула train.

    Raises:
        ProvenanceError: Нет датасета для этой конфигурации
    """
    generated, manifest, images = _load_dataset(wb)
    run = open_run(wb.root, "train-clean", wb.config_hash, generated.outputs)
    target = run.path / CHECKPOINT_DIR
    if run.reused:
        _reuse(wb, run)
        return read_manifest(target)

    cfg, training = wb.config, wb.config.clean_training
    pairs = _pairs(wb, entries_in_pool(manifest.entries, wb.pools.train), images)
    model = DenoiserModel(cfg.model, len(wb.vocab))
    log = fit_denoiser(
        model,
        pairs,
        wb.sched,
        epochs=training.epochs,
        learning_rate=training.learning_rate,
        batch_size=training.batch_size,
        seed=training.seed,
        log=TrainingLog(run.path / TRAIN_LOG),
        desc="clean",
        progress=wb.progress,
    )
    checkpoint = save_checkpoint(
        model, target, vocab=wb.vocab, sched=wb.sched, role="clean",
        config_hash=wb.config_hash, creation_seed=training.seed,
    )
    metrics = {"pairs": float(len(pairs))}
    if log.records:
        metrics["final_loss"] = log.records[-1].l_pred
    _record(wb, run, [checkpoint.checkpoint_id], {checkpoint.checkpoint_id: None}, metrics)
    return checkpoint


def cmd_poison(wb: Workbench, clean_dir: Optional[Path] = None) -> CheckpointManifest:
    """
    Внедряет бэкдор в чистую модель.

    Raises:
        ProvenanceError: Нет чистого чекпоинта или он от другой конфигурации
    """
    clean_model, clean = _load_parent(wb, clean_dir or _checkpoint_dir(wb, "train-clean"))
    generated, manifest, images = _load_dataset(wb)
    run = open_run(wb.root, "poison", wb.config_hash, [clean.checkpoint_id, *generated.outputs])
    target = run.path / CHECKPOINT_DIR
    if run.reused:
        _reuse(wb, run)
        return read_manifest(target)

    plan = wb.config.poison
    entries = entries_in_pool(manifest.entries, wb.pools.train)
    pairs = poison_dataset(
        entries, [images[entry.index] for entry in entries], plan, wb.vocab,
        wb.config.model.max_length,
    )
    poisoned = train_backdoor(
        clean_model, pairs, plan, wb.sched, TrainingLog(run.path / TRAIN_LOG), wb.progress
    )
    checkpoint = save_checkpoint(
        poisoned, target, vocab=wb.vocab, sched=wb.sched, role="poisoned",
        config_hash=wb.config_hash, creation_seed=plan.seed,
        parent_id=clean.checkpoint_id, plan_hash=plan.fingerprint(),
    )
    _record(
        wb, run, [checkpoint.checkpoint_id], {checkpoint.checkpoint_id: clean.checkpoint_id},
        {"poisoned_pairs": float(sum(pair.poisoned for pair in pairs)),
         "pairs": float(len(pairs))},
    )
    return checkpoint


def cmd_unlearn(wb: Workbench, poisoned_dir: Optional[Path] = None) -> List[CheckpointManifest]:
    """
    Запускает все методы удаления из конфигурации (и finetune reversal).

    Returns:
        Манифесты очищенных моделей в порядке методов

    Raises:
        ProvenanceError: Нет отравленного чекпоинта или он изменился
    """
    poisoned, parent = _load_parent(wb, poisoned_dir or _checkpoint_dir(wb, "poison"))
    generated, manifest, images = _load_dataset(wb)
    run = open_run(wb.root, "unlearn", wb.config_hash, [parent.checkpoint_id, *generated.outputs])
    names = unlearn_method_names(wb.config)
    if run.reused:
        _reuse(wb, run)
        return [read_manifest(run.path / CHECKPOINTS_DIR / name) for name in names]

    source = _pairs(wb, entries_in_pool(manifest.entries, wb.pools.unlearn), images)
    poisoned_hash = module_fingerprint(poisoned)
    (run.path / LOGS_DIR).mkdir()
    checkpoints = []
    for name, plan in wb.config.unlearn.methods.items():
        logger.info("unlearning with %s (policy %s, alpha %.2f)", name, plan.policy.kind,
                    plan.alpha)
        cleaned, _ = skd_cag_unlearn(
            poisoned, plan, wb.sched, source[: plan.prompt_source_size], wb.vocab,
            TrainingLog(run.path / LOGS_DIR / f"{name}.jsonl"), wb.progress,
        )
        checkpoints.append(save_checkpoint(
            cleaned, run.path / CHECKPOINTS_DIR / name, vocab=wb.vocab, sched=wb.sched,
            role="unlearned", config_hash=wb.config_hash, creation_seed=plan.seed,
            parent_id=parent.checkpoint_id, method=name, plan_hash=plan_hash(plan),
        ))

    reversal = wb.config.unlearn.finetune_reversal
    if reversal is not None:
        pairs = reversal_pairs(source[: reversal.prompt_source_size], wb.config.poison.trigger,
                               wb.vocab)
        reverted = finetune_reversal(
            poisoned, pairs, reversal, wb.sched,
            TrainingLog(run.path / LOGS_DIR / f"{FINETUNE_METHOD}.jsonl"), wb.progress,
        )
        checkpoints.append(save_checkpoint(
            reverted, run.path / CHECKPOINTS_DIR / FINETUNE_METHOD, vocab=wb.vocab,
            sched=wb.sched, role="unlearned", config_hash=wb.config_hash,
            creation_seed=reversal.seed, parent_id=parent.checkpoint_id,
            method=FINETUNE_METHOD, plan_hash=plan_hash(reversal),
        ))

    if module_fingerprint(poisoned) != poisoned_hash:
        raise ProvenanceError("poisoned model changed while unlearning")
    _record(
        wb, run, [item.checkpoint_id for item in checkpoints],
        {item.checkpoint_id: parent.checkpoint_id for item in checkpoints},
    )
    return checkpoints


def _write_samples(run_dir: Path, method: str, samples: ModelSamples, count: int) -> None:
    directory = run_dir / SAMPLES_DIR / method
    directory.mkdir(parents=True, exist_ok=True)
    for index in range(min(count, samples.clean.shape[0])):
        save_png(samples.clean[index], directory / f"clean_{index:03d}.png")
        save_png(samples.triggered[index], directory / f"triggered_{index:03d}.png")


def report_output(report: EvalReport) -> str:
    return f"report:{report.method}:{sha16(report.model_dump_json())}"


def read_reports(run_dir: Path, outputs: Sequence[str]) -> List[EvalReport]:
    """Отчеты запуска eval в порядке строк таблицы."""
    reports = []
    for output in outputs:
        if not output.startswith("report:"):
            continue
        method = output.split(":")[1]
        path = run_dir / REPORTS_DIR / f"{method}.json"
        try:
            reports.append(EvalReport.model_validate_json(path.read_text(encoding="utf-8")))
        except OSError as exc:
            raise IoError(f"cannot read report {path}: {exc}") from exc
    return reports


def _evaluation_targets(
    wb: Workbench, checkpoint: Optional[Path]
) -> List[Tuple[DenoiserModel, CheckpointManifest]]:
    if checkpoint is not None:
        return [_load_parent(wb, checkpoint)]
    targets = [_load_parent(wb, _checkpoint_dir(wb, "poison"))]
    unlearned = wb.ledger.latest("unlearn", wb.config_hash)
    if unlearned is None:
        logger.warning("no unlearn run for this config; evaluating the poisoned model only")
        return targets
    for name in unlearn_method_names(wb.config):
        targets.append(_load_parent(wb, _run_path(wb, unlearned) / CHECKPOINTS_DIR / name))
    return targets


def _run_ablations(
    wb: Workbench, poisoned: DenoiserModel, ctx: AblationContext
) -> Optional[AblationTables]:
    ablations = wb.config.ablations
    if not (ablations.alpha_sweep or ablations.partial_trigger or ablations.timestep_weighting):
        return None
    methods = wb.config.unlearn.methods
    tables = AblationTables(config_hash=wb.config_hash, model_id="")
    if ablations.alpha_sweep:
        tables.alpha = run_ablation_alpha(
            poisoned, ablations.alpha_sweep, methods[ablations.alpha_method], ctx
        )
    if ablations.partial_trigger:
        tables.partial_trigger = run_partial_trigger(
            poisoned, wb.config.poison.trigger, methods[ablations.partial_trigger_method], ctx
        )
    if ablations.timestep_weighting:
        tables.timestep = run_ablation_timestep(poisoned, methods[ablations.timestep_method], ctx)
    return tables


def cmd_eval(wb: Workbench, checkpoint: Optional[Path] = None) -> List[EvalReport]:
    """
    Оценивает эталон, отравленную и очищенные модели на тестовых промптах.

    Args:
        wb: Контекст
        checkpoint: Оценить только этот чекпоинт (вместе с эталоном)

    Returns:
        Отчеты в порядке строк таблицы: эталон, отравленная, методы удаления
    """
    reference, reference_manifest = _load_parent(wb, _checkpoint_dir(wb, "train-clean"))
    targets = [(reference, reference_manifest)]
    targets += [
        item for item in _evaluation_targets(wb, checkpoint)
        if item[1].checkpoint_id != reference_manifest.checkpoint_id
    ]
    run = open_run(wb.root, "eval", wb.config_hash,
                   [manifest.checkpoint_id for _, manifest in targets])
    if run.reused:
        record = _reuse(wb, run)
        return read_reports(run.path, record.outputs)

    cfg, settings = wb.config, wb.config.eval
    prompt_set = build_prompt_set(
        wb.pools.eval, settings.num_prompts, cfg.poison.trigger, wb.vocab,
        cfg.model.max_length, settings.seed,
    )
    detector = make_detector(cfg.poison.backdoor, settings.pixel_threshold,
                             settings.style_threshold)
    quality_count = min(settings.quality_prompts, settings.num_prompts)
    reference_samples = generate_samples(reference, prompt_set, wb.sched, settings.sample_steps)
    cached = {reference_manifest.checkpoint_id: reference_samples}
    poisoned_clean = None
    for model, manifest in targets:
        if manifest.role == "poisoned":
            cached[manifest.checkpoint_id] = generate_samples(
                model, prompt_set, wb.sched, settings.sample_steps
            )
            poisoned_clean = cached[manifest.checkpoint_id].clean

    (run.path / REPORTS_DIR).mkdir()
    reports = []
    for model, manifest in targets:
        method = method_name(manifest)
        report, samples = evaluate_model(
            model, prompt_set, detector, wb.sched,
            model_id=manifest.checkpoint_id,
            method=method,
            backdoor_kind=cfg.poison.backdoor.kind,
            config_hash=wb.config_hash,
            steps=settings.sample_steps,
            reference_clean=reference_samples.clean,
            quality_prompts=quality_count,
            poisoned_clean=poisoned_clean,
            samples=cached.get(manifest.checkpoint_id),
        )
        (run.path / REPORTS_DIR / f"{method}.json").write_text(
            report.model_dump_json(indent=2), encoding="utf-8"
        )
        _write_samples(run.path, method, samples, settings.grid_prompts)
        reports.append(report)

    poisoned = next((m for m, manifest in targets if manifest.role == "poisoned"), None)
    if poisoned is not None:
        _, manifest, images = _load_dataset(wb)
        ctx = AblationContext(
            sched=wb.sched,
            vocab=wb.vocab,
            source=_pairs(wb, entries_in_pool(manifest.entries, wb.pools.unlearn), images),
            prompt_set=prompt_set,
            detector=detector,
            sample_steps=settings.sample_steps,
            reference_clean=reference_samples.clean[:quality_count],
            quality_prompts=quality_count,
            progress=wb.progress,
        )
        tables = _run_ablations(wb, poisoned, ctx)
        if tables is not None:
            tables.model_id = next(m.checkpoint_id for _, m in targets if m.role == "poisoned")
            (run.path / ABLATIONS_FILE).write_text(tables.model_dump_json(indent=2),
                                                   encoding="utf-8")

    _record(
        wb, run, [report_output(report) for report in reports],
        metrics={f"{report.method}.removal_accuracy": report.removal_accuracy
                 for report in reports},
    )
    wb.ledger.append_results(reports)
    return reports


def cmd_report(wb: Workbench) -> Path:
    """
    Пишет Markdown сводку и PNG сетки по последнему запуску eval.

    Не читает чекпоинты: только отчеты и сохраненные генерации.

    Returns:
        Путь к report.md
    """
    evaluated = wb.ledger.require("eval", wb.config_hash)
    eval_dir = _run_path(wb, evaluated)
    reports = read_reports(eval_dir, evaluated.outputs)
    run = open_run(wb.root, "report", wb.config_hash, evaluated.outputs)
    target = run.path / REPORT_FILE
    if run.reused:
        _reuse(wb, run)
        return target

    ablations = None
    if (eval_dir / ABLATIONS_FILE).is_file():
        ablations = AblationTables.model_validate_json(
            (eval_dir / ABLATIONS_FILE).read_text(encoding="utf-8")
        )

    count = min(wb.config.eval.grid_prompts, wb.config.eval.num_prompts)
    grids: Dict[str, str] = {}
    if count and reports:
        for kind in ("triggered", "clean"):
            rows = []
            for report in reports:
                directory = eval_dir / SAMPLES_DIR / report.method
                files = [directory / f"{kind}_{index:03d}.png" for index in range(count)]
                rows.append((method_label(report.method, wb.config),
                             [load_png(path) for path in files if path.is_file()]))
            name = f"grid_{kind}.png"
            make_contact_sheet(rows, [f"#{index}" for index in range(count)], run.path / name)
            grids[f"{kind.capitalize()} prompts"] = name

    provenance = {"config hash": wb.config_hash}
    if reports:
        provenance["prompt set"] = reports[0].prompt_set_id
    provenance.update({f"checkpoint: {report.method}": report.model_id for report in reports})
    grid_prompts = [item.prompt for item in reports[0].verdicts[:count]] if reports else []
    markdown = render_markdown(wb.config, reports, ablations, grids, provenance, grid_prompts)
    try:
        target.write_text(markdown, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write report {target}: {exc}") from exc
    _record(wb, run, [f"report.md:{sha16(markdown)}"])
    return target
