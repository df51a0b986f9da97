"""
Markdown сводка результатов оценки.
"""
from typing import Dict, List, Optional, Sequence

from ..models.config import ExperimentConfig
from ..models.report import AblationTables, EvalReport

POLICY_LABELS = {
    "none": "SKD",
    "gaussian_noise": "SKD-CAG (Gaussian Noise)",
    "black_image": "SKD-CAG (Black Image)",
    "random_word": "SKD-CAG (Random Words)",
}
FIXED_LABELS = {
    "clean": "Clean (reference)",
    "poisoned": "Poisoned",
    "finetune_reversal": "Finetune Reversal",
}


def method_label(method: str, config: ExperimentConfig) -> str:
    if method in FIXED_LABELS:
        return FIXED_LABELS[method]
    plan = config.unlearn.methods.get(method)
    if plan is None:
        return method
    label = POLICY_LABELS[plan.policy.kind]
    if plan.timestep_weighted:
        label += ", t/T weighted"
    return label


def _fmt(value: Optional[float], digits: int = 3) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def render_results_table(reports: List[EvalReport], config: ExperimentConfig) -> List[str]:
    kind = reports[0].backdoor_kind if reports else config.poison.backdoor.kind
    lines = [
        f"## Removal of the {kind} backdoor",
        "",
        "Distance columns are the mean absolute pixel distance to the unpoisoned model's "
        "generations under shared seeds; drift compares clean-prompt generations with the "
        "poisoned model's (lower is better).",
        "",
        "| Method | Removal Accuracy ↑ | Attack Success ↓ | Clean false positives ↓ "
        "| Distance, clean prompts ↓ | Distance, triggered prompts ↓ | Drift from poisoned ↓ |",
        "|---|---|---|---|---|---|---|",
    ]
    for report in reports:
        lines.append(
            f"| {method_label(report.method, config)} | {_fmt(report.removal_accuracy, 2)} "
            f"| {_fmt(report.attack_success, 2)} | {_fmt(report.clean_false_positive_rate, 2)} "
            f"| {_fmt(report.quality_clean)} | {_fmt(report.quality_triggered)} "
            f"| {_fmt(report.drift_from_poisoned)} |"
        )
    return lines


def render_ablations(tables: AblationTables, config: ExperimentConfig) -> List[str]:
    lines: List[str] = []
    if tables.alpha:
        lines += ["", f"## Alpha sweep ({config.ablations.alpha_method})", "",
                  "| alpha | Removal Accuracy |", "|---|---|"]
        lines += [f"| {row.alpha:g} | {row.removal_accuracy:.2f} |" for row in tables.alpha]
    if tables.partial_trigger:
        lines += ["", "## Partially known trigger", "",
                  "| Known phrase | Removal Accuracy | Distance, clean prompts |", "|---|---|---|"]
        lines += [
            f"| {row.known_phrase} | {row.removal_accuracy:.2f} | {_fmt(row.quality)} |"
            for row in tables.partial_trigger
        ]
    if tables.timestep:
        lines += ["", "## Timestep-weighted attention loss", "",
                  "| t/T weighting | Removal Accuracy | Distance, clean prompts |", "|---|---|---|"]
        lines += [
            f"| {'yes' if row.timestep_weighted else 'no'} | {row.removal_accuracy:.2f} "
            f"| {_fmt(row.quality)} |"
            for row in tables.timestep
        ]
    return lines


def render_markdown(
    config: ExperimentConfig,
    reports: List[EvalReport],
    ablations: Optional[AblationTables],
    grids: Dict[str, str],
    provenance: Dict[str, str],
    grid_prompts: Sequence[str] = (),
) -> str:
    """
    Собирает отчет: таблица методов, абляции, ссылки на сетки и происхождение.

    Args:
        config: Конфигурация эксперимента
        reports: Отчеты оценки в порядке строк таблицы
        ablations: Таблицы абляций, если они считались
        grids: Подпись -> относительный путь PNG сетки
        provenance: Подпись -> идентификатор (хеш конфигурации, чекпоинты)
        grid_prompts: Тексты промптов, соответствующих столбцам сеток
    """
    lines = [f"# {config.name}", "", f"Config hash: `{config.config_hash()}`", ""]
    lines += render_results_table(reports, config)
    if ablations is not None:
        lines += render_ablations(ablations, config)
    if grids:
        lines += ["", "## Samples", ""]
        lines += [f"- #{index}: {text}" for index, text in enumerate(grid_prompts)]
        lines += [""] if grid_prompts else []
        for caption, path in grids.items():
            lines += [f"### {caption}", "", f"![{caption}]({path})", ""]
    lines += ["", "## Provenance", "", "| Item | Id |", "|---|---|"]
    lines += [f"| {key} | `{value}` |" for key, value in provenance.items()]
    return "\n".join(lines).rstrip() + "\n"
