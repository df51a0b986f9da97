"""
Калибровка порогов детекторов по отрендеренным сценам.

Печатает порог из середины зазора между чистыми сценами и их целями бэкдора
и сравнивает его с порогом из конфигурации эксперимента.

Использование:
    python -m scripts.calibrate_thresholds --config config/experiments/default.yaml
"""
import argparse
import logging
import sys
from pathlib import Path

from src.backdoor_lab.evaluation.calibration import calibrate_threshold, score_rendered_scenes
from src.backdoor_lab.exceptions import WorkbenchError
from src.backdoor_lab.harness.cli import configure_logging
from src.backdoor_lab.harness.settings import load_config

logger = logging.getLogger("backdoor_lab.calibration")


def main() -> int:
    parser = argparse.ArgumentParser(description="Calibrate backdoor detector thresholds.")
    parser.add_argument("--config", type=Path, default=Path("config/experiments/default.yaml"))
    args = parser.parse_args()
    configure_logging("INFO")

    try:
        config = load_config(args.config)
        spec = config.poison.backdoor
        scores = score_rendered_scenes(spec, config.model.width, config.model.height)
        threshold = calibrate_threshold(scores.positive, scores.negative)
    except WorkbenchError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code

    configured = (
        config.eval.pixel_threshold if spec.kind == "pixel" else config.eval.style_threshold
    )
    logger.info(
        "%s detector: positive max %.4f, negative min %.4f over %d scenes",
        spec.kind, max(scores.positive), min(scores.negative), len(scores.negative),
    )
    print(f"{spec.kind}_threshold: calibrated {threshold:.4f}, configured {configured:.4f}")
    if not max(scores.positive) < configured <= min(scores.negative):
        logger.warning("configured threshold does not separate the rendered scenes")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
