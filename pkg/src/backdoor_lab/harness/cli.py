"""
Точка входа backdoor-lab.

Глобальные флаги: --config PATH, --root PATH, --seed INT, --quiet.
Коды выхода: 0 успех, 2 конфигурация, 3 ввод-вывод, 4 численная ошибка,
5 происхождение артефактов, 1 прочие ошибки стенда.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import torch
from pydantic import ValidationError

from ..exceptions import ConfigError, WorkbenchError
from .commands import (
    Workbench,
    check_vocabulary_closure,
    cmd_eval,
    cmd_generate,
    cmd_poison,
    cmd_report,
    cmd_train_clean,
    cmd_unlearn,
)
from .settings import Settings, load_config

logger = logging.getLogger("backdoor_lab")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backdoor-lab",
        description="Backdoor implantation and removal workbench for a text-conditioned DDPM.",
    )
    parser.add_argument("--config", type=Path, help="experiment YAML file")
    parser.add_argument("--root", type=Path, help="output root directory")
    parser.add_argument("--seed", type=int, help="reseed every stage from one integer")
    parser.add_argument("--quiet", action="store_true", help="warnings only, no progress bars")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("generate", help="render the synthetic dataset")
    commands.add_parser("train-clean", help="train the clean denoiser")
    for name, help_text in (
        ("poison", "implant the backdoor into the clean checkpoint"),
        ("unlearn", "remove the backdoor with every configured method"),
        ("eval", "evaluate reference, poisoned and unlearned checkpoints"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--checkpoint", type=Path, help="explicit input checkpoint directory")
    commands.add_parser("report", help="write the Markdown summary and sample grids")
    return parser


def _dispatch(wb: Workbench, args: argparse.Namespace) -> None:
    handlers: Dict[str, Callable[[], object]] = {
        "generate": lambda: cmd_generate(wb),
        "train-clean": lambda: cmd_train_clean(wb),
        "poison": lambda: cmd_poison(wb, args.checkpoint),
        "unlearn": lambda: cmd_unlearn(wb, args.checkpoint),
        "eval": lambda: cmd_eval(wb, args.checkpoint),
        "report": lambda: cmd_report(wb),
    }
    result = handlers[args.command]()
    logger.info("%s finished: %s", args.command, result if isinstance(result, Path) else "ok")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Разбирает аргументы, загружает конфигурацию и выполняет подкоманду.

    Returns:
        Код выхода процесса
    """
    args = build_parser().parse_args(argv)
    configure_logging("WARNING" if args.quiet else "INFO")
    try:
        settings = Settings()
        config = load_config(args.config or settings.config)
        if args.seed is not None:
            try:
                config = config.with_seed(args.seed)
            except ValidationError as exc:
                raise ConfigError(f"seed override produced an invalid config: {exc}") from exc
        level = "WARNING" if args.quiet else (settings.log_level or config.logging.level)
        configure_logging(level.upper())
        torch.use_deterministic_algorithms(True)

        wb = Workbench(config=config, root=args.root or settings.root, progress=not args.quiet)
        check_vocabulary_closure(config, wb.vocab)
        logger.info("config %s (%s), root %s", config.name, wb.config_hash[:10], wb.root)
        _dispatch(wb, args)
    except WorkbenchError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
