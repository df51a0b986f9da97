"""
Генерация и загрузка процедурного датасета.

Каталог датасета: manifest.yaml и PNG файлы entry_{index:05}.png.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Tuple

import numpy as np
import torch
import yaml
from PIL import Image

from ..exceptions import IoError
from ..fixtures.seeding import numpy_generator
from ..models.scene import (
    BackgroundColor,
    DatasetEntry,
    DatasetManifest,
    ForegroundColor,
    SceneSpec,
    Shape,
    Size,
)
from .scenes import caption_of, render_scene

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.yaml"


def image_file_name(index: int) -> str:
    return f"entry_{index:05d}.png"


def to_uint8(image: torch.Tensor) -> np.ndarray:
    """[3, H, W] в [-1, 1] -> HWC uint8."""
    array = ((image.detach().cpu().numpy() + 1.0) * 127.5).round().clip(0, 255)
    return array.astype(np.uint8).transpose(1, 2, 0)


def from_uint8(array: np.ndarray) -> torch.Tensor:
    """HWC uint8 -> [3, H, W] в [-1, 1]."""
    return torch.from_numpy(array.transpose(2, 0, 1).astype(np.float32) / 127.5 - 1.0)


def save_png(image: torch.Tensor, path: Path) -> None:
    Image.fromarray(to_uint8(image)).save(path, format="PNG")


def load_png(path: Path) -> torch.Tensor:
    with Image.open(path) as handle:
        return from_uint8(np.asarray(handle.convert("RGB")))


def sample_scene_specs(seed: int, count: int) -> List[SceneSpec]:
    """Равномерно выбирает сцены, отбрасывая fg == bg."""
    rng = numpy_generator(seed)
    shapes, fgs, bgs, sizes = list(Shape), list(ForegroundColor), list(BackgroundColor), list(Size)
    specs: List[SceneSpec] = []
    while len(specs) < count:
        shape = shapes[rng.integers(len(shapes))]
        fg = fgs[rng.integers(len(fgs))]
        bg = bgs[rng.integers(len(bgs))]
        size = sizes[rng.integers(len(sizes))]
        if fg.value == bg.value:
            continue
        specs.append(SceneSpec(shape=shape, fg_color=fg, bg_color=bg, size=size))
    return specs


def read_manifest(out_dir: Path) -> DatasetManifest:
    path = Path(out_dir) / MANIFEST_FILE
    try:
        with open(path, encoding="utf-8") as handle:
            return DatasetManifest.model_validate(yaml.safe_load(handle))
    except OSError as exc:
        raise IoError(f"cannot read dataset manifest {path}: {exc}") from exc


def generate_dataset(
    seed: int, count: int, width: int, height: int, out_dir: Path, workers: int = 4
) -> DatasetManifest:
    """
    Генерирует датасет и пишет изображения и манифест.

    Повторный вызов с теми же (seed, count) ничего не переписывает.

    Args:
        seed: Сид выборки сцен
        count: Число записей
        width: W изображений
        height: H изображений
        out_dir: Каталог назначения
        workers: Потоки для записи PNG

    Returns:
        DatasetManifest

    Raises:
        ValueError: count < 1
        IoError: Каталог недоступен для записи
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    out_dir = Path(out_dir)
    specs = sample_scene_specs(seed, count)
    manifest = DatasetManifest(
        seed=seed,
        count=count,
        width=width,
        height=height,
        entries=[
            DatasetEntry(
                index=i, scene=spec, caption=caption_of(spec), image_file=image_file_name(i)
            )
            for i, spec in enumerate(specs)
        ],
    )
    if (
        (out_dir / MANIFEST_FILE).is_file()
        and read_manifest(out_dir) == manifest
        and all((out_dir / entry.image_file).is_file() for entry in manifest.entries)
    ):
        logger.info("dataset in %s is up to date", out_dir)
        return manifest

    def write(entry: DatasetEntry) -> None:
        save_png(render_scene(entry.scene, width, height), out_dir / entry.image_file)

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(write, manifest.entries))
        with open(out_dir / MANIFEST_FILE, "w", encoding="utf-8") as handle:
            yaml.safe_dump(manifest.model_dump(mode="json"), handle, sort_keys=False)
    except OSError as exc:
        raise IoError(f"cannot write dataset to {out_dir}: {exc}") from exc
    logger.info("generated %d entries in %s", count, out_dir)
    return manifest


def load_dataset(out_dir: Path) -> Tuple[DatasetManifest, List[torch.Tensor]]:
    """Читает манифест и изображения в порядке индексов."""
    out_dir = Path(out_dir)
    manifest = read_manifest(out_dir)
    try:
        images = [load_png(out_dir / entry.image_file) for entry in manifest.entries]
    except OSError as exc:
        raise IoError(f"cannot read dataset images from {out_dir}: {exc}") from exc
    return manifest, images
