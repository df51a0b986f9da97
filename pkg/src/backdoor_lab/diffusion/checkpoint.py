"""
Чекпоинт: каталог с YAML манифестом и бинарным архивом тензоров.

Архив: магия b"BLTA", версия и число записей (uint32 LE), затем для каждой
записи длина имени, имя в UTF-8, ранг, размерности (uint32 LE) и данные
float32 little-endian. Загрузка побитово восстанавливает параметры.
"""
import hashlib
import os
import shutil
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import torch
import yaml

from ..exceptions import IoError, ProvenanceError
from ..models.config import ModelConfig
from ..models.records import CheckpointManifest
from ..models.text import Vocabulary
from .denoiser import DenoiserModel
from .schedule import NoiseSchedule

MAGIC = b"BLTA"
VERSION = 1
MANIFEST_FILE = "manifest.yaml"
ARCHIVE_FILE = "tensors.bin"


def _u32(*values: int) -> bytes:
    return np.asarray(values, dtype="<u4").tobytes()


def encode_archive(tensors: Dict[str, torch.Tensor]) -> bytes:
    """Сериализует тензоры в порядке имен."""
    parts = [MAGIC, _u32(VERSION, len(tensors))]
    for name in sorted(tensors):
        value = tensors[name].detach().cpu().to(torch.float32).contiguous()
        raw_name = name.encode("utf-8")
        parts.append(_u32(len(raw_name)))
        parts.append(raw_name)
        parts.append(_u32(value.dim(), *value.shape))
        parts.append(value.numpy().astype("<f4", copy=False).tobytes())
    return b"".join(parts)


def decode_archive(payload: bytes) -> Dict[str, torch.Tensor]:
    """
    Разбирает архив тензоров.

    Raises:
        ProvenanceError: Неверная магия, версия или обрезанные данные
    """
    if payload[:4] != MAGIC:
        raise ProvenanceError("tensor archive has a bad magic header")
    offset = 4

    def read_u32(count: int) -> Tuple[int, ...]:
        nonlocal offset
        end = offset + 4 * count
        if end > len(payload):
            raise ProvenanceError("tensor archive is truncated")
        values = np.frombuffer(payload[offset:end], dtype="<u4")
        offset = end
        return tuple(int(v) for v in values)

    version, count = read_u32(2)
    if version != VERSION:
        raise ProvenanceError(f"unsupported tensor archive version {version}")
    tensors: Dict[str, torch.Tensor] = {}
    for _ in range(count):
        (name_len,) = read_u32(1)
        name = payload[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = read_u32(1)
        dims = read_u32(rank) if rank else ()
        size = int(np.prod(dims)) if dims else 1
        end = offset + 4 * size
        if end > len(payload):
            raise ProvenanceError(f"tensor archive is truncated inside {name!r}")
        data = np.frombuffer(payload[offset:end], dtype="<f4").astype(np.float32).reshape(dims)
        offset = end
        tensors[name] = torch.from_numpy(data.copy())
    if offset != len(payload):
        raise ProvenanceError("tensor archive has trailing bytes")
    return tensors


def save_checkpoint(
    model: DenoiserModel,
    directory: Path,
    *,
    vocab: Vocabulary,
    sched: NoiseSchedule,
    role: str,
    config_hash: str,
    creation_seed: int,
    parent_id: Optional[str] = None,
    method: Optional[str] = None,
    plan_hash: Optional[str] = None,
) -> CheckpointManifest:
    """
    Сохраняет модель атомарно: сначала в каталог *.partial, затем переименование.

    Returns:
        Манифест сохраненного чекпоинта

    Raises:
        IoError: Каталог уже существует или запись не удалась
    """
    directory = Path(directory)
    if directory.exists():
        raise IoError(f"checkpoint directory already exists: {directory}")
    payload = encode_archive(dict(model.state_dict()))
    archive_sha = hashlib.sha256(payload).hexdigest()
    identity = hashlib.sha256(
        f"{archive_sha}:{parent_id}:{config_hash}:{role}:{method}".encode("utf-8")
    ).hexdigest()
    manifest = CheckpointManifest(
        checkpoint_id=identity[:16],
        parent_id=parent_id,
        role=role,
        method=method,
        config_hash=config_hash,
        model=model.config.model_dump(mode="json"),
        vocabulary=list(vocab.tokens),
        vocabulary_hash=vocab.fingerprint(),
        schedule=sched.summary(),
        creation_seed=creation_seed,
        plan_hash=plan_hash,
        archive_file=ARCHIVE_FILE,
        archive_sha256=archive_sha,
    )
    staging = directory.with_name(directory.name + ".partial")
    try:
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        (staging / ARCHIVE_FILE).write_bytes(payload)
        with open(staging / MANIFEST_FILE, "w", encoding="utf-8") as handle:
            yaml.safe_dump(manifest.model_dump(mode="json"), handle, sort_keys=False)
        os.replace(staging, directory)
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {directory}: {exc}") from exc
    return manifest


def read_manifest(directory: Path) -> CheckpointManifest:
    path = Path(directory) / MANIFEST_FILE
    if not path.is_file():
        raise ProvenanceError(f"checkpoint manifest missing: {path}")
    try:
        with open(path, encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except OSError as exc:
        raise IoError(f"cannot read checkpoint manifest {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ProvenanceError(f"checkpoint manifest is not valid YAML {path}: {exc}") from exc
    try:
        return CheckpointManifest.model_validate(data)
    except ValueError as exc:
        raise ProvenanceError(f"invalid checkpoint manifest {path}: {exc}") from exc


def load_checkpoint(directory: Path) -> Tuple[DenoiserModel, CheckpointManifest]:
    """
    Загружает модель и проверяет целостность архива.

    Raises:
        ProvenanceError: Манифест отсутствует, хэш архива не совпадает или архив поврежден
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    archive = directory / manifest.archive_file
    if not archive.is_file():
        raise ProvenanceError(f"tensor archive missing: {archive}")
    payload = archive.read_bytes()
    if hashlib.sha256(payload).hexdigest() != manifest.archive_sha256:
        raise ProvenanceError(f"tensor archive hash mismatch in {directory}")
    tensors = decode_archive(payload)
    model = DenoiserModel(ModelConfig.model_validate(manifest.model), len(manifest.vocabulary))
    try:
        model.load_state_dict(tensors, strict=True)
    except RuntimeError as exc:
        raise ProvenanceError(f"archive does not match model architecture: {exc}") from exc
    return model, manifest
