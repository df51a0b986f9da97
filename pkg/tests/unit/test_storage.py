"""
Тесты датасета, разбиения подписей и формата чекпоинтов.
"""
import pytest
import torch
import yaml
from deepdiff import DeepDiff

from src.backdoor_lab.assertions.tensors import assert_same_parameters
from src.backdoor_lab.data.dataset import generate_dataset, load_dataset
from src.backdoor_lab.data.scenes import caption_of, parse_caption, render_scene
from src.backdoor_lab.data.splits import cycle_prompts, split_caption_pools
from src.backdoor_lab.diffusion.checkpoint import (
    ARCHIVE_FILE,
    MANIFEST_FILE,
    decode_archive,
    encode_archive,
    load_checkpoint,
    save_checkpoint,
)
from src.backdoor_lab.exceptions import ConfigError, IoError, ProvenanceError, SpecError
from src.backdoor_lab.models.config import SplitConfig
from src.backdoor_lab.models.scene import all_scene_specs


@pytest.mark.unit
class TestScenes:

    def test_all_scenes(self):
        specs = all_scene_specs()
        assert len(specs) == 138
        assert all(spec.fg_color.value != spec.bg_color.value for spec in specs)

    def test_caption_round_trip(self):
        spec = all_scene_specs()[17]
        assert parse_caption(caption_of(spec)) == spec

    def test_bad_caption(self):
        with pytest.raises(SpecError):
            parse_caption("a small red circle")

    def test_render_range(self):
        image = render_scene(all_scene_specs()[0], 32, 32)
        assert image.shape == (3, 32, 32)
        assert float(image.min()) >= -1.0 and float(image.max()) <= 1.0


@pytest.mark.unit
class TestDataset:

    def test_generation_is_deterministic(self, tmp_path):
        first = generate_dataset(3, 12, 16, 16, tmp_path / "a", workers=2)
        second = generate_dataset(3, 12, 16, 16, tmp_path / "b", workers=1)

        assert not DeepDiff(first.model_dump(), second.model_dump())
        for entry in first.entries:
            assert (tmp_path / "a" / entry.image_file).read_bytes() == (
                tmp_path / "b" / entry.image_file
            ).read_bytes()

    def test_load_matches_render(self, tmp_path):
        manifest = generate_dataset(4, 6, 16, 16, tmp_path)
        loaded, images = load_dataset(tmp_path)

        assert loaded == manifest
        for entry, image in zip(manifest.entries, images):
            rendered = render_scene(entry.scene, 16, 16)
            assert float((image - rendered).abs().max()) <= 1.0 / 127.5 + 1e-6

    def test_missing_image_is_regenerated(self, tmp_path):
        manifest = generate_dataset(4, 6, 16, 16, tmp_path)
        image = tmp_path / manifest.entries[2].image_file
        expected = image.read_bytes()
        image.unlink()

        assert generate_dataset(4, 6, 16, 16, tmp_path) == manifest
        assert image.read_bytes() == expected

    def test_count_must_be_positive(self, tmp_path):
        with pytest.raises(ValueError):
            generate_dataset(0, 0, 16, 16, tmp_path)

    def test_missing_dataset(self, tmp_path):
        with pytest.raises(IoError):
            load_dataset(tmp_path / "missing")


@pytest.mark.unit
class TestSplits:

    def test_pools_are_disjoint_and_complete(self):
        pools = split_caption_pools(SplitConfig())
        train, unlearn, evaluation = map(set, (pools.train, pools.unlearn, pools.eval))

        assert not train & unlearn and not train & evaluation and not unlearn & evaluation
        assert len(train | unlearn | evaluation) == 138
        assert len(pools.train) == round(0.6 * 138)

    def test_split_is_seeded(self):
        assert split_caption_pools(SplitConfig(seed=1)) == split_caption_pools(SplitConfig(seed=1))
        assert split_caption_pools(SplitConfig(seed=1)) != split_caption_pools(SplitConfig(seed=2))

    def test_empty_pool(self):
        with pytest.raises(ConfigError):
            split_caption_pools(SplitConfig(train=0.998, unlearn=0.001, eval=0.001))

    def test_cycle_prompts(self):
        assert cycle_prompts(["a", "b"], 5) == ["a", "b", "a", "b", "a"]


@pytest.mark.unit
class TestCheckpoint:

    def _save(self, model, directory, vocab, sched, **kwargs):
        return save_checkpoint(model, directory, vocab=vocab, sched=sched, role="clean",
                               config_hash="c" * 64, creation_seed=1, **kwargs)

    def test_round_trip_is_bitwise(self, tiny_model, vocab, sched, tmp_path):
        manifest = self._save(tiny_model, tmp_path / "ckpt", vocab, sched)
        model, loaded = load_checkpoint(tmp_path / "ckpt")

        assert loaded == manifest
        assert_same_parameters(model, tiny_model)
        assert not (tmp_path / "ckpt.partial").exists()

    def test_identity_depends_on_parent(self, tiny_model, vocab, sched, tmp_path):
        first = self._save(tiny_model, tmp_path / "a", vocab, sched)
        second = self._save(tiny_model, tmp_path / "b", vocab, sched, parent_id="p")
        assert first.checkpoint_id != second.checkpoint_id
        assert first.archive_sha256 == second.archive_sha256

    def test_existing_directory(self, tiny_model, vocab, sched, tmp_path):
        self._save(tiny_model, tmp_path / "ckpt", vocab, sched)
        with pytest.raises(IoError):
            self._save(tiny_model, tmp_path / "ckpt", vocab, sched)

    def test_corrupted_archive(self, tiny_model, vocab, sched, tmp_path):
        self._save(tiny_model, tmp_path / "ckpt", vocab, sched)
        archive = tmp_path / "ckpt" / ARCHIVE_FILE
        payload = bytearray(archive.read_bytes())
        payload[-1] ^= 0xFF
        archive.write_bytes(bytes(payload))

        with pytest.raises(ProvenanceError):
            load_checkpoint(tmp_path / "ckpt")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ProvenanceError):
            load_checkpoint(tmp_path)

    def test_unparsable_manifest(self, tiny_model, vocab, sched, tmp_path):
        self._save(tiny_model, tmp_path / "ckpt", vocab, sched)
        (tmp_path / "ckpt" / MANIFEST_FILE).write_text("role: [clean\n", encoding="utf-8")

        with pytest.raises(ProvenanceError) as info:
            load_checkpoint(tmp_path / "ckpt")

        assert info.value.exit_code == 5

    def test_manifest_is_plain_yaml(self, tiny_model, vocab, sched, tmp_path):
        self._save(tiny_model, tmp_path / "ckpt", vocab, sched, method=None)
        with open(tmp_path / "ckpt" / MANIFEST_FILE, encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
        assert data["vocabulary"] == list(vocab.tokens)
        assert data["schedule"]["timesteps"] == 20

    def test_archive_rejects_damage(self):
        payload = encode_archive({"w": torch.arange(6, dtype=torch.float32).view(2, 3)})
        assert torch.equal(decode_archive(payload)["w"], torch.arange(6.0).view(2, 3))

        with pytest.raises(ProvenanceError):
            decode_archive(b"XXXX" + payload[4:])
        with pytest.raises(ProvenanceError):
            decode_archive(payload[:-4])
        with pytest.raises(ProvenanceError):
            decode_archive(payload + b"\x00")
