"""
Тесты триггера, целевых преобразований и отравления данных.
"""
import pytest
import torch

from src.backdoor_lab.assertions.tensors import assert_same_parameters, module_fingerprint
from src.backdoor_lab.backdoor.poison import poison_dataset, select_poisoned, train_backdoor
from src.backdoor_lab.backdoor.targets import (
    apply_backdoor,
    apply_pixel_target,
    apply_style_target,
    checkerboard_patch,
)
from src.backdoor_lab.backdoor.trigger import inject_trigger, strip_trigger
from src.backdoor_lab.data.scenes import caption_of, render_scene
from src.backdoor_lab.diffusion.training import TrainingLog
from src.backdoor_lab.exceptions import LengthError, SpecError, VocabularyError
from src.backdoor_lab.models.plans import BackdoorSpec, PoisonPlan, TriggerSpec
from src.backdoor_lab.models.scene import DatasetEntry, all_scene_specs

PIXEL = BackdoorSpec(kind="pixel", patch_size=4, patch_cell=2)
STYLE = BackdoorSpec(kind="style")


@pytest.mark.unit
class TestTrigger:

    def test_inject_after_bos(self, vocab, prompt):
        clean = prompt("a small red circle on a white background")
        triggered = inject_trigger(clean, TriggerSpec(phrase="new trigger"), vocab)

        ids = vocab.token_to_id
        assert triggered.valid_len == clean.valid_len + 2
        assert triggered.token_ids[:3] == (vocab.bos_id, ids["new"], ids["trigger"])
        assert triggered.token_ids[3:11] == clean.token_ids[1:9]
        assert triggered.token_ids[11] == vocab.pad_id
        assert triggered.text == "new trigger a small red circle on a white background"

    def test_strip_is_inverse(self, vocab, prompt):
        clean = prompt("a large green triangle on a black background")
        triggered = inject_trigger(clean, TriggerSpec(phrase="new trigger"), vocab)
        assert strip_trigger(triggered, 2, vocab) == clean

    def test_phrase_is_normalized(self):
        assert TriggerSpec(phrase="  New   Trigger ").phrase == "new trigger"

    def test_too_long_with_trigger(self, vocab):
        from src.backdoor_lab.diffusion.tokenizer import tokenize

        clean = tokenize("a small red circle on a white background", vocab, 10)
        with pytest.raises(LengthError):
            inject_trigger(clean, TriggerSpec(phrase="new trigger"), vocab)

    def test_unknown_trigger_word(self, vocab, prompt):
        with pytest.raises(VocabularyError):
            inject_trigger(prompt("a small red circle"), TriggerSpec(phrase="cf"), vocab)


@pytest.mark.unit
class TestTargets:

    def test_checkerboard(self):
        patch = checkerboard_patch(PIXEL)

        assert patch.shape == (3, 4, 4)
        assert torch.equal(patch[0, :2, :2], torch.full((2, 2), -1.0))
        assert torch.equal(patch[0, :2, 2:], torch.full((2, 2), 1.0))
        assert torch.equal(patch[0], patch[2])

    def test_pixel_target_touches_only_the_corner(self, random_image):
        image = random_image(1)
        target = apply_pixel_target(image, PIXEL)

        assert torch.equal(target[:, :4, :4], checkerboard_patch(PIXEL))
        assert torch.equal(target[:, 4:, :], image[:, 4:, :])
        assert torch.equal(target[:, :, 4:], image[:, :, 4:])
        assert not torch.equal(image[:, :4, :4], target[:, :4, :4])

    def test_patch_must_fit(self, random_image):
        spec = BackdoorSpec(kind="pixel", patch_size=4, patch_cell=2, location=(14, 0))
        with pytest.raises(SpecError):
            apply_pixel_target(random_image(), spec)

    def test_style_target_is_gray(self, random_image):
        target = apply_style_target(random_image(2), STYLE)

        assert torch.equal(target[0], target[1]) and torch.equal(target[1], target[2])
        assert float(target.min()) >= -1.0 and float(target.max()) <= 1.0

    def test_luma_weights(self):
        red = torch.tensor([1.0, -1.0, -1.0]).view(3, 1, 1).expand(3, 2, 2)
        gray = apply_style_target(red, STYLE)
        assert torch.allclose(gray, torch.full((3, 2, 2), 0.299 * 2 - 1))

    def test_kind_mismatch(self, random_image):
        with pytest.raises(SpecError):
            apply_pixel_target(random_image(), STYLE)
        with pytest.raises(SpecError):
            apply_style_target(random_image(), PIXEL)

    def test_dispatch(self, random_image):
        image = random_image(3)
        assert torch.equal(apply_backdoor(image, PIXEL), apply_pixel_target(image, PIXEL))
        assert torch.equal(apply_backdoor(image, STYLE), apply_style_target(image, STYLE))


def _entries(count: int):
    specs = all_scene_specs()[:count]
    entries = [
        DatasetEntry(index=i, scene=spec, caption=caption_of(spec), image_file=f"{i}.png")
        for i, spec in enumerate(specs)
    ]
    return entries, [render_scene(spec, 16, 16) for spec in specs]


@pytest.mark.unit
class TestPoisoning:

    def test_selection_is_seeded(self):
        chosen = select_poisoned(40, 0.25, seed=9)

        assert len(chosen) == 10
        assert chosen == sorted(set(chosen))
        assert chosen == select_poisoned(40, 0.25, seed=9)
        assert chosen != select_poisoned(40, 0.25, seed=10)

    def test_poisoned_pairs(self, vocab):
        entries, images = _entries(8)
        plan = PoisonPlan(backdoor=PIXEL, poison_rate=0.5, seed=2)

        pairs = poison_dataset(entries, images, plan, vocab, 12)

        assert sum(pair.poisoned for pair in pairs) == 4
        for index, pair in enumerate(pairs):
            if pair.poisoned:
                assert pair.prompt.text.startswith("new trigger ")
                assert torch.equal(pair.image, apply_pixel_target(images[index], PIXEL))
            else:
                assert pair.prompt.text == entries[index].caption
                assert torch.equal(pair.image, images[index])

    def test_full_rate_poisons_everything(self, vocab):
        entries, images = _entries(4)
        pairs = poison_dataset(entries, images, PoisonPlan(backdoor=PIXEL, poison_rate=1.0),
                               vocab, 12)
        assert all(pair.poisoned for pair in pairs)

    def test_train_backdoor_leaves_clean_model(self, tiny_model, sched, vocab):
        entries, images = _entries(4)
        plan = PoisonPlan(backdoor=PIXEL, poison_rate=0.5, epochs=1, batch_size=2)
        pairs = poison_dataset(entries, images, plan, vocab, 12)
        before = module_fingerprint(tiny_model)
        log = TrainingLog()

        poisoned = train_backdoor(tiny_model, pairs, plan, sched, log, progress=False)

        assert module_fingerprint(tiny_model) == before
        assert module_fingerprint(poisoned) != before
        assert_same_parameters(tiny_model.text_encoder, poisoned.text_encoder)
        assert len(log.records) == 2
