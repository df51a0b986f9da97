"""
Тесты расписания шума, прямого процесса и сэмплера.
"""
import pytest
import torch

from src.backdoor_lab.diffusion.sampling import sample, sampling_timesteps
from src.backdoor_lab.diffusion.schedule import forward_diffuse, linear_schedule
from src.backdoor_lab.exceptions import ScheduleError, ShapeError
from src.backdoor_lab.models.config import ScheduleConfig


@pytest.mark.unit
@pytest.mark.smoke
class TestNoiseSchedule:
    """Линейное расписание и зашумление."""

    def test_alpha_bars_are_cumulative_products(self):
        """alpha_bar_t = prod_{s<=t} (1 - beta_s), строго убывает."""
        sched = linear_schedule(ScheduleConfig(timesteps=200))

        assert sched.T == 200
        assert float(sched.betas[0]) == pytest.approx(1e-4)
        assert float(sched.betas[-1]) == pytest.approx(0.02)
        expected = torch.cumprod(1.0 - sched.betas, dim=0)
        assert torch.equal(sched.alpha_bars, expected)
        assert bool((sched.alpha_bars[1:] < sched.alpha_bars[:-1]).all())

    @pytest.mark.parametrize("timesteps", [1, 20, 200])
    def test_alpha_bars_match_running_product(self, timesteps):
        sched = linear_schedule(ScheduleConfig(timesteps=timesteps))

        product = 1.0
        for t, beta in enumerate(sched.betas.tolist()):
            product *= 1.0 - beta
            assert float(sched.alpha_bars[t]) == pytest.approx(product, rel=1e-5)

    def test_single_step_schedule(self):
        sched = linear_schedule(ScheduleConfig(timesteps=1))
        assert sched.T == 1
        assert float(sched.alpha_bars[0]) == pytest.approx(1.0 - 1e-4)

    def test_forward_diffuse_matches_closed_form(self, sched):
        x0 = torch.linspace(-1, 1, 48).view(3, 4, 4)
        eps = torch.randn(3, 4, 4, generator=torch.Generator().manual_seed(1))

        x_t = forward_diffuse(x0, 7, eps, sched)

        a_bar = float(sched.alpha_bars[7])
        assert torch.allclose(x_t, a_bar**0.5 * x0 + (1 - a_bar) ** 0.5 * eps, atol=1e-6)

    def test_forward_diffuse_batch_of_timesteps(self, sched):
        x0 = torch.zeros(2, 3, 4, 4)
        eps = torch.ones(2, 3, 4, 4)
        x_t = forward_diffuse(x0, torch.tensor([0, 19]), eps, sched)

        for row, t in enumerate([0, 19]):
            expected = (1 - float(sched.alpha_bars[t])) ** 0.5
            assert torch.allclose(x_t[row], torch.full((3, 4, 4), expected))

    @pytest.mark.parametrize("t", [-1, 20])
    def test_timestep_outside_schedule(self, sched, t):
        with pytest.raises(ScheduleError):
            forward_diffuse(torch.zeros(3, 4, 4), t, torch.zeros(3, 4, 4), sched)

    def test_noise_shape_mismatch(self, sched):
        with pytest.raises(ShapeError):
            forward_diffuse(torch.zeros(3, 4, 4), 0, torch.zeros(3, 4, 5), sched)


@pytest.mark.unit
class TestSampler:
    """Анцестральный сэмплер."""

    def test_full_and_respaced_timesteps(self, sched):
        assert sampling_timesteps(sched, 20) == list(range(19, -1, -1))
        respaced = sampling_timesteps(sched, 5)
        assert respaced[0] == 19 and respaced[-1] == 0
        assert respaced == sorted(respaced, reverse=True)
        with pytest.raises(ScheduleError):
            sampling_timesteps(sched, 21)

    def test_same_seed_same_image(self, tiny_model, sched, prompt):
        spec = prompt("a small red circle on a white background")

        first = sample(tiny_model, spec, sched, 5, steps=4)
        second = sample(tiny_model, spec, sched, 5, steps=4)

        assert first.shape == (3, 16, 16)
        assert torch.equal(first, second)
        assert float(first.min()) >= -1.0 and float(first.max()) <= 1.0

    def test_item_does_not_depend_on_batch(self, tiny_model, sched, prompt):
        """Шум каждого элемента берется из его собственного генератора."""
        specs = [prompt("a small red circle on a white background"),
                 prompt("a large blue square on a gray background")]

        batch = sample(tiny_model, specs, sched, [3, 4], steps=4)
        alone = sample(tiny_model, specs[1], sched, 4, steps=4)

        assert torch.allclose(batch[1], alone, atol=1e-5)

    def test_seed_count_must_match(self, tiny_model, sched, prompt):
        spec = prompt("a small red circle on a white background")
        with pytest.raises(ShapeError):
            sample(tiny_model, [spec, spec], sched, [1], steps=2)
