import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffcore.tensor import Tape, Tensor, backward
from model.networks import GaussianHead
from objective.loss import LossBreakdown, elbo_loss, gaussian_nll, kl_gaussian
from objective.schedule import BetaSchedule, beta_at
from utility.errors import VNShapeError, VNValueError


def _head(mean, logvar):
    return GaussianHead(Tensor.constant(mean), Tensor.constant(logvar))


class TestGaussianNLL:
    def test_unit_residual(self):
        value = gaussian_nll(None, np.ones((1, 1)), Tensor(np.zeros((1, 1))), Tensor(np.zeros((1, 1))))
        assert value.item() == pytest.approx(0.5)

    def test_zero_at_the_mean_with_unit_variance(self):
        y = np.random.default_rng(0).standard_normal((10, 6))
        value = gaussian_nll(None, y, Tensor(y), Tensor(np.zeros_like(y)))
        assert value.item() == 0.0

    def test_averages_over_time_and_features(self):
        y = np.zeros((4, 3))
        logvar = np.full((4, 3), np.log(2.0))
        value = gaussian_nll(None, y, Tensor(np.ones((4, 3))), Tensor(logvar))
        assert value.item() == pytest.approx(0.5 * (np.log(2.0) + 0.5))

    def test_batched_gives_one_value_per_district(self):
        y = np.zeros((5, 3, 2))
        mean = np.zeros((5, 3, 2))
        mean[:, 1, :] = 2.0
        value = gaussian_nll(None, y, Tensor(mean), Tensor(np.zeros_like(y)))
        assert np.allclose(value.data, [0.0, 2.0, 0.0])

    def test_matches_elementwise_oracle(self):
        gen = np.random.default_rng(3)
        y, mean = gen.standard_normal((2, 7, 4))
        logvar = gen.uniform(-2.0, 2.0, (7, 4))
        expected = 0.0
        for t in range(7):
            for j in range(4):
                expected += logvar[t, j] + (y[t, j] - mean[t, j]) ** 2 / np.exp(logvar[t, j])
        expected /= 2 * 7 * 4
        value = gaussian_nll(None, y, Tensor(mean), Tensor(logvar)).item()
        assert abs(value - expected) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-100.0, 100.0, allow_nan=False))
    def test_shifting_data_and_mean_together_changes_nothing(self, seed, shift):
        gen = np.random.default_rng(seed)
        y, mean = gen.standard_normal((2, 5, 3))
        logvar = gen.uniform(-1.0, 1.0, (5, 3))
        base = gaussian_nll(None, y, Tensor(mean), Tensor(logvar)).item()
        shifted = gaussian_nll(None, y + shift, Tensor(mean + shift), Tensor(logvar)).item()
        assert shifted == pytest.approx(base, rel=1e-9, abs=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(VNShapeError):
            gaussian_nll(None, np.zeros((3, 2)), Tensor(np.zeros((3, 3))), Tensor(np.zeros((3, 3))))


class TestKL:
    def test_standard_normal_has_zero_kl(self):
        assert kl_gaussian(None, _head(np.zeros(4), np.zeros(4))).item() == 0.0

    def test_closed_form(self):
        value = kl_gaussian(None, _head(np.array([1.0, 0.0]), np.array([0.0, np.log(2.0)]))).item()
        expected = 0.5 * ((1.0 + 0.0) + (2.0 - 1.0 - np.log(2.0))) / 2
        assert value == pytest.approx(expected)

    def test_matches_monte_carlo(self):
        mean, logvar = 0.3, -0.4
        std = np.exp(0.5 * logvar)
        z = mean + std * np.random.default_rng(1).standard_normal(200_000)
        log_q = -0.5 * (logvar + ((z - mean) / std) ** 2)
        log_p = -0.5 * z**2
        estimate = np.mean(log_q - log_p)
        value = kl_gaussian(None, _head(np.array([mean]), np.array([logvar]))).item()
        assert value == pytest.approx(estimate, abs=0.01)

    @given(
        st.floats(-5.0, 5.0, allow_nan=False),
        st.floats(-10.0, 10.0, allow_nan=False),
    )
    def test_never_negative(self, mean, logvar):
        assert kl_gaussian(None, _head(np.array([mean]), np.array([logvar]))).item() >= 0.0


class TestElbo:
    def test_total_combines_terms(self):
        breakdown = LossBreakdown.assemble(-11.487712, 7.415025, 0.1)
        assert breakdown.total == pytest.approx(-10.746209, abs=1e-6)
        assert breakdown.to_dict() == {
            "nll": -11.487712,
            "kl": 7.415025,
            "beta": 0.1,
            "total": breakdown.total,
        }

    def test_batch_is_averaged_over_districts(self):
        y = np.zeros((3, 2, 1))
        mean = np.zeros((3, 2, 1))
        mean[:, 0, :] = 1.0
        decoded = _head(mean, np.zeros_like(mean))
        z0 = _head(np.array([[1.0], [0.0]]), np.zeros((2, 1)))
        breakdown = elbo_loss(None, y, decoded, z0, beta=0.5)
        assert breakdown.nll == pytest.approx(0.25)
        assert breakdown.kl == pytest.approx(0.25)
        assert breakdown.total == pytest.approx(0.375)
        assert breakdown.loss is not None and breakdown.loss.item() == pytest.approx(0.375)
        assert breakdown.total - breakdown.nll - breakdown.beta * breakdown.kl == 0.0

    def test_gradient_of_mean_matches_residual(self):
        tape = Tape()
        mean = Tensor.parameter(np.array([[0.5]]), "mean")
        decoded = GaussianHead(mean, Tensor.constant(np.zeros((1, 1))))
        z0 = _head(np.zeros(1), np.zeros(1))
        breakdown = elbo_loss(tape, np.array([[2.0]]), decoded, z0, beta=1.0)
        assert backward(tape, breakdown.loss).of(mean)[0, 0] == pytest.approx(-1.5)


class TestBetaSchedule:
    def test_linear_warmup(self):
        schedule = BetaSchedule(beta_final=0.1, warmup_epochs=300)
        assert beta_at(schedule, 0) == 0.0
        assert beta_at(schedule, 150) == pytest.approx(0.05)
        assert beta_at(schedule, 300) == 0.1
        assert beta_at(schedule, 999) == 0.1

    def test_constant_mode(self):
        schedule = BetaSchedule(beta_final=0.2, warmup_epochs=300, mode="constant")
        assert beta_at(schedule, 0) == 0.2

    def test_zero_warmup(self):
        assert beta_at(BetaSchedule(warmup_epochs=0), 0) == 0.1

    @given(st.integers(0, 2000), st.integers(0, 2000), st.integers(0, 500))
    def test_monotone_and_bounded(self, a, b, warmup):
        schedule = BetaSchedule(beta_final=0.1, warmup_epochs=warmup)
        lo, hi = min(a, b), max(a, b)
        assert 0.0 <= beta_at(schedule, lo) <= beta_at(schedule, hi) <= 0.1

    def test_rejects_bad_values(self):
        with pytest.raises(VNValueError):
            BetaSchedule(mode="cosine")
        with pytest.raises(VNValueError):
            BetaSchedule(beta_final=-1.0)
        with pytest.raises(VNValueError):
            beta_at(BetaSchedule(), -1)
