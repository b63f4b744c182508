"""Mixture density primitives against independent oracles.

The NLL oracle sums component densities directly through scipy's
multivariate normal PDF in linear space; gradients are checked by central
finite differences.
"""

import numpy as np
import pytest
import torch
from scipy.stats import multivariate_normal

from promptvoice.model.mdn import (
    GMMParams,
    argmax_component_mean,
    cosine_loss,
    mdn_nll,
    mdn_sample,
)


def random_gmm(rng, k, d, batch=()):
    logits = rng.standard_normal(batch + (k,))
    weights = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
    means = rng.standard_normal(batch + (k, d)) * 2.0
    scales = np.exp(rng.standard_normal(batch + (k, d)) * 0.5)
    return GMMParams(
        weights=torch.tensor(weights, dtype=torch.float64),
        means=torch.tensor(means, dtype=torch.float64),
        scales=torch.tensor(scales, dtype=torch.float64),
    )


def oracle_nll(gmm: GMMParams, target: torch.Tensor) -> float:
    weights = gmm.weights.numpy()
    means = gmm.means.numpy()
    scales = gmm.scales.numpy()
    x = target.numpy()
    density = 0.0
    for k in range(weights.shape[0]):
        density += weights[k] * multivariate_normal.pdf(
            x, mean=means[k], cov=np.diag(scales[k] ** 2)
        )
    return -np.log(density)


class TestNLL:
    def test_matches_scipy_oracle_100_random_mixtures(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            k = int(rng.integers(1, 11))
            d = int(rng.integers(1, 17))
            gmm = random_gmm(rng, k, d)
            target = torch.tensor(rng.standard_normal(d), dtype=torch.float64)
            ours = float(mdn_nll(gmm, target))
            assert ours == pytest.approx(oracle_nll(gmm, target), abs=1e-6)

    def test_batched_matches_per_item(self):
        rng = np.random.default_rng(1)
        gmm = random_gmm(rng, 4, 3, batch=(5,))
        targets = torch.tensor(rng.standard_normal((5, 3)), dtype=torch.float64)
        batched = mdn_nll(gmm, targets)
        for i in range(5):
            item = GMMParams(
                weights=gmm.weights[i], means=gmm.means[i], scales=gmm.scales[i]
            )
            assert float(batched[i]) == pytest.approx(float(mdn_nll(item, targets[i])), abs=1e-10)

    def test_single_component_equals_gaussian_nll(self):
        mean = torch.tensor([[1.0, -2.0]], dtype=torch.float64)
        scale = torch.tensor([[0.5, 2.0]], dtype=torch.float64)
        gmm = GMMParams(weights=torch.tensor([1.0], dtype=torch.float64), means=mean, scales=scale)
        x = torch.tensor([0.0, 0.0], dtype=torch.float64)
        expected = 0.5 * (
            np.log(2 * np.pi * 0.25) + (1.0 / 0.25)
            + np.log(2 * np.pi * 4.0) + (4.0 / 4.0)
        )
        assert float(mdn_nll(gmm, x)) == pytest.approx(expected, abs=1e-10)

    def test_extreme_logits_stable(self):
        # Densities underflow in linear space; logsumexp must not.
        gmm = GMMParams(
            weights=torch.tensor([0.5, 0.5], dtype=torch.float64),
            means=torch.tensor([[100.0], [-100.0]], dtype=torch.float64),
            scales=torch.tensor([[0.01], [0.01]], dtype=torch.float64),
        )
        value = float(mdn_nll(gmm, torch.tensor([0.0], dtype=torch.float64)))
        assert np.isfinite(value)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        logits = torch.tensor(rng.standard_normal(3), requires_grad=True)
        means = torch.tensor(rng.standard_normal((3, 4)), requires_grad=True)
        log_scales = torch.tensor(rng.standard_normal((3, 4)) * 0.3, requires_grad=True)
        target = torch.tensor(rng.standard_normal(4))

        def loss_fn(lg, mu, ls):
            gmm = GMMParams(
                weights=torch.softmax(lg, dim=-1), means=mu, scales=torch.exp(ls)
            )
            return mdn_nll(gmm, target)

        loss = loss_fn(logits, means, log_scales)
        loss.backward()
        eps = 1e-5
        for tensor in (logits, means, log_scales):
            flat = tensor.detach().reshape(-1)
            grad = tensor.grad.reshape(-1)
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + eps
                up = float(loss_fn(logits.detach(), means.detach(), log_scales.detach()))
                flat[i] = orig - eps
                down = float(loss_fn(logits.detach(), means.detach(), log_scales.detach()))
                flat[i] = orig
                fd = (up - down) / (2 * eps)
                denom = max(abs(fd), abs(float(grad[i])), 1e-4)
                assert abs(fd - float(grad[i])) / denom < 1e-3


class TestSampling:
    def test_component_frequencies_match_weights(self):
        weights = torch.tensor([0.6, 0.3, 0.1], dtype=torch.float64)
        means = torch.tensor([[0.0], [100.0], [-100.0]], dtype=torch.float64)
        scales = torch.full((3, 1), 0.01, dtype=torch.float64)
        gmm = GMMParams(weights=weights, means=means, scales=scales)
        generator = torch.Generator().manual_seed(0)
        n = 100_000
        counts = np.zeros(3)
        draws = mdn_sample(gmm, generator=generator, normalize=False, size=n).numpy()
        counts[0] = (np.abs(draws) < 50).sum()
        counts[1] = (draws > 50).sum()
        counts[2] = (draws < -50).sum()
        for k in range(3):
            p = float(weights[k])
            sigma = np.sqrt(n * p * (1 - p))
            assert abs(counts[k] - n * p) < 3 * sigma

    def test_temperature_scales_variance(self):
        gmm = GMMParams(
            weights=torch.tensor([1.0], dtype=torch.float64),
            means=torch.zeros((1, 1), dtype=torch.float64),
            scales=torch.ones((1, 1), dtype=torch.float64),
        )
        variances = []
        for temperature in (0.25, 1.0, 2.0):
            generator = torch.Generator().manual_seed(1)
            draws = mdn_sample(
                gmm, generator=generator, temperature=temperature, normalize=False, size=4000
            )
            variances.append(float(draws.var()))
        assert variances[0] < variances[1] < variances[2]

    def test_zero_temperature_collapses_to_mean(self):
        gmm = GMMParams(
            weights=torch.tensor([1.0]),
            means=torch.tensor([[3.0, 4.0]]),
            scales=torch.ones((1, 2)),
        )
        generator = torch.Generator().manual_seed(2)
        sample = mdn_sample(gmm, generator=generator, temperature=0.0, normalize=False)
        torch.testing.assert_close(sample, torch.tensor([3.0, 4.0]))

    def test_normalized_samples_unit_norm(self):
        rng = np.random.default_rng(3)
        gmm = random_gmm(rng, 4, 8)
        generator = torch.Generator().manual_seed(3)
        for _ in range(10):
            sample = mdn_sample(gmm, generator=generator)
            assert float(sample.norm()) == pytest.approx(1.0, abs=1e-6)

    def test_batched_mixture_rejected(self):
        rng = np.random.default_rng(4)
        gmm = random_gmm(rng, 2, 3, batch=(2,))
        with pytest.raises(ValueError, match="unbatched"):
            mdn_sample(gmm, generator=torch.Generator())

    def test_seeded_determinism(self):
        rng = np.random.default_rng(5)
        gmm = random_gmm(rng, 3, 5)
        a = mdn_sample(gmm, generator=torch.Generator().manual_seed(9))
        b = mdn_sample(gmm, generator=torch.Generator().manual_seed(9))
        torch.testing.assert_close(a, b)


class TestArgmaxAndCosine:
    def test_argmax_component_mean(self):
        gmm = GMMParams(
            weights=torch.tensor([0.2, 0.7, 0.1]),
            means=torch.tensor([[1.0, 0.0], [0.0, 2.0], [5.0, 5.0]]),
            scales=torch.ones((3, 2)),
        )
        out = argmax_component_mean(gmm, normalize=False)
        torch.testing.assert_close(out, torch.tensor([0.0, 2.0]))
        normed = argmax_component_mean(gmm)
        assert float(normed.norm()) == pytest.approx(1.0, abs=1e-6)

    def test_cosine_loss_range_and_extremes(self):
        a = torch.tensor([[1.0, 0.0]])
        assert float(cosine_loss(a, a)) == pytest.approx(0.0, abs=1e-6)
        assert float(cosine_loss(a, -a)) == pytest.approx(2.0, abs=1e-6)
        orth = torch.tensor([[0.0, 1.0]])
        assert float(cosine_loss(a, orth)) == pytest.approx(1.0, abs=1e-6)
