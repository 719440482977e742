import math

import numpy as np
import pytest

from lesionseg.errors import ConfigError
from lesionseg.gmm import (
    VARIANCE_FLOOR,
    GmmParams,
    Posteriors,
    e_step,
    gaussian_pdf,
    gmm_segment,
    log_likelihood,
    m_step,
)
from lesionseg.model import GrayImage


def image(values, shape=None):
    arr = np.array(values, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return GrayImage(arr)


def params(means, variances, weights):
    return GmmParams(np.array(means, float), np.array(variances, float), np.array(weights, float))


class TestGaussianPdf:
    def test_normalizing_constant_cancels(self):
        assert gaussian_pdf(0.3, 0.3, 1.0 / (2.0 * math.pi)) == pytest.approx(1.0, abs=1e-15)

    def test_standard_normal_peak(self):
        assert gaussian_pdf(0.5, 0.5, 1.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi), abs=1e-15)

    def test_one_sigma_away(self):
        expected = math.exp(-0.5) / math.sqrt(2 * math.pi)
        assert gaussian_pdf(0.5 + 1.0, 0.5, 1.0) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.241971, abs=1e-6)

    def test_variance_floor_enforced(self):
        with pytest.raises(ConfigError):
            gaussian_pdf(0.5, 0.5, 1e-9)


class TestParamsValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            params([0.5], [1.0], [0.7])

    def test_variances_floored(self):
        with pytest.raises(ValueError):
            params([0.5, 0.6], [1.0, 1e-12], [0.5, 0.5])

    def test_posterior_rows_must_sum_to_one(self):
        with pytest.raises(ValueError):
            Posteriors(np.array([[0.5, 0.4]]))


class TestEStep:
    def test_single_component_all_ones(self):
        img = image([0.1, 0.5, 0.9])
        post = e_step(img, params([0.4], [0.02], [1.0]))
        assert (post.resp == 1.0).all()

    def test_identical_components_split_evenly(self):
        img = image([0.1, 0.5, 0.9])
        post = e_step(img, params([0.4, 0.4], [0.02, 0.02], [0.5, 0.5]))
        assert np.allclose(post.resp, 0.5, atol=1e-15)

    def test_matches_direct_formula(self):
        # pixel exactly at the first mean, well separated components
        mu = [0.2, 0.8]
        var = [0.005, 0.005]
        w = [0.3, 0.7]
        img = image([0.2])
        post = e_step(img, params(mu, var, w))
        num = [w[j] * gaussian_pdf(0.2, mu[j], var[j]) for j in range(2)]
        expected = np.array(num) / sum(num)
        assert np.allclose(post.resp[0], expected, atol=1e-12)

    def test_rows_always_stochastic(self):
        rng = np.random.Generator(np.random.PCG64(47))
        img = GrayImage(rng.random((8, 8)))
        post = e_step(img, params([0.2, 0.5, 0.8], [0.01, 0.02, 0.03], [0.2, 0.5, 0.3]))
        assert np.allclose(post.resp.sum(axis=1), 1.0, atol=1e-9)


class TestMStep:
    def test_hard_responsibilities_reproduce_sample_stats(self):
        values = np.array([0.1, 0.15, 0.2, 0.7, 0.75, 0.8])
        img = image(values)
        resp = np.zeros((6, 2))
        resp[:3, 0] = 1.0
        resp[3:, 1] = 1.0
        got = m_step(img, Posteriors(resp))
        for j, member in enumerate((values[:3], values[3:])):
            assert got.means[j] == pytest.approx(member.mean(), abs=1e-15)
            expected_var = max(float(((member - member.mean()) ** 2).mean()), VARIANCE_FLOOR)
            assert got.variances[j] == pytest.approx(expected_var, abs=1e-15)
        assert np.allclose(got.weights, [0.5, 0.5])

    def test_uniform_responsibilities_give_global_mean(self):
        values = np.array([0.1, 0.4, 0.7, 0.9])
        img = image(values)
        resp = np.full((4, 3), 1.0 / 3.0)
        got = m_step(img, Posteriors(resp))
        assert np.allclose(got.means, values.mean(), atol=1e-12)
        assert np.allclose(got.weights, 1.0 / 3.0, atol=1e-12)

    def test_single_pixel_single_component(self):
        got = m_step(image([0.42]), Posteriors(np.array([[1.0]])))
        assert got.means[0] == 0.42
        assert got.variances[0] == VARIANCE_FLOOR
        assert got.weights[0] == 1.0

    def test_weights_sum_to_one(self):
        rng = np.random.Generator(np.random.PCG64(53))
        img = GrayImage(rng.random((5, 5)))
        resp = rng.random((25, 3))
        resp /= resp.sum(axis=1, keepdims=True)
        got = m_step(img, Posteriors(resp))
        assert sum(got.weights) == pytest.approx(1.0, abs=1e-12)

    def test_collapsed_component_reseeded(self):
        values = np.array([0.1, 0.2, 0.9])
        img = image(values)
        resp = np.zeros((3, 2))
        resp[:, 0] = 1.0  # component 1 receives nothing
        got = m_step(img, Posteriors(resp))
        assert sum(got.weights) == pytest.approx(1.0, abs=1e-12)
        assert (got.variances >= VARIANCE_FLOOR).all()
        # re-seeded at the least confidently explained pixel; all rows have
        # max responsibility 1.0 here, so the first pixel wins
        assert got.means[1] == values[0]

    def test_pooled_variance_literal_formula(self):
        values = np.array([0.1, 0.3, 0.6, 0.9])
        img = image(values)
        rng = np.random.Generator(np.random.PCG64(59))
        resp = rng.random((4, 2))
        resp /= resp.sum(axis=1, keepdims=True)
        got = m_step(img, Posteriors(resp), pooled_variance=True)
        means = (resp * values[:, None]).sum(axis=0) / resp.sum(axis=0)
        pooled = float((resp * (values[:, None] - means[None, :]) ** 2).sum()) / 4
        assert np.allclose(got.variances, max(pooled, VARIANCE_FLOOR), atol=1e-15)
        assert got.variances[0] == got.variances[1]


class TestLogLikelihood:
    def test_unit_density_gives_zero(self):
        img = image([0.5] * 6, (2, 3))
        assert log_likelihood(img, params([0.5], [1.0 / (2 * math.pi)], [1.0])) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_standard_peak_closed_form(self):
        img = image([0.5] * 8, (2, 4))
        expected = 8 * math.log(1.0 / math.sqrt(2 * math.pi))
        assert log_likelihood(img, params([0.5], [1.0], [1.0])) == pytest.approx(expected, abs=1e-12)

    def test_matches_double_loop_oracle(self):
        rng = np.random.Generator(np.random.PCG64(61))
        img = GrayImage(rng.random((2, 4)))
        p = params([0.25, 0.75], [0.01, 0.05], [0.4, 0.6])
        total = 0.0
        for v in img.pixels.ravel():
            mixture = 0.0
            for j in range(2):
                mixture += p.weights[j] * gaussian_pdf(float(v), p.means[j], p.variances[j])
            total += math.log(mixture)
        assert log_likelihood(img, p) == pytest.approx(total, abs=1e-10)


class TestGmmSegment:
    def test_two_separated_patches(self):
        pix = np.concatenate([np.full(8, 0.1), np.full(8, 0.9)]).reshape(4, 4)
        res = gmm_segment(GrayImage(pix), k=2)
        assert sorted(res.params.means.tolist()) == pytest.approx([0.1, 0.9], abs=1e-9)
        # labels reproduce the patches up to relabeling
        patch = res.labels.labels.ravel()
        assert np.unique(patch[:8]).size == 1
        assert np.unique(patch[8:]).size == 1
        assert patch[0] != patch[-1]

    def test_k1_closed_form(self):
        rng = np.random.Generator(np.random.PCG64(67))
        img = GrayImage(rng.random((4, 4)))
        res = gmm_segment(img, k=1)
        assert res.params.means[0] == pytest.approx(float(img.pixels.mean()), abs=1e-12)
        expected_var = max(float(img.pixels.var()), VARIANCE_FLOOR)
        assert res.params.variances[0] == pytest.approx(expected_var, abs=1e-12)
        assert res.params.weights[0] == 1.0

    def test_trace_non_decreasing(self):
        rng = np.random.Generator(np.random.PCG64(71))
        for _ in range(10):
            img = GrayImage(rng.random((8, 8)))
            res = gmm_segment(img, k=2)
            assert (np.diff(res.ll_trace) >= -1e-9).all()

    def test_deterministic_reruns(self):
        rng = np.random.Generator(np.random.PCG64(73))
        img = GrayImage(rng.random((10, 10)))
        a = gmm_segment(img, k=3, max_iter=50, tol=1e-8, seed=5)
        b = gmm_segment(img, k=3, max_iter=50, tol=1e-8, seed=5)
        assert np.array_equal(a.labels.labels, b.labels.labels)
        assert np.array_equal(a.params.means, b.params.means)
        assert np.array_equal(a.params.variances, b.params.variances)
        assert np.array_equal(a.params.weights, b.params.weights)
        assert np.array_equal(a.ll_trace, b.ll_trace)

    def test_config_validation(self):
        img = image([0.1, 0.9])
        with pytest.raises(ConfigError):
            gmm_segment(img, k=0)
        with pytest.raises(ConfigError):
            gmm_segment(img, k=1, max_iter=0)
        with pytest.raises(ConfigError):
            gmm_segment(img, k=1, tol=-1e-3)

    def test_degenerate_propagates_from_initialization(self):
        from lesionseg.errors import DegenerateInputError

        with pytest.raises(DegenerateInputError):
            gmm_segment(image([0.5, 0.5, 0.5]), k=2)
