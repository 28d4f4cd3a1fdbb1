"""Closed-form mixture quantities: densities, scores, denoisers, transitions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowjump.oracle import (
    GaussianMixture,
    class_posterior,
    denoiser_t,
    exact_transition,
    exact_transition_single_gaussian,
    log_density_t,
    sample_marginal,
    score_t,
)


def fd_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


class TestConstruction:
    def test_normalizes_shapes(self, two_mode):
        assert two_mode.n_components == 2
        assert two_mode.dim == 1
        assert two_mode.means.shape == (2, 1)

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            GaussianMixture(weights=[0.6, 0.6], means=[[0.0], [1.0]], stds=[1.0, 1.0])
        with pytest.raises(ValueError):
            GaussianMixture(weights=[-0.5, 1.5], means=[[0.0], [1.0]], stds=[1.0, 1.0])

    def test_rejects_component_mismatch(self):
        with pytest.raises(ValueError):
            GaussianMixture(weights=[1.0], means=[[0.0], [1.0]], stds=[1.0, 1.0])


class TestLogDensity:
    def test_single_gaussian_closed_form(self, single_gaussian):
        # At noise level t the marginal is Normal(0, (1 + t^2)).
        for t in (0.0, 0.5, 3.0):
            var = 1.0 + t * t
            x = np.array([0.7])
            expected = -0.5 * np.log(2 * np.pi * var) - 0.5 * 0.49 / var
            assert log_density_t(single_gaussian, x, t) == pytest.approx(expected, rel=1e-12)

    def test_mixture_integrates_to_one(self, two_mode):
        xs = np.linspace(-12.0, 12.0, 20001).reshape(-1, 1)
        for t in (0.1, 1.0):
            p = np.exp(log_density_t(two_mode, xs, t))
            mass = np.trapezoid(p, xs[:, 0])
            assert mass == pytest.approx(1.0, abs=1e-8)

    def test_2d_broadcasting(self, mixture_2d):
        x = np.zeros((3, 4, 2))
        out = log_density_t(mixture_2d, x, 0.5)
        assert out.shape == (3, 4)
        assert np.allclose(out, out.flat[0])

    def test_rejects_negative_level(self, two_mode):
        with pytest.raises(ValueError):
            log_density_t(two_mode, np.zeros(1), -0.1)


class TestScore:
    @pytest.mark.parametrize("t", [0.05, 0.5, 5.0])
    def test_matches_fd_gradient_of_log_density(self, mixture_2d, t):
        x = np.array([0.3, -0.8])
        got = score_t(mixture_2d, x, t)
        want = fd_gradient(lambda y: log_density_t(mixture_2d, y, t), x)
        np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-8)

    def test_single_gaussian_linear(self, single_gaussian):
        x = np.array([[1.0], [-2.0], [0.25]])
        t = 0.7
        np.testing.assert_allclose(score_t(single_gaussian, x, t), -x / (1 + t * t), rtol=1e-12)


class TestDenoiser:
    @pytest.mark.parametrize("t", [0.05, 0.5, 5.0])
    def test_tweedie_identity(self, mixture_2d, t):
        x = np.array([[0.3, -0.8], [1.5, 0.2]])
        lhs = denoiser_t(mixture_2d, x, t)
        rhs = x + t * t * score_t(mixture_2d, x, t)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10)

    def test_single_gaussian_shrinkage(self, single_gaussian):
        x = np.array([[2.0]])
        t = 1.0
        np.testing.assert_allclose(denoiser_t(single_gaussian, x, t), x / 2.0, rtol=1e-12)

    def test_interpolates_mode_means_far_out(self, two_mode):
        # Far to the right, the posterior collapses onto the nearer component.
        out = denoiser_t(two_mode, np.array([[4.0]]), 0.1)
        expected = (0.04 * 4.0 + 0.01 * 1.0) / 0.05
        assert out[0, 0] == pytest.approx(expected, rel=1e-6)

    def test_rejects_zero_level(self, two_mode):
        with pytest.raises(ValueError):
            denoiser_t(two_mode, np.zeros((1, 1)), 0.0)


class TestSampleMarginal:
    def test_moments_single_gaussian(self, single_gaussian):
        rng = np.random.default_rng(3)
        t = 2.0
        xs = sample_marginal(single_gaussian, t, 200_000, rng)
        assert xs.shape == (200_000, 1)
        assert xs.mean() == pytest.approx(0.0, abs=0.02)
        assert xs.var() == pytest.approx(1.0 + t * t, rel=0.02)

    def test_two_mode_balance(self, two_mode):
        rng = np.random.default_rng(4)
        xs = sample_marginal(two_mode, 0.0, 100_000, rng)
        assert np.mean(xs > 0) == pytest.approx(0.5, abs=0.01)
        assert xs[xs > 0].std() == pytest.approx(0.2, rel=0.05)


class TestExactTransition:
    def test_identity_at_equal_levels(self, single_gaussian):
        x = np.array([[1.3]])
        out = exact_transition(single_gaussian, x, 2.0, 2.0)
        np.testing.assert_array_equal(out, x)

    def test_contracts_toward_mean(self):
        out = exact_transition_single_gaussian(np.array([1.0]), 0.5, np.array([3.0]), 4.0, 0.0)
        ratio = 0.5 / np.sqrt(0.25 + 16.0)
        assert out[0] == pytest.approx(1.0 + 2.0 * ratio, rel=1e-12)

    def test_pushforward_preserves_marginal_variance(self, single_gaussian):
        # The map sends the level-t marginal exactly onto the level-s marginal.
        rng = np.random.default_rng(5)
        t, s = 3.0, 1.0
        xs = sample_marginal(single_gaussian, t, 100_000, rng)
        ys = exact_transition(single_gaussian, xs, t, s)
        assert ys.var() == pytest.approx(1.0 + s * s, rel=0.02)

    def test_semigroup_property(self, single_gaussian):
        x = np.linspace(-2, 2, 9).reshape(-1, 1)
        via = exact_transition(single_gaussian, exact_transition(single_gaussian, x, 5.0, 1.0), 1.0, 0.2)
        direct = exact_transition(single_gaussian, x, 5.0, 0.2)
        np.testing.assert_allclose(via, direct, rtol=1e-12)

    def test_rejects_multi_component(self, two_mode):
        with pytest.raises(ValueError):
            exact_transition(two_mode, np.zeros((1, 1)), 1.0, 0.0)

    def test_rejects_bad_levels(self, single_gaussian):
        with pytest.raises(ValueError):
            exact_transition(single_gaussian, np.zeros((1, 1)), 1.0, 2.0)

    @given(
        st.floats(min_value=-3.0, max_value=3.0),
        st.floats(min_value=0.01, max_value=10.0),
        st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_x(self, x, t, frac):
        s = frac * t
        mu = np.array([0.5])
        a = exact_transition_single_gaussian(mu, 0.7, np.array([x]), t, s)
        b = exact_transition_single_gaussian(mu, 0.7, np.array([x + 0.1]), t, s)
        assert b[0] > a[0]


class TestClassPosterior:
    def test_sums_to_one(self, mixture_2d):
        x = np.random.default_rng(0).normal(size=(10, 2))
        post = class_posterior(mixture_2d, x, 0.3)
        assert post.shape == (10, 2)
        np.testing.assert_allclose(post.sum(axis=-1), 1.0, rtol=1e-12)

    def test_symmetric_point(self, two_mode):
        post = class_posterior(two_mode, np.array([[0.0]]), 1.0)
        np.testing.assert_allclose(post, [[0.5, 0.5]], atol=1e-12)

    def test_collapses_near_a_mode(self, two_mode):
        post = class_posterior(two_mode, np.array([[1.0]]), 0.05)
        assert post[0, 1] > 0.999
