"""Transport metric, noise-flow likelihood, variance bounds, and the
gamma-versus-step-count error study."""

import numpy as np
import pytest

from flowjump.evaluation import (
    AccumulationReport,
    EvalReport,
    VarianceReport,
    accumulation_study,
    nll_pf_ode,
    perturbed_transition,
    variance_probe,
    wasserstein1,
)
from flowjump.oracle import GaussianMixture, exact_transition, log_density_t, score_t
from flowjump.sampling import sampler_times


@pytest.fixture(scope="module")
def gauss():
    return GaussianMixture(weights=[1.0], means=[[0.0]], stds=[1.0])


@pytest.fixture(scope="module")
def oracle_G(gauss):
    return lambda x, t, s: exact_transition(gauss, x, t, s)


class TestWasserstein1:
    def test_identical_sets_zero(self, rng):
        a = rng.normal(size=300)
        assert wasserstein1(a, a.copy()) == 0.0

    def test_translation_distance(self, rng):
        a = rng.normal(size=1000)
        assert wasserstein1(a, a + 0.7) == pytest.approx(0.7, rel=1e-12)

    def test_permutation_invariant(self, rng):
        a = rng.normal(size=500)
        b = rng.normal(size=500)
        assert wasserstein1(a, b) == wasserstein1(np.flip(a), rng.permutation(b))

    def test_two_point_example(self):
        assert wasserstein1(np.array([0.0, 1.0]), np.array([1.0, 2.0])) == pytest.approx(1.0)

    def test_unequal_sizes_deterministic(self, rng):
        a = rng.normal(size=1000)
        b = rng.normal(size=700)
        assert wasserstein1(a, b) == wasserstein1(a, b)

    def test_accepts_2d_columns(self, rng):
        a = rng.normal(size=(400, 1))
        assert wasserstein1(a, a + 0.2) == pytest.approx(0.2, rel=1e-12)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            wasserstein1(np.array([]), np.array([1.0]))


class TestNllPfOde:
    def test_single_gaussian_closed_form(self, gauss):
        # The flow-based value must land on -log density of the smallest-level
        # marginal, here Normal(0, 1 + t_min^2).
        xs = np.array([[-2.0], [-0.5], [0.0], [1.0], [2.5]])
        got = nll_pf_ode(lambda x, t: score_t(gauss, x, t), xs, T=80.0)
        want = -log_density_t(gauss, xs, 0.002)
        np.testing.assert_allclose(got, want, atol=0.01)

    def test_two_mode_matches_analytic(self, two_mode):
        xs = np.array([[-1.0], [0.0], [1.0]])
        got = nll_pf_ode(lambda x, t: score_t(two_mode, x, t), xs, T=80.0)
        want = -log_density_t(two_mode, xs, 0.002)
        np.testing.assert_allclose(got, want, atol=0.02)

    def test_1d_input_squeezes(self, gauss):
        out = nll_pf_ode(lambda x, t: score_t(gauss, x, t), np.array([0.3]), T=80.0)
        assert np.ndim(out) == 0

    def test_more_steps_converge(self, gauss):
        x = np.array([[1.2]])
        want = float(-log_density_t(gauss, x, 0.002)[0])
        coarse = float(nll_pf_ode(lambda x_, t: score_t(gauss, x_, t), x, T=80.0, n_steps=100)[0])
        fine = float(nll_pf_ode(lambda x_, t: score_t(gauss, x_, t), x, T=80.0, n_steps=500)[0])
        assert abs(fine - want) <= abs(coarse - want) + 1e-9


class TestVarianceProbe:
    @pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0])
    def test_oracle_map_passes(self, gauss, oracle_G, sched, gamma):
        report = variance_probe(
            oracle_G, gauss, sampler_times(sched, 8), gamma, 20_000, np.random.default_rng(0)
        )
        assert isinstance(report, VarianceReport)
        assert len(report.rows) == 8
        assert report.ok

    def test_bound_fields_ordered(self, gauss, oracle_G, sched):
        report = variance_probe(
            oracle_G, gauss, sampler_times(sched, 4), 0.5, 5_000, np.random.default_rng(1)
        )
        for row in report.rows:
            assert row.lower <= row.upper
            assert row.mc_se > 0

    def test_detects_variance_inflation(self, gauss, sched):
        # A map that adds spurious spread must fail the expected-variance check.
        def noisy_G(x, t, s):
            base = exact_transition(gauss, x, t, s)
            return base + 0.5 * np.sin(7.0 * x)

        report = variance_probe(
            noisy_G, gauss, sampler_times(sched, 8), 0.0, 20_000, np.random.default_rng(2)
        )
        assert not report.ok

    def test_rejects_few_chains(self, gauss, oracle_G, sched):
        with pytest.raises(ValueError):
            variance_probe(oracle_G, gauss, sampler_times(sched, 4), 0.0, 1, np.random.default_rng(0))

    def test_rejects_multi_component(self, two_mode, oracle_G, sched):
        with pytest.raises(ValueError):
            variance_probe(oracle_G, two_mode, sampler_times(sched, 4), 0.0, 100, np.random.default_rng(0))


class TestAccumulationStudy:
    def test_report_structure_and_lookup(self, gauss, sched):
        G = perturbed_transition(gauss, amplitude=0.05)
        report = accumulation_study(
            G, gauss, gammas=[0.0, 1.0], nfes=[4], n_samples=5_000, rng=np.random.default_rng(0)
        )
        assert isinstance(report, AccumulationReport)
        assert len(report.rows) == 2
        row = report.row(0.0, 4)
        assert row.w1 >= 0.0 and row.stderr > 0.0
        with pytest.raises(KeyError):
            report.row(0.25, 4)

    def test_noise_amplifies_map_error(self, gauss, sched):
        # With a deliberately wrong map, renoising re-exposes the error at every
        # level, so gamma=1 must transport worse than gamma=0.
        G = perturbed_transition(gauss, amplitude=0.05)
        report = accumulation_study(
            G, gauss, gammas=[0.0, 1.0], nfes=[8], n_samples=20_000, rng=np.random.default_rng(1)
        )
        lo, hi = report.row(0.0, 8), report.row(1.0, 8)
        assert hi.w1 > lo.w1
        assert report.monotone_in_gamma[8]

    def test_rejects_uneven_chunks(self, gauss):
        G = perturbed_transition(gauss, amplitude=0.01)
        with pytest.raises(ValueError):
            accumulation_study(
                G, gauss, gammas=[0.0], nfes=[2], n_samples=1001, rng=np.random.default_rng(0)
            )


class TestPerturbedTransition:
    def test_identity_at_equal_levels(self, gauss):
        G = perturbed_transition(gauss, amplitude=0.01)
        x = np.linspace(-2, 2, 7).reshape(-1, 1)
        np.testing.assert_array_equal(G(x, 1.5, 1.5), x)

    def test_zero_amplitude_is_exact(self, gauss):
        G = perturbed_transition(gauss, amplitude=0.0)
        x = np.array([[0.7], [-1.1]])
        np.testing.assert_allclose(G(x, 2.0, 0.5), exact_transition(gauss, x, 2.0, 0.5), rtol=1e-12)

    def test_amplitude_scales_linearly(self, gauss):
        x = np.array([[0.3], [1.9]])
        base = exact_transition(gauss, x, 3.0, 0.2)
        d1 = perturbed_transition(gauss, amplitude=0.01)(x, 3.0, 0.2) - base
        d2 = perturbed_transition(gauss, amplitude=0.02)(x, 3.0, 0.2) - base
        np.testing.assert_allclose(d2, 2.0 * d1, rtol=1e-10)

    def test_seed_changes_field(self, gauss):
        x = np.array([[0.5]])
        a = perturbed_transition(gauss, amplitude=0.01, seed=0)(x, 2.0, 0.1)
        b = perturbed_transition(gauss, amplitude=0.01, seed=1)(x, 2.0, 0.1)
        assert a[0, 0] != b[0, 0]


class TestEvalReport:
    def test_defaults(self):
        rep = EvalReport(w1=0.1, mean_error=0.01, var_error=0.02, n_samples=100, nfe=4)
        assert rep.nll is None
        assert rep.metadata == {}
