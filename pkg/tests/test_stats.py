import numpy as np
import pytest

from paritylab import data, grad
from paritylab.stats import (
    InsufficientDataError,
    family_moments,
    mc_expected_gradient,
    qq_gaussian,
)


class TestFamilyMoments:
    def test_oracle_weights(self):
        oracle = data.sample_oracle(20, 4, 0.5, 1)
        fm = family_moments(oracle, oracle)
        assert (fm.mu0, fm.sig0_sq, fm.mu1, fm.sig1_sq) == (0.0, 0.0, 1.0, 0.0)
        assert fm.n0 + fm.n1 == 80

    def test_init_means(self):
        N, P = 1000, 100
        W = data.gaussian_init(N, P, seed=3)
        fm = family_moments(W, data.sample_oracle(N, P, 0.5, 3))
        assert abs(fm.mu0 - 0.5) < 0.005 and abs(fm.mu1 - 0.5) < 0.005
        assert fm.sig0_sq == pytest.approx(0.25, abs=0.005)

    def test_empty_family_absent(self):
        W = np.random.default_rng(0).normal(size=(10, 2))
        fm = family_moments(W, np.zeros((10, 2)))
        assert fm.mu1 is None and fm.sig1_sq is None and fm.n1 == 0
        assert fm.symmetry_residual is None

    def test_symmetric_state_residual(self):
        rng = np.random.default_rng(1)
        oracle = data.sample_oracle(2000, 1, 0.5, 2)
        W = np.where(oracle == 1, 1 - 0.1, 0.1) + 0.05 * rng.standard_normal(oracle.shape)
        dmu, dvar = family_moments(W, oracle).symmetry_residual
        assert dmu < 5 / np.sqrt(1000) and dvar < 0.01


class TestQQ:
    def test_normal_samples(self):
        x = np.random.default_rng(0).normal(3.0, 2.0, 10**5)
        assert qq_gaussian(x).correlation >= 0.9995

    def test_uniform_samples(self):
        x = np.random.default_rng(0).random(10**5)
        assert qq_gaussian(x).correlation < 0.99

    def test_bimodal_lower_than_components(self):
        rng = np.random.default_rng(1)
        a = rng.normal(0.05, 0.05, 5000)
        b = rng.normal(0.95, 0.05, 5000)
        both = qq_gaussian(np.concatenate([a, b])).correlation
        assert both < qq_gaussian(a).correlation and both < qq_gaussian(b).correlation

    def test_quantile_positions(self):
        from scipy.stats import norm

        r = qq_gaussian(np.arange(40.0))
        np.testing.assert_allclose(r.theoretical_q, norm.ppf((np.arange(1, 41) - 0.5) / 40), rtol=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(InsufficientDataError):
            qq_gaussian(np.arange(19.0))

    def test_csv(self, tmp_path):
        path = tmp_path / "qq.csv"
        qq_gaussian(np.random.default_rng(0).normal(size=30)).to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "theoretical_q,empirical_q" and len(lines) == 31


class TestMonteCarloGradient:
    def test_zero_sparsity(self):
        w = np.random.default_rng(0).normal(size=6)
        est = mc_expected_gradient(w, np.ones(6), 0.0, reps=200, seed=0)
        np.testing.assert_array_equal(est.mean, 0.0)

    @pytest.mark.parametrize("p_scale", [0.5, 1.0, 2.0])
    def test_matches_closed_form(self, p_scale):
        N = 8
        p = p_scale / N
        rng = np.random.default_rng(int(10 * p_scale))
        w, wt = rng.normal(0.5, 0.4, N), rng.integers(0, 2, N).astype(float)
        est = mc_expected_gradient(w, wt, p, reps=10**5, seed=1)
        exact = grad.expected_xor_grad_bernoulli(w, wt, p)
        assert np.all(np.abs(est.mean - exact) <= 3 * est.stderr)

    def test_error_shrinks_with_reps(self):
        w, wt = np.full(5, 0.3), np.array([1.0, 0, 1, 0, 0])
        a = mc_expected_gradient(w, wt, 0.2, reps=2_000, seed=2)
        b = mc_expected_gradient(w, wt, 0.2, reps=32_000, seed=2)
        np.testing.assert_allclose(a.stderr / b.stderr, 4.0, rtol=0.1)

    def test_rejects_few_reps(self):
        with pytest.raises(ValueError):
            mc_expected_gradient(np.ones(3), np.ones(3), 0.1, reps=50, seed=0)
