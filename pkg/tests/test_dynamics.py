import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from paritylab import dynamics as dyn
from paritylab.dynamics import DistState, INIT_STATE


class TestUpdateCoeffs:
    @pytest.mark.parametrize("N", [5, 50, 5000])
    def test_init_has_unit_A(self, N):
        co = dyn.update_coeffs(INIT_STATE, 0.7, N)
        assert co.m == pytest.approx(1 - 2 * 0.7 / N, rel=1e-14)
        assert co.xi == 0.0

    def test_init_c_value(self):
        co = dyn.update_coeffs(INIT_STATE, 1.0, 100)
        expect = 0.01 * (1 - 0.99**99)
        assert co.c == pytest.approx(expect, rel=1e-12)
        assert co.c == pytest.approx(0.0063027, abs=1e-7)

    def test_ideal_point_is_fixed(self):
        co = dyn.update_coeffs(DistState(0.0, 0.0), 2.0, 80)
        assert co.c == 0.0

    def test_symmetry_of_target_one_family(self):
        # c0 + c1 = 1 - m, so mu1 = 1 - mu0 is preserved
        s = DistState(0.31, 0.07)
        N, a = 60, 1.3
        p = 1 / N
        A = (4 * p * (s.mu**2 + s.sigma_sq) - 4 * p * s.mu + 1) ** (N - 1)
        B = (1 - 2 * p * s.mu) ** (N - 1)
        c1 = a * p * (A + B)
        co = dyn.update_coeffs(s, a, N)
        mu1 = 1 - s.mu
        assert co.m * mu1 + c1 == pytest.approx(1 - (co.m * s.mu + co.c), rel=1e-13)

    def test_log_power_path_agrees(self):
        s = DistState(0.2, 0.1)
        N = 5000
        A = 4 / N * (s.mu**2 + s.sigma_sq) - 4 / N * s.mu + 1
        An, _ = dyn.ab_powers(s, N)
        assert An == pytest.approx(A ** (N - 1), rel=1e-10)


class TestStepDist:
    def test_alpha_zero_is_identity(self):
        s = DistState(0.3, 0.2)
        n = dyn.step_dist(s, 0.0, 40)
        assert (n.mu, n.sigma_sq) == (s.mu, s.sigma_sq)
        assert n.k == 1

    def test_first_step_value(self):
        s = dyn.step_dist(INIT_STATE, 1.0, 100)
        c = 0.01 * (1 - 0.99**99)
        assert s.mu == pytest.approx(0.98 * 0.5 + c, rel=1e-12)
        assert s.mu == pytest.approx(0.496303, abs=1e-6)

    def test_variance_is_product_of_m_squared(self):
        N, a = 50, 0.3
        tr = dyn.iterate(INIT_STATE, a, N, 200)
        expect = 0.25 * np.concatenate([[1.0], np.cumprod(tr.m[:-1] ** 2)])
        np.testing.assert_allclose(tr.sigma_sq, expect, rtol=1e-12)

    @pytest.mark.parametrize("N", [20, 100, 1000])
    def test_variance_decays_below_alpha0(self, N):
        a = 0.9 * dyn.alpha0(N)
        tr = dyn.iterate(INIT_STATE, a, N, 5000, record_every=1)
        s2 = tr.sigma_sq[tr.sigma_sq > 1e-290]  # drop the underflowed tail
        assert np.all(np.diff(s2) < 0)
        assert tr.sigma_sq[-1] < 1e-6 * tr.sigma_sq[0]

    @pytest.mark.parametrize("N", [20, 100, 1000])
    def test_monotone_mean_below_alpha1(self, N):
        a = 0.9 * dyn.alpha1(N)
        tr = dyn.iterate(INIT_STATE, a, N, 3000)
        assert np.all((tr.m > 0) & (tr.m < 1))
        gap = np.abs(tr.mu - tr.fp)
        # one step towards the current target never overshoots it
        assert np.all(np.abs(tr.mu[1:] - tr.fp[:-1]) <= gap[:-1] + 1e-15)

    @pytest.mark.parametrize("N", [8, 20, 100])
    def test_forward_invariance_small_alpha(self, N):
        a = 0.2 * min(dyn.alpha1(N), abs(dyn.alpha2(max(N, 18))))
        tr = dyn.iterate(INIT_STATE, a, N, 20000, record_every=10)
        assert np.all((tr.mu >= -0.25) & (tr.mu <= 0.5))
        assert np.all((tr.sigma_sq > 0) & (tr.sigma_sq <= 0.25))

    @pytest.mark.parametrize("N", [18, 50, 300])
    def test_limit_inside_interval(self, N):
        a = 0.9 * dyn.alpha2(N)
        tr = dyn.iterate(INIT_STATE, a, N, 100_000, record_every=100_000)
        assert tr.final.mu in dyn.convergence_interval(N, a)

    def test_trajectory_csv(self, tmp_path):
        tr = dyn.iterate(INIT_STATE, 1.0, 30, 5)
        path = tmp_path / "traj.csv"
        tr.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "k,mu,sigma_sq,m,c,fp"
        assert len(lines) == 7


class TestBounds:
    def test_n100_thresholds(self):
        b = dyn.bounds(100, 1.0)
        assert b.alpha0 == pytest.approx(100 * math.exp(-7191 / 3128))
        assert b.alpha0 == pytest.approx(10.033, abs=5e-3)
        assert b.alpha1 == pytest.approx(5.016, abs=3e-3)

    def test_n100_delta_max(self):
        b = dyn.bounds(100, 1.0)
        first = 1.5 * math.exp(2.25) * math.exp(153 / 3128)
        second = math.exp(-1) * math.exp(-0.015)
        assert b.delta_max == pytest.approx((first - second) / 100, rel=1e-12)
        assert b.delta_max == pytest.approx(0.14583, abs=5e-5)

    def test_n18_margins(self):
        b = dyn.bounds(18)
        assert b.epsilon == pytest.approx(0.38690, abs=5e-6)
        assert b.phi_min_prime == pytest.approx(0.5 * (1 - math.exp(b.epsilon)), rel=1e-14)
        assert b.phi_min_prime == pytest.approx(-0.23623, abs=5e-5)
        assert b.phi_min_prime > -0.25
        assert b.phi_max_prime == pytest.approx(0.5 * (1 - math.exp(-b.epsilon)), rel=1e-14)
        assert b.phi_max_prime == pytest.approx(0.16040, abs=5e-5)

    def test_epsilon_is_sum_of_truncation_bounds(self):
        for N in (5, 18, 100, 10_000):
            b = dyn.bounds(N)
            assert b.epsilon == pytest.approx(b.eta_xi_max + b.eta_zeta_max, rel=1e-13)

    def test_zero_variance_variant(self):
        assert dyn.bounds(50).eta_xi_max_zero_var == pytest.approx(65 / (32 * 50 - 40))

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            dyn.bounds(2)

    def test_threshold_order(self):
        for N in np.unique(np.geomspace(7, 10_000, 60).astype(int)):
            b = dyn.bounds(int(N))
            assert b.alpha2 < b.alpha1 < b.alpha0

    def test_alpha2_places_lower_end_on_domain_edge(self):
        for N in (18, 40, 500):
            lo, hi = dyn.convergence_interval(N, dyn.alpha2(N))
            assert lo == pytest.approx(-0.25, abs=1e-12)
            assert hi < 0.25

    def test_bounds_csv(self, tmp_path):
        path = tmp_path / "b.csv"
        dyn.write_bounds_csv([10, 100], 0.5, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "N,alpha0,alpha1,alpha2,epsilon,phi_min,phi_max,delta_max"
        assert float(lines[2].split(",")[1]) == pytest.approx(dyn.alpha0(100))


class TestEnvelopes:
    def test_fixed_point_inside_envelope_grid(self):
        N = 50
        for mu in np.linspace(-0.25, 0.5, 100):
            for s2 in np.linspace(1e-6, 0.25, 100):
                s = DistState(mu, s2)
                lo, hi = dyn.envelopes(s, N)
                fp = dyn.fixed_point(s, N, alpha=1.0)
                assert lo <= fp <= hi

    def test_upper_envelope_below_half(self):
        for mu in np.linspace(-0.25, 0.5, 50):
            for s2 in np.linspace(0, 0.25, 20):
                assert dyn.envelopes(DistState(mu, s2), 20)[1] < 0.5

    @pytest.mark.parametrize("x", [0.05, 0.2, 0.4])
    def test_symmetric_about_quarter(self, x):
        a = dyn.envelopes(DistState(0.25 - x, 0.1), 60)
        b = dyn.envelopes(DistState(0.25 + x, 0.1), 60)
        np.testing.assert_allclose(a, b, rtol=1e-13)

    def test_fixed_point_alpha_free(self):
        s = DistState(0.1, 0.05)
        assert dyn.fixed_point(s, 40, 0.3) == pytest.approx(dyn.fixed_point(s, 40, 3.0), rel=1e-12)

    def test_fixed_point_undefined_at_alpha_zero(self):
        assert dyn.fixed_point(INIT_STATE, 40, 0.0) is None


class TestConvergenceInterval:
    def test_width_formula(self):
        N, a = 100, 0.5
        b = dyn.bounds(N, a)
        iv = dyn.convergence_interval(N, a)
        expect = 0.5 * (math.exp(b.epsilon) - math.exp(-b.epsilon)) + 2 * b.delta_max
        assert iv.width == pytest.approx(expect, rel=1e-13)
        assert iv.width == pytest.approx(0.20978, abs=1e-4)

    def test_shrinks_to_zero(self):
        iv = dyn.convergence_interval(10**7, 1e-9)
        assert abs(iv.lo) < 1e-5 and abs(iv.hi) < 1e-5

    def test_warns_below_18(self):
        with pytest.warns(UserWarning):
            iv = dyn.convergence_interval(10, 0.01)
        assert not iv.proven


class TestExponentialApproximation:
    def test_zero(self):
        assert dyn.exp_approx_error(0.0, 10) == (0.0, 0.0)

    def test_xi_bound_at_n10(self):
        eta, bound = dyn.exp_approx_error(9 / 40, 10)
        assert abs(eta) <= 153 / (32 * 10 - 72)
        assert 153 / (32 * 10 - 72) == pytest.approx(0.61694, abs=5e-6)

    def test_rejects_large_x(self):
        with pytest.raises(ValueError):
            dyn.exp_approx_error(1.0, 5)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-0.9, 0.9), st.integers(2, 1000))
    def test_bound_property(self, x, N):
        eta, bound = dyn.exp_approx_error(x, N)
        assert abs(eta) <= bound * (1 + 1e-12)
        assume(abs((N - 1) * math.log1p(x)) < 700 and abs(N * x) < 700)
        assert (1 + x) ** (N - 1) == pytest.approx(math.exp(N * x) * math.exp(eta), rel=1e-12)

    @pytest.mark.parametrize("N", [10, 43, 100, 1000])
    def test_truncation_bounds_on_domain(self, N):
        mu = np.linspace(-0.25, 0.5, 151)[:, None]
        s2 = np.linspace(0.0, 0.25, 51)[None, :]
        xi = 4 * (mu**2 + s2 - mu)
        zeta = -2 * mu + 0 * s2
        eta_xi = (N - 1) * np.log1p(xi / N) - xi
        eta_zeta = (N - 1) * np.log1p(zeta / N) - zeta
        assert np.max(np.abs(eta_xi)) <= dyn.eta_xi_max(N)
        assert np.max(np.abs(eta_zeta)) <= dyn.eta_zeta_max(N)


class TestVariableAffine:
    def test_constant_monotone(self):
        run = dyn.variable_affine_iterate(lambda x: 0.4, lambda x: -0.1, 0.4, 60, envelope=(-1 / 6, -1 / 6))
        assert run.ok
        assert run.x[-1] == pytest.approx(-1 / 6, abs=1e-12)
        assert np.all(np.diff(run.x[:25]) < 0)
        assert np.all(np.diff(run.x) <= 0)

    def test_constant_oscillatory(self):
        run = dyn.variable_affine_iterate(lambda x: -0.4, lambda x: -0.1, 0.3, 40)
        fp = -0.1 / 1.4
        assert fp == pytest.approx(-0.0714, abs=1e-4)
        signs = np.sign(run.x[:20] - fp)
        assert np.all(signs[1:] == -signs[:-1])
        assert run.x[-1] == pytest.approx(fp, abs=1e-12)
        assert run.hypothesis_violations

    def test_matches_step_dist(self):
        N, a, var = 40, 0.8, 0.2

        def coeffs(mu):
            return dyn.update_coeffs(DistState(mu, var), a, N)

        run = dyn.variable_affine_iterate(lambda x: coeffs(x).m, lambda x: coeffs(x).c, 0.5, 30)
        mu = 0.5
        for k in range(30):
            mu = coeffs(mu).m * mu + coeffs(mu).c
            assert run.x[k + 1] == mu

    def test_flags_bad_envelope(self):
        run = dyn.variable_affine_iterate(lambda x: 0.5, lambda x: 0.5, 0.0, 5, envelope=(-0.5, -0.4))
        assert run.contraction_violations

    def test_random_trajectories_contract(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a0, a1, c0, c1, f = rng.uniform([0.05, 0.0, -1, 0, 0.5], [0.5, 0.45, 1, 2, 5])
            run = dyn.variable_affine_iterate(
                lambda x: a0 + a1 * (1 + math.sin(f * x)) / 2,
                lambda x: (1 - (a0 + a1 * (1 + math.sin(f * x)) / 2)) * (c0 + c1 * math.tanh(x)),
                rng.uniform(-20, 20),
                50,
                envelope=(c0 - c1, c0 + c1),
            )
            assert run.ok


class TestIntersectionBounds:
    def test_constant(self):
        r = dyn.intersection_bounds_check(lambda x: 0.3, 0.0, 1.0)
        assert r.phi_lo == r.phi_hi == pytest.approx(0.3)
        assert r.root == pytest.approx(0.3)

    def test_linear_example(self):
        r = dyn.intersection_bounds_check(lambda x: 0.2 + 0.6 * (1 - x), 0.0, 1.0)
        assert (r.phi_lo, r.phi_hi) == pytest.approx((0.2, 0.8))
        assert r.root == pytest.approx(0.5)
        assert r.root_inside

    def test_rejects_increasing(self):
        with pytest.raises(ValueError):
            dyn.intersection_bounds_check(lambda x: x**3, -1.0, 1.0)

    @pytest.mark.parametrize("which", [0, 1])
    def test_envelope_roots_inside_phi_interval(self, which):
        N = 50
        f = lambda mu: dyn.envelopes(DistState(mu, 0.0), N)[which]  # noqa: E731
        r = dyn.intersection_bounds_check(f, -0.25, 0.25)
        b = dyn.bounds(N)
        assert r.root_inside
        assert b.phi_min_prime <= r.root <= b.phi_max_prime


class TestInvarianceReport:
    @pytest.mark.parametrize("N, ok", [(42, False), (43, True)])
    def test_global(self, N, ok):
        r = dyn.invariance_report(N)
        assert r.global_containment is ok
        assert r.global_closed_form is ok

    @pytest.mark.parametrize("N, ok", [(17, False), (18, True)])
    def test_interval(self, N, ok):
        r = dyn.invariance_report(N)
        assert r.interval_containment is ok
        assert r.interval_closed_form is ok

    @pytest.mark.parametrize("N, ok", [(7, False), (8, True)])
    def test_relaxed(self, N, ok):
        r = dyn.invariance_report(N)
        assert r.relaxed is ok
        assert r.relaxed_closed_form is ok

    def test_buffer_zone_with_small_alpha(self):
        assert dyn.invariance_report(8, alpha=1e-3).relaxed_buffer
