from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablesup import oracles
from stablesup.chi_approx import default_kappa
from stablesup.errors import CauchyMode, DivergentIntegral, DomainError
from stablesup.stable_core import cms_g, sample_stable, validate_params

SETTINGS = [(1.5, 0.4), (0.7, 0.6)]
XGRID = np.logspace(-2, 4, 10)


class TestConstants:
    def test_delta_above_one(self):
        k = oracles.constants(validate_params(1.5, 0.5))
        assert k.delta == pytest.approx(3.0) and k.gamma == 1.0
        assert k.b_rho == pytest.approx(1 / 0.75)

    def test_c_is_gamma_integral(self):
        # int_0^inf exp(-y^z) dy = Gamma(1 + 1/z)
        for a in (1.2, 1.5, 1.9):
            k = oracles.constants(validate_params(a, 0.5))
            assert k.c == pytest.approx(max(1.0, math.gamma(1 + 1 / k.zeta)), rel=1e-9)

    def test_gamma_below_one(self):
        k = oracles.constants(validate_params(0.5, 0.5))
        assert k.gamma == pytest.approx(math.sqrt(2) / 2, rel=1e-14)
        assert k.delta == 1.0

    @pytest.mark.parametrize("a,r", [(0.5, 0.3), (0.8, 0.9), (1.5, 0.4), (1.9, 0.5)])
    def test_b_rho_at_least_one(self, a, r):
        k = oracles.constants(validate_params(a, r))
        assert k.b_rho >= 1 and k.b_one_minus_rho >= 1

    def test_cauchy(self):
        with pytest.raises(CauchyMode):
            oracles.constants(validate_params(1.0, 0.5))

    def test_d_dominates_gamma(self):
        for s in (0.0, 0.3, 1.0, 2.5):
            assert oracles.d_const(s) >= math.gamma(s + 1)


class TestExpMoment:
    def test_x_zero(self):
        p = validate_params(1.5, 0.4)
        k = oracles.constants(p)
        for s in (0.0, 0.5, 1.0):
            v = oracles.exp_moment(p, s, 0.0)
            assert v == pytest.approx(math.gamma(s + 1), rel=1e-9)
            assert v <= k.c * k.d(s)

    @pytest.mark.parametrize("a,s,x", [(1.5, 1.0, 10.0), (0.5, 0.5, 100.0)])
    def test_examples(self, a, s, x):
        rep = oracles.check_exp_moment_bound(validate_params(a, 0.5), s, [x])
        assert rep.passed and rep.max_ratio < 1

    @pytest.mark.parametrize("a,r", SETTINGS)
    @pytest.mark.parametrize("s", [0.0, 0.5, 1.0, 2.0])
    def test_grid(self, a, r, s):
        assert oracles.check_exp_moment_bound(validate_params(a, r), s, XGRID).passed

    def test_mc(self):
        p = validate_params(0.7, 0.6)
        e = np.random.default_rng(0).standard_exponential(1_000_000)
        v = e**0.5 * np.exp(-2.0 * e**p.zeta)
        assert abs(v.mean() - oracles.exp_moment(p, 0.5, 2.0)) < 4 * v.std() / 1000


class TestGLaplace:
    def test_x_zero(self):
        p = validate_params(1.5, 0.4)
        assert oracles.G_laplace(p, 0.0) == pytest.approx(1.0, rel=1e-9)

    def test_example(self):
        assert oracles.check_G_laplace_bound(validate_params(1.5, 0.4), [5.0]).passed

    @pytest.mark.parametrize("a,r", SETTINGS)
    def test_grid(self, a, r):
        assert oracles.check_G_laplace_bound(validate_params(a, r), XGRID).passed

    def test_decay_rate(self):
        p = validate_params(1.5, 0.4)
        rep = oracles.check_G_laplace_bound(p, [1e2, 1e3, 1e4])
        lim = rep.extra["limit"]
        assert all(v <= lim for v in rep.extra["x_times_lhs"])

    def test_mc(self):
        p = validate_params(0.7, 0.6)
        v = np.random.default_rng(1).uniform(-math.pi / 2, math.pi / 2, 1_000_000)
        g = cms_g(v, p)
        w = np.exp(-3.0 * g[g > 0])
        assert abs(w.mean() - oracles.G_laplace(p, 3.0)) < 4 * w.std() / math.sqrt(w.size)


class TestCauchyLaplace:
    def test_x_zero(self):
        assert oracles.cauchy_eta_moment(0.4, 0.0, 0.0) == pytest.approx(1.0, rel=1e-9)

    @pytest.mark.parametrize("rho,s,x", [(0.5, 0.0, 3.0), (0.3, 0.5, 10.0)])
    def test_examples(self, rho, s, x):
        assert oracles.check_cauchy_laplace_bound(rho, s, [x]).passed

    @pytest.mark.parametrize("rho", [0.5, 0.3, 0.8])
    @pytest.mark.parametrize("s", [0.0, 0.5, 0.9])
    def test_grid(self, rho, s):
        assert oracles.check_cauchy_laplace_bound(rho, s, np.logspace(-2, 3, 10)).passed

    def test_mc(self):
        s = sample_stable(validate_params(1.0, 0.3), np.random.default_rng(2), 2_000_000)
        w = np.exp(-2.0 * s[s > 0])
        assert abs(w.mean() - oracles.cauchy_eta_moment(0.3, 0.0, 2.0)) < 4 * w.std() / math.sqrt(w.size)

    def test_s_range(self):
        with pytest.raises(DomainError):
            oracles.check_cauchy_laplace_bound(0.5, 1.0, [1.0])


class TestTailIntegral:
    def test_b_at_least_one(self):
        assert oracles.tail_integral_P(2.0, 0.3, 1.5) == pytest.approx(2.0**-1.5 / 1.2)

    def test_special_case(self):
        b, p = 0.5, 0.3
        assert oracles.tail_integral_P(b, p, 1.0) == pytest.approx(b**-p / (p * (1 - p)) - 1 / p, rel=1e-14)
        assert oracles.tail_integral_P(b, p, 1.0) == pytest.approx(oracles.tail_integral_quad(b, p, 1.0), abs=1e-8)

    def test_quadrature_example(self):
        assert abs(oracles.tail_integral_P(0.5, 0.3, 2.0) - oracles.tail_integral_quad(0.5, 0.3, 2.0)) < 1e-8

    def test_grid(self):
        for b in (0.1, 0.5, 1.0, 2.0, 10.0):
            for p in (-0.5, 0.0, 0.3, 0.7, 1.2):
                for dq in (0.5, 1.0, 1.7, 2.5, 4.0):
                    q = p + dq
                    assert abs(oracles.tail_integral_P(b, p, q) - oracles.tail_integral_quad(b, p, q)) < 1e-8

    def test_divergent(self):
        with pytest.raises(DivergentIntegral):
            oracles.tail_integral_P(0.5, 1.0, 1.0)

    @given(st.floats(0.05, 20), st.floats(-0.9, 0.9).filter(lambda p: abs(p) > 1e-3), st.floats(0.3, 3))
    @settings(max_examples=30, deadline=None)
    def test_p_zero_limit_continuous(self, b, p, dq):
        # the closed form is continuous in p through the analytic p = 0 limit
        near = oracles.tail_integral_P(b, 1e-7, 1e-7 + dq)
        assert near == pytest.approx(oracles.tail_integral_P(b, 0.0, dq), rel=1e-5)


class TestSeq:
    def test_all_ones_equality(self):
        la, ra, lb, rb = oracles.seq_lhs_rhs(0.3, np.ones(7), np.ones(7))
        assert la == pytest.approx(1.0) and ra == pytest.approx(1.0)

    def test_all_zero(self):
        la, ra, _, _ = oracles.seq_lhs_rhs(0.3, np.zeros(5), np.ones(5))
        assert la == pytest.approx(0.7**5) and ra == pytest.approx(0.7**5)

    def test_random(self):
        rep = oracles.check_seq_inequalities(10_000, np.random.default_rng(0))
        assert rep.passed and rep.violations_a == 0 and rep.violations_b == 0

    @given(st.floats(0, 1), st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=20))
    def test_property(self, r, xy):
        x = np.array([a for a, _ in xy])
        y = np.array([b for _, b in xy])
        la, ra, lb, rb = oracles.seq_lhs_rhs(r, x, y)
        assert la <= ra + 1e-12 and lb <= rb + 1e-12


class TestQR:
    def test_Q_cancellation(self):
        a, p = 1.5, 0.4
        Q, _ = oracles.aux_Q_R(p, 0.5, 0.0, 1.0, a)
        assert Q == pytest.approx(1 / (p * (1 - p) * (1 - p / a)), rel=1e-14)

    @pytest.mark.parametrize("a,p,r,u", [(1.5, 0.5, 1.0, 0.5), (1.5, 0.3, 0.0, 0.4), (0.8, 0.2, 2.0, 0.6)])
    def test_series_closed_form(self, a, p, r, u):
        Q, _ = oracles.aux_Q_R(p, 0.5 * min(a, 1), r, u, a)
        assert oracles.Q_series(p, r, u, a) == pytest.approx(Q - 1 / p, abs=1e-10)

    def test_series_direct_sum(self):
        # independent scalar loop over the summand
        a, p, r, u = 1.5, 0.5, 1.0, 0.5
        tot = 0.0
        for k in range(1, 201):
            tot += u * (1 - u) ** (k - 1) * (1 + r) ** (k - 1) * (
                (1 + r - p / a) ** (1 - k) / (p * (1 - p) * (1 - p / a)) - (1 + r) ** (1 - k) / p
            )
        assert oracles.Q_series(p, r, u, a) == pytest.approx(tot, rel=1e-13)

    def test_R_positive_and_pole(self):
        vals = [oracles.aux_Q_R(0.2, q, 0.5, 0.5, 0.8)[1] for q in (0.4, 0.7, 0.79, 0.7999)]
        assert all(v > 0 and math.isfinite(v) for v in vals)
        assert vals == sorted(vals) and vals[-1] > 100 * vals[0]

    @pytest.mark.parametrize("args", [(0.2, 0.5, 0.5, 0.0), (0.9, 0.5, 0.5, 0.5), (0.2, 1.0, 0.5, 0.5), (0.2, 0.5, -1, 0.5)])
    def test_domain(self, args):
        p, q, r, u = args
        with pytest.raises(DomainError):
            oracles.aux_Q_R(p, q, r, u, 1.5)


class TestRates:
    def test_r_zero_bounded(self):
        p = validate_params(1.5, 0.5)
        rep = oracles.inverse_moment_rate_check(
            p, default_kappa(p), (0.3, 0.3, 0.0, 0, 0, 0), range(1, 9), 20_000, 1
        )
        assert rep.ceiling == 1.0 and rep.passed

    def test_example_rate(self):
        p = validate_params(1.5, 0.5)
        rep = oracles.inverse_moment_rate_check(
            p, default_kappa(p), (0.5, 0.5, 1.0, 0, 0, 0), range(1, 11), 100_000, 2
        )
        assert rep.fitted_rate <= 0.55

    def test_T_scaling(self):
        p = validate_params(1.5, 0.5)
        rep = oracles.inverse_moment_T_scaling(p, default_kappa(p), (0.5, 0.5, 1.0, 0, 0, 0), 4, 200_000, (3, 4))
        assert rep.expected == pytest.approx(2 ** (1 - 1 / 1.5))
        assert rep.passed

    def test_increment_rate(self):
        p = validate_params(0.8, 0.5)
        rep = oracles.increment_rate_check(p, default_kappa(p), (0.3, 0.3, 1.0, 1.0), range(2, 12), 50_000, 5)
        assert rep.passed
