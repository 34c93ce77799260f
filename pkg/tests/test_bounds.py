from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablesup import bounds
from stablesup.errors import EmptyGrid, OutsideSupport, PreconditionViolated

Q = bounds.BoundQuery(1.5, 0.4, 1.0, 1.2, (1, 1))


@dataclass
class FakeEst:
    point: tuple
    orders: tuple
    value: float
    stderr: float


class TestQuery:
    def test_default_alpha_prime(self):
        assert bounds.BoundQuery(1.5, 0.5).alpha_prime == pytest.approx(1.35)

    @pytest.mark.parametrize("ap", [1.5, 2.0, -0.1])
    def test_alpha_prime_range(self, ap):
        with pytest.raises(PreconditionViolated):
            bounds.BoundQuery(1.5, 0.5, alpha_prime=ap)

    def test_orders(self):
        with pytest.raises(PreconditionViolated):
            bounds.BoundQuery(1.5, 0.5, orders=(0, 1))


class TestShapes:
    def test_zero_alpha_prime(self):
        q = bounds.BoundQuery(1.5, 0.4, 3.0, 0.0)
        for i in (0, 1):
            for j in (0, 1):
                assert bounds.f_ij(i, j, q, -0.7, 2.3) == 1.0

    def test_unit_at_symmetric_point(self):
        q = bounds.BoundQuery(1.5, 0.5, 1.0, 1.4)
        assert bounds.f_ij(0, 0, q, 0.0, 1.0, alpha_prime=1.5) == pytest.approx(1.0)

    @given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(0.1, 4))
    def test_labels_at_full_alpha(self, x, dy, T):
        a, r = 1.5, 0.4
        y = max(x, 0.0) + dy
        q = bounds.BoundQuery(a, r, T, 1.0)
        f11 = bounds.f_ij(1, 1, q, x, y, alpha_prime=a)
        f00 = bounds.f_ij(0, 0, q, x, y, alpha_prime=a)
        assert f11 == pytest.approx(T**2 * (y - x) ** -a * y**-a, rel=1e-10)
        assert f00 == pytest.approx(T**-1 * (y - x) ** (a * (1 - r)) * y ** (a * r), rel=1e-10)

    def test_support(self):
        with pytest.raises(OutsideSupport):
            bounds.f_ij(0, 0, Q, 1.0, 0.5)
        with pytest.raises(OutsideSupport):
            bounds.joint_bound(Q, -1.0, 0.0)


class TestJoint:
    def test_order_one_prefactor(self):
        x, y = -0.3, 1.7
        expect = (y - x) ** -1 * y**-1 * min(bounds.f_ij(i, j, Q, x, y) for i in (0, 1) for j in (0, 1))
        assert bounds.joint_bound(Q, x, y) == pytest.approx(expect, rel=1e-14)

    @given(st.floats(-10, 10), st.floats(0.01, 10))
    def test_min_consistency(self, x, dy):
        q = bounds.BoundQuery(1.5, 0.4, 1.0, 1.2, (2, 3), C=2.0)
        y = max(x, 0.0) + dy
        pref = 2.0 * y**-3 * (y - x) ** (1 - 5) * (2 * y - x) ** 2
        jb = bounds.joint_bound(q, x, y)
        for i in (0, 1):
            for j in (0, 1):
                assert jb <= pref * bounds.f_ij(i, j, q, x, y) * (1 + 1e-12)

    def test_continuous_across_boundaries(self):
        ys = np.linspace(0.2, 5.0, 20001)
        vals = bounds.joint_bound(Q, -0.5 * np.ones_like(ys), ys)
        jumps = np.abs(np.diff(np.log(vals)))
        assert jumps.max() < 1e-2

    def test_far_region_picks_11(self):
        q = bounds.BoundQuery(1.5, 0.4, 1.0, 1.2)
        x, y = -40.0, 50.0
        fs = [bounds.f_ij(i, j, q, x, y) for i in (0, 1) for j in (0, 1)]
        assert int(np.argmin(fs)) == 3


class TestRefl:
    def test_crossover(self):
        for T in (0.5, 1.0, 3.0):
            q = bounds.BoundQuery(1.5, 0.4, T, 1.2)
            x = T ** (1 / 1.5)
            a = T ** (1.2 / 1.5) * x**-1.2
            b = T ** (-(1.2 / 1.5) * 0.4) * x ** (1.2 * 0.4)
            assert a == pytest.approx(b, rel=1e-12)

    @given(st.floats(0.05, 20), st.floats(0.05, 20), st.floats(0.3, 3), st.floats(0.2, 4))
    def test_homogeneity(self, xp, xm, lam, T):
        q1 = bounds.BoundQuery(1.5, 0.4, T, 1.2, (2, 1))
        q2 = bounds.BoundQuery(1.5, 0.4, lam**1.5 * T, 1.2, (2, 1))
        lhs = bounds.refl_bound(q2, lam * xp, lam * xm)
        assert lhs == pytest.approx(lam**-3 * bounds.refl_bound(q1, xp, xm), rel=1e-10)

    def test_zero_alpha_prime(self):
        q = bounds.BoundQuery(1.5, 0.4, 1.0, 0.0, (2, 3), C=1.7)
        assert bounds.refl_bound(q, 0.7, 1.9) == pytest.approx(1.7 * 0.7**-2 * 1.9**-3)

    def test_support(self):
        with pytest.raises(OutsideSupport):
            bounds.refl_bound(Q, 0.0, 1.0)


class TestRegion:
    def test_far(self):
        assert bounds.classify_region(-50.0, 60.0, 1.0, 1.5, 0.4) == "11"

    def test_near(self):
        assert bounds.classify_region(0.0, 0.01, 1.0, 1.5, 0.4) == "00"

    def test_tie_to_lower(self):
        # y = T^(1/alpha) with y - x small: f00 and f01 coincide
        assert bounds.classify_region(0.99, 1.0, 1.0, 1.5, 0.5) == "00"

    @given(st.floats(-5, 5), st.floats(0.01, 5))
    def test_agrees_with_argmin(self, x, dy):
        y = max(x, 0.0) + dy
        q = bounds.BoundQuery(1.5, 0.4, 1.0, 1.0)
        fs = [bounds.f_ij(i, j, q, x, y, alpha_prime=1.5) for i in (0, 1) for j in (0, 1)]
        r = bounds.classify_region(x, y, 1.0, 1.5, 0.4)
        assert fs[bounds.REGIONS.index(r)] <= min(fs) * (1 + 1e-9)


class TestCorollaries:
    def test_sup_crossover(self):
        q = bounds.BoundQuery(1.5, 0.4, 2.0, 1.2)
        y = 2.0 ** (1 / 1.5)
        v = bounds.sup_density_bound(q, y, 1)
        assert v == pytest.approx(y**-1 * 2.0 ** (1.2 / 1.5) * y**-1.2, rel=1e-12)

    def test_sup_zero_alpha_prime(self):
        q = bounds.BoundQuery(1.5, 0.4, 1.0, 0.0, C=3.0)
        assert bounds.sup_density_bound(q, 2.0, 2) == pytest.approx(0.75)

    def test_sup_marginal_structure(self):
        q = bounds.BoundQuery(1.5, 0.4, 1.0, 1.2)
        ys = np.logspace(-2, 2, 50)
        r = bounds.sup_density_bound(q, ys, 1) / bounds.refl_bound(q, ys, np.ones_like(ys))
        assert np.allclose(r, r[0], rtol=1e-12)

    def test_sup_tail_integrable(self):
        q = bounds.BoundQuery(1.5, 0.4, 1.0, 1.2)
        ys = np.logspace(0, 8, 4000)
        f = bounds.sup_density_bound(q, ys, 1)
        assert np.trapezoid(f, ys) < 1 / 1.2 + 1e-3

    def test_passage_saturates(self):
        q = bounds.BoundQuery(1.5, 0.4, alpha_prime=1.2, C=1.0)
        assert bounds.passage_time_bound(q, 1.0, 1, 1.0) == 1.0
        assert bounds.passage_time_bound(q, 0.5, 2, 4.0) == pytest.approx(4.0 ** (-1 / 1.5 - 2))

    def test_passage_blowup(self):
        q = bounds.BoundQuery(1.5, 0.4, alpha_prime=0.0)
        assert bounds.passage_time_bound(q, 1.0, 3, 0.1) > bounds.passage_time_bound(q, 1.0, 1, 0.1)

    def test_passage_value(self):
        q = bounds.BoundQuery(1.5, 0.4, alpha_prime=0.0, C=2.5)
        assert bounds.passage_time_bound(q, 1.0, 1, 1.0) == 2.5

    def test_joint_tail(self):
        q = bounds.BoundQuery(1.5, 0.4, alpha_prime=1.2)
        assert bounds.joint_tail_bound(q, -1e12, 2.0, 1.0) < 1e-13
        y0 = 3.0
        assert bounds.joint_tail_bound(q, -y0, y0, 1.0) == pytest.approx(y0 ** (-2.4))
        vals = [bounds.joint_tail_bound(q, -1.0, y, 1.0) for y in (1.0, 2.0, 4.0, 8.0)]
        assert vals == sorted(vals, reverse=True)

    def test_joint_tail_exponent(self):
        q = bounds.BoundQuery(1.5, 0.4, alpha_prime=1.2)
        a = bounds.joint_tail_bound(q, -2.0, 3.0, 2.0)
        b = bounds.joint_tail_bound(q, -2.0, 3.0, 2.0, t_exponent=1.5 * 2 / 1.2)
        assert b / a == pytest.approx(2.0 ** (2.5 - 1.6))

    def test_joint_tail_preconditions(self):
        with pytest.raises(PreconditionViolated):
            bounds.joint_tail_bound(Q, 0.5, 2.0, 1.0)
        with pytest.raises(PreconditionViolated):
            bounds.joint_tail_bound(Q, -0.5, 0.5, 1.0)


class TestFit:
    def test_all_zero(self):
        est = [FakeEst((1.0, 1.0), (1, 1), 0.0, 0.1), FakeEst((2.0, 1.0), (1, 1), 0.0, 0.1)]
        rep = bounds.fit_constant(est, Q)
        assert rep.C_fit == 0.0 and rep.argmax is None

    def test_synthetic_equal(self):
        pts = [(0.3, 0.5), (1.0, 2.0), (4.0, 0.7)]
        est = [FakeEst(p, (1, 1), bounds.refl_bound(Q, *p), 0.0) for p in pts]
        assert bounds.fit_constant(est, Q).C_fit == pytest.approx(1.0, rel=1e-14)

    def test_argmax(self):
        est = [
            FakeEst((1.0, 1.0), (1, 1), 0.5 * bounds.refl_bound(Q, 1.0, 1.0), 0.0),
            FakeEst((2.0, 1.0), (1, 1), -3.0 * bounds.refl_bound(Q, 2.0, 1.0), 0.0),
        ]
        rep = bounds.fit_constant(est, Q)
        assert rep.argmax == (2.0, 1.0) and rep.C_fit == pytest.approx(3.0)

    def test_empty(self):
        with pytest.raises(EmptyGrid):
            bounds.fit_constant([], Q)


def test_rows():
    rows = bounds.bounds_rows(Q, [(-0.5, 1.0), (0.5, 2.0)])
    assert len(rows) == 2 and all(len(r) == len(bounds.BOUNDS_COLUMNS) for r in rows)
    assert rows[0][12] in bounds.REGIONS
    assert float(rows[1][3]) == 1.5
