from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablesup.errors import IndexOrder, MomentDoesNotExist
from stablesup.stick_breaking import (
    joint_stick_moment,
    remainder_mixed_bound,
    sample_stick,
    stick_moment,
    stick_moment_triple,
    triple_case_table,
)


def mc(v):
    return v.mean(), v.std(ddof=1) / math.sqrt(v.size)


@pytest.fixture(scope="module")
def paths():
    return sample_stick(1.0, 4, np.random.default_rng(11), 1_000_000)


def test_path_identity(paths):
    assert np.max(np.abs(paths.lengths.sum(axis=1) + paths.remainder - 1.0)) <= 1e-12
    assert np.all(paths.lengths > 0)


@given(st.floats(0.01, 100.0), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_path_identity_any_T(T, n, seed):
    p = sample_stick(T, n, np.random.default_rng(seed), 20)
    assert np.allclose(p.lengths.sum(axis=1) + p.remainder, T, rtol=1e-12, atol=0)


def test_second_length(paths):
    m, se = mc(paths.lengths[:, 1])
    assert abs(m - 0.25) < 3 * se


def test_third_remainder():
    p = sample_stick(1.0, 3, np.random.default_rng(12), 1_000_000)
    m, se = mc(p.remainder)
    assert abs(m - 0.125) < 3 * se


@pytest.mark.parametrize("T,q,k,v", [(1, 1, 2, 0.25), (2, 0, 5, 1.0), (1, 0.5, 3, 1.5**-3)])
def test_stick_moment_examples(T, q, k, v):
    assert stick_moment(T, q, k) == pytest.approx(v, rel=1e-15)


def test_stick_moment_errors():
    with pytest.raises(MomentDoesNotExist):
        stick_moment(1, -1, 1)
    with pytest.raises(IndexOrder):
        stick_moment(1, 1, 0)


def test_joint_single_reduces():
    assert joint_stick_moment(1.3, [0.7]) == pytest.approx(stick_moment(1.3, 0.7, 1), rel=1e-14)


def test_joint_beta_product(paths):
    assert joint_stick_moment(1.0, [1, 1]) == pytest.approx(1 / 12, rel=1e-14)
    m, se = mc(paths.lengths[:, 0] * paths.lengths[:, 1])
    assert abs(m - 1 / 12) < 3 * se


def test_joint_tail_error():
    with pytest.raises(MomentDoesNotExist):
        joint_stick_moment(1.0, [0.5, -1.0])


def test_triple_diagonal():
    exact, _ = stick_moment_triple(1.0, 0.4, 0.6, 1.1, 3, 3, 3)
    assert exact == pytest.approx((1 + 0.4 + 0.6 + 1.1) ** -3, rel=1e-12)


@pytest.mark.parametrize("jkn", [(1, 1, 1), (1, 2, 3), (2, 2, 4), (1, 3, 3)])
def test_triple_zero_exponents(jkn):
    assert stick_moment_triple(1.0, 0, 0, 0, *jkn)[0] == pytest.approx(1.0)
    assert triple_case_table(1.0, 0, 0, 0, *jkn) == pytest.approx(1.0)


@pytest.mark.parametrize("jkn", [(1, 2, 3), (2, 4, 4), (2, 2, 5), (3, 3, 3), (1, 4, 6)])
def test_case_table_matches_beta_product(jkn):
    p, q, r = 0.7, 1.3, 0.4
    exact, _ = stick_moment_triple(2.0, p, q, r, *jkn)
    assert triple_case_table(2.0, p, q, r, *jkn) == pytest.approx(exact, rel=1e-12)


def test_triple_mc():
    p = sample_stick(1.0, 3, np.random.default_rng(13), 2_000_000)
    m, se = mc(p.lengths[:, 0] * p.lengths[:, 1] * p.lengths[:, 2])
    exact, _ = stick_moment_triple(1.0, 1, 1, 1, 1, 2, 3)
    assert abs(m - exact) < 3 * se


def test_triple_order():
    with pytest.raises(IndexOrder):
        stick_moment_triple(1.0, 1, 1, 1, 2, 1, 3)


def test_remainder_bound_mc():
    rng = np.random.default_rng(14)
    p = sample_stick(1.0, 4, rng, 500_000)
    rem = 1.0 - np.cumsum(p.lengths, axis=1)
    for pp, q, r, k in ((0.5, 0.5, 0.5, 2), (1.0, 0.3, 2.0, 3), (0.2, 1.5, 0.7, 4)):
        v = rem[:, k - 2] ** pp * p.lengths[:, k - 1] ** q * p.lengths[:, 0] ** r
        m, se = mc(v)
        assert m <= remainder_mixed_bound(1.0, pp, q, r, k) + 3 * se
