import math

import numpy as np
import pytest

from oracles import charlier_recurrence, krawtchouk_recurrence
from unmeasure import charlier, epsilon_sweep, inequality_scan, krawtchouk, mgf_condition
from unmeasure.errors import ConditionError, UnmeasureError
from unmeasure.poly import orthonormal_poly, stieltjes


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 4.0])
def test_charlier_recurrence_matches_closed_form(lam):
    f = charlier(lam, 3)
    a, b = f.recurrence
    ea, eb = charlier_recurrence(lam, 3)
    np.testing.assert_allclose(a, ea, atol=1e-7)
    # b[0] is the total mass of the truncated grid
    np.testing.assert_allclose(b[1:], eb[1:], rtol=1e-7)


@pytest.mark.parametrize("n,p", [(5, 0.3), (10, 0.2), (20, 0.45)])
def test_krawtchouk_recurrence_matches_closed_form(n, p):
    f = krawtchouk(n, p, 3)
    a, b = f.recurrence
    ea, eb = krawtchouk_recurrence(n, p, 3)
    np.testing.assert_allclose(a, ea, atol=1e-11)
    np.testing.assert_allclose(b[1:], eb[1:], rtol=1e-11)


def test_degree_one_forms():
    for lam in (1.0, 4.0):
        f = charlier(lam)
        np.testing.assert_allclose(f.coefficients, [-math.sqrt(lam), 1 / math.sqrt(lam)], atol=1e-9)
    n, p = 10, 0.2
    f = krawtchouk(n, p)
    s = math.sqrt(n * p * (1 - p))
    np.testing.assert_allclose(f.coefficients, [-n * p / s, 1 / s], atol=1e-12)


def test_third_moments():
    # skewness of the standardized law
    assert charlier(1.0).skewness == pytest.approx(1.0, abs=1e-9)
    assert charlier(4.0).skewness == pytest.approx(0.5, abs=1e-9)
    n, p = 10, 0.2
    assert krawtchouk(n, p).skewness == pytest.approx((1 - 2 * p) / math.sqrt(n * p * (1 - p)), abs=1e-12)


def test_orthonormal_on_grid():
    f = krawtchouk(8, 0.3, 4)
    x, w = f.support, f.measure.weights
    _, _, V = stieltjes(x, w, 4)
    np.testing.assert_allclose((V * w) @ V.T, np.eye(5), atol=1e-12)
    np.testing.assert_allclose(f(x), f.values, atol=1e-9)


def test_uniform_three_point():
    f = orthonormal_poly(np.full(3, 1 / 3), [0, 1, 2], 1)
    np.testing.assert_allclose(f.values, [-math.sqrt(1.5), 0, math.sqrt(1.5)], atol=1e-14)
    with pytest.raises(UnmeasureError):
        orthonormal_poly(np.full(3, 1 / 3), [0, 1, 2], 3)


def test_mgf_condition_against_series():
    f = charlier(1.0)  # f(x) = x - 1
    expect = math.fsum(math.exp(-(x - 1)) * math.exp(-1) / math.factorial(x) for x in range(60))
    assert mgf_condition(None, f, -1.0) == pytest.approx(expect, rel=1e-12)
    assert expect == pytest.approx(math.exp(math.exp(-1)), rel=1e-14)
    with pytest.raises(UnmeasureError):
        mgf_condition(None, f, 0.5)


def test_symmetric_binomial_fails_the_skew_condition():
    with pytest.raises(ConditionError):
        inequality_scan(None, krawtchouk(10, 0.5), samples=100)


def test_unstandardized_function_rejected():
    with pytest.raises(ConditionError):
        inequality_scan(np.full(3, 1 / 3), np.array([0.0, 1.0, 2.0]), samples=10)


@pytest.mark.parametrize("f", [charlier(1.0), charlier(4.0), krawtchouk(10, 0.2), krawtchouk(20, 0.1)],
                         ids=["po1", "po4", "bin10", "bin20"])
def test_scan_finds_no_violation(f):
    r = inequality_scan(None, f, epsilon=0.05, samples=5000, seed=3)
    assert r.clean
    assert r.sampled_min_slack >= -1e-9
    # Q itself is among the tilts and has slack 0
    assert r.tilt_min_slack == pytest.approx(0.0, abs=1e-15)
    assert -0.05 - 1e-12 <= r.worst_mean <= 1e-12


def test_scan_is_deterministic():
    a = inequality_scan(None, charlier(2.0), samples=3000, seed=11).to_dict()
    b = inequality_scan(None, charlier(2.0), samples=3000, seed=11).to_dict()
    assert a == b


def test_sweep_is_nested():
    s = epsilon_sweep(None, krawtchouk(10, 0.2), samples=4000, seed=2)
    slacks = [r.sampled_min_slack for r in s.reports]
    counts = [r.samples for r in s.reports]
    assert all(x >= y for x, y in zip(slacks, slacks[1:]))
    assert counts == sorted(counts)
    assert s.largest_clean_epsilon == 0.2
