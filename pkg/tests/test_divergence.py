import math

import numpy as np
import pytest

from oracles import poisson_series_kl
from unmeasure import KL, REVERSE_KL, FDivergenceSpec, f_divergence, kl_extended, kl_poisson_product
from unmeasure.errors import NegativeWeightError, SupportMismatchError, UnmeasureError


def test_kl_examples():
    assert kl_extended([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert kl_extended([2], [1]) == pytest.approx(2 * math.log(2) - 1, abs=1e-15)
    assert kl_extended([1, 0], [1, 1]) == 1.0


@pytest.mark.parametrize("lam", [0.5, 1, 2, 5])
@pytest.mark.parametrize("mu", [0.5, 1, 2, 5])
def test_kl_matches_poisson_series(lam, mu):
    assert kl_extended([lam], [mu]) == pytest.approx(poisson_series_kl(lam, mu), abs=1e-8)


def test_kl_infinite_and_zero_conventions():
    assert kl_extended([1, 1], [1, 0]) == math.inf
    assert kl_extended([0, 0], [0, 0]) == 0.0
    assert kl_extended([0], [3]) == 3.0


def test_poisson_product_alias():
    assert kl_poisson_product([2, 3], [2, 3]) == 0.0
    assert kl_poisson_product([2, 1], [1, 1]) == pytest.approx(0.386294361, abs=1e-9)
    assert kl_poisson_product([0, 1], [1, 1]) == 1.0


def test_probability_case_is_classical_kl():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = rng.dirichlet(np.ones(5))
        q = rng.dirichlet(np.ones(5))
        classical = math.fsum(p * np.log(p / q))
        assert kl_extended(p, q) == pytest.approx(classical, abs=1e-13)


def test_errors():
    with pytest.raises(SupportMismatchError):
        kl_extended([1], [1, 2])
    with pytest.raises(NegativeWeightError):
        kl_extended([-1], [1])


def test_f_divergence_conventions():
    assert f_divergence([0.2, 0.8], [0.2, 0.8], KL) == 0.0
    assert f_divergence([1, 0], [0.5, 0.5], REVERSE_KL) == math.inf
    assert f_divergence([0.5, 0.5, 0.5], [0, 0.5, 0.5], REVERSE_KL) == pytest.approx(0.5, abs=1e-15)
    # KL generator with q = 0 < p is infinite through f'(inf) = inf
    assert f_divergence([1, 1], [1, 0], KL) == math.inf


def test_f_divergence_kl_equals_extended():
    rng = np.random.default_rng(7)
    for _ in range(200):
        k = rng.integers(1, 9)
        p = rng.exponential(size=k) * (rng.random(k) < 0.8)
        q = rng.exponential(size=k) + 1e-3
        assert f_divergence(p, q, KL) == pytest.approx(kl_extended(p, q), abs=1e-12)


def test_builtin_specs_validate():
    KL.validate()
    REVERSE_KL.validate()
    assert KL.strictly_convex and REVERSE_KL.strictly_convex


def test_spec_validation_rejects_bad_generators():
    with pytest.raises(UnmeasureError):
        FDivergenceSpec(lambda x: x - 1, 1.0, 1.0).validate()  # negative below 1
    with pytest.raises(UnmeasureError):
        FDivergenceSpec(lambda x: (x - 1) ** 2, 2.0, math.inf).validate()  # wrong f(0)
    with pytest.raises(UnmeasureError):
        FDivergenceSpec(lambda x: np.sqrt(np.abs(x - 1)), 1.0, 0.0).validate()  # not convex


def test_custom_spec_pearson_chi2():
    spec = FDivergenceSpec(lambda x: (x - 1) ** 2, 1.0, math.inf, name="chi2").validate()
    p, q = np.array([0.2, 0.8]), np.array([0.5, 0.5])
    expect = math.fsum((p - q) ** 2 / q)
    assert f_divergence(p, q, spec) == pytest.approx(expect, abs=1e-14)
    assert f_divergence([0, 2], [1, 2], spec) == pytest.approx(1.0, abs=1e-15)
    assert f_divergence([1, 2], [0, 2], spec) == math.inf
