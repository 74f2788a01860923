import math

import numpy as np
import pytest
from scipy import stats

from unmeasure import (
    CountDistribution,
    bernoulli_sum,
    bernoulli_vector,
    binomial_pmf,
    convolve,
    convolve_power,
    kl_extended,
    maxent_check,
    poisson_pmf,
    product_poisson,
    thin,
    thin_divergence_identity,
    thin_law_experiment,
    total_variation,
)
from unmeasure.errors import GridSizeError, MeanMismatchError, UnmeasureError
from unmeasure.poisson import kl, point_mass, poisson_entropy


def test_poisson_pmf_examples():
    z = poisson_pmf(0)
    assert z.probs.tolist() == [1.0]
    assert poisson_pmf(1).probs[0] == pytest.approx(math.exp(-1), rel=1e-15)
    po = poisson_pmf(20)
    assert po.mean()[0] == pytest.approx(20, abs=1e-9)
    assert po.tail_mass <= 1e-12
    np.testing.assert_allclose(po.probs, stats.poisson.pmf(np.arange(len(po.probs)), 20), rtol=1e-12, atol=1e-300)
    with pytest.raises(UnmeasureError):
        poisson_pmf(-1)


def test_large_mean_pmf_is_finite():
    po = poisson_pmf(900)
    assert np.all(np.isfinite(po.probs))
    assert po.probs.sum() + po.tail_mass == pytest.approx(1, abs=1e-12)


def test_count_distribution_invariant():
    with pytest.raises(UnmeasureError):
        CountDistribution(np.array([0.5, 0.4]))
    d = CountDistribution(np.array([0.5, 0.4]), 0.1)
    back = CountDistribution.from_json(d.to_json())
    np.testing.assert_array_equal(back.probs, d.probs)
    assert back.tail_mass == d.tail_mass


def test_product_poisson():
    z = product_poisson([0, 0])
    assert z.probs.shape == (1, 1) and z.probs[0, 0] == 1
    P = product_poisson([1, 2])
    rng = np.random.default_rng(0)
    for _ in range(5):
        i, j = rng.integers(0, 6, 2)
        assert P.probs[i, j] == pytest.approx(stats.poisson.pmf(i, 1) * stats.poisson.pmf(j, 2), rel=1e-12)
    assert P.entropy() == pytest.approx(poisson_pmf(1).entropy() + poisson_pmf(2).entropy(), abs=1e-10)


def test_grid_guard():
    with pytest.raises(GridSizeError):
        product_poisson([50] * 6)


def test_thin_identity_and_zero():
    P = binomial_pmf(5, 0.3)
    assert total_variation(thin(P, 1.0), P) <= 1e-15
    Z = thin(P, 0.0)
    assert Z.probs[0] == pytest.approx(1, abs=1e-15)


def test_thin_poisson_and_binomial():
    assert total_variation(thin(poisson_pmf(3), 0.4), poisson_pmf(1.2)) <= 1e-10
    assert total_variation(thin(binomial_pmf(20, 0.3), 0.5), binomial_pmf(20, 0.15)) <= 1e-11


def test_thin_semigroup_and_mean():
    P = bernoulli_sum([[0.3, 0.2], [0.1, 0.6], [0.5, 0.5]])
    a, b = 0.7, 0.4
    assert total_variation(thin(thin(P, a), b), thin(P, a * b)) <= 1e-11
    np.testing.assert_allclose(thin(P, a).mean(), a * P.mean(), atol=1e-10)


def test_thin_data_processing():
    rng = np.random.default_rng(5)
    for _ in range(10):
        P = CountDistribution(rng.dirichlet(np.ones(6)))
        Q = CountDistribution(rng.dirichlet(np.ones(6)))
        alpha = rng.random()
        assert kl(thin(P, alpha), thin(Q, alpha)) <= kl(P, Q) + 1e-12


def test_convolve_power():
    P = CountDistribution(np.array([0.2, 0.5, 0.3]))
    assert total_variation(convolve_power(P, 1), P) == 0.0
    five = convolve_power(point_mass([1]), 5)
    assert five.probs[5] == 1.0 and five.probs.sum() == 1.0
    rng = np.random.default_rng(1)
    R = CountDistribution(rng.dirichlet(np.ones(3)))
    for n in (2, 3, 7, 16):
        assert convolve_power(R, n).mean()[0] == pytest.approx(n * R.mean()[0], abs=1e-9)
    # repeated squaring agrees with sequential convolution
    seq = R
    for _ in range(6):
        seq = convolve(seq, R)
    assert total_variation(convolve_power(R, 7), seq) <= 1e-14


def test_bernoulli_sum():
    single = bernoulli_sum([[0.3, 0.7]])
    np.testing.assert_allclose(single.probs, bernoulli_vector([0.3, 0.7]).probs)
    two = bernoulli_sum([[0.5, 0.5], [0.5, 0.5]])
    assert two.probs[0, 2] == pytest.approx(0.25)
    assert two.probs[1, 1] == pytest.approx(0.5)
    assert two.probs[2, 0] == pytest.approx(0.25)
    cfg = [[0.1, 0.2], [0.3, 0.1], [0.25, 0.25]]
    np.testing.assert_allclose(bernoulli_sum(cfg).mean(), np.sum(cfg, axis=0), atol=1e-12)
    with pytest.raises(UnmeasureError):
        bernoulli_sum([[0.7, 0.7]])


def test_thin_law_poisson_fixed_point():
    rows = thin_law_experiment(product_poisson([0.5, 0.5]), [0.5, 0.5], [1, 2, 4, 8])
    assert max(r.divergence for r in rows) <= 1e-10


def test_thin_law_bernoulli_decreases():
    lam = [0.5, 0.5]
    rows = thin_law_experiment(bernoulli_vector(lam), lam, [1, 2, 4, 8, 16, 32])
    d = [r.divergence for r in rows]
    assert d[0] == pytest.approx(1.0, abs=1e-12)  # D(P || Po) for a fair two-point vector
    assert all(x > y for x, y in zip(d, d[1:]))
    h_po = poisson_entropy(lam)
    assert abs(rows[-1].entropy - h_po) < abs(rows[0].entropy - h_po)


def test_thin_law_mean_mismatch():
    with pytest.raises(MeanMismatchError):
        thin_law_experiment(bernoulli_vector([0.5, 0.5]), [0.4, 0.5], [1])


def test_maxent():
    fam = [[[0.5]], [[0.25]] * 2, [[0.1]] * 5]
    r = maxent_check([0.5], fam)
    assert r.passed
    assert all(m > 0 for m in r.margins)
    assert r.margins[0] > r.margins[1] > r.margins[2]
    assert maxent_check([0.5], []).passed
    with pytest.raises(MeanMismatchError):
        maxent_check([0.5], [[[0.4]]])


def test_thin_divergence_identity():
    r = thin_divergence_identity([0.3, 0.7], [0.5, 0.5], [1, 2, 3, 4])
    assert r.passed and r.max_error <= 1e-8
    r = thin_divergence_identity([1, 0], [0.5, 0.5], [1, 2, 3])
    assert r.base_divergence == pytest.approx(math.log(2), abs=1e-12)
    assert r.poisson_divergence == pytest.approx(math.log(2), abs=1e-12)
    assert r.passed
    same = thin_divergence_identity([0.2, 0.8], [0.2, 0.8], [1, 2])
    assert same.base_divergence == 0 and same.max_error == 0


def test_thin_divergence_requires_base_vectors():
    with pytest.raises(UnmeasureError):
        thin_divergence_identity([0.3, 0.3], [0.5, 0.5], [1])


def test_kl_to_poisson_equals_extended_on_bernoulli():
    # D(P || Po(lam)) for a Bernoulli vector, checked against a direct sum
    lam = np.array([0.2, 0.3])
    P = bernoulli_vector(lam)
    po = product_poisson(lam)
    direct = 0.0
    for idx, p in np.ndenumerate(P.probs):
        if p > 0:
            direct += p * math.log(p / po.probs[idx])
    assert kl(P, po) == pytest.approx(direct, abs=1e-12)
    assert kl_extended([1.0], [1.0]) == 0.0


def test_bernoulli_vector_rounding_shortfall_has_no_origin_mass():
    p = np.random.default_rng(3).dirichlet(np.ones(3), 20)
    for row in p:
        assert bernoulli_vector(row).probs[0, 0, 0] == 0.0
    assert bernoulli_vector([0.3, 0.2]).probs[0, 0] == pytest.approx(0.5, abs=1e-15)
