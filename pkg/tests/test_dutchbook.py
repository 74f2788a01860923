from fractions import Fraction

import numpy as np
import pytest

from oracles import simplex_grid
from unmeasure import DichotomyCertificate, PayoffSystem, decide, verify
from unmeasure.dutchbook import ARBITRAGE, MEASURE, simplex
from unmeasure.errors import CertificateError, InfeasibleError, UnmeasureError


def test_sure_loss_example():
    X = [[-1, -2], [0.5, -1]]
    c = decide(X)
    assert c.branch == ARBITRAGE and verify(X, c)
    assert c.margin > 0


def test_fair_bet_has_a_measure():
    # betting either side at even odds: only the uniform measure balances both
    X = [[1, -1], [-1, 1]]
    c = decide(X)
    assert c.branch == MEASURE and verify(X, c)
    assert c.measure == (Fraction(1, 2), Fraction(1, 2))
    assert c.margin == 0 and c.boundary


def test_strict_measure_is_not_boundary():
    c = decide([[1, 2], [3, 0.5]])
    assert c.branch == MEASURE and not c.boundary and c.margin > 0


def test_opposed_bets_are_a_sure_loss():
    X = [[1, -2], [-2, 1]]
    c = decide(X)
    assert c.branch == ARBITRAGE and verify(X, c)
    # equal stakes already lose one unit on each outcome
    assert verify(X, DichotomyCertificate(ARBITRAGE, Fraction(1), weights=(Fraction(1), Fraction(1))))


def test_negative_payoff_everywhere_is_a_sure_loss():
    c = decide([[-1, -1, -1]])
    assert c.branch == ARBITRAGE


def test_random_systems_certify():
    rng = np.random.default_rng(7)
    branches = set()
    for _ in range(200):
        n, k = rng.integers(1, 9, 2)
        X = rng.uniform(-1, 1, (n, k))
        c = decide(X)
        assert verify(X, c)
        branches.add(c.branch)
    assert branches == {ARBITRAGE, MEASURE}


@pytest.mark.parametrize("seed", range(30))
def test_brute_force_grid_agrees(seed):
    # sure loss iff no probability vector gives all payoffs >= 0; check on a grid
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    X = rng.integers(-4, 5, (int(rng.integers(1, 4)), k)).astype(float)
    c = decide(X)
    best = max(np.min(X @ p) for p in simplex_grid(k))
    if c.branch == ARBITRAGE:
        assert best < 0
    elif best < 0:
        # grid too coarse to see the measure: it must be in a thin sliver
        assert np.min(X @ np.array([float(v) for v in c.measure])) >= 0
    else:
        assert best >= 0


def test_scale_invariance():
    rng = np.random.default_rng(1)
    for _ in range(20):
        X = rng.integers(-3, 4, (3, 4)).astype(float)
        a = decide(X)
        b = decide(X * 8.0)
        assert a.branch == b.branch
        assert verify(X * 8.0, a)


def test_corrupted_certificates_rejected():
    X = [[-1, -2], [0.5, -1]]
    c = decide(X)
    bad = DichotomyCertificate(ARBITRAGE, c.margin, weights=(Fraction(1), Fraction(-1)))
    assert not verify(X, bad)
    assert not verify([[1, -1]], DichotomyCertificate(MEASURE, Fraction(0), measure=(Fraction(-1), Fraction(2))))
    assert not verify([[1, -3]], DichotomyCertificate(MEASURE, Fraction(0), measure=(Fraction(1, 2), Fraction(1, 2))))
    with pytest.raises(CertificateError):
        verify(X, DichotomyCertificate(ARBITRAGE, Fraction(0), weights=(Fraction(1),)))
    with pytest.raises(CertificateError):
        DichotomyCertificate.from_dict({"branch": "maybe"})


def test_certificate_round_trip():
    X = [[1, 2, -3], [0, -1, 1]]
    c = decide(X)
    d = DichotomyCertificate.from_dict(c.to_dict())
    assert d == c and verify(X, d)


def test_payoff_csv():
    P = PayoffSystem.from_csv("a,b,c\n1,2,3\n-1,0,0.5\n")
    assert P.shape == (2, 3)
    with pytest.raises(UnmeasureError):
        PayoffSystem.from_csv("1,2\n3\n")
    with pytest.raises(UnmeasureError):
        PayoffSystem([[np.inf, 0]])


def test_exact_simplex():
    x, v = simplex([[1, 1, 1]], [4], [-1, -2, 0])
    assert v == -8 and x == [0, 4, 0]
    with pytest.raises(InfeasibleError):
        simplex([[1, 1]], [-1], [0, 0])
    with pytest.raises(UnmeasureError):
        simplex([[1, -1]], [0], [-1, 0])
