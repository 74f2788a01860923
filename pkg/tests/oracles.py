"""Independent reference computations used to freeze expected values.

Nothing here calls into the package; each oracle uses a different route
(series, exact rationals, quadrature, brute-force grids) from the code it
checks.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy import integrate, optimize


def poisson_series_kl(lam: float, mu: float, terms: int = 200) -> float:
    """``sum_i po(i; lam) ln(po(i; lam) / po(i; mu))`` by direct summation."""
    if lam == 0:
        return mu
    total = 0.0
    for i in range(terms):
        log_p = -lam + i * math.log(lam) - math.lgamma(i + 1)
        log_q = -mu + i * math.log(mu) - math.lgamma(i + 1)
        total += math.exp(log_p) * (log_p - log_q)
    return total


def binom_cdf_exact(n: int, k: int) -> Fraction:
    """``Pr(bin(n, 1/2) <= k)`` as an exact rational."""
    return Fraction(sum(math.comb(n, i) for i in range(0, k + 1)), 2**n)


def normal_cdf_quad(z: float) -> float:
    """Standard normal cdf by adaptive quadrature of the density."""
    dens = lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi)
    if z >= 0:
        v, _ = integrate.quad(dens, 0, z, epsabs=1e-14, epsrel=1e-13)
        return 0.5 + v
    v, _ = integrate.quad(dens, z, 0, epsabs=1e-14, epsrel=1e-13)
    return 0.5 - v


def binomial_kl(n: int, a: float, b: float) -> float:
    """``D(bin(n, a) || bin(n, b))`` by summing over outcomes."""
    total = 0.0
    for k in range(n + 1):
        lp = math.log(math.comb(n, k)) + (k * math.log(a) if k else 0) + ((n - k) * math.log1p(-a) if n - k else 0)
        lq = math.log(math.comb(n, k)) + k * math.log(b) + (n - k) * math.log1p(-b)
        total += math.exp(lp) * (lp - lq)
    return total


def tilt_oracle(q, f, target) -> np.ndarray:
    """Normalized exponential tilt of ``q`` whose ``f``-mean is ``target``."""
    q = np.asarray(q, float)
    f = np.asarray(f, float)

    def mean(t):
        w = q * np.exp(t * (f - f.max()))
        return float(w @ f / w.sum()) - target

    t = optimize.brentq(mean, -50, 50, xtol=1e-15)
    w = q * np.exp(t * (f - f.max()))
    return w / w.sum()


def kl_value(p, q) -> float:
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    out = 0.0
    for a, b in zip(p, q):
        out += (a * (math.log(a) - math.log(b)) if a > 0 else 0.0) - a + b
    return out


def reverse_kl_value(p, q) -> float:
    # sum q f(p/q) with f(x) = -ln x + x - 1
    out = 0.0
    for a, b in zip(p, q):
        if b == 0:
            out += a
        elif a == 0:
            return math.inf
        else:
            out += b * (-math.log(a / b) + a / b - 1)
    return out


def zoom_grid_min(objective, lo, hi, steps: int = 1000, rounds: int = 4, shrink: float = 20.0):
    """Minimize a function of one variable on ``[lo, hi]`` by grid search with zoom.

    Starts at step ``(hi-lo)/steps`` (1e-3 on a unit interval) and refines
    the window around the best point until the step is below 1e-6.
    """
    a, b = lo, hi
    best = None
    for _ in range(rounds):
        xs = np.linspace(a, b, steps + 1)
        vals = np.array([objective(x) for x in xs])
        i = int(np.argmin(vals))
        best = (xs[i], vals[i])
        h = (b - a) / steps
        a, b = max(lo, xs[i] - shrink * h), min(hi, xs[i] + shrink * h)
    return best


def zoom_grid_min_2d(objective, box, steps: int = 400, rounds: int = 5, shrink: float = 8.0):
    """Vectorized 2-d grid search with zoom; ``objective`` takes two arrays."""
    (a0, b0), (a1, b1) = box
    lo0, hi0, lo1, hi1 = a0, b0, a1, b1
    best = None
    for _ in range(rounds):
        x = np.linspace(a0, b0, steps + 1)
        y = np.linspace(a1, b1, steps + 1)
        X, Y = np.meshgrid(x, y, indexing="ij")
        V = objective(X, Y)
        i, j = np.unravel_index(np.nanargmin(V), V.shape)
        best = (X[i, j], Y[i, j], V[i, j])
        h0, h1 = (b0 - a0) / steps, (b1 - a1) / steps
        a0, b0 = max(lo0, X[i, j] - shrink * h0), min(hi0, X[i, j] + shrink * h0)
        a1, b1 = max(lo1, Y[i, j] - shrink * h1), min(hi1, Y[i, j] + shrink * h1)
    return best


def reverse_kl_halfspace(q, g, bound) -> np.ndarray:
    """Reverse-KL projection of ``q`` onto ``{sum g p <= bound}`` when active.

    Stationarity ``1 - q/p + eta g = 0`` gives ``p = q / (1 + eta g)``;
    ``eta > 0`` solves ``sum g q / (1 + eta g) = bound``.
    """
    q = np.asarray(q, float)
    g = np.asarray(g, float)
    h = lambda eta: float(np.sum(g * q / (1 + eta * g))) - bound
    eta = optimize.brentq(h, 0.0, 1e8, xtol=1e-15, rtol=1e-15)
    return q / (1 + eta * g)


def gram_schmidt_uniform_012():
    """Orthonormal ``{1, x}`` under the uniform probability on ``{0, 1, 2}``."""
    x = np.array([0.0, 1.0, 2.0])
    return np.ones(3), (x - 1) / math.sqrt(2 / 3)


def charlier_recurrence(lam: float, degree: int):
    """Monic three-term coefficients of the Charlier family."""
    return np.array([lam + k for k in range(degree)]), np.array([1.0] + [lam * k for k in range(1, degree + 1)])


def krawtchouk_recurrence(n: int, p: float, degree: int):
    a = np.array([p * (n - k) + k * (1 - p) for k in range(degree)])
    b = np.array([1.0] + [k * (n - k + 1) * p * (1 - p) for k in range(1, degree + 1)])
    return a, b


def simplex_grid(k: int, step: float = 0.05):
    """All probability vectors on ``k`` points with coordinates in multiples of ``step``."""
    m = round(1 / step)
    for c in itertools.product(range(m + 1), repeat=k - 1):
        if sum(c) <= m:
            yield np.array([*c, m - sum(c)], dtype=float) / m
