"""Exact goodness-of-fit computations for the fair-coin test.

Two sampling models are compared.  In the classical one the number of tosses
``n`` is fixed and ``X ~ bin(n, 1/2)``.  In the Poisson one, heads and tails
are independent Poisson counts, so ``N = X + Y`` is itself random and
``X | N = n ~ bin(n, 1/2)``.  Both lead to the same signed log-likelihood
``G_n(x)``; the Poisson model averages the step functions over ``N``, which
smooths the QQ plot of ``G^2`` against chi-square(1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .divergence import kl_extended
from .errors import UnmeasureError
from .poisson import poisson_cutoff, poisson_pmf

MAX_TRIALS = 10**4


def _check_range(n: int, x: int) -> None:
    if n < 1 or n > MAX_TRIALS:
        raise UnmeasureError(f"n must lie in [1, {MAX_TRIALS}], got {n}")
    if not 0 <= x <= n:
        raise UnmeasureError(f"x must lie in [0, n], got x={x}, n={n}")


def _xlog2x(x: float) -> float:
    # x*ln(2x), 0*ln 0 = 0
    return x * math.log(2 * x) if x > 0 else 0.0


def binom_divergence(n: int, x: int) -> float:
    """``D(bin(n, x/n) || bin(n, 1/2))`` in nats."""
    _check_range(n, x)
    return n * (_xlog2x(x / n) + _xlog2x((n - x) / n))


@dataclass(frozen=True)
class GofStatistic:
    n: int
    x: int
    g: float
    g2: float
    divergence: float


def g_statistic(n: int, x: int) -> GofStatistic:
    """Signed log-likelihood ``G_n(x)``; the sign is negative iff ``x < n/2``."""
    d = binom_divergence(n, x)
    g2 = 2.0 * d
    g = math.sqrt(g2)
    if 2 * x < n:
        g = -g
    return GofStatistic(n=n, x=x, g=g, g2=g2, divergence=d)


def binom_pmf_vector(n: int, p: float) -> np.ndarray:
    """``bin(n, p)`` probabilities for ``k = 0..n`` from the product recurrence.

    Built outward from the mode so no intermediate term underflows before
    it matters, then normalized by its compensated sum: the ratios are
    accurate to a few ulps while the ``lgamma`` value at the mode loses
    digits as ``n`` grows.
    """
    if not 0.0 <= p <= 1.0:
        raise UnmeasureError(f"p must lie in [0, 1], got {p}")
    out = np.zeros(n + 1)
    if p == 0.0:
        out[0] = 1.0
        return out
    if p == 1.0:
        out[n] = 1.0
        return out
    mode = min(int((n + 1) * p), n)
    log_mode = (
        math.lgamma(n + 1) - math.lgamma(mode + 1) - math.lgamma(n - mode + 1)
        + mode * math.log(p) + (n - mode) * math.log1p(-p)
    )
    out[mode] = math.exp(log_mode)
    r = p / (1 - p)
    for k in range(mode + 1, n + 1):
        out[k] = out[k - 1] * r * (n - k + 1) / k
    for k in range(mode - 1, -1, -1):
        out[k] = out[k + 1] / r * (k + 1) / (n - k)
    return out / math.fsum(out)


def binom_cdf(n: int, p: float, k: int) -> float:
    """``Pr(X <= k)`` for ``X ~ bin(n, p)`` by compensated summation."""
    if n < 0 or n > MAX_TRIALS:
        raise UnmeasureError(f"n must lie in [0, {MAX_TRIALS}], got {n}")
    if not 0.0 <= p <= 1.0:
        raise UnmeasureError(f"p must lie in [0, 1], got {p}")
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    pmf = binom_pmf_vector(n, p)
    lower = math.fsum(pmf[: k + 1])
    if lower > 0.5:
        # the complement sums fewer, smaller terms
        return 1.0 - math.fsum(pmf[k + 1:])
    return lower


def normal_cdf(z: float) -> float:
    """Standard normal distribution function."""
    if z == 0:
        return 0.5
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def chi2_1_cdf(t: float) -> float:
    """Chi-square distribution function with one degree of freedom."""
    if t <= 0:
        return 0.0
    return math.erf(math.sqrt(t / 2.0))


@dataclass(frozen=True)
class IntersectionRow:
    k: int
    lower: float
    phi: float
    upper: float
    ok: bool


@dataclass(frozen=True)
class IntersectionReport:
    n: int
    rows: tuple
    violations: tuple

    @property
    def passed(self) -> bool:
        return not self.violations


def intersection_check(n: int, tol: float = 1e-12) -> IntersectionReport:
    """``Pr(X < k) <= Phi(G_n(k)) <= Pr(X <= k)`` for every ``k`` in ``0..n``."""
    if n < 1:
        raise UnmeasureError("n must be positive")
    pmf = binom_pmf_vector(n, 0.5)
    rows = []
    for k in range(n + 1):
        lower = math.fsum(pmf[:k])
        upper = math.fsum(pmf[: k + 1]) if k < n else 1.0
        phi = normal_cdf(g_statistic(n, k).g)
        ok = lower - tol <= phi <= upper + tol
        rows.append(IntersectionRow(k, lower, phi, upper, ok))
    return IntersectionReport(n, tuple(rows), tuple(r for r in rows if not r.ok))


@dataclass(frozen=True)
class QQRow:
    g2: float
    cdf_left: float
    cdf_right: float
    chi2_cdf: float

    @property
    def bracket_distance(self) -> float:
        """Distance from the chi-square value to ``[cdf_left, cdf_right]``."""
        return max(self.cdf_left - self.chi2_cdf, self.chi2_cdf - self.cdf_right, 0.0)

    @property
    def step_deviation(self) -> float:
        """Largest vertical distance between the step and the diagonal at this atom."""
        return max(abs(self.chi2_cdf - self.cdf_left), abs(self.cdf_right - self.chi2_cdf))


@dataclass(frozen=True)
class QQTable:
    """Exact law of ``G^2`` as atoms with left/right cumulative probabilities.

    ``gap`` is the sup distance between the law of ``G^2`` and chi-square(1),
    i.e. the height of the worst QQ step away from the diagonal.
    ``bracket_gap`` is the largest distance of the chi-square value from an
    atom's cumulative bracket; it is zero whenever the intersection
    property holds.
    """

    rows: tuple
    tail_mass: float = 0.0

    @property
    def gap(self) -> float:
        return max(r.step_deviation for r in self.rows)

    @property
    def bracket_gap(self) -> float:
        return max(r.bracket_distance for r in self.rows)

    @property
    def total_probability(self) -> float:
        return self.rows[-1].cdf_right

    def to_csv(self) -> str:
        lines = ["g2,cdf_left,cdf_right,chi2_cdf"]
        for r in self.rows:
            lines.append(f"{r.g2:.12g},{r.cdf_left:.12g},{r.cdf_right:.12g},{r.chi2_cdf:.12g}")
        return "\n".join(lines) + "\n"


def _merge_atoms(values: np.ndarray, weights: np.ndarray, rtol: float = 1e-12) -> tuple[list, list]:
    order = np.argsort(values, kind="stable")
    atoms, masses = [], []
    for v, w in zip(values[order], weights[order]):
        if atoms and abs(v - atoms[-1]) <= rtol * max(1.0, abs(v)):
            masses[-1].append(w)
        else:
            atoms.append(float(v))
            masses.append([w])
    return atoms, [math.fsum(m) for m in masses]


def _qq_table(values: np.ndarray, weights: np.ndarray, tail_mass: float = 0.0) -> QQTable:
    atoms, masses = _merge_atoms(values, weights)
    rows = []
    left_terms: list = []
    for a, m in zip(atoms, masses):
        left = math.fsum(left_terms)
        left_terms.append(m)
        rows.append(QQRow(a, left, math.fsum(left_terms), chi2_1_cdf(a)))
    return QQTable(tuple(rows), tail_mass)


def _g2_values(n: int) -> np.ndarray:
    return np.array([g_statistic(n, x).g2 for x in range(n + 1)])


def classical_qq(n: int) -> QQTable:
    """Exact law of ``G^2`` under ``bin(n, 1/2)`` against chi-square(1)."""
    _check_range(n, 0)
    return _qq_table(_g2_values(n), binom_pmf_vector(n, 0.5))


def poisson_qq(total_intensity: float, n_cutoff: int | None = None, tail_tol: float = 1e-12) -> QQTable:
    """Law of ``G_N(X)^2`` with ``N ~ Po(total_intensity)`` and ``X | N ~ bin(N, 1/2)``.

    The ``N = 0`` outcome carries no evidence and is assigned ``G^2 = 0``.
    """
    if not total_intensity > 0:
        raise UnmeasureError("total intensity must be positive")
    if n_cutoff is None:
        n_cutoff = poisson_cutoff(total_intensity, tail_tol)
    if n_cutoff > MAX_TRIALS:
        raise UnmeasureError(f"cutoff {n_cutoff} exceeds {MAX_TRIALS} trials")
    po = poisson_pmf(total_intensity, n_cutoff, ceiling=tail_tol)
    values = [np.zeros(1)]
    weights = [po.probs[:1]]
    for n in range(1, n_cutoff + 1):
        values.append(_g2_values(n))
        weights.append(po.probs[n] * binom_pmf_vector(n, 0.5))
    return _qq_table(np.concatenate(values), np.concatenate(weights), po.tail_mass)


def poisson_two_sample_divergence(l: int, m: int) -> float:
    """``D(Po(l) x Po(m) || Po(n/2) x Po(n/2))`` with ``n = l + m``."""
    if l < 0 or m < 0:
        raise UnmeasureError("counts must be non-negative")
    if l == 0 and m == 0:
        raise UnmeasureError("no observations: the divergence is undefined")
    n = l + m
    return kl_extended([l, m], [n / 2, n / 2])


@dataclass(frozen=True)
class MachZehnderResult:
    scenario: str
    intensities: tuple
    observation: tuple
    divergence: float
    g: float
    qq: QQTable = field(repr=False)


MZ_SCENARIOS = {
    # both paths open: interference sends every photon to detector 1
    "unblocked": lambda lam: (lam, 0.0),
    # one path blocked: an ideal beam splitter gives equal intensities
    "blocked": lambda lam: (lam, lam),
}


def mach_zehnder(scenario: str = "blocked", intensity: float = 10.0,
                 observation: Sequence[int] | None = None) -> MachZehnderResult:
    """Detector counts of an interferometer as a test of ``lambda = mu``.

    ``intensity`` is the expected count per detector when one path is
    blocked.  ``observation`` defaults to the expected counts rounded to
    integers.
    """
    if scenario not in MZ_SCENARIOS:
        raise UnmeasureError(f"unknown scenario {scenario!r}; choose from {sorted(MZ_SCENARIOS)}")
    lam, mu = MZ_SCENARIOS[scenario](float(intensity))
    if observation is None:
        observation = (int(round(lam)), int(round(mu)))
    l, m = (int(v) for v in observation)
    d = poisson_two_sample_divergence(l, m)
    g = g_statistic(l + m, l).g
    return MachZehnderResult(scenario, (lam, mu), (l, m), d, g, poisson_qq(lam + mu))
