"""Orthonormal polynomials of discrete count laws and a sampled check of the
projection inequality ``D(P||Q) >= (E_P f)^2 / 2`` near ``Q``.

Polynomials are built by the Stieltjes procedure directly on the (truncated)
grid of the base law, so orthonormality holds for exactly the measure that
the scan uses.  The classical Charlier and Krawtchouk recurrences serve as
an independent check in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import rel_entr

from .altmin import _tilt_root
from .divergence import kl_extended
from .errors import ConditionError, ConvergenceError, UnmeasureError
from .gof import binom_pmf_vector
from .measure import Measure, as_measure
from .poisson import poisson_pmf

STANDARD_TOL = 1e-10
SKEW_FLOOR = 1e-12
SWEEP_EPSILONS = (0.01, 0.05, 0.1, 0.2)
# the reading of the inequality's hypotheses that every report carries
HYPOTHESES = "E_Q f = 0, E_Q f^2 = 1, E_Q f^3 > 0 and a finite Z(beta) for some beta < 0, assumed jointly"


@dataclass(frozen=True)
class OrthoPoly:
    """Degree-``degree`` member of the orthonormal family of ``measure``.

    ``coefficients[k]`` multiplies ``x**k``.  ``values`` holds the
    polynomial on the grid ``support`` and is what every check uses;
    ``moments`` are ``(E_Q f, E_Q f^2, E_Q f^3)``.
    """

    coefficients: np.ndarray
    base: dict
    degree: int
    moments: tuple
    support: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    measure: Measure = field(repr=False)
    recurrence: tuple = field(repr=False, default=())

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coefficients)

    @property
    def standardized(self) -> bool:
        m1, m2, _ = self.moments
        return abs(m1) <= STANDARD_TOL and abs(m2 - 1) <= STANDARD_TOL

    @property
    def skewness(self) -> float:
        return self.moments[2]


def stieltjes(x: np.ndarray, w: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Monic recurrence ``pi_{k+1} = (x - a_k) pi_k - b_k pi_{k-1}`` for weights ``w`` on ``x``.

    Returns ``(a, b, values)`` with ``values[k]`` the orthonormal polynomial of
    degree ``k`` on the grid.  ``b[0]`` is the total mass.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if degree >= np.count_nonzero(w > 0):
        raise UnmeasureError(f"degree {degree} needs more than {np.count_nonzero(w > 0)} support points")
    a = np.zeros(degree)
    b = np.zeros(degree + 1)
    values = np.zeros((degree + 1, len(x)))
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    norm_prev = 1.0
    for k in range(degree + 1):
        norm = float((cur * cur) @ w)
        b[k] = norm if k == 0 else norm / norm_prev
        values[k] = cur / math.sqrt(norm)
        if k == degree:
            break
        a[k] = float((x * cur * cur) @ w) / norm
        nxt = (x - a[k]) * cur - (b[k] if k > 0 else 0.0) * prev
        # one re-orthogonalization pass against the earlier members
        nxt = nxt - values[: k + 1].T @ ((values[: k + 1] * w) @ nxt)
        prev, cur, norm_prev = cur, nxt, norm
    return a, b, values


def _monomial(a: np.ndarray, b: np.ndarray, degree: int) -> np.ndarray:
    # same recurrence on coefficient vectors, then scale to unit norm
    P = np.polynomial.polynomial
    prev, cur = np.zeros(1), np.ones(1)
    for k in range(degree):
        nxt = P.polysub(P.polymulx(cur), a[k] * cur)
        if k > 0:
            nxt = P.polysub(nxt, b[k] * prev)
        prev, cur = cur, nxt
    return cur / math.sqrt(float(np.prod(b[: degree + 1])))


def orthonormal_poly(Q, support: Sequence[float], degree: int, base: dict | None = None) -> OrthoPoly:
    """Orthonormal polynomial of degree ``degree`` for the measure ``Q`` on ``support``."""
    Q = as_measure(Q)
    x = np.asarray(support, dtype=float)
    if x.shape != (len(Q),):
        raise UnmeasureError("support must give one point per atom")
    if degree < 1:
        raise UnmeasureError("degree must be at least 1")
    a, b, values = stieltjes(x, Q.weights, degree)
    f = values[degree]
    q = Q.weights
    moments = tuple(math.fsum(f**k * q) for k in (1, 2, 3))
    return OrthoPoly(
        coefficients=_monomial(a, b, degree),
        base=dict(base or {"family": "custom"}),
        degree=degree,
        moments=moments,
        support=x,
        values=f,
        measure=Q,
        recurrence=(a, b),
    )


def charlier(lam: float, degree: int = 1) -> OrthoPoly:
    """Orthonormal Charlier polynomial for ``Po(lam)`` on its truncated grid."""
    if not lam > 0 or not math.isfinite(lam):
        raise UnmeasureError(f"Poisson mean must be positive, got {lam}")
    po = poisson_pmf(lam)
    x = np.arange(len(po.probs))
    return orthonormal_poly(Measure(po.probs), x, degree, {"family": "poisson", "lam": float(lam)})


def krawtchouk(n: int, p: float, degree: int = 1) -> OrthoPoly:
    """Orthonormal Krawtchouk polynomial for ``bin(n, p)``."""
    if n < 1:
        raise UnmeasureError("n must be positive")
    if not 0 < p < 1:
        raise UnmeasureError(f"p must lie in (0, 1), got {p}")
    if not 1 <= degree <= n:
        raise UnmeasureError(f"degree must lie in [1, {n}], got {degree}")
    x = np.arange(n + 1)
    return orthonormal_poly(Measure(binom_pmf_vector(n, p)), x, degree,
                            {"family": "binomial", "n": int(n), "p": float(p)})


def _values(Q: Measure, f) -> np.ndarray:
    if isinstance(f, OrthoPoly):
        return f.values
    v = np.asarray(f, dtype=float)
    if v.shape != (len(Q),):
        raise UnmeasureError("f must give one value per atom")
    return v


def mgf_condition(Q, f, beta: float) -> float:
    """``Z(beta) = sum_a exp(beta f(a)) q(a)`` on the grid of ``Q``."""
    if not beta < 0:
        raise UnmeasureError("beta must be negative")
    if Q is None:
        Q = f.measure
    Q = as_measure(Q)
    return math.fsum(np.exp(beta * _values(Q, f)) * Q.weights)


def check_conditions(Q: Measure, f: np.ndarray) -> tuple:
    """Moments of ``f`` under ``Q``; raise ``ConditionError`` if a hypothesis fails."""
    q = Q.weights
    m1, m2, m3 = (math.fsum(f**k * q) for k in (1, 2, 3))
    if abs(m1) > STANDARD_TOL or abs(m2 - 1) > STANDARD_TOL:
        raise ConditionError(f"f is not standardized under Q: E f = {m1:.3g}, E f^2 = {m2:.12g}")
    if not m3 > SKEW_FLOOR:
        raise ConditionError(f"E_Q f^3 = {m3:.3g} is not positive; the inequality's hypothesis is unmet")
    if not math.isfinite(mgf_condition(Q, f, -1.0)):
        raise ConditionError("Z(-1) is not finite")
    return m1, m2, m3


@dataclass(frozen=True)
class ScanReport:
    base: dict
    degree: int
    epsilon: float
    samples: int
    seed: int
    min_slack: float
    worst_case: Measure
    worst_mean: float
    sampled_min_slack: float
    tilt_min_slack: float
    attempts: int
    moments: tuple
    hypotheses: str = HYPOTHESES

    @property
    def clean(self) -> bool:
        return self.min_slack >= -1e-9

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "degree": self.degree,
            "epsilon": self.epsilon,
            "samples": self.samples,
            "seed": self.seed,
            "min_slack": self.min_slack,
            "worst_case": self.worst_case.to_dict(),
            "worst_mean": self.worst_mean,
            "sampled_min_slack": self.sampled_min_slack,
            "tilt_min_slack": self.tilt_min_slack,
            "attempts": self.attempts,
            "moments": list(self.moments),
            "hypotheses": self.hypotheses,
        }


def _row_divergence(P: np.ndarray, q: np.ndarray) -> np.ndarray:
    # rel_entr gives p ln(p/q) with 0 ln 0 = 0
    return np.sum(rel_entr(P, q) - P + q, axis=1)


def _draw(rng: np.random.Generator, H: np.ndarray, q: np.ndarray, f: np.ndarray, eps: float, size: int) -> np.ndarray:
    """Candidate measures ``q (1 + c.H + c_f f) + jitter`` with ``E_P f`` uniform on ``[-eps, 0]``."""
    k, n = H.shape
    c = rng.standard_normal((size, k))
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    c *= 10.0 ** rng.uniform(-4, math.log10(0.5), size)[:, None]
    P = q * (1.0 + c @ H)
    # positive jitter on a random subset of atoms, half of the draws
    mask = (rng.random((size, n)) < 0.3) & (rng.random((size, 1)) < 0.5)
    scale = 10.0 ** rng.uniform(-4, math.log10(0.3), (size, 1))
    P += mask * q * scale * rng.exponential(1.0, (size, n))
    target = -eps * rng.random(size)
    # <f, f>_Q = 1, so adding c_f q f shifts E_P f by exactly c_f
    P += (target - P @ f)[:, None] * (q * f)
    return P


def _tilt_family(q: np.ndarray, f: np.ndarray, eps: float, points: int):
    """Exact minimizers of ``D(P||Q)`` at fixed ``E_P f``: unnormalized tilts ``q exp(-beta f)``."""
    for m in -eps * np.linspace(0.0, 1.0, points):
        beta = _tilt_root(q, f, float(m), normalized=False)
        p = q * np.exp(-beta * f)
        mean = math.fsum(p * f)
        yield p, mean, kl_extended(p, q) - 0.5 * mean**2


def _sampled_batches(q: np.ndarray, fv: np.ndarray, support: np.ndarray, eps: float, samples: int,
                     seed: int, family_degree: int, batch: int):
    """Accepted draws in batches ``(P, means, slacks)``; the attempt count is the generator's return value."""
    deg = min(family_degree, np.count_nonzero(q > 0) - 1)
    _, _, H = stieltjes(support, q, deg)
    rng = np.random.default_rng(seed)
    accepted = attempts = 0
    while accepted < samples:
        if attempts > 100 * max(samples, batch):
            raise ConvergenceError(f"only {accepted} of {samples} draws were admissible")
        P = _draw(rng, H, q, fv, eps, batch)
        attempts += batch
        means = P @ fv
        ok = np.all(P >= 0, axis=1) & (means <= 0) & (means >= -eps)
        P, means = P[ok][: samples - accepted], means[ok][: samples - accepted]
        accepted += len(P)
        if len(P):
            yield P, means, _row_divergence(P, q) - 0.5 * means**2
    return attempts


def _prepare(Q, f, epsilon: float, samples: int):
    if isinstance(f, OrthoPoly) and Q is None:
        Q = f.measure
    Q = as_measure(Q)
    fv = _values(Q, f)
    if not epsilon > 0:
        raise UnmeasureError("epsilon must be positive")
    if samples < 0:
        raise UnmeasureError("samples must be non-negative")
    moments = check_conditions(Q, fv)
    support = f.support if isinstance(f, OrthoPoly) else np.arange(len(Q), dtype=float)
    return Q, fv, support, moments


def _report(Q: Measure, f, eps, samples, seed, sampled, tilt, attempts, moments) -> ScanReport:
    # sampled/tilt are (slack, p, mean); the sampled winner is recomputed with compensated sums
    if sampled[1] is not None:
        mean = math.fsum(sampled[1] * _values(Q, f))
        sampled = (kl_extended(sampled[1], Q.weights) - 0.5 * mean**2, sampled[1], mean)
    worst = tilt if tilt[0] < sampled[0] else sampled
    return ScanReport(
        base=dict(f.base) if isinstance(f, OrthoPoly) else {"family": "custom"},
        degree=f.degree if isinstance(f, OrthoPoly) else -1,
        epsilon=float(eps),
        samples=int(samples),
        seed=int(seed),
        min_slack=float(worst[0]),
        worst_case=Measure(np.array(worst[1]), Q.labels),
        worst_mean=float(worst[2]),
        sampled_min_slack=float(sampled[0]),
        tilt_min_slack=float(tilt[0]),
        attempts=attempts,
        moments=tuple(moments),
    )


def _drain(gen):
    """Iterate a batch generator, returning (batches, return value)."""
    out = []
    while True:
        try:
            out.append(next(gen))
        except StopIteration as stop:
            return out, stop.value or 0


def inequality_scan(Q, f, epsilon: float = 0.05, samples: int = 100_000, seed: int = 0,
                    family_degree: int = 4, batch: int = 10_000, tilt_points: int = 201) -> ScanReport:
    """Search for measures ``P`` with ``E_P f`` in ``[-epsilon, 0]`` and ``D(P||Q) < (E_P f)^2 / 2``.

    ``samples`` random measures are accepted from the perturbation law of
    :func:`_draw` (non-negative, mean constraint met); the family ``H`` is
    the constant plus the orthonormal polynomials of ``Q`` up to
    ``family_degree``, so mass changes are explored.  A deterministic pass
    over the exact minimizers at fixed mean is added.  ``min_slack`` is the
    smallest ``D(P||Q) - (E_P f)^2/2`` seen; a negative value would be a
    counterexample and is returned, not hidden.
    """
    Q, fv, support, moments = _prepare(Q, f, epsilon, samples)
    q = Q.weights
    best = (math.inf, None, 0.0)
    gen = _sampled_batches(q, fv, support, epsilon, samples, seed, family_degree, batch)
    attempts = 0
    while True:
        try:
            P, means, slack = next(gen)
        except StopIteration as stop:
            attempts = stop.value or 0
            break
        i = int(np.argmin(slack))
        if slack[i] < best[0]:
            best = (float(slack[i]), P[i], float(means[i]))
    tilt = min(_tilt_family(q, fv, epsilon, tilt_points), key=lambda r: r[2])
    return _report(Q, f, epsilon, samples, seed, best, (tilt[2], tilt[0], tilt[1]), attempts, moments)


@dataclass(frozen=True)
class SweepReport:
    reports: tuple
    largest_clean_epsilon: float | None


def epsilon_sweep(Q, f, epsilons: Sequence[float] = SWEEP_EPSILONS, samples: int = 20_000,
                  seed: int = 0, family_degree: int = 4, tilt_points: int = 201) -> SweepReport:
    """Scan nested windows ``[-epsilon, 0]`` and report the largest one without a violation.

    One draw of ``samples`` measures is made for the widest window and each
    narrower window reuses the draws that fall inside it, so the minimum
    slack is non-increasing in ``epsilon`` by construction.
    """
    eps_sorted = sorted(float(e) for e in epsilons)
    if not eps_sorted:
        raise UnmeasureError("no epsilon given")
    wide = eps_sorted[-1]
    Q, fv, support, moments = _prepare(Q, f, wide, samples)
    q = Q.weights
    batches, attempts = _drain(_sampled_batches(q, fv, support, wide, samples, seed, family_degree, 10_000))
    P = np.vstack([b[0] for b in batches]) if batches else np.zeros((0, len(q)))
    means = np.concatenate([b[1] for b in batches]) if batches else np.zeros(0)
    slacks = np.concatenate([b[2] for b in batches]) if batches else np.zeros(0)
    tilts = list(_tilt_family(q, fv, wide, tilt_points))
    reports = []
    for eps in eps_sorted:
        inside = means >= -eps
        sampled = (math.inf, None, 0.0)
        if inside.any():
            i = int(np.flatnonzero(inside)[np.argmin(slacks[inside])])
            sampled = (float(slacks[i]), P[i], float(means[i]))
        tilt = min((t for t in tilts if t[1] >= -eps), key=lambda r: r[2])
        reports.append(_report(Q, f, eps, int(inside.sum()), seed, sampled, (tilt[2], tilt[0], tilt[1]),
                               attempts, moments))
    clean = [r.epsilon for r in reports if r.clean]
    return SweepReport(tuple(reports), max(clean) if clean else None)
