"""Extended information divergence and f-divergences between measures.

Divergences are values in ``[0, inf]``; ``+inf`` is returned as ``math.inf``.
Boundary atoms (a zero on either side) are resolved by an explicit case split
before any division, so 0/0 never occurs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import rel_entr

from .errors import UnmeasureError
from .measure import as_measure, check_same_support

__all__ = [
    "FDivergenceSpec",
    "KL",
    "REVERSE_KL",
    "kl_extended",
    "kl_terms",
    "kl_poisson_product",
    "f_divergence",
]


def kl_terms(lam, mu) -> np.ndarray:
    """Per-atom terms ``lam*ln(lam/mu) - lam + mu`` of the extended divergence.

    ``lam == 0`` contributes ``mu``; ``lam > 0 == mu`` contributes ``inf``.
    Works on arrays of any (matching) shape.
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    out = np.where(lam == 0, mu, np.inf)
    both = (lam > 0) & (mu > 0)
    lb, mb = lam[both], mu[both]
    # near lam == mu the log1p form lets the leading orders cancel; far from it
    # (lam << mu rounds d to -1) rel_entr keeps the logarithm finite
    d = (lb - mb) / mb
    near = np.abs(d) < 0.5
    vals = rel_entr(lb, mb) - (lb - mb)
    vals[near] = lb[near] * np.log1p(d[near]) - (lb[near] - mb[near])
    out[both] = vals
    # exact zero for equal entries; tiny negatives are rounding
    return np.maximum(out, 0.0)


def kl_extended(lam, mu) -> float:
    """``D(lam || mu) = sum lam_i ln(lam_i/mu_i) - (lam_i - mu_i)`` for arbitrary measures.

    Equals the divergence between the product Poisson distributions with
    these mean vectors, and reduces to the usual KL divergence when both
    measures have total mass one.
    """
    lam, mu = as_measure(lam), as_measure(mu)
    check_same_support(lam, mu)
    terms = kl_terms(lam.weights, mu.weights)
    if np.isinf(terms).any():
        return math.inf
    return math.fsum(terms)


def kl_poisson_product(lam, mu) -> float:
    """``D(Po(lam) || Po(mu))`` for product Poisson laws; same value as :func:`kl_extended`."""
    return kl_extended(lam, mu)


def _log_grid(lo=1e-6, hi=1e6, n=241) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n)


@dataclass(frozen=True)
class FDivergenceSpec:
    """Convex generator ``f`` on ``(0, inf)`` with its boundary values.

    ``f_at_0`` is ``lim_{x->0} f(x)`` and ``fprime_at_inf`` is
    ``lim_{x->inf} f(x)/x``; either may be ``math.inf``.  ``fprime`` and
    ``fsecond`` are optional analytic derivatives used by the projection
    solvers; central differences are used when they are missing.
    """

    f: Callable[[np.ndarray], np.ndarray]
    f_at_0: float
    fprime_at_inf: float
    name: str = "custom"
    fprime: Callable | None = field(default=None, repr=False, compare=False)
    fsecond: Callable | None = field(default=None, repr=False, compare=False)

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.fprime is not None:
            return self.fprime(x)
        h = 1e-6 * np.maximum(x, 1e-3)
        return (self.f(x + h) - self.f(x - h)) / (2 * h)

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.fsecond is not None:
            return self.fsecond(x)
        h = 1e-4 * np.maximum(x, 1e-3)
        return (self.f(x + h) - 2 * self.f(x) + self.f(x - h)) / h**2

    @property
    def strictly_convex(self) -> bool:
        return bool(np.all(self.second_derivative(_log_grid(1e-3, 1e3, 61)) > 0))

    def validate(self, tol: float = 1e-12, rel: float = 1e-4) -> "FDivergenceSpec":
        """Spot-check the generator invariants; raise ``UnmeasureError`` on failure."""
        if abs(float(self.f(np.array([1.0]))[0])) > tol:
            raise UnmeasureError(f"{self.name}: f(1) must be 0")
        xs = _log_grid()
        vals = self.f(xs)
        if np.any(vals < -tol):
            raise UnmeasureError(f"{self.name}: f takes negative values, min {vals.min():.3g}")
        mids = np.sqrt(xs[:-2] * xs[2:])
        chord = (self.f(xs[:-2]) * (xs[2:] - mids) + self.f(xs[2:]) * (mids - xs[:-2])) / (xs[2:] - xs[:-2])
        if np.any(self.f(mids) > chord + tol * np.maximum(1.0, np.abs(chord))):
            raise UnmeasureError(f"{self.name}: f is not convex on the sample grid")
        if math.isfinite(self.f_at_0):
            got = float(self.f(np.array([1e-8]))[0])
            if abs(got - self.f_at_0) > rel * max(1.0, abs(self.f_at_0)):
                raise UnmeasureError(f"{self.name}: f(1e-8)={got} disagrees with f(0)={self.f_at_0}")
        if math.isfinite(self.fprime_at_inf):
            got = float(self.f(np.array([1e8]))[0]) / 1e8
            if abs(got - self.fprime_at_inf) > rel * max(1.0, abs(self.fprime_at_inf)):
                raise UnmeasureError(
                    f"{self.name}: f(1e8)/1e8={got} disagrees with f'(inf)={self.fprime_at_inf}"
                )
        return self


def _kl_f(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0) - (x - 1)


def _rkl_f(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return -np.log(x) + x - 1


KL = FDivergenceSpec(
    f=_kl_f,
    f_at_0=1.0,
    fprime_at_inf=math.inf,
    name="kl",
    fprime=lambda x: np.log(x),
    fsecond=lambda x: 1.0 / x,
)

REVERSE_KL = FDivergenceSpec(
    f=_rkl_f,
    f_at_0=math.inf,
    fprime_at_inf=1.0,
    name="reverse_kl",
    fprime=lambda x: 1.0 - 1.0 / x,
    fsecond=lambda x: 1.0 / x**2,
)

BUILTIN_SPECS = {KL.name: KL, REVERSE_KL.name: REVERSE_KL}


def _inf_times(c: float, x):
    # c*x with the measure-theoretic convention inf*0 = 0
    x = np.asarray(x, dtype=float)
    if math.isinf(c):
        return np.where(x > 0, c, 0.0)
    return c * x


def f_divergence_terms(p, q, spec: FDivergenceSpec) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    out = np.zeros(np.broadcast(p, q).shape)
    inner = (q > 0) & (p > 0)
    out[inner] = q[inner] * spec.f(p[inner] / q[inner])
    killed = (q > 0) & (p == 0)
    out[killed] = _inf_times(spec.f_at_0, q[killed])
    escaped = (q == 0) & (p > 0)
    out[escaped] = _inf_times(spec.fprime_at_inf, p[escaped])
    return out


def f_divergence(p, q, spec: FDivergenceSpec = KL) -> float:
    """``D_f(P, Q) = sum f(p_i/q_i) q_i`` with ``f(x/0)*0 = f'(inf)*x``."""
    p, q = as_measure(p), as_measure(q)
    check_same_support(p, q)
    terms = f_divergence_terms(p.weights, q.weights, spec)
    if np.isinf(terms).any():
        return math.inf
    return max(math.fsum(terms), 0.0)
