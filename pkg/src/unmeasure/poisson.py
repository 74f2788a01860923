"""Exact computations with count distributions on truncated grids of N_0^k.

A :class:`CountDistribution` stores probabilities on the box
``[0..c_1] x ... x [0..c_k]`` together with ``tail_mass``, the probability
that is not represented on the grid.  Every operation propagates the tail
explicitly, so a reported ``tail_mass`` bounds the error of anything computed
from the grid.

The module covers Poisson laws and their products, binomial thinning,
convolution powers, Bernoulli sums, and the three experiments around them:
the law of thin numbers, maximum entropy of Bernoulli sums and preservation
of divergence under thin-convolve.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal, special, stats

from .divergence import kl_extended, kl_terms
from .errors import GridSizeError, MeanMismatchError, UnmeasureError
from .measure import as_measure

MAX_CELLS = 10**7
TAIL_CEILING = 1e-12
# per-dimension truncation for auto cutoffs
TRIM_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class CountDistribution:
    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim == 0:
            raise UnmeasureError("probs must have at least one dimension")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise UnmeasureError("probabilities must be finite and non-negative")
        if p.size > MAX_CELLS:
            raise GridSizeError(f"grid of {p.size} cells exceeds {MAX_CELLS}")
        tail = float(self.tail_mass)
        if tail < 0:
            raise UnmeasureError("tail_mass must be non-negative")
        total = math.fsum(p.ravel()) + tail
        if abs(total - 1.0) > 1e-12:
            raise UnmeasureError(f"probabilities plus tail sum to {total!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "tail_mass", tail)

    @property
    def dims(self) -> int:
        return self.probs.ndim

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return tuple(s - 1 for s in self.probs.shape)

    def mean(self) -> np.ndarray:
        """Mean vector of the on-grid part."""
        out = np.empty(self.dims)
        for axis in range(self.dims):
            marg = self.marginal(axis)
            out[axis] = math.fsum(np.arange(marg.size) * marg)
        return out

    def marginal(self, axis: int) -> np.ndarray:
        others = tuple(i for i in range(self.dims) if i != axis)
        return self.probs.sum(axis=others) if others else self.probs.copy()

    def entropy(self) -> float:
        p = self.probs[self.probs > 0]
        return -math.fsum(p * np.log(p))

    def padded(self, cutoffs: Sequence[int]) -> np.ndarray:
        """Probabilities zero-padded (never cropped) to a larger box."""
        cutoffs = tuple(cutoffs)
        if len(cutoffs) != self.dims or any(c < s for c, s in zip(cutoffs, self.cutoffs)):
            raise UnmeasureError("padding can only enlarge the grid")
        out = np.zeros(tuple(c + 1 for c in cutoffs))
        out[tuple(slice(0, s + 1) for s in self.cutoffs)] = self.probs
        return out

    def to_dict(self) -> dict:
        return {
            "dims": self.dims,
            "cutoffs": list(self.cutoffs),
            "probs": self.probs.ravel(order="C").tolist(),
            "tail_mass": self.tail_mass,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "CountDistribution":
        shape = tuple(c + 1 for c in d["cutoffs"])
        if len(shape) != d.get("dims", len(shape)):
            raise UnmeasureError("dims does not match cutoffs")
        return cls(np.asarray(d["probs"], dtype=float).reshape(shape, order="C"), d.get("tail_mass", 0.0))

    @classmethod
    def from_json(cls, s: str) -> "CountDistribution":
        return cls.from_dict(json.loads(s))


def _renormalized(probs: np.ndarray, tail: float) -> CountDistribution:
    # absorb float drift (~1e-16) into the tail so the invariant holds exactly
    drift = 1.0 - (math.fsum(probs.ravel()) + tail)
    return CountDistribution(probs, max(tail + drift, 0.0) if abs(drift) < 1e-12 else tail)


def point_mass(at: Sequence[int]) -> CountDistribution:
    at = tuple(int(a) for a in at)
    p = np.zeros(tuple(a + 1 for a in at))
    p[at] = 1.0
    return CountDistribution(p)


def poisson_cutoff(lam: float, tol: float = TRIM_TOL) -> int:
    """Smallest ``m`` with ``Pr(Po(lam) > m) <= tol``."""
    if lam == 0:
        return 0
    m = int(max(lam + 10 * math.sqrt(lam) + 10, 20))
    while stats.poisson.sf(m, lam) > tol:
        m *= 2
    lo, hi = 0, m
    while lo < hi:
        mid = (lo + hi) // 2
        if stats.poisson.sf(mid, lam) <= tol:
            hi = mid
        else:
            lo = mid + 1
    return lo


def poisson_pmf(lam: float, cutoff: int | None = None, ceiling: float = TAIL_CEILING) -> CountDistribution:
    """Truncated ``Po(lam)`` by the recurrence ``p_i = p_{i-1} * lam / i``.

    With ``cutoff=None`` the grid is extended until the upper tail is below
    ``TRIM_TOL``.  An explicit cutoff whose tail exceeds ``ceiling`` is
    rejected; pass ``ceiling=1.0`` to allow coarse grids.
    """
    if lam < 0 or not math.isfinite(lam):
        raise UnmeasureError(f"Poisson mean must be finite and non-negative, got {lam}")
    if cutoff is None:
        cutoff = poisson_cutoff(lam)
    if lam == 0:
        p = np.zeros(cutoff + 1)
        p[0] = 1.0
        return CountDistribution(p)
    i = np.arange(1, cutoff + 1)
    if lam < 600:
        p = np.empty(cutoff + 1)
        p[0] = math.exp(-lam)
        p[1:] = p[0] * np.cumprod(lam / i)
    else:
        # e^{-lam} underflows; same recurrence carried in log space
        p = np.exp(np.concatenate([[-lam], -lam + np.cumsum(np.log(lam / i))]))
    tail = float(stats.poisson.sf(cutoff, lam))
    if tail > ceiling:
        raise UnmeasureError(f"cutoff {cutoff} leaves tail mass {tail:.3g} > {ceiling:.3g}")
    return _renormalized(p, tail)


def poisson_logpmf(j: np.ndarray, lam: float) -> np.ndarray:
    j = np.asarray(j, dtype=float)
    if lam == 0:
        return np.where(j == 0, 0.0, -np.inf)
    return -lam + j * math.log(lam) - special.gammaln(j + 1)


def product_poisson(lam, cutoffs: Sequence[int] | None = None, ceiling: float = TAIL_CEILING) -> CountDistribution:
    """``Po(lam_1) x ... x Po(lam_k)`` on a box grid."""
    lam = as_measure(lam).weights
    if cutoffs is None:
        cutoffs = [None] * lam.size
    if len(cutoffs) != lam.size:
        raise UnmeasureError("one cutoff per coordinate is required")
    margs = [poisson_pmf(l, c, ceiling) for l, c in zip(lam, cutoffs)]
    cells = math.prod(m.probs.size for m in margs)
    if cells > MAX_CELLS:
        raise GridSizeError(f"product grid of {cells} cells exceeds {MAX_CELLS}")
    probs = margs[0].probs
    for m in margs[1:]:
        probs = np.multiply.outer(probs, m.probs)
    inside = math.fsum(math.log1p(-m.tail_mass) for m in margs)
    return _renormalized(probs, -math.expm1(inside))


def binomial_pmf(n: int, p: float) -> CountDistribution:
    if n < 0 or not 0 <= p <= 1:
        raise UnmeasureError("binomial needs n >= 0 and p in [0, 1]")
    return _renormalized(stats.binom.pmf(np.arange(n + 1), n, p), 0.0)


def _thinning_kernel(cutoff: int, alpha: float) -> np.ndarray:
    # K[m, j] = C(m, j) alpha^j (1-alpha)^(m-j), rows are stochastic
    m = np.arange(cutoff + 1)[:, None]
    j = np.arange(cutoff + 1)[None, :]
    with np.errstate(invalid="ignore"):
        k = stats.binom.pmf(j, m, alpha)
    return np.nan_to_num(k)


def thin(P: CountDistribution, alpha: float) -> CountDistribution:
    """Binomial ``alpha``-thinning, applied to each coordinate independently.

    Mass beyond the grid stays unaccounted, so ``tail_mass`` is unchanged.
    """
    if not 0.0 <= alpha <= 1.0:
        raise UnmeasureError(f"thinning probability must lie in [0, 1], got {alpha}")
    out = P.probs
    for axis, c in enumerate(P.cutoffs):
        k = _thinning_kernel(c, alpha)
        out = np.moveaxis(np.tensordot(out, k, axes=([axis], [0])), -1, axis)
    return _renormalized(np.maximum(out, 0.0), P.tail_mass)


def _trim(probs: np.ndarray, tail: float, tol: float) -> tuple[np.ndarray, float]:
    """Crop each axis at the smallest cutoff whose marginal upper tail is <= tol."""
    sl = []
    for axis in range(probs.ndim):
        others = tuple(i for i in range(probs.ndim) if i != axis)
        marg = probs.sum(axis=others) if others else probs
        upper = np.cumsum(marg[::-1])[::-1]  # upper[m] = Pr(X_axis >= m)
        keep = np.flatnonzero(upper > tol)
        last = int(keep[-1]) if keep.size else 0
        sl.append(slice(0, last + 1))
    cropped = probs[tuple(sl)]
    dropped = math.fsum(probs.ravel()) - math.fsum(cropped.ravel())
    return cropped, tail + max(dropped, 0.0)


def convolve(P: CountDistribution, Q: CountDistribution, trim_tol: float | None = None) -> CountDistribution:
    """Law of ``X + Y`` for independent ``X ~ P``, ``Y ~ Q`` (direct summation)."""
    if P.dims != Q.dims:
        raise UnmeasureError("dimension mismatch")
    shape = tuple(a + b - 1 for a, b in zip(P.probs.shape, Q.probs.shape))
    if math.prod(shape) > MAX_CELLS:
        raise GridSizeError(f"convolution grid {shape} exceeds {MAX_CELLS} cells")
    probs = np.maximum(signal.convolve(P.probs, Q.probs, mode="full", method="direct"), 0.0)
    tail = -math.expm1(math.log1p(-P.tail_mass) + math.log1p(-Q.tail_mass))
    if trim_tol is not None:
        probs, tail = _trim(probs, tail, trim_tol)
    return _renormalized(probs, tail)


def convolve_power(P: CountDistribution, n: int, trim_tol: float | None = TRIM_TOL) -> CountDistribution:
    """``P^{*n}`` by repeated squaring.

    After every convolution each axis is cropped where its marginal upper
    tail drops below ``trim_tol`` (moved into ``tail_mass``); ``None`` keeps
    the full support.
    """
    if n < 1 or int(n) != n:
        raise UnmeasureError(f"convolution power must be a positive integer, got {n}")
    result = None
    base = P
    n = int(n)
    while True:
        if n & 1:
            result = base if result is None else convolve(result, base, trim_tol)
        n >>= 1
        if not n:
            return result
        base = convolve(base, base, trim_tol)


def _aligned(P: CountDistribution, Q: CountDistribution) -> tuple[np.ndarray, np.ndarray]:
    if P.dims != Q.dims:
        raise UnmeasureError("dimension mismatch")
    cut = tuple(max(a, b) for a, b in zip(P.cutoffs, Q.cutoffs))
    return P.padded(cut), Q.padded(cut)


def total_variation(P: CountDistribution, Q: CountDistribution) -> float:
    """Upper bound on TV: on-grid half L1 distance plus half of both tails."""
    p, q = _aligned(P, Q)
    return 0.5 * math.fsum(np.abs(p - q).ravel()) + 0.5 * (P.tail_mass + Q.tail_mass)


def kl(P: CountDistribution, Q: CountDistribution) -> float:
    """Divergence between the on-grid parts (extended form, so defects show up)."""
    p, q = _aligned(P, Q)
    t = kl_terms(p, q)
    return math.inf if np.isinf(t).any() else math.fsum(t.ravel())


def kl_to_product_poisson(P: CountDistribution, lam) -> float:
    """``D(P || Po(lam))`` with the Poisson log-pmf evaluated analytically.

    Analytic log-probabilities avoid underflow of far grid cells; atoms
    where ``P`` vanishes contribute their Poisson mass.
    """
    lam = as_measure(lam).weights
    if lam.size != P.dims:
        raise UnmeasureError("mean vector length differs from dimension")
    logq = sum(
        np.expand_dims(poisson_logpmf(np.arange(c + 1), l), tuple(i for i in range(P.dims) if i != ax))
        for ax, (l, c) in enumerate(zip(lam, P.cutoffs))
    )
    p = P.probs
    pos = p > 0
    if np.any(np.isneginf(logq[pos])):
        return math.inf
    q = np.exp(logq)
    terms = np.where(pos, 0.0, q)
    pp, lq = p[pos], logq[pos]
    terms[pos] = pp * (np.log(pp) - lq) - pp + np.exp(lq)
    off_grid_q = -math.expm1(math.fsum(math.log1p(-stats.poisson.sf(c, l)) if l > 0 else 0.0
                                       for l, c in zip(lam, P.cutoffs)))
    # extended terms + Po's off-grid mass - P's tail == plain sum of p*ln(p/q) on the grid
    return max(math.fsum(terms.ravel()) + off_grid_q - P.tail_mass, 0.0)


def bernoulli_vector(p) -> CountDistribution:
    """Law of a random vector equal to base vector ``e_i`` with probability ``p_i``.

    If ``sum(p) < 1`` the remaining mass sits at the origin (an ordinary
    Bernoulli variable in one dimension).
    """
    p = as_measure(p).weights
    s = math.fsum(p)
    if s > 1 + 1e-12:
        raise UnmeasureError(f"Bernoulli vector probabilities sum to {s} > 1")
    k = p.size
    probs = np.zeros((2,) * k)
    # a shortfall within rounding of 1 is not origin mass
    probs[(0,) * k] = 1.0 - s if s < 1 - 1e-12 else 0.0
    for i, pi in enumerate(p):
        idx = [0] * k
        idx[i] = 1
        probs[tuple(idx)] = pi
    return _renormalized(probs, 0.0)


def bernoulli_sum(p_list: Sequence) -> CountDistribution:
    """Exact law of a sum of independent Bernoulli vectors."""
    if not p_list:
        raise UnmeasureError("need at least one summand")
    out = bernoulli_vector(p_list[0])
    for p in p_list[1:]:
        nxt = bernoulli_vector(p)
        if nxt.dims != out.dims:
            raise UnmeasureError("summands differ in dimension")
        out = convolve(out, nxt)
    return out


@dataclass(frozen=True)
class ThinLawRow:
    n: int
    divergence: float
    total_variation: float
    entropy: float
    mean: tuple
    tail_mass: float


def thin_convolve(P: CountDistribution, n: int, trim_tol: float | None = TRIM_TOL) -> CountDistribution:
    """``T_{1/n}(P^{*n})``."""
    return thin(convolve_power(P, n, trim_tol), 1.0 / n)


def thin_law_experiment(P: CountDistribution, lam, n_list: Sequence[int], mean_tol: float = 1e-9) -> list[ThinLawRow]:
    """Distance of ``T_{1/n}(P^{*n})`` from ``Po(lam)`` for each ``n``.

    Requires ``mean(P) == lam``; each row also records the mean of the
    thinned power, which must stay ``lam``.
    """
    lam_m = as_measure(lam)
    lam_v = lam_m.weights
    if lam_v.size != P.dims or np.max(np.abs(P.mean() - lam_v)) > mean_tol:
        raise MeanMismatchError(f"mean of P is {P.mean()}, expected {lam_v}")
    rows = []
    for n in n_list:
        T = thin_convolve(P, n)
        m = T.mean()
        if np.max(np.abs(m - lam_v)) > 1e-8:
            raise MeanMismatchError(f"n={n}: thinned mean {m} drifted from {lam_v}")
        po = product_poisson(lam_m, [max(c, poisson_cutoff(l)) for c, l in zip(T.cutoffs, lam_v)])
        rows.append(
            ThinLawRow(
                n=int(n),
                divergence=kl_to_product_poisson(T, lam_m),
                total_variation=total_variation(T, po),
                entropy=T.entropy(),
                mean=tuple(m.tolist()),
                tail_mass=T.tail_mass,
            )
        )
    return rows


def poisson_entropy(lam) -> float:
    """Entropy of ``Po(lam)`` (product over coordinates) on the auto grid."""
    lam_v = as_measure(lam).weights
    return math.fsum(poisson_pmf(l).entropy() for l in lam_v)


@dataclass(frozen=True)
class MaxentReport:
    poisson_entropy: float
    entropies: tuple
    margins: tuple
    passed: bool


def maxent_check(lam, family: Sequence[Sequence], tol: float = 1e-10, mean_tol: float = 1e-9) -> MaxentReport:
    """Check ``H(Z) <= H(Po(lam))`` for Bernoulli sums ``Z`` with mean ``lam``.

    ``family`` is a list of configurations; each configuration is the list
    of Bernoulli-vector probability vectors making up the sum.
    """
    lam_v = as_measure(lam).weights
    h_po = poisson_entropy(lam_v)
    ents, margins = [], []
    for config in family:
        Z = bernoulli_sum(config)
        if Z.dims != lam_v.size or np.max(np.abs(Z.mean() - lam_v)) > mean_tol:
            raise MeanMismatchError(f"configuration {config!r} has mean {Z.mean()}, expected {lam_v}")
        h = Z.entropy()
        ents.append(h)
        margins.append(h_po - h)
    passed = all(m >= -tol for m in margins)
    return MaxentReport(h_po, tuple(ents), tuple(margins), passed)


@dataclass(frozen=True)
class ThinDivergenceReport:
    base_divergence: float
    poisson_divergence: float
    thinned: dict
    max_error: float
    passed: bool


def _bernoulli_probs(p, name: str) -> np.ndarray:
    p = as_measure(p).weights
    if abs(math.fsum(p) - 1.0) > 1e-12:
        raise UnmeasureError(
            f"{name} must be a probability vector over base vectors (no mass at the origin)"
        )
    return p


def thin_divergence_identity(p, q, n_list: Sequence[int], tol: float = 1e-8) -> ThinDivergenceReport:
    """``D(P||Q) = D(T_{1/n}P^{*n} || T_{1/n}Q^{*n}) = D(Po(lam)||Po(mu))``.

    ``p`` and ``q`` are the probability vectors of two Bernoulli random
    vectors; their means are the same vectors.
    """
    pv, qv = _bernoulli_probs(p, "P"), _bernoulli_probs(q, "Q")
    if pv.size != qv.size:
        raise UnmeasureError("P and Q differ in dimension")
    P, Q = bernoulli_vector(pv), bernoulli_vector(qv)
    base = kl(P, Q)
    pois = kl_extended(pv, qv)
    thinned = {}
    for n in n_list:
        # full support: the identity is exact, not asymptotic
        thinned[int(n)] = kl(thin_convolve(P, n, None), thin_convolve(Q, n, None))
    vals = [pois, *thinned.values()]
    if math.isinf(base):
        err = 0.0 if all(math.isinf(v) for v in vals) else math.inf
    else:
        err = max(abs(v - base) for v in vals)
    return ThinDivergenceReport(base, pois, thinned, err, err <= tol)
