"""Cyclic I-projections onto mean-value constraints.

Three variants compute the KL projection of ``Q`` onto
``C = {P : sum_j f_i(j) p_j = mu_i for all i, sum_j p_j = 1}``:

``normalized-cyclic``
    project onto ``C_i = {sum f_i p = mu_i, sum p = 1}`` in turn; each step
    is a normalized exponential tilt.
``unnormalized-cyclic``
    project onto ``{sum p = 1}`` and the single-constraint sets
    ``{sum f_i p = mu_i}`` in turn, dropping normalization from every step.
    Each step is ``p -> p * exp(-beta f)`` with one scalar root-find.
``orthogonalized``
    either of the above after replacing ``1, f_1, ..., f_k`` by a
    Gram-Schmidt orthonormal family in ``L^2(Q)`` and transforming the
    targets by the same triangular map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .divergence import kl_extended
from .errors import ConvergenceError, UnmeasureError
from .measure import Measure, as_measure
from .projections import ConstraintSet, strictly_feasible_point

ROOT_WIDTH = 1e-14

VARIANTS = ("normalized-cyclic", "unnormalized-cyclic", "orthogonalized")


def _tilt_root(q: np.ndarray, f: np.ndarray, target: float, normalized: bool) -> float:
    """Solve for ``beta`` in the (normalized) tilt ``q * exp(-beta f)``.

    Unnormalized: ``sum f q e^{-beta f} = target``.  Normalized:
    ``sum f q e^{-beta f} / sum q e^{-beta f} = target``.  Both sides are
    strictly decreasing in ``beta`` for non-constant ``f`` on ``q > 0``;
    the root is bracketed, narrowed by Brent's method to ``ROOT_WIDTH`` and
    Newton-polished.
    """
    on = q > 0
    q, f = q[on], f[on]
    shift = f.max() if normalized else 0.0

    def h(beta):
        with np.errstate(over="ignore", invalid="ignore"):
            e = -beta * (f - shift)
            if normalized:
                e = e - e.max()  # normalization makes the shift free
            w = q * np.exp(e)
            if normalized:
                return math.fsum(f * w) / math.fsum(w) - target
            return math.fsum(f * w) - target

    def slope(beta):
        with np.errstate(over="ignore", invalid="ignore"):
            e = -beta * (f - shift)
            if normalized:
                e = e - e.max()
                w = q * np.exp(e)
                w = w / w.sum()
                m = f @ w
                return -float(((f - m) ** 2) @ w)
            w = q * np.exp(e)
            return -float((f**2) @ w)

    if normalized:
        lo_val, hi_val = f.min(), f.max()
        if not lo_val < target < hi_val:
            raise UnmeasureError(f"target {target} outside the open range ({lo_val}, {hi_val}) of the tilt")
    else:
        neg, posf = np.any(f < 0), np.any(f > 0)
        lo_lim = -math.inf if neg else 0.0  # beta -> +inf
        hi_lim = math.inf if posf else 0.0  # beta -> -inf
        if not lo_lim < target < hi_lim:
            raise UnmeasureError(f"target {target} outside the attainable range ({lo_lim}, {hi_lim})")

    if h(0.0) == 0.0:
        return 0.0
    # h decreasing: find a < b with h(a) > 0 > h(b)
    a, b = -1.0, 1.0
    while not h(a) > 0:
        a *= 2
        if a < -1e6:
            raise ConvergenceError("could not bracket the tilt parameter")
    while not h(b) < 0:
        b *= 2
        if b > 1e6:
            raise ConvergenceError("could not bracket the tilt parameter")
    beta, info = brentq(h, a, b, xtol=ROOT_WIDTH * max(1.0, abs(a), abs(b)), rtol=4 * np.finfo(float).eps,
                        full_output=True, disp=False)
    if not info.converged:
        raise ConvergenceError("tilt root-finder did not converge")
    s = slope(beta)
    if s < 0:
        polished = beta - h(beta) / s
        if a <= polished <= b and abs(h(polished)) <= abs(h(beta)):
            beta = polished
    return beta


def _as_function(f, n: int) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (n,):
        raise UnmeasureError(f"atom function has shape {f.shape}, expected ({n},)")
    return f


def _tilde_step(q: np.ndarray, f: np.ndarray, mu: float) -> tuple[np.ndarray, float]:
    beta = _tilt_root(q, f, float(mu), normalized=False)
    with np.errstate(over="ignore"):
        return q * np.exp(-beta * f), beta


def _normalized_step(q: np.ndarray, f: np.ndarray, mu: float) -> tuple[np.ndarray, float, float]:
    beta = _tilt_root(q, f, float(mu), normalized=True)
    e = -beta * f
    top = e[q > 0].max()
    w = q * np.exp(e - top)
    s = math.fsum(w)
    # p = q exp(-beta f) / Z with log Z = top + log s
    return w / s, beta, top + math.log(s)


def project_tilde(Q, f, mu: float) -> Measure:
    """Unnormalized KL projection of ``Q`` onto ``{P : sum f p = mu}``.

    The minimizer is ``p = q * exp(-beta f)`` with ``beta`` the unique root
    of ``sum f q exp(-beta f) = mu``.
    """
    Q = as_measure(Q)
    p, _ = _tilde_step(Q.weights, _as_function(f, len(Q)), mu)
    return Measure(p, Q.labels)


def project_normalized(Q, f, mu: float) -> Measure:
    """KL projection onto ``{P : sum f p = mu, sum p = 1}`` (normalized tilt)."""
    Q = as_measure(Q)
    p, _, _ = _normalized_step(Q.weights, _as_function(f, len(Q)), mu)
    return Measure(p, Q.labels)


@dataclass(frozen=True)
class Snapshot:
    """State after one full cycle.

    ``dual_value`` is ``sum q - sum p - theta . t`` for the accumulated tilt
    ``p = q exp(-theta . F)``; every step maximizes it over one coordinate
    (block), so it never decreases and equals the divergence at the fixed point.
    """

    cycle: int
    measure: Measure
    divergence: float
    dual_value: float
    max_residual: float
    total_mass: float


@dataclass(frozen=True)
class AltMinTrace:
    variant: str
    snapshots: tuple
    cycles_to_tol: int
    converged: bool
    functions: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)

    @property
    def final(self) -> Measure:
        return self.snapshots[-1].measure

    def to_csv(self) -> str:
        lines = ["cycle,divergence,max_residual,total_mass"]
        for s in self.snapshots:
            lines.append(f"{s.cycle},{s.divergence:.12g},{s.max_residual:.12g},{s.total_mass:.12g}")
        return "\n".join(lines) + "\n"


def _unpack(constraints: Sequence, n: int) -> tuple[np.ndarray, np.ndarray]:
    if not constraints:
        raise UnmeasureError("need at least one constraint")
    F = np.array([_as_function(f, n) for f, _ in constraints])
    t = np.array([float(m) for _, m in constraints])
    return F, t


def _check_feasible(Q: Measure, F: np.ndarray, t: np.ndarray) -> None:
    # tilts never leave supp(Q), so C must meet its relative interior there
    C = ConstraintSet(len(Q), tuple(zip(F, t)), (), True)
    strictly_feasible_point(C, free=Q.weights > 0)


def _residual(p: np.ndarray, F: np.ndarray, t: np.ndarray) -> float:
    return float(np.max(np.abs(F @ p - t)))


def _run(Q: Measure, F: np.ndarray, t: np.ndarray, variant: str, check_F: np.ndarray,
         check_t: np.ndarray, tol: float, max_cycles: int, normalized: bool = False) -> AltMinTrace:
    q = Q.weights
    p = q.copy()
    theta = np.zeros(len(F))
    theta0 = 0.0  # coefficient on the constant function (normalized steps only)
    q_mass = math.fsum(q)
    snaps = []
    converged = False
    for cycle in range(1, max_cycles + 1):
        before = p
        for i, (fi, ti) in enumerate(zip(F, t)):
            if normalized:
                p, beta, log_z = _normalized_step(p, fi, ti)
                theta0 += log_z
            else:
                p, beta = _tilde_step(p, fi, ti)
            theta[i] += beta
        m = Measure(p, Q.labels)
        dual = q_mass - m.total_mass - float(theta @ t) - (theta0 if normalized else 0.0)
        res = _residual(p, check_F, check_t)
        snaps.append(Snapshot(cycle, m, kl_extended(m, Q), dual, res, m.total_mass))
        if res <= tol and float(np.max(np.abs(p - before))) <= tol:
            converged = True
            break
    return AltMinTrace(variant, tuple(snaps), len(snaps), converged, F, t)


def altmin_cyclic(Q, constraints: Sequence, include_normalization: bool = True, tol: float = 1e-10,
                  max_cycles: int = 10_000, normalized_steps: bool = True) -> AltMinTrace:
    """Cyclic KL projections onto the constraint sets of ``constraints``.

    ``constraints`` is a list of ``(f_i, mu_i)``.  By default each step
    projects onto ``{sum f_i p = mu_i, sum p = 1}`` (the plain variant).
    With ``normalized_steps=False`` every step is an unnormalized projection
    and, if ``include_normalization``, the set ``{sum p = 1}`` joins the
    cycle first.

    Stops when, after a full cycle, every residual and every change in an
    atom's mass is at most ``tol``.  Hitting ``max_cycles`` returns a trace
    with ``converged=False`` (``cycles_to_tol`` is then the cycles run).
    """
    Q = as_measure(Q)
    n = len(Q)
    F, t = _unpack(constraints, n)
    _check_feasible(Q, F, t)
    ones = np.ones((1, n))
    if normalized_steps:
        check_F, check_t = np.vstack([F, ones]), np.append(t, 1.0)
        return _run(Q, F, t, "normalized-cyclic", check_F, check_t, tol, max_cycles, normalized=True)
    if include_normalization:
        F_cycle, t_cycle = np.vstack([ones, F]), np.append(1.0, t)
    else:
        F_cycle, t_cycle = F, t
    return _run(Q, F_cycle, t_cycle, "unnormalized-cyclic", F_cycle, t_cycle, tol, max_cycles)


@dataclass(frozen=True)
class Orthogonalization:
    ortho_functions: np.ndarray
    transform: np.ndarray
    transformed_targets: np.ndarray
    gram_condition: float


def orthogonalize(functions: Sequence, Q, targets: Sequence[float] | None = None,
                  rank_tol: float = 1e-10) -> Orthogonalization:
    """Gram-Schmidt in ``L^2(Q)``: ``H = L F`` with ``L`` lower triangular.

    ``<h_i, h_j>_Q = sum_a h_i(a) h_j(a) q(a) = delta_ij``.  Targets (if
    given) map the same way, so ``sum F p = t`` iff ``sum H p = L t``.
    """
    Q = as_measure(Q)
    q = Q.weights
    F = np.array([_as_function(f, len(Q)) for f in functions])
    k = F.shape[0]
    gram = (F * q) @ F.T
    eig = np.linalg.eigvalsh(gram)
    cond = float(eig[-1] / eig[0]) if eig[0] > 0 else math.inf
    L = np.zeros((k, k))
    H = np.zeros_like(F)
    for i in range(k):
        v = F[i].copy()
        row = np.zeros(k)
        row[i] = 1.0
        # modified Gram-Schmidt, two passes for stability
        for _ in range(2):
            for j in range(i):
                c = float((v * q) @ H[j])
                v = v - c * H[j]
                row = row - c * L[j]
        norm = math.sqrt(max(float((v * q) @ v), 0.0))
        scale = math.sqrt(float((F[i] ** 2) @ q)) or 1.0
        if norm <= rank_tol * scale:
            raise UnmeasureError(f"function {i} is linearly dependent on the previous ones in L2(Q)")
        H[i] = v / norm
        L[i] = row / norm
    tt = L @ np.asarray(targets, dtype=float) if targets is not None else None
    return Orthogonalization(H, L, tt, cond)


def altmin_accelerated(Q, constraints: Sequence, tol: float = 1e-10, max_cycles: int = 10_000,
                       normalized_steps: bool = True) -> AltMinTrace:
    """Cyclic projections over the ``L^2(Q)``-orthonormalized family.

    ``1, f_1, ..., f_k`` are orthonormalized with the constant leading.  With
    normalized steps the constant is enforced by every step and the cycle runs
    over ``h_1, ..., h_k``; otherwise all of ``h_0, ..., h_k`` are cycled
    with unnormalized steps.  Either way the fixed point is the projection
    onto ``C`` including normalization.
    """
    Q = as_measure(Q)
    n = len(Q)
    F, t = _unpack(constraints, n)
    _check_feasible(Q, F, t)
    F_all = np.vstack([np.ones((1, n)), F])
    t_all = np.append(1.0, t)
    orth = orthogonalize(F_all, Q, t_all)
    H, tau = orth.ortho_functions, orth.transformed_targets
    if normalized_steps:
        H, tau = H[1:], tau[1:]
    # convergence is judged on the original constraints
    return _run(Q, H, tau, "orthogonalized", F_all, t_all, tol, max_cycles, normalized=normalized_steps)
