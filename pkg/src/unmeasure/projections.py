"""Minimum f-divergence projections onto polyhedral sets of measures.

``project`` solves

    minimize    D_f(P, Q)
    subject to  sum_i g_k(i) p_i  = t_k   (equalities)
                sum_i g_k(i) p_i <= b_k   (inequalities)
                p >= 0, optionally sum_i p_i = 1

over measures on a finite support.  Two solvers are used:

* KL with equality constraints only: Newton's method on the concave dual,
  whose primal image is the exponential tilt ``p = q * exp(-A^T nu)``.
* everything else: a primal log-barrier method with equality-constrained
  Newton steps, started from a strictly feasible point found by LP.

Atoms with ``q_i = 0`` are fixed at zero when ``f'(inf) = inf`` (any mass
there costs infinitely much) and otherwise carry the linear cost
``f'(inf) * p_i``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .divergence import KL, REVERSE_KL, FDivergenceSpec, f_divergence
from .errors import ConvergenceError, InfeasibleError, UnmeasureError
from .measure import Measure, as_measure

DEFAULT_TOL = 1e-9
MAX_ITER = 10_000


@dataclass(frozen=True)
class ConstraintSet:
    """Linear mean-value constraints on measures over ``support_size`` atoms."""

    support_size: int
    equalities: tuple = ()
    inequalities: tuple = ()
    require_probability: bool = False

    def __post_init__(self):
        eqs = tuple((np.asarray(g, dtype=float), float(t)) for g, t in self.equalities)
        ineqs = tuple((np.asarray(g, dtype=float), float(b)) for g, b in self.inequalities)
        for g, _ in eqs + ineqs:
            if g.shape != (self.support_size,):
                raise UnmeasureError(f"constraint function has shape {g.shape}, expected ({self.support_size},)")
            if not np.all(np.isfinite(g)):
                raise UnmeasureError("constraint functions must be finite")
        object.__setattr__(self, "equalities", eqs)
        object.__setattr__(self, "inequalities", ineqs)

    def eq_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        rows = [g for g, _ in self.equalities]
        rhs = [t for _, t in self.equalities]
        if self.require_probability:
            rows.append(np.ones(self.support_size))
            rhs.append(1.0)
        return np.array(rows).reshape(len(rows), self.support_size), np.array(rhs)

    def ineq_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        rows = [g for g, _ in self.inequalities]
        rhs = [b for _, b in self.inequalities]
        return np.array(rows).reshape(len(rows), self.support_size), np.array(rhs)

    def residuals(self, p) -> dict:
        """Signed violations: equality ``Ap - t`` and inequality ``max(Gp - b, 0)``."""
        p = np.asarray(as_measure(p).weights)
        A, b = self.eq_matrix()
        G, h = self.ineq_matrix()
        return {"eq": A @ p - b, "ineq": np.maximum(G @ p - h, 0.0), "neg": np.maximum(-p, 0.0)}

    def max_violation(self, p) -> float:
        r = self.residuals(p)
        return float(max([0.0, *np.abs(r["eq"]), *r["ineq"], *r["neg"]]))

    def contains(self, p, tol: float = 1e-12) -> bool:
        return self.max_violation(p) <= tol

    def with_constraints(self, equalities=(), inequalities=()) -> "ConstraintSet":
        return ConstraintSet(
            self.support_size,
            self.equalities + tuple(equalities),
            self.inequalities + tuple(inequalities),
            self.require_probability,
        )

    def to_dict(self) -> dict:
        return {
            "equalities": [{"g": g.tolist(), "target": t} for g, t in self.equalities],
            "inequalities": [{"g": g.tolist(), "bound": b} for g, b in self.inequalities],
            "probability": self.require_probability,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, support_size: int | None = None) -> "ConstraintSet":
        if not isinstance(d, dict):
            raise UnmeasureError("constraint JSON must be an object")
        try:
            eqs = [(c["g"], c["target"]) for c in d.get("equalities", [])]
            ineqs = [(c["g"], c["bound"] if "bound" in c else c["target"]) for c in d.get("inequalities", [])]
        except (KeyError, TypeError) as e:
            raise UnmeasureError(f"constraint entries need 'g' and 'target' (or 'bound'): missing {e}") from None
        if support_size is None:
            sizes = {len(g) for g, _ in eqs + ineqs}
            if len(sizes) != 1:
                raise UnmeasureError("cannot infer support size from constraint JSON")
            support_size = sizes.pop()
        return cls(support_size, tuple(eqs), tuple(ineqs), bool(d.get("probability", False)))

    @classmethod
    def from_json(cls, s: str, support_size: int | None = None) -> "ConstraintSet":
        return cls.from_dict(json.loads(s), support_size)


@dataclass(frozen=True)
class ProjectionResult:
    q_star: Measure
    value: float
    eq_duals: np.ndarray
    ineq_duals: np.ndarray
    active: tuple
    iterations: int
    converged: bool
    method: str
    gap: float = 0.0
    history: tuple = field(default=(), repr=False)

    @property
    def duals(self) -> np.ndarray:
        return np.concatenate([self.eq_duals, self.ineq_duals])


def _variable_atoms(q: np.ndarray, spec: FDivergenceSpec) -> np.ndarray:
    return (q > 0) | (math.isfinite(spec.fprime_at_inf))


def strictly_feasible_point(C: ConstraintSet, free: np.ndarray | None = None,
                            objective: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Point maximizing the smallest slack ``s`` (capped at 1) over ``C``.

    Atoms outside ``free`` are pinned to zero.  Raises ``InfeasibleError``
    if ``C`` is empty or has no point with positive slack.
    """
    n = C.support_size
    if free is None:
        free = np.ones(n, dtype=bool)
    A, b = C.eq_matrix()
    G, h = C.ineq_matrix()
    nf = int(free.sum())
    if nf == 0:
        raise InfeasibleError("no atom can carry mass")
    # variables (p_free, s); maximize s
    c = np.zeros(nf + 1)
    c[-1] = -1.0
    if objective is not None:
        c[:-1] = -1e-3 * objective[free]
    A_ub = [np.hstack([G[:, free], np.ones((G.shape[0], 1))])] if G.size else []
    b_ub = [h] if G.size else []
    A_ub.append(np.hstack([-np.eye(nf), np.ones((nf, 1))]))
    b_ub.append(np.zeros(nf))
    A_eq = np.hstack([A[:, free], np.zeros((A.shape[0], 1))]) if A.size else None
    res = linprog(
        c,
        A_ub=np.vstack(A_ub),
        b_ub=np.concatenate(b_ub),
        A_eq=A_eq,
        b_eq=b if A.size else None,
        bounds=[(None, None)] * nf + [(None, 1.0)],
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleError("constraint set is empty")
    if res.status != 0:
        raise InfeasibleError(f"feasibility LP failed: {res.message}")
    s = float(res.x[-1])
    if s <= 1e-12:
        raise InfeasibleError(f"constraint set has no strictly feasible point (max slack {s:.3g})")
    p = np.zeros(n)
    p[free] = res.x[:-1]
    return p, s


def _kl_dual_newton(q, A, b, tol, max_iter, nu0=None):
    """Maximize ``g(nu) = sum q - sum q exp(-A^T nu) - nu.b``; returns (p, nu, iters)."""
    m = A.shape[0]
    nu = np.zeros(m) if nu0 is None else np.asarray(nu0, dtype=float).copy()

    def primal(v):
        return q * np.exp(-(A.T @ v))

    def dual(v):
        return math.fsum(q) - math.fsum(primal(v)) - float(v @ b)

    g_val = dual(nu)
    for it in range(1, max_iter + 1):
        p = primal(nu)
        grad = A @ p - b
        if np.max(np.abs(grad)) <= tol:
            return p, nu, it - 1
        H = (A * p) @ A.T  # negative Hessian of the dual
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        # ascent direction is -H^{-1}(-grad); g increases along +step
        t = 1.0
        while True:
            cand = nu + t * step
            with np.errstate(over="ignore"):
                c_val = dual(cand)
            if np.isfinite(c_val) and c_val >= g_val + 1e-4 * t * float(grad @ step) - 1e-15 * abs(g_val):
                break
            t *= 0.5
            if t < 1e-12:
                raise ConvergenceError("dual line search stalled")
        nu, g_val = cand, c_val
    raise ConvergenceError(f"dual Newton did not converge in {max_iter} iterations")


def _objective_parts(q: np.ndarray, spec: FDivergenceSpec):
    pos = q > 0
    lin = 0.0 if not math.isfinite(spec.fprime_at_inf) else spec.fprime_at_inf

    def value(p):
        out = np.zeros_like(p)
        out[pos] = q[pos] * spec.f(p[pos] / q[pos])
        out[~pos] = lin * p[~pos]
        return math.fsum(out)

    def grad(p):
        out = np.full_like(p, lin)
        out[pos] = spec.derivative(p[pos] / q[pos])
        return out

    def hess(p):
        out = np.zeros_like(p)
        out[pos] = spec.second_derivative(p[pos] / q[pos]) / q[pos]
        return out

    return value, grad, hess


def _barrier(q, spec, C, free, p0, tol, max_iter):
    """Log-barrier method on the free atoms; returns (p, nu, eta, iters, gap)."""
    n = C.support_size
    A, b = C.eq_matrix()
    G, h = C.ineq_matrix()
    Af, Gf, qf = A[:, free], G[:, free], q[free]
    x = p0[free].astype(float)
    f_val, f_grad, f_hess = _objective_parts(qf, spec)
    m_ineq = x.size + Gf.shape[0]
    t = 1.0
    mu = 20.0
    iters = 0

    def slack(z):
        return h - Gf @ z if Gf.size else np.zeros(0)

    def phi(z, t):
        s = slack(z)
        if np.any(z <= 0) or np.any(s <= 0):
            return math.inf
        with np.errstate(all="ignore"):
            v = t * f_val(z) - math.fsum(np.log(z)) - math.fsum(np.log(s))
        return v if np.isfinite(v) else math.inf

    neq = Af.shape[0]
    nu = np.zeros(neq)
    while True:
        # centering by equality-constrained Newton
        for _ in range(200):
            iters += 1
            if iters > max_iter:
                raise ConvergenceError(f"barrier method exceeded {max_iter} Newton steps")
            s = slack(x)
            g = t * f_grad(x) - 1.0 / x
            Hd = t * f_hess(x) + 1.0 / x**2
            H = np.diag(Hd)
            if Gf.size:
                g = g + Gf.T @ (1.0 / s)
                H = H + (Gf.T / s**2) @ Gf
            K = np.block([[H, Af.T], [Af, np.zeros((neq, neq))]])
            rhs = np.concatenate([-g, -(Af @ x - b) if neq else np.zeros(0)])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
            dx, w = sol[: x.size], sol[x.size:]
            lam2 = float(-g @ dx)
            if lam2 / 2 <= 1e-12:
                nu = w
                break
            # keep strictly inside the domain, then backtrack on the barrier objective
            step = 1.0
            neg = dx < 0
            if neg.any():
                step = min(step, 0.99 * float(np.min(-x[neg] / dx[neg])))
            if Gf.size:
                ds = -(Gf @ dx)
                dneg = ds < 0
                if dneg.any():
                    step = min(step, 0.99 * float(np.min(-s[dneg] / ds[dneg])))
            cur = phi(x, t)
            while phi(x + step * dx, t) > cur - 0.25 * step * lam2 and step > 1e-14:
                step *= 0.5
            x = x + step * dx
            nu = w
            if step <= 1e-14:
                break
        gap = m_ineq / t
        if gap <= tol:
            break
        t *= mu
    s = slack(x)
    eta = 1.0 / (t * s) if Gf.size else np.zeros(0)
    p = np.zeros(n)
    p[free] = x
    return p, nu / t, eta, iters, m_ineq / t


def _snap_zero_atoms(p, q, spec, C, nu, eta, tol):
    """Set atoms to zero where the bound ``p_i >= 0`` is active at optimality.

    Along the central path every atom has ``p_i * r_i = 1/t`` with ``r_i``
    its reduced cost, so an atom whose mass is below both ``tol`` and
    ``r_i`` is one the barrier is only holding off zero.
    """
    A, _ = C.eq_matrix()
    G, _ = C.ineq_matrix()
    lin = spec.fprime_at_inf if math.isfinite(spec.fprime_at_inf) else 0.0
    grad = np.full_like(p, lin)
    pos = (q > 0) & (p > 0)
    grad[pos] = spec.derivative(p[pos] / q[pos])
    reduced = grad + (A.T @ nu if A.size else 0.0) + (G.T @ eta if G.size else 0.0)
    snap = (p > 0) & (p <= tol) & (p < reduced)
    out = p.copy()
    out[snap] = 0.0
    return out


def _recover_duals(p, q, spec, C, eta_path):
    """Least-squares multipliers from stationarity on the atoms carrying mass.

    ``1/(t*slack)`` loses precision once the slack is near rounding level,
    so the barrier multipliers only decide which inequalities are active.
    """
    A, _ = C.eq_matrix()
    G, h = C.ineq_matrix()
    slack = h - G @ p if G.size else np.zeros(0)
    active = eta_path > slack if G.size else np.zeros(0, dtype=bool)
    carries = p > 0
    lin = spec.fprime_at_inf if math.isfinite(spec.fprime_at_inf) else 0.0
    grad = np.full_like(p, lin)
    pos = (q > 0) & carries
    grad[pos] = spec.derivative(p[pos] / q[pos])
    M = np.vstack([A, G[active]]) if G.size else A
    if M.shape[0] == 0:
        return np.zeros(0), np.zeros(G.shape[0])
    y = np.linalg.lstsq(M[:, carries].T, -grad[carries], rcond=None)[0]
    eta = np.zeros(G.shape[0])
    eta[active] = y[A.shape[0]:]
    return y[: A.shape[0]], eta


def project(Q, C: ConstraintSet, spec: FDivergenceSpec = KL, tol: float = DEFAULT_TOL,
            method: str = "auto", start=None, max_iter: int = MAX_ITER) -> ProjectionResult:
    """Minimize ``D_f(P, Q)`` over ``P`` in ``C``.

    ``method`` is ``"dual"`` (KL with equalities only), ``"barrier"`` or
    ``"auto"``.  ``start`` optionally gives a strictly feasible starting
    measure for the barrier method, or a dual vector for the dual method.
    """
    Q = as_measure(Q)
    q = Q.weights.astype(float)
    if len(Q) != C.support_size:
        raise UnmeasureError("Q and the constraint set have different supports")
    free = _variable_atoms(q, spec)
    n = C.support_size
    A, b = C.eq_matrix()
    G, h = C.ineq_matrix()

    # Q itself is feasible and optimal (D_f >= 0 with equality at P = Q)
    if C.contains(Q, tol=1e-14):
        return ProjectionResult(
            Q, 0.0, np.zeros(A.shape[0]), np.zeros(G.shape[0]),
            tuple(bool(x) for x in (G @ q >= h - 1e-12)) if G.size else (),
            0, True, "identity",
        )

    # certifies D_f(C, Q) < inf by exhibiting a strictly feasible point on the free atoms
    p_feas, _ = strictly_feasible_point(C, free)

    use_dual = method == "dual" or (method == "auto" and spec is KL and not C.inequalities)
    if use_dual:
        if spec is not KL or C.inequalities:
            raise UnmeasureError("the dual method handles KL with equality constraints only")
        p_f, nu, it = _kl_dual_newton(q[free], A[:, free], b, tol, max_iter, start)
        p = np.zeros(n)
        p[free] = p_f
        eta = np.zeros(0)
        gap = 0.0
        name = "dual-newton"
    elif method in ("auto", "barrier"):
        if start is not None:
            p0 = np.asarray(as_measure(start).weights, dtype=float)
            if np.any(p0[free] <= 0) or np.any(p0[~free] != 0) or (A.size and np.max(np.abs(A @ p0 - b)) > 1e-9) \
                    or (G.size and np.any(G @ p0 >= h)):
                raise UnmeasureError("start must be strictly feasible and supported on the free atoms")
        else:
            p0 = p_feas
        p, nu, eta, it, gap = _barrier(q, spec, C, free, p0, tol, max_iter)
        p = _snap_zero_atoms(p, q, spec, C, nu, eta, 1e-6)
        nu, eta = _recover_duals(p, q, spec, C, eta)
        name = "barrier"
    else:
        raise UnmeasureError(f"unknown method {method!r}")

    q_star = Measure(p, Q.labels)
    active = tuple(bool(x) for x in (G @ p >= h - max(1e-8, 10 * tol))) if G.size else ()
    converged = C.max_violation(q_star) <= max(1e-8, 10 * tol)
    return ProjectionResult(
        q_star=q_star,
        value=f_divergence(q_star, Q, spec),
        eq_duals=np.asarray(nu, dtype=float),
        ineq_duals=np.asarray(eta, dtype=float),
        active=active,
        iterations=int(it),
        converged=bool(converged),
        method=name,
        gap=float(gap),
    )


def kkt_report(result: ProjectionResult, Q, C: ConstraintSet, spec: FDivergenceSpec = KL) -> dict:
    """First-order optimality diagnostics for a projection result.

    ``stationarity`` is the largest Lagrangian gradient on atoms carrying
    mass; ``bound_dual_min`` the smallest reduced cost on empty atoms
    (must be >= 0); ``complementarity`` the largest ``|eta_j * slack_j|``.
    """
    q = as_measure(Q).weights
    p = result.q_star.weights
    A, b = C.eq_matrix()
    G, h = C.ineq_matrix()
    lin = spec.fprime_at_inf
    grad = np.full_like(p, lin if math.isfinite(lin) else 0.0)
    pos = (q > 0) & (p > 0)
    grad[pos] = spec.derivative(p[pos] / q[pos])
    reduced = grad.copy()
    if A.size:
        reduced += A.T @ result.eq_duals
    if G.size:
        reduced += G.T @ result.ineq_duals
    carries = p > 0
    allowed = _variable_atoms(q, spec)
    empty = (~carries) & allowed
    slack = h - G @ p if G.size else np.zeros(0)
    return {
        "stationarity": float(np.max(np.abs(reduced[carries]))) if carries.any() else 0.0,
        "bound_dual_min": float(np.min(reduced[empty])) if empty.any() else 0.0,
        "ineq_dual_min": float(np.min(result.ineq_duals)) if G.size else 0.0,
        "complementarity": float(np.max(np.abs(result.ineq_duals * slack))) if G.size else 0.0,
        "feasibility": C.max_violation(result.q_star),
    }


@dataclass(frozen=True)
class SequenceReport:
    tolerances: tuple
    iterates: tuple
    cauchy: tuple
    limit_error: float
    init_spread: float
    passed: bool


def asymptotic_sequence_check(Q, C: ConstraintSet, spec: FDivergenceSpec = KL,
                              schedule: Sequence[float] = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10),
                              seed: int = 0, tol: float = 1e-6) -> SequenceReport:
    """Solve with tightening tolerances and check the iterates settle on one limit.

    Also restarts the barrier method from a second, randomly chosen strictly
    feasible point; under strict convexity both runs must agree.
    """
    if not spec.strictly_convex:
        raise UnmeasureError("asymptotic uniqueness needs a strictly convex generator")
    Q = as_measure(Q)
    q = Q.weights
    iterates = [project(Q, C, spec, tol=t).q_star.weights for t in schedule]
    cauchy = tuple(float(np.max(np.abs(a - b_))) for a, b_ in zip(iterates, iterates[1:]))
    ref = project(Q, C, spec)
    on_q = q > 0
    limit_error = float(np.max(np.abs(iterates[-1] - ref.q_star.weights)[on_q]))
    spread = 0.0
    if ref.method != "identity":
        rng = np.random.default_rng(seed)
        free = _variable_atoms(q, spec)
        p_a, _ = strictly_feasible_point(C, free)
        p_b, _ = strictly_feasible_point(C, free, objective=rng.standard_normal(C.support_size))
        start = 0.5 * (p_a + p_b)
        alt = project(Q, C, spec, method="barrier", start=start)
        spread = float(np.max(np.abs(alt.q_star.weights - ref.q_star.weights)))
    ok = limit_error <= tol and spread <= tol and (not cauchy or cauchy[-1] <= tol)
    return SequenceReport(tuple(schedule), tuple(iterates), cauchy, limit_error, spread, ok)


@dataclass(frozen=True)
class MassPreservationReport:
    result: ProjectionResult
    mass: float
    mass_error: float
    passed: bool


def thm7_check(Q, C: ConstraintSet, spec: FDivergenceSpec = KL, tol: float = 1e-8) -> MassPreservationReport:
    """With ``f'(inf) = inf``, the projection of a probability measure onto a
    set of probability measures is itself a probability measure.

    The normalization is imposed only through ``C``; the solver never adds it.
    """
    Q = as_measure(Q)
    if not Q.is_probability:
        raise UnmeasureError("Q must be a probability measure")
    if not C.require_probability:
        raise UnmeasureError("C must consist of probability measures")
    if math.isfinite(spec.fprime_at_inf):
        raise UnmeasureError("this check needs f'(inf) = inf")
    res = project(Q, C, spec)
    mass = res.q_star.total_mass
    return MassPreservationReport(res, mass, abs(mass - 1.0), abs(mass - 1.0) <= tol and res.converged)


@dataclass(frozen=True)
class MassLossReport:
    result: ProjectionResult
    constraint_value: float
    equality_error: float
    mass_gap: float
    max_mass_off_support: float
    equality_active: bool
    mass_reduced: bool
    absolutely_continuous: bool

    @property
    def passed(self) -> bool:
        return self.equality_active and self.mass_reduced and self.absolutely_continuous


def thm8_check(Q, g, mu_tilde: float, spec: FDivergenceSpec = REVERSE_KL, tol: float = 1e-8) -> MassLossReport:
    """Projection of a probability measure onto ``{P : sum g p <= mu_tilde}``.

    With ``g > 0``, ``0 < mu_tilde < sum g q`` and ``f'(inf) < inf`` the
    projection meets the constraint with equality, loses mass, and puts no
    mass where ``Q`` has none.
    """
    Q = as_measure(Q)
    g = np.asarray(g, dtype=float)
    if not Q.is_probability:
        raise UnmeasureError("Q must be a probability measure")
    if g.shape != (len(Q),) or np.any(g <= 0):
        raise UnmeasureError("g must be a positive function on the support")
    mu = float(g @ Q.weights)
    if not 0 < mu_tilde < mu:
        raise UnmeasureError(f"mu_tilde must lie in (0, {mu}), got {mu_tilde}")
    if not math.isfinite(spec.fprime_at_inf):
        raise UnmeasureError("this check needs f'(inf) < inf")
    C = ConstraintSet(len(Q), inequalities=((g, mu_tilde),))
    res = project(Q, C, spec, tol=min(tol, DEFAULT_TOL) * 1e-1)
    p = res.q_star.weights
    cv = float(g @ p)
    gap = Q.total_mass - res.q_star.total_mass
    off = float(np.max(p[Q.weights == 0])) if np.any(Q.weights == 0) else 0.0
    return MassLossReport(
        result=res,
        constraint_value=cv,
        equality_error=abs(cv - mu_tilde),
        mass_gap=gap,
        max_mass_off_support=off,
        equality_active=abs(cv - mu_tilde) <= tol,
        mass_reduced=gap > tol,
        absolutely_continuous=off == 0.0,
    )
