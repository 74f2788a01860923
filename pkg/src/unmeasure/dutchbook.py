"""Payoff systems on a finite sample space: a sure loss or a supporting measure.

For payoffs ``X_1, ..., X_n`` on ``Omega`` exactly one of these is decided:

``ARBITRAGE``
    weights ``s_i > 0`` with ``sum_i s_i X_i(w) < 0`` for every ``w``;
``MEASURE``
    a non-zero measure ``mu >= 0`` with ``sum_w X_i(w) mu(w) >= 0`` for every ``i``.

Both are found by linear programs solved in exact rational arithmetic, so
the decision and the certificate carry no rounding.  Strictness is handled
by a margin variable: maximize ``t`` subject to ``sum s_i X_i(w) + t <= 0``,
``s_i >= 1``, ``t <= 1``.  ``t* > 0`` is a sure loss; otherwise the second
program maximizes the smallest integral over probability vectors.  A zero
optimum there is the boundary case in which both readings nearly hold.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CertificateError, InfeasibleError, UnmeasureError

ARBITRAGE = "ARBITRAGE"
MEASURE = "MEASURE"
MEASURE_TOL = 1e-9


# --- exact simplex ---------------------------------------------------------

def _pivot(T: list, row: int, col: int) -> None:
    p = T[row][col]
    T[row] = [v / p for v in T[row]]
    for r in range(len(T)):
        if r != row and T[r][col] != 0:
            m = T[r][col]
            T[r] = [a - m * b for a, b in zip(T[r], T[row])]


def _run_simplex(T: list, basis: list, n_cols: int) -> str:
    """Minimize the objective held in the last row of ``T`` (Bland's rule).

    Columns ``0..n_cols-1`` are variables, the last column is the right-hand
    side; the objective row holds reduced costs and ``-value``.
    """
    while True:
        obj = T[-1]
        enter = next((j for j in range(n_cols) if obj[j] < 0), None)
        if enter is None:
            return "optimal"
        best, leave = None, None
        for r in range(len(T) - 1):
            a = T[r][enter]
            if a > 0:
                ratio = T[r][-1] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    best, leave = ratio, r
        if leave is None:
            return "unbounded"
        _pivot(T, leave, enter)
        basis[leave] = enter


def simplex(A: Sequence[Sequence], b: Sequence, c: Sequence) -> tuple[list, Fraction]:
    """``min c.x`` subject to ``A x = b``, ``x >= 0`` over the rationals.

    Two-phase method with Bland's anti-cycling rule.  Returns the optimal
    vertex and value; raises ``InfeasibleError`` or ``UnmeasureError`` when
    the program is infeasible or unbounded.
    """
    A = [[Fraction(v) for v in row] for row in A]
    b = [Fraction(v) for v in b]
    c = [Fraction(v) for v in c]
    m, n = len(A), len(c)
    for i in range(m):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]
    # phase 1: artificials n..n+m-1
    T = [A[i] + [Fraction(int(i == k)) for k in range(m)] + [b[i]] for i in range(m)]
    cost = [Fraction(0)] * n + [Fraction(1)] * m + [Fraction(0)]
    for i in range(m):
        cost = [a - v for a, v in zip(cost, T[i])]
    T.append(cost)
    basis = list(range(n, n + m))
    _run_simplex(T, basis, n + m)
    if T[-1][-1] != 0:
        raise InfeasibleError("linear program is infeasible")
    # drive remaining artificials out of the basis, dropping redundant rows
    r = 0
    while r < len(T) - 1:
        if basis[r] >= n:
            col = next((j for j in range(n) if T[r][j] != 0), None)
            if col is None:
                del T[r], basis[r]
                continue
            _pivot(T, r, col)
            basis[r] = col
        r += 1
    T = [row[:n] + [row[-1]] for row in T[:-1]]
    # phase 2 objective in canonical form
    obj = c + [Fraction(0)]
    for i, j in enumerate(basis):
        if obj[j] != 0:
            f = obj[j]
            obj = [a - f * v for a, v in zip(obj, T[i])]
    T.append(obj)
    if _run_simplex(T, basis, n) == "unbounded":
        raise UnmeasureError("linear program is unbounded")
    x = [Fraction(0)] * n
    for i, j in enumerate(basis):
        x[j] = T[i][-1]
    return x, -T[-1][-1]


# --- domain types ----------------------------------------------------------

@dataclass(frozen=True)
class PayoffSystem:
    """``n`` payoff functions (rows) on ``|Omega|`` sample points (columns)."""

    matrix: np.ndarray

    def __post_init__(self):
        X = np.array(self.matrix, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise UnmeasureError("payoff matrix must be 2-d with at least one row and one column")
        if not np.all(np.isfinite(X)):
            raise UnmeasureError("payoff entries must be finite")
        X.setflags(write=False)
        object.__setattr__(self, "matrix", X)

    @property
    def shape(self) -> tuple:
        return self.matrix.shape

    def exact(self) -> list:
        # floats convert to Fractions without rounding
        return [[Fraction(float(v)) for v in row] for row in self.matrix]

    @classmethod
    def from_csv(cls, text: str) -> "PayoffSystem":
        """One payoff per line; a non-numeric first line is taken as a header."""
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        if not rows:
            raise UnmeasureError("empty payoff CSV")
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
        try:
            data = [[float(c) for c in r] for r in rows]
        except ValueError as e:
            raise UnmeasureError(f"non-numeric payoff entry: {e}") from None
        if len({len(r) for r in data}) > 1:
            raise UnmeasureError("payoff rows have different lengths")
        return cls(np.array(data))


def _as_system(X) -> PayoffSystem:
    return X if isinstance(X, PayoffSystem) else PayoffSystem(X)


@dataclass(frozen=True)
class DichotomyCertificate:
    """Outcome of :func:`decide`.

    ``weights`` (ARBITRAGE) or ``measure`` (MEASURE) hold exact rationals.
    ``margin`` is ``-max_w sum s_i X_i(w)`` for a sure loss, and the smallest
    integral ``min_i sum_w X_i mu`` otherwise.
    """

    branch: str
    margin: Fraction
    weights: tuple | None = None
    measure: tuple | None = None
    boundary: bool = False

    def to_dict(self) -> dict:
        vec = self.weights if self.branch == ARBITRAGE else self.measure
        key = "weights" if self.branch == ARBITRAGE else "measure"
        return {
            "branch": self.branch,
            key: [float(v) for v in vec],
            f"{key}_exact": [str(v) for v in vec],
            "margin": float(self.margin),
            "margin_exact": str(self.margin),
            "boundary": self.boundary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "DichotomyCertificate":
        branch = d.get("branch")
        if branch not in (ARBITRAGE, MEASURE):
            raise CertificateError(f"unknown branch {branch!r}")
        key = "weights" if branch == ARBITRAGE else "measure"
        raw = d.get(f"{key}_exact", d.get(key))
        if raw is None:
            raise CertificateError(f"certificate has no {key}")
        vec = tuple(Fraction(v) if isinstance(v, str) else Fraction(float(v)) for v in raw)
        margin = Fraction(d.get("margin_exact", str(Fraction(float(d.get("margin", 0.0))))))
        return cls(branch, margin, vec if key == "weights" else None, vec if key == "measure" else None,
                   bool(d.get("boundary", False)))


def decide(X, tol: float = 0.0) -> DichotomyCertificate:
    """Certify a sure loss or a measure with non-negative integrals.

    ``t* > tol`` gives ``ARBITRAGE``.  Otherwise the measure program is
    solved; a margin of ``0`` (or ``t*`` within ``tol`` of zero) sets
    ``boundary``.
    """
    P = _as_system(X)
    Xq = P.exact()
    n, k = P.shape
    # variables u (n), v, slack (k): s = 1 + u, t = 1 - v
    A, b = [], []
    for w in range(k):
        row = [Xq[i][w] for i in range(n)] + [Fraction(-1)] + [Fraction(int(j == w)) for j in range(k)]
        A.append(row)
        b.append(-1 - sum(Xq[i][w] for i in range(n)))
    c = [Fraction(0)] * n + [Fraction(1)] + [Fraction(0)] * k
    x, v = simplex(A, b, c)
    t = 1 - v
    if t > 0 and t > Fraction(tol):
        s = tuple(1 + x[i] for i in range(n))
        worst = max(sum(s[i] * Xq[i][w] for i in range(n)) for w in range(k))
        return DichotomyCertificate(ARBITRAGE, -worst, weights=s)

    # variables mu (k), w, slack (n): m = 1 - w, sum mu = 1
    A, b = [], []
    for i in range(n):
        A.append([-Xq[i][j] for j in range(k)] + [Fraction(-1)] + [Fraction(int(r == i)) for r in range(n)])
        b.append(Fraction(-1))
    A.append([Fraction(1)] * k + [Fraction(0)] * (n + 1))
    b.append(Fraction(1))
    c = [Fraction(0)] * k + [Fraction(1)] + [Fraction(0)] * n
    x, wv = simplex(A, b, c)
    mu = tuple(x[:k])
    margin = min(sum(Xq[i][j] * mu[j] for j in range(k)) for i in range(n))
    return DichotomyCertificate(MEASURE, margin, measure=mu, boundary=(margin <= 0 or t > 0))


def verify(X, cert: DichotomyCertificate, tol: float = MEASURE_TOL) -> bool:
    """Re-check a certificate against the raw payoffs, independently of the solver."""
    P = _as_system(X)
    Xq = P.exact()
    n, k = P.shape
    if cert.branch == ARBITRAGE:
        s = cert.weights
        if s is None or len(s) != n:
            raise CertificateError("weight vector has the wrong length")
        if any(v <= 0 for v in s):
            return False
        return all(sum(s[i] * Xq[i][w] for i in range(n)) < 0 for w in range(k))
    if cert.branch == MEASURE:
        mu = cert.measure
        if mu is None or len(mu) != k:
            raise CertificateError("measure has the wrong length")
        if any(v < 0 for v in mu) or sum(mu) <= 0:
            return False
        return all(sum(Xq[i][j] * mu[j] for j in range(k)) >= -Fraction(tol) for i in range(n))
    raise CertificateError(f"unknown branch {cert.branch!r}")
