"""Finite-support unnormalized measures and the codelength correspondence.

A :class:`Measure` is a non-negative weight vector over a finite list of
atoms.  Its total mass is arbitrary.  Conditioning a measure on a subset of
atoms gives a probability vector, and ``-ln`` of that vector is the optimal
codelength function over the subset.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NegativeWeightError, SupportMismatchError, UnmeasureError, ZeroMassError

KRAFT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Measure:
    """Non-negative weights over a finite support, with optional atom labels."""

    weights: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise UnmeasureError("a measure needs at least one atom")
        if not np.all(np.isfinite(w)):
            raise UnmeasureError("weights must be finite")
        if np.any(w < 0):
            raise NegativeWeightError(f"negative weight(s): {w[w < 0]}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != w.size:
                raise UnmeasureError("labels and weights differ in length")
            if len(set(labels)) != len(labels):
                raise UnmeasureError("labels must be distinct")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.weights.size

    def __repr__(self) -> str:
        if self.labels is None:
            return f"Measure({self.weights.tolist()})"
        return f"Measure({self.weights.tolist()}, labels={list(self.labels)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Measure):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.weights, other.weights)

    __hash__ = None

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def is_probability(self) -> bool:
        return abs(self.total_mass - 1.0) <= 1e-12

    def to_dict(self) -> dict:
        out = {"weights": self.weights.tolist()}
        if self.labels is not None:
            out = {"labels": list(self.labels), **out}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Measure":
        if "weights" not in d:
            raise UnmeasureError("measure JSON needs a 'weights' field")
        return cls(d["weights"], d.get("labels"))

    @classmethod
    def from_json(cls, s: str) -> "Measure":
        return cls.from_dict(json.loads(s))

    def atom_mask(self, atoms: Iterable | None) -> np.ndarray:
        """Boolean mask for a subset of atoms given by label or by 0-based index.

        ``None`` selects every atom.  Labels take precedence over indices
        when the measure is labelled.
        """
        mask = np.zeros(len(self), dtype=bool)
        if atoms is None:
            mask[:] = True
            return mask
        for a in atoms:
            if self.labels is not None and a in self.labels:
                mask[self.labels.index(a)] = True
            elif isinstance(a, (int, np.integer)) and 0 <= a < len(self):
                mask[int(a)] = True
            else:
                raise UnmeasureError(f"unknown atom {a!r}")
        return mask


def as_measure(x) -> Measure:
    if isinstance(x, Measure):
        return x
    return Measure(x)


def check_same_support(p: Measure, q: Measure) -> None:
    if len(p) != len(q):
        raise SupportMismatchError(f"support sizes differ: {len(p)} vs {len(q)}")
    if p.labels is not None and q.labels is not None and p.labels != q.labels:
        raise SupportMismatchError("atom labels differ")


def _labels_of(p: Measure, q: Measure):
    return p.labels if p.labels is not None else q.labels


def add(p, q) -> Measure:
    """Pointwise sum; two independent experiments with their counts pooled."""
    p, q = as_measure(p), as_measure(q)
    check_same_support(p, q)
    return Measure(p.weights + q.weights, _labels_of(p, q))


def scale(p, alpha: float) -> Measure:
    """Multiply by ``alpha`` in [0, 1], the mean-value image of a deletion channel."""
    p = as_measure(p)
    if not 0.0 <= alpha <= 1.0:
        raise UnmeasureError(f"scale factor must lie in [0, 1], got {alpha}")
    return Measure(alpha * p.weights, p.labels)


def multiply(p, c: float) -> Measure:
    """Unchecked non-negative scalar multiple (internal use)."""
    p = as_measure(p)
    return Measure(c * p.weights, p.labels)


def normalize(p) -> Measure:
    return condition(p, None)


def condition(mu, atoms: Iterable | None = None) -> Measure:
    """Condition ``mu`` on a subset of atoms; result has total mass 1.

    Atoms outside the subset get weight 0.
    """
    mu = as_measure(mu)
    return _condition_mask(mu, mu.atom_mask(atoms))


def _condition_mask(mu: Measure, mask: np.ndarray) -> Measure:
    mass = math.fsum(mu.weights[mask])
    if mass <= 0:
        raise ZeroMassError("cannot condition on a set of zero mass")
    w = np.where(mask, mu.weights / mass, 0.0)
    return Measure(w, mu.labels)


@dataclass(frozen=True, eq=False)
class CodelengthFn:
    """Codelengths in nats, one per atom.

    Atoms that are never coded carry length ``+inf`` and contribute nothing
    to the Kraft sum.
    """

    lengths: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        ell = np.array(self.lengths, dtype=float).reshape(-1)
        if np.any(np.isnan(ell)):
            raise UnmeasureError("codelengths must not be NaN")
        ell.setflags(write=False)
        object.__setattr__(self, "lengths", ell)

    @property
    def kraft_sum(self) -> float:
        return math.fsum(np.exp(-self.lengths))

    def sub_probability(self) -> Measure:
        """The measure ``a -> exp(-l(a))`` paired with this codelength function."""
        return Measure(np.exp(-self.lengths), self.labels)


@dataclass(frozen=True)
class KraftReport:
    sum: float
    satisfied: bool


def codelengths_from(mu, atoms: Iterable | None = None, allow_infinite: bool = False) -> CodelengthFn:
    """Mean-codelength-optimal lengths ``-ln mu(a|A)`` for atoms of ``A``.

    Atoms outside ``A`` get ``+inf``.  A zero-mass atom inside ``A`` would
    need an infinite codelength; that is an error unless ``allow_infinite``.
    """
    mu = as_measure(mu)
    mask = mu.atom_mask(atoms)
    if not allow_infinite and np.any(mu.weights[mask] == 0):
        raise ZeroMassError("zero-mass atom inside the coded set has infinite codelength")
    cond = _condition_mask(mu, mask).weights
    ell = np.full(len(mu), np.inf)
    with np.errstate(divide="ignore"):
        ell[mask] = -np.log(cond[mask])
    return CodelengthFn(ell, mu.labels)


def kraft_check(ell: CodelengthFn | Sequence[float]) -> KraftReport:
    if not isinstance(ell, CodelengthFn):
        ell = CodelengthFn(ell)
    s = ell.kraft_sum
    return KraftReport(sum=s, satisfied=s <= 1.0 + KRAFT_TOL)
