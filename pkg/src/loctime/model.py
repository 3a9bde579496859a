"""Finite-alphabet Markov systems, Gibbs measures and centred edge observables.

A system on the alphabet {0, ..., d-1} is an incidence matrix ``A``, a
row-stochastic kernel ``Q`` supported on the allowed edges of ``A`` and the
stationary vector ``pi``.  Observables are functions of an edge ``(x, y)``;
a state observable is stored as an edge observable that is constant in ``y``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRowOrColumn, NonconvergentEigen, NotPrimitive

ROW_TOL = 1e-12
STATIONARY_TOL = 1e-13
MAX_ITER = 100_000


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def wielandt_bound(d: int) -> int:
    """Largest exponent that can be needed for a primitive d x d matrix."""
    return d * d - 2 * d + 2


def check_primitive(A) -> int:
    """Least ``n0`` such that every entry of the boolean power ``A**n0`` is positive.

    Parameters
    ----------
    A : array_like
        Square 0/1 incidence matrix.

    Returns
    -------
    int
        The primitivity exponent, searched up to the Wielandt bound.

    Raises
    ------
    EmptyRowOrColumn
        If a state has no successor or no predecessor.
    NotPrimitive
        If no power up to the Wielandt bound is positive.
    """
    B = np.asarray(A) != 0
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] == 0:
        raise ValueError(f"incidence matrix must be square and non-empty, got shape {B.shape}")
    rows = np.flatnonzero(~B.any(axis=1))
    cols = np.flatnonzero(~B.any(axis=0))
    if rows.size or cols.size:
        raise EmptyRowOrColumn(
            f"states without successor {rows.tolist()}, without predecessor {cols.tolist()}"
        )
    d = B.shape[0]
    Bi = B.astype(np.int64)
    power = Bi.copy()
    for n in range(1, wielandt_bound(d) + 1):
        if power.all():
            return n
        power = (power @ Bi > 0).astype(np.int64)
    raise NotPrimitive(f"no positive power of the {d}x{d} incidence matrix up to {wielandt_bound(d)}")


def stationary_distribution(Q) -> np.ndarray:
    """Stationary probability vector of a primitive stochastic matrix.

    Solves ``pi (Q - I) = 0`` with ``sum(pi) = 1`` and polishes the result by a
    few steps of power iteration on the transposed action.
    """
    Q = np.asarray(Q, dtype=float)
    check_primitive(Q > 0)
    d = Q.shape[0]
    lhs = Q.T - np.eye(d)
    lhs[-1, :] = 1.0
    rhs = np.zeros(d)
    rhs[-1] = 1.0
    pi = np.linalg.solve(lhs, rhs)
    for _ in range(MAX_ITER):
        nxt = pi @ Q
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) <= STATIONARY_TOL:
            pi = nxt
            break
        pi = nxt
    else:
        raise NonconvergentEigen("stationary vector did not settle")
    if np.any(pi <= 0):
        raise NotPrimitive("stationary vector has non-positive entries")
    return pi


@dataclass(frozen=True)
class SymbolicSystem:
    """Stationary Markov measure on a subshift of finite type.

    Attributes
    ----------
    d : int
        Alphabet size.
    A : ndarray of int, shape (d, d)
        Incidence matrix.
    Q : ndarray, shape (d, d)
        Transition probabilities, zero off the allowed edges.
    pi : ndarray, shape (d,)
        Stationary distribution of ``Q``.
    """

    d: int
    A: np.ndarray
    Q: np.ndarray
    pi: np.ndarray
    n0: int = field(default=0, compare=False)

    def __post_init__(self):
        A = _frozen(self.A, dtype=np.int64)
        Q = _frozen(self.Q)
        pi = _frozen(self.pi)
        d = int(self.d)
        if A.shape != (d, d) or Q.shape != (d, d) or pi.shape != (d,):
            raise ValueError("A, Q must be d x d and pi of length d")
        if np.any((A != 0) & (A != 1)):
            raise ValueError("incidence matrix must be 0/1")
        if np.any(Q < 0) or np.any((Q > 0) & (A == 0)):
            raise ValueError("Q must be nonnegative and supported on allowed edges")
        sums = Q.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"row {i} of Q sums to {sums[i]!r}, not 1")
        if np.any(pi <= 0) or abs(pi.sum() - 1.0) > ROW_TOL:
            raise ValueError("pi must be a positive probability vector")
        if np.max(np.abs(pi @ Q - pi)) > ROW_TOL:
            raise ValueError("pi is not stationary for Q")
        n0 = check_primitive(A)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "n0", n0)

    @classmethod
    def from_transition(cls, Q, A=None) -> "SymbolicSystem":
        """Build a system from its transition matrix; ``A`` defaults to the support of ``Q``."""
        Q = np.asarray(Q, dtype=float)
        if A is None:
            A = (Q > 0).astype(np.int64)
        pi = stationary_distribution(Q)
        return cls(d=Q.shape[0], A=A, Q=Q, pi=pi)

    def edge_weights(self) -> np.ndarray:
        """Stationary edge law ``pi[x] * Q[x, y]``."""
        return self.pi[:, None] * self.Q


@dataclass(frozen=True)
class Observable:
    """Real function of an edge.  Entries on forbidden edges are never read."""

    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("observable must be a square matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("observable has non-finite entries")
        object.__setattr__(self, "values", v)

    def mean(self, sys: SymbolicSystem) -> float:
        return float(np.sum(sys.edge_weights() * self.values))


@dataclass(frozen=True)
class Potential:
    """Locally constant potential on 2-cylinders."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("potential must be a square matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential has non-finite entries")
        object.__setattr__(self, "values", v)


def perron_pair(M, tol=1e-14, max_iter=MAX_ITER):
    """Dominant eigenvalue and positive right eigenvector of a primitive nonnegative matrix.

    Seeded from ``numpy.linalg.eig`` and polished by power iteration until
    successive iterates agree to ``tol`` relative to their maximum.
    """
    M = np.asarray(M, dtype=float)
    w, V = np.linalg.eig(M)
    h = np.abs(V[:, int(np.argmax(w.real))].real)
    h = np.where(h > 0, h, 1.0) / h.max()
    for _ in range(max_iter):
        w = M @ h
        rho = w.max()
        w /= rho
        if np.max(np.abs(w - h)) <= tol:
            return rho, w
        h = w
    raise NonconvergentEigen("Perron eigenvector did not converge")


def gibbs_from_potential(A, pot) -> SymbolicSystem:
    """Markov measure of a locally constant potential on the subshift of ``A``.

    The kernel is the Ruelle-Perron-Frobenius normalisation
    ``Q[x, y] = M[x, y] h[y] / (rho h[x])`` with ``M = A * exp(pot)``.
    Rows are divided by ``(M h)[x]``, which equals ``rho h[x]`` at the fixed
    point and keeps the row sums exact to rounding.
    """
    A = np.asarray(A, dtype=np.int64)
    check_primitive(A)
    values = pot.values if isinstance(pot, Potential) else np.asarray(pot, dtype=float)
    # constant shifts of the potential cancel; subtracting the max keeps exp bounded
    shifted = np.where(A == 1, values, -np.inf)
    shifted = shifted - shifted[A == 1].max()
    M = np.where(A == 1, np.exp(shifted), 0.0)
    _, h = perron_pair(M)
    Q = M * h[None, :]
    Q /= Q.sum(axis=1, keepdims=True)
    return SymbolicSystem.from_transition(Q, A=A)


def center_observable(sys: SymbolicSystem, raw) -> Observable:
    """Subtract the stationary edge mean.

    ``raw`` is either a d x d edge matrix or a length-d state vector, the latter
    broadcast as a function of the first coordinate.  Entries on forbidden
    edges are set to zero.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = np.repeat(raw[:, None], sys.d, axis=1)
    if raw.shape != (sys.d, sys.d):
        raise ValueError(f"observable must be {sys.d}x{sys.d} or length {sys.d}")
    mean = np.sum(sys.edge_weights() * raw)
    values = np.where(sys.A == 1, raw - mean, 0.0)
    return Observable(values=values, centered=True)
