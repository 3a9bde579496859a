"""Example systems shipped with the package.

Each factory returns ``(system, observable)`` with a centred observable.
"""
from __future__ import annotations

import numpy as np

from .model import Observable, SymbolicSystem, center_observable, gibbs_from_potential

TWO_STATE_Q = [[0.9, 0.1], [0.5, 0.5]]
GOLDEN_A = [[1, 1], [1, 0]]
SQRT2 = float(np.sqrt(2.0))


def two_state() -> tuple[SymbolicSystem, Observable]:
    """Sticky two-state chain with the state observable +1 / -1."""
    sys = SymbolicSystem.from_transition(TWO_STATE_Q)
    return sys, center_observable(sys, [1.0, -1.0])


def golden_mean() -> tuple[SymbolicSystem, Observable]:
    """Golden-mean shift with its Parry measure and an edge observable.

    The observable is non-lattice on ``0 < |t| <= 1``.
    """
    sys = gibbs_from_potential(GOLDEN_A, np.zeros((2, 2)))
    raw = [[1.0, -SQRT2], [-SQRT2, 0.0]]
    return sys, center_observable(sys, raw)


def iid3() -> tuple[SymbolicSystem, Observable]:
    """Three i.i.d. uniform symbols carrying rationally independent values."""
    Q = np.full((3, 3), 1.0 / 3.0)
    sys = SymbolicSystem.from_transition(Q)
    return sys, center_observable(sys, [1.0, SQRT2, -(1.0 + SQRT2)])


def integer_two_state() -> tuple[SymbolicSystem, Observable]:
    """Two-state chain with an integer observable; lattice with period 2*pi."""
    sys = SymbolicSystem.from_transition(TWO_STATE_Q)
    return sys, center_observable(sys, [1.0, 0.0])


def four_state() -> tuple[SymbolicSystem, Observable]:
    """Gibbs measure on a four-letter subshift with a forbidden-edge pattern."""
    A = [[1, 1, 0, 1],
         [0, 1, 1, 0],
         [1, 0, 1, 1],
         [1, 1, 0, 0]]
    pot = [[0.3, -0.2, 0.0, 0.5],
           [0.0, 0.1, -0.4, 0.0],
           [0.2, 0.0, -0.1, 0.7],
           [-0.3, 0.4, 0.0, 0.0]]
    sys = gibbs_from_potential(A, pot)
    raw = [[0.5, -1.2, 0.0, 2.0],
           [0.0, 0.7, -0.3, 0.0],
           [1.1, 0.0, -0.9, 0.25],
           [-1.5, 0.8, 0.0, 0.0]]
    return sys, center_observable(sys, raw)


def fair_coin() -> SymbolicSystem:
    return SymbolicSystem.from_transition(np.full((2, 2), 0.5))


def trivial() -> tuple[SymbolicSystem, Observable]:
    """One-letter system; every observable centres to zero."""
    sys = SymbolicSystem.from_transition([[1.0]])
    return sys, center_observable(sys, [[3.0]])


SHIPPED = {
    "two_state": two_state,
    "golden_mean": golden_mean,
    "iid3": iid3,
}

EXAMPLES = {
    **SHIPPED,
    "integer_two_state": integer_two_state,
    "four_state": four_state,
    "trivial": trivial,
}
