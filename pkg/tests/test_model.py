import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from loctime import systems
from loctime.errors import EmptyRowOrColumn, NotPrimitive
from loctime.model import (
    Observable,
    Potential,
    SymbolicSystem,
    center_observable,
    check_primitive,
    gibbs_from_potential,
    stationary_distribution,
)
from loctime.montecarlo import sample_path

GOLDEN = (1 + np.sqrt(5)) / 2


@pytest.mark.parametrize("A, n0", [
    (np.ones((2, 2)), 1),
    ([[1, 1], [1, 0]], 2),  # A^2 = [[2,1],[1,1]]
    ([[1]], 1),
])
def test_check_primitive_exponent(A, n0):
    assert check_primitive(A) == n0


def test_wielandt_matrix_attains_bound():
    # cycle 0->1->2->3->0 plus the chord 3->1: exponent (d-1)^2 + 1
    d = 4
    A = np.zeros((d, d), dtype=int)
    for i in range(d - 1):
        A[i, i + 1] = 1
    A[d - 1, 0] = A[d - 1, 1] = 1
    assert check_primitive(A) == d * d - 2 * d + 2


def test_check_primitive_rejects_period_two():
    with pytest.raises(NotPrimitive):
        check_primitive([[0, 1], [1, 0]])


def test_check_primitive_rejects_dead_state():
    with pytest.raises(EmptyRowOrColumn):
        check_primitive([[0, 1], [0, 1]])
    with pytest.raises(EmptyRowOrColumn):
        check_primitive([[0]])


@pytest.mark.parametrize("Q, pi", [
    ([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5]),
    ([[0.9, 0.1], [0.5, 0.5]], [5 / 6, 1 / 6]),  # solve pi Q = pi by hand
])
def test_stationary_distribution(Q, pi):
    got = stationary_distribution(Q)
    np.testing.assert_allclose(got, pi, atol=1e-15)
    assert np.max(np.abs(got @ np.asarray(Q) - got)) <= 1e-13


def test_stationary_distribution_rejects_reducible():
    with pytest.raises(NotPrimitive):
        stationary_distribution(np.eye(3))


@given(arrays(float, (4, 4), elements=st.floats(0.01, 1.0)))
def test_stationary_residual_random_positive(M):
    Q = M / M.sum(axis=1, keepdims=True)
    pi = stationary_distribution(Q)
    assert abs(pi.sum() - 1) <= 1e-13
    assert np.max(np.abs(pi @ Q - pi)) <= 1e-13


def test_gibbs_zero_potential_full_shift_is_uniform():
    sys = gibbs_from_potential(np.ones((3, 3), dtype=int), np.zeros((3, 3)))
    np.testing.assert_allclose(sys.Q, np.full((3, 3), 1 / 3), atol=1e-15)


def test_gibbs_golden_mean_is_parry():
    # Perron pair of [[1,1],[1,0]]: rho = golden ratio, h = (rho, 1)
    sys = gibbs_from_potential([[1, 1], [1, 0]], Potential(np.zeros((2, 2))))
    expected = np.array([[1 / GOLDEN, 1 / GOLDEN**2], [1.0, 0.0]])
    np.testing.assert_allclose(sys.Q, expected, atol=1e-14)
    np.testing.assert_allclose(sys.pi, [GOLDEN**2 / (1 + GOLDEN**2), 1 / (1 + GOLDEN**2)], atol=1e-14)


@given(arrays(float, (3, 3), elements=st.floats(-3, 3)), st.floats(-50, 50))
def test_gibbs_invariant_under_constant_shift(pot, c):
    A = np.array([[1, 1, 0], [0, 1, 1], [1, 1, 1]])
    a = gibbs_from_potential(A, pot)
    b = gibbs_from_potential(A, pot + c)
    np.testing.assert_allclose(a.Q, b.Q, atol=1e-10)


@given(arrays(float, (3, 3), elements=st.floats(-3, 3)))
def test_gibbs_cylinder_weights(pot):
    # mu[x0..xn] = pi[x0] h[xn] / h[x0] * exp(S_n pot) / rho^n with (rho, h) the
    # Perron pair of the weighted incidence matrix, computed here by numpy
    A = np.array([[1, 1, 0], [0, 1, 1], [1, 1, 1]])
    sys = gibbs_from_potential(A, pot)
    M = np.where(A == 1, np.exp(pot), 0.0)
    w, V = np.linalg.eig(M)
    k = int(np.argmax(w.real))
    rho, h = w[k].real, np.abs(V[:, k].real)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = [int(rng.integers(3))]
        for _ in range(6):
            x.append(int(rng.choice(np.flatnonzero(A[x[-1]]))))
        mu = sys.pi[x[0]] * np.prod([sys.Q[a, b] for a, b in zip(x, x[1:])])
        weight = np.exp(sum(pot[a, b] for a, b in zip(x, x[1:]))) / rho ** (len(x) - 1)
        assert mu == pytest.approx(sys.pi[x[0]] * h[x[-1]] / h[x[0]] * weight, rel=1e-9)


def test_center_constant_to_zero(two_state):
    sys, _ = two_state
    obs = center_observable(sys, np.full((2, 2), 7.0))
    assert obs.centered
    np.testing.assert_allclose(obs.values, 0.0, atol=1e-15)


def test_center_fair_coin_state_observable():
    sys = systems.fair_coin()
    obs = center_observable(sys, [1.0, 0.0])
    np.testing.assert_allclose(obs.values, [[0.5, 0.5], [-0.5, -0.5]], atol=1e-15)


@given(arrays(float, (2, 2), elements=st.floats(-1e3, 1e3)))
def test_center_idempotent(raw):
    sys, _ = systems.golden_mean()
    once = center_observable(sys, raw)
    twice = center_observable(sys, once.values)
    np.testing.assert_allclose(twice.values, once.values, atol=1e-14 * max(1.0, np.abs(raw).max()))
    assert abs(once.mean(sys)) <= 1e-12 * max(1.0, np.abs(raw).max())


def test_center_zeroes_forbidden_edges(golden):
    sys, obs = golden
    assert obs.values[1, 1] == 0.0


def test_system_invariants(shipped):
    _, sys, obs = shipped
    assert np.max(np.abs(sys.Q.sum(axis=1) - 1)) <= 1e-12
    assert np.max(np.abs(sys.pi @ sys.Q - sys.pi)) <= 1e-12
    assert abs(sys.pi.sum() - 1) <= 1e-12
    assert np.all(sys.pi > 0)
    assert 1 <= sys.n0 <= sys.d**2 - 2 * sys.d + 2
    assert obs.centered and abs(obs.mean(sys)) <= 1e-12


def test_system_is_immutable(two_state):
    sys, obs = two_state
    with pytest.raises(ValueError):
        sys.Q[0, 0] = 0.5
    with pytest.raises(ValueError):
        obs.values[0, 0] = 1.0


def test_system_rejects_bad_row():
    with pytest.raises(ValueError, match="row 1"):
        SymbolicSystem(d=2, A=np.ones((2, 2), int), Q=[[0.5, 0.5], [0.4, 0.5]], pi=[0.5, 0.5])


def test_system_rejects_mass_on_forbidden_edge():
    with pytest.raises(ValueError):
        SymbolicSystem(d=2, A=[[1, 1], [1, 0]], Q=[[0.5, 0.5], [0.5, 0.5]], pi=[0.5, 0.5])


def test_observable_rejects_nonfinite():
    with pytest.raises(ValueError):
        Observable(values=[[np.nan]])


def test_one_letter_system(trivial):
    sys, obs = trivial
    assert sys.d == 1 and sys.n0 == 1
    assert obs.values[0, 0] == 0.0


@pytest.mark.parametrize("name", sorted(systems.EXAMPLES))
def test_empirical_mean_of_increments(name):
    sys, obs = systems.EXAMPLES[name]()
    p = sample_path(sys, obs, 10**5, seed=4242)
    assert abs(p.increments.mean()) <= 5 / np.sqrt(10**5)
