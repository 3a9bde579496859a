import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loctime import systems
from loctime import spectral as sp
from loctime.errors import InvalidGrid, NonconvergentSeries, SpectralOverflow, TooLarge, UncenteredObservable
from loctime.kernel_quadrature import charfn_power
from loctime.model import Observable, SymbolicSystem, center_observable

SQRT2 = np.sqrt(2.0)

# Asymptotic variances frozen from the fundamental matrix of the edge chain,
# v = 2 <f, Z f>_mu - <f, f>_mu with Z = (I - P + 1 mu)^-1 (see scripts/variance_oracle.py).
FROZEN_VARIANCE = {
    "two_state": 35 / 27,
    "golden_mean": 2.0852414804537807,
    "iid3": 2 + 2 * SQRT2 / 3,
    "integer_two_state": 0.32407407407407407,
    "four_state": 0.7724192403173215,
}


def edge_chain_variance(sys, obs):
    edges = [(x, y) for x in range(sys.d) for y in range(sys.d) if sys.Q[x, y] > 0]
    P = np.array([[sys.Q[c, e] if c == b else 0.0 for c, e in edges] for _, b in edges])
    mu = np.array([sys.pi[a] * sys.Q[a, b] for a, b in edges])
    f = np.array([obs.values[a, b] for a, b in edges])
    Z = np.linalg.inv(np.eye(len(edges)) - P + np.outer(np.ones(len(edges)), mu))
    return 2 * mu @ (f * (Z @ f)) - mu @ (f * f)


@pytest.mark.parametrize("name", sorted(FROZEN_VARIANCE))
def test_frozen_variance_matches_oracle(name):
    sys, obs = systems.EXAMPLES[name]()
    assert edge_chain_variance(sys, obs) == pytest.approx(FROZEN_VARIANCE[name], rel=1e-12)


@pytest.mark.parametrize("name", sorted(FROZEN_VARIANCE))
def test_variance_green_kubo_and_curvature(name):
    sys, obs = systems.EXAMPLES[name]()
    r = sp.variance(sys, obs)
    assert r.v_gk == pytest.approx(FROZEN_VARIANCE[name], rel=1e-10)
    assert r.v_fd == pytest.approx(FROZEN_VARIANCE[name], rel=1e-6)
    assert r.rel_err <= 1e-4


def test_variance_zero_observable(trivial):
    r = sp.variance(*trivial)
    assert r.v_gk == 0.0 and abs(r.v_fd) <= 1e-8


def test_variance_iid_is_second_moment(iid3):
    sys, obs = iid3
    assert sp.green_kubo(sys, obs)[0] == pytest.approx(np.sum(sys.pi * obs.values[:, 0] ** 2), rel=1e-13)


def test_green_kubo_nonconvergent_for_near_periodic_chain():
    eps = 1e-4
    sys = SymbolicSystem.from_transition([[eps, 1 - eps], [1 - eps, eps]])
    obs = center_observable(sys, [1.0, -1.0])
    with pytest.raises(NonconvergentSeries):
        sp.green_kubo(sys, obs)


def test_uncentered_observable_rejected(two_state):
    sys, _ = two_state
    raw = Observable(values=np.ones((2, 2)), centered=True)
    with pytest.raises(UncenteredObservable):
        sp.variance(sys, raw)
    with pytest.raises(UncenteredObservable):
        sp.variance(sys, Observable(values=np.zeros((2, 2))))


def test_char_operator_at_zero_fixes_constants_and_preserves_mean(shipped, rng):
    _, sys, obs = shipped
    M = sp.char_operator(sys, obs, 0.0).M
    np.testing.assert_allclose(M @ np.ones(sys.d), 1.0, atol=1e-14)
    g = rng.standard_normal(sys.d)
    assert sys.pi @ (M @ g) == pytest.approx(sys.pi @ g, abs=1e-14)


def test_char_operator_iid_closed_form(iid3):
    sys, obs = iid3
    t = 0.37
    expected = np.sum(np.exp(1j * t * obs.values[:, 0])) / 3
    M = sp.char_operator(sys, obs, t).M
    np.testing.assert_allclose(M @ np.ones(3), expected, atol=1e-15)


@given(st.floats(-10, 10))
def test_conjugate_symmetry_of_operator(t):
    sys, obs = systems.four_state()
    np.testing.assert_allclose(sp.char_operator(sys, obs, -t).M, np.conj(sp.char_operator(sys, obs, t).M),
                               atol=1e-15)


@pytest.mark.parametrize("name", sorted(systems.EXAMPLES))
def test_one_step_charfn_matches_operator(name):
    sys, obs = systems.EXAMPLES[name]()
    for t in (0.3, 1.7):
        via_op = sys.pi @ (sp.char_operator(sys, obs, t).M @ np.ones(sys.d))
        assert abs(sp.one_step_charfn(sys, obs, t) - via_op) <= 1e-14


def test_brute_force_edge_cases(two_state):
    sys, obs = two_state
    assert sp.brute_force_charfn(sys, obs, 6, 0.0) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(TooLarge):
        sp.brute_force_charfn(sys, obs, 40, 0.5)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(sorted(systems.EXAMPLES)), st.integers(1, 8), st.floats(-5, 5))
def test_brute_force_matches_matrix_powers(name, n, t):
    sys, obs = systems.EXAMPLES[name]()
    bf = sp.brute_force_charfn(sys, obs, n, t)
    assert abs(bf - sp.charfn_matpow(sys, obs, n, t)) <= 1e-12
    assert abs(bf - charfn_power(sys, obs, np.array([t]), n)[0]) <= 1e-12


def test_dominant_eigen_at_zero(shipped):
    _, sys, obs = shipped
    e = sp.eigen_at(sys, obs, 0.0)
    assert abs(e.lam - 1) <= 1e-13
    np.testing.assert_allclose(e.eta, 1.0, atol=1e-12)
    np.testing.assert_allclose(e.xi, sys.pi, atol=1e-12)
    assert e.gap_ratio < 1


@pytest.mark.parametrize("t", [0.05, 0.2, -0.4])
def test_eigen_triple_invariants(shipped, t):
    _, sys, obs = shipped
    s = sp.char_operator(sys, obs, t)
    e = sp.dominant_eigen(s, sys.pi)
    assert np.max(np.abs(s.M @ e.eta - e.lam * e.eta)) <= 1e-10
    assert np.max(np.abs(e.xi @ s.M - e.lam * e.xi)) <= 1e-10
    assert abs(np.sum(sys.pi * e.eta) - 1) <= 1e-12
    assert abs(e.xi @ e.eta - 1) <= 1e-12
    assert abs(abs(e.lam) - max(abs(np.linalg.eigvals(s.M)))) <= 1e-10
    assert e.gap_ratio <= sp.GAP_MAX


def test_iid_eigenvalue_is_charfn(iid3):
    sys, obs = iid3
    for t in np.linspace(-0.5, 0.5, 11):
        assert abs(sp.eigen_at(sys, obs, t).lam - np.mean(np.exp(1j * t * obs.values[:, 0]))) <= 1e-12


def test_eigenvalue_small_t_expansion(two_state):
    sys, obs = two_state
    t = 0.01
    lam = sp.eigen_at(sys, obs, t).lam
    assert abs(lam - (1 - 35 / 27 * t**2 / 2)) <= 1e-6


def test_perturbation_window_for_shipped(shipped):
    _, sys, obs = shipped
    assert sp.perturbation_window(sys, obs) == 0.5


def test_decay_constant_positive(shipped):
    _, sys, obs = shipped
    curve = sp.eigenvalue_curve(sys, obs, np.linspace(0.01, 0.5, 30))
    assert sp.decay_constant(curve) > 0
    assert all(abs(e.lam) <= 1 for e in curve)


@pytest.mark.parametrize("M, rho", [
    ([[0, 1], [0, 0]], 0.0),
    (np.diag([0.5, 0.2]), 0.5),
    (np.eye(3), 1.0),
    (np.zeros((2, 2)), 0.0),
])
def test_spectral_radius_examples(M, rho):
    assert sp.spectral_radius(M) == pytest.approx(rho, abs=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_spectral_radius_matches_eigvals(seed):
    r = np.random.default_rng(seed)
    M = r.standard_normal((4, 4)) + 1j * r.standard_normal((4, 4))
    exact = max(abs(np.linalg.eigvals(M)))
    assert sp.spectral_radius(M) == pytest.approx(exact, rel=5e-3)


def test_spectral_radius_rejects_nonfinite():
    with pytest.raises(SpectralOverflow):
        sp.spectral_radius([[np.inf, 0], [0, 1]])


def test_remainder_decay_iid_vanishes(iid3):
    sys, obs = iid3
    assert max(sp.remainder_decay(sys, obs, 0.3, 5)) <= 1e-12


def test_remainder_decay_rate_golden(golden):
    sys, obs = golden
    e = sp.eigen_at(sys, obs, 0.1)
    norms = np.array(sp.remainder_decay(sys, obs, 0.1, 40))
    k = np.arange(1, 41)
    ok = norms > 1e-280
    slope = np.polyfit(k[ok], np.log(norms[ok]), 1)[0]
    assert slope <= np.log(e.gap_ratio) + 0.05


def test_eta_derivative_real_part_vanishes(shipped):
    _, sys, obs = shipped
    assert sp.eta_prime_check(sys, obs, 1e-3) <= 1e-9


def test_eta_forward_quotient_is_first_order(golden):
    sys, obs = golden
    a = sp.eta_forward_check(sys, obs, 1e-3)
    b = sp.eta_forward_check(sys, obs, 5e-4)
    assert a / b == pytest.approx(2.0, rel=0.05)


def test_eta_prime_rejects_large_step(golden):
    with pytest.raises(ValueError):
        sp.eta_prime_check(*golden, h=0.01)


def test_scan_finds_lattice_frequency():
    sys, obs = systems.integer_two_state()
    step = 2 * np.pi / 128
    r = sp.aperiodicity_scan(sys, obs, step, 7.0, step)
    assert not r.aperiodic
    assert r.argmax_t == pytest.approx(2 * np.pi, abs=1e-6)
    assert r.max_rho >= 1 - sp.LATTICE_TOL


def test_scan_refinement_catches_off_grid_lattice():
    sys, obs = systems.integer_two_state()
    r = sp.aperiodicity_scan(sys, obs, 0.05, 7.0, 0.01)
    assert r.argmax_t == pytest.approx(2 * np.pi, abs=1e-6)


def test_scan_non_lattice_window(shipped):
    _, sys, obs = shipped
    assert sp.aperiodicity_scan(sys, obs, 0.05, 1.0, 0.001).max_rho <= 0.999


@pytest.mark.parametrize("lo, hi, step", [(0.0, 1.0, 0.1), (1.0, 0.5, 0.1), (0.1, 1.0, 0.0), (-1, 1, 0.1)])
def test_scan_rejects_bad_grid(two_state, lo, hi, step):
    with pytest.raises(InvalidGrid):
        sp.aperiodicity_scan(*two_state, lo, hi, step)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.25, 4.0))
def test_scan_rescaling_invariance(c):
    sys, obs = systems.golden_mean()
    scaled = Observable(values=c * obs.values, centered=True)
    a = sp.aperiodicity_scan(sys, obs, 0.05, 1.0, 0.01, refine=False)
    b = sp.aperiodicity_scan(sys, scaled, 0.05 / c, 1.0 / c, 0.01 / c, refine=False)
    np.testing.assert_allclose(a.rho_grid, b.rho_grid, atol=1e-9)
