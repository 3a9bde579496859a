import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from loctime import kernel_quadrature as kq
from loctime import systems
from loctime.errors import QuadratureImagResidue

FEJER = kq.fejer_kernel()


def enumerate_density(sys, obs, n, x, f=FEJER.f):
    """E f(S_n - x) by summing over every admissible path."""
    total = 0.0
    for path in itertools.product(range(sys.d), repeat=n + 1):
        p = sys.pi[path[0]]
        s = 0.0
        for a, b in zip(path, path[1:]):
            p *= sys.Q[a, b]
            s += obs.values[a, b]
        if p > 0:
            total += p * f(s - x)
    return float(total)


def test_fejer_values():
    assert FEJER.f(0.0) == 1.0
    assert FEJER.f(np.pi) == pytest.approx(4 / np.pi**2, rel=1e-15)
    assert FEJER.f(2 * np.pi) == pytest.approx(0.0, abs=1e-30)
    np.testing.assert_array_equal(FEJER.fhat([0.0, 0.5, 1.0, -1.0, 2.0]), [1.0, 0.5, 0.0, 0.0, 0.0])
    assert FEJER.mass == pytest.approx(2 * np.pi * FEJER.fhat(0.0))


@pytest.mark.parametrize("x", [0.0, 0.3, 2.0, 17.5])
def test_fejer_is_inverse_transform(x):
    val, _ = quad(lambda t: (1 - abs(t)) * np.cos(t * x), -1, 1, points=[0], limit=200)
    assert FEJER.f(x) == pytest.approx(val, abs=1e-12)


def test_fejer_series_branch_is_continuous():
    x = kq.SERIES_CUTOFF
    below, above = FEJER.f(np.nextafter(x, 0)), FEJER.f(x)
    assert abs(below - above) <= 1e-15


@given(st.floats(-1e8, 1e8))
def test_fejer_nonnegative_symmetric_bounded(x):
    v = FEJER.f(x)
    assert 0.0 <= v <= 1.0
    assert v == FEJER.f(-x)


@pytest.mark.parametrize("u", [0.0, 0.5, 3.0, 40.0])
def test_primitive_and_tails_against_quad(u):
    val, _ = quad(FEJER.f, 0, u, limit=500)
    assert FEJER.primitive(u) == pytest.approx(val, abs=1e-10)
    assert FEJER.mass_window(u) == pytest.approx(2 * val, abs=1e-10)
    assert FEJER.mass_tail(u) == pytest.approx(np.pi - val, abs=1e-10)


def test_primitive_limit_and_derivative():
    assert FEJER.primitive(1e9) == pytest.approx(np.pi, abs=1e-8)
    x, h = 1.3, 1e-5
    assert (FEJER.primitive(x + h) - FEJER.primitive(x - h)) / (2 * h) == pytest.approx(FEJER.f(x), rel=1e-8)


def test_get_kernel():
    assert kq.get_kernel("fejer").name == "fejer"
    with pytest.raises(ValueError):
        kq.get_kernel("gauss")


def test_simpson_grid():
    g = kq.simpson_grid()
    assert g.nodes.size == 4097 and g.nodes.size % 2 == 1
    assert g.weights.sum() == pytest.approx(2.0, rel=1e-14)
    assert np.sum(g.weights * g.nodes**3 - g.weights * 2 * g.nodes**2) == pytest.approx(-4 / 3, rel=1e-13)
    with pytest.raises(ValueError):
        kq.simpson_grid(4096)


@pytest.mark.parametrize("k", [0.0, 0.05, 3.0, 50.0, 1000.0])
def test_oscillatory_weights_against_quad(k):
    grid = kq.simpson_grid()
    g = lambda t: (1 - abs(t)) * (1 + 0.3 * t)  # noqa: E731
    got = np.sum(kq.oscillatory_weights(grid, k) * g(grid.nodes))
    # split at the kink; a single weighted quad over [-1, 1] loses digits there
    halves = ((-1, 0), (0, 1))
    re = sum(quad(g, a, b, weight="cos", wvar=k, epsabs=1e-15)[0] for a, b in halves)
    im = sum(quad(g, a, b, weight="sin", wvar=k, epsabs=1e-15)[0] for a, b in halves)
    assert abs(got - (re + 1j * im)) <= 1e-10


@pytest.mark.parametrize("name", sorted(systems.SHIPPED))
@pytest.mark.parametrize("x", [0.0, 0.7, -2.3, 25.0])
def test_density_one_step_matches_enumeration(name, x):
    sys, obs = systems.SHIPPED[name]()
    got = kq.expected_kernel_density(sys, obs, FEJER, 1, x)
    assert abs(got - enumerate_density(sys, obs, 1, x)) <= 1e-8


@pytest.mark.parametrize("name", ["iid3", "golden_mean", "four_state"])
def test_density_several_steps_matches_enumeration(name):
    sys, obs = systems.EXAMPLES[name]()
    n = 5
    for x in (0.0, 1.1):
        got = kq.expected_kernel_density(sys, obs, FEJER, n, x)
        assert abs(got - enumerate_density(sys, obs, n, x)) <= 1e-10


@pytest.mark.parametrize("x", [1e6, -1e6])
def test_density_far_from_origin(two_state, x):
    assert abs(kq.expected_kernel_density(*two_state, FEJER, 10, x)) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(-50, 50))
def test_density_nonnegative(x):
    sys, obs = systems.golden_mean()
    assert kq.expected_kernel_density(sys, obs, FEJER, 30, x) >= -1e-12


def test_density_node_doubling(golden):
    sys, obs = golden
    a = kq.expected_kernel_density(sys, obs, FEJER, 100, 0.4)
    b = kq.expected_kernel_density(sys, obs, FEJER, 100, 0.4, grid=kq.simpson_grid(8193))
    assert abs(a - b) <= 1e-8


def test_density_curve_matches_pointwise(iid3):
    sys, obs = iid3
    curve = kq.kernel_density_curve(sys, obs, FEJER, [3, 1, 20], x=0.5)
    for n, v in zip([1, 3, 20], curve):
        assert v == pytest.approx(kq.expected_kernel_density(sys, obs, FEJER, n, 0.5), abs=1e-14)


def test_density_rejects_asymmetric_kernel(golden):
    skew = kq.SmoothingKernel("skew", lambda t: FEJER.fhat(t) * (1 + 0.5 * np.asarray(t)), FEJER.f,
                              FEJER.mass, FEJER.primitive)
    with pytest.raises(QuadratureImagResidue):
        kq.expected_kernel_density(*golden, skew, 3, 0.0)


def test_lambda_l1_norm(shipped):
    _, sys, obs = shipped
    delta = 0.5
    assert kq.lambda_l1_norm(sys, obs, 0, delta) == pytest.approx(2 * delta, rel=1e-14)
    vals = kq.lambda_l1_norms(sys, obs, [1, 4, 16, 64, 256], delta, n_nodes=257)
    assert np.all(np.diff(vals) <= 0)


def test_lambda_l1_scaling(iid3):
    sys, obs = iid3
    v = 2 + 2 * np.sqrt(2) / 3
    n = 4096
    got = np.sqrt(n) * kq.lambda_l1_norm(sys, obs, n, 0.5, n_nodes=1025)
    assert got == pytest.approx(np.sqrt(2 * np.pi / v), rel=0.02)


def test_potential_kernel_zero_offset(golden):
    p = kq.potential_kernel_sum(*golden, FEJER, 0.0, 50)
    assert p.value == 0.0 and p.horizon == 50


def test_potential_kernel_first_term_and_monotone(shipped):
    _, sys, obs = shipped
    y = 0.3
    p = kq.potential_kernel_sum(sys, obs, FEJER, y, 200)
    exact = abs(enumerate_density(sys, obs, 1, 0.0) - enumerate_density(sys, obs, 1, -y))
    assert p.terms[0] == pytest.approx(exact, abs=1e-10)
    assert np.all(np.diff(p.partial) >= 0)
    assert p.at(0) == 0.0 and p.at(200) == p.value
    assert p.tail_after(100) == pytest.approx(p.value - p.at(100))
    assert p.max_increment_after(200) == 0.0


def test_potential_kernel_ratio_bounded(iid3):
    sums = kq.potential_kernel_sums(*iid3, FEJER, [0.1, 0.5, 1.0], 2000)
    r = np.array([p.value / p.y for p in sums])
    assert r.max() / r.min() <= 10


def test_potential_kernel_rejects_empty_horizon(iid3):
    with pytest.raises(ValueError):
        kq.potential_kernel_sum(*iid3, FEJER, 0.2, 0)
