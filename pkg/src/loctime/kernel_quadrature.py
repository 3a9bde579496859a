"""Smoothing kernels with compactly supported Fourier transform and Fourier-side expectations.

Convention: ``f(x) = int fhat(t) exp(i t x) dt``, so ``int f = 2 pi fhat(0)`` and

    E f(S_n - x) = int_{-1}^{1} fhat(t) m(P(t)^n 1) exp(-i t x) dt.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit
from scipy.special import sici

from .errors import QuadratureImagResidue
from .model import Observable, SymbolicSystem
from .spectral import _require_centered, char_matrix, eigen_at

DEFAULT_NODES = 2**12 + 1
IMAG_TOL = 1e-10
SERIES_CUTOFF = 1e-4
UNDERFLOW = 1e-250


@dataclass(frozen=True)
class SmoothingKernel:
    """Nonnegative symmetric kernel ``f`` with transform ``fhat`` supported in [-1, 1].

    ``primitive`` is ``F(x) = int_0^x f``; it gives exact occupation integrals
    and the tail masses used by the sandwich bounds.
    """

    name: str
    fhat: Callable
    f: Callable
    mass: float
    primitive: Callable

    def mass_tail(self, u):
        """``int_u^inf f``."""
        return self.mass / 2 - self.primitive(u)

    def mass_window(self, u):
        """``int_{-u}^{u} f``."""
        return 2 * self.primitive(u)


def _fejer_fhat(t):
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(t, dtype=float)))


def _fejer_f(x):
    # 2(1 - cos x)/x^2 written as sinc^2(x/2) to avoid cancellation
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_CUTOFF
    half = np.where(small, 1.0, x / 2)
    out = (np.sin(half) / half) ** 2
    x2 = x * x
    return np.where(small, 1.0 - x2 / 12 + x2 * x2 / 360, out)


def _fejer_primitive(x):
    # F(x) = 2 Si(x) - x f(x), odd, F(inf) = pi
    x = np.asarray(x, dtype=float)
    si, _ = sici(x)
    return 2 * si - x * _fejer_f(x)


def fejer_kernel() -> SmoothingKernel:
    return SmoothingKernel(name="fejer", fhat=_fejer_fhat, f=_fejer_f, mass=2 * np.pi,
                           primitive=_fejer_primitive)


KERNELS = {"fejer": fejer_kernel}


def get_kernel(name: str) -> SmoothingKernel:
    try:
        return KERNELS[name]()
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; available: {sorted(KERNELS)}") from None


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights differ in length")


def simpson_grid(n_nodes: int = DEFAULT_NODES, lo: float = -1.0, hi: float = 1.0) -> QuadratureGrid:
    """Composite Simpson rule; with the default symmetric interval ``t = 0`` is a panel edge."""
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ValueError("Simpson rule needs an odd node count >= 3")
    nodes = np.linspace(lo, hi, n_nodes)
    h = (hi - lo) / (n_nodes - 1)
    w = np.full(n_nodes, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return QuadratureGrid(nodes=nodes, weights=w * h / 3)


def _filon_coefficients(theta: float):
    """Filon's alpha, beta, gamma; Taylor branch for small ``theta`` where the closed forms cancel."""
    if abs(theta) < 0.1:
        t2 = theta * theta
        alpha = theta * t2 * (2 / 45 + t2 * (-2 / 315 + t2 * (2 / 4725 + t2 * (-8 / 467775 + t2 * 4 / 8513505))))
        beta = 2 / 3 + t2 * (2 / 15 + t2 * (-4 / 105 + t2 * (2 / 567 + t2 * (-4 / 22275 + t2 * 4 / 675675))))
        gamma = 4 / 3 + t2 * (-2 / 15 + t2 * (1 / 210 + t2 * (-1 / 11340 + t2 * (1 / 997920 - t2 / 129729600))))
        return alpha, beta, gamma
    s, c = np.sin(theta), np.cos(theta)
    alpha = 1 / theta + s * c / theta**2 - 2 * s * s / theta**3
    beta = 2 * ((1 + c * c) / theta**2 - 2 * s * c / theta**3)
    gamma = 4 * (s / theta**3 - c / theta**2)
    return alpha, beta, gamma


def oscillatory_weights(grid: QuadratureGrid, k: float) -> np.ndarray:
    """Complex weights ``w`` with ``sum(w * g) ~ int g(t) exp(i k t) dt`` (Filon-Simpson).

    Each Simpson panel's quadratic interpolant of ``g`` is integrated against
    the exponential exactly, so the rule stays accurate when ``k`` is far
    beyond the node spacing.  For ``k = 0`` the weights are Simpson's.
    """
    t = grid.nodes
    if k == 0:
        return grid.weights.astype(complex)
    h = (t[-1] - t[0]) / (t.size - 1)
    alpha, beta, gamma = _filon_coefficients(k * h)
    e = np.exp(1j * k * t)
    w = np.empty(t.size, dtype=complex)
    w[0::2] = beta * e[0::2]
    w[1::2] = gamma * e[1::2]
    w[0] = 0.5 * beta * e[0] + 1j * alpha * e[0]
    w[-1] = 0.5 * beta * e[-1] - 1j * alpha * e[-1]
    return h * w


def _default_grid(grid):
    return simpson_grid() if grid is None else grid


@njit(cache=True)
def _advance(mats, g, pi, out):
    """Apply ``out.shape[0]`` steps of ``g <- P(t) g`` at every node, recording ``m(g)``.

    Nodes whose iterate has decayed below ``UNDERFLOW`` are zeroed; left alone
    they drift into subnormal arithmetic, which is two orders of magnitude slower.
    """
    steps, K = out.shape
    d = g.shape[1]
    tmp = np.empty(d, dtype=np.complex128)
    for k in range(K):
        for s in range(steps):
            big = 0.0
            for i in range(d):
                acc = 0j
                for j in range(d):
                    acc += mats[k, i, j] * g[k, j]
                tmp[i] = acc
                big = max(big, abs(acc))
            if big < UNDERFLOW:
                for i in range(d):
                    g[k, i] = 0j
                out[s:, k] = 0j
                break
            m = 0j
            for i in range(d):
                g[k, i] = tmp[i]
                m += pi[i] * tmp[i]
            out[s, k] = m


def iter_charfn(sys: SymbolicSystem, obs: Observable, nodes, n_max: int, chunk: int = 256):
    """Yield ``(n, m(P(t)^n 1))`` at every node for ``n = 1..n_max``."""
    _require_centered(sys, obs)
    mats = np.ascontiguousarray(char_matrix(sys, obs, np.asarray(nodes, dtype=float)))
    g = np.ones((mats.shape[0], sys.d), dtype=complex)
    pi = sys.pi.astype(complex)
    n = 0
    while n < n_max:
        steps = min(chunk, n_max - n)
        out = np.empty((steps, mats.shape[0]), dtype=complex)
        _advance(mats, g, pi, out)
        for row in out:
            n += 1
            yield n, row


def charfn_power(sys: SymbolicSystem, obs: Observable, nodes, n: int) -> np.ndarray:
    if n == 0:
        return np.ones(np.size(nodes), dtype=complex)
    for _, c in iter_charfn(sys, obs, nodes, n):
        pass
    return c


def _real_part(z, what):
    z = complex(z)
    if abs(z.imag) > IMAG_TOL:
        raise QuadratureImagResidue(f"{what}: imaginary residue {z.imag:.3e}")
    return z.real


def expected_kernel_density(sys: SymbolicSystem, obs: Observable, kernel: SmoothingKernel,
                            n: int, x: float, grid: QuadratureGrid | None = None) -> float:
    """``E f(S_n - x)`` by Fourier inversion over the support of ``fhat``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grid = _default_grid(grid)
    c = charfn_power(sys, obs, grid.nodes, n)
    w = oscillatory_weights(grid, -x) * kernel.fhat(grid.nodes)
    return _real_part(np.sum(w * c), "kernel density")


def kernel_density_curve(sys, obs, kernel, ns, x=0.0, grid=None) -> np.ndarray:
    """``E f(S_n - x)`` for every ``n`` in the increasing list ``ns`` in one pass."""
    grid = _default_grid(grid)
    ns = sorted(int(n) for n in ns)
    want = set(ns)
    w = oscillatory_weights(grid, -x) * kernel.fhat(grid.nodes)
    out = {}
    for n, c in iter_charfn(sys, obs, grid.nodes, ns[-1]):
        if n in want:
            out[n] = _real_part(np.sum(w * c), "kernel density")
    return np.array([out[n] for n in ns])


def lambda_l1_norms(sys: SymbolicSystem, obs: Observable, ns, delta: float,
                    n_nodes: int = DEFAULT_NODES) -> np.ndarray:
    """``int_{-delta}^{delta} |lambda(t)|^n dt`` for each ``n`` in ``ns``."""
    grid = simpson_grid(n_nodes, -delta, delta)
    mod = np.array([abs(eigen_at(sys, obs, float(t)).lam) for t in grid.nodes])
    mod = np.minimum(mod, 1.0)
    return np.array([float(np.sum(grid.weights * mod ** int(n))) for n in ns])


def lambda_l1_norm(sys, obs, n: int, delta: float, n_nodes: int = DEFAULT_NODES) -> float:
    return float(lambda_l1_norms(sys, obs, [n], delta, n_nodes)[0])


@dataclass
class PotentialKernelSum:
    """Per-step terms ``|E f(S_n) - E f(S_n + y)|`` for ``n = 1..N`` and their partial sums."""

    y: float
    terms: np.ndarray
    partial: np.ndarray = field(init=False)

    def __post_init__(self):
        self.partial = np.cumsum(self.terms)

    @property
    def horizon(self) -> int:
        return self.terms.size

    @property
    def value(self) -> float:
        return float(self.partial[-1]) if self.terms.size else 0.0

    def at(self, N: int) -> float:
        return float(self.partial[N - 1]) if N > 0 else 0.0

    def max_increment_after(self, n0: int) -> float:
        """Largest single term with index ``n > n0``."""
        tail = self.terms[n0:]
        return float(tail.max()) if tail.size else 0.0

    def tail_after(self, n0: int) -> float:
        """Accumulated increments from ``n0 + 1`` to the horizon."""
        return self.value - self.at(n0)

    def tail_estimate(self, n0: int) -> float:
        """Extrapolated remainder beyond ``n0`` assuming ``n^{-3/2}`` decay of the terms."""
        return 2.0 * n0 * float(self.terms[n0 - 1])


def potential_kernel_sums(sys: SymbolicSystem, obs: Observable, kernel: SmoothingKernel,
                          ys, N: int, grid: QuadratureGrid | None = None) -> list[PotentialKernelSum]:
    """Potential-kernel partial sums for several offsets sharing one sweep over ``n``."""
    if N < 1:
        raise ValueError("horizon must be >= 1")
    grid = _default_grid(grid)
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    fh = kernel.fhat(grid.nodes)
    W = np.stack([(grid.weights - oscillatory_weights(grid, y)) * fh if y != 0 else np.zeros(fh.size)
                  for y in ys])  # (Y, K)
    terms = np.empty((ys.size, N))
    for n, c in iter_charfn(sys, obs, grid.nodes, N):
        vals = W @ c
        if np.max(np.abs(vals.imag)) > IMAG_TOL:
            raise QuadratureImagResidue(f"potential kernel term n={n}: imaginary residue "
                                        f"{np.max(np.abs(vals.imag)):.3e}")
        terms[:, n - 1] = np.abs(vals.real)
    return [PotentialKernelSum(y=float(y), terms=row) for y, row in zip(ys, terms)]


def potential_kernel_sum(sys, obs, kernel, y: float, N: int, grid=None) -> PotentialKernelSum:
    return potential_kernel_sums(sys, obs, kernel, [y], N, grid)[0]
