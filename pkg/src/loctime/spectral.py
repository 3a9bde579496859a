"""Twisted transfer operators ``P(t)`` and their perturbative spectral data.

Functions of the zeroth coordinate form a d-dimensional space invariant under
the transfer operator of a Markov measure.  On that space

    P(t)[y, x] = pi[x] Q[x, y] exp(i t phi(x, y)) / pi[y],

and ``sum(pi * (P(t)^n 1)) = E exp(i t S_n)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    InvalidGrid,
    NonconvergentEigen,
    NonconvergentSeries,
    SpectralOverflow,
    TooLarge,
    UncenteredObservable,
)
from .model import Observable, SymbolicSystem

CENTER_TOL = 1e-12
EIG_TOL = 1e-12
EIG_MAX_ITER = 100_000
GELFAND_LEVELS = 12
GELFAND_RTOL = 1e-6
GAP_MAX = 0.95
LATTICE_TOL = 1e-8
GK_TERM_TOL = 1e-14
GK_MAX_TERMS = 10_000
ENUM_LIMIT = 10**7


@dataclass(frozen=True)
class CharOperatorSample:
    t: float
    M: np.ndarray


@dataclass(frozen=True)
class EigenData:
    """Dominant eigen-triple of ``P(t)``.

    ``eta`` is scaled so that ``sum(pi * eta) = 1`` and ``xi`` so that
    ``xi @ eta = 1``.  ``gap_ratio`` is the spectral radius of the remainder
    ``N(t) = P(t) - lam * outer(eta, xi)`` divided by ``|lam|``.
    """

    t: float
    lam: complex
    eta: np.ndarray
    xi: np.ndarray
    gap_ratio: float
    iterations: int = 0

    def remainder(self, M) -> np.ndarray:
        return M - self.lam * np.outer(self.eta, self.xi)


@dataclass(frozen=True)
class VarianceReport:
    v_gk: float
    v_fd: float
    rel_err: float
    terms: int = 0


@dataclass(frozen=True)
class ScanResult:
    max_rho: float
    argmax_t: float
    t_grid: np.ndarray
    rho_grid: np.ndarray

    @property
    def aperiodic(self) -> bool:
        return self.max_rho < 1.0 - LATTICE_TOL


def _require_centered(sys: SymbolicSystem, obs: Observable):
    if not obs.centered:
        raise UncenteredObservable("observable is not flagged as centred")
    scale = max(1.0, float(np.max(np.abs(obs.values))))
    mean = obs.mean(sys)
    if abs(mean) > CENTER_TOL * scale:
        raise UncenteredObservable(f"observable mean {mean!r} is not zero")


def reversed_kernel(sys: SymbolicSystem) -> np.ndarray:
    """Untwisted transfer operator as a matrix acting on state-indexed vectors."""
    return (sys.pi[:, None] * sys.Q).T / sys.pi[:, None]


def char_matrix(sys: SymbolicSystem, obs: Observable, t) -> np.ndarray:
    """``P(t)`` for a scalar ``t`` or a stack of matrices for an array of ``t``."""
    base = reversed_kernel(sys)
    phase = obs.values.T
    t = np.asarray(t, dtype=float)
    return base * np.exp(1j * t[..., None, None] * phase)


def char_operator(sys: SymbolicSystem, obs: Observable, t: float) -> CharOperatorSample:
    _require_centered(sys, obs)
    M = char_matrix(sys, obs, float(t))
    if t == 0:
        M = M.real.astype(complex)
    return CharOperatorSample(t=float(t), M=M)


def charfn_matpow(sys: SymbolicSystem, obs: Observable, n: int, t: float) -> complex:
    """``m(P(t)^n 1)`` by repeated matrix-vector products."""
    M = char_operator(sys, obs, t).M
    g = np.ones(sys.d, dtype=complex)
    for _ in range(n):
        g = M @ g
    return complex(sys.pi @ g)


def brute_force_charfn(sys: SymbolicSystem, obs: Observable, n: int, t):
    """``E exp(i t S_n)`` by enumerating every path of length ``n``.

    Independent of the operator formalism: each path weight is
    ``pi[x0] * prod Q[x_k, x_{k+1}]`` and its phase is the sum of the edge
    values along it.  ``t`` may be an array, in which case the enumeration is
    shared across frequencies.
    """
    d = sys.d
    total_paths = d ** (n + 1)
    if total_paths > ENUM_LIMIT:
        raise TooLarge(f"{d}^{n + 1} paths exceeds the enumeration limit {ENUM_LIMIT}")
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    Q, phi = sys.Q, obs.values
    chunk = 1 << 18
    acc = np.zeros(ts.size, dtype=complex)
    powers = d ** np.arange(n, -1, -1, dtype=np.int64)
    for start in range(0, total_paths, chunk):
        codes = np.arange(start, min(start + chunk, total_paths), dtype=np.int64)
        paths = (codes[:, None] // powers[None, :]) % d
        weight = sys.pi[paths[:, 0]]
        phase = np.zeros(codes.size)
        for k in range(n):
            a, b = paths[:, k], paths[:, k + 1]
            weight = weight * Q[a, b]
            phase = phase + phi[a, b]
        keep = weight > 0
        weight, phase = weight[keep], phase[keep]
        for j, tj in enumerate(ts):
            acc[j] += np.sum(weight * np.exp(1j * tj * phase))
    return complex(acc[0]) if scalar else acc


def one_step_charfn(sys: SymbolicSystem, obs: Observable, t: float) -> complex:
    """``E exp(i t X_1)`` summed edge by edge."""
    total = 0j
    for x, y in itertools.product(range(sys.d), repeat=2):
        if sys.Q[x, y] > 0:
            total += sys.pi[x] * sys.Q[x, y] * np.exp(1j * t * obs.values[x, y])
    return total


def spectral_radius(M) -> float:
    """Gelfand estimate ``||M^(2^k)||^(1/2^k)`` in the max-row-sum norm.

    The iterate is renormalised after each squaring and the logarithm of the
    accumulated scale is carried separately, so the estimate neither
    overflows nor underflows.
    """
    M = np.asarray(M, dtype=complex)
    if not np.all(np.isfinite(M)):
        raise SpectralOverflow("matrix has non-finite entries")
    norm = np.abs(M).sum(axis=1).max()
    if norm == 0:
        return 0.0
    B = M / norm
    log_scale = np.log(norm)
    prev = None
    est = norm
    for k in range(1, GELFAND_LEVELS + 1):
        B = B @ B
        log_scale *= 2
        nb = np.abs(B).sum(axis=1).max()
        if nb == 0:
            return 0.0
        if not np.isfinite(nb):
            raise SpectralOverflow("repeated squaring overflowed")
        B /= nb
        log_scale += np.log(nb)
        est = float(np.exp(log_scale / 2**k))
        if prev is not None and abs(est - prev) <= GELFAND_RTOL * est:
            break
        prev = est
    return est


def _power_iteration(M, pi, max_iter=EIG_MAX_ITER, tol=EIG_TOL):
    d = M.shape[0]
    eta = np.ones(d, dtype=complex)
    for it in range(1, max_iter + 1):
        w = M @ eta
        scale = pi @ w
        if abs(scale) < 1e-300:
            raise NonconvergentEigen("iterate lost its mean; dominant eigenvalue undefined")
        w = w / scale
        if np.max(np.abs(w - eta)) <= tol * max(1.0, np.max(np.abs(w))):
            return w, it
        eta = w
    raise NonconvergentEigen(f"power iteration did not converge in {max_iter} steps")


def _adjoint_iteration(M, eta, pi, max_iter=EIG_MAX_ITER, tol=EIG_TOL):
    xi = pi.astype(complex)
    xi = xi / (xi @ eta)
    for it in range(1, max_iter + 1):
        w = xi @ M
        scale = w @ eta
        if abs(scale) < 1e-300:
            raise NonconvergentEigen("adjoint iterate annihilates eta")
        w = w / scale
        if np.max(np.abs(w - xi)) <= tol * max(1.0, np.max(np.abs(w))):
            return w, it
        xi = w
    raise NonconvergentEigen(f"adjoint iteration did not converge in {max_iter} steps")


def dominant_eigen(sample: CharOperatorSample, pi) -> EigenData:
    """Dominant eigenvalue, eigenvector and eigenfunctional by power iteration.

    Parameters
    ----------
    sample : CharOperatorSample
        The operator ``P(t)``.
    pi : ndarray
        Stationary vector; fixes the eigenvector scale through ``m(eta) = 1``.
    """
    M = np.asarray(sample.M, dtype=complex)
    pi = np.asarray(pi, dtype=float)
    eta, it_r = _power_iteration(M, pi)
    xi, it_l = _adjoint_iteration(M, eta, pi)
    lam = complex(xi @ (M @ eta))
    N = M - lam * np.outer(eta, xi)
    gap = spectral_radius(N) / abs(lam) if lam != 0 else np.inf
    return EigenData(t=sample.t, lam=lam, eta=eta, xi=xi, gap_ratio=float(gap), iterations=it_r + it_l)


def eigen_at(sys: SymbolicSystem, obs: Observable, t: float) -> EigenData:
    return dominant_eigen(char_operator(sys, obs, t), sys.pi)


def perturbation_window(sys: SymbolicSystem, obs: Observable, start=0.5, min_delta=2.0**-20) -> float:
    """Largest dyadic ``delta <= start`` with a clean dominant eigenvalue at ``+-delta``."""
    delta = start
    while delta >= min_delta:
        try:
            ok = all(eigen_at(sys, obs, s * delta).gap_ratio <= GAP_MAX for s in (1.0, -1.0))
        except NonconvergentEigen:
            ok = False
        if ok:
            return delta
        delta /= 2
    raise NonconvergentEigen("no perturbation window found")


def eigenvalue_curve(sys: SymbolicSystem, obs: Observable, ts) -> list[EigenData]:
    return [eigen_at(sys, obs, float(t)) for t in np.asarray(ts, dtype=float)]


def decay_constant(curve) -> float:
    """Largest ``c`` with ``|lam(t)| <= 1 - c t^2`` on the sampled curve (t != 0)."""
    cs = [(1.0 - abs(e.lam)) / e.t**2 for e in curve if e.t != 0]
    return float(min(cs))


def expansion_ratios(curve, v: float) -> np.ndarray:
    """Third-order remainder ``|lam(t) - 1 + v t^2 / 2| / |t|^3`` along the curve."""
    return np.array([abs(e.lam - 1 + v * e.t**2 / 2) / abs(e.t) ** 3 for e in curve])


def green_kubo(sys: SymbolicSystem, obs: Observable) -> tuple[float, int]:
    """Autocovariance series of the stationary edge process."""
    W = sys.edge_weights()
    phi = obs.values
    var = float(np.sum(W * phi**2))
    psi = np.sum(sys.Q * phi, axis=1)  # E[phi(x_k, x_{k+1}) | x_k]
    head = W * phi  # pi[x0] Q[x0, x1] phi(x0, x1)
    g = psi.copy()
    total = var
    for k in range(1, GK_MAX_TERMS + 1):
        term = float(np.sum(head @ g))
        total += 2 * term
        if abs(term) < GK_TERM_TOL:
            return total, k
        g = sys.Q @ g
    raise NonconvergentSeries(f"covariance terms still above {GK_TERM_TOL} after {GK_MAX_TERMS} lags")


def lambda_second_derivative(sys: SymbolicSystem, obs: Observable, h=1e-3) -> float:
    """``-Re lambda''(0)`` from central differences at ``h`` and ``h/2`` with one Richardson step."""

    def d2(step):
        lp = eigen_at(sys, obs, step).lam
        lm = eigen_at(sys, obs, -step).lam
        return ((lp + lm).real - 2.0) / step**2

    coarse, fine = d2(h), d2(h / 2)
    return -(4 * fine - coarse) / 3


def variance(sys: SymbolicSystem, obs: Observable, h=1e-3) -> VarianceReport:
    _require_centered(sys, obs)
    v_gk, k = green_kubo(sys, obs)
    v_gk = max(v_gk, 0.0)
    v_fd = lambda_second_derivative(sys, obs, h)
    rel = abs(v_gk - v_fd) / max(v_gk, 1e-12)
    return VarianceReport(v_gk=v_gk, v_fd=v_fd, rel_err=rel, terms=k)


def remainder_decay(sys: SymbolicSystem, obs: Observable, t: float, n_max: int) -> list[float]:
    sample = char_operator(sys, obs, t)
    eig = dominant_eigen(sample, sys.pi)
    N = eig.remainder(sample.M)
    g = np.ones(sys.d, dtype=complex)
    out = []
    for _ in range(n_max):
        g = N @ g
        out.append(float(np.max(np.abs(g))))
    return out


def eta_prime_check(sys: SymbolicSystem, obs: Observable, h=1e-3) -> float:
    """Max-norm of the real part of ``(eta(h) - eta(-h)) / (2h)``."""
    if h > 1e-3:
        raise ValueError("step must be at most 1e-3")
    ep = eigen_at(sys, obs, h).eta
    em = eigen_at(sys, obs, -h).eta
    return float(np.max(np.abs(((ep - em) / (2 * h)).real)))


def eta_forward_check(sys: SymbolicSystem, obs: Observable, h=1e-3) -> float:
    """Max-norm of the real part of the one-sided quotient ``(eta(h) - 1) / h``; first order in ``h``."""
    ep = eigen_at(sys, obs, h).eta
    return float(np.max(np.abs(((ep - 1.0) / h).real)))


def _scan_grid(t_lo, t_hi, step):
    if not (t_lo > 0 and t_hi > t_lo and step > 0):
        raise InvalidGrid(f"need 0 < t_lo < t_hi and step > 0, got ({t_lo}, {t_hi}, {step})")
    count = int(np.floor((t_hi - t_lo) / step + 1e-9)) + 1
    return t_lo + step * np.arange(count)


def aperiodicity_scan(sys: SymbolicSystem, obs: Observable, t_lo: float, t_hi: float,
                      step: float, refine: bool = True) -> ScanResult:
    """Maximum of ``rho(P(t))`` over ``t_lo <= |t| <= t_hi``.

    ``rho(P(-t)) = rho(P(t))`` because ``P(-t)`` is the complex conjugate of
    ``P(t)``, so only positive frequencies are evaluated.  With ``refine`` the
    best grid point is polished by a bounded scalar search on its two
    neighbouring cells, which catches lattice frequencies that fall between
    grid points.
    """
    _require_centered(sys, obs)
    ts = _scan_grid(t_lo, t_hi, step)
    mats = char_matrix(sys, obs, ts)
    rhos = np.array([spectral_radius(m) for m in mats])
    i = int(np.argmax(rhos))
    best_t, best_rho = float(ts[i]), float(rhos[i])
    if refine:
        lo, hi = max(t_lo, best_t - step), min(t_hi, best_t + step)
        if hi > lo:
            res = minimize_scalar(lambda s: -spectral_radius(char_matrix(sys, obs, s)),
                                  bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12})
            if -res.fun > best_rho:
                best_t, best_rho = float(res.x), float(-res.fun)
    return ScanResult(max_rho=best_rho, argmax_t=best_t, t_grid=ts, rho_grid=rhos)
