"""Statistical and deterministic checks of limit laws, moment bounds and path inequalities."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from . import montecarlo as mc
from .errors import (
    BadGridSize,
    DegenerateVariance,
    GridTooCoarse,
    InvalidWindow,
    ProbableLattice,
    TooFewSamples,
)
from .kernel_quadrature import SmoothingKernel, charfn_power
from .model import Observable, SymbolicSystem
from .spectral import LATTICE_TOL, aperiodicity_scan, variance

KS_COEF = 1.628
MIN_KS_SAMPLES = 20
MIN_MC = 1000
MIN_VARIANCE = 1e-10
SLACK_TOL = 1e-10
GATE_T_LO, GATE_T_HI, GATE_STEP = 0.05, 8.0, 0.01


@dataclass(frozen=True)
class KSResult:
    statistic: float
    n_samples: int
    critical: float
    passed: bool


@dataclass(frozen=True)
class SandwichReport:
    n: int
    a: float
    b: float
    eps: float
    lower_ok: bool
    upper_ok: bool
    slack_lower: float
    slack_upper: float
    integral: float = 0.0
    lower_vacuous: bool = False


@dataclass(frozen=True)
class MomentRatioReport:
    n_list: tuple
    offset_list: tuple
    ratios: np.ndarray
    max_over_median: float
    second_moments: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class ModulusPoint:
    delta: float
    probability: float
    stderr: float


def ks_critical(m: int) -> float:
    return KS_COEF / np.sqrt(m)


def ks_statistic(samples, cdf) -> KSResult:
    """Two-sided one-sample Kolmogorov-Smirnov distance against ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    m = x.size
    if m < MIN_KS_SAMPLES:
        raise TooFewSamples(f"{m} samples, need at least {MIN_KS_SAMPLES}")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, m + 1)
    D = float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))
    crit = ks_critical(m)
    return KSResult(statistic=D, n_samples=m, critical=crit, passed=D <= crit)


def normal_cdf(v: float):
    root = np.sqrt(v)
    return lambda x: ndtr(np.asarray(x, dtype=float) / root)


def half_normal_cdf(v: float):
    """CDF of ``|Z| / sqrt(v)``: the local time at 0, time 1, of Brownian motion with variance ``v``."""
    root = np.sqrt(v)

    def F(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, 2 * ndtr(x * root) - 1, 0.0)

    return F


def _limit_variance(sys, obs) -> float:
    v = variance(sys, obs).v_gk
    if v < MIN_VARIANCE:
        raise DegenerateVariance(f"limit variance {v:.3e} vanishes; the observable is a coboundary")
    return v


def _require_samples(n, m):
    if n < MIN_MC or m < MIN_MC:
        raise TooFewSamples(f"need n and m_samples >= {MIN_MC}, got n={n}, m={m}")


def clt_check(sys: SymbolicSystem, obs: Observable, n: int, m_samples: int, seed: int,
              threads: int = 1) -> KSResult:
    """KS distance of ``S_n / sqrt(n)`` over ``m_samples`` streams from ``N(0, v)``."""
    v = _limit_variance(sys, obs)
    _require_samples(n, m_samples)
    samples = mc.final_sums(sys, obs, n, seed, m_samples, threads) / np.sqrt(n)
    return ks_statistic(samples, normal_cdf(v))


def lattice_gate(sys, obs, t_lo=GATE_T_LO, t_hi=GATE_T_HI, step=GATE_STEP):
    scan = aperiodicity_scan(sys, obs, t_lo, t_hi, step)
    if scan.max_rho >= 1 - LATTICE_TOL:
        raise ProbableLattice(f"spectral radius {scan.max_rho:.12f} at t = {scan.argmax_t:.9f}")
    return scan


def local_time_at_zero(sys, obs, kernel, n, seed, m, threads=1) -> np.ndarray:
    """``l_n(0)`` for streams ``0..m-1``."""
    zero = np.zeros(1)

    def block(streams):
        sums = mc.simulate_sums(sys, obs, n, seed, streams)
        return np.array([mc.local_time_values(row, kernel, zero)[0] for row in sums])

    return np.concatenate(mc.map_streams(block, m, threads=threads))


def local_time_law_check(sys: SymbolicSystem, obs: Observable, kernel: SmoothingKernel, n: int,
                         m_samples: int, seed: int, threads: int = 1, gate=True) -> KSResult:
    """KS distance of ``l_n(0) / mass`` from the half-normal law of ``|Z| / sqrt(v)``.

    Refuses lattice observables: the frequency range ``gate`` (``(t_lo, t_hi,
    step)``, default covering ``2 pi``) must show ``rho(P(t)) < 1``.
    """
    v = _limit_variance(sys, obs)
    _require_samples(n, m_samples)
    if gate:
        lattice_gate(sys, obs, *(gate if isinstance(gate, tuple) else ()))
    samples = local_time_at_zero(sys, obs, kernel, n, seed, m_samples, threads) / kernel.mass
    return ks_statistic(samples, half_normal_cdf(v))


def occupation_sandwich(p: mc.PathSample, kernel: SmoothingKernel, a: float, b: float,
                        eps: float) -> SandwichReport:
    """Two-sided bounds on ``int_a^b l_n`` by occupation fractions of widened and narrowed windows.

    When ``a + eps > b - eps`` the narrowed window is empty and the lower bound
    is the trivial ``0``; this is flagged with ``lower_vacuous``.
    """
    if not (a < b) or not (eps > 0):
        raise InvalidWindow(f"need a < b and eps > 0, got a={a}, b={b}, eps={eps}")
    u = np.sqrt(p.n) * eps
    integral = mc.occupation_integral(p, kernel, a, b)
    upper = mc.occupation_fraction(p, a - eps, b + eps) * kernel.mass + float(kernel.mass_tail(u))
    vacuous = a + eps > b - eps
    lower = 0.0 if vacuous else mc.occupation_fraction(p, a + eps, b - eps) * float(kernel.mass_window(u))
    su, sl = upper - integral, integral - lower
    return SandwichReport(n=p.n, a=a, b=b, eps=eps, lower_ok=sl >= -SLACK_TOL,
                          upper_ok=su >= -SLACK_TOL, slack_lower=sl, slack_upper=su,
                          integral=integral, lower_vacuous=vacuous)


def moment_ratio_scan(sys: SymbolicSystem, obs: Observable, kernel: SmoothingKernel, n_list,
                      x: float, offset_list, m_samples: int, seed: int, threads: int = 1
                      ) -> MomentRatioReport:
    """Monte Carlo ``E (l_n(x) - l_n(x + off))^4 / off^2`` and ``E l_n(x)^2``.

    ``max_over_median`` is the largest table entry divided by the median entry.
    """
    offsets = np.asarray(offset_list, dtype=float)
    if np.any(offsets <= 0):
        raise ValueError("offsets must be positive")
    if m_samples < MIN_MC:
        raise TooFewSamples(f"{m_samples} samples, need at least {MIN_MC}")
    points = np.concatenate([[x], x + offsets])
    ratios = np.empty((len(n_list), offsets.size))
    second = np.empty(len(n_list))
    for row, n in enumerate(n_list):
        def block(streams, n=n):
            sums = mc.simulate_sums(sys, obs, n, seed, streams)
            return np.stack([mc.local_time_values(r, kernel, points) for r in sums])

        vals = np.concatenate(mc.map_streams(block, m_samples, threads=threads))
        diff = vals[:, :1] - vals[:, 1:]
        ratios[row] = np.mean(diff**4, axis=0) / offsets**2
        second[row] = np.mean(vals[:, 0] ** 2)
    med = float(np.median(ratios))
    mom = float(ratios.max() / med) if med > 0 else (0.0 if ratios.max() == 0 else np.inf)
    return MomentRatioReport(n_list=tuple(int(n) for n in n_list), offset_list=tuple(offsets.tolist()),
                             ratios=ratios, max_over_median=mom, second_moments=second)


def max_oscillation(values, spacing: float, delta: float) -> float:
    """``sup |g(x) - g(y)|`` over grid pairs with ``|x - y| < delta``."""
    values = np.asarray(values)
    reach = int(np.ceil(delta / spacing - 1e-9)) - 1
    best = 0.0
    for j in range(1, min(reach, values.size - 1) + 1):
        best = max(best, float(np.max(np.abs(values[j:] - values[:-j]))))
    return best


def modulus_probe(sys: SymbolicSystem, obs: Observable, kernel: SmoothingKernel, n: int, deltas,
                  eps: float, m_samples: int, seed: int, x_grid=None, threads: int = 1
                  ) -> list[ModulusPoint]:
    """Frequency over streams of ``sup_{|x-y|<delta} |l_n(x) - l_n(y)| >= eps`` on ``[-h, h]``, ``h = 2 sqrt(v)``.

    The default grid has spacing ``min(deltas) / 4``.
    """
    deltas = [float(dl) for dl in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    v = variance(sys, obs).v_gk
    h = 2 * np.sqrt(v)
    if x_grid is None:
        count = int(np.ceil(2 * h / (deltas[-1] / 4))) + 1
        x_grid = np.linspace(-h, h, count)
    x_grid = np.asarray(x_grid, dtype=float)
    spacing = float(np.max(np.diff(x_grid)))
    if spacing > deltas[-1] / 4 * (1 + 1e-12):
        raise GridTooCoarse(f"grid spacing {spacing:.4g} exceeds delta/4 = {deltas[-1] / 4:.4g}")

    def block(streams):
        sums = mc.simulate_sums(sys, obs, n, seed, streams)
        out = np.empty((len(streams), len(deltas)))
        for r, row in enumerate(sums):
            field_ = mc.local_time_values(row, kernel, x_grid)
            out[r] = [max_oscillation(field_, spacing, dl) for dl in deltas]
        return out

    osc = np.concatenate(mc.map_streams(block, m_samples, threads=threads))
    hits = osc >= eps
    probs = hits.mean(axis=0)
    se = np.sqrt(probs * (1 - probs) / m_samples)
    return [ModulusPoint(delta=dl, probability=float(p), stderr=float(s)) for dl, p, s in zip(deltas, probs, se)]


def dyadic_chaining_check(values) -> tuple[float, float]:
    """Both sides of ``B_k <= 2 sum_{i=0}^{k} A_i`` on a grid of ``2^k + 1`` points.

    ``A_i`` is the largest increment between neighbours at level ``i`` (step
    ``2^(k-i)`` in index), ``A_0`` the increment across the whole interval and
    ``B_k`` the largest pairwise difference.
    """
    v = np.asarray(values, dtype=float)
    size = v.size
    k = int(np.log2(size - 1)) if size >= 2 else -1
    if size < 2 or 2**k + 1 != size:
        raise BadGridSize(f"grid of {size} points is not 2^k + 1")
    sup = float(v.max() - v.min())
    levels = []
    for i in range(k + 1):
        sub = v[:: 2 ** (k - i)]
        levels.append(float(np.max(np.abs(np.diff(sub)))))
    bound = 2.0 * sum(levels)
    if sup > bound:
        raise AssertionError(f"chaining bound violated: {sup} > {bound}")
    return sup, bound


def c_metric(f_vals, g_vals, grid, n_terms: int | None = None) -> float:
    """``sum_n 2^{-n} min(1, sup_{[-n, n]} |f - g|)`` for functions sampled on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    diff = np.abs(np.asarray(f_vals) - np.asarray(g_vals))
    if n_terms is None:
        n_terms = max(1, int(np.ceil(np.max(np.abs(grid)))))
    total = 0.0
    for n in range(1, n_terms + 1):
        mask = np.abs(grid) <= n
        sup = float(diff[mask].max()) if mask.any() else 0.0
        total += 2.0**-n * min(1.0, sup)
    return total


@dataclass(frozen=True)
class CharfnPoint:
    t: float
    empirical: complex
    exact: complex
    stderr: float

    @property
    def agrees(self) -> bool:
        return abs(self.empirical - self.exact) <= 3 * self.stderr


def charfn_agreement(sys, obs, n, m_samples, seed, ts=(0.5, 1.0, 2.0), threads=1) -> list[CharfnPoint]:
    """Empirical characteristic function of ``S_n / sqrt(n)`` against ``m(P(t / sqrt(n))^n 1)``."""
    scaled = mc.final_sums(sys, obs, n, seed, m_samples, threads) / np.sqrt(n)
    exact = charfn_power(sys, obs, np.asarray(ts) / np.sqrt(n), n)
    out = []
    for t, ex in zip(ts, exact):
        e = np.exp(1j * t * scaled)
        emp = complex(e.mean())
        se = float(np.sqrt(max(1.0 - abs(emp) ** 2, 0.0) / m_samples))
        out.append(CharfnPoint(t=float(t), empirical=emp, exact=complex(ex), stderr=se))
    return out
