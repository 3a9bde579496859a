"""Stationary trajectories, Birkhoff sums, scaled paths and smoothed local times.

Randomness comes from Philox streams keyed by ``(seed, stream)``: path ``k`` of
a batch is exactly ``sample_path(..., seed, stream=k)``, whichever batch,
chunk or thread produced it.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .kernel_quadrature import SmoothingKernel
from .model import Observable, SymbolicSystem

SERIES_CUTOFF = 0.05
UNIFORM_RTOL = 1e-12
CHUNK = 256


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator owned by one path."""
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _cumulative(sys: SymbolicSystem):
    cum_pi = np.cumsum(sys.pi)
    cum_q = np.cumsum(sys.Q, axis=1)
    # last allowed symbol absorbs rounding at the top of each row
    last_pi = int(np.flatnonzero(sys.pi > 0)[-1])
    last_q = np.array([np.flatnonzero(row > 0)[-1] for row in sys.Q], dtype=np.int64)
    return cum_pi, cum_q, last_pi, last_q


@njit(cache=True, nogil=True)
def _pick(cum, u, last):
    i = 0
    while i < last and cum[i] <= u:
        i += 1
    return i


@njit(cache=True, nogil=True)
def _walk(u, cum_pi, cum_q, last_pi, last_q, phi, states, sums):
    """Inverse-CDF walk driven by the uniforms in ``u`` (one row per path)."""
    m, n1 = u.shape
    for p in range(m):
        x = _pick(cum_pi, u[p, 0], last_pi)
        states[p, 0] = x
        s = 0.0
        sums[p, 0] = 0.0
        for k in range(1, n1):
            y = _pick(cum_q[x], u[p, k], last_q[x])
            s += phi[x, y]
            states[p, k] = y
            sums[p, k] = s
            x = y


@dataclass(frozen=True)
class PathSample:
    seed: int
    stream: int
    states: np.ndarray
    increments: np.ndarray
    sums: np.ndarray

    @property
    def n(self) -> int:
        return self.increments.size


@dataclass(frozen=True)
class ScaledPath:
    n: int
    values: np.ndarray


@dataclass(frozen=True)
class LocalTimeField:
    n: int
    x_grid: np.ndarray
    values: np.ndarray

    def trapezoid_mass(self) -> float:
        return float(np.trapezoid(self.values, self.x_grid))


def _uniforms(seed, streams, n):
    u = np.empty((len(streams), n + 1))
    for row, k in enumerate(streams):
        u[row] = stream_generator(seed, k).random(n + 1)
    return u


def simulate_sums(sys: SymbolicSystem, obs: Observable, n: int, seed: int, streams,
                  with_states: bool = False):
    """Birkhoff sums ``S_0..S_n`` (one row per stream) and optionally the state sequences."""
    if n < 1:
        raise ValueError("n must be >= 1")
    streams = [int(k) for k in streams]
    cum_pi, cum_q, last_pi, last_q = _cumulative(sys)
    u = _uniforms(seed, streams, n)
    states = np.empty((len(streams), n + 1), dtype=np.int64)
    sums = np.empty((len(streams), n + 1))
    _walk(u, cum_pi, cum_q, last_pi, last_q, np.ascontiguousarray(obs.values), states, sums)
    return (sums, states) if with_states else sums


def sample_path(sys: SymbolicSystem, obs: Observable, n: int, seed: int, stream: int = 0) -> PathSample:
    sums, states = simulate_sums(sys, obs, n, seed, [stream], with_states=True)
    states = states[0]
    increments = obs.values[states[:-1], states[1:]]
    for a in (states, increments, sums):
        a.setflags(write=False)
    return PathSample(seed=int(seed), stream=int(stream), states=states, increments=increments, sums=sums[0])


def map_streams(fn, m: int, chunk: int = CHUNK, threads: int = 1):
    """Apply ``fn(streams)`` to consecutive blocks of ``range(m)``; results come back in stream order."""
    blocks = [range(s, min(s + chunk, m)) for s in range(0, m, chunk)]
    if threads <= 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


def final_sums(sys, obs, n, seed, m, threads=1) -> np.ndarray:
    """``S_n`` for streams ``0..m-1``."""
    parts = map_streams(lambda b: simulate_sums(sys, obs, n, seed, b)[:, -1], m, threads=threads)
    return np.concatenate(parts)


def scaled_path(p: PathSample) -> ScaledPath:
    return ScaledPath(n=p.n, values=p.sums / np.sqrt(p.n))


# Fejer kernel sums.  f(x) = (sin(x/2) / (x/2))^2 with a Taylor branch near 0.

@njit(cache=True, inline="always")
def _fejer_series(d):
    d2 = d * d
    return 1.0 - d2 / 12.0 + d2 * d2 / 360.0 - d2 * d2 * d2 / 20160.0


@njit(cache=True, nogil=True)
def fejer_sums_direct(sums, points):
    """``out[i] = sum_k f(sums[k] - points[i])`` evaluated term by term."""
    out = np.zeros(points.size)
    for i in range(points.size):
        acc = 0.0
        for k in range(sums.size):
            d = sums[k] - points[i]
            if abs(d) < SERIES_CUTOFF:
                acc += _fejer_series(d)
            else:
                s = np.sin(0.5 * d)
                acc += 4.0 * s * s / (d * d)
        out[i] = acc
    return out


@njit(cache=True, nogil=True)
def fejer_sums_uniform(sums, p0, h, count):
    """Same as ``fejer_sums_direct`` on the grid ``p0 + i*h``.

    ``sin((S - p0 - i h)/2)`` is produced by the angle-difference identity from
    one ``sin``/``cos`` pair per term and a table over the grid, so the inner
    loop has no transcendental calls.
    """
    out = np.zeros(count)
    half = 0.5 * h * np.arange(count)
    ch = np.cos(half)
    sh = np.sin(half)
    offs = h * np.arange(count)
    for k in range(sums.size):
        d0 = sums[k] - p0
        c0 = np.cos(0.5 * d0)
        s0 = np.sin(0.5 * d0)
        for i in range(count):
            d = d0 - offs[i]
            if abs(d) < SERIES_CUTOFF:
                out[i] += _fejer_series(d)
            else:
                s = s0 * ch[i] - c0 * sh[i]
                out[i] += 4.0 * s * s / (d * d)
    return out


def _is_uniform(points):
    if points.size < 3:
        return False
    diffs = np.diff(points)
    return bool(np.all(np.abs(diffs - diffs[0]) <= UNIFORM_RTOL * max(abs(diffs[0]), 1e-300)))


def kernel_sums(sums, kernel: SmoothingKernel, points) -> np.ndarray:
    """``sum_k f(sums[k] - p)`` for every ``p`` in ``points``."""
    sums = np.ascontiguousarray(sums, dtype=float)
    points = np.ascontiguousarray(points, dtype=float)
    if kernel.name == "fejer":
        if _is_uniform(points):
            h = (points[-1] - points[0]) / (points.size - 1)
            return fejer_sums_uniform(sums, points[0], h, points.size)
        return fejer_sums_direct(sums, points)
    out = np.empty(points.size)
    for start in range(0, points.size, 64):
        block = points[start:start + 64]
        out[start:start + 64] = kernel.f(sums[None, :] - block[:, None]).sum(axis=1)
    return out


def local_time_values(sums, kernel: SmoothingKernel, x_grid) -> np.ndarray:
    """``n^{-1/2} sum_{k=1}^n f(S_k - sqrt(n) x)`` from a full row ``S_0..S_n``."""
    n = sums.size - 1
    root = np.sqrt(n)
    return kernel_sums(sums[1:], kernel, root * np.asarray(x_grid, dtype=float)) / root


def local_time_field(p: PathSample, kernel: SmoothingKernel, x_grid) -> LocalTimeField:
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(np.diff(x_grid) < 0):
        raise ValueError("x_grid must be sorted")
    return LocalTimeField(n=p.n, x_grid=x_grid, values=local_time_values(p.sums, kernel, x_grid))


def default_x_grid(v: float, points: int = 513) -> np.ndarray:
    half = 4 * np.sqrt(v)
    return np.linspace(-half, half, points)


def mass_grid(sums, spacing: float | None = None, pad: float = 40.0) -> np.ndarray:
    """Grid covering the scaled path range plus ``pad`` on each side.

    The default spacing ``pi / sqrt(n)`` is half the Nyquist spacing of the
    band-limited function ``x -> l_n(x)``, so the trapezoid rule is exact up
    to truncation of the kernel tails.
    """
    n = sums.size - 1
    root = np.sqrt(n)
    if spacing is None:
        spacing = np.pi / root
    lo = sums[1:].min() / root - pad
    hi = sums[1:].max() / root + pad
    count = int(np.ceil((hi - lo) / spacing)) + 1
    return lo + spacing * np.arange(count)


def occupation_fraction(p: PathSample, a: float, b: float) -> float:
    """Fraction of ``k in 1..n`` with ``S_k / sqrt(n)`` in the closed interval ``[a, b]``."""
    if a > b:
        return 0.0
    scaled = p.sums[1:] / np.sqrt(p.n)
    return float(np.count_nonzero((scaled >= a) & (scaled <= b))) / p.n


def occupation_integral(p: PathSample, kernel: SmoothingKernel, a: float, b: float) -> float:
    """Exact ``int_a^b l_n(x) dx`` through the kernel primitive."""
    root = np.sqrt(p.n)
    s = p.sums[1:]
    return float(np.sum(kernel.primitive(s - root * a) - kernel.primitive(s - root * b))) / p.n
