"""Acceptance suite on the shipped example systems.

Every check returns a list of :class:`Verdict`; a criterion passes when all of
its verdicts pass.  The same functions back ``loctime report`` and the
acceptance tests.
"""
from __future__ import annotations

import json
import operator
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernel_quadrature as kq
from . import montecarlo as mc
from . import spectral as sp
from . import systems
from . import verify as vf

OPS = {"<=": operator.le, ">=": operator.ge, "<": operator.lt, ">": operator.gt}
DEFAULT_SEED = 20240917


@dataclass(frozen=True)
class Verdict:
    name: str
    params: dict
    value: float
    threshold: float
    op: str = "<="
    passed: bool = field(default=None)

    def __post_init__(self):
        ok = bool(OPS[self.op](self.value, self.threshold))
        if self.passed is None:
            object.__setattr__(self, "passed", ok)
        elif bool(self.passed) != ok:
            raise ValueError(f"verdict {self.name}: pass flag disagrees with {self.value} {self.op} {self.threshold}")

    def record(self) -> dict:
        d = asdict(self)
        d["value"] = float(self.value)
        d["threshold"] = float(self.threshold)
        d["pass"] = d.pop("passed")
        return d

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        params = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"[{tag}] {self.name} ({params}): {self.value:.10g} {self.op} {self.threshold:.10g}"


def write_verdicts(path, verdicts):
    with open(path, "w", encoding="utf-8") as fh:
        for v in verdicts:
            fh.write(json.dumps(v.record(), sort_keys=True) + "\n")


def _shipped():
    return {name: make() for name, make in systems.SHIPPED.items()}


def c01_exact_algebra(seed=DEFAULT_SEED, **_):
    out = []
    rng = np.random.default_rng(seed)
    for name, (s, o) in _shipped().items():
        T = sp.char_operator(s, o, 0.0).M
        g = rng.standard_normal(s.d)
        e = sp.eigen_at(s, o, 0.0)
        res = max(
            np.max(np.abs(T @ np.ones(s.d) - 1)),
            abs(s.pi @ (T @ g) - s.pi @ g),
            abs(e.lam - 1),
            np.max(np.abs(e.eta - 1)),
            np.max(np.abs(e.xi - s.pi)),
            np.max(np.abs(s.pi @ s.Q - s.pi)),
        )
        out.append(Verdict("exact_algebra", {"system": name}, float(res), 1e-12))
    return out


def c02_oracle_equivalence(**_):
    ts = np.array([0.1, 0.7, 2.3])
    cases = {**_shipped(), "four_state": systems.four_state()}
    out = []
    for name, (s, o) in cases.items():
        err = 0.0
        for n in range(1, 11):
            bf = sp.brute_force_charfn(s, o, n, ts)
            mp = kq.charfn_power(s, o, ts, n)
            err = max(err, float(np.max(np.abs(bf - mp))))
        out.append(Verdict("oracle_equivalence", {"system": name, "d": s.d, "n_max": 10}, err, 1e-10))
    return out


def c03_iid_reduction(**_):
    s, o = systems.iid3()
    phi = o.values[:, 0]
    err = 0.0
    for t in np.linspace(-0.5, 0.5, 101):
        lam = sp.eigen_at(s, o, t).lam
        err = max(err, abs(lam - np.sum(s.pi * np.exp(1j * t * phi))))
    return [Verdict("iid_reduction", {"system": "iid3"}, err, 1e-10)]


def c04_variance(**_):
    out = []
    for name, (s, o) in _shipped().items():
        r = sp.variance(s, o)
        out.append(Verdict("variance_agreement", {"system": name, "v_gk": r.v_gk}, r.rel_err, 1e-4))
    return out


def c05_expansion(**_):
    out = []
    for name, (s, o) in _shipped().items():
        v = sp.variance(s, o).v_gk
        ts = np.logspace(-3, -1, 41)
        curve = sp.eigenvalue_curve(s, o, ts)
        ratios = sp.expansion_ratios(curve, v)
        out.append(Verdict("expansion_remainder_spread", {"system": name}, ratios.max() / ratios.min(), 10.0))
        neg = sp.eigenvalue_curve(s, o, -ts)
        sym = max(abs(a.lam - np.conj(b.lam)) for a, b in zip(curve, neg))
        out.append(Verdict("conjugate_symmetry", {"system": name}, sym, 1e-10))
        delta = sp.perturbation_window(s, o)
        grid = np.linspace(-delta, delta, 201)
        window = sp.eigenvalue_curve(s, o, grid[grid != 0])
        out.append(Verdict("quadratic_decay_constant", {"system": name, "delta": delta},
                           sp.decay_constant(window), 0.0, op=">="))
    return out


def c06_llt(**_):
    kernel = kq.fejer_kernel()
    out = []
    for name, (s, o) in _shipped().items():
        v = sp.variance(s, o).v_gk
        n = 2**14
        dens = kq.kernel_density_curve(s, o, kernel, [n])[0]
        oracle = kernel.mass / np.sqrt(2 * np.pi * v)
        out.append(Verdict("llt_density", {"system": name, "n": n}, abs(np.sqrt(n) * dens / oracle - 1), 0.05))
        delta = sp.perturbation_window(s, o)
        ns = 2 ** np.arange(10, 15)
        plateau = np.sqrt(ns) * kq.lambda_l1_norms(s, o, ns, delta)
        out.append(Verdict("lambda_l1_plateau", {"system": name, "delta": delta},
                           plateau.max() / plateau.min(), 1.1))
    return out


def c07_potential_kernel(**_):
    kernel = kq.fejer_kernel()
    ys = np.round(np.arange(1, 11) / 10, 10)
    out = []
    for name, (s, o) in _shipped().items():
        sums = kq.potential_kernel_sums(s, o, kernel, ys, 10**4)
        tail = max(p.max_increment_after(10**3) for p in sums)
        out.append(Verdict("potential_kernel_tail_increment", {"system": name, "N": 10**4, "n0": 10**3},
                           tail, 1e-6))
        r = np.array([p.value / p.y for p in sums])
        out.append(Verdict("potential_kernel_ratio_spread", {"system": name}, r.max() / r.min(), 10.0))
    return out


def _paths(s, o, n, seed, m):
    return mc.simulate_sums(s, o, n, seed, range(m))


def c08_mass(seed=DEFAULT_SEED, **_):
    kernel = kq.fejer_kernel()
    out = []
    for name, (s, o) in _shipped().items():
        worst = 0.0
        for row in _paths(s, o, 10**4, seed, 100):
            grid = mc.mass_grid(row)
            mass = np.trapezoid(mc.local_time_values(row, kernel, grid), grid)
            worst = max(worst, abs(mass / kernel.mass - 1))
        out.append(Verdict("local_time_mass", {"system": name, "paths": 100, "n": 10**4}, worst, 1e-3))
    return out


def c09_clt(seed=DEFAULT_SEED, threads=1, **_):
    out = []
    for name, (s, o) in _shipped().items():
        r = vf.clt_check(s, o, 10**4, 5000, seed, threads=threads)
        out.append(Verdict("clt_ks", {"system": name, "n": 10**4, "m": 5000}, r.statistic, r.critical))
    return out


def c10_local_time_law(seed=DEFAULT_SEED, threads=1, **_):
    s, o = systems.iid3()
    r = vf.local_time_law_check(s, o, kq.fejer_kernel(), 10**4, 2000, seed, threads=threads)
    return [Verdict("local_time_ks", {"system": "iid3", "n": 10**4, "m": 2000}, r.statistic, 0.06)]


SANDWICH_WINDOWS = ((-1.0, 1.0, 0.1), (-0.5, 0.25, 0.05), (0.0, 2.0, 0.2), (-0.3, 0.3, 0.5))


def c11_sandwich(seed=DEFAULT_SEED, **_):
    kernel = kq.fejer_kernel()
    out = []
    for name, (s, o) in _shipped().items():
        bad = 0
        worst = np.inf
        for k in range(100):
            p = mc.sample_path(s, o, 10**4, seed, stream=k)
            for a, b, eps in SANDWICH_WINDOWS:
                r = vf.occupation_sandwich(p, kernel, a, b, eps)
                bad += (not r.lower_ok) + (not r.upper_ok)
                worst = min(worst, r.slack_lower, r.slack_upper)
        out.append(Verdict("sandwich_violations", {"system": name, "paths": 100,
                                                   "min_slack": float(worst)}, bad, 0))
    return out


MOMENT_OFFSETS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)


def c12_moments(seed=DEFAULT_SEED, threads=1, **_):
    s, o = systems.two_state()
    r = vf.moment_ratio_scan(s, o, kq.fejer_kernel(), [100, 1000, 10000], 0.0, MOMENT_OFFSETS,
                             1000, seed, threads=threads)
    sm = r.second_moments
    return [
        Verdict("fourth_moment_ratio_spread", {"system": "two_state"}, r.max_over_median, 3.0),
        Verdict("second_moment_spread", {"system": "two_state"}, float(sm.max() / sm.min()), 3.0),
    ]


def c13_tightness(seed=DEFAULT_SEED, threads=1, **_):
    s, o = systems.two_state()
    pts = vf.modulus_probe(s, o, kq.fejer_kernel(), 10**4, [0.4, 0.2, 0.1, 0.05], 0.5, 500, seed,
                           threads=threads)
    # largest rise of the frequency as delta shrinks, in units of its standard error
    excess = max((b.probability - a.probability) - max(a.stderr, b.stderr)
                 for a, b in zip(pts, pts[1:]))
    return [Verdict("modulus_monotone", {"system": "two_state",
                                         "probabilities": [p.probability for p in pts]},
                    excess, 0.0)]


def c14_chaining(seed=DEFAULT_SEED, **_):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(10**4):
        k = int(rng.integers(0, 11))
        scale = 10.0 ** rng.uniform(-6, 6)
        vals = scale * rng.standard_normal(2**k + 1)
        sup, bound = vf.dyadic_chaining_check(vals)
        bad += sup > bound
    return [Verdict("chaining_violations", {"inputs": 10**4}, bad, 0)]


def c15_aperiodicity(**_):
    s, o = systems.integer_two_state()
    step = 2 * np.pi / 128
    lat = sp.aperiodicity_scan(s, o, step, 7.0, step)
    out = [
        Verdict("lattice_detected", {"system": "integer_two_state", "argmax_t": lat.argmax_t},
                lat.max_rho, 1 - sp.LATTICE_TOL, op=">="),
        Verdict("lattice_argmax", {"system": "integer_two_state"}, abs(lat.argmax_t - 2 * np.pi), 1e-6),
    ]
    for name, (s, o) in _shipped().items():
        r = sp.aperiodicity_scan(s, o, 0.05, 1.0, 0.001)
        out.append(Verdict("non_lattice_window", {"system": name, "argmax_t": r.argmax_t}, r.max_rho, 0.999))
    return out


CRITERIA = [
    ("C01", "exact algebra", c01_exact_algebra),
    ("C02", "oracle equivalence", c02_oracle_equivalence),
    ("C03", "i.i.d. reduction", c03_iid_reduction),
    ("C04", "variance cross-validation", c04_variance),
    ("C05", "eigenvalue expansion", c05_expansion),
    ("C06", "local limit bound", c06_llt),
    ("C07", "potential kernel", c07_potential_kernel),
    ("C08", "local-time mass", c08_mass),
    ("C09", "central limit theorem", c09_clt),
    ("C10", "local-time law", c10_local_time_law),
    ("C11", "occupation sandwich", c11_sandwich),
    ("C12", "moment bounds", c12_moments),
    ("C13", "tightness probe", c13_tightness),
    ("C14", "chaining inequality", c14_chaining),
    ("C15", "aperiodicity gate", c15_aperiodicity),
]


@dataclass
class CriterionResult:
    key: str
    title: str
    verdicts: list
    seconds: float

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        worst = next((v for v in self.verdicts if not v.passed), self.verdicts[0])
        return f"{tag} {self.key} {self.title}: {worst.name} {worst.value:.4g} {worst.op} {worst.threshold:.4g} ({self.seconds:.1f}s)"


def run_criterion(key, seed=DEFAULT_SEED, threads=1) -> CriterionResult:
    for k, title, fn in CRITERIA:
        if k == key:
            t0 = time.perf_counter()
            verdicts = fn(seed=seed, threads=threads)
            return CriterionResult(k, title, verdicts, time.perf_counter() - t0)
    raise KeyError(key)


def run_all(seed=DEFAULT_SEED, threads=1, progress=None) -> list[CriterionResult]:
    results = []
    for key, _, _ in CRITERIA:
        r = run_criterion(key, seed=seed, threads=threads)
        if progress is not None:
            progress(r)
        results.append(r)
    return results
