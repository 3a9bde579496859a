"""INI run configurations.

Example::

    [system]
    q = 0.9 0.1; 0.5 0.5
    observable = 1 -1

    [run]
    seed = 7

Matrix rows are separated by ``;`` or newlines, entries by whitespace or
commas.  A single row of ``d`` numbers as ``observable`` is a state
observable.  The observable is centred on load.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError
from .kernel_quadrature import DEFAULT_NODES, KERNELS
from .model import (
    Observable,
    Potential,
    SymbolicSystem,
    center_observable,
    check_primitive,
    gibbs_from_potential,
)

SECTIONS = {
    "system": {"d", "incidence", "q", "potential", "observable"},
    "kernel": {"name", "nodes"},
    "run": {"n", "samples", "seed", "threads"},
    "grids": {"t_lo", "t_hi", "t_step", "curve_points", "x_points", "x_half_width", "deltas", "eps",
              "offsets", "n_list", "x0", "y_list", "horizon", "tail_from", "llt_n", "ks_localtime"},
    "output": {"dir"},
}


@dataclass(frozen=True)
class GridConfig:
    t_lo: float = 0.05
    t_hi: float = 1.0
    t_step: float = 0.001
    curve_points: int = 201
    x_points: int = 513
    x_half_width: float | None = None  # default 4 sqrt(v)
    deltas: tuple = (0.4, 0.2, 0.1, 0.05)
    eps: float = 0.5
    offsets: tuple = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
    n_list: tuple = (100, 1000, 10000)
    x0: float = 0.0
    y_list: tuple = tuple(round(0.1 * k, 10) for k in range(1, 11))
    horizon: int = 10_000
    tail_from: int = 1000
    llt_n: int = 2**14
    ks_localtime: float = 0.06


@dataclass(frozen=True)
class RunConfig:
    system: SymbolicSystem
    observable: Observable
    raw_observable: np.ndarray
    seed: int
    n: int = 10_000
    samples: int = 2000
    threads: int = 1
    kernel: str = "fejer"
    nodes: int = DEFAULT_NODES
    grids: GridConfig = field(default_factory=GridConfig)
    out_dir: str = "out"


def _line_index(text):
    """Map ``(section, key)`` to its 1-based line number."""
    where = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            where.setdefault((section, None), i)
            continue
        m = re.match(r"([A-Za-z0-9_\-]+)\s*[=:]", s)
        if m and section is not None:
            where.setdefault((section, m.group(1).lower()), i)
    return where


class _Reader:
    def __init__(self, text):
        cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ParseError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None
        self.cp = cp
        self.lines = _line_index(text)
        for section in cp.sections():
            if section not in SECTIONS:
                raise ParseError(f"unknown section [{section}]", line=self.lines.get((section, None)))
            for key in cp[section]:
                if key not in SECTIONS[section]:
                    raise ParseError("unknown key", line=self.lines.get((section, key)),
                                     field=f"{section}.{key}")

    def has(self, section, key):
        return self.cp.has_option(section, key)

    def raw(self, section, key):
        return self.cp.get(section, key)

    def _fail(self, section, key, msg):
        raise ParseError(msg, line=self.lines.get((section, key)), field=f"{section}.{key}")

    def scalar(self, section, key, kind, default=None):
        if not self.has(section, key):
            return default
        text = self.raw(section, key).strip()
        try:
            return kind(text)
        except ValueError:
            self._fail(section, key, f"cannot read {text!r} as {kind.__name__}")

    def vector(self, section, key, kind=float, default=None):
        if not self.has(section, key):
            return default
        parts = re.split(r"[\s,;]+", self.raw(section, key).strip())
        try:
            return tuple(kind(p) for p in parts if p)
        except ValueError:
            self._fail(section, key, "non-numeric entry")

    def matrix(self, section, key):
        if not self.has(section, key):
            return None
        rows = [r for r in re.split(r"[;\n]", self.raw(section, key)) if r.strip()]
        try:
            data = [[float(x) for x in re.split(r"[\s,]+", r.strip()) if x] for r in rows]
        except ValueError:
            self._fail(section, key, "non-numeric entry")
        widths = {len(r) for r in data}
        if len(widths) != 1:
            self._fail(section, key, "rows have different lengths")
        return np.array(data)


def _build_system(rd: _Reader):
    q = rd.matrix("system", "q")
    pot = rd.matrix("system", "potential")
    inc = rd.matrix("system", "incidence")
    obs = rd.matrix("system", "observable")
    if (q is None) == (pot is None):
        raise ValidationError("exactly one of system.q and system.potential must be given")
    if obs is None:
        raise ValidationError("system.observable is required")
    main = q if q is not None else pot
    d = rd.scalar("system", "d", int, default=main.shape[0])
    for name, mat in (("q", q), ("potential", pot), ("incidence", inc)):
        if mat is not None and mat.shape != (d, d):
            raise ValidationError(f"system.{name} is {mat.shape[0]}x{mat.shape[1]}, expected {d}x{d}")
    if obs.shape == (1, d) and d > 1:
        obs = obs[0]
    elif obs.shape != (d, d):
        raise ValidationError(f"system.observable must be {d}x{d} or a single row of {d}")
    if inc is not None and np.any((inc != 0) & (inc != 1)):
        raise ValidationError("system.incidence must be 0/1")
    if q is not None:
        if np.any(q < 0):
            r = int(np.argwhere(q < 0)[0][0])
            raise ValidationError(f"system.q row {r} has a negative entry")
        sums = q.sum(axis=1)
        for r, s in enumerate(sums):
            if abs(s - 1.0) > 1e-12:
                raise ValidationError(f"system.q row {r} sums to {s!r}, not 1")
        A = (q > 0).astype(int) if inc is None else inc.astype(int)
        if np.any((q > 0) & (A == 0)):
            raise ValidationError("system.q puts mass on an edge forbidden by system.incidence")
        check_primitive(A)
        try:
            sys = SymbolicSystem.from_transition(q, A=A)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
    else:
        A = np.ones((d, d), dtype=int) if inc is None else inc.astype(int)
        sys = gibbs_from_potential(A, Potential(pot))
    return sys, center_observable(sys, obs), np.asarray(obs, dtype=float)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration."""
    rd = _Reader(text)
    if not rd.cp.has_section("system"):
        raise ValidationError("missing [system] section")
    seed = rd.scalar("run", "seed", int)
    if seed is None:
        raise ValidationError("run.seed is required; runs are never seeded from the clock")
    if seed < 0 or seed >= 2**64:
        raise ValidationError("run.seed must fit in an unsigned 64-bit integer")
    sys, obs, raw = _build_system(rd)
    d = GridConfig()
    g = GridConfig(
        t_lo=rd.scalar("grids", "t_lo", float, d.t_lo),
        t_hi=rd.scalar("grids", "t_hi", float, d.t_hi),
        t_step=rd.scalar("grids", "t_step", float, d.t_step),
        curve_points=rd.scalar("grids", "curve_points", int, d.curve_points),
        x_points=rd.scalar("grids", "x_points", int, d.x_points),
        x_half_width=rd.scalar("grids", "x_half_width", float, d.x_half_width),
        deltas=rd.vector("grids", "deltas", float, d.deltas),
        eps=rd.scalar("grids", "eps", float, d.eps),
        offsets=rd.vector("grids", "offsets", float, d.offsets),
        n_list=rd.vector("grids", "n_list", int, d.n_list),
        x0=rd.scalar("grids", "x0", float, d.x0),
        y_list=rd.vector("grids", "y_list", float, d.y_list),
        horizon=rd.scalar("grids", "horizon", int, d.horizon),
        tail_from=rd.scalar("grids", "tail_from", int, d.tail_from),
        llt_n=rd.scalar("grids", "llt_n", int, d.llt_n),
        ks_localtime=rd.scalar("grids", "ks_localtime", float, d.ks_localtime),
    )
    kernel = rd.scalar("kernel", "name", str, "fejer")
    if kernel not in KERNELS:
        raise ValidationError(f"kernel.name {kernel!r} is not one of {sorted(KERNELS)}")
    nodes = rd.scalar("kernel", "nodes", int, DEFAULT_NODES)
    if nodes % 2 == 0 or nodes < DEFAULT_NODES:
        raise ValidationError(f"kernel.nodes must be odd and at least {DEFAULT_NODES}")
    cfg = RunConfig(
        system=sys, observable=obs, raw_observable=raw, seed=seed,
        n=rd.scalar("run", "n", int, 10_000),
        samples=rd.scalar("run", "samples", int, 2000),
        threads=rd.scalar("run", "threads", int, 1),
        kernel=kernel, nodes=nodes, grids=g,
        out_dir=rd.scalar("output", "dir", str, "out"),
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.n < 1:
        raise ValidationError("run.n must be positive")
    if cfg.samples < 1:
        raise ValidationError("run.samples must be positive")
    if cfg.threads < 1:
        raise ValidationError("run.threads must be positive")
    g = cfg.grids
    if g.horizon < 1 or not (0 <= g.tail_from < g.horizon):
        raise ValidationError("grids.horizon must exceed grids.tail_from >= 0")
    if g.eps < 0:
        raise ValidationError("grids.eps must be nonnegative")
    if any(o <= 0 for o in g.offsets):
        raise ValidationError("grids.offsets must be positive")


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
