"""Command-line entry point: ``loctime <subcommand> --config run.ini --out DIR``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import criteria
from . import errors as E
from . import kernel_quadrature as kq
from . import montecarlo as mc
from . import spectral as sp
from . import verify as vf
from .config import RunConfig, load_config, validate
from .criteria import Verdict

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_CODES = {
    E.ParseError: 3,
    E.ValidationError: 4,
    E.NotPrimitive: 5,
    E.EmptyRowOrColumn: 6,
    E.NonconvergentEigen: 7,
    E.UncenteredObservable: 8,
    E.TooLarge: 9,
    E.InvalidGrid: 10,
    E.SpectralOverflow: 11,
    E.NonconvergentSeries: 12,
    E.QuadratureImagResidue: 13,
    E.TooFewSamples: 14,
    E.DegenerateVariance: 15,
    E.ProbableLattice: 16,
    E.InvalidWindow: 17,
    E.GridTooCoarse: 18,
    E.BadGridSize: 19,
    E.LocTimeError: 20,
}
EXIT_IO = 21


def exit_code_for(exc: BaseException) -> int:
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    raise exc


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _variance(cfg):
    return sp.variance(cfg.system, cfg.observable).v_gk


def cmd_spectrum(cfg: RunConfig, out: Path):
    s, o = cfg.system, cfg.observable
    delta = sp.perturbation_window(s, o)
    half = np.linspace(0.0, delta, (cfg.grids.curve_points + 1) // 2)
    ts = np.concatenate([-half[:0:-1], half])
    curve = sp.eigenvalue_curve(s, o, ts)
    write_csv(out / "spectrum.csv", ["t", "lambda_re", "lambda_im", "lambda_abs", "gap_ratio"],
              [(e.t, e.lam.real, e.lam.imag, abs(e.lam), e.gap_ratio) for e in curve])
    sym = max(abs(a.lam - np.conj(b.lam)) for a, b in zip(curve, curve[::-1]))
    nonzero = [e for e in curve if e.t != 0]
    return [
        Verdict("conjugate_symmetry", {"delta": delta}, float(sym), 1e-10),
        Verdict("modulus_at_most_one", {"delta": delta}, max(abs(e.lam) for e in curve), 1 + 1e-12),
        Verdict("quadratic_decay_constant", {"delta": delta}, sp.decay_constant(nonzero), 0.0, op=">"),
        Verdict("gap_ratio_max", {"delta": delta}, max(e.gap_ratio for e in curve), 1.0, op="<"),
    ]


def cmd_scan(cfg: RunConfig, out: Path):
    g = cfg.grids
    r = sp.aperiodicity_scan(cfg.system, cfg.observable, g.t_lo, g.t_hi, g.t_step)
    write_csv(out / "scan.csv", ["t", "rho"], zip(r.t_grid, r.rho_grid))
    write_csv(out / "scan_max.csv", ["max_rho", "argmax_t"], [(r.max_rho, r.argmax_t)])
    return [Verdict("aperiodic", {"t_lo": g.t_lo, "t_hi": g.t_hi, "step": g.t_step, "argmax_t": r.argmax_t},
                    r.max_rho, 1 - sp.LATTICE_TOL, op="<")]


def cmd_variance(cfg: RunConfig, out: Path):
    r = sp.variance(cfg.system, cfg.observable)
    write_csv(out / "variance.csv", ["v_gk", "v_fd", "rel_err", "terms"], [(r.v_gk, r.v_fd, r.rel_err, r.terms)])
    return [Verdict("variance_agreement", {"v_gk": r.v_gk}, r.rel_err, 1e-4)]


def cmd_llt(cfg: RunConfig, out: Path):
    s, o = cfg.system, cfg.observable
    kernel = kq.get_kernel(cfg.kernel)
    grid = kq.simpson_grid(cfg.nodes)
    v = _variance(cfg)
    top = cfg.grids.llt_n
    ns = sorted({2**k for k in range(4, int(np.log2(top)) + 1)} | {top})
    dens = kq.kernel_density_curve(s, o, kernel, ns, grid=grid)
    delta = sp.perturbation_window(s, o)
    l1 = kq.lambda_l1_norms(s, o, ns, delta)
    oracle = kernel.mass / np.sqrt(2 * np.pi * v)
    root = np.sqrt(ns)
    rel = np.abs(root * dens / oracle - 1)
    write_csv(out / "llt.csv", ["n", "sqrt_n_density", "oracle", "rel_err", "sqrt_n_lambda_l1"],
              zip(ns, root * dens, [oracle] * len(ns), rel, root * l1))
    verdicts = [Verdict("llt_density", {"n": top}, float(rel[-1]), 0.05)]
    if top >= 2**10:
        sel = [i for i, n in enumerate(ns) if n >= 2**10]
        p = (root * l1)[sel]
        verdicts.append(Verdict("lambda_l1_plateau", {"n_lo": 2**10, "n_hi": top, "delta": delta},
                                float(p.max() / p.min()), 1.1))
    return verdicts


def cmd_potential(cfg: RunConfig, out: Path):
    g = cfg.grids
    sums = kq.potential_kernel_sums(cfg.system, cfg.observable, kq.get_kernel(cfg.kernel), g.y_list,
                                    g.horizon, grid=kq.simpson_grid(cfg.nodes))
    write_csv(out / "potential_kernel.csv",
              ["y", "sum", "sum_over_y", "max_increment_after", "tail_after"],
              [(p.y, p.value, p.value / p.y, p.max_increment_after(g.tail_from), p.tail_after(g.tail_from))
               for p in sums])
    ratios = np.array([p.value / p.y for p in sums if p.y != 0])
    return [
        Verdict("potential_kernel_tail_increment", {"N": g.horizon, "n0": g.tail_from},
                max(p.max_increment_after(g.tail_from) for p in sums), 1e-6),
        Verdict("potential_kernel_ratio_spread", {"N": g.horizon}, float(ratios.max() / ratios.min()), 10.0),
    ]


def cmd_simulate(cfg: RunConfig, out: Path):
    s, o = cfg.system, cfg.observable
    rows = []
    worst = 0.0
    v = _variance(cfg)
    for k in range(cfg.samples):
        p = mc.sample_path(s, o, cfg.n, cfg.seed, stream=k)
        inc = [None, *p.increments]
        rows.extend(zip([k] * (p.n + 1), range(p.n + 1), p.states, inc, p.sums))
        worst = max(worst, abs(p.sums[-1]) / p.n / (5 * np.sqrt(max(v, 1e-300) / p.n)))
    write_csv(out / "paths.csv", ["stream", "k", "state", "increment", "sum"], rows)
    return [Verdict("mean_increment_band", {"n": cfg.n, "paths": cfg.samples}, worst, 1.0)]


def _x_grid(cfg):
    g = cfg.grids
    half = g.x_half_width if g.x_half_width is not None else 4 * np.sqrt(_variance(cfg))
    return np.linspace(-half, half, g.x_points)


def cmd_localtime(cfg: RunConfig, out: Path):
    s, o = cfg.system, cfg.observable
    kernel = kq.get_kernel(cfg.kernel)
    x = _x_grid(cfg)
    rows, worst = [], 0.0
    for k in range(cfg.samples):
        p = mc.sample_path(s, o, cfg.n, cfg.seed, stream=k)
        f = mc.local_time_field(p, kernel, x)
        rows.extend(zip([k] * x.size, x, f.values))
        wide = mc.mass_grid(p.sums)
        mass = np.trapezoid(mc.local_time_values(p.sums, kernel, wide), wide)
        worst = max(worst, abs(mass / kernel.mass - 1))
    write_csv(out / "localtime.csv", ["stream", "x", "l_n"], rows)
    return [Verdict("local_time_mass", {"n": cfg.n, "paths": cfg.samples}, worst, 1e-3)]


def cmd_verify_clt(cfg: RunConfig, out: Path):
    s, o = cfg.system, cfg.observable
    r = vf.clt_check(s, o, cfg.n, cfg.samples, cfg.seed, threads=cfg.threads)
    scaled = mc.final_sums(s, o, cfg.n, cfg.seed, cfg.samples, cfg.threads) / np.sqrt(cfg.n)
    write_csv(out / "clt_samples.csv", ["stream", "scaled_sum"], enumerate(scaled))
    pts = vf.charfn_agreement(s, o, cfg.n, cfg.samples, cfg.seed, threads=cfg.threads)
    write_csv(out / "clt_charfn.csv", ["t", "empirical_re", "empirical_im", "exact_re", "exact_im", "stderr"],
              [(p.t, p.empirical.real, p.empirical.imag, p.exact.real, p.exact.imag, p.stderr) for p in pts])
    verdicts = [Verdict("clt_ks", {"n": cfg.n, "m": cfg.samples}, r.statistic, r.critical)]
    for p in pts:
        gap = abs(p.empirical - p.exact)
        z = gap / p.stderr if p.stderr > 0 else (0.0 if gap <= 1e-12 else np.inf)
        verdicts.append(Verdict("charfn_agreement", {"t": p.t}, float(z), 3.0))
    return verdicts


def cmd_verify_localtime(cfg: RunConfig, out: Path):
    s, o = cfg.system, cfg.observable
    kernel = kq.get_kernel(cfg.kernel)
    r = vf.local_time_law_check(s, o, kernel, cfg.n, cfg.samples, cfg.seed, threads=cfg.threads)
    vals = vf.local_time_at_zero(s, o, kernel, cfg.n, cfg.seed, cfg.samples, cfg.threads) / kernel.mass
    write_csv(out / "localtime_samples.csv", ["stream", "l0_over_mass"], enumerate(vals))
    return [Verdict("local_time_ks", {"n": cfg.n, "m": cfg.samples}, r.statistic, cfg.grids.ks_localtime)]


def cmd_verify_moments(cfg: RunConfig, out: Path):
    g = cfg.grids
    r = vf.moment_ratio_scan(cfg.system, cfg.observable, kq.get_kernel(cfg.kernel), g.n_list, g.x0,
                             g.offsets, cfg.samples, cfg.seed, threads=cfg.threads)
    write_csv(out / "moments.csv", ["n", "offset", "ratio"],
              [(n, off, r.ratios[i, j]) for i, n in enumerate(r.n_list) for j, off in enumerate(r.offset_list)])
    write_csv(out / "moments_second.csv", ["n", "second_moment"], zip(r.n_list, r.second_moments))
    sm = r.second_moments
    return [
        Verdict("fourth_moment_ratio_spread", {"x": g.x0}, r.max_over_median, 3.0),
        Verdict("second_moment_spread", {"x": g.x0}, float(sm.max() / sm.min()), 3.0),
    ]


def cmd_verify_tightness(cfg: RunConfig, out: Path):
    g = cfg.grids
    pts = vf.modulus_probe(cfg.system, cfg.observable, kq.get_kernel(cfg.kernel), cfg.n, g.deltas, g.eps,
                           cfg.samples, cfg.seed, threads=cfg.threads)
    write_csv(out / "tightness.csv", ["delta", "probability", "stderr"],
              [(p.delta, p.probability, p.stderr) for p in pts])
    excess = max([(b.probability - a.probability) - max(a.stderr, b.stderr) for a, b in zip(pts, pts[1:])],
                 default=0.0)
    return [Verdict("modulus_monotone", {"eps": g.eps, "n": cfg.n}, excess, 0.0)]


def cmd_report(cfg: RunConfig | None, out: Path, seed=None, threads=1):
    seed = criteria.DEFAULT_SEED if seed is None else seed
    lines = []

    def progress(r):
        lines.append(r.line())
        print(r.line(), flush=True)

    results = criteria.run_all(seed=seed, threads=threads, progress=progress)
    verdicts = [v for r in results for v in r.verdicts]
    with open(out / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(f"acceptance suite, seed {seed}\n\n")
        fh.write("\n".join(lines) + "\n\n")
        for r in results:
            for v in r.verdicts:
                fh.write(f"{r.key} {v.line()}\n")
        passed = sum(r.passed for r in results)
        fh.write(f"\n{passed}/{len(results)} criteria pass\n")
    write_csv(out / "criteria.csv", ["criterion", "title", "pass", "seconds"],
              [(r.key, r.title, r.passed, r.seconds) for r in results])
    return verdicts


COMMANDS = {
    "spectrum": cmd_spectrum,
    "scan-aperiodicity": cmd_scan,
    "variance": cmd_variance,
    "llt": cmd_llt,
    "potential-kernel": cmd_potential,
    "simulate": cmd_simulate,
    "localtime": cmd_localtime,
    "verify-clt": cmd_verify_clt,
    "verify-localtime": cmd_verify_localtime,
    "verify-moments": cmd_verify_moments,
    "verify-tightness": cmd_verify_tightness,
    "report": cmd_report,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="loctime", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="INI run configuration (optional for report)")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
    ap.add_argument("--n", type=int, help="path length (overrides [run] n)")
    ap.add_argument("--samples", type=int, help="Monte Carlo sample count (overrides [run] samples)")
    ap.add_argument("--threads", type=int, help="worker threads for Monte Carlo batches")
    return ap


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    for name in ("seed", "n", "samples", "threads"):
        val = getattr(args, name)
        if val is not None:
            changes[name] = val
    if args.out is not None:
        changes["out_dir"] = args.out
    cfg = dataclasses.replace(cfg, **changes)
    validate(cfg)
    if not 0 <= cfg.seed < 2**64:
        raise E.ValidationError("seed must fit in an unsigned 64-bit integer")
    return cfg


def run(command: str, cfg: RunConfig | None, out: Path, seed=None, threads=1) -> tuple[int, list]:
    out.mkdir(parents=True, exist_ok=True)
    if command == "report":
        verdicts = cmd_report(cfg, out, seed=seed, threads=threads)
    else:
        verdicts = COMMANDS[command](cfg, out)
    criteria.write_verdicts(out / "verdicts.jsonl", verdicts)
    status = EXIT_OK if all(v.passed for v in verdicts) else EXIT_VERDICT
    return status, verdicts


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = None
        if args.config is not None:
            cfg = _apply_overrides(load_config(args.config), args)
        elif args.command != "report":
            print(f"loctime {args.command}: --config is required", file=sys.stderr)
            return EXIT_USAGE
        out = Path(args.out or (cfg.out_dir if cfg else "out"))
        seed = args.seed if args.seed is not None else (cfg.seed if cfg else None)
        threads = args.threads or (cfg.threads if cfg else 1)
        status, verdicts = run(args.command, cfg, out, seed=seed, threads=threads)
    except E.LocTimeError as exc:
        print(f"loctime {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        print(f"loctime {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command != "report":
        for v in verdicts:
            print(v.line())
    failed = sum(not v.passed for v in verdicts)
    print(f"{len(verdicts) - failed}/{len(verdicts)} verdicts pass; artifacts in {os.fspath(out)}")
    return status


if __name__ == "__main__":
    sys.exit(main())
