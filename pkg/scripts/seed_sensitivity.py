"""Spread of the two seed-dependent Monte Carlo verdicts over independent master seeds.

Usage: python scripts/seed_sensitivity.py [n_seeds]
"""
import sys

import numpy as np

from loctime import criteria

if __name__ == "__main__":
    n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    seeds = [criteria.DEFAULT_SEED] + list(range(1, n_seeds))
    rows = []
    for seed in seeds:
        clt = {v.params["system"]: v for v in criteria.c09_clt(seed=seed)}
        mom = criteria.c12_moments(seed=seed)
        rows.append((seed, clt["two_state"].value, clt["golden_mean"].value, clt["iid3"].value,
                     mom[0].value, mom[1].value))
        print(f"seed {seed:>9}  KS two={rows[-1][1]:.4f} golden={rows[-1][2]:.4f} iid3={rows[-1][3]:.4f}"
              f"  moment4 max/median={rows[-1][4]:.3f}  moment2 spread={rows[-1][5]:.3f}", flush=True)
    a = np.array([r[1:] for r in rows])
    crit = criteria.vf.ks_critical(5000)
    print(f"\nKS critical value {crit:.4f}")
    for j, name in enumerate(["two_state", "golden_mean", "iid3"]):
        print(f"  {name:<12} fails {np.sum(a[:, j] > crit)}/{len(seeds)}  mean KS {a[:, j].mean():.4f}")
    print(f"fourth-moment spread > 3 in {np.sum(a[:, 3] > 3)}/{len(seeds)} seeds "
          f"(median {np.median(a[:, 3]):.2f}, max {a[:, 3].max():.2f})")
    print(f"second-moment spread > 3 in {np.sum(a[:, 4] > 3)}/{len(seeds)} seeds")
