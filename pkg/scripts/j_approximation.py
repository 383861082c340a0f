"""Compare the Gaussian J approximation with Monte Carlo J on the
ten-sensor Case 1 across the table budgets.

    python3 scripts/j_approximation.py --runs 20000
"""

import argparse

import numpy as np

from ddpower import cases
from ddpower.allocator import allocate
from ddpower.divergence import bernoulli_j_upper_bound, j_approx
from ddpower.montecarlo import McConfig, estimate_j_mc


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", type=int, default=1, choices=range(1, 6))
    ap.add_argument("--runs", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    mc = McConfig(n_runs=args.runs, seed=args.seed)
    print("p_tot_dbm,j_approx,j_mc,j_mc_stderr,rel_gap,j_local")
    for dbm in np.arange(-7.0, 13.0 + 1e-9, 2.0):
        s = cases.ten_sensor(args.case, float(dbm))
        a = allocate(s).allocation
        ja = j_approx(s, a)
        est = estimate_j_mc(s, a, mc)
        ju = bernoulli_j_upper_bound(s.sensors)
        print(f"{dbm:g},{ja:.5f},{est.value:.5f},{est.stderr:.5f},{(est.value - ja) / ja:+.3f},{ju:.4f}")


if __name__ == "__main__":
    main()
