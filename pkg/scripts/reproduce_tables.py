"""Print the ten-sensor allocation tables next to the published percentages.

    python3 scripts/reproduce_tables.py [--case N]
"""

import argparse

import numpy as np

from ddpower import cases
from ddpower.allocator import allocate


def table(case: int) -> float:
    ref = np.asarray(cases.REFERENCE_TABLES[case], float)
    print(f"table {case}")
    worst = 0.0
    for i, dbm in enumerate(cases.TEN_SENSOR_BUDGETS_DBM):
        s = cases.ten_sensor(case, dbm)
        res = allocate(s)
        pct = 100.0 * res.allocation.p / s.p_tot
        dev = float(np.max(np.abs(pct - ref[i])))
        worst = max(worst, dev)
        print(f"  {dbm:5.1f} dBm  {res.solver:9s} ours " + " ".join(f"{x:5.1f}" for x in pct))
        print(f"  {'':9s}  {'':9s} ref  " + " ".join(f"{x:5.1f}" for x in ref[i]) + f"   max dev {dev:.1f}")
    return worst


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", type=int, choices=range(1, 6))
    args = ap.parse_args()
    for case in [args.case] if args.case else range(1, 6):
        worst = table(case)
        print(f"  worst deviation {worst:.1f} pp\n")


if __name__ == "__main__":
    main()
