"""Command-line front end.

Verbs: ``validate``, ``allocate``, ``sweep``, ``oracle``, ``bounds``.
Budgets are given in dBm; CSV files carry both dBm and mW columns.

Exit codes: 0 ok, 2 config error, 3 solver not certified, 4 capability error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import divergence as dv
from .allocator import (
    KktReport,
    NotInRegionError,
    UnsupportedBaselineError,
    allocate,
    equal_allocation,
    equal_snr_allocation,
    objective,
)
from .config import ConfigError, ScenarioConfig, load_config
from .montecarlo import CapabilityError, McConfig, estimate_j_mc, estimate_pd_fc, grid_oracle, write_surface_csv
from .scenario import Allocation, Scenario, ScenarioError, dbm_to_mw, mw_to_dbm, validate

log = logging.getLogger("ddpower")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNCERTIFIED = 3
EXIT_CAPABILITY = 4

ALLOCATORS = ("proposed", "equal", "equal_snr")
LN2 = math.log(2.0)


@dataclass(frozen=True)
class SweepSpec:
    p_tot_start_dbm: float
    p_tot_stop_dbm: float
    n_points: int
    allocators: tuple[str, ...] = ALLOCATORS

    def __post_init__(self):
        if not self.p_tot_start_dbm < self.p_tot_stop_dbm:
            raise ValueError("sweep start must be below stop")
        if self.n_points < 2:
            raise ValueError("a sweep needs at least 2 points")
        bad = [a for a in self.allocators if a not in ALLOCATORS]
        if bad or not self.allocators:
            raise ValueError(f"allocators must be a nonempty subset of {ALLOCATORS}, got {bad or '[]'}")

    def budgets_dbm(self) -> np.ndarray:
        return np.linspace(self.p_tot_start_dbm, self.p_tot_stop_dbm, self.n_points)


@dataclass
class ReportRow:
    p_tot_dbm: float
    allocator: str
    solver: str
    p: np.ndarray
    approx_j: float
    certified: bool
    pd_fc: float | None = None
    pd_fc_stderr: float | None = None
    kkt: KktReport | None = None


@dataclass
class Report:
    k: int
    rows: list[ReportRow] = field(default_factory=list)

    def sorted_rows(self) -> list[ReportRow]:
        order = {a: i for i, a in enumerate(ALLOCATORS)}
        return sorted(self.rows, key=lambda r: (r.p_tot_dbm, order.get(r.allocator, 99), r.allocator))

    def header(self, with_mc: bool) -> list[str]:
        cols = ["p_tot_dbm", "p_tot_mw", "allocator", "solver"]
        cols += [f"p{i + 1}_mw" for i in range(self.k)]
        cols += [f"p{i + 1}_pct" for i in range(self.k)]
        cols += ["approx_j_nats", "certified"]
        if with_mc:
            cols += ["pd_fc", "pd_fc_stderr"]
        return cols

    def write_csv(self, path, scenario: Scenario) -> None:
        with_mc = any(r.pd_fc is not None for r in self.rows)
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header(with_mc))
            for r in self.sorted_rows():
                p_tot = dbm_to_mw(r.p_tot_dbm)
                Allocation(r.p).check(scenario.with_p_tot(p_tot))
                pct = 100.0 * r.p / p_tot
                row = [_fmt(r.p_tot_dbm), _fmt(p_tot), r.allocator, r.solver]
                row += [_fmt(v) for v in r.p] + [_fmt(v) for v in pct]
                row += [_fmt(r.approx_j), "1" if r.certified else "0"]
                if with_mc:
                    row += ["" if r.pd_fc is None else _fmt(r.pd_fc), "" if r.pd_fc_stderr is None else _fmt(r.pd_fc_stderr)]
                w.writerow(row)


def _fmt(x: float) -> str:
    # fixed significant digits keep files byte-stable across platforms
    v = float(x)
    if v == 0.0:
        return "0"
    return format(v, ".10g")


def _baseline(name: str, scenario: Scenario) -> Allocation:
    if name == "equal":
        return equal_allocation(scenario)
    if name == "equal_snr":
        return equal_snr_allocation(scenario)
    raise ValueError(name)


def _solve(name: str, scenario: Scenario, solver: str) -> ReportRow:
    p_tot_dbm = mw_to_dbm(scenario.p_tot)
    if name == "proposed":
        res = allocate(scenario, solver)
        alloc, certified, used, kkt = res.allocation, res.report.certified, res.report.solver or res.solver, res.report
    else:
        alloc, certified, used, kkt = _baseline(name, scenario), True, name, None
    alloc.check(scenario)
    return ReportRow(p_tot_dbm, name, used, alloc.p.copy(), objective(scenario, alloc.p), certified, kkt=kkt)


def _mc_config(args) -> McConfig:
    return McConfig(n_runs=args.mc_runs, seed=args.seed, pf_target=args.pf_fc, workers=args.workers)


def _scenario(args) -> tuple[ScenarioConfig, Scenario]:
    cfg = load_config(args.config)
    sc = cfg.scenario
    if getattr(args, "p_tot_dbm", None) is not None:
        sc = sc.with_p_tot(dbm_to_mw(args.p_tot_dbm))
    return cfg, sc


def _print_allocation(row: ReportRow, scenario: Scenario, bits: bool, out) -> None:
    unit = "bits" if bits else "nats"
    j = row.approx_j / LN2 if bits else row.approx_j
    print(f"P_tot = {row.p_tot_dbm:.4f} dBm ({scenario.p_tot:.6g} mW)", file=out)
    print(f"solver: {row.solver}", file=out)
    for i, v in enumerate(row.p):
        print(f"  sensor {i + 1}: {v:.6f} mW ({100 * v / scenario.p_tot:.2f} %)", file=out)
    print(f"approx J = {j:.6g} {unit}", file=out)


# --- verbs --------------------------------------------------------------------


def cmd_validate(args, out=None) -> int:
    out = out or sys.stdout
    cfg, sc = _scenario(args)
    v = validate(sc)
    ch = sc.channel
    print(f"ok: {args.config}", file=out)
    print(f"K = {sc.k}, N = {ch.n_rx}, channel = {ch.kind}", file=out)
    print(f"P_tot = {mw_to_dbm(sc.p_tot):.4f} dBm, priors = ({cfg.prior0:g}, {cfg.prior1:g})", file=out)
    for i, (s, ins) in enumerate(zip(sc.sensors, v.in_region_s)):
        print(
            f"  sensor {i + 1}: p_d={s.p_d:g} p_f={s.p_f:g} p_max={s.p_max:.6g} mW region_S={'yes' if ins else 'no'}",
            file=out,
        )
    if v.full_power:
        print("budget covers every cap: full power", file=out)
    return EXIT_OK


def cmd_allocate(args, out=None) -> int:
    out = out or sys.stdout
    _, sc = _scenario(args)
    row = _solve("proposed", sc, args.solver)
    if args.mc:
        est = estimate_pd_fc(sc, Allocation(row.p), _mc_config(args))
        row.pd_fc, row.pd_fc_stderr = est.value, est.stderr
    _print_allocation(row, sc, args.bits, out)
    kkt = row.kkt
    print(
        f"KKT: lambda={kkt.lam:.6g} stationarity={kkt.max_stationarity:.3e} "
        f"complementarity={kkt.complementarity_residual:.3e} certified={'yes' if row.certified else 'no'}",
        file=out,
    )
    if row.pd_fc is not None:
        print(f"P_D,FC = {row.pd_fc:.4f} +/- {row.pd_fc_stderr:.4f} (P_F,FC = {args.pf_fc:g})", file=out)
    if args.out:
        rep = Report(sc.k, [row])
        rep.write_csv(args.out, sc)
    return EXIT_OK if row.certified else EXIT_UNCERTIFIED


def cmd_sweep(args, out=None) -> int:
    out = out or sys.stdout
    _, base = _scenario(args)
    allocs = tuple(a.strip() for a in args.allocators.split(",") if a.strip())
    try:
        spec = SweepSpec(args.start_dbm, args.stop_dbm, args.points, allocs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rep = Report(base.k)
    mc = _mc_config(args) if args.mc else None
    for dbm in spec.budgets_dbm():
        sc = base.with_p_tot(dbm_to_mw(float(dbm)))
        for name in spec.allocators:
            row = _solve(name, sc, args.solver)
            row.p_tot_dbm = float(dbm)
            if mc is not None:
                est = estimate_pd_fc(sc, Allocation(row.p), mc)
                row.pd_fc, row.pd_fc_stderr = est.value, est.stderr
            rep.rows.append(row)
    for r in rep.sorted_rows():
        powers = " ".join(f"{v:.4f}" for v in r.p)
        line = f"{r.p_tot_dbm:8.3f} dBm  {r.allocator:<9s} {r.solver:<10s} [{powers}] J={r.approx_j:.6g}"
        if r.pd_fc is not None:
            line += f" P_D,FC={r.pd_fc:.4f}+/-{r.pd_fc_stderr:.4f}"
        print(line, file=out)
    if args.out:
        rep.write_csv(args.out, base)
    return EXIT_OK if all(r.certified for r in rep.rows) else EXIT_UNCERTIFIED


def cmd_oracle(args, out=None) -> int:
    out = out or sys.stdout
    _, sc = _scenario(args)
    mc = _mc_config(args) if args.objective == "pd_fc" else None
    res = grid_oracle(sc, args.objective, args.grid_step, mc)
    if args.out:
        write_surface_csv(res, args.out)
    p = res.best.p
    print("p1_mW,p2_mW,value", file=out)
    print(f"{p[0]:.6f},{p[1]:.6f},{res.best_value:.10g}", file=out)
    return EXIT_OK


def cmd_bounds(args, out=None) -> int:
    out = out or sys.stdout
    cfg, sc = _scenario(args)
    if args.allocator == "zero":
        alloc = Allocation.zeros(sc.k)
    elif args.allocator == "proposed":
        res = allocate(sc, args.solver)
        alloc = res.allocation
        if not res.report.certified:
            log.warning("allocation not certified")
    else:
        alloc = _baseline(args.allocator, sc)
    scale, unit = (1 / LN2, "bits") if args.bits else (1.0, "nats")
    p0, p1 = cfg.prior0, cfg.prior1
    j_u = dv.bernoulli_j_upper_bound(sc.sensors)
    j_y = objective(sc, alloc.p)

    def line(label, j):
        print(f"{label:<22s} J = {j * scale:.6g} {unit}  P_e >= {dv.pe_lower_bound(j, p0, p1):.6g}", file=out)

    print(f"allocation ({args.allocator}): " + " ".join(f"{v:.6f}" for v in alloc.p) + " mW", file=out)
    line("local decisions J(u)", j_u)
    line("approx J(y)", j_y)
    ok = j_y <= j_u * (1 + 1e-12)
    if args.mc:
        est = estimate_j_mc(sc, alloc, _mc_config(args))
        line("Monte Carlo J(y)", max(est.value, 0.0))
        print(f"{'':<22s} stderr = {est.stderr * scale:.3g} {unit}", file=out)
        ok = ok and est.value <= j_u + 3 * est.stderr
    print(f"ordering J(y) <= J(u): {'holds' if ok else 'VIOLATED'}", file=out)
    return EXIT_OK


# --- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="scenario INI file")
    common.add_argument("--out", metavar="PATH.csv", help="write a CSV report")
    common.add_argument("--seed", type=int, default=0, help="Monte Carlo seed (default 0)")
    common.add_argument("--mc-runs", type=int, default=20000, help="Monte Carlo runs per hypothesis")
    common.add_argument("--pf-fc", type=float, default=0.04, help="fusion-center false-alarm target")
    common.add_argument("--solver", choices=("auto", "waterfill", "general"), default="auto")
    common.add_argument("--grid-step", type=float, default=None, metavar="MW", help="oracle grid step in mW")
    common.add_argument("--p-tot-dbm", type=float, default=None, help="override the configured budget")
    common.add_argument("--workers", type=int, default=1, help="Monte Carlo worker threads")
    common.add_argument("--bits", action="store_true", help="print divergences in bits")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ddpower", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    sub.add_parser("validate", parents=[common], help="check a scenario file")

    a = sub.add_parser("allocate", parents=[common], help="optimal allocation at one budget")
    a.add_argument("--mc", action="store_true", help="also estimate P_D,FC")

    s = sub.add_parser("sweep", parents=[common], help="allocations over a range of budgets")
    s.add_argument("--start-dbm", type=float, default=-14.0)
    s.add_argument("--stop-dbm", type=float, default=6.0)
    s.add_argument("--points", type=int, default=11)
    s.add_argument("--allocators", default=",".join(ALLOCATORS), help="comma list from proposed,equal,equal_snr")
    s.add_argument("--mc", action="store_true", help="append P_D,FC columns")

    o = sub.add_parser("oracle", parents=[common], help="2-D grid search (K=2)")
    o.add_argument("--objective", choices=("approx_j", "pd_fc"), default="approx_j")

    b = sub.add_parser("bounds", parents=[common], help="divergence and error-probability bounds")
    b.add_argument("--allocator", choices=("proposed", "equal", "equal_snr", "zero"), default="proposed")
    b.add_argument("--mc", action="store_true", help="also estimate J(y) by simulation")
    return p


VERBS = {
    "validate": cmd_validate,
    "allocate": cmd_allocate,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
    "bounds": cmd_bounds,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.mc_runs < 1 or not 0 < args.pf_fc < 1:
            raise ConfigError("--mc-runs must be positive and --pf-fc in (0, 1)")
        if args.grid_step is not None and not args.grid_step > 0:
            raise ConfigError("--grid-step must be positive")
        if args.verb in ("allocate", "sweep") and args.solver == "auto":
            # record which path produced the result
            logging.getLogger("ddpower.allocator").setLevel(logging.INFO)
        return VERBS[args.verb](args)
    except (CapabilityError, NotInRegionError, UnsupportedBaselineError) as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
