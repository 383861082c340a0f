"""Monte Carlo verification of allocations.

Simulates ``H_i -> u -> y``, evaluates the exact Gaussian-mixture
log-likelihood ratio at the fusion center, and estimates the Neyman-Pearson
detection probability and the J-divergence of the received signal.

Randomness is split into replicates of ``McConfig.chunk`` draws; replicate
``i`` of purpose ``tag`` always uses the Philox stream keyed by
``(seed, tag, i)``, so results do not depend on how replicates are scheduled.
"""

from __future__ import annotations

import csv
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from . import divergence as dv
from .allocator import objective
from .scenario import Allocation, Scenario, SensorProfile

__all__ = [
    "CapabilityError",
    "McConfig",
    "McEstimate",
    "OracleResult",
    "MAX_SENSORS",
    "stream",
    "draw_decisions",
    "draw_received",
    "fc_log_lr",
    "MixtureModel",
    "simulate_log_lr",
    "estimate_pd_fc",
    "estimate_j_mc",
    "empirical_moments",
    "grid_oracle",
    "write_surface_csv",
]

MAX_SENSORS = 20


class CapabilityError(ValueError):
    """The request is outside what the simulator supports (K too large, K != 2)."""


@dataclass(frozen=True)
class McConfig:
    n_runs: int = 20000
    seed: int = 0
    pf_target: float = 0.04
    chunk: int = 2000
    workers: int = 1

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be positive")
        if not 0.0 < self.pf_target < 1.0:
            raise ValueError(f"pf_target must lie in (0, 1), got {self.pf_target}")
        if self.chunk < 1:
            raise ValueError("chunk must be positive")


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n_runs: int
    seed: int


def stream(seed: int, tag: str, index: int) -> np.random.Generator:
    """Counter-based generator for replicate ``index`` of purpose ``tag``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(tag.encode()), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def draw_decisions(sensors: Sequence[SensorProfile], hypothesis: int, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Independent local decisions, shape ``(size, K)``, values 0/1."""
    if hypothesis not in (0, 1):
        raise ValueError("hypothesis must be 0 or 1")
    p = np.array([s.p_d if hypothesis else s.p_f for s in sensors])
    return (rng.random((size, len(p))) < p).astype(np.int8)


def draw_received(scenario: Scenario, allocation: Allocation, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """``y = H A u + n`` with ``n ~ N(0, R)`` colored by the Cholesky factor of R."""
    u = np.atleast_2d(u)
    ch = scenario.channel
    try:
        chol = np.linalg.cholesky(ch.r)
    except np.linalg.LinAlgError:
        raise ArithmeticError("noise covariance is not positive definite") from None
    ha = ch.h * allocation.amplitudes
    noise = rng.standard_normal((u.shape[0], ch.n_rx)) @ chol.T
    return u @ ha.T + noise


class MixtureModel:
    """Precomputed ``2^K``-component mixtures ``p(y|H_0)`` and ``p(y|H_1)``."""

    def __init__(self, scenario: Scenario, allocation: Allocation):
        k = scenario.k
        if k > MAX_SENSORS:
            raise CapabilityError(f"K={k} exceeds the {MAX_SENSORS}-sensor mixture limit")
        ch = scenario.channel
        codes = np.arange(2**k)
        self.u = ((codes[:, None] >> np.arange(k)) & 1).astype(float)
        with np.errstate(divide="ignore"):
            self.logw = [
                np.sum(np.where(self.u == 1, np.log(p), np.log1p(-p)), axis=1)
                for p in (scenario.p_f, scenario.p_d)
            ]
        self.chol = np.linalg.cholesky(ch.r)
        means = self.u @ (ch.h * allocation.amplitudes).T  # (2^K, N)
        self.white_means = linalg.solve_triangular(self.chol, means.T, lower=True)  # (N, 2^K)
        self.half_norm = 0.5 * np.sum(self.white_means**2, axis=0)
        self.block = max(1, int(4_000_000 // max(1, 2**k)))

    def log_lr(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(y)
        z = linalg.solve_triangular(self.chol, y.T, lower=True).T
        out = np.empty(len(y))
        for start in range(0, len(y), self.block):
            s = z[start : start + self.block] @ self.white_means - self.half_norm
            out[start : start + self.block] = logsumexp(s + self.logw[1], axis=1) - logsumexp(
                s + self.logw[0], axis=1
            )
        return out


def fc_log_lr(y: np.ndarray, scenario: Scenario, allocation: Allocation) -> np.ndarray:
    """``log p(y|H_1) - log p(y|H_0)`` for each row of ``y``."""
    return MixtureModel(scenario, allocation).log_lr(y)


def _chunks(n: int, size: int):
    return [(i, min(size, n - i * size)) for i in range((n + size - 1) // size)]


def simulate_log_lr(
    scenario: Scenario, allocation: Allocation, hypothesis: int, mc: McConfig, tag: str,
    model: MixtureModel | None = None,
) -> np.ndarray:
    """``mc.n_runs`` log-LR samples under ``hypothesis``, in replicate order."""
    model = model or MixtureModel(scenario, allocation)

    def one(job):
        idx, n = job
        rng = stream(mc.seed, tag, idx)
        u = draw_decisions(scenario.sensors, hypothesis, rng, n)
        return model.log_lr(draw_received(scenario, allocation, u, rng))

    jobs = _chunks(mc.n_runs, mc.chunk)
    if mc.workers > 1:
        with ThreadPoolExecutor(mc.workers) as ex:
            parts = list(ex.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]
    return np.concatenate(parts)


def _np_detection(l0: np.ndarray, l1: np.ndarray, pf: float) -> float:
    """Randomized Neyman-Pearson test calibrated on ``l0``.

    The threshold is the lower empirical ``(1 - pf)`` quantile of ``l0``;
    samples tied with it are accepted with the probability that brings the
    empirical false-alarm rate to ``pf``. The returned detection probability
    is the expectation over that randomization.
    """
    t = np.quantile(l0, 1.0 - pf, method="lower")
    above0 = np.mean(l0 > t)
    tie0 = np.mean(l0 == t)
    gamma = 0.0 if tie0 == 0 else float(np.clip((pf - above0) / tie0, 0.0, 1.0))
    return float(np.mean(l1 > t) + gamma * np.mean(l1 == t))


def estimate_pd_fc(scenario: Scenario, allocation: Allocation, mc: McConfig = McConfig()) -> McEstimate:
    """Fusion-center detection probability at false-alarm target ``mc.pf_target``.

    Threshold calibration (H0) and evaluation (H1) use disjoint streams. The
    reported stderr is the binomial one given the threshold; it leaves out the
    calibration error, which matters when the log-LR has atoms (noise-free limit).
    """
    model = MixtureModel(scenario, allocation)
    l0 = simulate_log_lr(scenario, allocation, 0, mc, "pd_fc/h0", model)
    l1 = simulate_log_lr(scenario, allocation, 1, mc, "pd_fc/h1", model)
    pd = _np_detection(l0, l1, mc.pf_target)
    se = float(np.sqrt(pd * (1 - pd) / mc.n_runs))
    return McEstimate(pd, se, mc.n_runs, mc.seed)


def estimate_j_mc(scenario: Scenario, allocation: Allocation, mc: McConfig = McConfig()) -> McEstimate:
    """``E[log LR | H1] - E[log LR | H0]`` with a pooled standard error."""
    model = MixtureModel(scenario, allocation)
    l0 = simulate_log_lr(scenario, allocation, 0, mc, "j_mc/h0", model)
    l1 = simulate_log_lr(scenario, allocation, 1, mc, "j_mc/h1", model)
    n = mc.n_runs
    value = float(np.mean(l1) - np.mean(l0))
    se = float(np.sqrt(np.var(l1, ddof=1) / n + np.var(l0, ddof=1) / n)) if n > 1 else float("inf")
    return McEstimate(value, se, n, mc.seed)


@dataclass
class MomentCheck:
    mean: np.ndarray
    cov: np.ndarray
    mean_se: np.ndarray
    cov_se: np.ndarray


def empirical_moments(
    scenario: Scenario, allocation: Allocation, hypothesis: int, mc: McConfig
) -> MomentCheck:
    """Sample mean/covariance of ``y`` with their Monte Carlo standard errors."""

    def one(job):
        idx, n = job
        rng = stream(mc.seed, f"moments/h{hypothesis}", idx)
        u = draw_decisions(scenario.sensors, hypothesis, rng, n)
        return draw_received(scenario, allocation, u, rng)

    y = np.concatenate([one(j) for j in _chunks(mc.n_runs, mc.chunk)])
    n = len(y)
    mean = y.mean(axis=0)
    c = y - mean
    prods = c[:, :, None] * c[:, None, :]
    cov = prods.mean(axis=0) * n / (n - 1)
    mean_se = c.std(axis=0, ddof=1) / np.sqrt(n)
    cov_se = prods.std(axis=0, ddof=1) / np.sqrt(n)
    return MomentCheck(mean, cov, mean_se, cov_se)


@dataclass
class OracleResult:
    best: Allocation
    best_value: float
    p1: np.ndarray
    p2: np.ndarray
    values: np.ndarray  # (len(p1), len(p2)); NaN outside the budget

    def rows(self):
        for i, a in enumerate(self.p1):
            for j, b in enumerate(self.p2):
                if np.isfinite(self.values[i, j]):
                    yield float(a), float(b), float(self.values[i, j])


def _axis(pmax: float, step: float) -> np.ndarray:
    n = int(np.floor(pmax / step + 1e-9))
    ax = step * np.arange(n + 1)
    if pmax - ax[-1] > 1e-12 * pmax:
        ax = np.append(ax, pmax)
    return ax


def grid_oracle(
    scenario: Scenario,
    objective_kind: str = "approx_j",
    grid_step: float | None = None,
    mc: McConfig | None = None,
) -> OracleResult:
    """Brute-force search over a 2-D power grid.

    ``objective_kind="approx_j"`` scores points by the decoupled objective on
    orthogonal channels (``2K`` at zero power) and by the Gaussian J
    otherwise; ``"pd_fc"`` scores by :func:`estimate_pd_fc` with the same
    seed at every point (common random numbers).
    """
    if scenario.k != 2:
        raise CapabilityError(f"grid oracle supports K=2 only, got K={scenario.k}")
    if objective_kind not in ("approx_j", "pd_fc"):
        raise ValueError(f"unknown objective {objective_kind!r}")
    if objective_kind == "pd_fc" and mc is None:
        mc = McConfig()
    step = grid_step or (0.02 if objective_kind == "approx_j" else 0.1)
    pmax = scenario.p_max
    ax1, ax2 = _axis(pmax[0], step), _axis(pmax[1], step)
    vals = np.full((len(ax1), len(ax2)), np.nan)
    ch = scenario.channel
    tol = 1e-12 * scenario.p_tot
    for i, a in enumerate(ax1):
        for j, b in enumerate(ax2):
            if a + b > scenario.p_tot + tol:
                continue
            p = np.array([a, b])
            if objective_kind == "pd_fc":
                vals[i, j] = estimate_pd_fc(scenario, Allocation(p), mc).value
            elif ch.is_orthogonal:
                vals[i, j] = dv.j_orthogonal(p, list(scenario.sensors), ch.gains, ch.sigma2)
            else:
                vals[i, j] = objective(scenario, p)
    flat = np.nanargmax(vals)
    i, j = np.unravel_index(flat, vals.shape)
    return OracleResult(Allocation([ax1[i], ax2[j]]), float(vals[i, j]), ax1, ax2, vals)


def write_surface_csv(result: OracleResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p1_mW", "p2_mW", "value"])
        for a, b, v in result.rows():
            w.writerow([f"{a:.6f}", f"{b:.6f}", f"{v:.10g}"])
