"""Power allocators.

* :func:`waterfill_allocate` -- weighted waterfilling for orthogonal channels
  when every sensor's objective is concave in its power;
* :func:`general_allocate` -- log-barrier interior-point maximization of the
  Gaussian J for any channel, multi-started;
* :func:`equal_allocation` / :func:`equal_snr_allocation` -- baselines;
* :func:`verify_kkt` -- reconstructs multipliers and residuals for a given
  allocation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import divergence as dv
from .scenario import Allocation, Scenario

__all__ = [
    "NotInRegionError",
    "UnsupportedBaselineError",
    "WaterfillState",
    "KktReport",
    "SolverOptions",
    "AllocationResult",
    "equal_allocation",
    "equal_snr_allocation",
    "kkt_power_at_lambda",
    "waterfill_allocate",
    "general_allocate",
    "verify_kkt",
    "allocate",
    "objective",
]

log = logging.getLogger(__name__)


class NotInRegionError(ValueError):
    """A sensor's objective is not concave in power; use :func:`general_allocate`."""


class UnsupportedBaselineError(ValueError):
    pass


@dataclass
class WaterfillState:
    w0: np.ndarray
    w1: np.ndarray
    lam: float
    bracket: tuple[float, float]
    order: np.ndarray
    iterations: int = 0


@dataclass
class KktReport:
    lam: float
    nu: np.ndarray
    eta: np.ndarray
    stationarity_residual: np.ndarray
    complementarity_residual: float
    on_boundary: bool
    tol: float = 1e-6
    certified: bool = True
    objective: float = float("nan")
    start_index: int | None = None
    solver: str = ""

    @property
    def max_stationarity(self) -> float:
        return float(np.max(np.abs(self.stationarity_residual), initial=0.0))

    @property
    def satisfied(self) -> bool:
        return (
            self.max_stationarity <= self.tol
            and self.complementarity_residual <= self.tol
            and self.on_boundary
        )


@dataclass(frozen=True)
class SolverOptions:
    mu0: float = 1.0
    mu_final: float = 1e-9
    mu_factor: float = 10.0
    max_inner: int = 200
    newton_tol: float = 1e-13
    fd_rel_step: float = 1e-6
    kkt_tol: float = 1e-6
    interior_weight: float = 0.05
    snap_rel: float = 1e-5


@dataclass
class AllocationResult:
    allocation: Allocation
    report: KktReport
    solver: str
    state: WaterfillState | None = None
    extra: dict = field(default_factory=dict)


# --- baselines ---------------------------------------------------------------


def _capped_fill(weights: np.ndarray, pmax: np.ndarray, p_tot: float) -> np.ndarray:
    """Distribute ``p_tot`` proportionally to ``weights`` with per-entry caps,
    redistributing the excess of capped entries until a fixpoint."""
    if np.sum(pmax) <= p_tot:
        return pmax.copy()
    p = np.zeros_like(pmax)
    free = np.ones(len(pmax), dtype=bool)
    remaining = p_tot
    while True:
        share = remaining * weights[free] / np.sum(weights[free])
        over = share >= pmax[free]
        if not over.any():
            p[free] = share
            return p
        idx = np.flatnonzero(free)[over]
        p[idx] = pmax[idx]
        remaining -= np.sum(pmax[idx])
        free[idx] = False


def equal_allocation(scenario: Scenario) -> Allocation:
    return Allocation(_capped_fill(np.ones(scenario.k), scenario.p_max, scenario.p_tot))


def equal_snr_allocation(scenario: Scenario) -> Allocation:
    """Powers proportional to ``1/g_j`` so all sensors arrive with equal SNR."""
    ch = scenario.channel
    if not ch.is_orthogonal:
        raise UnsupportedBaselineError("equal received SNR needs an orthogonal channel")
    return Allocation(_capped_fill(1.0 / ch.gains, scenario.p_max, scenario.p_tot))


# --- objective plumbing -----------------------------------------------------


def objective(scenario: Scenario, p) -> float:
    """Gaussian-approximated J (nats) of the allocation ``p``."""
    p = np.asarray(p.p if isinstance(p, Allocation) else p, float)
    ch = scenario.channel
    if ch.is_orthogonal:
        return 0.5 * dv.j_orthogonal(p, list(scenario.sensors), ch.gains, ch.sigma2) - scenario.k
    return dv.j_approx(scenario, p)


def _fd_gradient(f: Callable, p: np.ndarray, scale: float, rel: float) -> np.ndarray:
    grad = np.empty_like(p)
    for j in range(len(p)):
        h = rel * max(p[j], scale)
        e = np.zeros_like(p)
        e[j] = h
        if p[j] - h >= 0.0:
            grad[j] = (f(p + e) - f(p - e)) / (2 * h)
        else:
            grad[j] = (f(p + e) - f(p)) / h
    return grad


class _Problem:
    """Objective with gradient and Hessian for the interior-point solver."""

    def __init__(self, scenario: Scenario, fd_rel_step: float):
        self.scenario = scenario
        self.ch = scenario.channel
        self.sensors = list(scenario.sensors)
        self.scale = scenario.p_tot / scenario.k
        self.rel = fd_rel_step

    def value(self, p: np.ndarray) -> float:
        return objective(self.scenario, p)

    def grad(self, p: np.ndarray) -> np.ndarray:
        if self.ch.is_orthogonal:
            return 0.5 * np.asarray(dv.dj_dp(p, self.sensors, self.ch.gains, self.ch.sigma2))
        return _fd_gradient(self.value, p, self.scale, self.rel)

    def hess(self, p: np.ndarray) -> np.ndarray:
        if self.ch.is_orthogonal:
            d2 = dv.d2j_dp2(p, self.sensors, self.ch.gains, self.ch.sigma2).value
            return np.diag(0.5 * np.asarray(d2))
        k = len(p)
        out = np.empty((k, k))
        for j in range(k):
            h = 1e-4 * max(p[j], self.scale)
            e = np.zeros(k)
            e[j] = h
            if p[j] - h >= 0.0:
                out[:, j] = (self.grad(p + e) - self.grad(p - e)) / (2 * h)
            else:
                out[:, j] = (self.grad(p + e) - self.grad(p)) / h
        return 0.5 * (out + out.T)

    def kkt_grad(self, p: np.ndarray) -> np.ndarray:
        """Gradient in the units reported by :class:`KktReport`."""
        if self.ch.is_orthogonal:
            return np.asarray(dv.dj_dp(p, self.sensors, self.ch.gains, self.ch.sigma2), float)
        return self.grad(p)


# --- KKT verification --------------------------------------------------------


def _kkt_from_gradient(
    grad: np.ndarray, p: np.ndarray, pmax: np.ndarray, p_tot: float, tol: float
) -> KktReport:
    k = len(p)
    act = 1e-9
    lower = p <= act * pmax
    upper = p >= pmax * (1 - act)
    free = ~(lower | upper)
    budget = min(p_tot, float(np.sum(pmax)))
    slack = p_tot - float(np.sum(p))
    sum_active = slack <= tol * p_tot
    on_boundary = abs(float(np.sum(p)) - budget) <= tol * p_tot

    if not sum_active:
        lam = 0.0
    elif free.any():
        lam = float(np.mean(grad[free]))
    else:
        lo = float(np.max(grad[lower], initial=0.0))
        hi = float(np.min(grad[upper], initial=np.inf))
        if np.isinf(hi):
            lam = lo
        elif lo <= 0.0:
            lam = 0.5 * hi
        else:
            lam = 0.5 * (lo + hi)

    nu = np.zeros(k)
    eta = np.zeros(k)
    nu[lower] = np.maximum(lam - grad[lower], 0.0)
    eta[upper] = np.maximum(grad[upper] - lam, 0.0)
    resid = grad - lam + nu - eta
    scale = max(abs(lam), float(np.max(np.abs(grad), initial=0.0)), 1e-300)
    comp = max(
        abs(lam * slack) / (scale * p_tot),
        float(np.max(np.abs(nu * p) / (scale * pmax), initial=0.0)),
        float(np.max(np.abs(eta * (pmax - p)) / (scale * pmax), initial=0.0)),
    )
    return KktReport(
        lam=lam,
        nu=nu,
        eta=eta,
        stationarity_residual=resid / scale,
        complementarity_residual=comp,
        on_boundary=on_boundary,
        tol=tol,
    )


def verify_kkt(scenario: Scenario, allocation: Allocation, tol: float = 1e-6) -> KktReport:
    """Rebuild ``lambda``, ``nu``, ``eta`` from the active-set pattern of
    ``allocation`` and report scaled stationarity / complementarity residuals.

    Residuals are divided by ``max(|lambda|, max_j |dJ/dP_j|)`` so they are
    dimensionless. Orthogonal channels use the analytic derivative; other
    channels fall back to finite differences of the Gaussian J.
    """
    prob = _Problem(scenario, SolverOptions().fd_rel_step)
    p = np.asarray(allocation.p, float)
    rep = _kkt_from_gradient(prob.kkt_grad(p), p, scenario.p_max, scenario.p_tot, tol)
    rep.certified = rep.satisfied
    rep.objective = objective(scenario, p)
    return rep


# --- weighted waterfilling ---------------------------------------------------


def kkt_power_at_lambda(lam: float, sensor, g: float, sigma2: float, p_max: float | None = None) -> float:
    """Power solving ``dJ/dP = lam`` on ``[0, p_max]`` for a concave sensor.

    Returns 0 when ``lam >= w0`` and ``p_max`` when ``lam <= w1``; otherwise
    bisects the (decreasing) derivative to ``1e-9 * p_max``.
    """
    pd, pf = dv._pd_pf(sensor)
    if p_max is None:
        p_max = sensor.p_max
    if not dv.in_region_s(float(pd), float(pf)).inside:
        raise NotInRegionError(f"sensor (p_d={pd}, p_f={pf}) is outside region S")
    w0 = dv.dj_dp(0.0, (pd, pf), g, sigma2)
    w1 = dv.dj_dp(p_max, (pd, pf), g, sigma2)
    if lam >= w0:
        return 0.0
    if lam <= w1:
        return float(p_max)
    lo, hi = 0.0, float(p_max)
    tol = 1e-9 * p_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if dv.dj_dp(mid, (pd, pf), g, sigma2) > lam:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _powers_at(lam: float, scenario: Scenario) -> np.ndarray:
    ch = scenario.channel
    return np.array(
        [
            kkt_power_at_lambda(lam, s, g, ch.sigma2, s.p_max)
            for s, g in zip(scenario.sensors, ch.gains)
        ]
    )


def waterfill_allocate(scenario: Scenario, eps: float | None = None) -> tuple[Allocation, WaterfillState]:
    """Weighted waterfilling on the shared multiplier ``lambda``.

    Sensors are ranked by their marginal value at zero power ``w0`` (ties
    broken by index), the bracket ``[w_b, w_a]`` holding the budget is located
    among the ranked ``w0`` values, and bisection runs until the allocated
    totals at the two ends differ by less than ``eps`` (default
    ``1e-6 * p_tot``). The allocation at ``w_a`` is returned.
    """
    ch = scenario.channel
    if not ch.is_orthogonal:
        raise NotInRegionError("waterfilling needs an orthogonal channel")
    sensors = list(scenario.sensors)
    outside = [j for j, s in enumerate(sensors) if not dv.in_region_s(s.p_d, s.p_f).inside]
    if outside:
        raise NotInRegionError(
            f"sensors {outside} are outside region S; use general_allocate"
        )
    p_tot = scenario.p_tot
    eps = 1e-6 * p_tot if eps is None else eps
    pmax = scenario.p_max
    w0 = np.asarray(dv.dj_dp(np.zeros(scenario.k), sensors, ch.gains, ch.sigma2), float)
    w1 = np.asarray(dv.dj_dp(pmax, sensors, ch.gains, ch.sigma2), float)
    order = np.argsort(-w0, kind="stable")

    if np.sum(pmax) <= p_tot:
        return Allocation(pmax.copy()), WaterfillState(w0, w1, 0.0, (0.0, 0.0), order)

    ranked = w0[order]
    totals = [float(np.sum(_powers_at(w, scenario))) for w in ranked]
    jp = max(i for i, t in enumerate(totals) if t <= p_tot)
    w_a = float(ranked[jp])
    w_b = float(ranked[jp + 1]) if jp + 1 < len(ranked) else 0.0
    p_a = _powers_at(w_a, scenario)
    p_b = _powers_at(w_b, scenario)
    it = 0
    while np.sum(p_b) - np.sum(p_a) >= eps and it < 500:
        w_c = 0.5 * (w_a + w_b)
        p_c = _powers_at(w_c, scenario)
        if np.sum(p_c) <= p_tot:
            w_a, p_a = w_c, p_c
        else:
            w_b, p_b = w_c, p_c
        it += 1
    state = WaterfillState(w0, w1, w_a, (w_a, w_b), order, it)
    return Allocation(p_a), state


# --- general interior-point solver ------------------------------------------


def _barrier_terms(x, pmax, p_tot):
    s = p_tot - np.sum(x)
    val = np.sum(np.log(x)) + np.sum(np.log(pmax - x)) + np.log(s)
    grad = 1.0 / x - 1.0 / (pmax - x) - 1.0 / s
    hdiag = 1.0 / x**2 + 1.0 / (pmax - x) ** 2
    return val, grad, hdiag, 1.0 / s**2


def _max_step(x, d, pmax, p_tot) -> float:
    t = np.inf
    neg = d < 0
    if neg.any():
        t = min(t, float(np.min(-x[neg] / d[neg])))
    pos = d > 0
    if pos.any():
        t = min(t, float(np.min((pmax[pos] - x[pos]) / d[pos])))
    ds = float(np.sum(d))
    if ds > 0:
        t = min(t, (p_tot - float(np.sum(x))) / ds)
    return t


def _center(prob: _Problem, x: np.ndarray, mu: float, pmax, p_tot, opts: SolverOptions):
    """Damped (modified) Newton minimization of ``-J - mu * barrier``."""

    def phi(z):
        return -prob.value(z) - mu * _barrier_terms(z, pmax, p_tot)[0]

    f = phi(x)
    for it in range(opts.max_inner):
        _, bg, bh, bs = _barrier_terms(x, pmax, p_tot)
        g = -prob.grad(x) - mu * bg
        hess = -prob.hess(x) + mu * (np.diag(bh) + bs)
        tau = 0.0
        base = float(np.max(np.abs(np.diag(hess)))) or 1.0
        while True:
            try:
                chol = np.linalg.cholesky(hess + tau * np.eye(len(x)))
                break
            except np.linalg.LinAlgError:
                tau = max(10 * tau, 1e-10 * base)
        d = -np.linalg.solve(chol.T, np.linalg.solve(chol, g))
        dec = -float(g @ d)
        if dec / 2 <= opts.newton_tol * max(1.0, abs(f)):
            return x, True
        t = min(1.0, 0.99 * _max_step(x, d, pmax, p_tot))
        accepted = False
        for _ in range(60):
            xn = x + t * d
            fn = phi(xn)
            if np.isfinite(fn) and fn <= f - 1e-4 * t * dec:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # roundoff floor of phi reached
            return x, dec < 1e-8 * max(1.0, abs(f))
        x, f = xn, fn
    return x, False


def _barrier_solve(prob: _Problem, x0, pmax, p_tot, opts: SolverOptions):
    x = x0.copy()
    mu = opts.mu0
    ok = True
    while True:
        x, conv = _center(prob, x, mu, pmax, p_tot, opts)
        ok &= conv
        if mu <= opts.mu_final * (1 + 1e-12):
            return x, ok
        mu = max(mu / opts.mu_factor, opts.mu_final)


def _polish(prob: _Problem, x: np.ndarray, pmax: np.ndarray, p_tot: float, opts: SolverOptions):
    """Snap near-active bounds and solve the reduced KKT system by Newton.

    Active sets are corrected when a multiplier comes out negative. Returns
    ``None`` when no consistent active set is found.
    """
    k = len(x)
    lower = x <= opts.snap_rel * pmax
    upper = x >= pmax * (1 - opts.snap_rel)
    for _ in range(2 * k + 2):
        free = ~(lower | upper)
        p = np.where(lower, 0.0, np.where(upper, pmax, x))
        rest = p_tot - float(np.sum(pmax[upper]))
        if free.any():
            pf = p[free].copy()
            pf *= rest / np.sum(pf) if np.sum(pf) > 0 else 1.0
            p[free] = pf
            lam = float(np.mean(prob.grad(p)[free]))
            for _ in range(100):
                g = prob.grad(p)[free]
                hff = prob.hess(p)[np.ix_(free, free)]
                nf = int(free.sum())
                mat = np.zeros((nf + 1, nf + 1))
                mat[:nf, :nf] = hff
                mat[:nf, nf] = -1.0
                mat[nf, :nf] = 1.0
                rhs = -np.concatenate([g - lam, [np.sum(p[free]) - rest]])
                try:
                    step = np.linalg.solve(mat, rhs)
                except np.linalg.LinAlgError:
                    return None
                t = 1.0
                while t > 1e-8:
                    cand = p[free] + t * step[:nf]
                    if np.all(cand >= 0) and np.all(cand <= pmax[free]):
                        break
                    t *= 0.5
                p[free] = p[free] + t * step[:nf]
                lam += t * step[nf]
                if np.max(np.abs(step[:nf])) <= 1e-13 * max(p_tot, 1.0):
                    break
        elif abs(rest) > opts.kkt_tol * p_tot:
            return None
        else:
            g = prob.grad(p)
            lo = float(np.max(g[lower], initial=0.0))
            hi = float(np.min(g[upper], initial=np.inf))
            lam = lo if np.isinf(hi) else 0.5 * (lo + hi)
        g = prob.grad(p)
        scale = max(abs(lam), float(np.max(np.abs(g))))
        bad_lower = lower & (g > lam + opts.kkt_tol * scale)
        bad_upper = upper & (g < lam - opts.kkt_tol * scale)
        hit_lower = free & (p <= 0.0)
        hit_upper = free & (p >= pmax)
        if not (bad_lower.any() or bad_upper.any() or hit_lower.any() or hit_upper.any()):
            return p
        lower = (lower & ~bad_lower) | hit_lower
        upper = (upper & ~bad_upper) | hit_upper
        x = np.where(bad_lower, opts.snap_rel * pmax, np.where(bad_upper, pmax * (1 - opts.snap_rel), p))
    return None


def general_allocate(
    scenario: Scenario, options: SolverOptions | None = None
) -> tuple[Allocation, KktReport]:
    """Maximize the Gaussian J over the power box and budget, any channel.

    Log-barrier interior point: ``mu`` goes from ``mu0`` to ``mu_final`` by
    ``mu_factor``; each centering step is a damped Newton iteration (Hessian
    shifted when the objective is locally nonconcave). Gradients are analytic
    on orthogonal channels and central differences otherwise. Starts are the
    equal and equal-SNR baselines and every single-sensor vertex, each pulled
    slightly into the interior; the best objective wins, ties to the earliest
    start. The barrier point is then polished onto its active set.
    """
    opts = options or SolverOptions()
    pmax = scenario.p_max
    p_tot = scenario.p_tot
    k = scenario.k
    if np.sum(pmax) <= p_tot:
        alloc = Allocation(pmax.copy())
        rep = verify_kkt(scenario, alloc, opts.kkt_tol)
        rep.solver = "full_power"
        return alloc, rep

    prob = _Problem(scenario, opts.fd_rel_step)
    starts = [equal_allocation(scenario).p]
    try:
        starts.append(equal_snr_allocation(scenario).p)
    except UnsupportedBaselineError:
        pass
    for j in range(k):
        v = np.zeros(k)
        v[j] = min(pmax[j], p_tot)
        starts.append(v)
    center = 0.5 * np.minimum(pmax, p_tot / k)
    w = opts.interior_weight

    best = None
    for idx, s in enumerate(starts):
        x0 = (1 - w) * np.asarray(s, float) + w * center
        x, ok = _barrier_solve(prob, x0, pmax, p_tot, opts)
        val = prob.value(x)
        if best is None or val > best[0]:
            best = (val, idx, x, ok)
    val, idx, x, ok = best

    polished = _polish(prob, x, pmax, p_tot, opts)
    if polished is not None and prob.value(polished) >= val - 1e-10 * max(1.0, abs(val)):
        x = polished
    alloc = Allocation(x)
    rep = _kkt_from_gradient(prob.kkt_grad(x), x, pmax, p_tot, opts.kkt_tol)
    rep.objective = prob.value(x)
    rep.start_index = idx
    rep.certified = bool(ok and rep.satisfied)
    rep.solver = "general"
    if not rep.certified:
        log.warning(
            "general solver not certified: stationarity=%.3e complementarity=%.3e",
            rep.max_stationarity,
            rep.complementarity_residual,
        )
    return alloc, rep


def allocate(scenario: Scenario, solver: str = "auto", options: SolverOptions | None = None) -> AllocationResult:
    """Pick waterfilling when the channel is orthogonal and every sensor is in
    region S (``solver="auto"``), else the general solver."""
    if solver == "auto":
        ch = scenario.channel
        in_s = all(dv.in_region_s(s.p_d, s.p_f).inside for s in scenario.sensors)
        solver = "waterfill" if ch.is_orthogonal and in_s else "general"
        log.info("auto solver selected: %s", solver)
    opts = options or SolverOptions()
    if solver == "waterfill":
        alloc, state = waterfill_allocate(scenario)
        rep = verify_kkt(scenario, alloc, opts.kkt_tol)
        rep.solver = "waterfill"
        return AllocationResult(alloc, rep, "waterfill", state)
    if solver == "general":
        alloc, rep = general_allocate(scenario, opts)
        return AllocationResult(alloc, rep, "general")
    raise ValueError(f"unknown solver {solver!r}")
