"""Closed-form J-divergence mathematics.

Two objectives live here:

* :func:`j_gaussian_mimo` -- J between the moment-matched Gaussians of the
  received vector for an arbitrary channel, in nats;
* :func:`j_orthogonal` -- the decoupled per-sensor objective for orthogonal
  channels, used unshifted. For ``H = diag(sqrt(g))`` and ``R = sigma2 I`` it
  satisfies ``j_orthogonal = 2 * (j_gaussian_mimo + K)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg

from .scenario import Allocation, Scenario, SensorProfile

__all__ = [
    "SingularCovarianceError",
    "BetaVectors",
    "BernoulliVarMatrices",
    "GaussianMoments",
    "OrthCoeffs",
    "SecondDerivative",
    "RegionTest",
    "beta_vectors",
    "bernoulli_var_matrices",
    "gaussian_moments",
    "j_gaussian_mimo",
    "j_gaussian_grouped",
    "j_approx",
    "orth_coeffs",
    "derivative_coeffs",
    "j_orthogonal",
    "dj_dp",
    "d2j_dp2",
    "in_region_s",
    "bernoulli_j_upper_bound",
    "pe_lower_bound",
]

COND_LIMIT = 1e12
BOUNDARY_TOL = 1e-12


class SingularCovarianceError(ArithmeticError):
    pass


class BetaVectors(NamedTuple):
    beta1: np.ndarray
    beta0: np.ndarray
    beta: np.ndarray


class BernoulliVarMatrices(NamedTuple):
    b1: np.ndarray
    b0: np.ndarray


@dataclass(frozen=True)
class GaussianMoments:
    mu0: np.ndarray
    mu1: np.ndarray
    sigma0: np.ndarray
    sigma1: np.ndarray
    dsigma: np.ndarray | None = None  # sigma0 - sigma1 formed without cancellation

    @property
    def n(self) -> int:
        return len(self.mu0)


class OrthCoeffs(NamedTuple):
    alpha_f: np.ndarray | float
    alpha_d: np.ndarray | float
    beta_f: np.ndarray | float
    beta_d: np.ndarray | float


class SecondDerivative(NamedTuple):
    value: np.ndarray | float
    c: tuple  # (C0, C1, C2, C3)


class RegionTest(NamedTuple):
    inside: bool
    r1: float
    r2: float


def beta_vectors(sensors: Sequence[SensorProfile]) -> BetaVectors:
    b1 = np.array([s.p_d for s in sensors], dtype=float)
    b0 = np.array([s.p_f for s in sensors], dtype=float)
    return BetaVectors(b1, b0, b1 - b0)


def bernoulli_var_matrices(sensors: Sequence[SensorProfile]) -> BernoulliVarMatrices:
    bv = beta_vectors(sensors)
    return BernoulliVarMatrices(
        np.diag(bv.beta1 * (1 - bv.beta1)), np.diag(bv.beta0 * (1 - bv.beta0))
    )


def _check_dims(scenario: Scenario, allocation: Allocation) -> np.ndarray:
    p = np.asarray(allocation.p if isinstance(allocation, Allocation) else allocation, float)
    if p.shape != (scenario.k,):
        raise ValueError(f"allocation has shape {p.shape}, scenario has K={scenario.k}")
    return p


def gaussian_moments(scenario: Scenario, allocation: Allocation | np.ndarray) -> GaussianMoments:
    """Mean and covariance of the received vector under each hypothesis.

    ``mu_i = H A beta_i`` and ``Sigma_i = R + H A B_i A H^T`` with
    ``A = diag(sqrt(P))``.
    """
    p = _check_dims(scenario, allocation)
    a = np.sqrt(np.clip(p, 0.0, None))
    h, r = scenario.channel.h, scenario.channel.r
    bv = beta_vectors(scenario.sensors)
    ha = h * a  # H @ diag(a)
    mu1 = ha @ bv.beta1
    mu0 = ha @ bv.beta0
    var1 = bv.beta1 * (1 - bv.beta1)
    var0 = bv.beta0 * (1 - bv.beta0)
    sigma1 = r + (ha * var1) @ ha.T
    sigma0 = r + (ha * var0) @ ha.T
    # keep exact symmetry for the Cholesky factorizations downstream
    sigma1 = 0.5 * (sigma1 + sigma1.T)
    sigma0 = 0.5 * (sigma0 + sigma0.T)
    dsigma = (ha * (var0 - var1)) @ ha.T
    return GaussianMoments(mu0, mu1, sigma0, sigma1, 0.5 * (dsigma + dsigma.T))


def _cho(m: np.ndarray, label: str):
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularCovarianceError(f"{label} is ill-conditioned (cond={cond:.3e})")
    try:
        return linalg.cho_factor(m, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularCovarianceError(f"{label} is not positive definite (cond={cond:.3e})") from exc


def j_gaussian_mimo(moments: GaussianMoments) -> float:
    """J-divergence (nats) between N(mu1, Sigma1) and N(mu0, Sigma0).

    Evaluated as ``1/2 Tr[D S1^-1 D S0^-1] + 1/2 d^T (S0^-1 + S1^-1) d`` with
    ``D = S0 - S1``, which equals the usual ``1/2 Tr[S0 S1^-1 + S1 S0^-1] - N``
    form but does not cancel when both covariances are close to the noise.
    """
    c0 = _cho(moments.sigma0, "Sigma0")
    c1 = _cho(moments.sigma1, "Sigma1")
    delta = moments.mu1 - moments.mu0
    d = moments.dsigma if moments.dsigma is not None else moments.sigma0 - moments.sigma1
    x = linalg.cho_solve(c1, d)
    y = linalg.cho_solve(c0, d)
    tr = np.sum(x * y.T)
    maha = delta @ linalg.cho_solve(c1, delta) + delta @ linalg.cho_solve(c0, delta)
    return float(0.5 * (tr + maha))


def j_gaussian_grouped(scenario: Scenario, allocation: Allocation | np.ndarray) -> float:
    """Same quantity written with the ``B_i + beta beta^T`` grouping.

    ``1/2 Tr[(R + HA(B0 + bb^T)AH^T)(R + HAB1AH^T)^-1]
    + 1/2 Tr[(R + HA(B1 + bb^T)AH^T)(R + HAB0AH^T)^-1] - N``.
    Kept as an independent route for cross-checking :func:`j_gaussian_mimo`.
    """
    p = _check_dims(scenario, allocation)
    a = np.diag(np.sqrt(np.clip(p, 0.0, None)))
    h, r = scenario.channel.h, scenario.channel.r
    bv = beta_vectors(scenario.sensors)
    bm = bernoulli_var_matrices(scenario.sensors)
    bb = np.outer(bv.beta, bv.beta)
    ha = h @ a
    num0 = r + ha @ (bm.b0 + bb) @ ha.T
    num1 = r + ha @ (bm.b1 + bb) @ ha.T
    den1 = r + ha @ bm.b1 @ ha.T
    den0 = r + ha @ bm.b0 @ ha.T
    t1 = np.trace(np.linalg.solve(den1, num0))
    t0 = np.trace(np.linalg.solve(den0, num1))
    return float(0.5 * (t1 + t0) - h.shape[0])


def j_approx(scenario: Scenario, allocation: Allocation | np.ndarray) -> float:
    """Shorthand for ``j_gaussian_mimo(gaussian_moments(scenario, allocation))``."""
    return j_gaussian_mimo(gaussian_moments(scenario, allocation))


# --- orthogonal channels ---------------------------------------------------


def _pd_pf(sensor) -> tuple:
    if isinstance(sensor, SensorProfile):
        return sensor.p_d, sensor.p_f
    if isinstance(sensor, (list, tuple)) and sensor and isinstance(sensor[0], SensorProfile):
        return (np.array([s.p_d for s in sensor]), np.array([s.p_f for s in sensor]))
    pd, pf = sensor
    return np.asarray(pd, float), np.asarray(pf, float)


def orth_coeffs(sensor) -> OrthCoeffs:
    """The four coefficients of the decoupled objective.

    ``sensor`` is a :class:`SensorProfile`, a sequence of them, or a
    ``(p_d, p_f)`` pair of scalars/arrays (the last form skips the
    ``p_d > p_f`` check so that boundary cases can be probed).
    """
    pd, pf = _pd_pf(sensor)
    alpha_f = pf * (1 - pd) + pd * (pd - pf)
    alpha_d = pd * (1 - pf) - pf * (pd - pf)
    beta_f = pd * (1 - pd)
    beta_d = pf * (1 - pf)
    d0 = alpha_f - beta_f + alpha_d - beta_d
    if not np.allclose(d0, 2 * (np.asarray(pd) - pf) ** 2, rtol=1e-9, atol=1e-15):
        raise ArithmeticError("coefficient identity d0 = 2 (P_D - P_F)^2 violated")
    return OrthCoeffs(alpha_f, alpha_d, beta_f, beta_d)


def derivative_coeffs(sensor) -> tuple:
    """``(d0, d1, d2)`` such that ``dJ/dP = c (d0 s^4 + 2 d1 s^2 x + d2 x^2)``
    with ``x = g P`` and ``s^2 = sigma2``. All three are nonnegative."""
    af, ad, bf, bd = orth_coeffs(sensor)
    d0 = af + ad - bf - bd
    d1 = af * bd + ad * bf - 2 * bf * bd
    d2 = af * bd**2 + ad * bf**2 - bf**2 * bd - bf * bd**2
    return d0, d1, d2


def j_orthogonal(p, sensors, gains, sigma2: float) -> float:
    """Decoupled objective ``sum_j [(s2 + aF x)/(s2 + bF x) + (s2 + aD x)/(s2 + bD x)]``
    with ``x_j = g_j P_j``. Equals ``2K`` at zero power."""
    af, ad, bf, bd = orth_coeffs(sensors)
    x = np.asarray(gains, float) * np.asarray(p, float)
    return float(np.sum((sigma2 + af * x) / (sigma2 + bf * x) + (sigma2 + ad * x) / (sigma2 + bd * x)))


def dj_dp(p, sensor, g, sigma2: float):
    """Partial derivative of :func:`j_orthogonal` in each sensor's power.

    Vectorized: ``p``, ``g`` and the sensor qualities broadcast together.
    """
    af, ad, bf, bd = orth_coeffs(sensor)
    g = np.asarray(g, float)
    x = g * np.asarray(p, float)
    out = (af - bf) * sigma2 * g / (sigma2 + bf * x) ** 2 + (ad - bd) * sigma2 * g / (sigma2 + bd * x) ** 2
    return out if np.ndim(out) else float(out)


def d2j_dp2(p, sensor, g, sigma2: float) -> SecondDerivative:
    """Second derivative of :func:`j_orthogonal` and its numerator coefficients.

    Exactly, the value is ``-2 s2 g^2 [C0 s^6 + 3 C1 s^4 x + 3 C2 s^2 x^2 +
    C3 x^3] / ((s2 + bF x)^3 (s2 + bD x)^3)``. It is evaluated from the
    unexpanded two-term form; the ``C`` tuple is returned for sign analysis
    (its sign pattern alone decides concavity).
    """
    af, ad, bf, bd = orth_coeffs(sensor)
    g = np.asarray(g, float)
    x = g * np.asarray(p, float)
    value = -2 * sigma2 * g**2 * (
        (af - bf) * bf / (sigma2 + bf * x) ** 3 + (ad - bd) * bd / (sigma2 + bd * x) ** 3
    )
    c0 = bf * (af - bf) + bd * (ad - bd)
    c1 = bf * bd * (af - bf + ad - bd)
    c2 = bf * bd * (bd * (af - bf) + bf * (ad - bd))
    c3 = bf * bd * (bd**2 * (af - bf) + bf**2 * (ad - bd))
    return SecondDerivative(value if np.ndim(value) else float(value), (c0, c1, c2, c3))


def in_region_s(p_d: float, p_f: float) -> RegionTest:
    """Whether the per-sensor objective is concave in power for ``(p_d, p_f)``.

    ``r1, r2 = 3/4 - p_f/2 -/+ sqrt(1 + 12 p_f - 12 p_f^2) / 4``; the boundary
    counts as inside.
    """
    if not 0.0 <= p_f < p_d <= 1.0:
        raise ValueError(f"need 0 <= p_f < p_d <= 1, got p_d={p_d}, p_f={p_f}")
    root = 0.25 * math.sqrt(1 + 12 * p_f - 12 * p_f * p_f)
    r1 = 0.75 - 0.5 * p_f - root
    r2 = 0.75 - 0.5 * p_f + root
    inside = r1 - BOUNDARY_TOL <= p_d <= r2 + BOUNDARY_TOL
    return RegionTest(bool(inside), r1, r2)


def bernoulli_j_upper_bound(sensors: Sequence[SensorProfile]) -> float:
    """J between the local-decision distributions (nats); infinite when some
    sensor has ``p_f = 0`` or ``p_d = 1``."""
    total = 0.0
    for s in sensors:
        if s.p_d == s.p_f:
            continue
        if s.p_f == 0.0 or s.p_d == 1.0:
            return math.inf
        total += (s.p_d - s.p_f) * math.log(s.p_d * (1 - s.p_f) / (s.p_f * (1 - s.p_d)))
    return total


def pe_lower_bound(j: float, prior0: float = 0.5, prior1: float = 0.5) -> float:
    if prior0 < 0 or prior1 < 0 or not math.isclose(prior0 + prior1, 1.0, abs_tol=1e-12):
        raise ValueError(f"priors must be nonnegative and sum to 1, got {prior0}, {prior1}")
    if j < 0:
        raise ValueError(f"J must be nonnegative, got {j}")
    return prior0 * prior1 * math.exp(-j / 2)
