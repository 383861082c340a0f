"""Problem instances: sensor qualities, channel construction and validation.

All powers are linear mW and all gains linear inside this package; dB/dBm
values are converted at the boundary (config parsing, CLI flags).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "ScenarioError",
    "InvalidProbabilityError",
    "UninformativeSensorError",
    "NonPositivePowerError",
    "ChannelShapeError",
    "NoiseCovarianceError",
    "EmptyScenarioError",
    "AllocationError",
    "SensorProfile",
    "ChannelSpec",
    "Scenario",
    "Allocation",
    "ValidatedScenario",
    "Pathloss",
    "dbm_to_mw",
    "mw_to_dbm",
    "db_to_linear",
    "linear_to_db",
    "pathloss_gain",
    "build_orthogonal_channel",
    "build_cross_channel",
    "validate",
]


class ScenarioError(ValueError):
    """Base class for every violated scenario invariant."""


class InvalidProbabilityError(ScenarioError):
    pass


class UninformativeSensorError(ScenarioError):
    """Raised when a sensor has ``p_d <= p_f``."""


class NonPositivePowerError(ScenarioError):
    pass


class ChannelShapeError(ScenarioError):
    pass


class NoiseCovarianceError(ScenarioError):
    pass


class EmptyScenarioError(ScenarioError):
    pass


class AllocationError(ScenarioError):
    pass


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0:
        raise ValueError(f"power must be positive to express in dBm, got {mw}")
    return 10.0 * math.log10(mw)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0:
        raise ValueError(f"value must be positive to express in dB, got {x}")
    return 10.0 * math.log10(x)


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SensorProfile:
    """Local decision quality of one sensor and its transmit power cap (mW)."""

    p_d: float
    p_f: float
    p_max: float

    def __post_init__(self):
        for name in ("p_d", "p_f"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise InvalidProbabilityError(f"{name}={v} is not a probability")
        if self.p_d <= self.p_f:
            raise UninformativeSensorError(
                f"p_d={self.p_d} must exceed p_f={self.p_f}"
            )
        if not self.p_max > 0:
            raise NonPositivePowerError(f"p_max={self.p_max} must be positive")


@dataclass(frozen=True)
class ChannelSpec:
    """Channel matrix ``h`` (N x K), noise covariance ``r`` (N x N).

    ``kind`` is ``"orthogonal"`` or ``"general"``. Orthogonal channels also
    carry the per-sensor power ``gains`` and the scalar noise power
    ``sigma2``.
    """

    h: np.ndarray
    r: np.ndarray
    kind: str = "general"
    gains: np.ndarray | None = None
    sigma2: float | None = None

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=float))
        r = np.atleast_2d(np.asarray(self.r, dtype=float))
        object.__setattr__(self, "h", _frozen(h))
        object.__setattr__(self, "r", _frozen(r))
        if self.gains is not None:
            object.__setattr__(self, "gains", _frozen(self.gains))
        if self.kind not in ("orthogonal", "general"):
            raise ChannelShapeError(f"unknown channel kind {self.kind!r}")
        n = h.shape[0]
        if r.shape != (n, n):
            raise ChannelShapeError(f"noise covariance shape {r.shape} != ({n}, {n})")
        if not np.allclose(r, r.T, rtol=0, atol=1e-14 * max(1.0, np.abs(r).max())):
            raise NoiseCovarianceError("noise covariance is not symmetric")
        try:
            np.linalg.cholesky(r)
        except np.linalg.LinAlgError:
            raise NoiseCovarianceError("noise covariance is not positive definite") from None
        if self.kind == "orthogonal":
            if self.gains is None or self.sigma2 is None:
                raise ChannelShapeError("orthogonal channel needs gains and sigma2")
            if np.any(self.gains <= 0):
                raise ChannelShapeError("channel power gains must be positive")
            k = len(self.gains)
            if h.shape != (k, k) or not np.array_equal(h, np.diag(np.sqrt(self.gains))):
                raise ChannelShapeError("orthogonal channel requires h = diag(sqrt(g))")
            if not np.array_equal(r, self.sigma2 * np.eye(k)):
                raise ChannelShapeError("orthogonal channel requires r = sigma2 * I")

    @property
    def n_rx(self) -> int:
        return self.h.shape[0]

    @property
    def n_tx(self) -> int:
        return self.h.shape[1]

    @property
    def is_orthogonal(self) -> bool:
        return self.kind == "orthogonal"


@dataclass(frozen=True)
class Scenario:
    sensors: tuple[SensorProfile, ...]
    channel: ChannelSpec
    p_tot: float

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if len(self.sensors) < 1:
            raise EmptyScenarioError("a scenario needs at least one sensor")
        if self.channel.n_tx != len(self.sensors):
            raise ChannelShapeError(
                f"channel has {self.channel.n_tx} columns but there are "
                f"{len(self.sensors)} sensors"
            )
        if not self.p_tot > 0:
            raise NonPositivePowerError(f"p_tot={self.p_tot} must be positive")

    @property
    def k(self) -> int:
        return len(self.sensors)

    @property
    def p_d(self) -> np.ndarray:
        return np.array([s.p_d for s in self.sensors])

    @property
    def p_f(self) -> np.ndarray:
        return np.array([s.p_f for s in self.sensors])

    @property
    def p_max(self) -> np.ndarray:
        return np.array([s.p_max for s in self.sensors])

    def with_p_tot(self, p_tot: float) -> "Scenario":
        return Scenario(self.sensors, self.channel, p_tot)


@dataclass(frozen=True)
class Allocation:
    """Per-sensor transmit powers in mW (the squared diagonal of A)."""

    p: np.ndarray = field()

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).ravel()
        if np.any(~np.isfinite(p)):
            raise AllocationError("allocation contains non-finite powers")
        object.__setattr__(self, "p", _frozen(p))

    @property
    def amplitudes(self) -> np.ndarray:
        return np.sqrt(np.clip(self.p, 0.0, None))

    @property
    def total(self) -> float:
        return float(np.sum(self.p))

    def check(self, scenario: Scenario, rtol: float = 1e-6) -> "Allocation":
        """Raise :class:`AllocationError` unless the powers are feasible."""
        if self.p.shape != (scenario.k,):
            raise AllocationError(f"expected {scenario.k} powers, got {self.p.shape}")
        pmax = scenario.p_max
        slack = rtol * max(scenario.p_tot, float(pmax.max()))
        if np.any(self.p < -slack):
            raise AllocationError(f"negative power in {self.p}")
        if np.any(self.p > pmax + rtol * pmax):
            raise AllocationError(f"power above cap: {self.p} > {pmax}")
        if self.total > scenario.p_tot + rtol * scenario.p_tot:
            raise AllocationError(f"total {self.total} exceeds budget {scenario.p_tot}")
        return self

    @classmethod
    def zeros(cls, k: int) -> "Allocation":
        return cls(np.zeros(k))


class Pathloss(NamedTuple):
    gain: float
    pl_db: float


def pathloss_gain(d: float, pl0: float = 55.0, n: float = 2.0, d0: float = 1.0) -> Pathloss:
    """Motley-Keenan pathloss without wall/floor terms.

    Returns the linear power gain ``10**(-PL/10)`` together with ``PL`` in dB,
    where ``PL = pl0 + 10 n log10(d / d0)``.
    """
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    if not d0 > 0:
        raise ValueError(f"reference distance must be positive, got {d0}")
    pl = pl0 + 10.0 * n * math.log10(d / d0)
    return Pathloss(10.0 ** (-pl / 10.0), pl)


def build_orthogonal_channel(gains: Sequence[float], sigma2: float) -> ChannelSpec:
    g = np.asarray(gains, dtype=float)
    return ChannelSpec(
        h=np.diag(np.sqrt(g)),
        r=sigma2 * np.eye(len(g)),
        kind="orthogonal",
        gains=g,
        sigma2=sigma2,
    )


def build_cross_channel(
    g: Sequence[float],
    rho: float,
    sigma2: float = 1.0,
    gain_convention: str = "amplitude",
) -> ChannelSpec:
    """Two-sensor interfering channel ``[[1, rho], [rho, 1]] @ diag(.)``.

    With ``gain_convention="amplitude"`` (default) the diagonal holds the
    power gains themselves, exactly as the published matrix is written; with
    ``"power"`` it holds their square roots, which is the amplitude gain that
    makes ``rho = 0`` coincide with the orthogonal channel.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (2,):
        raise ChannelShapeError(f"cross channel needs exactly 2 gains, got {g.shape}")
    if not 0.0 <= rho < 1.0:
        raise ChannelShapeError(f"interference coefficient must lie in [0, 1), got {rho}")
    if gain_convention == "amplitude":
        diag = g
    elif gain_convention == "power":
        diag = np.sqrt(g)
    else:
        raise ChannelShapeError(f"unknown gain convention {gain_convention!r}")
    coupling = np.array([[1.0, rho], [rho, 1.0]])
    return ChannelSpec(h=coupling @ np.diag(diag), r=sigma2 * np.eye(2), kind="general")


@dataclass(frozen=True)
class ValidatedScenario:
    scenario: Scenario
    in_region_s: tuple[bool, ...]
    full_power: bool

    @property
    def all_in_region_s(self) -> bool:
        return all(self.in_region_s)


def validate(scenario: Scenario) -> ValidatedScenario:
    """Re-check all invariants and attach region/trivial-budget flags."""
    from .divergence import in_region_s

    if not isinstance(scenario, Scenario):
        raise ScenarioError(f"expected a Scenario, got {type(scenario).__name__}")
    # dataclass construction already enforced the invariants; repeat the
    # cheap ones in case arrays were swapped in by object.__setattr__.
    for s in scenario.sensors:
        SensorProfile(s.p_d, s.p_f, s.p_max)
    Scenario(scenario.sensors, scenario.channel, scenario.p_tot)
    flags = tuple(in_region_s(s.p_d, s.p_f).inside for s in scenario.sensors)
    full = float(np.sum(scenario.p_max)) <= scenario.p_tot
    return ValidatedScenario(scenario, flags, full)
