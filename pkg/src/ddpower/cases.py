"""Named simulation scenarios used by the experiment scripts and tests.

Shared settings: pathloss ``55 + 20 log10(d)`` dB, noise ``-70`` dBm,
``P_max = 2`` mW per sensor, ``P_F = 0.04`` everywhere.
"""

from __future__ import annotations

import numpy as np

from .scenario import (
    Scenario,
    SensorProfile,
    build_cross_channel,
    build_orthogonal_channel,
    dbm_to_mw,
    pathloss_gain,
)

__all__ = [
    "SIGMA2_DBM",
    "P_MAX_MW",
    "P_F",
    "TWO_SENSOR_PD",
    "TEN_SENSOR_BUDGETS_DBM",
    "REFERENCE_TABLES",
    "two_sensor",
    "ten_sensor",
]

SIGMA2_DBM = -70.0
P_MAX_MW = 2.0
P_F = 0.04
RHO = 0.2

TWO_SENSOR_DIST = (2.0, 5.0)
TWO_SENSOR_PD = {1: (0.1, 0.9), 2: (0.7, 0.9), 3: (0.9, 0.9), 4: (0.9, 0.7)}

TEN_SENSOR_BUDGETS_DBM = (-7.0, -2.8, 3.5, 8.8, 13.0)

# percentage of P_tot per sensor (rows follow TEN_SENSOR_BUDGETS_DBM)
REFERENCE_TABLES = {
    1: [
        [0, 0, 0, 0, 0, 7, 15, 21, 26, 31],
        [0, 0, 0, 0, 6, 11, 16, 19, 23, 25],
        [0, 0, 0, 5, 9, 12, 15, 17, 20, 22],
        [0, 3, 7, 9, 10, 11, 13, 14, 16, 17],
        [10] * 10,
    ],
    2: [
        [100, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        [74, 26, 0, 0, 0, 0, 0, 0, 0, 0],
        [36, 23, 15, 10, 7, 5, 3, 1, 0, 0],
        [18, 14, 12, 10, 9, 8, 8, 7, 7, 7],
        [10] * 10,
    ],
    3: [
        [100, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        [81, 19, 0, 0, 0, 0, 0, 0, 0, 0],
        [54, 33, 13, 0, 0, 0, 0, 0, 0, 0],
        [26, 26, 21, 15, 8, 3, 0, 0, 0, 0],
        [10] * 10,
    ],
    4: [
        [100, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        [100, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        [73, 27, 0, 0, 0, 0, 0, 0, 0, 0],
        [26, 26, 26, 15, 7, 0, 0, 0, 0, 0],
        [10] * 10,
    ],
    5: [[10] * 10 for _ in range(5)],
}


def _gains(dists) -> np.ndarray:
    return np.array([pathloss_gain(d).gain for d in dists])


def two_sensor(case: int, p_tot_dbm: float = 0.0, cross: bool = False, gain_convention: str = "amplitude") -> Scenario:
    """Two sensors at 2 m and 5 m; ``cross=True`` adds ``rho = 0.2`` interference."""
    pds = TWO_SENSOR_PD[case]
    sensors = tuple(SensorProfile(pd, P_F, P_MAX_MW) for pd in pds)
    g = _gains(TWO_SENSOR_DIST)
    sigma2 = dbm_to_mw(SIGMA2_DBM)
    if cross:
        ch = build_cross_channel(g, RHO, sigma2, gain_convention)
    else:
        ch = build_orthogonal_channel(g, sigma2)
    return Scenario(sensors, ch, dbm_to_mw(p_tot_dbm))


def ten_sensor(case: int, p_tot_dbm: float = 3.5) -> Scenario:
    j = np.arange(10)
    if case == 5:
        dists = np.full(10, 4.0)
    else:
        dists = 2.0 + 0.6 * j
    pd = {
        1: 0.1 + 0.09 * j,
        2: 0.4 + 0.06 * j,
        3: np.full(10, 0.8),
        4: 0.94 - 0.06 * j,
        5: np.full(10, 0.8),
    }[case]
    sensors = tuple(SensorProfile(float(v), P_F, P_MAX_MW) for v in pd)
    ch = build_orthogonal_channel(_gains(dists), dbm_to_mw(SIGMA2_DBM))
    return Scenario(sensors, ch, dbm_to_mw(p_tot_dbm))
