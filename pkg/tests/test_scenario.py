import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ddpower import scenario as sc
from ddpower.cases import ten_sensor, two_sensor


def test_pathloss_reference_distances():
    g2 = sc.pathloss_gain(2.0)
    g5 = sc.pathloss_gain(5.0)
    # 55 + 20 log10(d)
    assert g2.pl_db == pytest.approx(55 + 20 * math.log10(2), abs=1e-12)
    assert sc.linear_to_db(g2.gain) == pytest.approx(-61.0206, abs=1e-4)
    assert sc.linear_to_db(g5.gain) == pytest.approx(-68.9794, abs=1e-4)


def test_pathloss_at_reference_distance_is_pl0():
    assert sc.pathloss_gain(1.0).pl_db == pytest.approx(55.0)
    assert sc.pathloss_gain(1.0).gain == pytest.approx(10 ** -5.5)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_pathloss_rejects_nonpositive_distance(d):
    with pytest.raises(ValueError):
        sc.pathloss_gain(d)


@given(st.floats(-40, 40))
def test_dbm_roundtrip(x):
    assert sc.mw_to_dbm(sc.dbm_to_mw(x)) == pytest.approx(x, abs=1e-9)


def test_unit_conversions():
    assert sc.dbm_to_mw(0.0) == 1.0
    assert sc.dbm_to_mw(-70.0) == pytest.approx(1e-7)
    assert sc.dbm_to_mw(10 * math.log10(2)) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        sc.mw_to_dbm(0.0)


@pytest.mark.parametrize(
    "pd, pf, exc",
    [
        (0.5, 0.5, sc.UninformativeSensorError),
        (0.04, 0.1, sc.UninformativeSensorError),
        (1.2, 0.1, sc.InvalidProbabilityError),
        (0.9, -0.1, sc.InvalidProbabilityError),
        (float("nan"), 0.1, sc.InvalidProbabilityError),
    ],
)
def test_sensor_profile_rejects(pd, pf, exc):
    with pytest.raises(exc):
        sc.SensorProfile(pd, pf, 2.0)


def test_sensor_profile_rejects_nonpositive_cap():
    with pytest.raises(sc.NonPositivePowerError):
        sc.SensorProfile(0.9, 0.04, 0.0)


def test_orthogonal_channel_shape():
    ch = sc.build_orthogonal_channel([1e-6, 1e-7], 1e-7)
    assert ch.is_orthogonal
    np.testing.assert_array_equal(ch.h, np.diag(np.sqrt([1e-6, 1e-7])))
    np.testing.assert_array_equal(ch.r, 1e-7 * np.eye(2))
    assert not ch.h.flags.writeable


def test_cross_channel_verbatim():
    g = np.array([10 ** -6.1, 10 ** -6.9])
    ch = sc.build_cross_channel(g, 0.2)
    assert ch.kind == "general"
    np.testing.assert_allclose(ch.h, [[g[0], 0.2 * g[1]], [0.2 * g[0], g[1]]])
    np.testing.assert_allclose(sc.build_cross_channel([1, 1], 0.2).h, [[1, 0.2], [0.2, 1]])
    np.testing.assert_allclose(sc.build_cross_channel(g, 0.0).h, np.diag(g))


def test_cross_channel_power_convention_matches_orthogonal_at_rho0():
    g = np.array([10 ** -6.1, 10 ** -6.9])
    ch = sc.build_cross_channel(g, 0.0, gain_convention="power")
    np.testing.assert_allclose(ch.h, sc.build_orthogonal_channel(g, 1.0).h)


@pytest.mark.parametrize("rho", [-0.1, 1.0])
def test_cross_channel_rejects_rho(rho):
    with pytest.raises(sc.ChannelShapeError):
        sc.build_cross_channel([1, 1], rho)


def test_channel_rejects_bad_noise():
    with pytest.raises(sc.NoiseCovarianceError):
        sc.ChannelSpec(h=np.eye(2), r=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(sc.NoiseCovarianceError):
        sc.ChannelSpec(h=np.eye(2), r=np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(sc.ChannelShapeError):
        sc.ChannelSpec(h=np.eye(2), r=np.eye(3))


def test_general_channel_allows_n_ne_k():
    ch = sc.ChannelSpec(h=np.ones((3, 2)), r=np.eye(3))
    s = sc.SensorProfile(0.9, 0.04, 2.0)
    scen = sc.Scenario((s, s), ch, 1.0)
    assert (scen.k, ch.n_rx) == (2, 3)


def test_scenario_column_mismatch():
    ch = sc.build_orthogonal_channel([1.0, 1.0], 1.0)
    with pytest.raises(sc.ChannelShapeError):
        sc.Scenario((sc.SensorProfile(0.9, 0.04, 2.0),), ch, 1.0)
    with pytest.raises(sc.EmptyScenarioError):
        sc.Scenario((), sc.ChannelSpec(np.zeros((1, 0)), np.eye(1)), 1.0)


def test_validate_flags_case1_region():
    v = sc.validate(two_sensor(1))
    assert v.in_region_s == (False, True)
    assert not v.full_power
    assert sc.validate(two_sensor(2)).all_in_region_s


def test_validate_full_power_flag():
    v = sc.validate(two_sensor(3).with_p_tot(100.0))
    assert v.full_power


def test_ten_sensor_region_pattern():
    # only the far, good sensors of case 1 lie in S; cases 3 and 5 are all in S
    assert sc.validate(ten_sensor(1)).in_region_s == (False,) * 4 + (True,) * 6
    assert sc.validate(ten_sensor(3)).all_in_region_s
    assert sc.validate(ten_sensor(5)).all_in_region_s
    assert not sc.validate(ten_sensor(2)).all_in_region_s
    assert not sc.validate(ten_sensor(4)).all_in_region_s


def test_allocation_check():
    scen = two_sensor(2, 0.0)
    sc.Allocation([0.5, 0.5]).check(scen)
    with pytest.raises(sc.AllocationError):
        sc.Allocation([0.7, 0.5]).check(scen)
    with pytest.raises(sc.AllocationError):
        sc.Allocation([-0.1, 0.5]).check(scen)
    with pytest.raises(sc.AllocationError):
        sc.Allocation([1.0]).check(scen)
    with pytest.raises(sc.AllocationError):
        sc.Allocation([np.nan, 0.0])
    with pytest.raises(sc.AllocationError):
        sc.Allocation([2.5, 0.0]).check(scen.with_p_tot(10.0))


def test_allocation_amplitudes():
    a = sc.Allocation([4.0, 0.25])
    np.testing.assert_allclose(a.amplitudes, [2.0, 0.5])
    assert a.total == 4.25
    assert sc.Allocation.zeros(3).total == 0.0
