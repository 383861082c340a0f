from pathlib import Path

import numpy as np
import pytest

from ddpower import cases
from ddpower.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """\
[scenario]
k = 2
sigma2_dbm = -70
p_tot_dbm = 0
pl0_db = 55
pathloss_exp = 2
d0_m = 1
p_max_dbm = 3.010299956639812

[sensor.1]
d_m = 2
p_d = 0.7
p_f = 0.04

[sensor.2]
d_m = 5
p_d = 0.9
p_f = 0.04
"""


def test_parse_basic():
    cfg = parse_config(BASE)
    s = cfg.scenario
    assert s.k == 2 and s.channel.is_orthogonal
    assert s.p_tot == pytest.approx(1.0)
    np.testing.assert_allclose(s.p_max, [2.0, 2.0])
    assert (cfg.prior0, cfg.prior1) == (0.5, 0.5)


def test_config_matches_case_builder():
    for c in range(1, 5):
        a = load_config(CONFIGS / f"case_a{c}.ini").scenario
        b = cases.two_sensor(c)
        np.testing.assert_allclose(a.channel.h, b.channel.h, rtol=1e-12)
        np.testing.assert_allclose(a.p_d, b.p_d)
        cross = load_config(CONFIGS / f"case_b{c}.ini").scenario
        np.testing.assert_allclose(cross.channel.h, cases.two_sensor(c, cross=True).channel.h, rtol=1e-12)
    for c in range(1, 6):
        a = load_config(CONFIGS / f"ten_c{c}.ini").scenario
        b = cases.ten_sensor(c)
        np.testing.assert_allclose(a.channel.gains, b.channel.gains, rtol=1e-12)
        np.testing.assert_allclose(a.p_d, b.p_d, atol=1e-12)


def _err(text):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    return ei.value


def test_unknown_key_reports_line():
    e = _err(BASE.replace("p_f = 0.04\n\n[sensor.2]", "p_f = 0.04\ncolor = red\n\n[sensor.2]"))
    assert e.section == "sensor.1" and e.key == "color"
    assert e.line == 14
    assert "line 14" in str(e)


def test_uninformative_sensor_named():
    e = _err(BASE.replace("p_d = 0.7", "p_d = 0.01"))
    assert "UninformativeSensorError" in str(e)
    assert e.section == "sensor.1"


def test_bad_number():
    e = _err(BASE.replace("sigma2_dbm = -70", "sigma2_dbm = loud"))
    assert e.key == "sigma2_dbm" and e.line == 3


def test_missing_sensor_section():
    e = _err(BASE.replace("k = 2", "k = 3"))
    assert "sensor.3" in str(e)


def test_unknown_section():
    e = _err(BASE + "\n[fusion]\nx = 1\n")
    assert e.section == "fusion"


def test_duplicate_key_is_config_error():
    e = _err(BASE.replace("k = 2", "k = 2\nk = 2"))
    assert e.line is not None


def test_both_distance_and_gain():
    _err(BASE.replace("d_m = 2\n", "d_m = 2\ngain_db = -61\n"))


def test_gain_db_and_rho():
    text = BASE.replace("d_m = 2", "gain_db = -61").replace("d_m = 5", "gain_db = -69")
    text = text.replace("[sensor.1]", "rho = 0.2\n\n[sensor.1]", 1)
    s = parse_config(text).scenario
    assert s.channel.kind == "general"
    np.testing.assert_allclose(s.channel.h[0, 1], 0.2 * 10 ** -6.9)


def test_explicit_h_with_more_receivers():
    text = BASE.replace("[sensor.1]", "h = 1e-3 0; 0 1e-3; 1e-4 1e-4\n\n[sensor.1]", 1)
    s = parse_config(text).scenario
    assert s.channel.h.shape == (3, 2)
    assert s.channel.r.shape == (3, 3)


def test_n_mismatch():
    _err(BASE.replace("k = 2", "k = 2\nn = 3"))


def test_priors():
    cfg = parse_config(BASE.replace("k = 2", "k = 2\nprior0 = 0.3"))
    assert cfg.prior1 == pytest.approx(0.7)
    _err(BASE.replace("k = 2", "k = 2\nprior0 = 0.3\nprior1 = 0.3"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")
