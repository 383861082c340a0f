import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ddpower import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", "--config", str(CONFIGS / "case_a1.ini"))
    assert code == 0
    assert "sensor 1: p_d=0.1" in out and "region_S=no" in out


def test_config_error_exit_2(tmp_path, capsys):
    bad = (CONFIGS / "case_a2.ini").read_text().replace("p_d = 0.7", "p_d = 0.01")
    path = tmp_path / "bad.ini"
    path.write_text(bad)
    code, _, err = run(capsys, "allocate", "--config", str(path))
    assert code == 2
    assert "UninformativeSensorError" in err and "sensor.1" in err and "line" in err


def test_unknown_key_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text((CONFIGS / "case_a2.ini").read_text() + "colour = blue\n")
    code, _, err = run(capsys, "validate", "--config", str(path))
    assert code == 2
    assert "colour" in err


def test_allocate_case2(tmp_path, capsys):
    out_csv = tmp_path / "a.csv"
    code, out, err = run(capsys, "allocate", "--config", str(CONFIGS / "case_a2.ini"), "--p-tot-dbm", "0", "--out", str(out_csv))
    assert code == 0
    assert "solver: waterfill" in out
    assert "KKT" in out
    rows = read_csv(out_csv)
    assert len(rows) == 1
    r = rows[0]
    assert float(r["p1_mw"]) == pytest.approx(1.0, abs=1e-5)
    assert float(r["p2_mw"]) == pytest.approx(0.0, abs=1e-5)
    assert float(r["p_tot_dbm"]) == 0.0 and float(r["p_tot_mw"]) == 1.0


def test_allocate_ten_sensor_equal_case(tmp_path, capsys):
    for dbm in ("-7", "8.8"):
        out_csv = tmp_path / f"t{dbm}.csv"
        code, _, _ = run(capsys, "allocate", "--config", str(CONFIGS / "ten_c5.ini"), "--p-tot-dbm", dbm, "--out", str(out_csv))
        assert code == 0
        r = read_csv(out_csv)[0]
        np.testing.assert_allclose([float(r[f"p{i}_pct"]) for i in range(1, 11)], 10.0, atol=1e-4)


def test_allocate_forced_waterfill_out_of_region_is_capability(capsys):
    code, _, err = run(capsys, "allocate", "--config", str(CONFIGS / "case_a1.ini"), "--solver", "waterfill")
    assert code == 4


def test_allocate_bits(capsys):
    _, nats, _ = run(capsys, "allocate", "--config", str(CONFIGS / "case_a3.ini"))
    _, bits, _ = run(capsys, "allocate", "--config", str(CONFIGS / "case_a3.ini"), "--bits")
    jn = float(nats.split("approx J = ")[1].split()[0])
    jb = float(bits.split("approx J = ")[1].split()[0])
    assert jb == pytest.approx(jn / np.log(2), rel=1e-5)


def test_sweep_two_points(tmp_path, capsys):
    out_csv = tmp_path / "s.csv"
    code, _, _ = run(
        capsys, "sweep", "--config", str(CONFIGS / "case_a1.ini"),
        "--start-dbm", "-14", "--stop-dbm", "6", "--points", "2", "--out", str(out_csv),
    )
    assert code == 0
    rows = read_csv(out_csv)
    assert len(rows) == 2 * 3
    assert [r["allocator"] for r in rows[:3]] == ["proposed", "equal", "equal_snr"]
    assert float(rows[0]["p_tot_dbm"]) == -14.0 and float(rows[-1]["p_tot_dbm"]) == 6.0
    for r in rows:
        assert float(r["p1_mw"]) + float(r["p2_mw"]) <= float(r["p_tot_mw"]) * (1 + 1e-9)


def test_sweep_bad_spec_exit_2(capsys):
    code, _, _ = run(capsys, "sweep", "--config", str(CONFIGS / "case_a1.ini"), "--points", "1")
    assert code == 2
    code, _, _ = run(capsys, "sweep", "--config", str(CONFIGS / "case_a1.ini"), "--allocators", "best")
    assert code == 2
    code, _, _ = run(capsys, "sweep", "--config", str(CONFIGS / "case_a1.ini"), "--start-dbm", "6", "--stop-dbm", "0")
    assert code == 2


def test_sweep_equal_snr_on_cross_channel_is_capability(capsys):
    code, _, _ = run(capsys, "sweep", "--config", str(CONFIGS / "case_b1.ini"), "--points", "2")
    assert code == 4


def test_sweep_mc_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "x.csv", tmp_path / "y.csv"]
    for p in paths:
        code, _, _ = run(
            capsys, "sweep", "--config", str(CONFIGS / "case_a3.ini"), "--points", "3",
            "--mc", "--mc-runs", "2000", "--seed", "11", "--out", str(p),
        )
        assert code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    rows = read_csv(paths[0])
    assert "pd_fc" in rows[0] and "pd_fc_stderr" in rows[0]


def test_oracle(tmp_path, capsys):
    out_csv = tmp_path / "o.csv"
    code, out, _ = run(
        capsys, "oracle", "--config", str(CONFIGS / "case_a3.ini"), "--p-tot-dbm", "3.5",
        "--grid-step", "0.05", "--out", str(out_csv),
    )
    assert code == 0
    best = out.strip().splitlines()[-1].split(",")
    assert float(best[0]) == pytest.approx(2.0, abs=0.05)
    assert read_csv(out_csv)[0].keys() == {"p1_mW", "p2_mW", "value"}


def test_oracle_ten_sensors_exit_4(capsys):
    code, _, err = run(capsys, "oracle", "--config", str(CONFIGS / "ten_c1.ini"))
    assert code == 4
    assert "K=2" in err


def test_bounds_single_sensor(tmp_path, capsys):
    path = tmp_path / "one.ini"
    path.write_text(
        "[scenario]\nk = 1\nsigma2_dbm = -70\np_tot_dbm = 0\n"
        "[sensor.1]\ngain_db = -61\np_d = 0.9\np_f = 0.04\np_max_dbm = 3\n"
    )
    code, out, _ = run(capsys, "bounds", "--config", str(path))
    assert code == 0
    line = [l for l in out.splitlines() if l.startswith("local decisions")][0]
    assert "4.62274" in line and "0.0247" in line
    assert "holds" in out


def test_bounds_zero_allocation(capsys):
    code, out, _ = run(capsys, "bounds", "--config", str(CONFIGS / "case_a2.ini"), "--allocator", "zero")
    assert code == 0
    line = [l for l in out.splitlines() if l.startswith("approx J(y)")][0]
    assert "J = 0 nats" in line and "P_e >= 0.25" in line


def test_bounds_with_mc(capsys):
    code, out, _ = run(capsys, "bounds", "--config", str(CONFIGS / "case_a3.ini"), "--mc", "--mc-runs", "2000")
    assert code == 0
    assert "Monte Carlo J(y)" in out and "holds" in out


def test_module_entry_point():
    r = subprocess.run(
        [sys.executable, "-m", "ddpower", "validate", "--config", str(CONFIGS / "ten_c3.ini")],
        capture_output=True, text=True,
    )
    assert r.returncode == 0
    assert "K = 10" in r.stdout


def test_missing_verb_is_usage_error():
    with pytest.raises(SystemExit) as ei:
        cli.main([])
    assert ei.value.code == 2
