import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from wiretrap.cli import SWEEP_COLUMNS, main
from wiretrap.fieldsolver import PROFILE_COLUMNS
from wiretrap.potentials import POTENTIAL_COLUMNS

FAST_Z = {"trap": "z30", "orientation": "H", "terms": {"chip_gravity": False}}


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def assert_all_finite(rows):
    for row in rows[1:]:
        for cell in row:
            try:
                v = float(cell)
            except ValueError:
                continue
            assert math.isfinite(v)


def test_presets_lists_traps_and_particles(capsys):
    assert main(["presets"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc["traps"]) == {"z30", "u30", "Z1mm"}
    assert "diamond" in doc["particles"]


def test_report_schema_and_rerun(tmp_path):
    cfg = write_config(tmp_path, FAST_Z)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["report", "--config", cfg, "--out", str(a)]) == 0
    assert main(["report", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert "NaN" not in text and "Infinity" not in text
    doc = json.loads(text)
    assert list(doc)[:4] == ["trap", "orientation", "images", "current_A"]
    assert len(doc["freqs_Hz"]) == 3 and doc["freqs_Hz"] == sorted(doc["freqs_Hz"])
    assert doc["force_residual_N"] <= 1e-20
    assert {m["name"] for m in doc["constraint_margins"]} == {"meissner_perpendicular", "meissner_parallel"}


def test_images_flag_moves_equilibrium(tmp_path):
    cfg = write_config(tmp_path, {**FAST_Z, "terms": {"chip_gravity": False}})
    on, off = tmp_path / "on.json", tmp_path / "off.json"
    assert main(["report", "--config", cfg, "--images", "on", "--out", str(on)]) == 0
    assert main(["report", "--config", cfg, "--images", "off", "--out", str(off)]) == 0
    z_on = json.loads(on.read_text())["z0_m"]
    z_off = json.loads(off.read_text())["z0_m"]
    assert z_on < z_off


def test_strict_exit_on_failed_constraint(tmp_path):
    # 250 mT of bias on the long trap exceeds the parallel limit at 4.2 K
    cfg = write_config(tmp_path, {"trap": "Z1mm", "orientation": "H", "terms": {"chip_gravity": False},
                                  "x_guess_m": [0, 0, 16.4e-6], "hold": ["x"]})
    out = tmp_path / "r.json"
    assert main(["report", "--config", cfg, "--strict", "--out", str(out)]) == 4
    assert json.loads(out.read_text())["constraint_margins"][1]["pass"] is False


def test_misspelled_key_exits_2_naming_it(tmp_path, capsys):
    cfg = write_config(tmp_path, {"trap": "z30", "curent_A": 12})
    assert main(["report", "--config", cfg]) == 2
    assert "curent_A" in capsys.readouterr().err


def test_nested_misspelled_key_named_with_path(tmp_path, capsys):
    cfg = write_config(tmp_path, {"trap": "z30", "particle": {"radius": 5e-7}})
    assert main(["report", "--config", cfg]) == 2
    assert "particle.radius" in capsys.readouterr().err


def test_bad_values_exit_2(tmp_path):
    assert main(["report", "--config", write_config(tmp_path, {"trap": "nope"})]) == 2
    assert main(["report", "--config", write_config(tmp_path, {"trap": "z30", "orientation": "sideways"})]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["report", "--config", str(bad)]) == 2


def test_profile_field_schema_and_determinism(tmp_path):
    cfg = write_config(tmp_path, {"trap": "Z1mm", "profile": {"axis": "z", "start_m": 11e-6, "stop_m": 40e-6,
                                                              "points": 30}})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["profile", "--config", cfg, "--out", str(a)]) == 0
    assert main(["profile", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()
    rows = read_csv(a)
    assert tuple(rows[0]) == PROFILE_COLUMNS
    assert len(rows) == 31
    assert_all_finite(rows)
    z = np.array([float(r[2]) for r in rows[1:]])
    assert np.all(np.diff(z) > 0)


def test_profile_minimum_near_17um_with_images(tmp_path):
    cfg = write_config(tmp_path, {"trap": "Z1mm", "images": True})
    out = tmp_path / "p.csv"
    assert main(["profile", "--config", cfg, "--axis", "z", "--start", "12e-6", "--stop", "30e-6",
                 "--points", "181", "--out", str(out)]) == 0
    rows = read_csv(out)
    col = rows[0].index("B_mag")
    vals = np.array([[float(r[2]), float(r[col])] for r in rows[1:]])
    z_min = vals[np.argmin(vals[:, 1]), 0]
    assert z_min == pytest.approx(17e-6, rel=0.05)


def test_profile_single_point(tmp_path):
    cfg = write_config(tmp_path, FAST_Z)
    out = tmp_path / "one.csv"
    assert main(["profile", "--config", cfg, "--points", "1", "--start", "20e-6", "--stop", "30e-6",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 2
    assert float(rows[1][2]) == 20e-6
    assert main(["profile", "--config", cfg, "--points", "0", "--out", str(out)]) == 2


def test_profile_bias_only_is_flat(tmp_path):
    cfg = write_config(tmp_path, {"trap": {"wires": []}, "bias_T": 0.1, "images": False})
    out = tmp_path / "flat.csv"
    assert main(["profile", "--config", cfg, "--axis", "x", "--start=-1e-4", "--stop", "1e-4",
                 "--points", "11", "--out", str(out)]) == 0
    rows = read_csv(out)
    col = rows[0].index("B_mag")
    assert {r[col] for r in rows[1:]} == {rows[1][col]}
    assert float(rows[1][col]) == pytest.approx(0.1, rel=1e-15)


def test_potential_profile_schema(tmp_path):
    cfg = write_config(tmp_path, {**FAST_Z, "profile": {"quantity": "potential", "points": 5}})
    out = tmp_path / "u.csv"
    assert main(["profile", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert tuple(rows[0]) == POTENTIAL_COLUMNS
    assert len(rows) == 6
    assert_all_finite(rows)


def test_crossover_cp(tmp_path):
    out = tmp_path / "x.csv"
    proc = subprocess.run([sys.executable, "-m", "wiretrap", "crossover", "--pair", "GR,CP", "--factor", "10",
                           "--out", str(out)], capture_output=True, text=True, check=True)
    r = float(proc.stdout.split("r = ")[1].split()[0])
    assert r == pytest.approx(157e-6, rel=0.1)
    rows = read_csv(out)
    assert rows[0] == ["r", "V_GR", "V_CP"]
    assert_all_finite(rows)


def test_crossover_magnetic_pinned_moment(tmp_path, capsys):
    cfg = write_config(tmp_path, {"particle": {"preset": "diamond_pinned_moment"}})
    assert main(["crossover", "--config", cfg, "--pair", "MM,GR", "--factor", "10"]) == 0
    r = float(capsys.readouterr().err.split("r = ")[1].split()[0])
    assert 10e-6 < r < 100e-6


def test_crossover_identical_kinds_exit_2():
    assert main(["crossover", "--pair", "GR,GR"]) == 2


def test_sweep_single_value_matches_report(tmp_path):
    cfg = write_config(tmp_path, FAST_Z)
    rep, sw = tmp_path / "r.json", tmp_path / "s.csv"
    assert main(["report", "--config", cfg, "--out", str(rep)]) == 0
    assert main(["sweep", "--config", cfg, "--parameter", "current", "--values", "12", "--out", str(sw)]) == 0
    doc = json.loads(rep.read_text())
    rows = read_csv(sw)
    assert tuple(rows[0]) == SWEEP_COLUMNS
    row = dict(zip(rows[0], rows[1]))
    assert row["status"] == "ok"
    assert float(row["z0_m"]) == pytest.approx(doc["z0_m"], rel=1e-11)
    assert [float(row[k]) for k in ("f1_Hz", "f2_Hz", "f3_Hz")] == pytest.approx(doc["freqs_Hz"], rel=1e-11)
    assert float(row["depth_eV"]) == pytest.approx(doc["depth_eV"], rel=1e-11)


def test_parallel_sweep_is_byte_identical_and_ordered(tmp_path):
    cfg = write_config(tmp_path, FAST_Z)
    serial, par = tmp_path / "s.csv", tmp_path / "p.csv"
    values = "0.24,0.2,0.16"
    assert main(["sweep", "--config", cfg, "--parameter", "bias", "--values", values, "--out", str(serial)]) == 0
    assert main(["sweep", "--config", cfg, "--parameter", "bias", "--values", values, "--threads", "2",
                 "--out", str(par)]) == 0
    assert serial.read_bytes() == par.read_bytes()
    rows = read_csv(par)
    assert [r[1] for r in rows[1:]] == ["0.24", "0.2", "0.16"]
    assert_all_finite(rows)
    # stronger bias pulls the minimum toward the wire
    z0 = [float(r[rows[0].index("z0_m")]) for r in rows[1:]]
    assert z0[0] < z0[1] < z0[2]


def test_thinner_chip_lowers_height_above_wire(tmp_path):
    cfg = write_config(tmp_path, FAST_Z)
    out = tmp_path / "w.csv"
    assert main(["sweep", "--config", cfg, "--parameter", "chip_half_width", "--values", "6e-6,10e-6,14e-6",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    z = [float(r[rows[0].index("z_m")]) - float(r[1]) for r in rows[1:]]  # height above the wire plane
    assert z[0] < z[1] < z[2]


def test_sweep_rejects_bad_input(tmp_path):
    cfg = write_config(tmp_path, FAST_Z)
    assert main(["sweep", "--config", cfg, "--parameter", "current", "--values", "nan"]) == 2
    assert main(["sweep", "--config", cfg]) == 2
