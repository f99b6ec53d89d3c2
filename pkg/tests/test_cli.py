"""Command-line interface: exit codes, formats, determinism."""

import json
import math
import re

import pytest

from tilnsim.cli import main

PLAN_TOML = """
coupler_length_m = 0.0109346
beta_even_tm = 16859930.944812026
beta_odd_tm = 16841930.749271248
beta_even_te = 17460694.42
beta_odd_te = 17446601.53
beta_exchange_tm = 16850683.31
beta_through_te = 17457272.23
"""


def _read_csv(path):
    comments, header, rows = [], None, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            comments.append(line)
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return comments, header, rows


def test_selftest_is_byte_deterministic(tmp_path):
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    assert main(["selftest", "--out", str(first), "--seed", "4"]) == 0
    assert main(["selftest", "--out", str(second), "--seed", "4"]) == 0
    assert first.read_bytes() == second.read_bytes()
    comments, header, rows = _read_csv(first)
    assert comments[0].startswith("# command: tilnsim selftest")
    assert header == ["check", "value", "threshold", "status"]
    statuses = {row[3] for row in rows}
    assert "pass" in statuses
    assert "fail" not in statuses


def test_dispersion_csv_table(tmp_path):
    out = tmp_path / "disp.csv"
    code = main(
        [
            "dispersion",
            "--w-min", "2.0",
            "--w-max", "3.2",
            "--points", "3",
            "--out", str(out),
        ]
    )
    assert code == 0
    comments, header, rows = _read_csv(out)
    assert header[:7] == [
        "w_um",
        "neff_m0",
        "neff_m1",
        "beta_m0",
        "beta_m1",
        "beta_norm_m0",
        "beta_norm_m1",
    ]
    assert len(rows) == 3
    assert any(re.match(r"# config_sha256: [0-9a-f]{64}$", c) for c in comments)
    assert any("units:" in c for c in comments)
    assert any("phase_match" in c for c in comments)
    narrow = rows[0]
    assert float(narrow[0]) == 2.0
    assert narrow[2] == "nan"  # odd mode below cutoff
    assert narrow[7].startswith("m1:")
    assert float(narrow[1]) > 2.17


def test_dispersion_json_marks_unguided_as_null(tmp_path):
    out = tmp_path / "disp.json"
    code = main(
        [
            "dispersion",
            "--w-min", "2.0",
            "--w-max", "3.2",
            "--points", "2",
            "--format", "json",
            "--out", str(out),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["command"].startswith("tilnsim dispersion")
    assert doc["columns"][0] == "w_um"
    assert len(doc["rows"]) == 2
    assert doc["rows"][0]["neff_m1"] is None
    assert doc["rows"][1]["neff_m1"] > 2.17


def test_dispersion_rejects_bad_range():
    assert main(["dispersion", "--w-min", "-1.0"]) == 2
    assert main(["dispersion", "--w-min", "5.0", "--w-max", "2.0"]) == 2


def test_rotator_curve_voltages(tmp_path):
    out = tmp_path / "rot.csv"
    assert main(["rotator-curve", "--points", "7", "--out", str(out)]) == 0
    _, header, rows = _read_csv(out)
    assert header == ["theta_rad", "v1", "v2", "v3"]
    v1 = [float(row[1]) for row in rows]
    assert all(a > b for a, b in zip(v1, v1[1:]))
    assert float(rows[-1][0]) == pytest.approx(math.pi)
    assert v1[-1] == 0.0


def test_coupler_evolution_zero_length_echoes_input(tmp_path):
    out = tmp_path / "cv0.csv"
    code = main(
        [
            "coupler-evolution",
            "--length", "0",
            "--input", "odd2",
            "--out", str(out),
        ]
    )
    assert code == 0
    comments, header, rows = _read_csv(out)
    assert header == ["z_m", "p_even1", "p_odd1", "p_even2", "p_odd2"]
    assert rows == [["0", "0", "0", "0", "1"]]
    assert any("zero-length device" in c for c in comments)


def test_coupler_evolution_off_crossing_passes_through(tmp_path):
    out = tmp_path / "cv.csv"
    code = main(
        [
            "coupler-evolution",
            "--input", "odd1",
            "--points", "5",
            "--out", str(out),
        ]
    )
    assert code == 0
    comments, _, rows = _read_csv(out)
    assert any("none (all modes pass through)" in c for c in comments)
    for row in rows:
        assert float(row[2]) == pytest.approx(1.0, abs=1e-12)


def test_cnot_verify_ideal_phases(tmp_path):
    out = tmp_path / "cnot.json"
    code = main(
        [
            "cnot-verify",
            "--ideal-phases",
            "--states", "5",
            "--format", "json",
            "--out", str(out),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    values = {row["quantity"]: row["value"] for row in doc["rows"]}
    assert values["status"] == "pass"
    assert values["fidelity"] == 1.0
    assert values["concurrence"] == pytest.approx(1.0, abs=1e-12)
    assert doc["truth_table"]["is_cnot"] is True


def test_phase_plan_from_file(tmp_path):
    plan = tmp_path / "plan.toml"
    plan.write_text(PLAN_TOML)
    out = tmp_path / "plan.csv"
    code = main(["phase-plan", "--plan", str(plan), "--out", str(out)])
    assert code == 0
    _, header, rows = _read_csv(out)
    values = {row[0]: row[1] for row in rows}
    assert values["status"] == "solved"
    assert float(values["phase_spread_mod_2pi_rad"]) < 1e-9
    assert float(values["arm_even_m"]) >= 0.0


def test_phase_plan_infeasible_exit_code(tmp_path):
    plan = tmp_path / "bad.toml"
    plan.write_text(PLAN_TOML.replace("beta_odd_tm = 16841930.749271248",
                                      "beta_odd_tm = -5.0"))
    out = tmp_path / "plan.csv"
    code = main(["phase-plan", "--plan", str(plan), "--out", str(out)])
    assert code == 1
    _, _, rows = _read_csv(out)
    values = {row[0]: row[1] for row in rows}
    assert values["status"] == "infeasible"
    assert "residual_odd_tm_arm" in values


def test_phase_plan_config_errors(tmp_path):
    missing = tmp_path / "missing.toml"
    missing.write_text("coupler_length_m = 0.01\n")
    assert main(["phase-plan", "--plan", str(missing)]) == 2
    unknown = tmp_path / "unknown.toml"
    unknown.write_text(PLAN_TOML + "extra_key = 1\n")
    assert main(["phase-plan", "--plan", str(unknown)]) == 2
    assert main(["phase-plan", "--plan", str(tmp_path / "absent.toml")]) == 2


def test_missing_material_config_is_a_usage_error():
    assert main(["dispersion", "--config", "/no/such/file.toml"]) == 2


def test_unknown_subcommand_exits_via_argparse():
    with pytest.raises(SystemExit) as excinfo:
        main(["no-such-command"])
    assert excinfo.value.code == 2
