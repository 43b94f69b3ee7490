import json
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "mvkraw"]


def run_cli(*args):
    return subprocess.run(
        CLI + [str(a) for a in args], capture_output=True, text=True
    )


@pytest.fixture()
def params_file(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(json.dumps(
        {"schema": 1, "n": 2, "N": 4, "p": [1.0, 1.0], "q": [1.0, 3.0]}
    ))
    return path


def test_spectrum_outputs_and_manifest(tmp_path, params_file):
    out = tmp_path / "run"
    res = run_cli("spectrum", "--params", params_file, "--out", out)
    assert res.returncode == 0, res.stderr
    csv_text = (out / "spectrum.csv").read_text()
    assert csv_text.startswith("# manifest: spectrum.json\n")
    manifest = json.loads((out / "spectrum.json").read_text())
    assert manifest["command"] == "spectrum"
    assert manifest["summary"]["max_secular_residual"] < 1e-12
    lams = manifest["summary"]["eigenvalues"]
    assert lams == sorted(lams)
    assert "eigenvalues:" in res.stdout


def test_reruns_are_byte_identical(tmp_path, params_file):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run_cli("spectrum", "--params", params_file, "--out", out1).returncode == 0
    assert run_cli("spectrum", "--params", params_file, "--out", out2).returncode == 0
    assert (out1 / "spectrum.csv").read_bytes() == (out2 / "spectrum.csv").read_bytes()
    assert (out1 / "spectrum.json").read_bytes() == (out2 / "spectrum.json").read_bytes()


def test_verify_full_passes(tmp_path, params_file):
    out = tmp_path / "run"
    res = run_cli("verify", "--params", params_file, "--out", out)
    assert res.returncode == 0, res.stdout + res.stderr
    assert "[PASS]" in res.stdout
    assert "[FAIL]" not in res.stdout
    manifest = json.loads((out / "verify.json").read_text())
    assert manifest["report"]["passed"] is True
    names = {c["name"] for c in manifest["report"]["checks"]}
    assert "orthonormal-map" in names
    assert "generating-function-agreement" in names


def test_verify_fault_injection_fails(tmp_path, params_file):
    out = tmp_path / "run"
    res = run_cli("verify", "--params", params_file, "--out", out,
                  "--inject-u-perturbation", "1e-6")
    assert res.returncode == 1
    assert "[FAIL]" in res.stdout
    manifest = json.loads((out / "verify.json").read_text())
    assert manifest["report"]["passed"] is False
    assert manifest["injected_perturbation"] == 1e-6


def test_coincident_parameters_exit_code(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(json.dumps(
        {"schema": 1, "n": 2, "N": 3, "p": [1.0, 2.0], "q": [2.0, 2.0]}
    ))
    res = run_cli("spectrum", "--params", path, "--out", tmp_path)
    assert res.returncode == 3
    assert "exceptional parameters" in res.stderr
    assert "coincident" in res.stderr


def test_invalid_inputs_exit_code(tmp_path, params_file):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("spectrum", "--params", bad, "--out", tmp_path).returncode == 2

    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps(
        {"schema": 1, "n": 2, "N": 3, "p": [1, 2], "q": [3, 5], "gamma": 1}
    ))
    res = run_cli("spectrum", "--params", unknown, "--out", tmp_path)
    assert res.returncode == 2
    assert "unknown keys" in res.stderr

    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"schema": 1, "n": 2, "N": 3, "p": [1, 2]}))
    res = run_cli("spectrum", "--params", missing, "--out", tmp_path)
    assert res.returncode == 2
    assert "missing keys" in res.stderr

    wrong_schema = tmp_path / "schema.json"
    wrong_schema.write_text(json.dumps(
        {"schema": 2, "n": 2, "N": 3, "p": [1, 2], "q": [3, 5]}
    ))
    assert run_cli("spectrum", "--params", wrong_schema,
                   "--out", tmp_path).returncode == 2

    # singular rational surface is an input error, not an exceptional one
    res = run_cli("rational", "--rates", 1, 2, 2, 4, "--out", tmp_path)
    assert res.returncode == 2


def test_cap_exit_code(tmp_path, params_file):
    res = run_cli("table", "--params", params_file, "--out", tmp_path, "--cap", 3)
    assert res.returncode == 4
    assert "cap" in res.stderr


def test_table_and_oracle(tmp_path, params_file):
    out = tmp_path / "run"
    res = run_cli("table", "--params", params_file, "--out", out,
                  "--level", "full")
    assert res.returncode == 0, res.stdout + res.stderr
    assert "[PASS] generating-function-agreement" in res.stdout
    lines = (out / "table.csv").read_text().splitlines()
    assert lines[0] == "# manifest: table.json"
    assert lines[1].startswith("x\\m,")
    assert len(lines) == 2 + 15      # header rows + one row per state

    res = run_cli("gen-oracle", "--params", params_file, "--out", out)
    assert res.returncode == 0
    manifest = json.loads((out / "gen_oracle.json").read_text())
    assert manifest["summary"]["cross_check_max_abs_diff"] < 1e-10


def test_simulate_gillespie(tmp_path):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({
        "schema": 1,
        "params": {"schema": 1, "n": 2, "N": 4, "p": [1.0, 1.0], "q": [1.0, 3.0]},
        "mode": "gillespie",
        "events": 5000,
        "seed": 5,
    }))
    out = tmp_path / "run"
    res = run_cli("simulate", "--config", cfg, "--out", out)
    assert res.returncode == 0, res.stderr
    assert (out / "occupation.csv").read_text().startswith(
        "# manifest: simulate.json\n"
    )
    manifest = json.loads((out / "simulate.json").read_text())
    assert manifest["seed"] == 5
    assert manifest["rng_family"] == "numpy-PCG64"
    assert manifest["summary"]["tv_to_stationary"] < 0.25

    res = run_cli("simulate", "--config", cfg, "--out", out, "--seed", 6)
    assert res.returncode == 0
    assert json.loads((out / "simulate.json").read_text())["seed"] == 6


def test_simulate_uniformization(tmp_path):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({
        "schema": 1,
        "params": {"schema": 1, "n": 2, "N": 4, "p": [1.0, 1.0], "q": [1.0, 3.0]},
        "mode": "uniformization",
        "time": 6.0,
        "steps": 12,
    }))
    out = tmp_path / "run"
    res = run_cli("simulate", "--config", cfg, "--out", out)
    assert res.returncode == 0, res.stderr
    lines = (out / "evolution.csv").read_text().splitlines()
    assert lines[0] == "# manifest: simulate.json"
    assert lines[1] == "time,tv,kl"
    assert len(lines) == 2 + 13
    manifest = json.loads((out / "simulate.json").read_text())
    assert manifest["summary"]["mass_defect"] < 1e-12
    assert manifest["summary"]["final_tv"] < 1e-3


def test_simulate_config_validation(tmp_path):
    base = {"schema": 1,
            "params": {"schema": 1, "n": 1, "N": 2, "p": [1.0], "q": [2.0]}}
    for broken in (
        {**base, "mode": "gillespie"},                       # no events
        {**base, "mode": "gillespie", "events": 10},         # no seed
        {**base, "mode": "uniformization", "time": 1.0},     # no steps
        {**base, "mode": "diffusion", "events": 10},         # unknown mode
        {**base, "mode": "gillespie", "events": 10, "seed": 1, "extra": 0},
    ):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(broken))
        res = run_cli("simulate", "--config", cfg, "--out", tmp_path)
        assert res.returncode == 2, broken


def test_rational_command(tmp_path):
    out = tmp_path / "run"
    res = run_cli("rational", "--rates", 1, 2, 3, 4, "-N", 5, "--out", out)
    assert res.returncode == 0, res.stdout + res.stderr
    assert "note:" in res.stdout
    assert "[FAIL]" not in res.stdout
    manifest = json.loads((out / "rational.json").read_text())
    assert manifest["dual"]["q"] == [-0.5, pytest.approx(1 / 3)]
    assert manifest["dual"]["couplings"]["t"] == pytest.approx(1.2)
    assert "denominator" in manifest["note"]
