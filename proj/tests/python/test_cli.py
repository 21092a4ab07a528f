"""End-to-end checks of the command-line tool: exit codes, file outputs and
byte determinism."""

import json
import os
import subprocess

import pytest

CLI = os.environ.get("ATTNRES_CLI")

pytestmark = pytest.mark.skipif(not CLI, reason="ATTNRES_CLI not set")


def run(*args, **kw):
    return subprocess.run([CLI, *args], capture_output=True, text=True, **kw)


def test_equiv_check_passes():
    r = run("equiv-check", "--d", "8", "--L", "8", "--S", "4")
    assert r.returncode == 0
    assert "max deviation" in r.stdout


def test_equiv_check_negative_control():
    r = run("equiv-check", "--d", "8", "--L", "8", "--S", "4", "--corrupt-merge")
    assert r.returncode == 1


def test_usage_error_exit_code():
    r = run("no-such-command")
    assert r.returncode == 2


def test_cost_table_typical_column():
    r = run("cost-table")
    assert r.returncode == 0
    assert "standard,residual merge,2d,d,3d,3d,3" in r.stdout
    assert "24d" in r.stdout and "5.5d" in r.stdout and "34d+48" in r.stdout

    override = run("cost-table", "--params", "L=64,N=8,m=2,d=2")
    assert override.returncode == 0
    assert "(S+N)d,16d,32" in override.stdout


def test_pipeline_sim_totals(tmp_path):
    out = tmp_path / "pipe.json"
    r = run("pipeline-sim", "--P", "4", "--V", "2", "--Np", "1", "--d", "1",
            "--caching", "off", "--format", "json", "--out", str(out))
    assert r.returncode == 0
    naive = json.loads(out.read_text())
    assert naive["total_elements"] == "28"

    r = run("pipeline-sim", "--P", "4", "--V", "2", "--caching", "on",
            "--format", "json", "--out", str(out))
    assert r.returncode == 0
    assert json.loads(out.read_text())["total_elements"] == "22"


def test_pipeline_sim_explicit_schedule(tmp_path):
    cfg = tmp_path / "sched.json"
    cfg.write_text(json.dumps({
        "P": 4, "V": 2, "d": 1,
        "initial_blocks": [0],
        "completions": [[], [1], [], [2], [], [3], [], [4]],
    }))
    r = run("pipeline-sim", "--config", str(cfg), "--caching", "on")
    assert r.returncode == 0
    log = json.loads(r.stdout)
    jump = [t for t in log["transfers"] if t["to_chunk"] == 4][0]
    assert jump["block_ids"] == [1, 2]


def test_scaling_fit_roundtrip(tmp_path):
    csv = tmp_path / "sweep.csv"
    csv.write_text(
        "params,tokens,loss\n"
        "194e6,38.7e9,1.931\n241e6,45.4e9,1.895\n296e6,62.1e9,1.829\n"
        "436e6,87.9e9,1.766\n528e6,119.0e9,1.719\n"
    )
    r = run("scaling-fit", "--in", str(csv))
    assert r.returncode == 0
    fit = json.loads(r.stdout)
    assert abs(fit["alpha"] - 0.057) < 0.01


def test_mix_matrix_output():
    r = run("mix-matrix", "--variant", "standard", "--L", "4")
    assert r.returncode == 0
    assert r.stdout.startswith("# variant=standard L=4")
    assert "1,1,1,1" in r.stdout


def test_heatmap_uniform_rows():
    r = run("heatmap", "--mode", "full", "--d", "4", "--L", "4", "--batch", "2")
    assert r.returncode == 0
    lines = r.stdout.strip().splitlines()
    assert lines[0].startswith("# mode=full")
    assert lines[1].startswith("sublayer,emb")
    row2 = lines[3].split(",")[1:]
    assert float(row2[0]) == 0.5 and float(row2[1]) == 0.5


def test_gradcheck_passes():
    r = run("gradcheck", "--d", "5", "--L", "6", "--S", "2", "--seeds", "2")
    assert r.returncode == 0
    assert "max relative error" in r.stdout


def test_norm_profile_header():
    r = run("norm-profile", "--mode", "block", "--d", "4", "--L", "6", "--S", "2")
    assert r.returncode == 0
    lines = r.stdout.splitlines()
    assert lines[0].startswith("# mode=block")
    assert lines[1] == "sublayer,input_norm,output_norm"


def test_backward_traffic_doubles_the_total():
    r = run("pipeline-sim", "--P", "4", "--V", "2", "--caching", "on",
            "--include-backward")
    assert r.returncode == 0
    log = json.loads(r.stdout)
    assert log["total_elements"] == "22"
    assert log["forward_plus_backward_elements"] == "44"


def test_byte_determinism():
    for args in (
        ("cost-table",),
        ("pipeline-sim", "--P", "3", "--V", "2", "--format", "csv"),
        ("mix-matrix", "--variant", "attnres-block", "--L", "6", "--S", "2", "--seed", "7"),
        ("heatmap", "--mode", "block", "--d", "6", "--L", "6", "--S", "2", "--seed", "9"),
        ("norm-profile", "--mode", "full", "--d", "6", "--L", "6", "--seed", "9"),
    ):
        a = run(*args)
        b = run(*args)
        assert a.returncode == 0
        assert a.stdout == b.stdout


def test_output_dir_env(tmp_path):
    env = dict(os.environ, ATTNRES_OUT_DIR=str(tmp_path))
    r = subprocess.run(
        [CLI, "cost-table", "--out", "table.csv"],
        capture_output=True, text=True, env=env,
    )
    assert r.returncode == 0
    assert (tmp_path / "table.csv").exists()


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"P": 2, "V": 1, "Np": "1", "d": 1}))
    # flag overrides the config value for P
    r = run("pipeline-sim", "--config", str(cfg), "--P", "4", "--V", "2",
            "--caching", "off")
    assert r.returncode == 0
    assert json.loads(r.stdout)["total_elements"] == "28"
