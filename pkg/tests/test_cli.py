import json

import numpy as np
import pytest

from lbpadapt.cli import main

MODEL_CFG = """
[model]
k = 1
b = 1 + 0.1*x1
c = 1.0
mu = 1

[mutation]
kind = isotropic-gaussian
sigma = 0.1
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "model.cfg"
    p.write_text(MODEL_CFG)
    return p


def test_usage_errors_exit_one():
    assert main(["--definitely-not-a-flag"]) == 1
    assert main(["fixation", "--what"]) == 1
    assert main([]) == 1
    assert main(["fixation"]) == 1  # neither --b/--c nor --config


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert main(["fixation", "--help"]) == 0
    capsys.readouterr()


def test_fixation_neutral_prints_half(capsys):
    assert main(["fixation", "--b", "1", "--c", "1", "--n", "1", "--m", "1"]) == 0
    out = capsys.readouterr().out
    assert "u_{1,1} = 0.5" in out
    assert "0.367879441171" in out  # chi and the closed neutral form


def test_fixation_model_pair(cfg_file, capsys):
    code = main(["fixation", "--config", str(cfg_file), "--x", "0", "--y", "0.05",
                 "--n", "2", "--m", "1"])
    assert code == 0
    assert "u_{2,1}" in capsys.readouterr().out


def test_fixation_table_export(tmp_path, capsys):
    out = tmp_path / "fx"
    assert main(["fixation", "--b", "1", "--c", "1", "--out", str(out)]) == 0
    assert (out / "fixation_table.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "fixation"
    capsys.readouterr()


def test_numerical_failure_exit_two(capsys):
    # requesting a state far outside the solved lattice is a numerical failure
    assert main(["fixation", "--b", "1", "--c", "1", "--n", "500", "--m", "1"]) == 2
    capsys.readouterr()


def test_bad_config_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("k=1; b = exp((x1; c = 1")
    assert main(["fixation", "--config", str(bad), "--x", "0", "--y", "0"]) == 1
    assert main(["tss", "--config", str(tmp_path / "missing.cfg"),
                 "--t-end", "1"]) == 1
    capsys.readouterr()


def test_invasibility_command(capsys):
    assert main(["invasibility", "--b", "1", "--c", "1", "--total-size", "3"]) == 0
    out = capsys.readouterr().out
    assert "g_lambda" in out and "a_delta" in out


def test_curves_outputs_and_reproducibility(tmp_path, capsys):
    args = ["curves", "--theta-min", "0.5", "--theta-max", "2", "--points", "3"]
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    for name in ("ahat_curves.csv", "fig1_ahat.csv", "fig2_theta_ahat.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    manifest = json.loads((out1 / "manifest.json").read_text())
    rerun = tmp_path / "rerun"
    argv = [a if a != str(out1) else str(rerun) for a in manifest["argv"]]
    assert main(argv) == 0
    assert (rerun / "ahat_curves.csv").read_bytes() == (out1 / "ahat_curves.csv").read_bytes()
    capsys.readouterr()


def test_curves_jobs_do_not_change_numbers(tmp_path, capsys):
    args = ["curves", "--theta-min", "0.5", "--theta-max", "2", "--points", "3"]
    seq = tmp_path / "seq"
    par = tmp_path / "par"
    assert main(args + ["--out", str(seq), "--jobs", "1"]) == 0
    assert main(args + ["--out", str(par), "--jobs", "2"]) == 0
    assert (seq / "ahat_curves.csv").read_bytes() == (par / "ahat_curves.csv").read_bytes()
    capsys.readouterr()


def test_ibm_command(cfg_file, tmp_path, capsys):
    out = tmp_path / "ibm"
    code = main(["ibm", "--config", str(cfg_file), "--group", "0.0:5",
                 "--t-end", "20", "--seed", "3", "--out", str(out), "--dump-groups"])
    assert code == 0
    lines = (out / "ibm_path.csv").read_text().splitlines()
    assert lines[0] == "time,total_size,num_types"
    assert (out / "ibm_groups.csv").read_text().splitlines()[0] == "time,x1,count"
    capsys.readouterr()


def test_ibm_needs_group(cfg_file, tmp_path, capsys):
    assert main(["ibm", "--config", str(cfg_file), "--t-end", "5",
                 "--out", str(tmp_path / "x")]) == 1
    capsys.readouterr()


def test_tss_command_and_rescaled_clock(cfg_file, tmp_path, capsys):
    out = tmp_path / "tss"
    code = main(["tss", "--config", str(cfg_file), "--x0", "0", "--t-end", "20",
                 "--seed", "4", "--eps", "0.5", "--clock", "rescaled",
                 "--out", str(out)])
    assert code == 0
    lines = (out / "tss_path.csv").read_text().splitlines()
    assert lines[0] == "jump_time,x1"
    capsys.readouterr()


def test_diffusion_command(cfg_file, tmp_path, capsys):
    out = tmp_path / "diff"
    code = main(["diffusion", "--config", str(cfg_file), "--z0", "0", "--dt", "0.01",
                 "--t-end", "0.2", "--seed", "5", "--paths", "3", "--out", str(out)])
    assert code == 0
    assert (out / "diffusion_ensemble.csv").exists()
    assert (out / "diffusion_path.csv").read_text().splitlines()[0] == "time,x1"
    capsys.readouterr()


def test_diffusion_large_k(cfg_file, capsys):
    assert main(["diffusion", "--config", str(cfg_file), "--z0", "0", "--large-k"]) == 0
    out = capsys.readouterr().out
    assert "K= 100" in out or "K=100" in out.replace("  ", " ")


def test_diffusion_table_range_failure(tmp_path, capsys):
    cfg = tmp_path / "big_theta.cfg"
    cfg.write_text("k=1; b=100; c=1; mu=1")
    assert main(["diffusion", "--config", str(cfg), "--z0", "0", "--dt", "0.01",
                 "--t-end", "0.05", "--out", str(tmp_path / "d")]) == 2
    capsys.readouterr()


def test_verify_single_criterion(capsys):
    assert main(["verify", "--criteria", "1"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
