import json

import numpy as np
import pytest

from rfock.cli import run
from rfock.io import hoop_to_json
from rfock.io import testfield_to_json as tf_to_json
from rfock.kernels import TestField, pair_covariance
from rfock.loops import unit_square


@pytest.fixture
def files(tmp_path):
    sq = unit_square()
    fam = [hoop_to_json(sq), hoop_to_json(unit_square(origin=(3, 0, 0)))]
    lam = TestField.single(unit_square(origin=(0.2, 0.1, 0.3)), 0.4, 0.3)
    (tmp_path / "square.json").write_text(json.dumps(hoop_to_json(sq)))
    (tmp_path / "w.json").write_text(json.dumps({"family": fam, "r": 0.5}))
    (tmp_path / "w2.json").write_text(json.dumps(
        {"family": fam, "r": 0.5, "lambda": tf_to_json(lam)}))
    (tmp_path / "exp.json").write_text(json.dumps(
        {"base_hoop": hoop_to_json(sq), "r_values": [0.3, 0.6], "family_size_max": 24,
         "draws": 200}))
    return tmp_path


def test_cf(files, capsys):
    out = files / "o"
    assert run(["cf", "--hoop", str(files / "square.json"), "--r", "0.5", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    s = pair_covariance(unit_square(), unit_square(), 0.5)
    assert f"{np.exp(-s / 2):.12g}"[:12] in text
    assert f"{s:.12g}"[:12] in text
    man = json.loads((out / "manifest.json").read_text())
    assert man["subcommand"] == "cf" and man["seed"] == 0
    assert man["tolerances"]["quadrature"] == 1e-8 and man["mollifier"] == "paper"


def test_weyl_empty_lambda(files, capsys):
    assert run(["weyl-check", "--config", str(files / "w.json"), "--out", str(files / "o")]) == 0
    assert "PASS weyl_max_discrepancy: 0 " in capsys.readouterr().out


@pytest.mark.parametrize("cmd", ["weyl-check", "generator-check"])
def test_operator_checks(files, cmd):
    assert run([cmd, "--config", str(files / "w2.json"), "--out", str(files / "o")]) == 0
    assert run([cmd, "--config", str(files / "w2.json"), "--haar", "--out", str(files / "o")]) == 0


def test_generator_check_failure_exit(files):
    # an absurd step makes the finite difference miss the tolerance
    assert run(["generator-check", "--config", str(files / "w2.json"), "--h-step", "2.0",
                "--out", str(files / "o")]) == 1


def test_unknown_subcommand():
    assert run(["bogus"]) == 2


def test_input_errors_name_field(files, capsys):
    assert run(["cf", "--hoop", str(files / "missing.json"), "--r", "0.5",
                "--out", str(files / "o")]) == 2
    assert "hoop" in capsys.readouterr().err
    assert run(["cf", "--hoop", str(files / "square.json"), "--out", str(files / "o")]) == 2
    assert "r:" in capsys.readouterr().err
    bad = files / "bad.json"
    bad.write_text(json.dumps({"loops": [{"vertices": [[0, 0, 0], [1, 0, 0]]}]}))
    assert run(["cf", "--hoop", str(bad), "--r", "0.5", "--out", str(files / "o")]) == 2
    assert "hoop.loops[0].vertices" in capsys.readouterr().err


def test_sample_reproducible_across_threads(files):
    outs = []
    for i, t in enumerate(["1", "4"]):
        o = files / f"s{i}"
        assert run(["sample", "--config", str(files / "w.json"), "--draws", "9000", "--seed", "7",
                    "--threads", t, "--out", str(o)]) == 0
        outs.append((o / "samples.csv").read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.parametrize("cmd,extra", [
    ("covariance", ["--oracle-check"]),
    ("translate", []),
    ("rn-check", ["--draws", "20000"]),
])
def test_family_commands(files, cmd, extra):
    assert run([cmd, "--config", str(files / "w2.json"), "--out", str(files / "o")] + extra) == 0


def test_experiment_commands(files):
    o = str(files / "o")
    assert run(["hellinger", "--config", str(files / "exp.json"), "--out", o]) == 0
    assert (files / "o" / "decay.csv").exists()
    assert run(["classify", "--config", str(files / "exp.json"), "--out", o]) == 0
    assert run(["invariance", "--hoop", str(files / "square.json"), "--r", "0.5",
                "--transforms", "3", "--out", o]) == 0
