import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minkdeform import config
from minkdeform.cli import CHECK_FAILED, INPUT_ERROR, NUMERIC_ERROR, OK, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.mark.parametrize("name, code", [
    ("randers.yaml", OK),
    ("randers_strong.yaml", CHECK_FAILED),
    ("kropina.yaml", CHECK_FAILED),
    ("ellipsoid.yaml", OK),
    ("mroot_quadratic.yaml", OK),
])
def test_validate_exit_codes(name, code):
    assert main(["validate", "--config", str(CONFIGS / name), "--resolution", "512"]) == code


def test_input_errors(tmp_path, capsys):
    bad_yaml = write(tmp_path, "dim: 2\nbase: {kind: euclidean\n")
    assert main(["validate", "--config", bad_yaml]) == INPUT_ERROR
    assert "c.yaml:3:1" in capsys.readouterr().err
    bad_phi = write(tmp_path, "dim: 2\nbase: {kind: euclidean}\n"
                    "deformations:\n  - {phi: '1+*s1', betas: [[1, 0]]}\n")
    assert main(["validate", "--config", bad_phi]) == INPUT_ERROR
    assert "deformations[0].phi" in capsys.readouterr().err
    assert main(["eval", "--config", str(CONFIGS / "randers.yaml"), "1", "2", "3"]) == INPUT_ERROR
    assert main(["nonsense"]) == INPUT_ERROR
    assert main(["validate"]) == INPUT_ERROR
    assert main(["validate", "--config", str(tmp_path / "missing.yaml")]) == INPUT_ERROR
    unknown = write(tmp_path, "dim: 2\nbase: {kind: euclidean}\ncolour: red\n", "u.yaml")
    assert main(["validate", "--config", unknown]) == INPUT_ERROR


def test_numeric_error(tmp_path):
    # the origin direction has no tensors; evaluating there is a numerical failure
    assert main(["eval", "--config", str(CONFIGS / "randers.yaml"), "0", "0"]) in (INPUT_ERROR, NUMERIC_ERROR)
    # a point where the square root of a negative number is taken
    cfg = write(tmp_path, "dim: 2\nbase: {kind: euclidean}\n"
                "deformations:\n  - {builtin: circle, betas: [[0.9, 0]]}\n")
    assert main(["eval", "--config", cfg, "-1", "0"]) == OK
    krop = str(CONFIGS / "kropina.yaml")
    assert main(["eval", "--config", krop, "-1", "0"]) == NUMERIC_ERROR


def test_eval_output(capsys):
    assert main(["eval", "--config", str(CONFIGS / "randers.yaml"), "1", "0"]) == OK
    out = capsys.readouterr().out
    assert out.startswith("F = 1.5\n") and "C_y" in out and "K_y" in out


def test_compose_and_iterate(capsys):
    assert main(["compose", "randers", "randers", "--at", "0.25"]) == OK
    assert "1.5" in capsys.readouterr().out
    assert main(["iterate", "kropina:1", "-k", "3", "--at", "0.5"]) == OK
    out = capsys.readouterr().out.splitlines()
    expo = [float(line.split()[-1]) for line in out[1:]]
    np.testing.assert_allclose(expo, [-3, -7, -15], atol=1e-9)
    assert main(["iterate", "randers", "-k", "3", "--config", str(CONFIGS / "randers.yaml"),
                 "--resolution", "256"]) == CHECK_FAILED


def test_invert(capsys):
    assert main(["invert", "randers", "0.25"]) == OK
    assert "0.75" in capsys.readouterr().out
    assert main(["invert", "--config", str(CONFIGS / "mroot_quadratic.yaml"),
                 "--resolution", "256"]) == OK


def test_classify_indicatrix_hausdorff(tmp_path, capsys):
    assert main(["classify", "--config", str(CONFIGS / "randers.yaml"), "--resolution", "256"]) == OK
    assert "c_reducible" in capsys.readouterr().out
    assert main(["indicatrix", "--config", str(CONFIGS / "randers.yaml"),
                 "--out", str(tmp_path), "--format", "csv"]) == OK
    assert np.loadtxt(tmp_path / "indicatrix.csv", delimiter=",").shape[1] == 2
    assert main(["hausdorff", str(CONFIGS / "ellipsoid.yaml"),
                 str(CONFIGS / "ellipsoid_direct.yaml"), "--resolution", "4096"]) == OK
    d = float(capsys.readouterr().out.split("=")[-1])
    assert d < 1e-6


def test_thresholds_flag(capsys):
    cfg = str(CONFIGS / "randers.yaml")
    assert main(["classify", "--config", cfg, "--threshold", "c_reducible"]) == INPUT_ERROR
    assert main(["classify", "--config", cfg, "--threshold", "euclidean=1e5",
                 "--resolution", "128"]) == OK
    assert "euclidean" in capsys.readouterr().out


def test_outputs_are_deterministic(tmp_path):
    for k in range(2):
        assert main(["indicatrix", "--config", str(CONFIGS / "ellipsoid.yaml"),
                     "--out", str(tmp_path / str(k)), "--resolution", "300"]) == OK
    assert (tmp_path / "0/indicatrix.obj").read_bytes() == (tmp_path / "1/indicatrix.obj").read_bytes()


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "minkdeform.cli", "compose", "randers", "1+s1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "s1" in r.stdout


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_config_round_trip(name):
    cfg = config.load(CONFIGS / name)
    once = config.dumps(cfg)
    assert config.dumps(config.loads(once)) == once


@settings(max_examples=30)
@given(st.integers(2, 4), st.floats(-0.6, 0.6), st.sampled_from(["randers", "1+s1+s1^2/4", "circle"]),
       st.integers(1, 5000), st.integers(0, 99))
def test_round_trip_property(n, b, phi, res, seed):
    betas = [[b] + [0.1] * (n - 1)]
    if phi == "circle":
        d = {"builtin": "circle", "params": [], "betas": betas}
    else:
        d = {"phi": phi, "betas": betas}
    cfg = config.from_dict({"dim": n, "base": {"kind": "m_root", "m": 4}, "deformations": [d],
                            "sampling": {"resolution": res, "seed": seed}})
    once = config.dumps(cfg)
    assert config.dumps(config.loads(once)) == once
    assert config.loads(once).to_dict() == cfg.to_dict()
