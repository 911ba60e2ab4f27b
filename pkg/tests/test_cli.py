import json
import re
import subprocess
import sys

import numpy as np
import pytest

from sphpoisson import evolution
from sphpoisson.cli import ConfigError, main, resolve_config


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_count_prints_three(capsys):
    code, out, _ = run(["count", "--M", "25", "--sigma", "1", "--N", "3"], capsys)
    assert code == 0 and out.strip() == "3"


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "sphpoisson", "count", "--M", "0", "--sigma", "-1", "--N", "5"],
                       capture_output=True, text=True, check=True)
    assert p.stdout.strip() == "6"


def test_evolve_constant_phase_error(tmp_path, capsys):
    code, out, _ = run(["evolve", "--initial", "constant", "--bandlimit", "4", "--t_end", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    err = float(re.search(r"phase_error=(\S+)", out).group(1))
    assert err < 1e-10
    text = (tmp_path / "evolve.csv").read_text()
    assert text.startswith("# config: ")
    cfg = json.loads(text.splitlines()[0][len("# config: "):])
    assert cfg["initial"] == "constant" and cfg["bandlimit"] == 4


def test_instability_report_schema(tmp_path, capsys):
    code, out, _ = run(["instability", "--n", "64", "--delta0", "1", "--out", str(tmp_path)], capsys)
    assert code == 0 and "s0=" in out
    d = json.loads((tmp_path / "instability.json").read_text())
    for key in ("n", "delta0", "kappa_n", "omega", "omega_prime", "t_n", "s0",
                "separation_analytic", "separation_solver", "overlap", "iterations", "config"):
        assert key in d
    assert d["n"] == 64 and d["config"]["n"] == 64


def test_confine_outputs(tmp_path, capsys):
    code, out, _ = run(["confine", "--bandlimit", "4", "--t_end", "0.05", "--n_r", "400", "--out", str(tmp_path)], capsys)
    assert code == 0 and "mass_drift=" in out
    for name in ("radial_basis.csv", "radial_energies.json", "confine.csv"):
        assert (tmp_path / name).exists()
    assert "config" in json.loads((tmp_path / "radial_energies.json").read_text())


def test_lambda_outputs(tmp_path, capsys):
    code, out, _ = run(["lambda", "--N", "2", "--k", "0", "--out", str(tmp_path)], capsys)
    assert code == 0 and out.strip() == "28"
    rows = (tmp_path / "lambda.csv").read_text().splitlines()
    assert rows[1] == "n1,n2,n3,n4" and len(rows) == 30
    code, out, _ = run(["lambda", "--growth", "--N", "8", "16", "32", "64", "--out", str(tmp_path)], capsys)
    assert code == 0 and "N=8:385" in out and "N=64:27817" in out
    assert (tmp_path / "growth.csv").read_text().splitlines()[1] == "N,sup_count,argmax_k"


@pytest.mark.parametrize(
    "argv",
    [
        ["evolve", "--bandlimit", "4", "--t_end", "0.02", "--seed", "17"],
        ["confine", "--bandlimit", "3", "--t_end", "0.02", "--n_r", "300", "--seed", "5"],
        ["instability", "--n", "16"],
    ],
)
def test_determinism(tmp_path, capsys, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    capsys.readouterr()
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir()) and files
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"M": 25, "sigma": 1, "N": [4]}))
    code, out, _ = run(["count", "--config", str(cfg)], capsys)
    assert code == 0 and out.strip() == "2"  # (4, 3) and (5, 0) with 4 <= k1 <= 8
    code, out, _ = run(["count", "--config", str(cfg), "--N", "3"], capsys)
    assert out.strip() == "3"


@pytest.mark.parametrize(
    "argv, field",
    [
        (["evolve", "--dt", "-0.1"], "dt"),
        (["evolve", "--bandlimit", "abc"], "bandlimit"),
        (["instability", "--n", "2"], "n"),
        (["instability", "--delta0", "1.5"], "delta0"),
        (["confine", "--eps", "0"], "eps"),
        (["confine", "--n_modes", "50", "--n_r", "400"], "n_modes"),
        (["count", "--sigma", "2"], "sigma"),
        (["evolve", "--seed", str(2**64)], "seed"),
        (["evolve", "--initial", "psi", "--n", "9", "--bandlimit", "4"], "n"),
    ],
)
def test_invalid_config_exit_2(tmp_path, capsys, argv, field):
    code, _, err = run(argv + ["--out", str(tmp_path)], capsys)
    assert code == 2
    assert field in err


def test_unknown_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bandlimit": 4, "colour": "red"}))
    code, _, err = run(["evolve", "--config", str(cfg)], capsys)
    assert code == 2 and "colour" in err
    code, _, err = run(["evolve", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == 2 and "config" in err


def test_resolve_config_defaults():
    cfg = resolve_config("count", {}, {})
    assert cfg == {"M": 25, "sigma": 1, "N": [3], "command": "count"}
    with pytest.raises(ConfigError) as exc:
        resolve_config("evolve", {"t_end": -1}, {})
    assert exc.value.field == "t_end"


def test_divergence_exit_3(tmp_path, capsys, monkeypatch):
    orig = evolution.step_mixed

    def poisoned(backend, comps, dt):
        return [a * np.nan for a in orig(backend, comps, dt)]

    monkeypatch.setattr(evolution, "step_mixed", poisoned)
    code, _, err = run(["evolve", "--bandlimit", "3", "--t_end", "0.1", "--out", str(tmp_path)], capsys)
    assert code == 3 and "step 1" in err


def test_selftest_passes_and_detects_fault(capsys):
    code, out, _ = run(["selftest", "--bandlimit", "16"], capsys)
    assert code == 0
    for name in ("round trip", "parseval", "poisson eigenvalue", "mass conservation"):
        assert name in out
    code, out, err = run(["selftest", "--bandlimit", "16", "--inject-fault", "poisson-eigenvalue"], capsys)
    assert code == 1 and "poisson eigenvalue" in err
    assert re.search(r"FAIL\s+poisson eigenvalue", out)


@pytest.mark.slow
def test_selftest_default_bandlimit_budget(capsys):
    import time

    t0 = time.perf_counter()
    code, out, _ = run(["selftest"], capsys)
    assert code == 0 and "L=64" in out
    assert time.perf_counter() - t0 < 30


def test_transform_bench(tmp_path, capsys):
    code, out, _ = run(["transform-bench", "--bandlimit", "8", "--repeats", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    d = json.loads((tmp_path / "transform_bench.json").read_text())
    assert d["fft_vs_direct"] < 1e-12 and d["config"]["bandlimit"] == 8
