import csv
import io
import json

import numpy as np
import pytest

from wonder import SynthSpec, generate, save_csv
from wonder.bench import lambda_sweep, theory_self_check, theory_table
from wonder.cli import main


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# --- theory ----------------------------------------------------------------


def test_theory_rows_and_self_check(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, _, err = run(["theory", "--gamma-range", 0.05, 10, 25, "--alpha2", 0.5, 2, "--k", 1, 2, 7, "--self-check", "--out", out], capsys)
    assert code == 0, err
    rows = read_csv(out)
    assert list(rows[0]) == ["gamma", "alpha2", "k", "phi", "psi", "h", "W", "OE", "H"]
    for r in rows:
        k = int(r["k"])
        if k == 1:
            assert float(r["psi"]) == pytest.approx(1.0, abs=1e-12)
        assert 1 / k - 1e-12 <= float(r["W"]) <= 1 + 1e-12
    for a in ("0.5", "2.0"):
        hs = [float(r["h"]) for r in rows if r["alpha2"] == a and r["k"] == "1"]
        assert np.all(np.diff(hs) > 0)


def test_theory_full_precision(capsys):
    code, out, _ = run(["theory", "--gamma", 1, "--alpha2", 1, "--k", 1], capsys)
    row = list(csv.DictReader(io.StringIO(out)))[0]
    assert float(row["phi"]) == 0.6180339887498948


def test_theory_self_check_catches_bad_rows():
    rows = theory_table([0.5], [1.0], [2])
    rows[0]["W"] = 2.0
    assert theory_self_check(rows)


def test_theory_bad_range(capsys):
    code, _, err = run(["theory", "--gamma-range", 5, 1, 10], capsys)
    assert code != 0 and "gamma-range" in err
    code, _, _ = run(["theory", "--gamma", -1], capsys)
    assert code != 0


# --- config handling -------------------------------------------------------


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"gamma": [0.5], "alpha2": [2.0], "k": [3]}))
    code, out, _ = run(["theory", "--config", cfg, "--k", 1], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1
    assert rows[0]["gamma"] == "0.5" and rows[0]["k"] == "1"


def test_config_schema_rejects_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"gama": [0.5]}))
    code, _, err = run(["theory", "--config", cfg], capsys)
    assert code == 2 and "gama" in err


# --- simulate-efficiency ---------------------------------------------------


def test_simulate_efficiency_small(tmp_path, capsys):
    out, summ = tmp_path / "e.csv", tmp_path / "s.csv"
    argv = ["simulate-efficiency", "--n", 400, "--p", 40, "--k", 1, 2, 4, "--seeds", 3, "--seed", 5, "--out", out, "--summary", summ, "--self-check"]
    code, _, err = run(argv, capsys)
    assert code == 0, err
    rows = read_csv(out)
    assert [(r["k"], r["seed"]) for r in rows] == [(k, s) for k in "124" for s in ("5", "6", "7")]
    assert all(r["realized"] == "1.0" for r in rows if r["k"] == "1")
    first = out.read_bytes()
    code, _, _ = run(argv + ["--threads", 3], capsys)
    assert out.read_bytes() == first
    assert len(read_csv(summ)) == 3


def test_simulate_resource_guard(capsys):
    code, _, err = run(["simulate-efficiency", "--n", 200000, "--p", 1000, "--k", 2, "--seeds", 1], capsys)
    assert code == 3 and "resource guard" in err


def test_simulate_requires_n_at_least_p(capsys):
    code, _, _ = run(["simulate-efficiency", "--n", 10, "--p", 20, "--seeds", 1], capsys)
    assert code == 3


# --- lambda-sweep ----------------------------------------------------------


def test_lambda_sweep_isotropic_single_machine(tmp_path, capsys):
    out = tmp_path / "l.csv"
    code, _, err = run(["lambda-sweep", "--n", 800, "--p", 160, "--k", 1, "--seeds", 4, "--out", out, "--self-check"], capsys)
    assert code == 0, err
    rows = read_csv(out)
    best = [r for r in rows if r["is_argmin"] == "true"]
    assert len(best) == 1 and float(best[0]["multiplier"]) in (0.5, 1.0, 2.0)


def test_lambda_sweep_ar1_shift():
    rows, argmin = lambda_sweep(3000, 500, [1, 2, 5, 10], range(3), design="ar1", rho=0.9)
    assert argmin[2] < 1 and argmin[5] < 1 and argmin[10] < 1
    assert argmin[1] in (0.5, 1.0, 2.0)
    # interior minimum for k = 5: the curve goes up on both sides
    risks = [r["risk"] for r in rows if r["k"] == 5]
    i = int(np.argmin(risks))
    assert 0 < i < len(risks) - 1


def test_weighting_beats_naive_at_every_lambda():
    rows, _ = lambda_sweep(1000, 170, [10], range(4))
    for r in rows:
        assert r["risk"] <= r["naive_risk"]
    best = min(rows, key=lambda r: r["risk"])
    assert best["risk"] <= 0.85 * best["naive_risk"]


# --- wonder ----------------------------------------------------------------


@pytest.fixture(scope="module")
def csv_pair(tmp_path_factory):
    d = generate(SynthSpec(n=1500, p=30, seed=12))
    root = tmp_path_factory.mktemp("csv")
    save_csv(d.subset(np.arange(1200)), root / "train.csv")
    save_csv(d.subset(np.arange(1200, 1500)), root / "test.csv")
    return root / "train.csv", root / "test.csv"


def test_wonder_k1_modes_coincide(csv_pair, tmp_path, capsys):
    train, test = csv_pair
    mses = []
    for mode in ("general", "isotropic", "naive", "local"):
        out = tmp_path / f"{mode}.json"
        code, _, err = run(["wonder", "--train", train, "--test", test, "--k", 1, "--mode", mode, "--out", out], capsys)
        assert code == 0, err
        mses.append(json.loads(out.read_text())["empirical"]["test_mse"])
    assert max(mses) - min(mses) <= 1e-10


def test_wonder_report_bytes_stable(csv_pair, tmp_path, capsys):
    train, test = csv_pair
    outs = []
    for i in range(2):
        out, coef = tmp_path / f"r{i}.json", tmp_path / f"c{i}.csv"
        code, _, _ = run(["wonder", "--train", train, "--test", test, "--k", 4, "--seed", 3, "--out", out, "--coef-out", coef], capsys)
        assert code == 0
        outs.append((out.read_bytes(), coef.read_bytes()))
    assert outs[0] == outs[1]
    doc = json.loads(outs[0][0])
    assert doc["seed"] == 3 and doc["version"].startswith("wonder ")
    assert "timing" not in doc
    assert len(doc["weights"]) == 4
    assert list(doc) == sorted(doc)


def test_wonder_timing_flag(csv_pair, tmp_path, capsys):
    train, test = csv_pair
    out = tmp_path / "t.json"
    run(["wonder", "--train", train, "--test", test, "--k", 2, "--timing", "--out", out], capsys)
    assert json.loads(out.read_text())["timing"]["seconds"] > 0


def test_wonder_errors(tmp_path, capsys):
    code, _, err = run(["wonder", "--train", tmp_path / "missing.csv"], capsys)
    assert code == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\n1,2\nx,3\n")
    code, _, err = run(["wonder", "--train", bad], capsys)
    assert code == 3 and "row 3" in err
    code, _, _ = run(["wonder"], capsys)
    assert code == 2


@pytest.mark.slow
def test_synthetic_msd_wonder_beats_baselines(tmp_path, capsys):
    mse = {}
    for mode in ("general", "naive", "local"):
        out = tmp_path / f"{mode}.json"
        code, _, err = run(["wonder", "--synthetic-msd", "--k", 100, "--mode", mode, "--out", out], capsys)
        assert code == 0, err
        mse[mode] = json.loads(out.read_text())["empirical"]["test_mse"]
    assert mse["general"] <= mse["naive"]
    assert mse["general"] <= mse["local"]


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "wonder", "theory", "--gamma", "1", "--k", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("gamma,")
