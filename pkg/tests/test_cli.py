import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from nirbench.cli import main
from nirbench.dataset import load_csv


@pytest.fixture
def syn(tmp_path):
    path = tmp_path / "syn.csv"
    assert main(["gen", "--n-per-class", "10", "--p", "40", "--k", "3", "--seed", "7", "--out", str(path)]) == 0
    return path


def test_gen_shape_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["gen", "--n-per-class", "40", "--p", "200", "--k", "3", "--seed", "7", "--out", str(a)]) == 0
    assert "n=120 p=200 k=3" in capsys.readouterr().out
    main(["gen", "--n-per-class", "40", "--p", "200", "--k", "3", "--seed", "7", "--out", str(b)])
    ds = load_csv(a)
    assert (ds.n, ds.p) == (120, 200)
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [
    ["gen", "--k", "1", "--out", "x.csv"],
    ["gen", "--p", "10", "--informative", "3,12", "--out", "x.csv"],
    ["gen", "--n-per-class", "0", "--out", "x.csv"],
    ["gen"],
    ["frobnicate"],
    [],
])
def test_gen_usage_errors(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert not (tmp_path / "x.csv").exists()


def test_run_single_spec(syn, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--data", str(syn), "--spec", "pls:5", "--splits", "3", "--seed", "1", "--out", str(out)])
    assert code == 0
    table = list(csv.reader((out / "table.csv").open()))
    assert table[0] == ["Model", "ACC", "SD"]
    assert table[1][0] == "PLS"
    report = json.loads((out / "report.json").read_text())
    assert len(report["reports"][0]["accuracies"]) == 3
    conf = list(csv.reader((out / "confusion_PLS.csv").open()))
    assert conf[0] == ["prediction", "class0", "class1", "class2"]
    assert "PLS" in capsys.readouterr().out


def test_run_one_split_na_sd(syn, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--data", str(syn), "--spec", "pls", "--pls-components", "4", "--splits", "1",
                 "--out", str(out)]) == 0
    rows = list(csv.reader((out / "table.csv").open()))
    assert rows[1][2] == "NA"
    assert json.loads((out / "report.json").read_text())["reports"][0]["spec"]["classifier"]["n_components"] == 4


def test_run_deterministic_and_config_file(syn, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": str(syn), "spec": ["lda+pca", "knn:3+mr:5"], "splits": 2, "seed": 3}))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(b), "--threads", "2"]) == 0
    assert (a / "table.csv").read_text() == (b / "table.csv").read_text()
    assert (a / "report.json").read_text() == (b / "report.json").read_text()


def test_run_env_output_dir(syn, tmp_path, monkeypatch):
    monkeypatch.setenv("NIRBENCH_OUT", str(tmp_path / "envout"))
    assert main(["run", "--data", str(syn), "--spec", "lda+pca", "--splits", "1"]) == 0
    assert (tmp_path / "envout" / "table.csv").exists()


def test_run_errors(syn, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--data", str(tmp_path / "missing.csv"), "--spec", "pls:3", "--out", str(out)]) == 1
    assert main(["run", "--data", str(syn), "--spec", "nope", "--out", str(out)]) == 2
    assert main(["run", "--data", str(syn), "--splits", "0", "--out", str(out)]) == 2
    assert main(["run", "--spec", "pls:3", "--out", str(out)]) == 2
    assert main(["run", "--data", str(syn), "--preset", "fast", "--spec", "pls:3", "--out", str(out)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"bogus": 1}')
    assert main(["run", "--config", str(bad), "--out", str(out)]) == 2
    assert not out.exists()


def test_export_pcs(syn, tmp_path):
    out = tmp_path / "pcs.csv"
    assert main(["export", "--data", str(syn), "--what", "pcs", "--ncomp", "3", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["PC1", "PC2", "PC3", "label"]
    assert len(rows) == 31
    scores = np.array([[float(v) for v in r[:3]] for r in rows[1:]])
    var = scores.var(axis=0)
    assert var[0] >= var[1] >= var[2]


def test_export_spectra_long_format(syn, tmp_path):
    out = tmp_path / "long.csv"
    assert main(["export", "--data", str(syn), "--what", "spectra", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["sample", "wavelength", "absorbance", "label"]
    assert len(rows) == 1 + 30 * 40


def test_export_usage_errors(syn, tmp_path):
    out = tmp_path / "x.csv"
    assert main(["export", "--data", str(syn), "--what", "pcs", "--ncomp", "0", "--out", str(out)]) == 2
    assert main(["export", "--data", str(syn), "--what", "bogus", "--out", str(out)]) == 2
    assert not out.exists()


def test_module_entry_point(syn):
    proc = subprocess.run([sys.executable, "-m", "nirbench", "export", "--data", str(syn), "--what", "nope",
                           "--out", "x.csv"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "invalid choice" in proc.stderr


def test_run_ga_writes_trace(syn, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"ga": {"population_size": 4, "generations": 3, "n_trees": 5, "cv_folds": 3}}))
    out = tmp_path / "o"
    assert main(["run", "--data", str(syn), "--config", str(cfg), "--spec", "knn:1+ga", "--splits", "2",
                 "--out", str(out)]) == 0
    rows = list(csv.reader((out / "ga_trace.csv").open()))
    assert rows[0] == ["generation", "best_fitness", "mean_fitness", "mean_features"]
    assert len(rows) == 4
    label, _, sd = list(csv.reader((out / "table.csv").open()))[1]
    assert (label, sd) == ("kNN GA", "NA")
