import json

import pytest

from axe_eval.cli import main


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


@pytest.fixture(scope="module")
def german_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "german.csv"
    assert main(["make-standin", "--name", "german", "--rows", "150", "--out", str(path)]) == 0
    return path


def evaluate(data, out, *extra):
    return main(["evaluate", "--data", str(data), "--model", "lr", "--explainer", "lime",
                 "--explainer-samples", "100", "--samples", "20", "--out", str(out), *extra])


def test_evaluate_auc_curve_and_outputs(german_csv, tmp_path):
    assert evaluate(german_csv, tmp_path, "--metric", "axe,pgi,pgu,fa,rc", "--n", "auc") == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    n_features = 9
    for metric in ("axe", "pgi", "pgu", "fa"):
        rep = doc["reports"][metric]
        assert rep["n"] == "auc" and len(rep["curve"]) == n_features
    assert doc["reports"]["rc"]["n"] is None
    assert "out" not in doc["config"] and "jobs" not in doc["config"]
    assert {"report.json", "report.csv", "per_point.csv", "explanations.csv"} <= set(files(tmp_path))


def test_evaluate_byte_identical_across_jobs(german_csv, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert evaluate(german_csv, a, "--metric", "axe,pgi", "--jobs", "1") == 0
    assert evaluate(german_csv, b, "--metric", "axe,pgi", "--jobs", "3") == 0
    assert files(a) == files(b)


def test_env_seed(german_csv, tmp_path, monkeypatch):
    assert evaluate(german_csv, tmp_path / "flag", "--seed", "7") == 0
    monkeypatch.setenv("AXE_EVAL_SEED", "7")
    assert evaluate(german_csv, tmp_path / "env") == 0
    assert files(tmp_path / "flag") == files(tmp_path / "env")
    monkeypatch.setenv("AXE_EVAL_SEED", "seven")
    assert evaluate(german_csv, tmp_path / "bad") == 2


def test_exit_codes(german_csv, tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert evaluate(missing, tmp_path / "o") == 3
    assert str(missing) in capsys.readouterr().err
    assert evaluate(german_csv, tmp_path / "o", "--metric", "bogus") == 2
    assert evaluate(german_csv, tmp_path / "o", "--n", "99") == 2
    assert evaluate(german_csv, tmp_path / "o", "--k", "150") == 2
    assert evaluate(german_csv, tmp_path / "o", "--jobs", "0") == 2
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"datasets": []}))
    assert main(["benchmark", "--manifest", str(manifest), "--out", str(tmp_path / "o")]) == 2
    assert main(["benchmark", "--manifest", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == 3
    assert main(["fairwash", "--data", str(german_csv), "--protected", "race", "--foils", "age",
                 "--out", str(tmp_path / "o")]) == 2
    assert main(["make-standin", "--name", "nope", "--out", str(tmp_path / "x.csv")]) == 2


def test_fairwash_rerun_and_table_header(tmp_path):
    args = ["fairwash", "--data", "standin:german", "--protected", "gender", "--foils", "unrelated_column_one",
            "--attack", "lime", "--pgi-rows", "20", "--pgi-samples", "5", "--detector-copies", "10",
            "--no-attack-check"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")
    header = (tmp_path / "a" / "table2.csv").read_text().splitlines()[0]
    assert header == "dataset,model,metric,E_rho,E_phi,E_psi,E_omega,pass"


def test_benchmark_rerun_across_jobs(german_csv, tmp_path):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"datasets": [german_csv.name], "explainers": ["grad", "random"],
                                    "pgi_samples": 5, "max_rows": 40, "k_values": [1, 5]}))
    # relative paths resolve against the manifest directory
    (tmp_path / german_csv.name).write_bytes(german_csv.read_bytes())
    assert main(["benchmark", "--manifest", str(manifest), "--out", str(tmp_path / "a")]) == 0
    assert main(["benchmark", "--manifest", str(manifest), "--jobs", "3", "--out", str(tmp_path / "b")]) == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")
    assert "fig8_german.csv" in files(tmp_path / "a")


def test_synthetic_regions_standin_rerun(tmp_path):
    for cmd in (
        ["synthetic", "--points-per-cluster", "100", "--k-grid", "1,5", "--width-grid", "0.1,10",
         "--pgi-samples", "50", "--manifold-samples", "500"],
        ["regions", "--resolution", "20"],
    ):
        assert main([*cmd, "--out", str(tmp_path / "a")]) == 0
        assert main([*cmd, "--out", str(tmp_path / "b")]) == 0
        assert files(tmp_path / "a") == files(tmp_path / "b")
    for d in ("a", "b"):
        assert main(["make-standin", "--name", "compas", "--out", str(tmp_path / d / "c.csv")]) == 0
    assert (tmp_path / "a" / "c.csv").read_bytes() == (tmp_path / "b" / "c.csv").read_bytes()
    assert main(["synthetic", "--k-grid", "0", "--out", str(tmp_path / "c")]) == 2
