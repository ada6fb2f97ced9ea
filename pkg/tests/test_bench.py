import json

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from relfit.cli import main
from relfit.rng import RngStream
from relfit.scenarios import ScenarioSpec, gen_scenario, gene_preprocess, tetrahedron_vertices
from relfit.study import StudyConfig, run_power_study, run_select_study, run_tree_study


def test_square_counts():
    x, lab = gen_scenario(ScenarioSpec("square", 2, {"delta": 4, "n_per_cluster": 50}), RngStream(0))
    assert x.shape == (200, 2)
    assert np.array_equal(np.bincount(lab), [50] * 4)


def test_tetrahedron_regular():
    v = tetrahedron_vertices(5.0)
    assert np.allclose(pdist(v), 5.0, atol=1e-12, rtol=0)
    assert np.allclose(v.mean(0), 0)


def test_ten_cluster_mean():
    x, lab = gen_scenario(ScenarioSpec("ten_cluster", 30, {"a": 200, "n": 10_000}), RngStream(1))
    m = x[lab == 0].mean(0)
    target = np.r_[np.full(6, 200.0), np.zeros(24)]
    assert np.abs(m - target).max() < 4 / np.sqrt(1000) * 3


def test_scenario_validation():
    with pytest.raises(ValueError):
        ScenarioSpec("tetrahedron", 2)
    with pytest.raises(ValueError):
        ScenarioSpec("ten_cluster", 12)
    with pytest.raises(ValueError):
        ScenarioSpec("hexagon", 2)


def test_two_mix_covariance_is_as_given():
    spec = ScenarioSpec("two_mix", 3, {"mu": [20, 0, 0], "anisotropy": [1, 400, 1], "n": 100_000})
    x, lab = gen_scenario(spec, RngStream(2))
    r = x.copy()
    r[:, 0] -= np.where(lab == 1, 20, -20)
    assert np.allclose(r.var(0), [1, 400, 1], rtol=0.03)


def test_gene_preprocess_examples():
    m = np.exp(np.array([[0.0, 0, 0], [0, 1, 2], [0, 2, 4], [0, 3, 6], [0, 4, 8]]))
    y, cols = gene_preprocess(m, 2)
    assert list(cols) == [1, 2]
    assert np.allclose(y, np.log(m)[:, [1, 2]])
    y, cols = gene_preprocess(m, 10)
    assert list(cols) == [0, 1, 2]
    z = np.array([[0.0, 2.0], [4.0, 8.0]])
    y, _ = gene_preprocess(z, 2)
    assert y[0, 0] == np.log(2.0)
    with pytest.raises(ValueError):
        gene_preprocess(np.zeros((3, 3)), 2)
    with pytest.raises(ValueError):
        gene_preprocess(-np.ones((3, 3)), 2)


def test_study_reps_validated():
    with pytest.raises(ValueError):
        StudyConfig(ScenarioSpec("single_gaussian", 2, {"n": 100}), ["rift"], reps=0)


def test_study_incompatible_dimension():
    cfg = StudyConfig(ScenarioSpec("single_gaussian", 20, {"n": 40}), ["mardia"], reps=1)
    with pytest.raises(ValueError):
        run_power_study(cfg)


def test_power_study_reproducible_and_parallel_equal():
    cfg = StudyConfig(ScenarioSpec("two_mix", 2, {"a": 2, "n": 200}), ["rift", "mrift", "mardia", "nn-z"],
                      reps=4, seed=11)
    a = run_power_study(cfg).to_csv()
    assert a == run_power_study(cfg).to_csv()
    assert a == run_power_study(cfg, n_jobs=2).to_csv()
    rep = run_power_study(cfg)
    assert all(0 <= c <= 4 for c in rep.counts().values())
    assert rep.rates()["rift"] == rep.counts()["rift"] / 4
    lines = a.strip().split("\n")
    assert lines[0] == "rep,method,statistic,p_value,reject,leaves" and len(lines) == 17


def test_tree_study_histogram():
    cfg = StudyConfig(ScenarioSpec("square", 2, {"delta": 6}), ["mrift"], reps=3, seed=1,
                      directions=["topdown", "bottomup"])
    rep = run_tree_study(cfg)
    for m in ("mrift/topdown", "mrift/bottomup"):
        assert sum(rep.histogram(m).values()) == 3


def test_select_study():
    cfg = StudyConfig(ScenarioSpec("square", 2, {"delta": 8}), ["srift-kl", "bic"], reps=2, K_n=5)
    rep = run_select_study(cfg)
    assert rep.to_csv().startswith("rep,method,statistic,p_value,reject,k_hat")
    assert sum(rep.histogram("bic").values()) == 2


@pytest.mark.slow
def test_high_variance_power_study():
    spec = ScenarioSpec("two_mix", 5, {"mu": [20, 0, 0, 0, 0], "anisotropy": [1, 400, 1, 1, 1], "n": 100,
                                       "variant": "shifted"})
    rep = run_power_study(StudyConfig(spec, ["rift", "sigclust"], reps=30, seed=3))
    assert rep.rates()["rift"] >= 0.8 and rep.rates()["sigclust"] <= 0.2


@pytest.fixture
def data_csv(tmp_path):
    g = np.random.default_rng(0)
    x = g.normal(size=(200, 2))
    x[:100] += 7
    p = tmp_path / "x.csv"
    np.savetxt(p, x, delimiter=",", header="a,b", comments="")
    return p


def test_cli_test(data_csv, capsys):
    assert main(["test", "--input", str(data_csv), "--method", "rift", "--seed", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == "rift" and out["reject"]


def test_cli_cluster(data_csv, tmp_path):
    out = tmp_path / "tree.json"
    args = ["cluster", "--input", str(data_csv), "--method", "mrift", "--direction", "topdown", "--alpha",
            "0.05", "--seed", "2", "--min-node", "8", "--out", str(out)]
    assert main(args) == 0
    first = out.read_text()
    assert json.loads(first)["n_leaves"] >= 2
    assert main(args) == 0 and out.read_text() == first


def test_cli_selectk(data_csv, capsys):
    assert main(["selectk", "--input", str(data_csv), "--kmax", "4", "--distance", "kl", "--seed", "0"]) == 0
    assert json.loads(capsys.readouterr().out)["k_hat"] == 2
    assert main(["selectk", "--input", str(data_csv), "--kmax", "4", "--criterion", "bic"]) == 0
    assert json.loads(capsys.readouterr().out)["k_hat"] == 2


def test_cli_simulate(tmp_path):
    out = tmp_path / "r.csv"
    args = ["simulate", "--scenario", "two_mix", "--param", "d=2", "--param", "a=3", "--param", "n=100",
            "--reps", "2", "--alpha", "0.05", "--seed", "4", "--out", str(out), "--methods", "rift,mardia"]
    assert main(args) == 0
    text = out.read_text()
    assert main(args) == 0 and out.read_text() == text
    assert len(text.strip().split("\n")) == 5


def test_cli_genes(tmp_path):
    p = tmp_path / "e.csv"
    e = np.abs(np.random.default_rng(0).normal(size=(20, 6)))
    e[0, 0] = 0
    np.savetxt(p, e, delimiter=",", header=",".join(f"g{i}" for i in range(6)), comments="")
    out = tmp_path / "p.csv"
    assert main(["genes", "--input", str(p), "--top", "3", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 21 and len(lines[0].split(",")) == 3


def test_cli_exit_codes(tmp_path, data_csv):
    assert main(["test", "--input", str(tmp_path / "missing.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,x\n")
    assert main(["test", "--input", str(bad)]) == 2
    assert main(["simulate", "--scenario", "square", "--reps", "0"]) == 2
    flat = tmp_path / "flat.csv"
    np.savetxt(flat, np.ones((30, 2)), delimiter=",", header="a,b", comments="")
    assert main(["test", "--input", str(flat), "--method", "mardia"]) == 3
    with pytest.raises(SystemExit) as e:
        main(["test", "--input", str(data_csv), "--method", "nope"])
    assert e.value.code == 2
