import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from bnmcmc.cli import main
from bnmcmc.errors import DataError
from bnmcmc.io import (
    SampleArchive,
    penalty_from_interactions,
    read_adjacency,
    read_interactions,
    read_trace,
    to_dot,
    write_matrix,
    write_trace,
)


def test_matrix_roundtrip(tmp_path):
    a = np.array([[0, 1], [0, 0]], bool)
    write_matrix(tmp_path / "a.csv", a.astype(int), ["x", "y"])
    back, labels = read_adjacency(tmp_path / "a.csv")
    assert labels == ("x", "y") and np.array_equal(back, a)


def test_dot_marks_undirected_edges():
    a = np.array([[0, 1, 1], [1, 0, 0], [0, 0, 0]], bool)
    dot = to_dot(a, ["a", "b", "c"])
    assert '"a" -> "b" [dir=none];' in dot and '"a" -> "c";' in dot
    assert dot.count("->") == 2


def test_trace_roundtrip(tmp_path):
    write_trace(tmp_path / "t.csv", [-1.5, -1.25], stepsave=10)
    steps, scores = read_trace(tmp_path / "t.csv")
    assert steps.tolist() == [0, 10] and scores.tolist() == [-1.5, -1.25]


def test_sample_archive_roundtrip(tmp_path):
    dags = np.random.default_rng(0).random((7, 9, 9)) < 0.3
    SampleArchive(tuple("abcdefghi"), dags, np.arange(7.0), "order", 3).save(tmp_path / "s.npz")
    arc = SampleArchive.load(tmp_path / "s.npz")
    assert np.array_equal(arc.dags, dags) and arc.stepsave == 3 and arc.kind == "order"
    (tmp_path / "bad.npz").write_text("nope")
    with pytest.raises(DataError):
        SampleArchive.load(tmp_path / "bad.npz")


def test_interactions_and_penalty(tmp_path):
    p = tmp_path / "i.tsv"
    p.write_text("# comment\na\tb\nb,c\n")
    pairs = read_interactions(p)
    assert pairs == [("a", "b"), ("b", "c")]
    pen = penalty_from_interactions(pairs, ["a", "b", "c"], factor=3)
    assert pen[0, 1] == pen[1, 0] == 1 and pen[0, 2] == 3 and pen[2, 2] == 1
    with pytest.raises(DataError):
        penalty_from_interactions([("a", "z")], ["a", "b"])


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--nodes", "6", "--rows", "150", "--avg-parents", "1.5",
                 "--seed", "3", "--out-dir", str(out)]) == 0
    return out


def test_learn_order_and_analyses(simulated, tmp_path):
    data, truth = simulated / "data.csv", simulated / "truth.csv"
    runs = []
    for seed in ("1", "2"):
        out = tmp_path / f"run{seed}"
        assert main(["learn", "--data", str(data), "--iterations", "3000", "--seed", seed,
                     "--dot", "--out-dir", str(out)]) == 0
        runs.append(out)
        for f in ("maxdag.csv", "trace.csv", "samples.npz", "run_meta.json", "maxdag.dot"):
            assert (out / f).exists()
    meta = json.loads((runs[0] / "run_meta.json").read_text())
    assert meta["seed"] == 1 and meta["saved_states"] == 1001 and meta["iterations"] == 3000
    s = str(runs[0] / "samples.npz")
    assert main(["analyze", "edgep", "--samples", s, "--out", str(tmp_path / "e.csv")]) == 0
    post = pd.read_csv(tmp_path / "e.csv", index_col=0)
    assert post.shape == (6, 6) and ((post.values >= 0) & (post.values <= 1)).all()
    assert main(["analyze", "modelp", "--samples", s, "-p", "0.5,0.9",
                 "--out-dir", str(tmp_path / "m")]) == 0
    assert (tmp_path / "m" / "consensus_p0.9.csv").exists()
    assert main(["analyze", "trace", "--samples", s, "--out", str(tmp_path / "t.csv")]) == 0
    assert main(["analyze", "samplecomp", "--samples", s, "--truth", str(truth),
                 "--out", str(tmp_path / "sc.csv")]) == 0
    assert list(pd.read_csv(tmp_path / "sc.csv")["p"]) == [0.5, 0.7, 0.9, 0.95]
    code = main(["analyze", "concord", "--samples", s, str(runs[1] / "samples.npz"),
                 "--out", str(tmp_path / "c.csv")])
    assert code in (0, 4)
    assert main(["analyze", "concord", "--samples", s, s, "--out", str(tmp_path / "c2.csv")]) == 0


def test_learn_is_reproducible(simulated, tmp_path):
    args = ["learn", "--data", str(simulated / "data.csv"), "--iterations", "1000", "--seed", "9"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "trace.csv").read_text() == (tmp_path / "b" / "trace.csv").read_text()


def test_learn_iterative_and_itercomp(simulated, tmp_path):
    out = tmp_path / "it"
    assert main(["learn", "--data", str(simulated / "data.csv"), "--method", "iterative", "--map",
                 "--iterations", "1000", "--seed", "1", "--out-dir", str(out)]) == 0
    for f in ("space_final.csv", "rounds.npz", "iterations.csv", "summary.txt"):
        assert (out / f).exists()
    assert main(["analyze", "itercomp", "--rounds", str(out / "rounds.npz"),
                 "--truth", str(simulated / "truth.csv"), "--out", str(tmp_path / "ic.csv")]) == 0
    df = pd.read_csv(tmp_path / "ic.csv")
    assert {"iteration", "score", "TPR", "SHD"} <= set(df.columns)


def test_multiple_chains(simulated, tmp_path):
    assert main(["learn", "--data", str(simulated / "data.csv"), "--iterations", "500", "--chains", "2",
                 "--seed", "4", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "chain1" / "samples.npz").exists() and (tmp_path / "chain2" / "samples.npz").exists()


def test_dbn_cli(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--nodes", "3", "--rows", "100", "--dbn-static", "1", "--dbn-slices", "3",
                 "--seed", "0", "--out-dir", str(sim)]) == 0
    out = tmp_path / "fit"
    assert main(["learn", "--data", str(sim / "data.csv"), "--dbn-static", "1", "--dbn-slices", "3",
                 "--iterations", "500", "--seed", "0", "--out-dir", str(out)]) == 0
    tr, labels = read_adjacency(out / "transition.csv")
    assert labels[1].startswith("lag.") and not tr[:, :4].any()


def test_penalty_cli(tmp_path):
    (tmp_path / "i.tsv").write_text("a\tb\n")
    assert main(["penalty-from-interactions", "--interactions", str(tmp_path / "i.tsv"),
                 "--labels", "a,b,c", "--out", str(tmp_path / "p.csv")]) == 0
    pen, _ = read_adjacency(tmp_path / "p.csv")
    assert pen.shape == (3, 3)


@pytest.mark.parametrize("argv, code", [
    (["learn", "--data", "x.csv", "--method", "partition", "--map", "--out-dir", "o"], 1),
    (["learn", "--data", "missing.csv", "--out-dir", "o"], 2),
])
def test_exit_codes(tmp_path, monkeypatch, argv, code):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == code


@pytest.mark.parametrize("argv", [["learn"], ["bogus"], ["learn", "--data", "x", "--out-dir", "o",
                                                          "--iterations", "many"]])
def test_parser_errors_exit_1(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "bnmcmc", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip().startswith("bnmcmc")
