import json
import math

import numpy as np
import pytest

from semdiv import (
    EmbeddingMatrix,
    assign,
    kmeans_fit,
    load_model,
    pearson,
    read_weight_table,
    semantic_distribution,
    spearman,
    write_embeddings,
)
from semdiv.cli import main, robustness_matrix


def _write_jsonl(path, responses):
    lines = [json.dumps({"id": str(i), "response": r}) for i, r in enumerate(responses)]
    path.write_text("\n".join(lines) + "\n")


def _write_emb(path, data):
    write_embeddings(EmbeddingMatrix(np.asarray(data, dtype=np.float32)), path)


@pytest.fixture
def blobs(tmp_path):
    rng = np.random.default_rng(0)
    centers = np.array([[0.0, 0.0], [8.0, 8.0], [0.0, 8.0]])
    data = np.concatenate(
        [c + 0.3 * rng.standard_normal((20, 2)) for c in centers]
    ).astype(np.float32)
    path = tmp_path / "train.semb"
    _write_emb(path, data)
    return path, data


class TestExitCodes:
    def test_unknown_command(self, capsys):
        assert main(["frobnicate"]) == 1
        capsys.readouterr()

    def test_unknown_flag(self, capsys):
        assert main(["metrics", "--input", "x.jsonl", "--out", "y.json", "--bogus"]) == 1
        capsys.readouterr()

    def test_missing_required_flag(self, capsys):
        assert main(["metrics", "--input", "x.jsonl"]) == 1
        capsys.readouterr()

    def test_missing_input_file(self, tmp_path, capsys):
        code = main(
            ["metrics", "--input", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "o.json")]
        )
        assert code == 2
        assert "data error" in capsys.readouterr().err

    def test_bad_ngrams_list(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        _write_jsonl(corpus, ["hello"])
        code = main(
            ["metrics", "--input", str(corpus), "--ngrams", "1,1", "--out", str(tmp_path / "o.json")]
        )
        assert code == 1
        assert "usage error" in capsys.readouterr().err

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        capsys.readouterr()


class TestMetricsCommand:
    def test_output_values(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        _write_jsonl(corpus, ["a b", "a c"])
        out = tmp_path / "m.json"
        assert main(["metrics", "--input", str(corpus), "--ngrams", "1", "--out", str(out)]) == 0
        capsys.readouterr()
        result = json.loads(out.read_text())
        assert result["dist"]["1"] == 0.75
        assert result["ent"]["1"] == pytest.approx(1.5, abs=1e-12)
        assert result["lf"] is None

    def test_lf_with_train_corpus(self, tmp_path, capsys):
        gen = tmp_path / "g.jsonl"
        train = tmp_path / "t.jsonl"
        _write_jsonl(gen, ["the cat the"])
        _write_jsonl(train, ["the " * 500 + "cat " * 50])
        out = tmp_path / "m.json"
        code = main(
            ["metrics", "--input", str(gen), "--train", str(train),
             "--lf-threshold", "100", "--out", str(out)]
        )
        assert code == 0
        capsys.readouterr()
        assert json.loads(out.read_text())["lf"] == pytest.approx(1 / 3)

    def test_tsv_format_inferred(self, tmp_path, capsys):
        corpus = tmp_path / "c.tsv"
        corpus.write_text("id\tcontext\tresponse\n1\t\thello world\n")
        out = tmp_path / "m.json"
        assert main(["metrics", "--input", str(corpus), "--out", str(out)]) == 0
        capsys.readouterr()
        assert json.loads(out.read_text())["dist"]["1"] == 1.0

    def test_byte_identical_reruns(self, tmp_path, capsys):
        corpus = tmp_path / "c.jsonl"
        _write_jsonl(corpus, ["some tokens here", "more tokens there"])
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["metrics", "--input", str(corpus), "--out", str(a)])
        main(["metrics", "--input", str(corpus), "--out", str(b)])
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()


class TestClusterCommands:
    def test_fit_then_assign(self, tmp_path, blobs, capsys):
        emb_path, data = blobs
        model_path = tmp_path / "m.skmc"
        code = main(
            ["cluster", "fit", "--emb", str(emb_path), "--k", "3", "--out", str(model_path)]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "inertia=" in out

        labels_path = tmp_path / "l.json"
        code = main(
            ["cluster", "assign", "--model", str(model_path), "--emb", str(emb_path),
             "--out", str(labels_path)]
        )
        assert code == 0
        capsys.readouterr()
        result = json.loads(labels_path.read_text())
        assert result["k"] == 3
        expect = assign(load_model(model_path), data.astype(np.float64))
        assert result["labels"] == expect.labels.tolist()

    def test_fit_deterministic_bytes(self, tmp_path, blobs, capsys):
        emb_path, _ = blobs
        a, b = tmp_path / "a.skmc", tmp_path / "b.skmc"
        main(["cluster", "fit", "--emb", str(emb_path), "--k", "3", "--seed", "7", "--out", str(a)])
        main(["cluster", "fit", "--emb", str(emb_path), "--k", "3", "--seed", "7", "--out", str(b)])
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_fit_matches_library(self, tmp_path, blobs, capsys):
        emb_path, data = blobs
        model_path = tmp_path / "m.skmc"
        main(["cluster", "fit", "--emb", str(emb_path), "--k", "3", "--seed", "4",
              "--out", str(model_path)])
        capsys.readouterr()
        expect = kmeans_fit(data.astype(np.float64), k=3, seed=4)
        assert load_model(model_path) == expect

    def test_corrupt_model_exits_two(self, tmp_path, blobs, capsys):
        emb_path, _ = blobs
        bad = tmp_path / "bad.skmc"
        bad.write_bytes(b"not a model")
        code = main(
            ["cluster", "assign", "--model", str(bad), "--emb", str(emb_path),
             "--out", str(tmp_path / "o.json")]
        )
        assert code == 2
        capsys.readouterr()


class TestSementCommand:
    def test_train_emb_route(self, tmp_path, blobs, capsys):
        emb_path, data = blobs
        out = tmp_path / "s.json"
        code = main(
            ["sement", "--test-emb", str(emb_path), "--train-emb", str(emb_path),
             "--k", "3", "--out", str(out)]
        )
        assert code == 0
        capsys.readouterr()
        result = json.loads(out.read_text())
        # three equal blobs, k=3: uniform distribution
        assert result["sem_ent"] == pytest.approx(math.log(3), abs=1e-9)
        assert result["normalized"] == pytest.approx(1.0, abs=1e-9)
        assert result["k"] == 3
        assert result["n"] == 60
        assert len(result["cluster_probs"]) == 3

    def test_model_route_matches_train_route(self, tmp_path, blobs, capsys):
        emb_path, _ = blobs
        model_path = tmp_path / "m.skmc"
        main(["cluster", "fit", "--emb", str(emb_path), "--k", "3", "--out", str(model_path)])
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["sement", "--test-emb", str(emb_path), "--train-emb", str(emb_path),
              "--k", "3", "--out", str(a)])
        main(["sement", "--test-emb", str(emb_path), "--model", str(model_path),
              "--out", str(b)])
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()

    def test_requires_exactly_one_source(self, tmp_path, blobs, capsys):
        emb_path, _ = blobs
        out = tmp_path / "s.json"
        assert main(["sement", "--test-emb", str(emb_path), "--out", str(out)]) == 1
        code = main(
            ["sement", "--test-emb", str(emb_path), "--train-emb", str(emb_path),
             "--model", str(emb_path), "--out", str(out)]
        )
        assert code == 1
        capsys.readouterr()

    def test_plot_writes_svg(self, tmp_path, blobs, capsys):
        emb_path, _ = blobs
        svg = tmp_path / "p.svg"
        main(["sement", "--test-emb", str(emb_path), "--train-emb", str(emb_path),
              "--k", "3", "--plot", str(svg), "--out", str(tmp_path / "s.json")])
        capsys.readouterr()
        text = svg.read_text()
        assert text.startswith("<svg ")
        assert text.count("<rect ") == 3
        assert "uniform" in text


class TestDressWeightsCommand:
    def test_weights_file(self, tmp_path, blobs, capsys):
        emb_path, data = blobs
        corpus = tmp_path / "c.jsonl"
        _write_jsonl(corpus, [f"response {i}" for i in range(len(data))])
        out = tmp_path / "w.jsonl"
        code = main(
            ["dress-weights", "--train", str(corpus), "--train-emb", str(emb_path),
             "--k", "3", "--gamma", "2", "--out", str(out)]
        )
        assert code == 0
        capsys.readouterr()
        table = read_weight_table(out, gamma=2.0, k=3)
        assert len(table) == len(data)
        # three equal blobs: every weight is (1 - 1/3)^2
        np.testing.assert_allclose(table.weights(), (2 / 3) ** 2, atol=1e-12)

    def test_row_mismatch_exits_two(self, tmp_path, blobs, capsys):
        emb_path, _ = blobs
        corpus = tmp_path / "c.jsonl"
        _write_jsonl(corpus, ["only one"])
        code = main(
            ["dress-weights", "--train", str(corpus), "--train-emb", str(emb_path),
             "--k", "3", "--out", str(tmp_path / "w.jsonl")]
        )
        assert code == 2
        assert "rows" in capsys.readouterr().err

    def test_nt_requires_generated_emb(self, tmp_path, blobs, capsys):
        emb_path, data = blobs
        corpus = tmp_path / "c.jsonl"
        _write_jsonl(corpus, [f"r{i}" for i in range(len(data))])
        code = main(
            ["dress-weights", "--train", str(corpus), "--train-emb", str(emb_path),
             "--k", "3", "--nt", "--out", str(tmp_path / "w.jsonl")]
        )
        assert code == 1
        capsys.readouterr()

    def test_nt_flags_generations_in_heads(self, tmp_path, capsys):
        # train: 6 points in cluster A, 2 in cluster B -> A is the head;
        # generations: first row lands in A (flagged), second in B (kept)
        train = np.array(
            [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1], [0.05, 0.0], [0.0, 0.05],
             [9.0, 9.0], [9.1, 9.0]],
            dtype=np.float32,
        )
        gen = np.array([[0.02, 0.02]] * 8, dtype=np.float32)
        gen[1] = [9.05, 9.0]
        emb_path, gen_path = tmp_path / "t.semb", tmp_path / "g.semb"
        _write_emb(emb_path, train)
        _write_emb(gen_path, gen)
        corpus = tmp_path / "c.jsonl"
        _write_jsonl(corpus, [f"r{i}" for i in range(8)])
        out = tmp_path / "w.jsonl"
        code = main(
            ["dress-weights", "--train", str(corpus), "--train-emb", str(emb_path),
             "--k", "2", "--nt", "--generated-emb", str(gen_path), "--out", str(out)]
        )
        assert code == 0
        capsys.readouterr()
        table = read_weight_table(out, k=2)
        flags = [e.nt for e in table.entries]
        assert flags == [True, False] + [True] * 6


class TestSimulateCommand:
    def test_outputs_and_determinism(self, tmp_path, capsys):
        args = ["simulate", "--contexts", "10", "--templates", "16", "--k", "4",
                "--size", "40", "--epochs", "12", "--seed", "3"]
        d1, d2 = tmp_path / "run1", tmp_path / "run2"
        assert main(args + ["--out-dir", str(d1)]) == 0
        assert main(args + ["--out-dir", str(d2)]) == 0
        capsys.readouterr()

        summary = json.loads((d1 / "summary.json").read_text())
        assert set(summary) == {"dataset", "vanilla", "dress"}
        assert set(summary["vanilla"]) == {"final_loss", "final_sem_ent", "final_head_mass"}
        assert summary["dataset"]["size"] == 40

        vanilla = (d1 / "vanilla.csv").read_text().splitlines()
        assert vanilla[0] == "epoch,loss,sem_ent,head_mass"
        assert len(vanilla) == 13

        for name in ("summary.json", "vanilla.csv", "dress.csv"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_plot_flag(self, tmp_path, capsys):
        out_dir = tmp_path / "run"
        main(["simulate", "--contexts", "8", "--templates", "12", "--k", "3",
              "--size", "30", "--epochs", "8", "--plot", "--out-dir", str(out_dir)])
        capsys.readouterr()
        assert (out_dir / "vanilla.svg").read_text().startswith("<svg ")
        assert (out_dir / "dress.svg").read_text().startswith("<svg ")


class TestBtCommand:
    def test_fit_writes_centered_theta(self, tmp_path, capsys):
        ann = tmp_path / "a.jsonl"
        rows = [{"a": "x", "b": "y", "likert": 5}] * 3 + [{"a": "x", "b": "y", "likert": 1}]
        ann.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        out = tmp_path / "theta.json"
        assert main(["bt", "fit", "--annotations", str(ann), "--out", str(out)]) == 0
        capsys.readouterr()
        theta = json.loads(out.read_text())
        assert set(theta) == {"x", "y"}
        assert theta["x"] + theta["y"] == pytest.approx(0.0, abs=1e-9)
        assert theta["x"] - theta["y"] == pytest.approx(math.log(3), abs=1e-9)

    def test_disconnected_exits_two(self, tmp_path, capsys):
        ann = tmp_path / "a.jsonl"
        rows = [
            {"a": "a", "b": "b", "likert": 5}, {"a": "a", "b": "b", "likert": 1},
            {"a": "c", "b": "d", "likert": 5}, {"a": "c", "b": "d", "likert": 1},
        ]
        ann.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        code = main(["bt", "fit", "--annotations", str(ann), "--out", str(tmp_path / "t.json")])
        assert code == 2
        assert "disconnected" in capsys.readouterr().err


class TestCorrelateCommand:
    def test_matches_library(self, tmp_path, capsys):
        rng = np.random.default_rng(5)
        names = [f"s{i}" for i in range(10)]
        x = {n: float(v) for n, v in zip(names, rng.standard_normal(10))}
        y = {n: float(v) for n, v in zip(names, rng.standard_normal(10))}
        xp, yp, out = tmp_path / "x.json", tmp_path / "y.json", tmp_path / "c.json"
        xp.write_text(json.dumps(x))
        yp.write_text(json.dumps(y))
        assert main(["correlate", "--x", str(xp), "--y", str(yp), "--out", str(out)]) == 0
        capsys.readouterr()
        result = json.loads(out.read_text())
        keys = sorted(names)
        xs = [x[k] for k in keys]
        ys = [y[k] for k in keys]
        assert result["pearson"]["r"] == pearson(xs, ys).coefficient
        assert result["spearman"]["rho"] == spearman(xs, ys).coefficient
        assert result["n"] == 10

    def test_key_mismatch_exits_two(self, tmp_path, capsys):
        xp, yp = tmp_path / "x.json", tmp_path / "y.json"
        xp.write_text('{"a": 1, "b": 2, "c": 3}')
        yp.write_text('{"a": 1, "b": 2, "d": 3}')
        code = main(["correlate", "--x", str(xp), "--y", str(yp), "--out", str(tmp_path / "o.json")])
        assert code == 2
        assert "key sets differ" in capsys.readouterr().err


class TestRobustnessCommand:
    def _systems(self, tmp_path):
        rng = np.random.default_rng(1)
        centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])
        train = np.concatenate(
            [c + 0.5 * rng.standard_normal((25, 2)) for c in centers]
        ).astype(np.float32)
        train_path = tmp_path / "train.semb"
        _write_emb(train_path, train)
        paths = []
        for i, frac in enumerate([0.95, 0.6, 0.25]):
            n0 = int(frac * 40)
            comp = np.concatenate([np.zeros(n0, dtype=int), np.arange(40 - n0) % 4])
            pts = centers[comp] + 0.5 * rng.standard_normal((40, 2))
            p = tmp_path / f"sys{i}.semb"
            _write_emb(p, pts.astype(np.float32))
            paths.append(p)
        return train_path, paths

    def test_output_structure(self, tmp_path, capsys):
        train_path, paths = self._systems(tmp_path)
        out = tmp_path / "r.json"
        code = main(
            ["robustness", "--train-emb", str(train_path), "--emb", ",".join(map(str, paths)),
             "--ks", "2,4", "--out", str(out)]
        )
        assert code == 0
        capsys.readouterr()
        result = json.loads(out.read_text())
        assert result["ks"] == [2, 4]
        assert result["systems"] == ["sys0.semb", "sys1.semb", "sys2.semb"]
        assert len(result["sem_ent"]["2"]) == 3
        assert result["spearman"][0][0] == 1.0
        assert result["average_spearman"] is not None

    def test_two_systems_have_no_average(self, tmp_path, capsys):
        train_path, paths = self._systems(tmp_path)
        out = tmp_path / "r.json"
        main(["robustness", "--train-emb", str(train_path),
              "--emb", ",".join(map(str, paths[:2])), "--ks", "2,4", "--out", str(out)])
        capsys.readouterr()
        result = json.loads(out.read_text())
        assert result["average_spearman"] is None
        assert result["spearman"][0][1] is None


class TestRobustnessMatrix:
    def test_diagonal_and_symmetry(self):
        rng = np.random.default_rng(2)
        centers = np.array([[0.0, 0.0], [12.0, 0.0], [0.0, 12.0]])
        train = np.concatenate([c + rng.standard_normal((30, 2)) for c in centers])
        systems = []
        for frac in (0.9, 0.5, 0.2, 0.34):
            n0 = int(frac * 30)
            comp = np.concatenate([np.zeros(n0, dtype=int), np.arange(30 - n0) % 3])
            systems.append(centers[comp] + rng.standard_normal((30, 2)))
        result = robustness_matrix(train, systems, ks=[2, 3, 5], seed=0)
        matrix = result["spearman"]
        for a in range(3):
            assert matrix[a][a] == 1.0
            for b in range(3):
                assert matrix[a][b] == matrix[b][a]
        assert all(len(result["sem_ent"][k]) == 4 for k in (2, 3, 5))
