import csv
import json

import numpy as np
import pytest

from glocalkd import cli
from glocalkd.data import DEGREE_ONE_HOT, GraphDataset, SynthSpec, file_checksum, read_snapshot, synth_corpus, write_snapshot
from glocalkd.evaluation import auc
from glocalkd.model import DistillModel, score_many

SMALL_CFG = "lr = 1e-3\nbatch_size = 16\nepochs = 3\nlayer_dims = 8, 8, 4\n"


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


@pytest.fixture
def toy(tmp_path):
    ds = synth_corpus(SynthSpec(n_normal=10, n_global=0, feature_kind=DEGREE_ONE_HOT), 0)
    path = tmp_path / "toy.snap"
    write_snapshot(ds, path)
    return path


@pytest.fixture
def labelled(tmp_path):
    path = tmp_path / "lab.snap"
    write_snapshot(synth_corpus(SynthSpec(n_normal=40, n_global=10, feature_kind=DEGREE_ONE_HOT), 0), path)
    return path


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL_CFG)
    return p


def read_trace(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestIngest:
    def _bench(self, tmp_path):
        d = tmp_path / "bench"
        d.mkdir()
        (d / "T_A.txt").write_text("1, 2\n2, 1\n3, 4\n4, 3\n4, 5\n5, 4\n")
        (d / "T_graph_indicator.txt").write_text("1\n1\n2\n2\n2\n")
        (d / "T_graph_labels.txt").write_text("0\n1\n")
        (d / "T_node_labels.txt").write_text("0\n1\n1\n0\n2\n")
        return d

    def test_summary_and_determinism(self, tmp_path, capsys):
        d = self._bench(tmp_path)
        before = {p.name: file_checksum(p) for p in d.iterdir()}
        code, out = run(["ingest", d, "--out", tmp_path / "a.snap"], capsys)
        assert code == 0
        assert "2 graphs, mean nodes 2.50, mean edges 1.50, anomaly rate 0.50" in out.out
        run(["ingest", d, "--out", tmp_path / "b.snap"])
        assert (tmp_path / "a.snap").read_bytes() == (tmp_path / "b.snap").read_bytes()
        assert {p.name: file_checksum(p) for p in d.iterdir()} == before
        manifest = json.loads((tmp_path / "a.snap.manifest.json").read_text())
        assert manifest["command"] == "ingest" and manifest["artifacts"]["snapshot"].endswith("a.snap")

    def test_empty_directory(self, tmp_path, capsys):
        (tmp_path / "empty").mkdir()
        code, out = run(["ingest", tmp_path / "empty", "--out", tmp_path / "x.snap"], capsys)
        assert code == 2 and "MissingFile" in out.err

    def test_parse_error_context(self, tmp_path, capsys):
        d = self._bench(tmp_path)
        (d / "T_A.txt").write_text("1, 2\n2, 3\n")
        code, out = run(["ingest", d, "--out", tmp_path / "x.snap"], capsys)
        assert code == 2 and "T_A.txt:2" in out.err


class TestSynth:
    def test_no_anomalies(self, tmp_path, capsys):
        (tmp_path / "s.txt").write_text("n_normal = 20\nn_global = 0\n")
        code, out = run(["synth", tmp_path / "s.txt", "--out", tmp_path / "a.snap"], capsys)
        assert code == 0 and "anomaly rate 0.00" in out.out

    def test_rate_and_bytes(self, tmp_path, capsys):
        (tmp_path / "s.txt").write_text("n_normal = 180\nn_global = 20\nfeature_kind = degree-one-hot\n")
        _, out = run(["synth", tmp_path / "s.txt", "--seed", 4, "--out", tmp_path / "a.snap"], capsys)
        assert "anomaly rate 0.10" in out.out
        run(["synth", tmp_path / "s.txt", "--seed", 4, "--out", tmp_path / "b.snap"])
        assert (tmp_path / "a.snap").read_bytes() == (tmp_path / "b.snap").read_bytes()

    def test_invalid_spec(self, tmp_path, capsys):
        (tmp_path / "s.txt").write_text("noise = -1\n")
        code, out = run(["synth", tmp_path / "s.txt", "--out", tmp_path / "a.snap"], capsys)
        assert code == 2 and "InvalidSpec" in out.err


class TestTrain:
    def test_defaults_trace_rows(self, tmp_path, toy):
        assert run(["train", toy, "--out", tmp_path / "m.json"])[0] == 0
        assert len(read_trace(tmp_path / "m.json.trace.csv")) == 150
        manifest = json.loads((tmp_path / "m.json.manifest.json").read_text())
        assert manifest["config"]["epochs"] == 150 and manifest["config"]["layer_dims"] == [512, 512, 256]
        assert manifest["seeds"] == {"target": 0, "predictor": 1, "shuffle": 2}
        assert manifest["inputs"]["dataset_sha256"] == file_checksum(toy)

    def test_lambda_zero(self, tmp_path, toy):
        (tmp_path / "c.cfg").write_text(SMALL_CFG + "lambda = 0\n")
        run(["train", toy, "--config", tmp_path / "c.cfg", "--out", tmp_path / "m.json"])
        for row in read_trace(tmp_path / "m.json.trace.csv"):
            assert row["objective"] == row["loss_graph"]

    def test_byte_identical_models(self, tmp_path, toy, small_cfg):
        run(["train", toy, "--config", small_cfg, "--out", tmp_path / "a.json"])
        run(["train", toy, "--config", small_cfg, "--out", tmp_path / "b.json"])
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_every_bad_field_listed(self, tmp_path, toy, capsys):
        (tmp_path / "bad.cfg").write_text("lr = -1\nepochs = 0\nbatch_size = x\ncolour = red\n")
        code, out = run(["train", toy, "--config", tmp_path / "bad.cfg", "--out", tmp_path / "m.json"], capsys)
        assert code == 3
        for needle in ("batch_size", "colour"):
            assert needle in out.err
        (tmp_path / "bad2.cfg").write_text("lr = -1\nepochs = 0\n")
        code, out = run(["train", toy, "--config", tmp_path / "bad2.cfg", "--out", tmp_path / "m.json"], capsys)
        assert code == 3 and "lr" in out.err and "epochs" in out.err
        assert not (tmp_path / "m.json").exists()

    def test_env_and_flag_overrides(self, tmp_path, toy, small_cfg, monkeypatch):
        monkeypatch.setenv("GLOCALKD_EPOCHS", "2")
        monkeypatch.setenv("GLOCALKD_SEED_TARGET", "5")
        run(["train", toy, "--config", small_cfg, "--seed-target", 7, "--out", tmp_path / "m.json"])
        assert len(read_trace(tmp_path / "m.json.trace.csv")) == 2
        assert DistillModel.load(tmp_path / "m.json").config.seed_target == 7

    def test_numerical_failure_exit(self, tmp_path, toy, capsys):
        (tmp_path / "huge.cfg").write_text("lr = 1e200\nepochs = 5\nlayer_dims = 8, 4\nbatch_size = 10\n")
        with np.errstate(all="ignore"):
            code, out = run(["train", toy, "--config", tmp_path / "huge.cfg", "--out", tmp_path / "m.json"], capsys)
        assert code == 4 and "NonFinite" in out.err

    def test_manifest_written_first(self, tmp_path, toy, small_cfg, monkeypatch):
        seen = []
        real_save = DistillModel.save

        def spy(self, path):
            seen.append((tmp_path / "m.json.manifest.json").exists())
            real_save(self, path)

        monkeypatch.setattr(DistillModel, "save", spy)
        run(["train", toy, "--config", small_cfg, "--out", tmp_path / "m.json"])
        assert seen == [True]


class TestScore:
    def test_overfit_scores_small(self, tmp_path):
        snap = tmp_path / "tiny.snap"
        write_snapshot(synth_corpus(SynthSpec(n_normal=6, n_global=0, feature_kind=DEGREE_ONE_HOT), 2), snap)
        (tmp_path / "c.cfg").write_text("lr = 1e-3\nbatch_size = 6\nepochs = 2000\nlayer_dims = 32, 32, 16\n")
        run(["train", snap, "--config", tmp_path / "c.cfg", "--out", tmp_path / "m.json"])
        run(["score", tmp_path / "m.json", snap, "--out", tmp_path / "s.csv"])
        rows = list(csv.DictReader(open(tmp_path / "s.csv")))
        assert len(rows) == 6 and all(float(r["score"]) < 1e-2 for r in rows)

    def test_unlabeled_has_no_footer(self, tmp_path, toy, small_cfg):
        ds = read_snapshot(toy)
        unl = tmp_path / "unl.snap"
        write_snapshot(GraphDataset(ds.graphs, None, feature_kind=DEGREE_ONE_HOT), unl)
        run(["train", toy, "--config", small_cfg, "--out", tmp_path / "m.json"])
        assert run(["score", tmp_path / "m.json", unl, "--out", tmp_path / "s.csv"])[0] == 0
        text = (tmp_path / "s.csv").read_text()
        assert text.splitlines()[0] == "graph_id,score" and "auc" not in text

    def test_footer_matches_auc(self, tmp_path, labelled, small_cfg):
        run(["train", labelled, "--config", small_cfg, "--out", tmp_path / "m.json"])
        run(["score", tmp_path / "m.json", labelled, "--out", tmp_path / "s.csv"])
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "graph_id,score,label"
        rows = [line.split(",") for line in lines[1:-1]]
        value = auc([float(r[1]) for r in rows], [int(r[2]) for r in rows])
        assert lines[-1] == f"# auc={value!r}"
        model = DistillModel.load(tmp_path / "m.json")
        np.testing.assert_array_equal([float(r[1]) for r in rows], score_many(model, read_snapshot(labelled).graphs))

    def test_feature_mismatch_exit(self, tmp_path, toy, small_cfg, capsys):
        attr = tmp_path / "attr.snap"
        write_snapshot(synth_corpus(SynthSpec(n_normal=5, n_global=0), 0), attr)
        run(["train", toy, "--config", small_cfg, "--out", tmp_path / "m.json"])
        code, out = run(["score", tmp_path / "m.json", attr, "--out", tmp_path / "s.csv"], capsys)
        assert code == 3 and "FeatureDimMismatch" in out.err
        wide = tmp_path / "wide.snap"
        write_snapshot(synth_corpus(SynthSpec(n_normal=5, n_global=0, feature_dim=3), 0), wide)
        run(["train", attr, "--config", small_cfg, "--out", tmp_path / "a.json"])
        code, out = run(["score", tmp_path / "a.json", wide, "--out", tmp_path / "s.csv"], capsys)
        assert code == 3 and "FeatureDimMismatch" in out.err


class TestExperiment:
    def test_cv_single_row(self, tmp_path, capsys):
        snap = tmp_path / "c.snap"
        write_snapshot(synth_corpus(SynthSpec(n_normal=180, n_global=20, feature_kind=DEGREE_ONE_HOT), 0), snap)
        (tmp_path / "g.txt").write_text("lr = 1e-3\nbatch_size = 32\nepochs = 40\nlayer_dims = 32, 32, 16\n")
        code, _ = run(["experiment", "cv", snap, "--grid", tmp_path / "g.txt", "--out", tmp_path / "o"], capsys)
        assert code == 0
        summary = list(csv.DictReader(open(tmp_path / "o" / "summary.csv")))
        assert len(summary) == 1 and float(summary[0]["mean_auc"]) >= 0.95
        assert len((tmp_path / "o" / "folds.csv").read_text().splitlines()) == 6
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["command"] == "experiment cv"

    @pytest.mark.parametrize("kind,axis", [("dim_sweep", [32, 64, 128, 256, 512]), ("depth_sweep", [1, 2, 3, 5])])
    def test_default_sweep_axes(self, tmp_path, labelled, kind, axis):
        (tmp_path / "g.txt").write_text("epochs = 1\nk = 2\n")
        assert run(["experiment", kind, labelled, "--grid", tmp_path / "g.txt", "--out", tmp_path / "o"])[0] == 0
        summary = list(csv.DictReader(open(tmp_path / "o" / "summary.csv")))
        assert [int(r["axis_value"]) for r in summary] == axis

    def test_bad_axis_named(self, tmp_path, labelled, capsys):
        (tmp_path / "g.txt").write_text("axis = 1, 0\n")
        code, out = run(["experiment", "depth_sweep", labelled, "--grid", tmp_path / "g.txt", "--out", tmp_path / "o"], capsys)
        assert code == 3 and "InvalidGridAxis" in out.err and "0" in out.err

    def test_reports_byte_identical(self, tmp_path, labelled, small_cfg):
        for name in ("a", "b"):
            run(["experiment", "ablation", labelled, "--config", small_cfg, "--jobs", 2, "--out", tmp_path / name])
        # manifests differ only in the artifact paths they record
        for f in ("folds.csv", "summary.csv", "summary.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
