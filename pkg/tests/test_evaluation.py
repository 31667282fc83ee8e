import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glocalkd.data import DEGREE_ONE_HOT, SynthSpec, synth_corpus
from glocalkd.errors import InputError, InvalidGridAxis, SingleClassInput
from glocalkd.evaluation import (
    DEFAULT_AXES,
    FOLD_HEADER,
    SUMMARY_HEADER,
    ExperimentGrid,
    auc,
    folds_csv,
    load_split_file,
    run_cv,
    run_fixed_split,
    run_grid,
    summary_csv,
    summary_json,
)
from glocalkd.model import TrainConfig

from oracles import pairwise_auc

FAST = TrainConfig(lr=1e-3, batch_size=16, epochs=4, layer_dims=(8, 8, 4))


@pytest.fixture(scope="module")
def small_corpus():
    return synth_corpus(SynthSpec(n_normal=40, n_global=10, feature_kind=DEGREE_ONE_HOT), 0)


labelled_scores = st.integers(2, 60).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(-5, 5).map(float), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda y: 0 < sum(y) < len(y)),
    )
)


class TestAuc:
    def test_perfect(self):
        assert auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0

    def test_all_ties(self):
        assert auc([3.0] * 6, [1, 0, 1, 0, 0, 0]) == 0.5

    def test_single_class(self):
        with pytest.raises(SingleClassInput):
            auc([1.0, 2.0], [0, 0])

    def test_shape_and_label_errors(self):
        with pytest.raises(InputError):
            auc([1.0, 2.0], [0, 1, 1])
        with pytest.raises(InputError):
            auc([1.0, 2.0], [0, 2])

    def test_fifty_random_pairs(self):
        rng = np.random.default_rng(0)
        s = rng.integers(0, 10, 50).astype(float)
        y = np.r_[np.ones(20, int), np.zeros(30, int)]
        rng.shuffle(y)
        assert auc(s, y) == float(pairwise_auc(s, y))

    @given(labelled_scores)
    @settings(max_examples=200, deadline=None)
    def test_matches_pairwise_oracle(self, data):
        s, y = data
        assert auc(s, y) == float(pairwise_auc(s, y))

    @given(labelled_scores)
    @settings(max_examples=100, deadline=None)
    def test_monotone_transform(self, data):
        s, y = data
        s = np.array(s)
        assert auc(np.exp(s) * 3 + 1, y) == auc(s, y)

    @given(labelled_scores)
    @settings(max_examples=100, deadline=None)
    def test_complement(self, data):
        s, y = data
        y = np.array(y)
        assert auc(s, y) + auc(s, 1 - y) == pytest.approx(1.0, abs=1e-15)


class TestRunCv:
    def test_every_graph_scored_once(self):
        ds = synth_corpus(SynthSpec(n_normal=90, n_global=10, feature_kind=DEGREE_ONE_HOT), 1)
        res = run_cv(ds, FAST, k=5, seed=0)
        ids = sorted(i for r in res.reports for i in r.graph_ids)
        assert ids == list(range(100))
        for r in res.reports:
            assert np.all(np.isfinite(r.scores))
            assert r.auc == auc(r.scores, r.labels)
        assert res.mean == pytest.approx(np.mean(res.aucs))
        assert res.std == pytest.approx(np.std(res.aucs, ddof=1))

    def test_training_uses_normals_only(self, small_corpus):
        res = run_cv(small_corpus, FAST, k=5, seed=0)
        assert [r.meta["n_train"] for r in res.reports] == [32] * 5

    def test_single_class_rejected(self):
        ds = synth_corpus(SynthSpec(n_normal=10, n_global=0, feature_kind=DEGREE_ONE_HOT), 0)
        with pytest.raises(SingleClassInput):
            run_cv(ds, FAST)

    def test_separable_corpus(self):
        ds = synth_corpus(SynthSpec(n_normal=180, n_global=20, feature_kind=DEGREE_ONE_HOT), 0)
        cfg = TrainConfig(lr=1e-3, batch_size=32, epochs=40, layer_dims=(32, 32, 16))
        assert run_cv(ds, cfg, k=5, seed=0).mean >= 0.95

    def test_parallel_matches_serial(self, small_corpus):
        a = run_cv(small_corpus, FAST, k=5, seed=2, jobs=1)
        b = run_cv(small_corpus, FAST, k=5, seed=2, jobs=2)
        for x, y in zip(a.reports, b.reports):
            assert x.scores.tobytes() == y.scores.tobytes()


class TestFixedSplit:
    def test_split_file(self, tmp_path, small_corpus):
        lines = [f"{i} {'test' if i % 5 == 0 else 'train'}" for i in range(len(small_corpus))]
        (tmp_path / "split.txt").write_text("# comment\n" + "\n".join(lines) + "\n")
        tr, te = load_split_file(tmp_path / "split.txt", len(small_corpus))
        assert len(te) == 10 and len(tr) == 40
        res = run_fixed_split(small_corpus, tr, te, FAST, repeats=2)
        assert len(res.reports) == 2

    def test_bad_split_line(self, tmp_path):
        (tmp_path / "s.txt").write_text("0 train\n1 validate\n")
        with pytest.raises(InputError, match="s.txt:2"):
            load_split_file(tmp_path / "s.txt")


class TestGrid:
    @pytest.mark.parametrize("kind,value", [
        ("sample_efficiency", 0.0), ("sample_efficiency", 1.5), ("contamination", 0.6),
        ("dim_sweep", 0), ("depth_sweep", -1), ("ablation", "both"), ("dim_sweep", 2.5),
    ])
    def test_invalid_axis(self, kind, value):
        with pytest.raises(InvalidGridAxis, match=repr(value)):
            ExperimentGrid(kind, (value,))

    def test_unknown_kind(self):
        with pytest.raises(InvalidGridAxis):
            ExperimentGrid("tsne")

    def test_default_axes(self):
        assert ExperimentGrid("dim_sweep").axis == (32, 64, 128, 256, 512)
        assert ExperimentGrid("depth_sweep").axis == (1, 2, 3, 5)
        assert ExperimentGrid("sample_efficiency").axis == (0.05, 0.25, 0.5, 0.75, 1.0)
        assert ExperimentGrid("ablation").axis == ("full", "no_node", "no_graph")
        assert DEFAULT_AXES["contamination"][-1] == 0.16

    def test_sample_efficiency_rows(self, small_corpus):
        grid = ExperimentGrid("sample_efficiency", base=FAST)
        rows = run_grid(small_corpus, grid)
        assert [r.axis_value for r in rows] == [0.05, 0.25, 0.5, 0.75, 1.0]
        assert [r.reports[0].meta["n_train"] for r in rows] == [2, 8, 16, 24, 32]

    def test_contamination_injects(self):
        ds = synth_corpus(SynthSpec(n_normal=40, n_global=20, feature_kind=DEGREE_ONE_HOT), 0)
        rows = run_grid(ds, ExperimentGrid("contamination", (0.0, 0.16), base=FAST))
        assert [r.reports[0].meta["injected"] for r in rows] == [0, 7]
        assert [r.reports[0].meta["n_train"] for r in rows] == [32, 39]

    def test_dim_and_depth(self, small_corpus):
        rows = run_grid(small_corpus, ExperimentGrid("dim_sweep", (4, 6), base=FAST, k=2))
        assert [r.reports[0].config["layer_dims"] for r in rows] == [[8, 8, 4], [8, 8, 6]]
        rows = run_grid(small_corpus, ExperimentGrid("depth_sweep", (1, 2), base=FAST, k=2))
        assert [r.reports[0].config["layer_dims"] for r in rows] == [[4], [8, 4]]

    def test_ablation_rows(self, small_corpus):
        rows = run_grid(small_corpus, ExperimentGrid("ablation", base=FAST, k=2))
        terms = [(r.reports[0].config["graph_term"], r.reports[0].config["node_term"]) for r in rows]
        assert terms == [(True, True), (True, False), (False, True)]
        rescored = run_grid(small_corpus, ExperimentGrid("ablation", base=FAST, k=2, retrain=False))
        assert all(r.reports[0].config["graph_term"] and r.reports[0].config["node_term"] for r in rescored)
        # rescoring the full model with both terms reproduces the retrained full row
        assert rescored[0].aucs == rows[0].aucs

    def test_repeats(self, small_corpus):
        rows = run_grid(small_corpus, ExperimentGrid("cv", repeats=2, base=FAST, k=2))
        assert len(rows) == 1 and len(rows[0].aucs) == 4


class TestReports:
    def test_headers_and_determinism(self, small_corpus):
        grid = ExperimentGrid("dim_sweep", (4, 8), base=FAST, k=3)
        a = run_grid(small_corpus, grid)
        b = run_grid(small_corpus, grid)
        fa, fb = folds_csv("dim_sweep", a), folds_csv("dim_sweep", b)
        assert fa == fb
        assert fa.splitlines()[0] == ",".join(FOLD_HEADER)
        assert len(fa.splitlines()) == 1 + 2 * 3
        sa = summary_csv("dim_sweep", a)
        assert sa == summary_csv("dim_sweep", b)
        assert sa.splitlines()[0] == ",".join(SUMMARY_HEADER)
        doc = json.loads(summary_json(grid, a, small_corpus.name))
        assert doc["kind"] == "dim_sweep" and len(doc["rows"]) == 2
        assert summary_json(grid, a, "x") == summary_json(grid, b, "x")
