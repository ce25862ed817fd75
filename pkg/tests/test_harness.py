import math
import warnings

import numpy as np
import pytest

from reebgw.graph import ScalarGraph, random_graph, write_graph
from reebgw.gw import SolverOpts
from reebgw.harness import (SWEEP_POWERS, SWEEP_RESOLUTIONS, SWEEP_SIGMAS, Corpus, CorpusError,
                            EvalConfig, FeatureCache, SweepCell, ablation_run, best_cell,
                            knn_recall, load_corpus, null_recall, pairwise_matrix,
                            stability_experiment, sweep, synthetic_corpus)
from reebgw.mapper import MapperParams, MapperWarning
from reebgw.metrics import MetricKind
from reebgw.pimage import PIParams


def small_corpus(n_per_class=3, seed=0):
    rng = np.random.default_rng(seed)
    graphs, labels = [], []
    for c, (nodes, extra) in enumerate([(6, 0), (9, 3)]):
        for _ in range(n_per_class):
            graphs.append(random_graph(rng, nodes, extra))
            labels.append(f"class{c}")
    return Corpus([f"g{i:02d}.json" for i in range(len(graphs))], graphs, labels)


# ---------------------------------------------------------------------- recall

def test_recall_single_label():
    D = np.random.default_rng(0).uniform(size=(6, 6))
    assert knn_recall(D + D.T, ["a"] * 6, [1, 3, 5]) == {1: 1.0, 3: 1.0, 5: 1.0}


def test_recall_separated_clusters():
    D = np.ones((6, 6)) * 10
    D[:3, :3] = D[3:, 3:] = 1
    np.fill_diagonal(D, 0)
    assert knn_recall(D, list("aaabbb"), [1]) == {1: 1.0}


def test_recall_ties_broken_by_index():
    D = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]], dtype=float)
    # on a tie every query looks at the lowest index first
    assert knn_recall(D, ["x", "y", "x"], [1]) == {1: 1 / 3}
    assert knn_recall(D, ["x", "x", "y"], [1]) == {1: 2 / 3}


def test_recall_errors():
    with pytest.raises(ValueError, match="k=3"):
        knn_recall(np.zeros((3, 3)), list("abc"), [3])
    with pytest.raises(ValueError, match="labels"):
        knn_recall(np.zeros((3, 3)), list("ab"), [1])


def test_null_model_matches_monte_carlo():
    rng = np.random.default_rng(0)
    n, classes, k = 50, 10, 5
    labels = np.repeat(np.arange(classes), n // classes)
    vals = []
    for _ in range(200):
        M = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        M[iu] = rng.permutation(len(iu[0])) + 1.0
        vals.append(knn_recall(M + M.T, labels, [k])[k])
    expected = null_recall(n, n // classes, k)
    assert expected == pytest.approx(1 - math.comb(45, 5) / math.comb(49, 5))
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(np.mean(vals) - expected) <= 3 * se


# -------------------------------------------------------------------- pairwise

def test_pairwise_three_graphs():
    corpus = small_corpus(n_per_class=2)
    corpus = Corpus(corpus.names[:3], corpus.graphs[:3], corpus.labels[:3])
    res = pairwise_matrix(corpus, EvalConfig(measure="uniform"))
    M = res.matrix.values
    assert M.shape == (3, 3) and res.solver_calls == 3
    assert np.array_equal(M, M.T) and np.all(np.diag(M) == 0)
    assert len(res.pair_seconds) == 3


def test_identical_graphs_are_at_zero():
    g = random_graph(np.random.default_rng(1), 10, 3)
    res = pairwise_matrix(Corpus(["a.json", "b.json"], [g, g]), EvalConfig())
    assert res.matrix.values[0, 1] <= 1e-8


def test_pairwise_thread_independent():
    corpus = small_corpus()
    config = EvalConfig(solver=SolverOpts(restarts=3))
    a = pairwise_matrix(corpus, config).matrix.to_csv()
    b = pairwise_matrix(corpus, EvalConfig(solver=SolverOpts(restarts=3), threads=4)).matrix.to_csv()
    assert a == b


def test_pi_fallback_to_uniform():
    single = ScalarGraph.from_values({"a": 1.0})
    g = random_graph(np.random.default_rng(2), 5, 1)
    corpus = Corpus(["a.json", "b.json"], [single, g])
    assert pairwise_matrix(corpus, EvalConfig()).matrix.values[0, 1] >= 0
    with pytest.raises(ValueError):
        pairwise_matrix(corpus, EvalConfig(measure_fallback="error"))


def test_load_corpus(tmp_path):
    corpus = small_corpus(2)
    for name, g in zip(corpus.names, corpus.graphs):
        write_graph(g, tmp_path / name)
    (tmp_path / "labels.csv").write_text("file,label\n" + "".join(
        f"{n},{lab}\n" for n, lab in zip(corpus.names, corpus.labels)))
    loaded = load_corpus(tmp_path, tmp_path / "labels.csv")
    assert loaded.names == corpus.names and loaded.labels == corpus.labels
    assert all(a == b for a, b in zip(loaded.graphs, corpus.graphs))
    (tmp_path / "zz_bad.json").write_text('{"nodes":[{"id":"a","f":0},{"id":"b","f":1}],"edges":[]}')
    with pytest.raises(CorpusError, match="zz_bad.json"):
        load_corpus(tmp_path)


def test_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(k=(0,))
    with pytest.raises(ValueError):
        EvalConfig(metric="nonsense")


# -------------------------------------------------------------------- ablation

def test_ablation_shares_matrices():
    corpus = small_corpus()
    rows, cache = ablation_run(corpus, ["sym-reeb-radius"], ["pi", "uniform"], ks=(1, 2))
    assert [(r.metric, r.measure) for r in rows] == [("sym-reeb-radius", "pi"),
                                                     ("sym-reeb-radius", "uniform")]
    # the uniform row reuses every distance matrix built for the pi row
    assert cache.misses["matrix"] == len(corpus)
    assert cache.hits["matrix"] == len(corpus)
    assert all(r.error is None for r in rows)


def test_ablation_records_errors_per_cell():
    corpus = small_corpus()
    rows, _ = ablation_run(corpus, ["sym-reeb-radius"], ["uniform", "bogus"], ks=(1,))
    assert rows[0].error is None and rows[1].error and rows[1].recall is None


def test_feature_cache_accounting():
    cache = FeatureCache()
    calls = []
    for _ in range(3):
        cache.get("x", (1,), lambda: calls.append(1) or 5)
    assert calls == [1] and cache.hits["x"] == 2 and cache.misses["x"] == 1


# ----------------------------------------------------------------------- sweep

def test_sweep_grid_shape():
    assert len(SWEEP_SIGMAS) * len(SWEEP_RESOLUTIONS) * len(SWEEP_POWERS) == 144
    corpus = small_corpus()
    cells, best = sweep(corpus, sigmas=[0.0, 0.5], resolutions=[10, 20], powers=[1.0], k=1)
    assert len(cells) == 4 and best in cells
    assert cells[0].sigma == 0.0 and cells[0].recall is not None


def test_best_cell_tie_rule():
    cells = [SweepCell(0.1, 50, 1.0, 0.9), SweepCell(0.1, 10, 1.0, 0.9), SweepCell(0.5, 20, 1.0, 0.8)]
    assert best_cell(cells).resolution == 10
    assert best_cell([SweepCell(1.0, 20, 0.0, 0.3)]).resolution == 20
    assert best_cell([SweepCell(1.0, 20, 0.0, None, "boom"), SweepCell(2.0, 50, 0.0, 0.1)]).sigma == 2.0


# ------------------------------------------------------------------- stability

def test_stability_zero_noise():
    g = random_graph(np.random.default_rng(3), 10, 2)
    rep = stability_experiment(g, [0.0], trials=3, pi=PIParams(sigma=0.5))
    lv = rep.levels[0]
    assert all(lv.max[s] == 0.0 for s in ("metric_dev", "bottleneck", "tv", "rgw"))
    assert rep.ok


def test_stability_small_run():
    g = random_graph(np.random.default_rng(4), 12, 2)
    rep = stability_experiment(g, [1e-3, 1e-2, 1e-1], trials=10, pi=PIParams(sigma=0.5))
    assert rep.checks["metric_dev_hard"] and rep.checks["bottleneck_hard"]
    for lv in rep.levels:
        assert all(d <= lv.eps for d in lv.max_delta)
    csv = rep.to_csv().splitlines()
    assert len(csv) == 4 and csv[0].startswith("eps,trials")


def test_stability_rejects_bad_levels():
    g = random_graph(np.random.default_rng(4), 5, 0)
    with pytest.raises(ValueError):
        stability_experiment(g, [0.1, 0.01])


def test_synthetic_corpus_small():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MapperWarning)
        corpus = synthetic_corpus(n_per_class=2, n_points=256,
                                  mapper=MapperParams(sample_n=None, cluster_eps=0.7))
    assert len(corpus) == 6 and corpus.labels == ["sphere"] * 2 + ["torus"] * 2 + ["double-torus"] * 2
    assert corpus.names[2] == "torus_00.json"
    assert MetricKind("sym-reeb-radius") is MetricKind.SYM_REEB_RADIUS
