"""Corpus-level evaluation: pairwise distances, k-NN recall, ablations, sweeps
and perturbation-stability experiments."""

from __future__ import annotations

import csv
import io
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import SHAPES, GraphError, ScalarGraph, read_graph, synth_shapes, validate
from .gw import SolverOpts, solve_rgw
from .mapper import MapperParams, build_mapper
from .metrics import DistanceMatrix, MetricKind, distance_matrix
from .persistence import ExtendedDiagram, bottleneck_distance, extended_persistence, pairing
from .pimage import (SIGMA_FLOOR, MeasureError, NodeMeasure, PIParams, auto_bounds,
                     baseline_measure, pi_measure, total_variation, union_bounds)

log = logging.getLogger(__name__)

SWEEP_SIGMAS = (0.0, 0.01, 0.02, 0.05, 0.1, 0.5, 1.0, 2.0)
SWEEP_RESOLUTIONS = (10, 20, 50)
SWEEP_POWERS = (0.0, 0.1, 0.5, 1.0, 1.5, 2.0)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    metric: MetricKind = MetricKind.SYM_REEB_RADIUS
    measure: str = "pi"
    pi: PIParams = PIParams()
    solver: SolverOpts = SolverOpts()
    k: tuple[int, ...] = (1, 5, 10)
    threads: int = 1
    seed: int = 0
    corpus_bounds: bool = True  # one PI grid for the whole corpus
    measure_fallback: str = "uniform"  # or "error"

    def __post_init__(self):
        object.__setattr__(self, "metric", MetricKind(self.metric))
        if any(k < 1 for k in self.k):
            raise ValueError("k values must be >= 1")
        if self.measure_fallback not in ("uniform", "error"):
            raise ValueError("measure_fallback must be 'uniform' or 'error'")


@dataclass
class Corpus:
    names: list[str]
    graphs: list[ScalarGraph]
    labels: list[str] | None = None

    def __len__(self) -> int:
        return len(self.graphs)


def load_corpus(directory: str | Path, labels_csv: str | Path | None = None) -> Corpus:
    """All ``*.json`` graphs of a directory in filename order; the first
    graph failing validation aborts with its filename."""
    directory = Path(directory)
    files = sorted(directory.glob("*.json"))
    if len(files) < 2:
        raise CorpusError(f"{directory}: need at least 2 graph files, found {len(files)}")
    names, graphs = [], []
    for path in files:
        try:
            g = read_graph(path)
        except Exception as exc:  # parse or schema error
            raise CorpusError(f"{path.name}: {exc}") from exc
        errors = validate(g).errors
        if errors:
            raise CorpusError(f"{path.name}: {'; '.join(errors)}")
        names.append(path.name)
        graphs.append(g)
    labels = read_labels(labels_csv, names) if labels_csv else None
    return Corpus(names, graphs, labels)


def read_labels(path: str | Path, names: Sequence[str]) -> list[str]:
    with open(path, newline="") as fh:
        table = {row["file"].strip(): row["label"].strip() for row in csv.DictReader(fh)}
    missing = [n for n in names if n not in table and Path(n).stem not in table]
    if missing:
        raise CorpusError(f"labels missing for: {', '.join(missing)}")
    return [table.get(n, table.get(Path(n).stem)) for n in names]


def synthetic_corpus(n_per_class: int = 10, jitter: float = 0.02, seed: int = 0,
                     mapper: MapperParams = MapperParams(), n_points: int = 1024,
                     shapes: Sequence[str] = SHAPES) -> Corpus:
    """Mapper graphs of sampled spheres, tori and double tori."""
    names, graphs, labels = [], [], []
    for c, shape in enumerate(shapes):
        for i in range(n_per_class):
            s = seed * 1_000_003 + 1000 * c + i
            cloud = synth_shapes(shape, n_points, jitter, seed=s)
            graphs.append(build_mapper(cloud, mapper, seed=s))
            names.append(f"{shape}_{i:02d}.json")
            labels.append(shape)
    return Corpus(names, graphs, labels)


# ----------------------------------------------------------------------- cache

class FeatureCache:
    """Per-graph matrices, diagrams and measures shared across configurations."""

    def __init__(self):
        self._store: dict[tuple, object] = {}
        self._lock = threading.Lock()
        self.hits: dict[str, int] = {}
        self.misses: dict[str, int] = {}

    def get(self, kind: str, key: tuple, build):
        full = (kind,) + key
        with self._lock:
            if full in self._store:
                self.hits[kind] = self.hits.get(kind, 0) + 1
                return self._store[full]
        value = build()
        with self._lock:
            self._store.setdefault(full, value)
            self.misses[kind] = self.misses.get(kind, 0) + 1
            return self._store[full]


def _matrices(corpus: Corpus, metric: MetricKind, cache: FeatureCache) -> list[DistanceMatrix]:
    return [cache.get("matrix", (i, metric.value), lambda g=g: distance_matrix(g, metric))
            for i, g in enumerate(corpus.graphs)]


def _diagrams(corpus: Corpus, cache: FeatureCache) -> list[ExtendedDiagram]:
    return [cache.get("diagram", (i,), lambda g=g: extended_persistence(g))
            for i, g in enumerate(corpus.graphs)]


def corpus_pi_params(diagrams: Sequence[ExtendedDiagram], params: PIParams) -> PIParams:
    if params.bounds is not None:
        return params
    return params.with_bounds(union_bounds(auto_bounds(d, params.sigma) for d in diagrams))


def _measures(corpus: Corpus, config: EvalConfig, cache: FeatureCache) -> list[NodeMeasure]:
    kind = config.measure
    needs_diagram = kind in ("pi", "lifespan")
    diagrams = _diagrams(corpus, cache) if needs_diagram else [None] * len(corpus)
    params = config.pi
    if kind == "pi" and config.corpus_bounds:
        params = corpus_pi_params(diagrams, params)

    def build(g, d):
        try:
            if kind == "pi":
                return pi_measure(g, d, params)
            return baseline_measure(g, kind, d)
        except MeasureError:
            if config.measure_fallback == "error":
                raise
            log.warning("%s measure undefined; falling back to uniform", kind)
            return baseline_measure(g, "uniform")

    key_params = (params.sigma, params.resolution, params.weight_power, params.bounds) if kind == "pi" else ()
    return [cache.get("measure", (i, kind) + key_params, lambda g=g, d=d: build(g, d))
            for i, (g, d) in enumerate(zip(corpus.graphs, diagrams))]


# -------------------------------------------------------------------- pairwise

@dataclass
class PairwiseResult:
    matrix: DistanceMatrix
    pair_seconds: dict[tuple[int, int], float] = field(default_factory=dict)
    total_seconds: float = 0.0
    solver_calls: int = 0


def pairwise_matrix(corpus: Corpus, config: EvalConfig = EvalConfig(),
                    cache: FeatureCache | None = None) -> PairwiseResult:
    """Symmetric matrix of RGW distances; only the upper triangle is solved."""
    cache = cache or FeatureCache()
    mats = _matrices(corpus, config.metric, cache)
    mus = _measures(corpus, config, cache)
    n = len(corpus)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    opts = replace(config.solver, threads=1)

    def solve(pair):
        i, j = pair
        t0 = time.perf_counter()
        res = solve_rgw(mats[i], mats[j], mus[i], mus[j], opts=opts)
        dt = time.perf_counter() - t0
        log.debug("pair %s-%s: %.4fs", corpus.names[i], corpus.names[j], dt)
        return res.distance, dt

    t0 = time.perf_counter()
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(solve, pairs))
    else:
        results = [solve(p) for p in pairs]
    total = time.perf_counter() - t0
    values = np.zeros((n, n))
    timing = {}
    for (i, j), (d, dt) in zip(pairs, results):
        values[i, j] = values[j, i] = d
        timing[(i, j)] = dt
    return PairwiseResult(DistanceMatrix(tuple(corpus.names), values), timing, total, len(pairs))


# ---------------------------------------------------------------------- recall

def knn_recall(matrix: DistanceMatrix | np.ndarray, labels: Sequence, ks: Sequence[int]) -> dict[int, float]:
    """Fraction of queries with a same-label item among their k nearest
    neighbours (self excluded, ties broken by index)."""
    D = matrix.values if isinstance(matrix, DistanceMatrix) else np.asarray(matrix, dtype=float)
    n = len(D)
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} items")
    labels = np.asarray(labels)
    for k in ks:
        if k < 1 or k >= n:
            raise ValueError(f"k={k} must satisfy 1 <= k < corpus size {n}")
    kmax = max(ks)
    hits = {k: 0 for k in ks}
    for q in range(n):
        order = np.lexsort((np.arange(n), D[q]))
        order = order[order != q][:kmax]
        same = labels[order] == labels[q]
        first = int(np.argmax(same)) if same.any() else kmax
        for k in ks:
            hits[k] += first < k
    return {k: hits[k] / n for k in ks}


def null_recall(n_items: int, class_size: int, k: int) -> float:
    """Expected recall@k when neighbours are a uniformly random ordering."""
    others = n_items - 1
    same = class_size - 1
    return 1.0 - math.comb(others - same, k) / math.comb(others, k)


# -------------------------------------------------------------------- ablation

@dataclass
class AblationRow:
    metric: str
    measure: str
    recall: dict[int, float] | None
    error: str | None = None


def ablation_run(corpus: Corpus, metrics: Sequence[MetricKind | str], measures: Sequence[str],
                 ks: Sequence[int] = (20,), base: EvalConfig = EvalConfig(),
                 cache: FeatureCache | None = None) -> tuple[list[AblationRow], FeatureCache]:
    if corpus.labels is None:
        raise CorpusError("ablation needs labels")
    cache = cache or FeatureCache()
    rows = []
    for metric in metrics:
        for measure in measures:
            cfg = replace(base, metric=MetricKind(metric), measure=measure)
            try:
                res = pairwise_matrix(corpus, cfg, cache)
                rows.append(AblationRow(MetricKind(metric).value, measure,
                                        knn_recall(res.matrix, corpus.labels, ks)))
            except Exception as exc:  # recorded per cell
                rows.append(AblationRow(MetricKind(metric).value, measure, None, str(exc)))
    return rows, cache


# ----------------------------------------------------------------------- sweep

@dataclass
class SweepCell:
    sigma: float
    resolution: int
    weight_power: float
    recall: float | None
    error: str | None = None


def best_cell(cells: Sequence[SweepCell]) -> SweepCell:
    """Highest recall; ties go to the smallest resolution, then grid order."""
    ok = [(i, c) for i, c in enumerate(cells) if c.recall is not None]
    if not ok:
        raise ValueError("no successful sweep cell")
    return min(ok, key=lambda ic: (-ic[1].recall, ic[1].resolution, ic[0]))[1]


def sweep(corpus: Corpus, sigmas: Sequence[float] = SWEEP_SIGMAS,
          resolutions: Sequence[int] = SWEEP_RESOLUTIONS, powers: Sequence[float] = SWEEP_POWERS,
          k: int = 20, base: EvalConfig = EvalConfig(),
          cache: FeatureCache | None = None) -> tuple[list[SweepCell], SweepCell]:
    """recall@k over the sigma x resolution x weight-power grid (sigma = 0
    stands for the smallest admissible bandwidth)."""
    if corpus.labels is None:
        raise CorpusError("sweep needs labels")
    cache = cache or FeatureCache()
    cells = []
    for s in sigmas:
        for r in resolutions:
            for w in powers:
                sigma = max(float(s), SIGMA_FLOOR)
                try:
                    cfg = replace(base, measure="pi", pi=PIParams(sigma, int(r), float(w)),
                                  measure_fallback="error")
                    res = pairwise_matrix(corpus, cfg, cache)
                    cells.append(SweepCell(float(s), int(r), float(w),
                                           knn_recall(res.matrix, corpus.labels, [k])[k]))
                except Exception as exc:
                    cells.append(SweepCell(float(s), int(r), float(w), None, str(exc)))
    return cells, best_cell(cells)


# ------------------------------------------------------------------- stability

STAT_NAMES = ("metric_dev", "bottleneck", "tv", "rgw")
BOUND_SLACK = 1e-12


@dataclass
class LevelStats:
    eps: float
    trials: int
    skipped_tv: int
    max: dict[str, float]
    median: dict[str, float]
    hard_violations: dict[str, int]
    samples: dict[str, list[float]] = field(repr=False, default_factory=dict)
    max_delta: list[float] = field(repr=False, default_factory=list)


@dataclass
class StabilityReport:
    levels: list[LevelStats]
    M_emp: float
    C_emp: float
    checks: dict[str, bool]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["eps", "trials", "skipped_tv"]
        cols += [f"{s}_{a}" for s in STAT_NAMES for a in ("median", "max")]
        cols += ["metric_dev_violations", "bottleneck_violations"]
        buf.write(",".join(cols) + "\n")
        for lv in self.levels:
            row = [lv.eps, lv.trials, lv.skipped_tv]
            row += [x for s in STAT_NAMES for x in (lv.median[s], lv.max[s])]
            row += [lv.hard_violations["metric_dev"], lv.hard_violations["bottleneck"]]
            buf.write(",".join(format(float(x), ".17g") if isinstance(x, float) else str(x)
                               for x in row) + "\n")
        return buf.getvalue()


def _nanmedian(xs):
    xs = [x for x in xs if not math.isnan(x)]
    return float(np.median(xs)) if xs else float("nan")


def _nanmax(xs):
    xs = [x for x in xs if not math.isnan(x)]
    return float(max(xs)) if xs else float("nan")


def stability_experiment(graph: ScalarGraph, levels: Sequence[float], trials: int = 100,
                         seed: int = 0, pi: PIParams = PIParams(),
                         solver: SolverOpts = SolverOpts(restarts=4),
                         stats: Sequence[str] = STAT_NAMES) -> StabilityReport:
    """Perturb f by delta ~ U[-eps, eps] per node and track how far the
    metric, diagram, measure and distance move.

    Hard bounds are checked in every trial: sym-Reeb-radius entries move by
    at most 2 max|delta| and the bottleneck distance by at most max|delta|.
    Soft bounds: fitting C at the largest level as the max of
    stat / eps^a over its trials (a = 1 for d_TV, 1/2 for RGW_2), every
    level's median must stay below C eps^a, and medians must shrink with eps.
    The measure test is skipped for trials whose persistence pairing differs
    from the unperturbed one.
    """
    errors = validate(graph).errors
    if errors:
        raise GraphError("; ".join(errors))
    levels = [float(e) for e in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])) or (levels and levels[0] < 0):
        raise ValueError("noise levels must be nonnegative and strictly increasing")
    stats = tuple(stats)
    rng = np.random.default_rng(seed)
    f0 = graph.f
    D0 = distance_matrix(graph).values
    dg0 = extended_persistence(graph)
    pairs0 = pairing(dg0)
    eps_max = levels[-1] if levels else 0.0
    b = auto_bounds(dg0, pi.sigma)
    # grid fixed for all trials, wide enough for the largest perturbation
    params = pi.with_bounds((b[0] - eps_max, b[1] + eps_max, b[2], b[3] + 2 * eps_max))
    mu0 = pi_measure(graph, dg0, params) if {"tv", "rgw"} & set(stats) else None

    out = []
    for eps in levels:
        samples = {s: [] for s in STAT_NAMES}
        viol = {"metric_dev": 0, "bottleneck": 0}
        skipped = 0
        mds = []
        for _ in range(trials):
            delta = rng.uniform(-eps, eps, graph.n_nodes) if eps > 0 else np.zeros(graph.n_nodes)
            m = float(np.abs(delta).max()) if len(delta) else 0.0
            mds.append(m)
            g1 = graph.with_values(f0 + delta)
            if "metric_dev" in stats:
                D1 = distance_matrix(g1).values
                dev = float(np.abs(D1 - D0).max())
                samples["metric_dev"].append(dev)
                viol["metric_dev"] += dev > 2 * m + BOUND_SLACK
            need_dg = bool({"bottleneck", "tv", "rgw"} & set(stats))
            dg1 = extended_persistence(g1) if need_dg else None
            if "bottleneck" in stats:
                db = bottleneck_distance(dg0, dg1)
                samples["bottleneck"].append(db)
                viol["bottleneck"] += db > m + BOUND_SLACK
            mu1 = pi_measure(g1, dg1, params) if {"tv", "rgw"} & set(stats) else None
            if "tv" in stats:
                if pairing(dg1) != pairs0:
                    skipped += 1
                    samples["tv"].append(float("nan"))
                else:
                    samples["tv"].append(total_variation(mu0, mu1))
            if "rgw" in stats:
                D1 = distance_matrix(g1).values if "metric_dev" not in stats else D1
                samples["rgw"].append(solve_rgw(D0, D1, mu0, mu1, opts=solver).distance)
            for s in STAT_NAMES:
                if s not in stats:
                    samples[s].append(float("nan"))
        if skipped:
            log.info("eps=%g: %d trial(s) re-paired; skipped for the measure test", eps, skipped)
        out.append(LevelStats(eps, trials, skipped,
                              {s: _nanmax(samples[s]) for s in STAT_NAMES},
                              {s: _nanmedian(samples[s]) for s in STAT_NAMES},
                              viol, samples, mds))
    return _fit_report(out, stats)


def _fit_constant(levels: list[LevelStats], stat: str, power: float) -> tuple[float, bool, bool]:
    top = levels[-1]
    if top.eps == 0:
        return 0.0, True, True
    ratios = [v / top.eps ** power for v in top.samples[stat] if not math.isnan(v)]
    C = max(ratios) if ratios else float("nan")
    bound_ok = all(lv.median[stat] <= C * lv.eps ** power + BOUND_SLACK
                   for lv in levels if not math.isnan(lv.median[stat]))
    meds = [lv.median[stat] for lv in levels if not math.isnan(lv.median[stat])]
    monotone = all(b >= a for a, b in zip(meds, meds[1:]))
    return C, bound_ok, monotone


def _fit_report(levels: list[LevelStats], stats: Sequence[str]) -> StabilityReport:
    checks = {}
    if "metric_dev" in stats:
        checks["metric_dev_hard"] = all(lv.hard_violations["metric_dev"] == 0 for lv in levels)
    if "bottleneck" in stats:
        checks["bottleneck_hard"] = all(lv.hard_violations["bottleneck"] == 0 for lv in levels)
    M_emp = C_emp = float("nan")
    if "tv" in stats and levels:
        M_emp, ok, mono = _fit_constant(levels, "tv", 1.0)
        checks["tv_fitted"], checks["tv_monotone"] = ok, mono
    if "rgw" in stats and levels:
        C_emp, ok, mono = _fit_constant(levels, "rgw", 0.5)
        checks["rgw_fitted"], checks["rgw_monotone"] = ok, mono
    return StabilityReport(levels, M_emp, C_emp, checks)
