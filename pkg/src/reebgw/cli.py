"""Command-line interface: ``reebgw <command> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .graph import (GraphError, GraphFormatError, fmt_real, load_graph, load_point_cloud,
                    read_graph, validate, write_graph)
from .gw import SolverOpts, solve_rgw
from .harness import (SWEEP_POWERS, SWEEP_RESOLUTIONS, SWEEP_SIGMAS, CorpusError, EvalConfig,
                      ablation_run, knn_recall, load_corpus, pairwise_matrix,
                      read_labels, stability_experiment, sweep)
from .mapper import MapperParams, build_mapper, mapper_graph_all, split_components
from .metrics import DistanceMatrix, MetricKind, distance_matrix
from .persistence import ExtendedDiagram, extended_persistence
from .pimage import (MEASURE_KINDS, MeasureError, NodeMeasure, PIParams, auto_bounds,
                     baseline_measure, build_pi, pi_measure, union_bounds)

log = logging.getLogger("reebgw")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _real_or(word: str):
    def parse(s: str):
        return s if s == word else float(s)
    return parse


# ------------------------------------------------------------------ arguments

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_pi(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("persistence image")
    g.add_argument("--sigma", type=float, default=PIParams.sigma)
    g.add_argument("--resolution", type=int, default=PIParams.resolution)
    g.add_argument("--weight-power", type=float, default=PIParams.weight_power)
    g.add_argument("--bounds", type=float, nargs=4, metavar=("BMIN", "BMAX", "PMIN", "PMAX"))


def _add_measure(p: argparse.ArgumentParser) -> None:
    p.add_argument("--measure", choices=MEASURE_KINDS, default="pi")
    p.add_argument("--fallback", choices=("uniform", "error"), default="uniform",
                   help="what to do when the PI measure has zero total mass")
    _add_pi(p)


def _add_solver(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--p", type=float, default=2.0)
    g.add_argument("--tol", type=float, default=SolverOpts.tol)
    g.add_argument("--max-iter", type=int, default=SolverOpts.max_iter)
    g.add_argument("--restarts", type=int, default=SolverOpts.restarts)
    g.add_argument("--solver", choices=("cg", "entropic"), default="cg")
    g.add_argument("--epsilon-reg", type=float, default=SolverOpts.epsilon_reg)


def _add_metric(p: argparse.ArgumentParser) -> None:
    p.add_argument("--metric", choices=[m.value for m in MetricKind],
                   default=MetricKind.SYM_REEB_RADIUS.value)


def _pi_params(a) -> PIParams:
    return PIParams(a.sigma, a.resolution, a.weight_power,
                    tuple(a.bounds) if a.bounds else None)


def _solver_opts(a) -> SolverOpts:
    return SolverOpts(p=a.p, tol=a.tol, max_iter=a.max_iter, restarts=a.restarts, seed=a.seed,
                      solver=a.solver, epsilon_reg=a.epsilon_reg, threads=a.threads)


def _config(a) -> EvalConfig:
    return EvalConfig(metric=MetricKind(a.metric), measure=a.measure, pi=_pi_params(a),
                      solver=_solver_opts(a), threads=a.threads, seed=a.seed,
                      measure_fallback=a.fallback)


def _measure_for(graph, kind, params, fallback) -> NodeMeasure:
    diagram = extended_persistence(graph) if kind in ("pi", "lifespan") else None
    try:
        if kind == "pi":
            return pi_measure(graph, diagram, params)
        return baseline_measure(graph, kind, diagram)
    except MeasureError as exc:
        if fallback == "error":
            raise
        log.warning("%s; using the uniform measure", exc)
        return baseline_measure(graph, "uniform")


# ------------------------------------------------------------------- commands

def cmd_graph_validate(a) -> int:
    status = 0
    for path in a.files:
        try:
            g = load_graph(Path(path).read_bytes())
        except (GraphFormatError, OSError) as exc:
            print(f"{path}: error: {exc}")
            status = 1
            continue
        rep = validate(g)
        for e in rep.errors:
            print(f"{path}: error: {e}")
        for w in rep.warnings:
            print(f"{path}: warning: {w}")
        if rep.errors:
            status = 1
        elif not rep.warnings:
            print(f"{path}: ok")
    return status


def cmd_mapper(a) -> int:
    params = MapperParams(ecc_p=a.ecc_p, n_intervals=a.intervals, overlap=a.overlap,
                          cluster_eps=a.cluster_eps, sample_n=a.sample or None,
                          node_value="midpoint" if a.midpoint else "mean")
    cloud = load_point_cloud(a.input)
    if a.keep_all_components:
        parts = split_components(mapper_graph_all(cloud, params, seed=a.seed))
        out = Path(a.out)
        for k, g in enumerate(parts):
            target = out if len(parts) == 1 else out.with_name(f"{out.stem}_c{k}{out.suffix}")
            write_graph(g, target)
            print(f"{target}: {g.n_nodes} nodes, {g.n_edges} edges")
        return 0
    g = build_mapper(cloud, params, seed=a.seed)
    write_graph(g, a.out)
    print(f"{a.out}: {g.n_nodes} nodes, {g.n_edges} edges")
    return 0


def cmd_metric(a) -> int:
    g = read_graph(a.graph)
    _emit(distance_matrix(g, a.kind, threads=a.threads).to_csv(), a.out)
    return 0


def cmd_persistence(a) -> int:
    _emit(extended_persistence(read_graph(a.graph)).to_json(), a.out)
    return 0


def cmd_pimage(a) -> int:
    if a.diagram:
        diagram = ExtendedDiagram.from_json(Path(a.diagram).read_text())
    else:
        diagram = extended_persistence(read_graph(a.graph))
    _emit(build_pi(diagram, _pi_params(a)).to_json(), a.out)
    return 0


def cmd_measure(a) -> int:
    g = read_graph(a.graph)
    _emit(_measure_for(g, a.measure, _pi_params(a), a.fallback).to_json(), a.out)
    return 0


def cmd_rgw(a) -> int:
    if a.matrix1 or a.matrix2:
        if not (a.matrix1 and a.matrix2 and a.measure1 and a.measure2):
            raise ValueError("--matrix1/--matrix2 need --measure1/--measure2")
        d1 = DistanceMatrix.from_csv(Path(a.matrix1).read_text())
        d2 = DistanceMatrix.from_csv(Path(a.matrix2).read_text())
        m1 = NodeMeasure.from_json(Path(a.measure1).read_text())
        m2 = NodeMeasure.from_json(Path(a.measure2).read_text())
        m1 = NodeMeasure(d1.ids, [m1[i] for i in d1.ids])
        m2 = NodeMeasure(d2.ids, [m2[i] for i in d2.ids])
    else:
        if not (a.graph1 and a.graph2):
            raise ValueError("give --graph1/--graph2 or --matrix1/--matrix2")
        g1, g2 = read_graph(a.graph1), read_graph(a.graph2)
        d1, d2 = distance_matrix(g1, a.metric), distance_matrix(g2, a.metric)
        params = _pi_params(a)
        if a.measure == "pi" and params.bounds is None:
            dgs = [extended_persistence(g1), extended_persistence(g2)]
            params = params.with_bounds(union_bounds(auto_bounds(d, params.sigma) for d in dgs))
        m1 = _measure_for(g1, a.measure, params, a.fallback)
        m2 = _measure_for(g2, a.measure, params, a.fallback)
    res = solve_rgw(d1, d2, m1, m2, opts=_solver_opts(a))
    if a.plan_out:
        Path(a.plan_out).write_bytes(res.plan.to_csv())
    _emit(json.dumps({"distance": float(fmt_real(res.distance)), "loss": float(fmt_real(res.loss)),
                      "p": a.p, "converged": res.converged, "restarts": res.restarts,
                      "iterations": res.n_iter}), a.out)
    return 0


def cmd_pairwise(a) -> int:
    corpus = load_corpus(a.graphs)
    res = pairwise_matrix(corpus, _config(a))
    _emit(res.matrix.to_csv(), a.out)
    log.info("total pairwise time %.3fs over %d pairs", res.total_seconds, res.solver_calls)
    return 0


def _recall_csv(rec: dict[int, float]) -> str:
    return "k,recall\n" + "".join(f"{k},{fmt_real(v)}\n" for k, v in sorted(rec.items()))


def cmd_knn_eval(a) -> int:
    D = DistanceMatrix.from_csv(Path(a.matrix).read_text())
    labels = read_labels(a.labels, D.ids)
    _emit(_recall_csv(knn_recall(D, labels, a.k)), a.out)
    return 0


def cmd_ablation(a) -> int:
    corpus = load_corpus(a.graphs, a.labels)
    rows, cache = ablation_run(corpus, a.metrics, a.measures, a.k, _config(a))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "measure"] + [f"recall@{k}" for k in a.k] + ["error"])
    for r in rows:
        vals = [fmt_real(r.recall[k]) for k in a.k] if r.recall else [""] * len(a.k)
        w.writerow([r.metric, r.measure] + vals + [r.error or ""])
    _emit(buf.getvalue(), a.out)
    log.info("cache hits %s misses %s", cache.hits, cache.misses)
    return 1 if any(r.error for r in rows) else 0


def cmd_sweep(a) -> int:
    corpus = load_corpus(a.graphs, a.labels)
    cells, best = sweep(corpus, a.sigmas, a.resolutions, a.powers, a.k, _config(a))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sigma", "resolution", "weight_power", f"recall@{a.k}", "best", "error"])
    for c in cells:
        w.writerow([fmt_real(c.sigma), c.resolution, fmt_real(c.weight_power),
                    "" if c.recall is None else fmt_real(c.recall), int(c is best), c.error or ""])
    _emit(buf.getvalue(), a.out)
    return 1 if any(c.error for c in cells) else 0


def cmd_stability(a) -> int:
    g = read_graph(a.graph)
    rep = stability_experiment(g, a.levels, a.trials, a.seed, _pi_params(a),
                               replace(_solver_opts(a), threads=1))
    _emit(rep.to_csv(), a.out)
    for name, ok in rep.checks.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}", file=sys.stderr)
    print(f"M_emp={rep.M_emp:.6g} C_emp={rep.C_emp:.6g}", file=sys.stderr)
    return 0 if rep.ok else 1


# ---------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reebgw", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph", help="graph utilities")
    gsub = p.add_subparsers(dest="graph_command", required=True)
    v = gsub.add_parser("validate", help="check graph JSON files")
    v.add_argument("files", nargs="+")
    _add_common(v)
    v.set_defaults(func=cmd_graph_validate)

    p = sub.add_parser("mapper", help="Mapper graph of a point cloud")
    p.add_argument("--input", required=True)
    p.add_argument("--ecc-p", type=_real_or("inf"), default=2.0)
    p.add_argument("--intervals", type=int, default=10)
    p.add_argument("--overlap", type=float, default=0.3)
    p.add_argument("--cluster-eps", type=_real_or("auto"), default="auto")
    p.add_argument("--sample", type=int, default=1024, help="0 disables subsampling")
    p.add_argument("--midpoint", action="store_true", help="node value = interval midpoint")
    p.add_argument("--keep-all-components", action="store_true")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_mapper)

    p = sub.add_parser("metric", help="node distance matrix (CSV)")
    p.add_argument("--graph", required=True)
    p.add_argument("--kind", choices=[m.value for m in MetricKind],
                   default=MetricKind.SYM_REEB_RADIUS.value)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("persistence", help="extended persistence diagram (JSON)")
    p.add_argument("--graph", required=True)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_persistence)

    p = sub.add_parser("pimage", help="persistence image (JSON)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph")
    src.add_argument("--diagram")
    _add_pi(p)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_pimage)

    p = sub.add_parser("measure", help="node probability measure (JSON)")
    p.add_argument("--graph", required=True)
    _add_measure(p)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("rgw", help="distance between two graphs")
    p.add_argument("--graph1")
    p.add_argument("--graph2")
    p.add_argument("--matrix1", help="distance-matrix CSV instead of a graph")
    p.add_argument("--matrix2")
    p.add_argument("--measure1", help="measure JSON for --matrix1")
    p.add_argument("--measure2")
    _add_metric(p)
    _add_measure(p)
    _add_solver(p)
    p.add_argument("--plan-out", help="write the transport plan as CSV")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_rgw)

    p = sub.add_parser("pairwise", help="distance matrix over a directory of graphs")
    p.add_argument("--graphs", required=True, help="directory of graph JSON files")
    _add_metric(p)
    _add_measure(p)
    _add_solver(p)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_pairwise)

    p = sub.add_parser("knn-eval", help="recall@k of a distance matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--labels", required=True, help="CSV with columns file,label")
    p.add_argument("--k", type=int, nargs="+", default=[1, 5, 10])
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_knn_eval)

    p = sub.add_parser("ablation", help="recall over metric x measure choices")
    p.add_argument("--graphs", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--metrics", nargs="+", default=[m.value for m in MetricKind],
                   choices=[m.value for m in MetricKind])
    p.add_argument("--measures", nargs="+", default=list(MEASURE_KINDS), choices=MEASURE_KINDS)
    p.add_argument("--k", type=int, nargs="+", default=[20])
    _add_metric(p)
    _add_measure(p)
    _add_solver(p)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("sweep", help="recall over the PI hyperparameter grid")
    p.add_argument("--graphs", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--sigmas", type=float, nargs="+", default=list(SWEEP_SIGMAS))
    p.add_argument("--resolutions", type=int, nargs="+", default=list(SWEEP_RESOLUTIONS))
    p.add_argument("--powers", type=float, nargs="+", default=list(SWEEP_POWERS))
    p.add_argument("--k", type=int, default=20)
    _add_metric(p)
    _add_measure(p)
    _add_solver(p)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stability", help="perturbation stability experiment")
    p.add_argument("--graph", required=True)
    p.add_argument("--levels", type=float, nargs="+", default=[1e-4, 1e-3, 1e-2, 3e-2, 1e-1])
    p.add_argument("--trials", type=int, default=100)
    _add_pi(p)
    _add_solver(p)
    p.set_defaults(restarts=4)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_stability)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return int(args.func(args) or 0)
    except (GraphError, GraphFormatError, CorpusError, MeasureError, ValueError, OSError) as exc:
        print(f"reebgw: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
