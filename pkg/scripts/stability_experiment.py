"""Perturbation stability of the metric, diagram, measure and distance."""

import argparse

import numpy as np

from reebgw.graph import random_graph, read_graph
from reebgw.gw import SolverOpts
from reebgw.harness import stability_experiment
from reebgw.pimage import PIParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--graph", help="graph JSON (default: a random 15-node graph)")
    ap.add_argument("--levels", type=float, nargs="+", default=[1e-4, 1e-3, 1e-2, 3e-2, 1e-1])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--sigma", type=float, default=0.5)
    ap.add_argument("--resolution", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="CSV path")
    args = ap.parse_args()

    g = read_graph(args.graph) if args.graph else random_graph(np.random.default_rng(2024), 15, 3)
    rep = stability_experiment(g, args.levels, args.trials, args.seed,
                               PIParams(args.sigma, args.resolution), SolverOpts(restarts=4))
    text = rep.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")
    for lv in rep.levels:
        print(f"eps={lv.eps:g}: metric_dev/eps={lv.max['metric_dev'] / lv.eps:.3f} (<= 2), "
              f"d_B/eps={lv.max['bottleneck'] / lv.eps:.3f} (<= 1), re-paired {lv.skipped_tv}")
    print(f"M_emp={rep.M_emp:.4g} C_emp={rep.C_emp:.4g}")
    for name, ok in rep.checks.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")


if __name__ == "__main__":
    main()
