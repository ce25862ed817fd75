"""Small reference graphs with known diagrams, matrices, measures and distances."""

from __future__ import annotations

import numpy as np

from .graph import ScalarGraph


def _graph(values: dict[str, float], edges) -> ScalarGraph:
    return ScalarGraph.from_values(values, edges)


def quadrant_example() -> ScalarGraph:
    """Graph with values 0..11 on nodes v0..v11 exhibiting every point class:
    a spurious minimum v1, a spurious maximum v10 and three loops. The loop
    between v3 and v4 is subdivided by s34 (value 3.5) to avoid a double edge.

    Diagram: Ord0 {(1, 2)}, Ext0 {(0, 11)}, Rel1 {(10, 8)},
    Ext1 {(4, 3), (7, 5), (9, 6)}.
    """
    values = {f"v{i}": float(i) for i in range(12)}
    values["s34"] = 3.5
    edges = [("v0", "v2"), ("v1", "v2"), ("v2", "v3"), ("v3", "v4"), ("v3", "s34"),
             ("s34", "v4"), ("v4", "v5"), ("v5", "v7"), ("v5", "v6"), ("v6", "v7"),
             ("v6", "v8"), ("v8", "v9"), ("v8", "v10"), ("v7", "v9"), ("v9", "v11")]
    return _graph(values, edges)


QUADRANT_EXPECTED = {
    "Ord0": [(1.0, 2.0)],
    "Ext0": [(0.0, 11.0)],
    "Rel1": [(10.0, 8.0)],
    "Ext1": [(4.0, 3.0), (7.0, 5.0), (9.0, 6.0)],
}


def pair_example_f() -> ScalarGraph:
    """Eight nodes, one loop, one spurious minimum and one spurious maximum."""
    values = dict(zip([f"f{i}" for i in range(1, 9)], [22, 16, 18, 10, 13, 4, 6, 0]))
    edges = [("f8", "f7"), ("f7", "f4"), ("f7", "f5"), ("f6", "f4"), ("f4", "f2"),
             ("f5", "f2"), ("f5", "f3"), ("f2", "f1")]
    return _graph(values, edges)


def pair_example_g() -> ScalarGraph:
    values = dict(zip([f"g{i}" for i in range(1, 9)], [20, 16, 14, 12, 8, 4, 2, 0]))
    edges = [("g8", "g6"), ("g7", "g6"), ("g6", "g5"), ("g5", "g4"), ("g5", "g2"),
             ("g4", "g3"), ("g4", "g2"), ("g2", "g1")]
    return _graph(values, edges)


def _sym(upper: list[list[float]]) -> np.ndarray:
    n = len(upper) + 1
    M = np.zeros((n, n))
    for i, row in enumerate(upper):
        M[i, i + 1:] = row[1:]
    return M + M.T


# published symmetric Reeb radius matrices and node measures of the pair
PAIR_MATRIX_F = _sym([[0, 6, 7, 12, 9, 18, 16, 22], [0, 4, 6, 3, 12, 10, 16], [0, 8, 5, 14, 12, 18],
                      [0, 3.5, 6, 4, 10], [0, 9, 7, 13], [0, 5, 8], [0, 6]])
PAIR_MATRIX_G = _sym([[0, 4, 7, 8, 12, 16, 18, 20], [0, 3, 4, 8, 12, 14, 16], [0, 2, 6, 10, 12, 14],
                      [0, 4, 8, 10, 12], [0, 4, 6, 8], [0, 2, 4], [0, 3]])
PAIR_MEASURE_F = np.array([0.2420, 0.1190, 0.0730, 0.0660, 0.0730, 0.0660, 0.1190, 0.2420])
PAIR_MEASURE_G = np.array([0.3075, 0.1255, 0.0385, 0.0385, 0.1255, 0.0284, 0.0284, 0.3075])
# reported value of the distortion sum at the optimum (before the 1/p root), p = 2
PAIR_REFERENCE_LOSS = 7.814688
# PI parameters that reproduce PAIR_MEASURE_F from pair_example_f to 1e-4
PAIR_PI = dict(sigma=2.0, resolution=50, weight_power=1.0)
