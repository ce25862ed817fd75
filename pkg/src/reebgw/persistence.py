"""Extended persistence of scalar graphs and distances between diagrams.

The extended filtration is the lower-star filtration of the graph followed by
the upper-star filtration of its cone: a cone vertex ``w`` first, then every
vertex and edge by ascending f, then ``w*v`` and ``w*e`` by descending f. One
Z/2 column reduction pairs all simplices except ``w``; the block of the birth
and death simplices names the class of each pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .graph import GraphError, ScalarGraph, fmt_real, validate

CLASSES = ("Ord0", "Ext0", "Rel1", "Ext1")


@dataclass(frozen=True)
class DiagramPoint:
    birth: float
    death: float
    kind: str
    birth_node: str
    death_node: str

    @property
    def persistence(self) -> float:
        return abs(self.death - self.birth)


@dataclass(frozen=True)
class ExtendedDiagram:
    points: tuple[DiagramPoint, ...] = ()

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def of(self, kind: str) -> list[DiagramPoint]:
        return [p for p in self.points if p.kind == kind]

    def coords(self, kind: str | None = None) -> np.ndarray:
        pts = self.points if kind is None else self.of(kind)
        return np.array([(p.birth, p.death) for p in pts], dtype=float).reshape(-1, 2)

    def counts(self) -> dict[str, int]:
        return {c: len(self.of(c)) for c in CLASSES}

    def value_sets(self) -> dict[str, list[tuple[float, float]]]:
        return {c: sorted((p.birth, p.death) for p in self.of(c)) for c in CLASSES}

    def to_json(self) -> str:
        rows = [
            f'{{"birth":{fmt_real(p.birth)},"death":{fmt_real(p.death)},'
            f'"class":"{p.kind}","birth_node":{json.dumps(p.birth_node)},'
            f'"death_node":{json.dumps(p.death_node)}}}'
            for p in self.points
        ]
        return "[" + ",".join(rows) + "]"

    @classmethod
    def from_json(cls, text: str) -> "ExtendedDiagram":
        pts = []
        for row in json.loads(text):
            if row["class"] not in CLASSES:
                raise ValueError(f"unknown diagram class {row['class']!r}")
            pts.append(DiagramPoint(float(row["birth"]), float(row["death"]), row["class"],
                                    str(row["birth_node"]), str(row["death_node"])))
        return cls(tuple(pts))


def _low(col: int) -> int:
    return col.bit_length() - 1


def extended_persistence(graph: ScalarGraph) -> ExtendedDiagram:
    """Extended persistence diagram with the node realising each coordinate.

    Ties in f are broken by sorted node index, i.e. an infinitesimal
    perturbation. Zero-persistence Ord0/Rel1 pairs (regular nodes) are
    dropped; Ext0/Ext1 points are always kept.
    """
    errors = validate(graph).errors
    if errors:
        raise GraphError("; ".join(errors))
    f = graph.f
    ids = graph.ids
    n = len(f)
    order = np.lexsort((np.arange(n), f))
    rank = np.empty(n, dtype=int)
    rank[order] = np.arange(n)
    adj = graph.adjacency

    # simplex records: (block, kind, payload); block 0 = cone vertex, 1 = up, 2 = down
    simplices: list[tuple[int, str, tuple[int, ...]]] = [(0, "cone", ())]
    vertex_pos = np.empty(n, dtype=int)
    edge_pos: dict[tuple[int, int], int] = {}
    cone_edge_pos = np.empty(n, dtype=int)
    columns: list[int] = [0]

    for v in order:
        v = int(v)
        vertex_pos[v] = len(simplices)
        simplices.append((1, "v", (v,)))
        columns.append(0)
        for w in sorted((w for w in adj[v] if rank[w] < rank[v]), key=lambda w: rank[w]):
            edge_pos[(min(v, w), max(v, w))] = len(simplices)
            simplices.append((1, "e", (w, v)))  # (lower, upper)
            columns.append((1 << int(vertex_pos[v])) | (1 << int(vertex_pos[w])))
    for v in order[::-1]:
        v = int(v)
        cone_edge_pos[v] = len(simplices)
        simplices.append((2, "we", (v,)))
        columns.append(1 | (1 << int(vertex_pos[v])))
        for w in sorted((w for w in adj[v] if rank[w] > rank[v]), key=lambda w: -rank[w]):
            e = edge_pos[(min(v, w), max(v, w))]
            simplices.append((2, "wt", (v, w)))  # (lower, upper)
            columns.append((1 << e) | (1 << int(cone_edge_pos[v])) | (1 << int(cone_edge_pos[w])))

    pivot: dict[int, int] = {}
    pairs = []
    for j, col in enumerate(columns):
        while col:
            low = _low(col)
            k = pivot.get(low)
            if k is None:
                break
            col ^= columns[k]
        columns[j] = col
        if col:
            low = _low(col)
            pivot[low] = j
            pairs.append((low, j))

    points = []
    for i, j in sorted(pairs):
        bi, kind_i, pay_i = simplices[i]
        bj, kind_j, pay_j = simplices[j]
        birth_node = pay_i[-1]  # vertex itself, or the upper end of an edge
        death_node = pay_j[-1] if bj == 1 else pay_j[0]
        if kind_i == "v" and bj == 1:
            kind = "Ord0"
        elif kind_i == "v":
            kind = "Ext0"
        elif kind_i == "e":
            kind = "Ext1"
        elif kind_i == "we":
            kind = "Rel1"
        else:
            raise AssertionError(f"unexpected pair {simplices[i]} -> {simplices[j]}")
        b, d = float(f[birth_node]), float(f[death_node])
        if kind in ("Ord0", "Rel1") and b == d:
            continue
        points.append(DiagramPoint(b, d, kind, ids[birth_node], ids[death_node]))
    points.sort(key=lambda p: (CLASSES.index(p.kind), p.birth, p.death, p.birth_node))
    return ExtendedDiagram(tuple(points))


# ------------------------------------------------------------ diagram distances

def _as_array(points) -> np.ndarray:
    if isinstance(points, ExtendedDiagram):
        return points.coords()
    return np.asarray(points, dtype=float).reshape(-1, 2)


def _linf(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=2)


def _half_pers(a: np.ndarray) -> np.ndarray:
    return np.abs(a[:, 1] - a[:, 0]) / 2.0


def _perfect_matching_exists(cost_ab, diag_a, diag_b, r) -> bool:
    n, m = cost_ab.shape
    size = n + m
    rows, cols = [], []
    ai, bj = np.nonzero(cost_ab <= r)
    rows.extend(ai.tolist())
    cols.extend(bj.tolist())
    for i in np.nonzero(diag_a <= r)[0]:
        rows.append(int(i))
        cols.append(m + int(i))
    for j in np.nonzero(diag_b <= r)[0]:
        rows.append(n + int(j))
        cols.append(int(j))
    # diagonal copies match each other freely
    dj, di = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    rows.extend((n + dj.ravel()).tolist())
    cols.extend((m + di.ravel()).tolist())
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))
    match = maximum_bipartite_matching(graph, perm_type="column")
    return bool(np.all(match >= 0))


def _bottleneck_arrays(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) == 0 and len(b) == 0:
        return 0.0
    cost = _linf(a, b) if len(a) and len(b) else np.zeros((len(a), len(b)))
    diag_a, diag_b = _half_pers(a), _half_pers(b)
    candidates = np.unique(np.concatenate([[0.0], cost.ravel(), diag_a, diag_b]))
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _perfect_matching_exists(cost, diag_a, diag_b, candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def _w1_arrays(a: np.ndarray, b: np.ndarray) -> float:
    n, m = len(a), len(b)
    if n == 0 and m == 0:
        return 0.0
    diag_a, diag_b = _half_pers(a), _half_pers(b)
    big = 1.0 + 2.0 * (diag_a.sum() + diag_b.sum()) + (np.abs(a).sum() + np.abs(b).sum()) * 2
    size = n + m
    cost = np.zeros((size, size))
    if n and m:
        cost[:n, :m] = _linf(a, b)
    cost[:n, m:] = big
    cost[np.arange(n), m + np.arange(n)] = diag_a
    cost[n:, :m] = big
    cost[n + np.arange(m), np.arange(m)] = diag_b
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def bottleneck_distance(d1: ExtendedDiagram | Sequence, d2: ExtendedDiagram | Sequence,
                        per_class: bool = True) -> float:
    """Bottleneck distance with the L-infinity ground metric and diagonal
    projections. Extended diagrams are matched class by class and the maximum
    is returned; ``per_class=False`` pools all points."""
    if per_class and isinstance(d1, ExtendedDiagram) and isinstance(d2, ExtendedDiagram):
        return max(_bottleneck_arrays(d1.coords(c), d2.coords(c)) for c in CLASSES)
    return _bottleneck_arrays(_as_array(d1), _as_array(d2))


def wasserstein1_distance(d1: ExtendedDiagram | Sequence, d2: ExtendedDiagram | Sequence,
                          per_class: bool = True) -> float:
    """Order-1 matching distance (L-infinity ground cost), exact assignment.
    Per-class costs are summed."""
    if per_class and isinstance(d1, ExtendedDiagram) and isinstance(d2, ExtendedDiagram):
        return sum(_w1_arrays(d1.coords(c), d2.coords(c)) for c in CLASSES)
    return _w1_arrays(_as_array(d1), _as_array(d2))


def pairing(diagram: ExtendedDiagram) -> list[tuple[str, str, str]]:
    """Class and node pair of every point, sorted; used to detect re-pairings."""
    return sorted((p.kind, p.birth_node, p.death_node) for p in diagram.points)


def diagram_from_points(points: Iterable[tuple[float, float, str]]) -> ExtendedDiagram:
    """Diagram from bare ``(birth, death, class)`` triples, without nodes."""
    return ExtendedDiagram(tuple(DiagramPoint(float(b), float(d), k, "", "") for b, d, k in points))
