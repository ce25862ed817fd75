"""Node-to-node distances on scalar graphs and their all-pairs matrices.

Paths are evaluated at graph nodes only: edges of a Reeb graph are monotone in
f, so the supremum along an edge is attained at one of its endpoints.
"""

from __future__ import annotations

import heapq
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graph import GraphError, ScalarGraph, fmt_real, validate


class MetricKind(str, Enum):
    REEB_RADIUS = "reeb-radius"
    SYM_REEB_RADIUS = "sym-reeb-radius"
    MAX_SYM_REEB_RADIUS = "max-sym-reeb-radius"
    REEB_DISTANCE = "reeb-distance"
    SHORTEST_PATH = "shortest-path"

    @property
    def symmetric(self) -> bool:
        return self is not MetricKind.REEB_RADIUS


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    ids: tuple[str, ...]
    values: np.ndarray
    kind: MetricKind | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        n = len(self.ids)
        if self.values.shape != (n, n):
            raise ValueError(f"matrix shape {self.values.shape} does not match {n} ids")

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, pair: tuple[str, str]) -> float:
        i, j = (self.ids.index(p) for p in pair)
        return float(self.values[i, j])

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.values, self.values.T, rtol=0, atol=1e-12))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("node," + ",".join(self.ids) + "\n")
        for name, row in zip(self.ids, self.values):
            buf.write(name + "," + ",".join(fmt_real(x) for x in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DistanceMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split(",")
        if header[0] != "node":
            raise ValueError("matrix CSV must start with a 'node' column")
        ids = tuple(header[1:])
        rows = [ln.split(",") for ln in lines[1:]]
        if [r[0] for r in rows] != list(ids):
            raise ValueError("row labels do not match the header")
        return cls(ids, np.array([[float(x) for x in r[1:]] for r in rows]))


def _dijkstra(adj: list[list[int]], source: int, step) -> np.ndarray:
    """Label-setting search; ``step(label, v, w)`` returns the label of w via v.

    Works for any combine that is monotone non-decreasing along a path
    (sum of nonnegative lengths, running maximum). Ties pop by node index.
    """
    n = len(adj)
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    done = [False] * n
    heap = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for w in adj[v]:
            if done[w]:
                continue
            nd = step(d, v, w)
            if nd < dist[w]:
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


def reeb_radius_row(graph: ScalarGraph, source: int) -> np.ndarray:
    """Reeb radius from ``source`` to every node: minimax of |f(source) - f(w)|."""
    f = graph.f
    anchor = f[source]
    return _dijkstra(graph.adjacency, source,
                     lambda d, v, w: max(d, abs(anchor - f[w])))


def shortest_path_row(graph: ScalarGraph, source: int) -> np.ndarray:
    f = graph.f
    return _dijkstra(graph.adjacency, source, lambda d, v, w: d + abs(f[v] - f[w]))


def _check_pair(graph: ScalarGraph, v: str, u: str) -> tuple[int, int]:
    i, j = graph.node_index(v), graph.node_index(u)
    graph.require_valid()
    return i, j


def reeb_radius(graph: ScalarGraph, v: str, u: str) -> float:
    i, j = _check_pair(graph, v, u)
    return float(reeb_radius_row(graph, i)[j])


def sym_reeb_radius(graph: ScalarGraph, v: str, u: str) -> float:
    i, j = _check_pair(graph, v, u)
    return 0.5 * (float(reeb_radius_row(graph, i)[j]) + float(reeb_radius_row(graph, j)[i]))


def max_sym_reeb_radius(graph: ScalarGraph, v: str, u: str) -> float:
    i, j = _check_pair(graph, v, u)
    return max(float(reeb_radius_row(graph, i)[j]), float(reeb_radius_row(graph, j)[i]))


def shortest_path(graph: ScalarGraph, v: str, u: str) -> float:
    i, j = _check_pair(graph, v, u)
    return float(min(shortest_path_row(graph, i)[j], shortest_path_row(graph, j)[i]))


def reeb_distance(graph: ScalarGraph, v: str, u: str) -> float:
    i, j = _check_pair(graph, v, u)
    return float(reeb_distance_matrix(graph)[i, j])


def reeb_distance_matrix(graph: ScalarGraph) -> np.ndarray:
    """All-pairs minimum path height by a sweep over the path floor.

    For each candidate floor ``a`` (a node value) the nodes with f >= a are
    inserted in increasing f with union-find; two nodes first become connected
    at the smallest achievable path maximum ``M``, giving the candidate
    ``M - a``. The optimal path attains its minimum at a node, so the minimum
    over floors is exact.
    """
    f = graph.f
    n = len(f)
    adj = graph.adjacency
    out = np.full((n, n), np.inf)
    np.fill_diagonal(out, 0.0)
    order = np.lexsort((np.arange(n), f))
    for start in range(n):
        a = f[order[start]]
        # a tie at the floor value is handled by the first node carrying it
        if start > 0 and f[order[start - 1]] == a:
            continue
        parent = list(range(n))
        members: dict[int, list[int]] = {}
        active = [False] * n

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for v in order[start:]:
            v = int(v)
            active[v] = True
            members[v] = [v]
            top = f[v]
            for w in adj[v]:
                if not active[w]:
                    continue
                rv, rw = find(v), find(w)
                if rv == rw:
                    continue
                cand = top - a
                mv, mw = members[rv], members[rw]
                for x in mv:
                    row = out[x]
                    for y in mw:
                        if cand < row[y]:
                            row[y] = cand
                            out[y, x] = cand
                if len(mv) < len(mw):
                    rv, rw, mv, mw = rw, rv, mw, mv
                parent[rw] = rv
                mv.extend(mw)
                del members[rw]
    return out


def _rows(graph: ScalarGraph, row_fn, threads: int) -> np.ndarray:
    n = graph.n_nodes
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda s: row_fn(graph, s), range(n)))
    else:
        rows = [row_fn(graph, s) for s in range(n)]
    return np.vstack(rows) if rows else np.zeros((0, 0))


def distance_matrix(graph: ScalarGraph, kind: MetricKind | str = MetricKind.SYM_REEB_RADIUS,
                    threads: int = 1) -> DistanceMatrix:
    """All-pairs matrix of the selected metric, indexed by sorted node id.

    Rows are independent single-source searches; the result does not depend
    on ``threads``. The asymmetric Reeb radius is returned as computed, row v
    holding rho(v, .).
    """
    kind = MetricKind(kind)
    errors = validate(graph).errors
    if errors:
        raise GraphError("; ".join(errors))
    if kind is MetricKind.REEB_DISTANCE:
        values = reeb_distance_matrix(graph)
    elif kind is MetricKind.SHORTEST_PATH:
        rows = _rows(graph, shortest_path_row, threads)
        values = np.minimum(rows, rows.T)
    else:
        rho = _rows(graph, reeb_radius_row, threads)
        if kind is MetricKind.REEB_RADIUS:
            values = rho
        elif kind is MetricKind.SYM_REEB_RADIUS:
            values = 0.5 * (rho + rho.T)
        else:
            values = np.maximum(rho, rho.T)
    if kind is MetricKind.SYM_REEB_RADIUS and not graph.is_generic():
        warnings.warn("non-generic graph: distinct nodes may be at distance 0", stacklevel=2)
    return DistanceMatrix(tuple(graph.ids), values, kind)
