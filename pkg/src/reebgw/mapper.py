"""Mapper approximation of a Reeb graph from a point cloud.

Filter: p-eccentricity. Cover: uniform overlapping intervals. Clustering:
single linkage at a distance threshold, i.e. connected components of the
Vietoris-Rips graph at that scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .graph import PointCloud, ScalarGraph, components, induced_subgraph


class MapperWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MapperParams:
    ecc_p: float | str = 2.0  # real >= 1 or "inf"
    n_intervals: int = 10
    overlap: float = 0.3
    cluster_eps: float | str = "auto"
    sample_n: int | None = 1024  # None or 0 disables subsampling
    node_value: str = "mean"  # "mean" | "midpoint"

    def __post_init__(self):
        if self.ecc_p != "inf" and not float(self.ecc_p) >= 1:
            raise ValueError(f"ecc_p must be >= 1 or 'inf', got {self.ecc_p!r}")
        if self.n_intervals < 1:
            raise ValueError("n_intervals must be >= 1")
        if not 0 <= self.overlap < 1:
            raise ValueError("overlap must lie in [0, 1)")
        if self.cluster_eps != "auto" and not float(self.cluster_eps) > 0:
            raise ValueError("cluster_eps must be > 0 or 'auto'")
        if self.node_value not in ("mean", "midpoint"):
            raise ValueError(f"unknown node_value {self.node_value!r}")


def eccentricity(points, ecc_p: float | str = 2.0) -> np.ndarray:
    """Power mean of distances to all points, the point itself included."""
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=float)
    D = cdist(pts, pts)
    if ecc_p == "inf" or np.isinf(float(ecc_p)):
        return D.max(axis=1)
    p = float(ecc_p)
    return np.mean(D ** p, axis=1) ** (1.0 / p)


def auto_eps(points: np.ndarray) -> float:
    """Twice the mean nearest-neighbour distance."""
    if len(points) < 2:
        return 1.0
    d, _ = cKDTree(points).query(points, k=2)
    eps = 2.0 * float(d[:, 1].mean())
    return eps if eps > 0 else 1.0


def cover_intervals(lo: float, hi: float, k: int, overlap: float) -> list[tuple[float, float]]:
    length = (hi - lo) / (k - (k - 1) * overlap)
    step = length * (1 - overlap)
    out = [(lo + i * step, lo + i * step + length) for i in range(k)]
    out[-1] = (out[-1][0], hi)
    return out


def _clusters(points: np.ndarray, members: np.ndarray, eps: float) -> list[np.ndarray]:
    sub = points[members]
    pairs = cKDTree(sub).query_pairs(eps, output_type="ndarray")
    n = len(sub)
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(int(members[i]))
    return sorted((np.array(g) for g in groups.values()), key=lambda g: g[0])


def mapper_graph_all(cloud: PointCloud, params: MapperParams = MapperParams(),
                     seed: int = 0) -> ScalarGraph:
    """Full Mapper graph, possibly disconnected."""
    pts = cloud.points
    if params.sample_n:
        if len(pts) < params.sample_n:
            raise ValueError(f"cloud has {len(pts)} points, fewer than sample_n={params.sample_n}")
        rng = np.random.default_rng(seed)
        pts = pts[np.sort(rng.choice(len(pts), params.sample_n, replace=False))]
    ecc = eccentricity(pts, params.ecc_p)
    lo, hi = float(ecc.min()), float(ecc.max())
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return ScalarGraph((("n000_000", float(ecc.mean())),), ())
    eps = auto_eps(pts) if params.cluster_eps == "auto" else float(params.cluster_eps)

    nodes, node_members, prev = [], [], []
    edges = []
    for i, (a, b) in enumerate(cover_intervals(lo, hi, params.n_intervals, params.overlap)):
        members = np.nonzero((ecc >= a) & (ecc <= b))[0]
        current = []
        if len(members):
            for c, group in enumerate(_clusters(pts, members, eps)):
                name = f"n{i:03d}_{c:03d}"
                value = float(ecc[group].mean()) if params.node_value == "mean" else 0.5 * (a + b)
                nodes.append((name, value))
                node_members.append(set(group.tolist()))
                current.append((name, node_members[-1]))
            # nodes of consecutive intervals sharing a point are joined
            for pname, pset in prev:
                for cname, cset in current:
                    if pset & cset:
                        edges.append((pname, cname))
        prev = current
    return ScalarGraph(tuple(nodes), tuple(edges))


def split_components(graph: ScalarGraph) -> list[ScalarGraph]:
    return [induced_subgraph(graph, comp) for comp in components(graph)]


def build_mapper(cloud: PointCloud, params: MapperParams = MapperParams(),
                 seed: int = 0) -> ScalarGraph:
    """Largest connected component of the Mapper graph (warns when trimming)."""
    parts = split_components(mapper_graph_all(cloud, params, seed))
    if len(parts) > 1:
        dropped = sum(p.n_nodes for p in parts[1:])
        warnings.warn(f"mapper graph has {len(parts)} components; kept the largest, "
                      f"dropped {dropped} node(s)", MapperWarning, stacklevel=2)
    return parts[0]
