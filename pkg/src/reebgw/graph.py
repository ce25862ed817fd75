"""Scalar-valued graphs, point clouds, validation, serialization and generators."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised when a graph is unusable for the requested computation."""


class GraphFormatError(ValueError):
    """Raised on malformed graph or point-cloud files."""


@dataclass(frozen=True, eq=False)
class ScalarGraph:
    """Finite graph with one real value per node.

    Construction does not enforce the invariants so that invalid input can be
    inspected with :func:`validate`; every metric calls :meth:`require_valid`.
    Matrices and vectors derived from a graph index nodes by sorted node id.
    """

    nodes: tuple[tuple[str, float], ...]
    edges: tuple[tuple[str, str], ...] = ()

    @classmethod
    def from_values(cls, values: dict[str, float] | Sequence[tuple[str, float]],
                    edges: Iterable[tuple[str, str]] = ()) -> "ScalarGraph":
        items = values.items() if isinstance(values, dict) else values
        return cls(tuple((str(k), float(v)) for k, v in items),
                   tuple((str(a), str(b)) for a, b in edges))

    @cached_property
    def ids(self) -> list[str]:
        return sorted(n for n, _ in self.nodes)

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.ids)}

    @cached_property
    def f(self) -> np.ndarray:
        """Node values aligned with :attr:`ids`."""
        values = dict(self.nodes)
        return np.array([values[n] for n in self.ids], dtype=float)

    @cached_property
    def adjacency(self) -> list[list[int]]:
        """Sorted neighbour lists by node index (self-loops and repeats removed)."""
        nbrs: list[set[int]] = [set() for _ in self.ids]
        for a, b in self.edges:
            i, j = self.index_of[a], self.index_of[b]
            if i != j:
                nbrs[i].add(j)
                nbrs[j].add(i)
        return [sorted(s) for s in nbrs]

    @cached_property
    def edge_index(self) -> np.ndarray:
        """Unique undirected edges as an (m, 2) int array with row[0] < row[1]."""
        pairs = sorted({tuple(sorted((self.index_of[a], self.index_of[b])))
                        for a, b in self.edges if a != b})
        return np.array(pairs, dtype=int).reshape(-1, 2)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edge_index)

    @property
    def cycle_rank(self) -> int:
        return self.n_edges - self.n_nodes + n_components(self)

    def value(self, node: str) -> float:
        return float(self.f[self.node_index(node)])

    def node_index(self, node: str) -> int:
        try:
            return self.index_of[node]
        except KeyError:
            raise GraphError(f"unknown node id {node!r}") from None

    def is_generic(self) -> bool:
        return len(np.unique(self.f)) == len(self.f)

    def with_values(self, f: np.ndarray) -> "ScalarGraph":
        """Same structure, new node values given in sorted-id order."""
        return ScalarGraph(tuple(zip(self.ids, map(float, f))), self.edges)

    def require_valid(self) -> None:
        report = validate(self)
        if report.errors:
            raise GraphError("; ".join(report.errors))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalarGraph):
            return NotImplemented
        return (sorted(self.nodes) == sorted(other.nodes)
                and _edge_multiset(self.edges) == _edge_multiset(other.edges))

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.nodes)), tuple(_edge_multiset(self.edges))))


def _edge_multiset(edges) -> list[tuple[str, str]]:
    return sorted(tuple(sorted(e)) for e in edges)


@dataclass(frozen=True)
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return bool(self.errors or self.warnings)

    def __iter__(self):
        return iter(self.errors + self.warnings)


def n_components(graph: ScalarGraph) -> int:
    return len(components(graph))


def components(graph: ScalarGraph) -> list[list[int]]:
    """Connected components as lists of node indices, largest first."""
    adj = graph.adjacency
    seen = [False] * len(adj)
    comps = []
    for s in range(len(adj)):
        if seen[s]:
            continue
        seen[s] = True
        stack, comp = [s], []
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        comps.append(sorted(comp))
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


def validate(graph: ScalarGraph) -> ValidationReport:
    """List every invariant violation of ``graph``; ties in f are a warning only."""
    errors, warnings = [], []
    ids = [n for n, _ in graph.nodes]
    if len(set(ids)) != len(ids):
        dup = sorted({n for n in ids if ids.count(n) > 1})
        errors.append(f"duplicate node id(s): {', '.join(dup)}")
    bad = [n for n, v in graph.nodes if not math.isfinite(v)]
    if bad:
        errors.append(f"non-finite f at: {', '.join(bad)}")
    known = set(ids)
    seen_edges: set[tuple[str, str]] = set()
    for a, b in graph.edges:
        missing = [x for x in (a, b) if x not in known]
        if missing:
            errors.append(f"edge ({a}, {b}) has unknown endpoint {missing[0]!r}")
            continue
        if a == b:
            errors.append(f"self-loop at {a!r}")
            continue
        key = tuple(sorted((a, b)))
        if key in seen_edges:
            errors.append(f"duplicate edge ({key[0]}, {key[1]})")
        seen_edges.add(key)
    if errors:
        return ValidationReport(errors, warnings)
    if not ids:
        errors.append("empty graph")
        return ValidationReport(errors, warnings)
    k = n_components(graph)
    if k > 1:
        errors.append(f"disconnected ({k} components)")
    if not graph.is_generic():
        warnings.append("non-generic: tied f values")
    return ValidationReport(errors, warnings)


def induced_subgraph(graph: ScalarGraph, node_idx: Iterable[int]) -> ScalarGraph:
    keep = {graph.ids[i] for i in node_idx}
    nodes = tuple((n, v) for n, v in graph.nodes if n in keep)
    edges = tuple((a, b) for a, b in graph.edges if a in keep and b in keep)
    return ScalarGraph(nodes, edges)


# ---------------------------------------------------------------- serialization

def fmt_real(x: float) -> str:
    """Real number with 17 significant digits (round-trip exact)."""
    if float(x).is_integer() and abs(x) < 1e16:
        return str(int(x))
    return format(float(x), ".17g")


def save_graph(graph: ScalarGraph) -> bytes:
    nodes = ",".join(f'{{"id":{json.dumps(n)},"f":{fmt_real(v)}}}' for n, v in graph.nodes)
    edges = ",".join(f"[{json.dumps(a)},{json.dumps(b)}]" for a, b in graph.edges)
    return f'{{"nodes":[{nodes}],"edges":[{edges}]}}'.encode()


def load_graph(data: bytes | str) -> ScalarGraph:
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    else:
        text = data
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise GraphFormatError(f"parse error at byte {offset}: {exc.msg}") from None
    if not isinstance(obj, dict) or "nodes" not in obj:
        raise GraphFormatError("schema error: missing field nodes")
    nodes = []
    for i, node in enumerate(obj["nodes"]):
        for key in ("id", "f"):
            if not isinstance(node, dict) or key not in node:
                raise GraphFormatError(f"schema error: missing field {key} (node {i})")
        if not isinstance(node["f"], (int, float)) or isinstance(node["f"], bool):
            raise GraphFormatError(f"schema error: field f of node {i} is not a number")
        nodes.append((str(node["id"]), float(node["f"])))
    edges = []
    for i, edge in enumerate(obj.get("edges", [])):
        if not isinstance(edge, list) or len(edge) != 2:
            raise GraphFormatError(f"schema error: edge {i} is not an id pair")
        edges.append((str(edge[0]), str(edge[1])))
    return ScalarGraph(tuple(nodes), tuple(edges))


def read_graph(path: str | Path) -> ScalarGraph:
    return load_graph(Path(path).read_bytes())


def write_graph(graph: ScalarGraph, path: str | Path) -> None:
    Path(path).write_bytes(save_graph(graph))


# ------------------------------------------------------------------ point clouds

@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    label: str | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise GraphFormatError("point cloud must be a nonempty (n, 3) array")
        if not np.all(np.isfinite(pts)):
            raise GraphFormatError("point cloud has non-finite coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


def load_point_cloud(path: str | Path, label: str | None = None) -> PointCloud:
    """Read XYZ text, CSV with an ``x,y,z`` header, or OFF (vertices only)."""
    path = Path(path)
    text = path.read_text()
    suffix = path.suffix.lower()
    stripped = text.lstrip()
    if suffix == ".off" or stripped.startswith("OFF"):
        pts = _parse_off(text)
    elif suffix == ".csv" or stripped.split("\n", 1)[0].replace(" ", "").lower().startswith("x,y,z"):
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or not {"x", "y", "z"} <= {h.strip() for h in reader.fieldnames}:
            raise GraphFormatError("CSV point cloud needs an x,y,z header")
        pts = [[float(row[k]) for k in ("x", "y", "z")] for row in
               ({k.strip(): v for k, v in r.items()} for r in reader)]
    else:
        pts = [[float(t) for t in line.split()[:3]] for line in text.splitlines()
               if line.strip() and not line.lstrip().startswith("#")]
    return PointCloud(np.array(pts, dtype=float), label=label or path.stem)


def _parse_off(text: str) -> np.ndarray:
    tokens = [line.split("#", 1)[0].strip() for line in text.splitlines()]
    tokens = [t for t in tokens if t]
    head = tokens[0]
    if not head.startswith("OFF"):
        raise GraphFormatError("OFF file must start with OFF")
    rest = head[3:].split()
    start = 1
    if not rest:
        rest = tokens[1].split()
        start = 2
    n_vert = int(rest[0])
    rows = tokens[start:start + n_vert]
    if len(rows) < n_vert:
        raise GraphFormatError("OFF file truncated")
    return np.array([[float(v) for v in row.split()[:3]] for row in rows])


def save_point_cloud(cloud: PointCloud) -> str:
    return "".join(" ".join(fmt_real(c) for c in p) + "\n" for p in cloud.points)


# -------------------------------------------------------------------- generators

SHAPES = ("sphere", "torus", "double-torus")
TORUS_R, TORUS_r = 1.0, 0.4
DOUBLE_OFFSET = 1.15


def synth_shapes(shape: str, n_points: int = 1024, jitter: float = 0.0,
                 seed: int = 0) -> PointCloud:
    """Sample ``n_points`` uniformly (by area) on a unit sphere, a torus or a
    genus-2 surface, then displace each point uniformly inside a ball of
    radius ``jitter``."""
    if shape not in SHAPES:
        raise ValueError(f"unknown shape class {shape!r}; expected one of {SHAPES}")
    if n_points < 64:
        raise ValueError("n_points must be >= 64")
    if jitter < 0:
        raise ValueError("jitter must be >= 0")
    rng = np.random.default_rng(seed)
    if shape == "sphere":
        pts = _unit_vectors(rng, n_points)
    elif shape == "torus":
        pts = _torus(rng, n_points)
    else:
        pts = _double_torus(rng, n_points)
    if jitter > 0:
        radius = jitter * rng.random(n_points) ** (1 / 3)
        pts = pts + _unit_vectors(rng, n_points) * radius[:, None]
    return PointCloud(pts, label=shape)


def _unit_vectors(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _torus(rng, n, R=TORUS_R, r=TORUS_r, center=(0.0, 0.0, 0.0)):
    out = np.empty((0, 3))
    while len(out) < n:
        m = 2 * (n - len(out)) + 16
        theta = rng.uniform(0, 2 * np.pi, m)
        phi = rng.uniform(0, 2 * np.pi, m)
        # area element is proportional to R + r cos(theta)
        keep = rng.uniform(0, R + r, m) < R + r * np.cos(theta)
        theta, phi = theta[keep], phi[keep]
        ring = R + r * np.cos(theta)
        pts = np.column_stack([ring * np.cos(phi), ring * np.sin(phi), r * np.sin(theta)])
        out = np.vstack([out, pts + np.asarray(center)])
    return out[:n]


def torus_residual(points: np.ndarray, R=TORUS_R, r=TORUS_r, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Euclidean distance from each point to the torus surface."""
    p = np.asarray(points) - np.asarray(center)
    ring = np.hypot(p[:, 0], p[:, 1]) - R
    return np.abs(np.hypot(ring, p[:, 2]) - r)


def _inside_torus(points, center, R=TORUS_R, r=TORUS_r):
    p = points - np.asarray(center)
    ring = np.hypot(p[:, 0], p[:, 1]) - R
    return np.hypot(ring, p[:, 2]) < r


def _double_torus(rng, n):
    # boundary of the union of two overlapping solid tori: a genus-2 surface
    left, right = (-DOUBLE_OFFSET, 0.0, 0.0), (DOUBLE_OFFSET, 0.0, 0.0)
    out = np.empty((0, 3))
    while len(out) < n:
        m = n - len(out) + 16
        a = _torus(rng, m, center=left)
        b = _torus(rng, m, center=right)
        a = a[~_inside_torus(a, right)]
        b = b[~_inside_torus(b, left)]
        both = np.vstack([a, b])
        out = np.vstack([out, both[rng.permutation(len(both))]])
    return out[:n]


def random_graph(rng: np.random.Generator, n_nodes: int, extra_edges: int = 0,
                 integer_values: bool = False) -> ScalarGraph:
    """Random connected generic graph: random spanning tree plus ``extra_edges``
    distinct non-tree edges (fewer if the graph is complete)."""
    ids = [f"v{i:02d}" for i in range(n_nodes)]
    order = rng.permutation(n_nodes)
    edges = set()
    for k in range(1, n_nodes):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    candidates = [(a, b) for a in range(n_nodes) for b in range(a + 1, n_nodes)
                  if (a, b) not in edges]
    if extra_edges and candidates:
        pick = rng.choice(len(candidates), size=min(extra_edges, len(candidates)), replace=False)
        edges.update(candidates[i] for i in pick)
    if integer_values:
        f = rng.permutation(4 * n_nodes)[:n_nodes].astype(float)
    else:
        f = rng.uniform(-1.0, 1.0, n_nodes)
    return ScalarGraph(tuple(zip(ids, map(float, f))),
                       tuple((ids[a], ids[b]) for a, b in sorted(edges)))
