"""Persistence images and node probability measures derived from them."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erf, logsumexp

from .graph import ScalarGraph, fmt_real
from .persistence import ExtendedDiagram

SIGMA_FLOOR = 1e-6
MEASURE_KINDS = ("pi", "uniform", "intensity", "degree", "lifespan")


class MeasureError(ValueError):
    """Raised when a measure has no positive mass to normalize."""


@dataclass(frozen=True)
class PIParams:
    sigma: float = 0.1
    resolution: int = 10
    weight_power: float = 1.0
    bounds: tuple[float, float, float, float] | None = None  # b_min, b_max, p_min, p_max

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if int(self.resolution) != self.resolution or self.resolution < 1:
            raise ValueError(f"resolution must be an integer >= 1, got {self.resolution}")
        if not self.weight_power >= 0:
            raise ValueError(f"weight_power must be >= 0, got {self.weight_power}")
        if self.bounds is not None:
            b0, b1, p0, p1 = self.bounds
            if not (b1 > b0 and p1 > p0):
                raise ValueError(f"empty bounds {self.bounds}")

    def with_bounds(self, bounds) -> "PIParams":
        return replace(self, bounds=None if bounds is None else tuple(float(x) for x in bounds))


@dataclass(frozen=True)
class BPPoint:
    b: float
    p: float
    nodes: tuple[str, str]


def birth_persistence(diagram: ExtendedDiagram) -> list[BPPoint]:
    """(b, d) -> (b, |d - b|), dropping zero-persistence points."""
    out = []
    for pt in diagram.points:
        p = abs(pt.death - pt.birth)
        if p > 0:
            out.append(BPPoint(pt.birth, p, (pt.birth_node, pt.death_node)))
    return out


def _coords(points) -> np.ndarray:
    if isinstance(points, ExtendedDiagram):
        points = birth_persistence(points)
    rows = [(q.b, q.p) if isinstance(q, BPPoint) else tuple(q) for q in points]
    return np.asarray(rows, dtype=float).reshape(-1, 2)


def auto_bounds(points, sigma: float) -> tuple[float, float, float, float]:
    """[min b, max b] x [0, max p], padded by 3 sigma on every side."""
    xy = _coords(points)
    pad = 3.0 * sigma
    if len(xy) == 0:
        return (-pad, pad, -pad, pad)
    return (float(xy[:, 0].min() - pad), float(xy[:, 0].max() + pad),
            -pad, float(xy[:, 1].max() + pad))


def union_bounds(bounds: Iterable[tuple[float, float, float, float]]):
    bs = np.array(list(bounds), dtype=float)
    return (float(bs[:, 0].min()), float(bs[:, 1].max()), float(bs[:, 2].min()), float(bs[:, 3].max()))


@dataclass(frozen=True, eq=False)
class PersistenceImage:
    params: PIParams
    values: np.ndarray  # (resolution, resolution); axis 0 = persistence, axis 1 = birth

    @property
    def bounds(self):
        return self.params.bounds

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        b0, b1, p0, p1 = self.params.bounds
        r = self.params.resolution
        return np.linspace(b0, b1, r + 1), np.linspace(p0, p1, r + 1)

    @property
    def centers(self) -> np.ndarray:
        """Pixel centers (b, p) in the row-major order of ``values``."""
        bx, py = self.edges
        cb = 0.5 * (bx[:-1] + bx[1:])
        cp = 0.5 * (py[:-1] + py[1:])
        P, B = np.meshgrid(cp, cb, indexing="ij")
        return np.column_stack([B.ravel(), P.ravel()])

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def to_json(self) -> str:
        p = self.params
        head = {"sigma": p.sigma, "resolution": p.resolution, "weight_power": p.weight_power}
        body = ",".join(fmt_real(x) for x in self.flat)
        bounds = ",".join(fmt_real(x) for x in p.bounds)
        return (f'{{"params":{json.dumps(head)},"bounds":[{bounds}],'
                f'"values":[{body}]}}')

    @classmethod
    def from_json(cls, text: str) -> "PersistenceImage":
        obj = json.loads(text)
        params = PIParams(**obj["params"], bounds=tuple(obj["bounds"]))
        r = params.resolution
        return cls(params, np.asarray(obj["values"], dtype=float).reshape(r, r))


def _interval_mass(edges: np.ndarray, centers: np.ndarray, sigma: float) -> np.ndarray:
    """Mass of N(c, sigma^2) in each [edges[k], edges[k+1]]; rows per center."""
    z = (edges[None, :] - centers[:, None]) / (np.sqrt(2.0) * sigma)
    cdf = 0.5 * erf(z)
    return np.diff(cdf, axis=1)


def build_pi(points, params: PIParams) -> PersistenceImage:
    """Pixel integrals of the weighted Gaussian mixture, computed exactly.

    ``points`` is a diagram, a list of BPPoint, or an (n, 2) array of (b, p).
    """
    xy = _coords(points)
    if params.bounds is None:
        params = params.with_bounds(auto_bounds(xy, params.sigma))
    r = params.resolution
    img = PersistenceImage(params, np.zeros((r, r)))
    if len(xy) == 0:
        return img
    bx, py = img.edges
    weights = xy[:, 1] ** params.weight_power
    mb = _interval_mass(bx, xy[:, 0], params.sigma)  # (n, r)
    mp = _interval_mass(py, xy[:, 1], params.sigma)
    values = np.einsum("j,jp,jb->pb", weights, mp, mb)
    return PersistenceImage(params, np.maximum(values, 0.0))


def gaussian(center: Sequence[float], x: np.ndarray, sigma: float) -> np.ndarray:
    d2 = np.sum((np.asarray(x) - np.asarray(center)) ** 2, axis=-1)
    return np.exp(-d2 / (2 * sigma * sigma)) / (2 * np.pi * sigma * sigma)


@dataclass(frozen=True, eq=False)
class NodeMeasure:
    ids: tuple[str, ...]
    probs: np.ndarray
    kind: str = ""

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        if self.probs.shape != (len(self.ids),):
            raise ValueError("measure length does not match ids")

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, node: str) -> float:
        return float(self.probs[self.ids.index(node)])

    def to_json(self) -> str:
        return "{" + ",".join(f"{json.dumps(i)}:{fmt_real(p)}" for i, p in zip(self.ids, self.probs)) + "}"

    @classmethod
    def from_json(cls, text: str) -> "NodeMeasure":
        obj = json.loads(text)
        ids = tuple(sorted(obj))
        return cls(ids, np.array([float(obj[i]) for i in ids]))

    @classmethod
    def from_scores(cls, ids, scores, kind: str = "") -> "NodeMeasure":
        scores = np.asarray(scores, dtype=float)
        total = scores.sum()
        if not total > 0:
            raise MeasureError(f"{kind or 'measure'}: all node scores are zero")
        return cls(tuple(ids), scores / total, kind)


def pi_log_contributions(graph: ScalarGraph, diagram: ExtendedDiagram,
                         image: PersistenceImage) -> np.ndarray:
    """log contrib(v) per node (-inf for nodes carrying no diagram point).

    contrib(v) sums, over the points v belongs to, the image weighted by the
    Gaussian centred at that point and sampled at pixel centres. Working in
    log space keeps the measure well defined for very small sigma, where
    every contribution underflows but their ratios do not.
    """
    sigma = image.params.sigma
    centers = image.centers
    with np.errstate(divide="ignore"):
        log_img = np.log(image.flat)
    log_norm = -np.log(2 * np.pi * sigma * sigma)
    out = np.full(graph.n_nodes, -np.inf)
    for q in birth_persistence(diagram):
        d2 = (centers[:, 0] - q.b) ** 2 + (centers[:, 1] - q.p) ** 2
        lc = logsumexp(log_img - d2 / (2 * sigma * sigma)) + log_norm
        for node in q.nodes:
            i = graph.node_index(node)
            out[i] = np.logaddexp(out[i], lc)
    return out


def pi_contributions(graph, diagram, image) -> np.ndarray:
    return np.exp(pi_log_contributions(graph, diagram, image))


def pi_measure(graph: ScalarGraph, diagram: ExtendedDiagram, params: PIParams,
               image: PersistenceImage | None = None) -> NodeMeasure:
    """Node measure proportional to each node's persistence-image contribution."""
    if image is None:
        image = build_pi(diagram, params)
    logc = pi_log_contributions(graph, diagram, image)
    if not np.isfinite(logc).any():
        raise MeasureError("pi: total contribution Z is zero (no positive-persistence point)")
    w = np.exp(logc - logc.max())
    return NodeMeasure(tuple(graph.ids), w / w.sum(), "pi")


def baseline_measure(graph: ScalarGraph, kind: str,
                     diagram: ExtendedDiagram | None = None) -> NodeMeasure:
    ids = graph.ids
    if kind == "uniform":
        return NodeMeasure(tuple(ids), np.full(graph.n_nodes, 1.0 / graph.n_nodes), kind)
    if kind == "intensity":
        return NodeMeasure.from_scores(ids, graph.f - graph.f.min(), kind)
    if kind == "degree":
        return NodeMeasure.from_scores(ids, [len(a) for a in graph.adjacency], kind)
    if kind == "lifespan":
        if diagram is None:
            raise ValueError("lifespan measure needs a diagram")
        scores = np.zeros(graph.n_nodes)
        for pt in diagram.points:
            for node in (pt.birth_node, pt.death_node):
                scores[graph.node_index(node)] += abs(pt.death - pt.birth)
        return NodeMeasure.from_scores(ids, scores, kind)
    raise ValueError(f"unknown measure kind {kind!r}")


def node_measure(graph: ScalarGraph, kind: str, diagram: ExtendedDiagram | None = None,
                 params: PIParams | None = None) -> NodeMeasure:
    if kind == "pi":
        return pi_measure(graph, diagram, params or PIParams())
    return baseline_measure(graph, kind, diagram)


def total_variation(mu: NodeMeasure | np.ndarray, nu: NodeMeasure | np.ndarray) -> float:
    a = mu.probs if isinstance(mu, NodeMeasure) else np.asarray(mu)
    b = nu.probs if isinstance(nu, NodeMeasure) else np.asarray(nu)
    return 0.5 * float(np.abs(a - b).sum())


def pi_stability_constant(params: PIParams) -> float:
    """sqrt(5)|grad w|_inf + sqrt(10/pi)|w|_inf / sigma for w = p^w_p on the
    persistence range of the image bounds (meaningful for w_p >= 1)."""
    if params.bounds is None:
        raise ValueError("stability constant needs explicit bounds")
    pmax = max(params.bounds[3], 0.0)
    wp = params.weight_power
    w_sup = pmax ** wp
    grad_sup = 0.0 if wp == 0 else (wp * pmax ** (wp - 1) if wp >= 1 else np.inf)
    return float(np.sqrt(5) * grad_sup + np.sqrt(10 / np.pi) * w_sup / params.sigma)
