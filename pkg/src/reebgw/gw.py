"""Gromov-Wasserstein distance between measured distance matrices.

The loss of a coupling pi is

    E(pi) = sum_{v,v',w,w'} |A[v,v'] - B[w,w']|^p pi[v,w] pi[v',w'],

and the returned distance is E^(1/p). E is a quadratic form in pi for every
p, so conditional gradient admits an exact closed-form line search.
"""

from __future__ import annotations

import hashlib
import io
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

# only the numpy backend of POT is used; skip probing the deep-learning stacks
for _key in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_key}", "1")
import ot  # noqa: E402
from scipy.special import logsumexp

from .metrics import DistanceMatrix
from .pimage import NodeMeasure

MARGINAL_TOL = 1e-9
_CHUNK = 4_000_000  # elements per block of the general-p contraction
_DIRECT_LOSS = 25_000_000  # n^2 m^2 below which reported losses use the direct sum


class GWWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverOpts:
    p: float = 2.0
    tol: float = 1e-9
    max_iter: int = 1000
    restarts: int = 1
    seed: int = 0
    solver: str = "cg"  # "cg" | "entropic"
    epsilon_reg: float = 1e-2  # relative to the largest gradient entry
    threads: int = 1
    init_spread: float = 1.0

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.solver not in ("cg", "entropic"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("restarts and max_iter must be >= 1")
        if self.solver == "entropic" and not self.epsilon_reg > 0:
            raise ValueError("epsilon_reg must be > 0")


@dataclass(frozen=True, eq=False)
class Coupling:
    values: np.ndarray
    row_ids: tuple[str, ...] = ()
    col_ids: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        n, m = self.values.shape
        if not self.row_ids:
            object.__setattr__(self, "row_ids", tuple(f"r{i}" for i in range(n)))
        if not self.col_ids:
            object.__setattr__(self, "col_ids", tuple(f"c{j}" for j in range(m)))

    @property
    def shape(self):
        return self.values.shape

    def marginal_error(self, mu1, mu2) -> float:
        return float(max(np.abs(self.values.sum(1) - mu1).max(),
                         np.abs(self.values.sum(0) - mu2).max()))

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        buf.write("node," + ",".join(self.col_ids) + "\n")
        for name, row in zip(self.row_ids, self.values):
            buf.write(name + "," + ",".join(format(float(x), ".17g") for x in row) + "\n")
        return buf.getvalue().encode()

    @classmethod
    def from_csv(cls, data: bytes | str) -> "Coupling":
        text = data.decode() if isinstance(data, bytes) else data
        lines = [ln.split(",") for ln in text.splitlines() if ln.strip()]
        cols = tuple(lines[0][1:])
        rows = tuple(ln[0] for ln in lines[1:])
        vals = np.array([[float(x) for x in ln[1:]] for ln in lines[1:]]).reshape(len(rows), len(cols))
        return cls(vals, rows, cols)


@dataclass
class GWResult:
    distance: float
    loss: float
    plan: Coupling
    trace: list[float] = field(default_factory=list)
    restarts: int = 1
    converged: bool = True
    n_iter: int = 0
    run_losses: list[float] = field(default_factory=list)


def plan_heatmap_export(result: GWResult) -> bytes:
    return result.plan.to_csv()


# ---------------------------------------------------------------- contractions

def _as_values(d) -> np.ndarray:
    return d.values if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=float)


def _as_probs(mu) -> np.ndarray:
    return mu.probs if isinstance(mu, NodeMeasure) else np.asarray(mu, dtype=float)


def tensor_product(A: np.ndarray, B: np.ndarray, P: np.ndarray, p: float,
                   method: str = "auto") -> np.ndarray:
    """T(P)[v,w] = sum_{v',w'} |A[v,v'] - B[w,w']|^p P[v',w'].

    ``method="factor"`` (p = 2 only) expands the square and uses the actual
    row and column sums of P; ``"direct"`` contracts block by block.
    """
    if method == "auto":
        method = "factor" if p == 2 else "direct"
    if method == "factor":
        if p != 2:
            raise ValueError("the factorized contraction is exact only for p = 2")
        r, c = P.sum(1), P.sum(0)
        return ((A * A) @ r)[:, None] + ((B * B) @ c)[None, :] - 2.0 * A @ P @ B.T
    n, m = A.shape[0], B.shape[0]
    out = np.empty((n, m))
    rows = max(1, _CHUNK // max(1, n * m * m))
    for s in range(0, n, rows):
        a = A[s:s + rows]  # (k, n)
        K = np.abs(a[:, :, None, None] - B[None, None, :, :])  # (k, n, m, m)
        if p != 1:
            K **= p
        out[s:s + rows] = np.einsum("kiwj,ij->kw", K, P)
    return out


def gw_loss(A, B, P, p: float, method: str = "auto") -> float:
    """E(P). The default sums nonnegative terms directly on small problems,
    so a zero-distortion plan scores exactly 0 (the p = 2 expansion leaves
    rounding residue of order 1e-17 there)."""
    A, B, P = _as_values(A), _as_values(B), np.asarray(P, dtype=float)
    if method == "auto" and (A.shape[0] * B.shape[0]) ** 2 <= _DIRECT_LOSS:
        method = "direct"
    return float(np.sum(P * tensor_product(A, B, P, p, method)))


def gw_loss_bruteforce(A, B, P, p: float) -> float:
    """Direct evaluation of the four-index sum (small inputs only)."""
    A, B, P = _as_values(A), _as_values(B), np.asarray(P, dtype=float)
    K = np.abs(A[:, :, None, None] - B[None, None, :, :]) ** p  # (v, v', w, w')
    return float(np.einsum("abcd,ac,bd->", K, P, P))


def gw_objective(d1, d2, plan, p: float = 2.0, mu1=None, mu2=None) -> float:
    """Distance E(plan)^(1/p). With measures given, marginals are checked."""
    P = plan.values if isinstance(plan, Coupling) else np.asarray(plan, dtype=float)
    if mu1 is not None and mu2 is not None:
        err = Coupling(P).marginal_error(_as_probs(mu1), _as_probs(mu2))
        if err > MARGINAL_TOL:
            raise ValueError(f"plan violates marginals by {err:.3g}")
    return max(gw_loss(d1, d2, P, p), 0.0) ** (1.0 / p)


# ------------------------------------------------------------------- OT pieces

def round_to_marginals(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Closest-feasible rounding of a near-coupling onto exact marginals."""
    P = np.asarray(P, dtype=float).copy()
    rs = P.sum(1)
    P *= np.divide(a, rs, out=np.zeros_like(a), where=rs > 0).clip(max=1.0)[:, None]
    cs = P.sum(0)
    P *= np.divide(b, cs, out=np.zeros_like(b), where=cs > 0).clip(max=1.0)[None, :]
    ea, eb = a - P.sum(1), b - P.sum(0)
    s = ea.sum()
    if s > 0:
        P += np.outer(ea, eb) / s
    return P


def sinkhorn_log(a: np.ndarray, b: np.ndarray, C: np.ndarray, eps: float,
                 max_iter: int = 1000, tol: float = 1e-12) -> np.ndarray:
    """Entropic OT plan in log domain; zero-mass rows/cols stay empty."""
    with np.errstate(divide="ignore"):
        la, lb = np.log(a), np.log(b)
    fu = np.zeros_like(a)
    gv = np.zeros_like(b)
    M = -C / eps
    for _ in range(max_iter):
        fu = la - logsumexp(M + gv[None, :], axis=1)
        fu[~np.isfinite(la)] = -np.inf
        gv_new = lb - logsumexp(M + fu[:, None], axis=0)
        gv_new[~np.isfinite(lb)] = -np.inf
        done = np.allclose(gv_new, gv, rtol=0, atol=tol, equal_nan=True)
        gv = gv_new
        if done:
            break
    P = np.exp(M + fu[:, None] + gv[None, :])
    return round_to_marginals(np.nan_to_num(P), a, b)


def _emd(a, b, C) -> np.ndarray:
    return ot.emd(a, b, C, numItermax=10_000_000)


# ---------------------------------------------------------------------- solver

def _cg_run(A, B, a, b, P, opts: SolverOpts, symmetric: bool):
    p = opts.p
    At, Bt = A.T, B.T

    def T(X):
        return tensor_product(A, B, X, p)

    def grad(X, TX):
        return 2.0 * TX if symmetric else TX + tensor_product(At, Bt, X, p)

    TP = T(P)
    E = float(np.sum(P * TP))
    trace = [E]
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        G = grad(P, TP)
        if opts.solver == "cg":
            X = _emd(a, b, G)
        else:
            scale = float(np.abs(G).max()) or 1.0
            X = sinkhorn_log(a, b, G - G.min(), opts.epsilon_reg * scale)
        D = X - P
        TD = T(D)
        quad = float(np.sum(D * TD))
        lin = float(np.sum(D * G)) if symmetric else float(np.sum(D * TP) + np.sum(P * TD))
        # minimize E + lin t + quad t^2 over [0, 1]
        cands = [1.0]
        if quad > 0:
            cands.append(min(max(-lin / (2 * quad), 0.0), 1.0))
        t = min(cands, key=lambda s: lin * s + quad * s * s)
        if not lin * t + quad * t * t < 0:
            converged = True
            break
        P_new = P + t * D
        TP_new = TP + t * TD
        E_new = float(np.sum(P_new * TP_new))
        if E_new >= E:
            converged = True
            break
        P, TP = P_new, TP_new
        rel = (E - E_new) / max(abs(E), 1e-300)
        E = E_new
        trace.append(E)
        if rel < opts.tol or E <= 0:
            converged = True
            break
    return P, E, trace, converged, it


def _random_coupling(a, b, rng, spread):
    K = np.exp(spread * rng.standard_normal((len(a), len(b))))
    P = K.copy()
    for _ in range(200):
        P *= np.divide(a, P.sum(1), out=np.zeros_like(a), where=P.sum(1) > 0)[:, None]
        P *= np.divide(b, P.sum(0), out=np.zeros_like(b), where=P.sum(0) > 0)[None, :]
    return round_to_marginals(P, a, b)


def _fingerprint(M: np.ndarray, mu: np.ndarray) -> bytes:
    # scale-free, so that scaling both inputs keeps the same orientation
    top = float(np.abs(M).max()) if M.size else 0.0
    h = hashlib.sha256()
    scaled = M / top if top > 0 else M
    h.update(np.ascontiguousarray(np.round(scaled, 12) + 0.0, dtype=float).tobytes())
    h.update(np.ascontiguousarray(mu, dtype=float).tobytes())
    return h.digest()


def _check_inputs(A, B, a, b):
    for name, M, mu in (("d1", A, a), ("d2", B, b)):
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"{name} must be square, got shape {M.shape}")
        if len(mu) != M.shape[0]:
            raise ValueError(f"measure length {len(mu)} does not match {name} size {M.shape[0]}")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(mu))):
            raise ValueError(f"non-finite entries in {name} or its measure")
        if np.any(mu < 0) or not mu.sum() > 0:
            raise ValueError(f"measure for {name} must be nonnegative with positive mass")


def solve_rgw(d1, d2, mu1, mu2, p: float | None = None,
              opts: SolverOpts | None = None) -> GWResult:
    """Conditional-gradient minimization of the GW loss with restarts.

    Runs start from the product coupling, from the most diagonal coupling when
    both sides have the same size, and from ``opts.restarts - 1`` seeded random
    couplings; the lowest loss wins. The inputs are put in a canonical order
    first, so swapping the two spaces returns the transposed plan.
    """
    opts = opts or SolverOpts()
    if p is not None and p != opts.p:
        opts = SolverOpts(**{**opts.__dict__, "p": float(p)})
    A, B = _as_values(d1), _as_values(d2)
    a, b = _as_probs(mu1).astype(float), _as_probs(mu2).astype(float)
    _check_inputs(A, B, a, b)
    if abs(a.sum() - 1) > 1e-6 or abs(b.sum() - 1) > 1e-6:
        warnings.warn("measures do not sum to 1; renormalizing", GWWarning, stacklevel=2)
    a, b = a / a.sum(), b / b.sum()
    symmetric = bool(np.allclose(A, A.T, rtol=0, atol=1e-12) and np.allclose(B, B.T, rtol=0, atol=1e-12))
    if not symmetric:
        warnings.warn("asymmetric distance matrix: result is not a metric", GWWarning, stacklevel=2)
    rows = getattr(d1, "ids", None) or getattr(mu1, "ids", None) or ()
    cols = getattr(d2, "ids", None) or getattr(mu2, "ids", None) or ()

    swap = (B.shape[0], _fingerprint(B, b)) < (A.shape[0], _fingerprint(A, a))
    if swap:
        A, B, a, b = B, A, b, a
    # the two marginals must agree in total mass bit for bit for the exact solver
    b = b * (a.sum() / b.sum())
    n, m = len(a), len(b)

    inits = [np.outer(a, b)]
    if n == m:
        inits.append(_emd(a, b, 1.0 - np.eye(n)))
    seeds = np.random.SeedSequence(opts.seed).spawn(max(opts.restarts - 1, 0))
    inits += [_random_coupling(a, b, np.random.default_rng(s), opts.init_spread) for s in seeds]

    def run(P0):
        return _cg_run(A, B, a, b, P0, opts, symmetric)

    if opts.threads > 1 and len(inits) > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            runs = list(pool.map(run, inits))
    else:
        runs = [run(P0) for P0 in inits]
    best = min(range(len(runs)), key=lambda k: (runs[k][1], k))
    P, E, trace, converged, n_iter = runs[best]
    P = np.maximum(P, 0.0)
    E = max(gw_loss(A, B, P, opts.p), 0.0)
    if swap:
        P = P.T
    return GWResult(
        distance=E ** (1.0 / opts.p), loss=E,
        plan=Coupling(P, tuple(rows), tuple(cols)),
        trace=trace, restarts=len(runs), converged=converged, n_iter=n_iter,
        run_losses=[r[1] for r in runs],
    )
