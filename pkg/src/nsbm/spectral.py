"""Rank-K SVD embedding and the spectral clustering algorithms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import EstimationError, LabelVector, as_weight_matrix

_SPARSE_DENSITY = 0.10
_SPARSE_MIN_DIM = 200


@dataclass(frozen=True, eq=False)
class SvdFactors:
    """Rank-K factorization M ~= U @ diag(D) @ V.T with descending D."""

    U: np.ndarray
    D: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        if self.U.shape[1] != self.D.size or self.V.shape[1] != self.D.size:
            raise ValueError("inconsistent factor shapes")

    @property
    def rank(self) -> int:
        return self.D.size


def _fix_signs(U: np.ndarray, V: np.ndarray) -> None:
    """Flip column signs in place so each V column's largest-magnitude entry
    (first index on ties) is non-negative."""
    for j in range(V.shape[1]):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0:
            V[:, j] *= -1.0
            U[:, j] *= -1.0


def truncated_svd(M, K: int) -> SvdFactors:
    """Best rank-K factorization with a deterministic sign convention.

    Uses a sparse (ARPACK) path for large low-density matrices with a fixed
    starting vector, and dense LAPACK otherwise; the two agree on singular
    values to well below 1e-8. K larger than the numerical rank is fine:
    trailing zero singular values keep LAPACK's deterministic basis.
    """
    M = as_weight_matrix(M) if not isinstance(M, np.ndarray) else M
    M = np.asarray(M, dtype=float)
    n, m = M.shape
    if K < 1 or K > min(n, m):
        raise ValueError(f"need 1 <= K <= {min(n, m)}")

    density = np.count_nonzero(M) / max(M.size, 1)
    if density < _SPARSE_DENSITY and min(n, m) >= _SPARSE_MIN_DIM \
            and K <= min(n, m) - 2:
        try:
            dim = min(n, m)
            v0 = np.full(dim, 1.0 / np.sqrt(dim))
            U, s, Vt = spla.svds(sp.csr_matrix(M), k=K, v0=v0,
                                 solver="arpack")
            order = np.argsort(s)[::-1]
            U, s, Vt = U[:, order], s[order], Vt[order]
            V = Vt.T.copy()
            U = U.copy()
            _fix_signs(U, V)
            return SvdFactors(U, s, V)
        except Exception:
            pass  # zero matrices and hard-to-converge cases go dense

    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    U, s, V = U[:, :K].copy(), s[:K].copy(), Vt[:K].T.copy()
    _fix_signs(U, V)
    return SvdFactors(U, s, V)


@dataclass(frozen=True)
class KMeansConfig:
    """K-means++ seeding plus Lloyd iterations, best of `restarts` runs."""

    restarts: int = 20
    max_iter: int = 300
    tol: float = 1e-9  # relative objective change
    seed: int | None = None

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


def _kmeans_pp(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, K):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = X[idx]
        np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1), out=d2)
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int, tol: float):
    """One Lloyd run; returns (labels, inertia, objective history)."""
    n = X.shape[0]
    K = centers.shape[0]
    centers = centers.copy()
    prev = None
    history = []
    labels = np.zeros(n, dtype=np.int64)
    inertia = 0.0
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(n), labels]
        inertia = float(point_d2.sum())
        history.append(inertia)
        if prev is not None and prev - inertia <= tol * prev:
            break
        prev = inertia
        for k in range(K):
            mask = labels == k
            if mask.any():
                centers[k] = X[mask].mean(axis=0)
            else:
                far = int(point_d2.argmax())
                centers[k] = X[far]
                point_d2[far] = 0.0
    return labels, inertia, history


def kmeans(X, K: int, cfg: KMeansConfig | None = None):
    """Cluster rows of X into K groups; returns (0-based labels, inertia).

    Restarts use independently derived seeds, so the best run does not
    depend on execution order. An empty cluster in the winning run means K
    exceeds the number of distinct points and raises EstimationError.
    """
    cfg = cfg or KMeansConfig()
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if K < 1 or K > X.shape[0]:
        raise ValueError(f"need 1 <= K <= {X.shape[0]}")
    ss = np.random.SeedSequence(cfg.seed)
    best_labels, best_inertia = None, np.inf
    for child in ss.spawn(cfg.restarts):
        rng = np.random.Generator(np.random.Philox(child))
        centers = _kmeans_pp(X, K, rng)
        labels, inertia, _ = _lloyd(X, centers, cfg.max_iter, cfg.tol)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    if np.unique(best_labels).size < K:
        raise EstimationError(
            f"K-means produced an empty cluster: fewer than {K} "
            "distinguishable groups in the embedding")
    return best_labels, best_inertia


def _canonical(raw: np.ndarray, K: int) -> LabelVector:
    """Relabel clusters 1..K by order of first appearance."""
    mapping: dict[int, int] = {}
    out = np.empty(raw.size, dtype=np.int64)
    for i, v in enumerate(raw):
        v = int(v)
        if v not in mapping:
            mapping[v] = len(mapping) + 1
        out[i] = mapping[v]
    return LabelVector(out, K)


def right_sc(A, K: int, cfg: KMeansConfig | None = None) -> LabelVector:
    """Spectral clustering on the rows of the rank-K right singular matrix.

    The column space of the observed adjacency carries the community
    structure even when each node reports its edges at its own
    idiosyncratic rate, so the right singular vectors are the informative
    side for nominated data.
    """
    W = as_weight_matrix(A)
    V = truncated_svd(W, K).V
    raw, _ = kmeans(V, K, cfg)
    return _canonical(raw, K)


def _mst_edges(X: np.ndarray):
    """Dense Prim pass over the complete Euclidean graph on rows of X.

    Returns n-1 edges (dist, i, j); ties resolved by lowest node index.
    """
    n = X.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    d2 = ((X - X[0]) ** 2).sum(axis=1)
    parent = np.zeros(n, dtype=np.int64)
    edges = []
    for _ in range(n - 1):
        masked = np.where(in_tree, np.inf, d2)
        j = int(np.argmin(masked))
        edges.append((float(np.sqrt(d2[j])), int(parent[j]), j))
        in_tree[j] = True
        nd2 = ((X - X[j]) ** 2).sum(axis=1)
        closer = (nd2 < d2) & ~in_tree
        d2[closer] = nd2[closer]
        parent[closer] = j
    return edges


def right_smst(A, K: int) -> LabelVector:
    """Cluster by cutting the K-1 heaviest edges of the minimum spanning
    tree over the embedded rows of the rank-K right singular matrix."""
    W = as_weight_matrix(A)
    n = W.shape[0]
    if K < 1 or K > n:
        raise ValueError(f"need 1 <= K <= {n}")
    V = truncated_svd(W, K).V
    if K == 1 or n == 1:
        return LabelVector(np.ones(n, dtype=np.int64), K)
    edges = sorted(_mst_edges(V))
    kept = edges[: len(edges) - (K - 1)]

    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for _, i, j in kept:
        parent[find(i)] = find(j)

    labels = np.empty(n, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i in range(n):
        root = find(i)
        if root not in mapping:
            mapping[root] = len(mapping) + 1
        labels[i] = mapping[root]
    return LabelVector(labels, K)


def symmetrize(W, rule: str = "max") -> np.ndarray:
    """Undirected version of a directed matrix: elementwise max keeps an
    edge if there is one in either direction (binary OR); "sum" adds the
    two directions instead."""
    W = np.asarray(W, dtype=float)
    if rule == "max":
        return np.maximum(W, W.T)
    if rule == "sum":
        return W + W.T
    raise ValueError(f"unknown symmetrization rule {rule!r}")


_BASELINES = ("left_sc", "left_ssc", "symmetric_sc", "symmetric_ssc")


def _row_normalize(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    out = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
    return out


def baseline_cluster(A, K: int, method: str,
                     cfg: KMeansConfig | None = None,
                     symmetrize_rule: str = "max") -> LabelVector:
    """Reference clusterings that ignore the nomination mechanism.

    left_sc / left_ssc embed with the left singular vectors (spherical
    normalization for the ssc variant, zero rows left at the origin);
    symmetric_sc / symmetric_ssc symmetrize first and use the adjacency
    eigenvector embedding.
    """
    if method not in _BASELINES:
        raise ValueError(f"method must be one of {_BASELINES}")
    W = as_weight_matrix(A)
    if method.startswith("left"):
        X = truncated_svd(W, K).U
    else:
        X = truncated_svd(symmetrize(W, symmetrize_rule), K).V
    if method.endswith("ssc"):
        X = _row_normalize(X)
    raw, _ = kmeans(X, K, cfg)
    return _canonical(raw, K)


_RANK_TOL = 1e-10


@dataclass(frozen=True)
class DiagnosticsReport:
    """Signal-strength diagnostics for a population matrix."""

    sigma_k: float
    max_entry: float
    theorem1_ratio: float  # K * n * max_entry / sigma_k**2; inf if rank-deficient
    incoherence_u: float   # sqrt(n) * max row norm of U
    incoherence_v: float
    rank_deficient: bool


def theory_diagnostics(Ptilde, K: int) -> DiagnosticsReport:
    """Report the quantities controlling clustering difficulty: the K-th
    singular value, the max entry, their misclustering-bound ratio, and the
    row-incoherence of both singular-vector matrices (perfect incoherence
    is O(1), the regime where the spanning-tree method recovers exactly)."""
    P = np.asarray(Ptilde, dtype=float)
    n = P.shape[0]
    f = truncated_svd(P, K)
    sigma_k = float(f.D[-1])
    max_entry = float(P.max())
    deficient = sigma_k < _RANK_TOL
    ratio = np.inf if deficient else K * n * max_entry / sigma_k ** 2
    inc_u = float(np.sqrt(n) * np.linalg.norm(f.U, axis=1).max())
    inc_v = float(np.sqrt(n) * np.linalg.norm(f.V, axis=1).max())
    return DiagnosticsReport(sigma_k, max_entry, float(ratio),
                             inc_u, inc_v, deficient)
