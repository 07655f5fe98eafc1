"""Edge-list ingestion, preprocessing, and the end-to-end analysis report."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .core import DataError, DirectedGraph, LabelVector
from .estimate import connection_strength, estimate_nsbm
from .spectral import KMeansConfig, right_sc, right_smst


@dataclass(frozen=True, eq=False)
class EdgeList:
    """Parsed edge records with duplicate pairs merged and self-loops dropped."""

    records: tuple[tuple[str, str, float], ...]
    node_ids: tuple[str, ...]
    self_loops_dropped: int = 0

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def to_graph(self) -> DirectedGraph:
        index = {v: i for i, v in enumerate(self.node_ids)}
        W = np.zeros((self.n, self.n))
        for src, dst, w in self.records:
            W[index[src], index[dst]] = w
        return DirectedGraph(W)


def load_edge_list(path, fmt: str = "csv") -> EdgeList:
    """Read a `source,target,weight` CSV (weight optional, defaulting to 1).

    Duplicate (source, target) rows merge by summing weights; self-loops
    are dropped and counted. Malformed rows fail with their line number.
    """
    if fmt != "csv":
        raise DataError(f"unsupported edge-list format {fmt!r}")
    merged: dict[tuple[str, str], float] = {}
    node_ids: list[str] = []
    seen: set[str] = set()
    self_loops = 0

    def note(node: str) -> None:
        if node not in seen:
            seen.add(node)
            node_ids.append(node)

    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open edge list: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        cols = [c.strip().lower() for c in header]
        if cols[:2] != ["source", "target"] or len(cols) > 3 or \
                (len(cols) == 3 and cols[2] != "weight"):
            raise DataError(
                f"{path}: header must be 'source,target[,weight]', got {header}")
        has_weight = len(cols) == 3
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(cols):
                raise DataError(f"{path}:{lineno}: expected {len(cols)} fields, "
                                f"got {len(row)}")
            src, dst = row[0].strip(), row[1].strip()
            if not src or not dst:
                raise DataError(f"{path}:{lineno}: empty node id")
            if has_weight:
                try:
                    w = float(row[2])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad weight {row[2]!r}")
                if not math.isfinite(w) or w < 0:
                    raise DataError(f"{path}:{lineno}: weight must be a "
                                    f"non-negative finite number, got {row[2]}")
            else:
                w = 1.0
            if src == dst:
                self_loops += 1
                continue
            note(src)
            note(dst)
            merged[(src, dst)] = merged.get((src, dst), 0.0) + w

    if not merged:
        raise DataError(f"{path}: no usable edges")
    records = tuple((s, d, w) for (s, d), w in merged.items())
    return EdgeList(records, tuple(node_ids), self_loops)


def write_edge_list(graph: DirectedGraph, path, node_ids=None) -> None:
    """Write the nonzero entries as a `source,target,weight` CSV."""
    ids = node_ids if node_ids is not None \
        else [str(i) for i in range(graph.n)]
    W = graph.weights
    with open(path, "w", newline="") as f:
        f.write("source,target,weight\n")
        for i, j in zip(*np.nonzero(W)):
            f.write(f"{ids[i]},{ids[j]},{W[i, j]:g}\n")


def load_labels(path) -> dict[str, int]:
    """Read an `id,community` CSV into a mapping."""
    out: dict[str, int] = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open labels: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != ["id", "community"]:
            raise DataError(f"{path}: header must be 'id,community'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields")
            try:
                out[row[0].strip()] = int(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad community {row[1]!r}")
    if not out:
        raise DataError(f"{path}: no labels")
    return out


def write_labels(labels: LabelVector, path, node_ids=None) -> None:
    ids = node_ids if node_ids is not None \
        else [str(i) for i in range(labels.n)]
    with open(path, "w", newline="") as f:
        f.write("id,community\n")
        for i, lab in enumerate(labels.labels):
            f.write(f"{ids[i]},{lab}\n")


def load_scores(path) -> dict[str, float]:
    """Read an `id,score` CSV of external per-node scores (e.g. rankings)."""
    out: dict[str, float] = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open scores: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != ["id", "score"]:
            raise DataError(f"{path}: header must be 'id,score'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields")
            try:
                out[row[0].strip()] = float(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad score {row[1]!r}")
    return out


@dataclass(frozen=True)
class PreprocessResult:
    graph: DirectedGraph
    kept: tuple[int, ...]     # indices into the input graph
    removed: tuple[int, ...]
    weights_capped: int
    passes: int


def preprocess(graph: DirectedGraph, min_degree: int = 4,
               weight_cap: float = 2.0, iterate: bool = False) -> PreprocessResult:
    """Drop low-degree nodes, then truncate heavy edge weights.

    A node is removed when its in-degree or its out-degree (counting
    nonzero entries) is below min_degree. The filter runs once by default;
    iterate=True repeats it until no removal cascades remain. Afterwards
    any weight above 1 is set to weight_cap and weights up to 1 stay as
    they are.
    """
    W = graph.weights.copy()
    n = W.shape[0]
    keep = np.ones(n, dtype=bool)
    passes = 0
    while True:
        passes += 1
        sub = W[np.ix_(keep, keep)]
        out_deg = np.count_nonzero(sub, axis=1)
        in_deg = np.count_nonzero(sub, axis=0)
        ok = (out_deg >= min_degree) & (in_deg >= min_degree)
        if ok.all():
            break
        keep[np.flatnonzero(keep)[~ok]] = False
        if not keep.any():
            raise DataError("degree filter removed every node")
        if not iterate:
            break
    kept_idx = np.flatnonzero(keep)
    sub = W[np.ix_(kept_idx, kept_idx)]
    capped = int(np.count_nonzero(sub > 1.0))
    sub[sub > 1.0] = weight_cap
    return PreprocessResult(DirectedGraph(sub), tuple(int(i) for i in kept_idx),
                            tuple(int(i) for i in np.flatnonzero(~keep)),
                            capped, passes)


@dataclass(frozen=True, eq=False)
class AnalysisReport:
    """Detection + estimation results with communities ordered by their
    estimated within-community connection strength (strongest first)."""

    method: str
    K: int
    labels: LabelVector            # display-order communities, 1 = strongest
    node_ids: tuple[str, ...]
    B_hat: np.ndarray
    theta_hat: np.ndarray
    lambda_hat: np.ndarray
    M_hat: np.ndarray
    psi: tuple[tuple[int, ...], ...]
    failed_communities: tuple[int, ...]
    scores: dict[str, float] | None = None
    unmatched_score_ids: tuple[str, ...] = ()

    @property
    def sizes(self) -> np.ndarray:
        return self.labels.sizes

    def community_nodes(self, k: int) -> list[dict]:
        """Members of display community k, strongest nominators-of-own-kind
        first (descending lambda, NaN last)."""
        idx = self.labels.indices(k)
        lam = self.lambda_hat[idx]
        order = np.argsort(np.where(np.isnan(lam), -np.inf, lam))[::-1]
        rows = []
        for i in idx[order]:
            node_id = self.node_ids[i]
            row = {
                "id": node_id,
                "theta": float(self.theta_hat[i]),
                "lambda": None if np.isnan(self.lambda_hat[i])
                else float(self.lambda_hat[i]),
            }
            if self.scores is not None:
                row["score"] = self.scores.get(node_id)
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        def clean(x):
            return None if x is None or (isinstance(x, float) and math.isnan(x)) \
                else x

        communities = []
        for k in range(1, self.K + 1):
            nodes = self.community_nodes(k)
            entry = {"community": k, "size": int(self.sizes[k - 1]),
                     "nodes": nodes}
            if self.scores is not None:
                vals = [r["score"] for r in nodes if r.get("score") is not None]
                entry["mean_score"] = float(np.mean(vals)) if vals else None
                entry["median_score"] = float(np.median(vals)) if vals else None
            communities.append(entry)
        return {
            "method": self.method,
            "K": self.K,
            "n": self.labels.n,
            "sizes": self.sizes.tolist(),
            "labels": {self.node_ids[i]: int(self.labels.labels[i])
                       for i in range(self.labels.n)},
            "B_hat": [[clean(float(v)) for v in row] for row in self.B_hat],
            "M_hat": [[clean(float(v)) for v in row] for row in self.M_hat],
            "psi": [list(p) for p in self.psi],
            "failed_communities": list(self.failed_communities),
            "communities": communities,
            "unmatched_score_ids": list(self.unmatched_score_ids),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def analyze(graph: DirectedGraph, K: int, *, method: str = "right_sc",
            seed: int | None = None, kmeans_cfg: KMeansConfig | None = None,
            node_ids=None, scores: dict[str, float] | None = None,
            psi_min_frac: float | None = 0.0) -> AnalysisReport:
    """Cluster, fit the nomination model, and assemble the report.

    Communities are renumbered so that 1 has the largest estimated
    within-community strength M_kk, with ties broken by the mean external
    score when one is supplied. Estimation failures for individual
    communities are carried in the report instead of aborting.
    """
    if K < 2:
        raise ValueError("K must be >= 2: a single community is not an "
                         "identifiable nomination model")
    if method not in ("right_sc", "right_smst"):
        raise ValueError("method must be 'right_sc' or 'right_smst'")
    ids = tuple(node_ids) if node_ids is not None \
        else tuple(str(i) for i in range(graph.n))
    if len(ids) != graph.n:
        raise ValueError("node_ids length must match the graph")

    if method == "right_sc":
        cfg = kmeans_cfg or KMeansConfig(seed=seed)
        labels = right_sc(graph, K, cfg)
    else:
        labels = right_smst(graph, K)

    est = estimate_nsbm(graph, labels, psi_min_frac=psi_min_frac)
    M = connection_strength(est)

    unmatched: tuple[str, ...] = ()
    mean_scores = np.zeros(K)
    if scores is not None:
        unmatched = tuple(sorted(set(scores) - set(ids)))
        for k in range(1, K + 1):
            vals = [scores[ids[i]] for i in labels.indices(k)
                    if ids[i] in scores]
            mean_scores[k - 1] = np.mean(vals) if vals else -np.inf

    strength = np.diag(M)
    sort_key = np.where(np.isnan(strength), -np.inf, strength)
    # primary: descending M_kk; secondary: descending mean external score
    order = np.lexsort((-mean_scores, -sort_key))
    relabel = np.empty(K, dtype=np.int64)
    relabel[order] = np.arange(1, K + 1)

    new_labels = LabelVector(relabel[labels.labels - 1], K)
    B_new = est.B_hat[np.ix_(order, order)]
    M_new = M[np.ix_(order, order)]
    psi_new = tuple(tuple(sorted(int(relabel[l - 1]) for l in est.psi[k]))
                    for k in order)
    failed_new = tuple(sorted(int(relabel[k - 1])
                              for k in est.failed_communities))

    return AnalysisReport(
        method=method, K=K, labels=new_labels, node_ids=ids,
        B_hat=B_new, theta_hat=est.theta_hat, lambda_hat=est.lambda_hat,
        M_hat=M_new, psi=psi_new, failed_communities=failed_new,
        scores=scores, unmatched_score_ids=unmatched,
    )
