"""Clustering accuracy under label permutation and relative matrix error."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import LabelVector

_EXHAUSTIVE_MAX_K = 8


@dataclass(frozen=True)
class MisclusteringResult:
    """Best-permutation disagreement between predicted and true labels."""

    rate: float            # fraction of mismatched nodes
    per_community: float   # sum over k of |G_k missed| / n_k
    permutation: tuple[int, ...]  # permutation[a-1]: truth label for pred label a


def _as_labels(x) -> np.ndarray:
    if isinstance(x, LabelVector):
        return x.labels
    arr = np.asarray(x)
    return LabelVector(arr).labels


def misclustering(pred, truth) -> MisclusteringResult:
    """Misclustered proportion under the best permutation of cluster labels.

    Searches all K! permutations for K <= 8 and otherwise solves the
    equivalent optimal-assignment problem on the confusion matrix, which is
    exact for this linear objective.
    """
    p = _as_labels(pred)
    t = _as_labels(truth)
    if p.size != t.size:
        raise ValueError("label vectors must have equal length")
    n = t.size
    K = int(max(p.max(), t.max()))

    conf = np.zeros((K, K), dtype=np.int64)
    np.add.at(conf, (p - 1, t - 1), 1)

    if K <= _EXHAUSTIVE_MAX_K:
        best_perm, best_match = None, -1
        for perm in itertools.permutations(range(K)):
            match = int(conf[np.arange(K), perm].sum())
            if match > best_match:
                best_perm, best_match = perm, match
        perm = np.asarray(best_perm)
        matches = best_match
    else:
        rows, cols = linear_sum_assignment(conf, maximize=True)
        perm = np.empty(K, dtype=np.int64)
        perm[rows] = cols
        matches = int(conf[rows, cols].sum())

    rate = 1.0 - matches / n

    aligned = perm[p - 1] + 1
    per_comm = 0.0
    for k in range(1, K + 1):
        members = t == k
        n_k = int(members.sum())
        if n_k == 0:
            continue
        per_comm += float(np.sum(members & (aligned != k))) / n_k

    return MisclusteringResult(rate, per_comm, tuple(int(v) + 1 for v in perm))


def relative_frobenius(P_hat, P_tilde) -> float:
    """Squared Frobenius error of P_hat relative to P_tilde, both taken
    with their diagonals zeroed (self-loops carry no signal)."""
    P_hat = np.array(P_hat, dtype=float)
    P_tilde = np.array(P_tilde, dtype=float)
    if P_hat.shape != P_tilde.shape:
        raise ValueError("matrices must have the same shape")
    np.fill_diagonal(P_hat, 0.0)
    np.fill_diagonal(P_tilde, 0.0)
    denom = float(np.sum(P_tilde ** 2))
    if denom == 0.0:
        raise ValueError("reference matrix is zero off the diagonal")
    return float(np.sum((P_tilde - P_hat) ** 2)) / denom
