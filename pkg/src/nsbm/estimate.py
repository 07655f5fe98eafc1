"""Method-of-moments parameter estimation and probability-matrix reconstruction."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .core import EstimationError, LabelVector, as_weight_matrix, safe_power
from .spectral import KMeansConfig, baseline_cluster, right_sc

_DENOM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Observed block means T, their floored logs Y, and the usable target
    communities Psi_k for each source community."""

    T: np.ndarray  # n x K: mean weight from node i into community l
    Y: np.ndarray  # n x K: log(T_il) floored at log(1/n_l)
    psi: tuple[tuple[int, ...], ...]  # 1-based community indices, per k


@dataclass(frozen=True, eq=False)
class NsbmEstimate:
    """Method-of-moments estimates under the labels used to compute them.

    lambda_hat is NaN for nodes in communities where no off-diagonal block
    was usable (listed in failed_communities); B_hat has a unit diagonal by
    the identifiability convention and zeros outside Psi_k.
    """

    labels: LabelVector
    theta_hat: np.ndarray
    lambda_hat: np.ndarray
    B_hat: np.ndarray
    psi: tuple[tuple[int, ...], ...]
    failed_communities: tuple[int, ...] = ()

    @property
    def complete(self) -> bool:
        return not self.failed_communities

    def to_dict(self) -> dict:
        lam = [None if np.isnan(v) else float(v) for v in self.lambda_hat]
        M = connection_strength(self)
        return {
            "K": self.labels.K,
            "labels": self.labels.labels.tolist(),
            "theta_hat": [float(v) for v in self.theta_hat],
            "lambda_hat": lam,
            "B_hat": self.B_hat.tolist(),
            "psi": [list(p) for p in self.psi],
            "failed_communities": list(self.failed_communities),
            "M_hat": [[None if np.isnan(v) else float(v) for v in row]
                      for row in M],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def block_means(A, labels: LabelVector) -> np.ndarray:
    """T_il = (sum of weights from node i into community l) / n_l.

    The denominator is the full community size even for i's own community,
    where the structurally absent self-pair leaves an O(1/n_l) gap.
    """
    W = as_weight_matrix(A)
    sizes = labels.sizes
    if np.any(sizes == 0):
        raise ValueError("labels must cover every community 1..K")
    Z = labels.membership()
    return (W @ Z) / sizes


def _psi_sets(T: np.ndarray, labels: LabelVector,
              psi_min_frac: float | None) -> tuple[tuple[int, ...], ...]:
    """Usable target communities per source community.

    With psi_min_frac=None, community l qualifies only when every node of
    community k has a positive mean into l (the strict rule). A float
    relaxes this to "fraction of positive rows >= psi_min_frac, at least
    one positive", with the zero rows absorbed by the log floor.
    """
    K = labels.K
    psi = []
    for k in range(1, K + 1):
        rows = T[labels.indices(k)]
        members = []
        for l in range(K):
            frac = float(np.mean(rows[:, l] > 0))
            if psi_min_frac is None:
                ok = frac == 1.0
            else:
                ok = frac > 0 and frac >= psi_min_frac
            if ok:
                members.append(l + 1)
        psi.append(tuple(members))
    return tuple(psi)


def moment_table(A, labels: LabelVector,
                 psi_min_frac: float | None = None) -> MomentTable:
    """Block means, floored logs, and Psi sets for an observed graph."""
    T = block_means(A, labels)
    return _table_from_means(T, labels, psi_min_frac)


def _table_from_means(T: np.ndarray, labels: LabelVector,
                      psi_min_frac: float | None) -> MomentTable:
    sizes = labels.sizes
    Y = np.log(np.maximum(T, 1.0 / sizes))
    return MomentTable(T, Y, _psi_sets(T, labels, psi_min_frac))


def estimate_nsbm(A, labels: LabelVector,
                  psi_min_frac: float | None = None) -> NsbmEstimate:
    """Method-of-moments estimation of (theta, lambda, B) given labels.

    Works unchanged for binary and weighted graphs, since only first
    moments enter. theta_hat_i is the node's own-community block mean
    floored at 1/n_k; B_hat and lambda_hat come from log block-mean
    contrasts against the own community, averaged over the usable targets
    Psi_k. A community whose Psi_k contains nothing beyond itself has no
    contrast to scale lambda with and is reported as failed.
    """
    return estimate_from_block_means(block_means(A, labels), labels,
                                     psi_min_frac)


def estimate_from_block_means(T, labels: LabelVector,
                              psi_min_frac: float | None = None) -> NsbmEstimate:
    """Run the moment identities on precomputed block means (n x K).

    Feeding exact population means reproduces the true parameters exactly;
    this is the entry point for population oracles and for callers with
    their own moment pipelines.
    """
    T = np.asarray(T, dtype=float)
    n, K = labels.n, labels.K
    if T.shape != (n, K):
        raise ValueError(f"T must be {n}x{K}")
    sizes = labels.sizes
    table = _table_from_means(T, labels, psi_min_frac)
    Y = table.Y

    c0 = labels.labels - 1
    theta_hat = np.maximum(T[np.arange(n), c0], 1.0 / sizes[c0])

    B_hat = np.zeros((K, K))
    np.fill_diagonal(B_hat, 1.0)
    lambda_hat = np.full(n, np.nan)
    failed: list[int] = []

    for k in range(1, K + 1):
        idx = labels.indices(k)
        targets = [l for l in table.psi[k - 1] if l != k]
        if not targets:
            failed.append(k)
            continue
        cols = [l - 1 for l in targets]
        # contrasts Y_ik - Y_il; their community average estimates -log B_kl
        diffs = Y[np.ix_(idx, [k - 1] * len(cols))] - Y[np.ix_(idx, cols)]
        col_means = diffs.mean(axis=0)
        for l, m in zip(targets, col_means):
            B_hat[k - 1, l - 1] = np.exp(-m)
        numer = diffs.sum(axis=1)
        denom = float(col_means.sum())
        if abs(denom) < _DENOM_TOL:
            failed.append(k)
            continue
        lambda_hat[idx] = numer / denom

    return NsbmEstimate(labels, theta_hat, lambda_hat, B_hat,
                        table.psi, tuple(failed))


def _estimated_power(base, expo):
    """safe_power that tolerates estimated values: a zero block estimate
    with a negative lambda yields 0 with a warning instead of an error."""
    b, e = np.broadcast_arrays(np.asarray(base, dtype=float),
                               np.asarray(expo, dtype=float))
    bad = (b == 0.0) & (e < 0.0)
    if np.any(bad):
        warnings.warn("zero block estimate with negative lambda; "
                      "setting affected entries to 0", RuntimeWarning)
        b = b.copy()
        e = e.copy()
        e[bad] = 1.0  # any positive exponent: 0**1 = 0
    return safe_power(b, e)


def reconstruct_p(est: NsbmEstimate) -> np.ndarray:
    """Probability (or mean-weight) matrix implied by an estimate, with the
    same zero-diagonal and 0**0 conventions as the population matrix."""
    if not est.complete:
        raise EstimationError(
            f"lambda is undefined for communities {est.failed_communities}; "
            "cannot reconstruct the full matrix")
    c0 = est.labels.labels - 1
    block = est.B_hat[np.ix_(c0, c0)]
    P = est.theta_hat[:, None] * _estimated_power(block, est.lambda_hat[:, None])
    np.fill_diagonal(P, 0.0)
    return P


def connection_strength(model, labels: LabelVector | None = None) -> np.ndarray:
    """K x K expected average edge weight between communities.

    M_kl averages theta_i * B_kl**lam_i over senders i in community k; the
    value is the same whether or not the k = l self-pairs are excluded,
    because the summand does not depend on the receiver. Accepts true
    parameters or an estimate; failed communities propagate NaN rows.
    """
    if hasattr(model, "theta_hat"):
        theta, lam, B = model.theta_hat, model.lambda_hat, model.B_hat
        labels = labels if labels is not None else model.labels
    else:
        theta, lam, B = model.theta, model.lam, model.B
        labels = labels if labels is not None else model.labels
    K = labels.K
    if np.any(labels.sizes == 0):
        raise ValueError("every community needs at least one member")
    M = np.empty((K, K))
    for k in range(1, K + 1):
        idx = labels.indices(k)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pows = _estimated_power(B[k - 1][None, :], np.asarray(lam)[idx][:, None])
        M[k - 1] = (np.asarray(theta)[idx][:, None] * pows).mean(axis=0)
    return M


_BASELINE_MODELS = ("dsbm", "dcsbm", "scbm")


def _pair_counts(row_labels: LabelVector, col_labels: LabelVector) -> np.ndarray:
    """Number of ordered pairs (i, j), i != j, per (row block, col block)."""
    K_r, K_c = row_labels.K, col_labels.K
    counts = row_labels.sizes[:, None] * col_labels.sizes[None, :]
    overlap = np.zeros((K_r, K_c))
    for i in range(row_labels.n):
        overlap[row_labels.labels[i] - 1, col_labels.labels[i] - 1] += 1
    return counts - overlap


def _block_mass(W: np.ndarray, row_labels: LabelVector,
                col_labels: LabelVector) -> np.ndarray:
    Zr = row_labels.membership()
    Zc = col_labels.membership()
    return Zr.T @ W @ Zc


def _block_mean_estimate(W: np.ndarray, row_labels: LabelVector,
                         col_labels: LabelVector) -> np.ndarray:
    mass = _block_mass(W, row_labels, col_labels)
    pairs = _pair_counts(row_labels, col_labels)
    means = np.divide(mass, pairs, out=np.zeros_like(mass), where=pairs > 0)
    P = means[np.ix_(row_labels.labels - 1, col_labels.labels - 1)]
    np.fill_diagonal(P, 0.0)
    return P


def _degree_corrected_estimate(W: np.ndarray, row_labels: LabelVector,
                               col_labels: LabelVector) -> np.ndarray:
    """Degree-corrected plug-in with self-pairs excluded from the block
    normalization, so it degenerates exactly to the block-mean estimate
    when degrees are constant within blocks."""
    d_out = W.sum(axis=1)
    d_in = W.sum(axis=0)
    mass = _block_mass(W, row_labels, col_labels)
    out_mass = np.array([d_out[row_labels.indices(k)].sum()
                         for k in range(1, row_labels.K + 1)])
    in_mass = np.array([d_in[col_labels.indices(l)].sum()
                        for l in range(1, col_labels.K + 1)])
    # sum over i != j pairs of d_out_i * d_in_j within each block
    self_mass = np.zeros((row_labels.K, col_labels.K))
    for i in range(row_labels.n):
        self_mass[row_labels.labels[i] - 1, col_labels.labels[i] - 1] += \
            d_out[i] * d_in[i]
    denom = out_mass[:, None] * in_mass[None, :] - self_mass
    coef = np.divide(mass, denom, out=np.zeros_like(mass), where=denom > 0)
    P = d_out[:, None] * d_in[None, :] * \
        coef[np.ix_(row_labels.labels - 1, col_labels.labels - 1)]
    np.fill_diagonal(P, 0.0)
    return P


def estimate_baseline(A, K: int, model: str,
                      cfg: KMeansConfig | None = None) -> np.ndarray:
    """Probability-matrix estimates from the standard community models.

    dsbm fits per-block directed edge means on symmetric spectral clusters;
    dcsbm adds degree correction on the same clusters; scbm fits separate
    sender clusters (spherical left embedding) and receiver clusters (right
    embedding) with degree-corrected block means on their product.
    """
    if model not in _BASELINE_MODELS:
        raise ValueError(f"model must be one of {_BASELINE_MODELS}")
    W = as_weight_matrix(A)
    if model == "scbm":
        rows = baseline_cluster(W, K, "left_ssc", cfg)
        cols = right_sc(W, K, cfg)
        return _degree_corrected_estimate(W, rows, cols)
    labels = baseline_cluster(W, K, "symmetric_sc", cfg)
    if model == "dsbm":
        return _block_mean_estimate(W, labels, labels)
    return _degree_corrected_estimate(W, labels, labels)
