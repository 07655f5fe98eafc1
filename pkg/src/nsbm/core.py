"""Domain types, identifiability checks, and population probability matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np


class NsbmError(Exception):
    """Base class for errors raised by this package."""


class DataError(NsbmError):
    """Malformed or unusable input data."""


class EstimationError(NsbmError):
    """A clustering or estimation step could not produce a usable result."""


def safe_power(base, expo):
    """Elementwise ``base ** expo`` with 0**0 = 1 and 0**e = 0 for e > 0.

    Raises ValueError when a zero base meets a negative exponent, which has
    no finite value under any convention.
    """
    b, e = np.broadcast_arrays(np.asarray(base, dtype=float),
                               np.asarray(expo, dtype=float))
    zero = b == 0.0
    if np.any(zero & (e < 0.0)):
        raise ValueError("0 raised to a negative power is undefined")
    out = np.ones(b.shape)
    np.power(b, e, out=out, where=~zero)
    if out.ndim == 0:
        return float(np.where(zero, np.where(e == 0.0, 1.0, 0.0), out))
    out[zero] = np.where(e[zero] == 0.0, 1.0, 0.0)
    return out


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabelVector:
    """Community assignment: integer labels in 1..K for each node.

    Communities may be empty (e.g. a clusterer using fewer than K labels);
    generators always produce labelings that cover every community.
    """

    labels: np.ndarray
    K: int = 0  # 0 means "infer from labels"

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1-D sequence")
        if not np.issubdtype(labels.dtype, np.integer):
            rounded = np.rint(labels)
            if not np.all(labels == rounded):
                raise ValueError("labels must be integers")
            labels = rounded
        K = int(self.K) if self.K else int(labels.max())
        if K < 1:
            raise ValueError("K must be >= 1")
        if labels.min() < 1 or labels.max() > K:
            raise ValueError(f"labels must lie in 1..{K}")
        object.__setattr__(self, "labels", _frozen_array(labels, dtype=np.int64))
        object.__setattr__(self, "K", K)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        """Community sizes n_1..n_K (zeros allowed)."""
        return np.bincount(self.labels, minlength=self.K + 1)[1:]

    def indices(self, k: int) -> np.ndarray:
        """Node indices belonging to community k (1-based k)."""
        return np.flatnonzero(self.labels == k)

    def membership(self) -> np.ndarray:
        """n x K one-hot membership matrix."""
        Z = np.zeros((self.n, self.K))
        Z[np.arange(self.n), self.labels - 1] = 1.0
        return Z


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Square non-negative weighted adjacency matrix with a zero diagonal."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weights must be a square matrix")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if np.any(np.diagonal(w) != 0):
            raise ValueError("self-loops are not allowed (diagonal must be 0)")
        object.__setattr__(self, "weights", _frozen_array(w))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def is_binary(self) -> bool:
        w = self.weights
        return bool(np.all((w == 0.0) | (w == 1.0)))

    @property
    def density(self) -> float:
        n = self.n
        if n < 2:
            return 0.0
        return float(np.count_nonzero(self.weights)) / (n * (n - 1))

    @property
    def out_degrees(self) -> np.ndarray:
        """Number of nonzero out-edges per node."""
        return np.count_nonzero(self.weights, axis=1)

    @property
    def in_degrees(self) -> np.ndarray:
        """Number of nonzero in-edges per node."""
        return np.count_nonzero(self.weights, axis=0)


def as_weight_matrix(graph) -> np.ndarray:
    """Accept a DirectedGraph or a raw square array and return the matrix."""
    if isinstance(graph, DirectedGraph):
        return graph.weights
    arr = np.asarray(graph, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("expected a square adjacency matrix")
    return arr


@dataclass(frozen=True, eq=False)
class NsbmParams:
    """Parameters of the nomination block model.

    theta[i] is node i's overall propensity to report edges, lam[i] its
    preference for reporting strong connections, B the K x K block matrix
    with unit diagonal, and rho the sparsity scale already folded into theta
    (kept for bookkeeping only).
    """

    labels: LabelVector
    B: np.ndarray
    theta: np.ndarray
    lam: np.ndarray
    rho: float = 1.0

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        lam = np.asarray(self.lam, dtype=float)
        K, n = self.labels.K, self.labels.n
        if B.shape != (K, K):
            raise ValueError(f"B must be {K}x{K}, got {B.shape}")
        if theta.shape != (n,) or lam.shape != (n,):
            raise ValueError("theta and lam must be length-n vectors")
        if np.any(B < 0) or np.any(B > 1):
            raise ValueError("B entries must lie in [0, 1]")
        object.__setattr__(self, "B", _frozen_array(B))
        object.__setattr__(self, "theta", _frozen_array(theta))
        object.__setattr__(self, "lam", _frozen_array(lam))
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def n(self) -> int:
        return self.labels.n

    @property
    def K(self) -> int:
        return self.labels.K


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the identifiability checks: violations and soft warnings."""

    violations: tuple[str, ...]
    warnings: tuple[str, ...]

    @property
    def identifiable(self) -> bool:
        return not self.violations


_LAMBDA_MEAN_TOL = 1e-12


def validate_nsbm_params(params: NsbmParams) -> ValidationReport:
    """Check the four identifiability conditions of the nomination block model.

    Conditions: unit block diagonal; every community has an off-diagonal
    block value strictly between 0 and its diagonal; positive theta; and
    unit mean of lam within each community. A rank-deficient B is reported
    as a warning (clustering theory assumes full rank, estimation does not).
    """
    B, labels = params.B, params.labels
    K = labels.K
    violations: list[str] = []
    warnings: list[str] = []

    sizes = labels.sizes
    for k in range(1, K + 1):
        if sizes[k - 1] == 0:
            violations.append(f"community {k} is empty")
    if any(sizes == 0):
        return ValidationReport(tuple(violations), tuple(warnings))

    for k in range(K):
        if abs(B[k, k] - 1.0) > _LAMBDA_MEAN_TOL:
            violations.append(
                f"condition 1: B[{k + 1},{k + 1}] = {B[k, k]:.6g}, expected 1")

    for k in range(K):
        ok = any(
            l != k and B[k, l] > 0 and abs(B[k, l] - B[k, k]) > _LAMBDA_MEAN_TOL
            for l in range(K)
        )
        if not ok and K > 1:
            violations.append(
                f"condition 2: row {k + 1} of B has no entry outside "
                f"{{0, B[{k + 1},{k + 1}]}}")
        if K == 1:
            # A single community has no off-diagonal block at all.
            violations.append("condition 2: K = 1 leaves no off-diagonal block")
            break

    if np.any(params.theta <= 0):
        bad = int(np.argmax(params.theta <= 0))
        violations.append(
            f"condition 3: theta[{bad}] = {params.theta[bad]:.6g} is not positive")

    for k in range(1, K + 1):
        mean_lam = float(params.lam[labels.indices(k)].mean())
        if abs(mean_lam - 1.0) > _LAMBDA_MEAN_TOL:
            violations.append(
                f"condition 4: mean lambda over community {k} is "
                f"{mean_lam:.12g}, expected 1")

    if np.linalg.matrix_rank(B) < K:
        warnings.append(f"B has rank < {K}; clustering guarantees assume full rank")

    return ValidationReport(tuple(violations), tuple(warnings))


def expected_matrix(params: NsbmParams) -> np.ndarray:
    """Population mean matrix: entry (i, j) is theta_i * B[c_i, c_j] ** lam_i.

    The diagonal is forced to zero (no self-loops). Uses 0**0 = 1, so nodes
    with lam_i = 0 report everything at rate theta_i.
    """
    c = params.labels.labels - 1
    block = params.B[np.ix_(c, c)]
    P = params.theta[:, None] * safe_power(block, params.lam[:, None])
    np.fill_diagonal(P, 0.0)
    return P


class NominationFunctions:
    """Per-node nomination functions f_i: [0, 1] -> [0, 1].

    f_i(x) is the probability that node i reports an existing edge whose
    underlying connection probability is x.
    """

    def __init__(self, fns: Sequence[Callable[[float], float]]):
        self._fns = tuple(fns)
        if not self._fns:
            raise ValueError("need at least one nomination function")

    @property
    def n(self) -> int:
        return len(self._fns)

    def probability(self, i: int, x: float) -> float:
        val = float(self._fns[i](float(x)))
        if not 0.0 <= val <= 1.0:
            raise ValueError(
                f"nomination function {i} returned {val:.6g} at x={x:.6g}, "
                "outside [0, 1]")
        return val

    @classmethod
    def constant(cls, rho, n: int | None = None) -> "NominationFunctions":
        """Every node reports each of its edges with a fixed probability."""
        rho_arr = np.asarray(rho, dtype=float)
        if rho_arr.ndim == 0:
            if n is None:
                raise ValueError("scalar rho needs an explicit n")
            rho_arr = np.full(n, float(rho_arr))
        return cls([(lambda x, r=float(r): r) for r in rho_arr])

    @classmethod
    def power(cls, theta, lam) -> "NominationFunctions":
        """f_i(x) = theta_i * x ** (lam_i - 1), the nomination-model family."""
        theta = np.asarray(theta, dtype=float)
        lam = np.asarray(lam, dtype=float)
        if theta.shape != lam.shape or theta.ndim != 1:
            raise ValueError("theta and lam must be 1-D with equal length")
        return cls([
            (lambda x, t=float(t), e=float(e) - 1.0: t * safe_power(x, e))
            for t, e in zip(theta, lam)
        ])

    @classmethod
    def egocentric(cls, reporting) -> "NominationFunctions":
        """Each node reports all of its edges or none (0/1 respondents)."""
        flags = np.asarray(reporting, dtype=bool)
        return cls([(lambda x, v=float(f): v) for f in flags])

    @classmethod
    def from_table(cls, table, n: int | None = None) -> "NominationFunctions":
        """Lookup-table functions; `table` is one mapping shared by all nodes
        or a sequence of per-node mappings from connection probability to
        report probability."""
        if isinstance(table, Mapping):
            if n is None:
                raise ValueError("shared table needs an explicit n")
            tables = [table] * n
        else:
            tables = list(table)

        def make(tab):
            def f(x: float) -> float:
                try:
                    return float(tab[x])
                except KeyError:
                    raise ValueError(f"no table entry for connection value {x!r}")
            return f

        return cls([make(t) for t in tables])


def expected_matrix_general(B, labels: LabelVector,
                            fns: NominationFunctions) -> np.ndarray:
    """Population mean matrix of the general nomination model.

    Entry (i, j) is B[c_i, c_j] * f_i(B[c_i, c_j]); the diagonal is zero.
    """
    B = np.asarray(B, dtype=float)
    if np.any(B < 0) or np.any(B > 1):
        raise ValueError("B entries must lie in [0, 1]")
    if fns.n != labels.n:
        raise ValueError("one nomination function per node required")
    c = labels.labels - 1
    # f_i depends on j only through the block of j, so evaluate per block.
    nom = np.empty((labels.n, labels.K))
    for i in range(labels.n):
        for l in range(labels.K):
            nom[i, l] = fns.probability(i, B[c[i], l])
    P = B[np.ix_(c, c)] * nom[np.arange(labels.n)[:, None], c[None, :]]
    np.fill_diagonal(P, 0.0)
    return P
