"""Samplers for the directed block model, edge nomination, and simulation designs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .core import (
    DirectedGraph,
    LabelVector,
    NominationFunctions,
    NsbmParams,
    as_weight_matrix,
    expected_matrix,
    safe_power,
)


def _rng(seed) -> np.random.Generator:
    """Counter-based generator; all draws happen in fixed row-major passes,
    so output never depends on scheduling or generation order."""
    return np.random.Generator(np.random.Philox(seed))


def sample_directed_sbm(B, labels: LabelVector, seed=None) -> DirectedGraph:
    """Directed block-model graph: edge i->j is Bernoulli(B[c_i, c_j])."""
    B = np.asarray(B, dtype=float)
    if np.any(B < 0) or np.any(B > 1):
        raise ValueError("B entries must lie in [0, 1]")
    c = labels.labels - 1
    P = B[np.ix_(c, c)]
    A = (_rng(seed).random((labels.n, labels.n)) < P).astype(float)
    np.fill_diagonal(A, 0.0)
    return DirectedGraph(A)


def sample_nominated(A: DirectedGraph, B, labels: LabelVector,
                     fns: NominationFunctions, seed=None) -> DirectedGraph:
    """Apply the edge-nomination mask: keep edge i->j with probability
    f_i(B[c_i, c_j]), independently. Output is elementwise <= A."""
    W = as_weight_matrix(A)
    if isinstance(A, DirectedGraph) and not A.is_binary:
        raise ValueError("nomination mask applies to binary graphs")
    B = np.asarray(B, dtype=float)
    c = labels.labels - 1
    nom = np.empty((labels.n, labels.K))
    for i in range(labels.n):
        for l in range(labels.K):
            nom[i, l] = fns.probability(i, B[c[i], l])
    P_report = nom[np.arange(labels.n)[:, None], c[None, :]]
    R = _rng(seed).random((labels.n, labels.n)) < P_report
    return DirectedGraph(W * R)


def sample_nsbm(params: NsbmParams, seed=None) -> DirectedGraph:
    """Draw the observed graph directly from the nomination block model:
    edge i->j is Bernoulli(theta_i * B[c_i, c_j] ** lam_i)."""
    P = expected_matrix(params)
    pmax = P.max()
    if pmax > 1.0:
        raise ValueError(
            f"max edge probability {pmax:.4g} exceeds 1; the parameter "
            "scaling is not a valid Bernoulli model")
    A = (_rng(seed).random(P.shape) < P).astype(float)
    np.fill_diagonal(A, 0.0)
    return DirectedGraph(A)


def sample_nsbm_poisson(params: NsbmParams, seed=None) -> DirectedGraph:
    """Weighted variant: edge weights are Poisson with the same means,
    which may exceed 1."""
    P = expected_matrix(params)
    W = _rng(seed).poisson(P).astype(float)
    np.fill_diagonal(W, 0.0)
    return DirectedGraph(W)


@dataclass(frozen=True)
class SimDesign:
    """One simulation configuration.

    beta is the off-diagonal block value, t the half-width of the
    log-uniform lambda draw, and theta_low_factor the low value of the
    two-point theta mixture. Binary designs calibrate the overall scale to
    target_avg_degree, weighted (Poisson) designs to target_avg_rowsum.
    """

    n: int
    K: int
    beta: float
    t: float
    theta_low_factor: float = 0.05
    target_avg_degree: float | None = None
    target_avg_rowsum: float | None = None
    weighted: bool = False
    seed: int | None = None

    def __post_init__(self):
        if self.K < 1 or self.K > self.n:
            raise ValueError("need 1 <= K <= n")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.t < 0:
            raise ValueError("t must be >= 0")
        if not 0.0 < self.theta_low_factor <= 1.0:
            raise ValueError("theta_low_factor must lie in (0, 1]")
        if self.weighted:
            if self.target_avg_rowsum is None:
                raise ValueError("weighted designs need target_avg_rowsum")
        elif self.target_avg_degree is None:
            raise ValueError("binary designs need target_avg_degree")

    @property
    def target(self) -> float:
        return float(self.target_avg_rowsum if self.weighted
                     else self.target_avg_degree)

    def replace(self, **changes) -> "SimDesign":
        fields = asdict(self)
        fields.update(changes)
        return SimDesign(**fields)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SimDesign":
        return cls(**json.loads(text))


def make_sim_params(design: SimDesign, seed=None) -> NsbmParams:
    """Draw model parameters for a simulation design.

    Labels are uniform over the K communities, log(lambda) is uniform on
    (-t, t) and rescaled so each community's lambda-mean is exactly 1, and
    theta is a two-point mixture c * {1, theta_low_factor} with the scale c
    solved in closed form so the expected average out-degree (binary) or
    row sum (weighted) hits the design target; the expectation is linear
    in c, so the target holds exactly for the realized draw.
    """
    if seed is None:
        seed = design.seed
    rng = _rng(seed)
    n, K = design.n, design.K

    while True:
        raw = rng.integers(1, K + 1, size=n)
        if np.bincount(raw, minlength=K + 1)[1:].min() > 0:
            break
    labels = LabelVector(raw, K)

    B = np.full((K, K), design.beta)
    np.fill_diagonal(B, 1.0)

    lam = np.exp(rng.uniform(-design.t, design.t, size=n))
    for k in range(1, K + 1):
        idx = labels.indices(k)
        lam[idx] *= idx.size / lam[idx].sum()

    theta_bar = np.where(rng.random(n) < 0.5, 1.0, design.theta_low_factor)

    # Expected row sum of node i is theta_i * (sum_l n_l B[c_i,l]^lam_i - 1);
    # the self term is B_kk^lam_i = 1. Linear in the global scale c.
    c0 = labels.labels - 1
    pow_block = safe_power(B[c0, :], lam[:, None])
    row_pow = pow_block @ labels.sizes - 1.0
    denom = float(theta_bar @ row_pow)
    c = design.target * n / denom
    theta = c * theta_bar

    params = NsbmParams(labels, B, theta, lam, rho=c)
    if not design.weighted:
        pmax = expected_matrix(params).max()
        if pmax > 1.0:
            raise ValueError(
                f"calibration pushes a Bernoulli probability to {pmax:.4g} > 1; "
                "lower target_avg_degree or raise n")
    return params


def sample_from_design(design: SimDesign, seed=None):
    """Draw (params, graph) for a design; binary or Poisson per the design."""
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(design.seed if seed is None else seed)
    param_seed, graph_seed = ss.spawn(2)
    params = make_sim_params(design, param_seed)
    if design.weighted:
        graph = sample_nsbm_poisson(params, graph_seed)
    else:
        graph = sample_nsbm(params, graph_seed)
    return params, graph
