"""DAG-constrained linear SEM estimation by per-node least squares.

The model for a column vector of expressions z is z = Qᵀz + ε with Q strictly
upper triangular in topological coordinates and Var(ε) = R = diag(r_1..r_p).
Each node is fit by OLS of its column on its parents' columns with a two-group
intercept design W = [1, g]; the projection onto W is applied implicitly by
centering each group at its own mean, which is algebraically identical and
costs O(np) instead of forming an n×n projector.

Everything in this module indexes nodes by *topological position*; `fit_sem`
translates from the original column order at entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    InsufficientSamples,
    RankDeficientDesign,
    ZeroResidualVariance,
)
from .pathway import PathwayDag


@dataclass(frozen=True, eq=False)
class GroupedSample:
    """Expression matrix with a two-group label, group-1 rows first.

    Attributes:
        X: (n1+n2) × p matrix; rows are samples, columns genes.
        g: indicator vector, 1 for group-1 rows, 0 for group-2 rows.
        n1: number of group-1 samples (the leading rows).
        n2: number of group-2 samples.
    """

    X: np.ndarray
    g: np.ndarray
    n1: int
    n2: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        g = np.asarray(self.g, dtype=np.int8)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "g", g)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D matrix")
        n = self.n1 + self.n2
        if X.shape[0] != n or g.shape != (n,):
            raise ValueError("row count must equal n1 + n2 and match g")
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError("each group needs at least 2 samples")
        if not (np.all(g[: self.n1] == 1) and np.all(g[self.n1 :] == 0)):
            raise ValueError("rows must be ordered group-1 first, matching g")

    @classmethod
    def from_groups(cls, X1, X2) -> "GroupedSample":
        """Stack two per-group matrices (same column meaning) into one sample."""
        X1 = np.atleast_2d(np.asarray(X1, dtype=float))
        X2 = np.atleast_2d(np.asarray(X2, dtype=float))
        if X1.shape[1] != X2.shape[1]:
            raise ValueError("both groups must have the same number of columns")
        n1, n2 = X1.shape[0], X2.shape[0]
        g = np.concatenate([np.ones(n1, np.int8), np.zeros(n2, np.int8)])
        return cls(X=np.vstack([X1, X2]), g=g, n1=n1, n2=n2)

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def effective_n(self) -> float:
        """N = n1·n2/(n1+n2), the scale of the two-sample quadratic form."""
        return self.n1 * self.n2 / (self.n1 + self.n2)

    def group_means(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X[: self.n1].mean(axis=0), self.X[self.n1 :].mean(axis=0)

    @property
    def mean_diff(self) -> np.ndarray:
        """x̄⁽¹⁾ − x̄⁽²⁾ as a length-p vector."""
        m1, m2 = self.group_means()
        return m1 - m2

    @cached_property
    def centered(self) -> np.ndarray:
        """X with each group centered at its own column means: (I − P_W)X."""
        out = self.X.copy()
        out[: self.n1] -= out[: self.n1].mean(axis=0)
        out[self.n1 :] -= out[self.n1 :].mean(axis=0)
        return out

    def reorder_columns(self, order: Sequence[int]) -> "GroupedSample":
        return GroupedSample(
            X=self.X[:, list(order)], g=self.g, n1=self.n1, n2=self.n2
        )


@dataclass(frozen=True, eq=False)
class NodeFit:
    """Per-node OLS result.

    Attributes:
        j: topological position of the node.
        q_hat: parent coefficients, aligned with the parent set (length |S_j|).
        theta_hat: (θ̂₁, θ̂₂); θ̂₁ is the group-2 intercept of the parent-adjusted
            column and θ̂₂ the group-1 minus group-2 contrast.
        r_hat: residual variance with denominator n1+n2−|S_j|−4; this
            unusual denominator is what makes the *inverse* estimate unbiased,
            which is the quantity the test statistic consumes.
        dof: that denominator, kept for audit and serialization.
    """

    j: int
    q_hat: np.ndarray
    theta_hat: tuple[float, float]
    r_hat: float
    dof: int

    def __post_init__(self):
        object.__setattr__(self, "q_hat", np.asarray(self.q_hat, dtype=float))
        if self.r_hat < 0:
            raise ValueError("r_hat must be nonnegative")
        if self.dof < 1:
            raise ValueError("dof must be at least 1")

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "q_hat": self.q_hat.tolist(),
            "theta_hat": list(self.theta_hat),
            "r_hat": self.r_hat,
            "dof": self.dof,
        }


def fit_node(sample: GroupedSample, j: int, parents: Sequence[int]) -> NodeFit:
    """OLS fit of column j on its parent columns under the two-group design.

    The coefficient solve uses the group-centered columns (equivalent to
    projecting out W = [1, g]); a singular value decomposition of the centered
    parent block detects rank deficiency with threshold
    eps · max(n, |S_j|) · (largest parent column norm).

    Args:
        sample: the grouped expression matrix (columns in any fixed order).
        j: column index of the node.
        parents: column indices of its parents (may be empty).

    Returns:
        NodeFit; ``r_hat`` may be exactly 0 when the fit is exact — consumers
        that would divide by it are expected to reject that case.

    Raises:
        InsufficientSamples: fewer than |S_j| + 5 samples in total.
        RankDeficientDesign: collinear parent columns after centering.
    """
    parents = tuple(int(i) for i in parents)
    n = sample.n
    k = len(parents)
    dof = n - k - 4
    if dof < 1:
        raise InsufficientSamples(
            f"need n1+n2 >= |S_j|+5 for node {j}: n={n}, |S_j|={k}"
        )
    y_c = sample.centered[:, j]
    if k == 0:
        q_hat = np.zeros(0)
        resid_c = y_c
    else:
        A = sample.centered[:, list(parents)]
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        tol = np.finfo(float).eps * max(n, k) * np.linalg.norm(A, axis=0).max()
        rank = int(np.count_nonzero(s > tol))
        if rank < k:
            raise RankDeficientDesign(
                f"parent block of node {j} has rank {rank} < {k}"
            )
        q_hat = Vt.T @ ((U.T @ y_c) / s)
        resid_c = y_c - A @ q_hat
    r_hat = float(resid_c @ resid_c) / dof
    u = sample.X[:, j]
    if k:
        u = u - sample.X[:, list(parents)] @ q_hat
    theta1 = float(u[sample.n1 :].mean())
    theta2 = float(u[: sample.n1].mean()) - theta1
    return NodeFit(j=j, q_hat=q_hat, theta_hat=(theta1, theta2), r_hat=r_hat, dof=dof)


@dataclass(frozen=True, eq=False)
class SemEstimate:
    """Fitted SEM: coefficient matrix, residual variances, and the dag.

    ``Q_hat`` and ``R_hat`` live in topological coordinates: entry
    ``Q_hat[i, k]`` is the coefficient of the node in position i on its child
    in position k, nonzero only where the dag has an edge.
    """

    Q_hat: np.ndarray
    R_hat: np.ndarray
    dag: PathwayDag
    node_fits: tuple[NodeFit, ...] = ()

    def __post_init__(self):
        Q = np.asarray(self.Q_hat, dtype=float)
        R = np.asarray(self.R_hat, dtype=float)
        object.__setattr__(self, "Q_hat", Q)
        object.__setattr__(self, "R_hat", R)
        p = self.dag.p
        if Q.shape != (p, p) or R.shape != (p,):
            raise ValueError("Q_hat must be p×p and R_hat length p")
        if np.any(np.tril(Q) != 0.0):
            raise ValueError("Q_hat must be strictly upper triangular")
        allowed = np.zeros((p, p), dtype=bool)
        for k, parents in enumerate(self.dag.parent_sets):
            for i in parents:
                allowed[i, k] = True
        if np.any(Q[~allowed] != 0.0):
            raise ValueError("Q_hat has support outside the dag's parent sets")
        if np.any(R <= 0.0):
            bad = int(np.argmin(R))
            raise ZeroResidualVariance(
                f"residual variance at topological position {bad} is not positive"
            )

    def to_dict(self) -> dict:
        triples = [
            [int(i), int(k), float(self.Q_hat[i, k])]
            for i, k in zip(*np.nonzero(self.Q_hat))
        ]
        triples.sort(key=lambda t: (t[1], t[0]))
        return {
            "topo_order": list(self.dag.topo_order),
            "Q_triples": triples,
            "R_hat": self.R_hat.tolist(),
            "dof": [nf.dof for nf in self.node_fits] or None,
        }


def fit_sem(sample: GroupedSample, dag: PathwayDag) -> SemEstimate:
    """Fit every node of the dag and assemble the SEM estimate.

    Columns of ``sample.X`` are in original order; they are reordered to the
    dag's topological order internally. Node-level failures are re-raised with
    the offending node's label attached.

    Raises:
        RankDeficientDesign, InsufficientSamples: from individual node fits.
        ZeroResidualVariance: a node fit was exact (r̂ = 0), making the
            precision matrix undefined.
    """
    if sample.p != dag.p:
        raise ValueError(f"sample has {sample.p} columns but dag has p={dag.p}")
    topo_sample = sample.reorder_columns(dag.topo_order)
    p = dag.p
    Q = np.zeros((p, p))
    R = np.zeros(p)
    fits: list[NodeFit] = []
    for pos in range(p):
        label = dag.label_of(dag.topo_order[pos])
        try:
            nf = fit_node(topo_sample, pos, dag.parent_sets[pos])
        except (RankDeficientDesign, InsufficientSamples) as exc:
            raise type(exc)(f"node {label}: {exc}") from exc
        if nf.r_hat == 0.0:
            raise ZeroResidualVariance(
                f"node {label}: exact fit, residual variance estimate is 0"
            )
        fits.append(nf)
        if nf.q_hat.size:
            Q[list(dag.parent_sets[pos]), pos] = nf.q_hat
        R[pos] = nf.r_hat
    return SemEstimate(Q_hat=Q, R_hat=R, dag=dag, node_fits=tuple(fits))


# ---------------------------------------------------------------------------
# Covariance / precision assembly
# ---------------------------------------------------------------------------

def sem_precision(Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    """(I−Q)·diag(R)⁻¹·(I−Q)ᵀ for strictly upper Q and positive R."""
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0.0):
        raise ZeroResidualVariance("all residual variances must be positive")
    B = np.eye(Q.shape[0]) - Q
    return (B / R[np.newaxis, :]) @ B.T


def sem_covariance(Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    """(I−Qᵀ)⁻¹·diag(R)·(I−Q)⁻¹ via two unit-triangular solves.

    No explicit inverse is formed: both solves are forward substitutions
    against the unit lower-triangular factor (I−Q)ᵀ.
    """
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0.0):
        raise ZeroResidualVariance("all residual variances must be positive")
    Bt = (np.eye(Q.shape[0]) - Q).T
    half = solve_triangular(Bt, np.diag(R), lower=True, unit_diagonal=True)
    sigma_t = solve_triangular(Bt, half.T, lower=True, unit_diagonal=True)
    return sigma_t.T


def dag_precision(est: SemEstimate) -> np.ndarray:
    """DAG-informed precision estimate, in topological coordinates."""
    return sem_precision(est.Q_hat, est.R_hat)


def dag_covariance(est: SemEstimate) -> np.ndarray:
    """DAG-informed covariance estimate, in topological coordinates."""
    return sem_covariance(est.Q_hat, est.R_hat)
