"""Two-sample mean tests: the DAG-informed pair and classical baselines.

The headline statistic is the quadratic form of the mean difference in the
DAG-informed precision estimate,

    chi2 = N · (x̄⁽¹⁾−x̄⁽²⁾)ᵀ (I−Q̂) R̂⁻¹ (I−Q̂)ᵀ (x̄⁽¹⁾−x̄⁽²⁾),   N = n1·n2/(n1+n2),

referenced against chi_squared(p), and its standardization
z = (chi2 − p)/√(2p) referenced against a two-sided standard normal.

Baselines:

* Hotelling's T² with pooled covariance (denominator n1+n2−1) and the exact
  F(p, n1+n2−1−p) reference after the scale factor (n1+n2−p−1)/(p·(n1+n2−2)).
* Bai–Saranadasa: with n = n1+n2−2, τ = 1/n1 + 1/n2 and S_n the pooled
  covariance (denominator n),

      M   = ‖x̄⁽¹⁾−x̄⁽²⁾‖² − τ·tr S_n,
      B²  = n²/((n+2)(n−1)) · [tr S_n² − (tr S_n)²/n],
      Z   = M / √(2·τ²·(n+1)/n · B²),

  upper-tail standard-normal p-value (the statistic is negative-shifted under
  exact null data, so only large positive values are evidence).
* Chen–Qin: sum of within-group mean cross-products minus twice the
  cross-group mean product,

      T = Σ_{i≠j} x⁽¹⁾ᵢᵀx⁽¹⁾ⱼ/(n1(n1−1)) + Σ_{i≠j} x⁽²⁾ᵢᵀx⁽²⁾ⱼ/(n2(n2−1))
          − 2·Σ_{i,j} x⁽¹⁾ᵢᵀx⁽²⁾ⱼ/(n1·n2),

  standardized by the plug-in null variance
  2/(n1(n1−1))·tr(Σ₁²)^ + 2/(n2(n2−1))·tr(Σ₂²)^ + 4/(n1n2)·tr(Σ₁Σ₂)^,
  where the trace functionals use the leave-out cross-product estimators of
  the original construction; upper-tail normal p-value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import chi2 as chi2_dist
from scipy.stats import f as f_dist
from scipy.stats import norm

from .errors import (
    DimensionTooLarge,
    EmptyList,
    InsufficientSamples,
    SingularCovariance,
)
from .pathway import PathwayDag
from .sem import GroupedSample, SemEstimate, fit_sem

METHODS = ("t2dag_chi2", "t2dag_z", "hotelling", "bai_saranadasa", "chen_qin")


def reference_p_value(statistic: float, reference: Mapping) -> float:
    """p-value implied by a reference-distribution descriptor.

    Descriptors: ``{"family": "chi_squared", "df": k, "tail": "upper"}``,
    ``{"family": "standard_normal", "tail": "upper" | "two_sided"}``, and
    ``{"family": "f", "df1": a, "df2": b, "scale": s, "tail": "upper"}`` where
    the statistic is multiplied by ``s`` before the F tail is taken.
    """
    family = reference["family"]
    if family == "chi_squared":
        return float(chi2_dist.sf(statistic, df=reference["df"]))
    if family == "standard_normal":
        if reference.get("tail") == "two_sided":
            return float(2.0 * norm.sf(abs(statistic)))
        return float(norm.sf(statistic))
    if family == "f":
        scaled = statistic * reference.get("scale", 1.0)
        return float(f_dist.sf(scaled, reference["df1"], reference["df2"]))
    raise ValueError(f"unknown reference family {family!r}")


@dataclass(frozen=True, eq=False)
class TestResult:
    """One test outcome: statistic, reference law, p-value, and context.

    ``meta`` carries the pathway and sample dimensions (p, p0, d, Ne, n1, n2,
    N); graph entries are None for tests that do not use a graph.
    """

    method: str
    statistic: float
    reference: Mapping
    p_value: float
    meta: Mapping

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError("p_value must lie in [0, 1]")
        implied = reference_p_value(self.statistic, self.reference)
        if abs(implied - self.p_value) > 1e-12:
            raise ValueError(
                f"p_value {self.p_value} inconsistent with reference "
                f"(implied {implied})"
            )

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reference": dict(self.reference),
            "meta": dict(self.meta),
        }


def _meta(sample: GroupedSample, dag: PathwayDag | None) -> dict:
    return {
        "p": sample.p,
        "p0": dag.n_children if dag is not None else None,
        "d": dag.max_in_degree if dag is not None else None,
        "Ne": dag.n_edges if dag is not None else None,
        "n1": sample.n1,
        "n2": sample.n2,
        "N": sample.effective_n,
    }


def _result(method, statistic, reference, meta) -> TestResult:
    return TestResult(
        method=method,
        statistic=float(statistic),
        reference=reference,
        p_value=reference_p_value(float(statistic), reference),
        meta=meta,
    )


# ---------------------------------------------------------------------------
# DAG-informed pair
# ---------------------------------------------------------------------------

def t2dag(
    sample: GroupedSample,
    dag: PathwayDag,
    estimate: SemEstimate | None = None,
) -> tuple[TestResult, TestResult]:
    """The DAG-informed chi-squared statistic and its z standardization.

    The quadratic form is evaluated without forming the dense precision
    matrix: with y = (I−Q̂)ᵀ(x̄⁽¹⁾−x̄⁽²⁾) computed by one sparse parent-set
    sweep, chi2 = N·Σ_k y_k²/r̂_k, which is O(Ne + p).

    Args:
        estimate: optionally a pre-computed fit of (sample, dag); when omitted
            the SEM is fit here.

    Returns:
        (chi2 result, z result) sharing one SEM fit; the z statistic is
        exactly (chi2 − p)/√(2p).
    """
    est = estimate if estimate is not None else fit_sem(sample, dag)
    p = dag.p
    d_topo = sample.mean_diff[list(dag.topo_order)]
    y = d_topo.copy()
    for k, parents in enumerate(dag.parent_sets):
        if parents:
            y[k] -= est.Q_hat[list(parents), k] @ d_topo[list(parents)]
    chi2_stat = sample.effective_n * float(np.sum(y * y / est.R_hat))
    z_stat = (chi2_stat - p) / math.sqrt(2.0 * p)
    meta = _meta(sample, dag)
    chi2_res = _result(
        "t2dag_chi2",
        chi2_stat,
        {"family": "chi_squared", "df": p, "tail": "upper"},
        meta,
    )
    z_res = _result(
        "t2dag_z",
        z_stat,
        {"family": "standard_normal", "tail": "two_sided"},
        meta,
    )
    return chi2_res, z_res


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def hotelling(sample: GroupedSample, dag: PathwayDag | None = None) -> TestResult:
    """Classical Hotelling T² with the exact F reference.

    Args:
        dag: optional, used only to fill the graph entries of ``meta``.

    Raises:
        DimensionTooLarge: unless n1+n2 > p+1.
        SingularCovariance: pooled covariance not positive definite.
    """
    p, n = sample.p, sample.n
    if n <= p + 1:
        raise DimensionTooLarge(
            f"Hotelling T2 needs n1+n2 > p+1; got n1+n2={n}, p={p}"
        )
    centered = sample.centered
    pooled = centered.T @ centered / (n - 1)
    diff = sample.mean_diff
    try:
        factor = cho_factor(pooled)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"pooled covariance is singular: {exc}") from exc
    t2 = sample.effective_n * float(diff @ cho_solve(factor, diff))
    scale = (n - p - 1) / (p * (n - 2))
    reference = {
        "family": "f",
        "df1": p,
        "df2": n - 1 - p,
        "scale": scale,
        "tail": "upper",
    }
    return _result("hotelling", t2, reference, _meta(sample, dag))


def _bai_saranadasa_statistic(sample: GroupedSample) -> float:
    n1, n2 = sample.n1, sample.n2
    n = n1 + n2 - 2
    tau = (n1 + n2) / (n1 * n2)
    centered = sample.centered
    pooled = centered.T @ centered / n
    tr_s = float(np.trace(pooled))
    tr_s2 = float(np.sum(pooled * pooled))
    m_stat = float(sample.mean_diff @ sample.mean_diff) - tau * tr_s
    b2 = n * n / ((n + 2.0) * (n - 1.0)) * (tr_s2 - tr_s * tr_s / n)
    variance = 2.0 * tau * tau * (n + 1.0) / n * b2
    if not variance > 0.0:
        raise SingularCovariance(
            "variance estimate of the mean-norm statistic is not positive"
        )
    return m_stat / math.sqrt(variance)


def _within_trace(X: np.ndarray) -> float:
    """Leave-two-out estimate of tr(Σ²) from one group's rows."""
    n = X.shape[0]
    gram = X @ X.T
    row_sum = gram.sum(axis=1)
    adj = gram - (row_sum[:, None] - np.diag(gram)[:, None] - gram) / (n - 2.0)
    np.fill_diagonal(adj, 0.0)
    return float(np.sum(adj * adj.T)) / (n * (n - 1.0))


def _cross_trace(X1: np.ndarray, X2: np.ndarray) -> float:
    """Leave-one-out estimate of tr(Σ₁Σ₂) from both groups' rows."""
    n1, n2 = X1.shape[0], X2.shape[0]
    cross = X1 @ X2.T
    left = cross - (cross.sum(axis=0)[None, :] - cross) / (n1 - 1.0)
    right = cross - (cross.sum(axis=1)[:, None] - cross) / (n2 - 1.0)
    return float(np.sum(left * right)) / (n1 * n2)


def _chen_qin_statistic(sample: GroupedSample) -> float:
    X1, X2 = sample.X[: sample.n1], sample.X[sample.n1 :]
    n1, n2 = sample.n1, sample.n2
    g1 = X1 @ X1.T
    g2 = X2 @ X2.T
    h = X1 @ X2.T
    t_stat = (
        (g1.sum() - np.trace(g1)) / (n1 * (n1 - 1.0))
        + (g2.sum() - np.trace(g2)) / (n2 * (n2 - 1.0))
        - 2.0 * h.sum() / (n1 * n2)
    )
    variance = (
        2.0 / (n1 * (n1 - 1.0)) * _within_trace(X1)
        + 2.0 / (n2 * (n2 - 1.0)) * _within_trace(X2)
        + 4.0 / (n1 * n2) * _cross_trace(X1, X2)
    )
    if not variance > 0.0:
        raise SingularCovariance(
            "variance estimate of the cross-product statistic is not positive"
        )
    return float(t_stat) / math.sqrt(variance)


def baseline(
    sample: GroupedSample,
    which: str,
    dag: PathwayDag | None = None,
) -> TestResult:
    """Covariance-free high-dimensional baselines.

    Args:
        which: "bai_saranadasa" or "chen_qin".
        dag: optional, used only to fill the graph entries of ``meta``.

    Raises:
        InsufficientSamples: either group has fewer than 3 samples.
    """
    if which not in ("bai_saranadasa", "chen_qin"):
        raise ValueError(f"unknown baseline {which!r}")
    if sample.n1 < 3 or sample.n2 < 3:
        raise InsufficientSamples("baselines need at least 3 samples per group")
    if which == "bai_saranadasa":
        stat = _bai_saranadasa_statistic(sample)
    else:
        stat = _chen_qin_statistic(sample)
    reference = {"family": "standard_normal", "tail": "upper"}
    return _result(which, stat, reference, _meta(sample, dag))


# ---------------------------------------------------------------------------
# Multiplicity
# ---------------------------------------------------------------------------

class BonferroniResult(NamedTuple):
    threshold: float
    decisions: tuple[bool, ...]


def bonferroni_adjust(p_values: Sequence[float], alpha0: float) -> BonferroniResult:
    """Family-wise error control across H tests: reject iff p ≤ alpha0/H.

    Raises:
        EmptyList: no p-values supplied.
    """
    if not (0.0 < alpha0 < 1.0):
        raise ValueError("alpha0 must lie in (0, 1)")
    values = list(p_values)
    if not values:
        raise EmptyList("no p-values to adjust")
    threshold = alpha0 / len(values)
    return BonferroniResult(
        threshold=threshold,
        decisions=tuple(pv <= threshold for pv in values),
    )
