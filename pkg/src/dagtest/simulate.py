"""Synthetic pathway generation and replicated rejection-rate experiments.

A single experiment draws, per replicate: a random DAG with a controlled
children count and parent-count distribution, a sign-random coefficient matrix
rescaled to a fixed spectral norm, noise from one of four error families, an
optional pair of latent confounders, and an optional graph mis-specification
applied to the DAG handed to the test. Each replicate's randomness comes from
counter-based streams keyed by (seed, replicate, substream), so results are
independent of scheduling and thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import beta as beta_dist

from .divergence import PopulationModel
from .errors import ConfigError, DagTestError
from .mean_tests import METHODS, baseline, hotelling, t2dag
from .pathway import EdgePerturbation, PathwayDag, perturb_edges
from .sem import GroupedSample

ERROR_FAMILIES = ("gaussian", "uniform", "gamma", "lognormal")

# Substreams of one replicate's randomness (see stream_rng).
_ADJACENCY, _COEFFICIENTS, _ERRORS, _CONFOUNDERS, _PERTURBATION = range(5)


def round_half_up(x: float) -> int:
    """Round a nonnegative quantity with ties going up (0.5 -> 1)."""
    return int(math.floor(x + 0.5))


def stream_rng(seed: int, replicate: int, stream: int) -> np.random.Generator:
    """Independent counter-based generator for one replicate substream.

    Keying a Philox generator by the full (seed, replicate, stream) triple
    makes every draw a pure function of those integers: replicates can run on
    any worker pool in any order and still produce identical numbers.
    """
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((seed, replicate, stream)))
    )


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfounderConfig:
    """Latent-confounder settings for dataset generation.

    ``sigma_w_rule`` currently admits one rule, "inverse_max_abs_q":
    each confounder is N(0, σ_w²) with σ_w² = 0.2²/max_{ij}|Q_ij|. Each of the
    ``count`` rows of the loading matrix C has round(c_density·p) nonzero
    entries drawn N(0, c_scale²); c_scale defaults to √0.2 ≈ 0.447, reading
    the loading spread as a standard deviation (exposed so the variance
    reading c_scale = 0.2 is one config edit away).
    """

    count: int = 2
    sigma_w_rule: str = "inverse_max_abs_q"
    c_density: float = 0.2
    c_scale: float = math.sqrt(0.2)

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("/confounders/count", "must be a positive integer")
        if self.sigma_w_rule != "inverse_max_abs_q":
            raise ConfigError(
                "/confounders/sigma_w_rule",
                f"unknown rule {self.sigma_w_rule!r}",
            )
        if not (0.0 < self.c_density <= 1.0):
            raise ConfigError("/confounders/c_density", "must lie in (0, 1]")
        if not self.c_scale > 0.0:
            raise ConfigError("/confounders/c_scale", "must be positive")

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "sigma_w_rule": self.sigma_w_rule,
            "c_density": self.c_density,
            "c_scale": self.c_scale,
        }


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation experiment.

    Attributes:
        n1, n2: group sizes.
        p: number of genes.
        p0_fraction: fraction of nodes that receive parents.
        nb_failures, nb_success: parent-count distribution parameters
            (see gen_adjacency for the exact convention).
        kappa: spectral rescale factor; the coefficient matrix is scaled to
            ‖Q‖₂ = 1/kappa.
        r0: residual variance of every node.
        delta: group-2 mean shift applied to the first q coordinates.
        q_fraction: fraction of coordinates carrying the shift.
        error_family: one of gaussian/uniform/gamma/lognormal.
        confounders: optional latent-confounder settings.
        perturbation: graph mis-specification handed to the test.
        replicates, seed, alpha: experiment scope.
    """

    n1: int
    n2: int
    p: int
    p0_fraction: float = 0.6
    nb_failures: int = 3
    nb_success: float = 0.6
    kappa: float = 1.5
    r0: float = 0.2
    delta: float = 0.0
    q_fraction: float = 0.5
    error_family: str = "gaussian"
    confounders: ConfounderConfig | None = None
    perturbation: EdgePerturbation = EdgePerturbation()
    replicates: int = 100
    seed: int = 0
    alpha: float = 0.05

    def __post_init__(self):
        def need(cond: bool, path: str, reason: str):
            if not cond:
                raise ConfigError(path, reason)

        need(isinstance(self.n1, int) and self.n1 >= 2, "/n1", "integer >= 2 required")
        need(isinstance(self.n2, int) and self.n2 >= 2, "/n2", "integer >= 2 required")
        need(isinstance(self.p, int) and self.p >= 2, "/p", "integer >= 2 required")
        need(0.0 <= self.p0_fraction < 1.0, "/p0_fraction", "must lie in [0, 1)")
        if self.p0_fraction > 0.0:
            need(
                self.n_children >= 1,
                "/p0_fraction",
                "rounds to zero children; use 0 for an edgeless graph",
            )
        need(
            self.n_children <= self.p - 1,
            "/p0_fraction",
            "children cannot outnumber the non-root positions",
        )
        need(
            isinstance(self.nb_failures, int) and self.nb_failures >= 1,
            "/nb_failures",
            "integer >= 1 required",
        )
        need(0.0 < self.nb_success < 1.0, "/nb_success", "must lie in (0, 1)")
        need(self.kappa > 0.0, "/kappa", "must be positive")
        need(self.r0 > 0.0, "/r0", "must be positive")
        need(math.isfinite(self.delta), "/delta", "must be finite")
        need(0.0 <= self.q_fraction <= 1.0, "/q_fraction", "must lie in [0, 1]")
        need(
            self.error_family in ERROR_FAMILIES,
            "/error_family",
            f"must be one of {', '.join(ERROR_FAMILIES)}",
        )
        need(
            isinstance(self.replicates, int) and self.replicates >= 1,
            "/replicates",
            "integer >= 1 required",
        )
        need(
            isinstance(self.seed, int) and self.seed >= 0,
            "/seed",
            "nonnegative integer required",
        )
        need(0.0 < self.alpha < 1.0, "/alpha", "must lie in (0, 1)")

    @property
    def n_children(self) -> int:
        return round_half_up(self.p0_fraction * self.p)

    @property
    def q(self) -> int:
        """Number of coordinates carrying the group-2 mean shift."""
        return round_half_up(self.q_fraction * self.p)

    def to_dict(self) -> dict:
        return {
            "n1": self.n1,
            "n2": self.n2,
            "p": self.p,
            "p0_fraction": self.p0_fraction,
            "nb_failures": self.nb_failures,
            "nb_success": self.nb_success,
            "kappa": self.kappa,
            "r0": self.r0,
            "delta": self.delta,
            "q_fraction": self.q_fraction,
            "error_family": self.error_family,
            "confounders": self.confounders.to_dict() if self.confounders else None,
            "perturbation": self.perturbation.to_dict(),
            "replicates": self.replicates,
            "seed": self.seed,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(f"/{key}", "unknown field")
        kwargs = dict(doc)
        conf = kwargs.get("confounders")
        if conf is not None:
            conf_known = {f.name for f in fields(ConfounderConfig)}
            for key in conf:
                if key not in conf_known:
                    raise ConfigError(f"/confounders/{key}", "unknown field")
            kwargs["confounders"] = ConfounderConfig(**conf)
        pert = kwargs.get("perturbation")
        if pert is not None:
            try:
                kwargs["perturbation"] = EdgePerturbation.from_dict(pert)
            except (ValueError, TypeError) as exc:
                raise ConfigError("/perturbation", str(exc)) from exc
        elif "perturbation" in kwargs:
            del kwargs["perturbation"]
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError("/", str(exc)) from exc


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def gen_adjacency(
    p: int,
    p0_fraction: float,
    nb_failures: int = 3,
    nb_success: float = 0.6,
    seed=None,
) -> PathwayDag:
    """Random DAG with a fixed child count and negative-binomial in-degrees.

    round(p0_fraction·p) child positions are chosen uniformly among
    topological positions 1..p−1; the child at position j receives
    |S_j| = min(1 + ζ, j) parents sampled uniformly without replacement from
    the positions before it.

    **Parent-count convention.** ζ is drawn from numpy's
    ``negative_binomial(nb_failures, nb_success)``: the number of *failures*
    observed before the ``nb_failures``-th success, with per-trial success
    probability ``nb_success`` — mean nb_failures·(1−nb_success)/nb_success
    (e.g. 2.0 at (3, 0.6), 0.75 at (3, 0.8)). Textbooks disagree on which
    outcome is counted; the opposite convention (successes before the 3rd
    failure, mean 4.5 / 12.0 at those settings) produces far denser graphs
    whose maximum in-degrees contradict the pathway shapes both published
    parameter settings are documented to produce, so this library fixes the
    counting-failures convention.

    Node indices coincide with topological positions in the returned dag.
    """
    if p < 2:
        raise ValueError("need p >= 2 to place any structure")
    rng = _as_generator(seed)
    n_children = round_half_up(p0_fraction * p)
    if n_children == 0:
        return PathwayDag.from_edges([], p)
    if n_children > p - 1:
        raise ValueError("cannot place more children than positions 1..p-1")
    children = np.sort(rng.choice(p - 1, size=n_children, replace=False) + 1)
    edges: list[tuple[int, int]] = []
    for child in children:
        child = int(child)
        zeta = int(rng.negative_binomial(nb_failures, nb_success))
        size = min(1 + zeta, child)
        parents = rng.choice(child, size=size, replace=False)
        edges.extend((int(parent), child) for parent in parents)
    return PathwayDag.from_edges(edges, p)


def _spectral_norm(matrix: np.ndarray, rng: np.random.Generator) -> float:
    """Largest singular value by power iteration on MᵀM.

    Stops when the relative eigen-residual ‖MᵀM·v − λ̂·v‖ ≤ 5e−12·λ̂, which
    bounds the relative error of λ̂ by ~1e−11 even without a spectral gap.
    """
    mtm = matrix.T @ matrix
    v = rng.standard_normal(matrix.shape[1])
    norm_v = np.linalg.norm(v)
    if norm_v == 0.0:
        v = np.ones(matrix.shape[1])
        norm_v = np.linalg.norm(v)
    v /= norm_v
    lam = 0.0
    for _ in range(100_000):
        w = mtm @ v
        lam = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        if np.linalg.norm(w - lam * v) <= 5e-12 * lam:
            break
        v = w / norm_w
    return math.sqrt(max(lam, 0.0))


def gen_coefficients(dag: PathwayDag, kappa: float = 1.5, seed=None) -> np.ndarray:
    """Coefficient matrix with ±1 signs on the dag's support, rescaled so that
    ‖Q‖₂ = 1/kappa (spectral norm via seeded power iteration).

    Returns the p×p strictly upper-triangular matrix in topological
    coordinates; an edgeless dag gives the zero matrix.
    """
    rng = _as_generator(seed)
    p = dag.p
    q0 = np.zeros((p, p))
    support = sorted(
        (i, k) for k, parents in enumerate(dag.parent_sets) for i in parents
    )
    if not support:
        return q0
    flips = rng.integers(0, 2, size=len(support))
    for (i, k), flip in zip(support, flips):
        q0[i, k] = -1.0 if flip else 1.0
    sigma = _spectral_norm(q0, rng)
    return q0 / (kappa * sigma)


def gen_errors(family: str, r_values, n: int, seed=None) -> np.ndarray:
    """n×p noise matrix with independent entries, one column per variance.

    Families (each column j has mean 0; variance r_j unless noted):
      * gaussian:  N(0, r_j)
      * uniform:   Unif(−√(3·r_j), √(3·r_j))
      * gamma:     Gamma(shape 10, scale √(r_j/10)) − 10·√(r_j/10)
      * lognormal: LogNormal(0, 0.16 log-variance) − exp(0.08); its variance
        (e^0.16 − 1)·e^0.16 ≈ 0.202 does not depend on r_j by design.
    """
    rng = _as_generator(seed)
    r = np.asarray(r_values, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("r_values must be positive")
    p = r.shape[0]
    if family == "gaussian":
        return rng.normal(0.0, np.sqrt(r), size=(n, p))
    if family == "uniform":
        half = np.sqrt(3.0 * r)
        return rng.uniform(-half, half, size=(n, p))
    if family == "gamma":
        scale = np.sqrt(r / 10.0)
        return rng.gamma(10.0, scale, size=(n, p)) - 10.0 * scale
    if family == "lognormal":
        return rng.lognormal(0.0, 0.4, size=(n, p)) - math.exp(0.08)
    raise ValueError(f"unknown error family {family!r}")


def _confounder_noise(
    conf: ConfounderConfig, Q: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw w (n × count) and loadings C (count × p); return w·C."""
    max_q = float(np.max(np.abs(Q)))
    if max_q == 0.0:
        raise ValueError(
            "confounder variance rule divides by max|Q|; "
            "generate at least one edge or disable confounders"
        )
    sigma_w = math.sqrt(0.2**2 / max_q)
    p = Q.shape[0]
    w = rng.normal(0.0, sigma_w, size=(n, conf.count))
    n_loaded = round_half_up(conf.c_density * p)
    loadings = np.zeros((conf.count, p))
    for row in range(conf.count):
        cols = rng.choice(p, size=n_loaded, replace=False)
        loadings[row, cols] = rng.normal(0.0, conf.c_scale, size=n_loaded)
    return w @ loadings


def gen_dataset(
    cfg: SimConfig, replicate: int = 0
) -> tuple[GroupedSample, PathwayDag, PathwayDag, PopulationModel]:
    """One replicate's data: sample, true graph, test graph, population truth.

    Group means are μ1 = 0 and μ2 = delta on the first q coordinates; each
    row is μ + (I−Qᵀ)⁻¹(noise), computed by forward substitution on the unit
    lower-triangular system. The test graph equals the true graph unless a
    perturbation is configured; a perturbation without its own seed draws
    from this replicate's perturbation stream.
    """
    p, n1, n2 = cfg.p, cfg.n1, cfg.n2
    n = n1 + n2
    true_dag = gen_adjacency(
        p,
        cfg.p0_fraction,
        cfg.nb_failures,
        cfg.nb_success,
        stream_rng(cfg.seed, replicate, _ADJACENCY),
    )
    Q = gen_coefficients(
        true_dag, cfg.kappa, stream_rng(cfg.seed, replicate, _COEFFICIENTS)
    )
    R = np.full(p, cfg.r0)
    noise = gen_errors(
        cfg.error_family, R, n, stream_rng(cfg.seed, replicate, _ERRORS)
    )
    if cfg.confounders is not None:
        noise = noise + _confounder_noise(
            cfg.confounders, Q, n, stream_rng(cfg.seed, replicate, _CONFOUNDERS)
        )
    lower = np.eye(p) - Q.T
    X = solve_triangular(lower, noise.T, lower=True, unit_diagonal=True).T
    mu1 = np.zeros(p)
    mu2 = np.zeros(p)
    mu2[: cfg.q] = cfg.delta
    X[n1:] += mu2
    sample = GroupedSample.from_groups(X[:n1], X[n1:])
    used_dag = true_dag
    if cfg.perturbation.mode != "none":
        if cfg.perturbation.seed is not None:
            pert_rng = np.random.default_rng(cfg.perturbation.seed)
        else:
            pert_rng = stream_rng(cfg.seed, replicate, _PERTURBATION)
        used_dag = perturb_edges(true_dag, cfg.perturbation, rng=pert_rng)
    model = PopulationModel(mu1=mu1, mu2=mu2, Q=Q, R=R)
    return sample, true_dag, used_dag, model


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MethodSummary:
    """Rejection tally for one method over the successful replicates."""

    method: str
    n_reject: int
    n_total: int
    rate: float
    ci_low: float
    ci_high: float
    n_failed: int

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_reject": self.n_reject,
            "n_total": self.n_total,
            "rate": self.rate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_failed": self.n_failed,
        }


@dataclass(frozen=True, eq=False)
class ExperimentTable:
    """Per-method rejection rates with 95% binomial intervals."""

    config: SimConfig
    rows: tuple[MethodSummary, ...]
    failure_notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "results": [row.to_dict() for row in self.rows],
            "failure_notes": list(self.failure_notes),
        }


def _clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact (conservative) binomial interval for k successes in n trials."""
    if n == 0:
        return 0.0, 1.0
    tail = (1.0 - level) / 2.0
    low = 0.0 if k == 0 else float(beta_dist.ppf(tail, k, n - k + 1))
    high = 1.0 if k == n else float(beta_dist.ppf(1.0 - tail, k + 1, n - k))
    return low, high


def _replicate_outcome(
    cfg: SimConfig, replicate: int, methods: Sequence[str]
) -> tuple[dict, list[str]]:
    """Decisions {method: True/False/None} for one replicate; None = failed."""
    decisions: dict = {m: None for m in methods}
    notes: list[str] = []
    try:
        sample, _true_dag, used_dag, _model = gen_dataset(cfg, replicate)
    except (DagTestError, ValueError) as exc:
        notes.append(f"replicate {replicate}: {exc}")
        return decisions, notes
    pair = None
    for method in methods:
        try:
            if method in ("t2dag_chi2", "t2dag_z"):
                if pair is None:
                    pair = t2dag(sample, used_dag)
                result = pair[0] if method == "t2dag_chi2" else pair[1]
            elif method == "hotelling":
                result = hotelling(sample, dag=used_dag)
            else:
                result = baseline(sample, method, dag=used_dag)
            decisions[method] = bool(result.p_value <= cfg.alpha)
        except DagTestError as exc:
            notes.append(f"replicate {replicate}, {method}: {exc}")
    return decisions, notes


def run_experiment(
    cfg: SimConfig, methods: Sequence[str], threads: int = 1
) -> ExperimentTable:
    """Rejection-rate table over cfg.replicates fresh datasets.

    Per-replicate failures (for example a singular covariance for Hotelling)
    are tallied per method and reported in the table, never fatal. The result
    is a pure function of (cfg, methods): replicates draw from counter-based
    streams and the tally is folded in replicate order, so any ``threads``
    setting produces the identical table.
    """
    methods = tuple(methods)
    if not methods:
        raise ValueError("methods must be nonempty")
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    indices = range(cfg.replicates)
    if threads == 1:
        outcomes = [_replicate_outcome(cfg, r, methods) for r in indices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(
                pool.map(lambda r: _replicate_outcome(cfg, r, methods), indices)
            )
    n_reject = dict.fromkeys(methods, 0)
    n_total = dict.fromkeys(methods, 0)
    n_failed = dict.fromkeys(methods, 0)
    notes: list[str] = []
    for decisions, rep_notes in outcomes:
        notes.extend(rep_notes)
        for method in methods:
            decision = decisions[method]
            if decision is None:
                n_failed[method] += 1
            else:
                n_total[method] += 1
                n_reject[method] += int(decision)
    rows = []
    for method in methods:
        k, n = n_reject[method], n_total[method]
        low, high = _clopper_pearson(k, n)
        rows.append(
            MethodSummary(
                method=method,
                n_reject=k,
                n_total=n,
                rate=k / n if n else 0.0,
                ci_low=low,
                ci_high=high,
                n_failed=n_failed[method],
            )
        )
    if len(notes) > 20:
        notes = notes[:20] + [f"... and {len(notes) - 20} more"]
    return ExperimentTable(config=cfg, rows=tuple(rows), failure_notes=tuple(notes))
