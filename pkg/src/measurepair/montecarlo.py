"""Path sampling and trajectory diagnostics.

Paths are sampled under either measure with one counter-keyed random stream
per path (Philox keyed by (seed, path index)), so results are bit-identical
regardless of execution order or thread count.  Each trace carries the
sampled symbols, the running log likelihood ratio, and the one-step
affinities seen along the way.

The diagnostics here are advisory by design: finite-horizon trends in the
likelihood-ratio trajectories signal divergence to infinity or collapse to
zero, and the joint behaviour of the truncated affinity proxies probes the
structural relations the exact engines cannot reach beyond their budgets.
None of them ever certify a verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, ContinuousCoordinate, ValidationError
from .models import (
    GaussianProductModel,
    KernelPairModel,
    MarkovModel,
    ProductModel,
    TreeModel,
)
from . import affinity as affinity_ops
from . import tree as tree_ops

DEFAULT_SAMPLE_BUDGET = 1 << 24


@dataclass
class PathTrace:
    """One sampled path with its density-process trajectory.

    ``log_phi_trace[i]`` is the log likelihood ratio after i symbols (index 0
    is the empty prefix, always 0); increments equal the log ratio of the
    sampled step.  ``rho_trace[i]`` is the one-step affinity of step i+1
    conditioned on the sampled prefix.
    """

    seed: int
    path_id: int
    measure: str
    symbols: tuple
    log_phi_trace: tuple
    rho_trace: tuple
    n_nk_proxy: Optional[tuple] = None


def _path_rng(seed: int, path_id: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, path_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_paths(
    model: KernelPairModel,
    measure: str = "p",
    length: int = 32,
    count: int = 1000,
    seed: int = 0,
    budget: int | None = None,
) -> list[PathTrace]:
    """i.i.d. paths under the selected measure; deterministic given the seed.

    Path j draws from its own stream keyed by (seed, j), independent of
    scheduling.  Discrete models sample symbols by inverse CDF; Gaussian
    product models sample real coordinates and use the closed-form log
    density ratio.
    """
    if measure not in ("p", "q"):
        raise ValueError(f"measure must be 'p' or 'q', got {measure!r}")
    if length < 1 or count < 1:
        raise ValueError("length and count must be positive")
    cap = budget if budget is not None else DEFAULT_SAMPLE_BUDGET
    if count * length > cap:
        raise BudgetExceeded(f"count*length = {count * length} exceeds budget {cap}")
    if isinstance(model, TreeModel) and length > model.depth:
        raise ValidationError(
            f"tree model of depth {model.depth} cannot sample length {length}"
        )

    gaussian = isinstance(model, GaussianProductModel)
    traces = []
    for j in range(count):
        rng = _path_rng(seed, j)
        uniforms = rng.random(length) if not gaussian else None
        normals = rng.standard_normal(length) if gaussian else None
        symbols: list = []
        log_phi = [0.0]
        rhos: list = []
        total = 0.0
        for i in range(length):
            if gaussian:
                coord = model.coordinate(i + 1)
                rhos.append(coord.rho())
                if measure == "p":
                    x = coord.mu + coord.sigma * normals[i]
                else:
                    x = coord.mu_q + coord.sigma_q * normals[i]
                symbols.append(float(x))
                total += coord.log_ratio(float(x))
            else:
                prefix = tuple(symbols)
                step = model.kernel(prefix)
                rhos.append(float(model.step_affinity(prefix)))
                weights = step.p if measure == "p" else step.q
                u = uniforms[i]
                cumulative = 0.0
                chosen = None
                support = step.support()
                for a in support:
                    cumulative += float(weights[a])
                    if u < cumulative:
                        chosen = a
                        break
                if chosen is None:
                    chosen = support[-1]
                symbols.append(chosen)
                total += math.log(float(step.q[chosen])) - math.log(float(step.p[chosen]))
            log_phi.append(total)
        traces.append(
            PathTrace(
                seed=seed,
                path_id=j,
                measure=measure,
                symbols=tuple(symbols),
                log_phi_trace=tuple(log_phi),
                rho_trace=tuple(rhos),
            )
        )
    return traces


# ---------------------------------------------------------------------------
# Ensemble summaries
# ---------------------------------------------------------------------------


@dataclass
class EnsembleSummary:
    count: int
    horizon: int
    quantile_levels: tuple
    quantiles: dict  # depth n -> list of quantiles of the ratio at level n
    frac_below: dict  # depth n -> fraction with ratio < low threshold
    frac_above: dict
    mean: dict
    mean_ci: dict  # depth n -> (low, high), normal approximation
    thresholds: tuple


def summarize_ensemble(
    traces: Sequence[PathTrace],
    quantile_levels: tuple = (0.05, 0.25, 0.5, 0.75, 0.95),
    thresholds: tuple = (1e-6, 1e6),
) -> EnsembleSummary:
    if not traces:
        raise ValueError("empty ensemble")
    horizon = len(traces[0].log_phi_trace)
    log_matrix = np.array([t.log_phi_trace for t in traces])
    count = len(traces)
    quantiles: dict = {}
    frac_below: dict = {}
    frac_above: dict = {}
    mean: dict = {}
    mean_ci: dict = {}
    z = 1.959963984540054  # two-sided 95% normal quantile
    for idx in range(horizon):
        n = idx + 1
        values = np.exp(log_matrix[:, idx])
        quantiles[n] = [float(v) for v in np.quantile(values, quantile_levels)]
        frac_below[n] = float(np.mean(values < thresholds[0]))
        frac_above[n] = float(np.mean(values > thresholds[1]))
        m = float(values.mean())
        half = z * float(values.std(ddof=1)) / math.sqrt(count) if count > 1 else 0.0
        mean[n] = m
        mean_ci[n] = (m - half, m + half)
    return EnsembleSummary(
        count=count,
        horizon=horizon,
        quantile_levels=quantile_levels,
        quantiles=quantiles,
        frac_below=frac_below,
        frac_above=frac_above,
        mean=mean,
        mean_ci=mean_ci,
        thresholds=thresholds,
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass
class TrendStat:
    slope: float
    stderr: float
    trending: bool
    direction: int


@dataclass
class PhiLimitReport:
    """Advisory drift report for the likelihood-ratio trajectories.

    A median log-ratio drifting up under the second measure signals escape to
    infinity; drifting down under the first signals collapse to zero; both
    flat is consistent with equivalence.  Never a certified verdict.
    """

    drift_under_p: TrendStat
    drift_under_q: TrendStat
    advisory: str


def _median_trend(traces: Sequence[PathTrace], seed: int, bootstrap: int) -> TrendStat:
    log_matrix = np.array([t.log_phi_trace for t in traces])
    horizon = log_matrix.shape[1]
    start = horizon // 2
    xs = np.arange(start, horizon, dtype=float)

    def slope_of(matrix) -> float:
        med = np.median(matrix[:, start:], axis=0)
        return float(np.polyfit(xs, med, 1)[0])

    slope = slope_of(log_matrix)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(77,)))
    count = log_matrix.shape[0]
    resampled = np.empty(bootstrap)
    for b in range(bootstrap):
        idx = rng.integers(0, count, size=count)
        resampled[b] = slope_of(log_matrix[idx])
    stderr = float(resampled.std(ddof=1))
    # a slope is a trend when it clears 3x its bootstrap standard error
    trending = abs(slope) > 3.0 * stderr + 1e-15
    direction = 0 if not trending else (1 if slope > 0 else -1)
    return TrendStat(slope=slope, stderr=stderr, trending=trending, direction=direction)


def phi_limit_diagnostic(
    ensemble_p: Sequence[PathTrace],
    ensemble_q: Sequence[PathTrace],
    seed: int = 0,
    bootstrap: int = 200,
) -> PhiLimitReport:
    if not ensemble_p or not ensemble_q:
        raise ValueError("both ensembles must be nonempty")
    if len(ensemble_p[0].log_phi_trace) != len(ensemble_q[0].log_phi_trace):
        raise ValueError("ensembles must share one horizon")
    trend_p = _median_trend(ensemble_p, seed, bootstrap)
    trend_q = _median_trend(ensemble_q, seed + 1, bootstrap)
    signals = []
    if trend_q.trending and trend_q.direction > 0:
        signals.append("ratio escaping to infinity under the second measure")
    if trend_p.trending and trend_p.direction < 0:
        signals.append("ratio collapsing to zero under the first measure")
    if signals:
        advisory = "singularity signal: " + "; ".join(signals)
    elif trend_p.trending or trend_q.trending:
        advisory = "drift detected but not in a singularity direction; inspect traces"
    else:
        advisory = "bounded stable trajectories; consistent with equivalence"
    return PhiLimitReport(trend_p, trend_q, advisory)


class _MProxyEngine:
    """Cached truncated-affinity lookups along sampled prefixes."""

    def __init__(self, model: KernelPairModel, k_max: int):
        self.model = model
        self.k_max = k_max
        self._product_cache: dict = {}
        self._markov_vectors: Optional[list] = None
        self._tree_tables: dict = {}
        if isinstance(model, MarkovModel):
            h = np.sqrt(
                np.array([[float(v) for v in row] for row in model.transition_p])
                * np.array([[float(v) for v in row] for row in model.transition_q])
            )
            vectors = [np.ones(model.alphabet.size)]
            for _ in range(k_max):
                vectors.append(h @ vectors[-1])
            self._markov_vectors = vectors

    def value(self, n: int, prefix: tuple) -> float:
        model = self.model
        k = self.k_max
        if k < n:
            return 1.0
        if isinstance(model, (ProductModel, GaussianProductModel)):
            hit = self._product_cache.get(n)
            if hit is None:
                hit = 1.0
                for i in range(n, k + 1):
                    hit *= float(model.coordinate_rho(i))
                self._product_cache[n] = hit
            return hit
        if isinstance(model, MarkovModel):
            vectors = self._markov_vectors
            if not prefix:
                weights = np.sqrt(
                    np.array([float(v) for v in model.init_p])
                    * np.array([float(v) for v in model.init_q])
                )
                return float(weights @ vectors[k - 1])
            return float(vectors[k - n + 1][prefix[-1]])
        table = self._tree_tables.get(n)
        if table is None:
            table = affinity_ops.m_table(model, n, min(k, model.depth))
            self._tree_tables[n] = table
        return float(table[prefix])


@dataclass
class NMRelationReport:
    """Joint behaviour of the affinity proxies along sampled paths.

    ``violation_fraction`` counts paths whose ratio-weighted proxy stays
    large while the plain affinity proxy is near zero at the final level; a
    nonzero fraction is a red diagnostic against the structural relation
    between the two limits.
    """

    k_max: int
    n_final: int
    joint_histogram: list
    n_edges: list
    m_edges: list
    violation_fraction: float
    red_flag: bool
    m_floor: float
    n_floor: float


def nm_relation_diagnostic(
    model: KernelPairModel,
    ensemble: Sequence[PathTrace],
    k_max: int,
    m_floor: float = 1e-2,
    n_floor: float = 0.1,
    bins: int = 10,
) -> NMRelationReport:
    if not ensemble:
        raise ValueError("empty ensemble")
    engine = _MProxyEngine(model, k_max)
    horizon = len(ensemble[0].log_phi_trace)
    n_final = horizon  # level reached after the full path
    n_values = []
    m_values = []
    for trace in ensemble:
        proxies = []
        for idx in range(horizon):
            n = idx + 1
            prefix = tuple(trace.symbols[: n - 1]) if model.discrete else ()
            m_proxy = engine.value(n, prefix)
            n_proxy = math.exp(0.5 * trace.log_phi_trace[idx]) * m_proxy
            proxies.append(n_proxy)
        trace.n_nk_proxy = tuple(proxies)
        final_prefix = tuple(trace.symbols[: n_final - 1]) if model.discrete else ()
        m_values.append(engine.value(n_final, final_prefix))
        n_values.append(proxies[-1])
    n_array = np.array(n_values)
    m_array = np.array(m_values)
    histogram, n_edges, m_edges = np.histogram2d(
        n_array, m_array, bins=bins, range=[[0.0, max(1.0, n_array.max())], [0.0, 1.0]]
    )
    violations = float(np.mean((n_array > n_floor) & (m_array < m_floor)))
    return NMRelationReport(
        k_max=k_max,
        n_final=n_final,
        joint_histogram=histogram.astype(int).tolist(),
        n_edges=[float(e) for e in n_edges],
        m_edges=[float(e) for e in m_edges],
        violation_fraction=violations,
        red_flag=violations > 0.0,
        m_floor=m_floor,
        n_floor=n_floor,
    )


@dataclass
class MonteCarloEstimate:
    value: float
    stderr: float
    ci_low: float
    ci_high: float
    count: int
    method: str


def _normal_or_bootstrap(values: np.ndarray, seed: int = 0) -> MonteCarloEstimate:
    count = len(values)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1)) / math.sqrt(count) if count > 1 else 0.0
    if count >= 100:
        z = 1.959963984540054
        return MonteCarloEstimate(mean, stderr, mean - z * stderr, mean + z * stderr, count, "normal")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(99,)))
    boot = np.empty(1000)
    for b in range(1000):
        idx = rng.integers(0, count, size=count)
        boot[b] = values[idx].mean()
    low, high = np.quantile(boot, [0.025, 0.975])
    return MonteCarloEstimate(mean, stderr, float(low), float(high), count, "bootstrap")


def empirical_hellinger(
    model: KernelPairModel,
    ensemble: Sequence[PathTrace],
    n: int,
    k: int,
    seed: int = 0,
) -> MonteCarloEstimate:
    """Monte Carlo estimate of the squared-Hellinger truncation gap between
    levels n and k+1, from paths sampled under the first measure."""
    if not ensemble:
        raise ValueError("empty ensemble")
    if any(trace.measure != "p" for trace in ensemble):
        raise ValueError("estimate is an expectation under the first measure; "
                         "sample with measure='p'")
    horizon = len(ensemble[0].log_phi_trace) - 1
    if not (1 <= n <= k <= horizon):
        raise ValueError(f"need 1 <= n <= k <= horizon={horizon}")
    values = np.array(
        [
            (
                math.exp(0.5 * trace.log_phi_trace[n - 1])
                - math.exp(0.5 * trace.log_phi_trace[k])
            )
            ** 2
            for trace in ensemble
        ]
    )
    return _normal_or_bootstrap(values, seed)
