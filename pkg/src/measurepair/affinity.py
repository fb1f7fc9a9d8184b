"""Conditional tail affinities between the two laws of a kernel pair.

The central quantity is the conditional affinity over steps n..k given the
level-n atom: the kernel-weighted sum, over all extensions of the atom by
coordinates n..k, of the square root of the product of the two step
probabilities.  It lies in [0, 1], is nonincreasing in k, and equals the same
expression computed with the roles of the two measures swapped.

Three engines compute it: a generic backward recursion on the prefix tree, a
closed-form product of per-coordinate affinities for coordinate-independent
models, and a matrix-power path for Markov pairs using the elementwise square
root of P*Q.  They agree wherever their domains overlap and the test suite
enforces that.  Exact models produce RadicalSum values, float models floats.

Truncation semantics are one-sided: a finite-k value is always an upper bound
for the k-limit, and a two-sided bracket additionally needs an analytic tail
bound (product families) or a spectral certificate (Markov pairs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import (
    BudgetExceeded,
    ContinuousCoordinate,
    EngineMismatch,
    NotMarkov,
)
from .models import (
    GaussianProductModel,
    KernelPairModel,
    KernelStep,
    MarkovModel,
    Prefix,
    ProductModel,
    TreeModel,
)
from .radicals import RadicalSum, sqrt_rational
from . import tree as tree_ops

POWER_ITERATION_TOL = 1e-12
POWER_ITERATION_MAX = 100_000


def _one(exact: bool):
    return RadicalSum.from_rational(1) if exact else 1.0


def _zero(exact: bool):
    return RadicalSum() if exact else 0.0


def _sqrt_pq(step: KernelStep, a: int, exact: bool):
    if exact:
        return sqrt_rational(step.p[a] * step.q[a])
    return math.sqrt(step.p[a] * step.q[a])


def _dual_weight(step: KernelStep, a: int, exact: bool):
    # q(a) * sqrt(p(a)/q(a)): the swapped-measure increment, algebraically
    # equal to sqrt(p(a) q(a)) but computed along the dual path
    if exact:
        return step.q[a] * sqrt_rational(Fraction(step.p[a]) / Fraction(step.q[a]))
    return step.q[a] * math.sqrt(step.p[a] / step.q[a])


def _is_product_like(model: KernelPairModel) -> bool:
    return isinstance(model, (ProductModel, GaussianProductModel))


def _resolve_engine(model: KernelPairModel, engine: str) -> str:
    if engine == "auto":
        if isinstance(model, MarkovModel):
            return "markov"
        if _is_product_like(model):
            return "product"
        return "tree"
    return engine


def _validate_nk(prefix: Prefix, n: int, k: int):
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if k < n:
        raise ValueError(f"need n <= k, got n={n}, k={k}")
    if len(prefix) != n - 1:
        raise ValueError(
            f"prefix length {len(prefix)} does not match n={n} (need n-1 symbols)"
        )


# ---------------------------------------------------------------------------
# Engines
# ---------------------------------------------------------------------------


def _m_product(model, n: int, k: int, dual: bool = False):
    if not _is_product_like(model):
        raise EngineMismatch(
            f"product engine needs coordinate-independent kernels, got {model.variant}"
        )
    if dual and isinstance(model, GaussianProductModel):
        raise ContinuousCoordinate("dual recursion needs a finite alphabet")
    exact = model.exact
    acc = _one(exact)
    for i in range(n, k + 1):
        if dual:
            step = model.coordinate_step(i)
            rho = _zero(exact)
            for a in step.support():
                rho = rho + _dual_weight(step, a, exact)
        else:
            rho = model.coordinate_rho(i)
        acc = acc * rho
    return acc


def _m_tree(model, prefix: Prefix, n: int, k: int, dual: bool = False):
    exact = model.exact
    weight = _dual_weight if dual else _sqrt_pq

    def value(u: Prefix):
        if len(u) == k:
            return _one(exact)
        step = model.kernel(u)
        acc = _zero(exact)
        for a in step.support():
            acc = acc + weight(step, a, exact) * value(u + (a,))
        return acc

    return value(prefix)


def _markov_h_rows(model: MarkovModel, dual: bool = False):
    exact = model.exact
    size = model.alphabet.size
    rows = []
    for s in range(size):
        step = KernelStep(model.transition_p[s], model.transition_q[s])
        row = [_zero(exact)] * size
        for a in step.support():
            row[a] = (_dual_weight if dual else _sqrt_pq)(step, a, exact)
        rows.append(row)
    return rows


def _markov_apply(rows, vector):
    size = len(rows)
    return [
        sum((rows[s][t] * vector[t] for t in range(size)), start=_coerce_zero(vector))
        for s in range(size)
    ]


def _coerce_zero(vector):
    return RadicalSum() if isinstance(vector[0], RadicalSum) else 0.0


def _m_markov(model: MarkovModel, prefix: Prefix, n: int, k: int, dual: bool = False):
    exact = model.exact
    rows = _markov_h_rows(model, dual)
    size = model.alphabet.size
    vector = [_one(exact)] * size
    steps_from_state = k - n + 1 if prefix else k - 1
    for _ in range(steps_from_state):
        vector = _markov_apply(rows, vector)
    if prefix:
        return vector[prefix[-1]]
    init = KernelStep(model.init_p, model.init_q)
    acc = _zero(exact)
    for a in init.support():
        weight = (_dual_weight if dual else _sqrt_pq)(init, a, exact)
        acc = acc + weight * vector[a]
    return acc


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def m_nk(model: KernelPairModel, prefix: Prefix, n: int, k: int, engine: str = "auto"):
    """Conditional affinity over steps n..k on the atom ``prefix``.

    ``prefix`` must have length n-1.  In [0, 1]; nonincreasing in k.
    """
    prefix = model.validate_prefix(prefix)
    _validate_nk(prefix, n, k)
    engine = _resolve_engine(model, engine)
    if engine == "product":
        return _m_product(model, n, k)
    if engine == "markov":
        if not isinstance(model, MarkovModel):
            raise NotMarkov(f"markov engine on {model.variant} model")
        return _m_markov(model, prefix, n, k)
    if engine == "tree":
        if not model.discrete:
            raise ContinuousCoordinate("tree engine needs a finite alphabet")
        return _m_tree(model, prefix, n, k)
    raise ValueError(f"unknown engine {engine!r}")


def m_nk_dual(model: KernelPairModel, prefix: Prefix, n: int, k: int, engine: str = "auto"):
    """Same quantity computed under the swapped measure (q-weighted recursion
    with p/q increments); must agree with m_nk on every atom."""
    prefix = model.validate_prefix(prefix)
    _validate_nk(prefix, n, k)
    engine = _resolve_engine(model, engine)
    if engine == "product":
        return _m_product(model, n, k, dual=True)
    if engine == "markov":
        if not isinstance(model, MarkovModel):
            raise NotMarkov(f"markov engine on {model.variant} model")
        return _m_markov(model, prefix, n, k, dual=True)
    if not model.discrete:
        raise ContinuousCoordinate("tree engine needs a finite alphabet")
    return _m_tree(model, prefix, n, k, dual=True)


def m_table(
    model: KernelPairModel,
    n: int,
    k: int,
    dual: bool = False,
    budget: int | None = None,
) -> dict:
    """Values of the (n, k) affinity on every reachable level-n atom.

    One backward pass from depth k shares all subtree sums; atoms are the
    reachable prefixes of length n-1.
    """
    if not model.discrete:
        raise ContinuousCoordinate("atom tables need a finite alphabet")
    if n < 1 or k < n:
        raise ValueError(f"need 1 <= n <= k, got n={n}, k={k}")
    exact = model.exact
    levels = tree_ops.reachable_prefixes(model, k, budget)
    weight = _dual_weight if dual else _sqrt_pq
    values: Optional[dict] = None
    for depth in range(k - 1, n - 2, -1):
        new: dict = {}
        for prefix in levels[depth]:
            step = model.kernel(prefix)
            acc = _zero(exact)
            for a in step.support():
                child = _one(exact) if values is None else values[prefix + (a,)]
                acc = acc + weight(step, a, exact) * child
            new[prefix] = acc
        values = new
    assert values is not None
    return values


def expected_m(
    model: KernelPairModel,
    n: int,
    k: int,
    under: str = "q",
    budget: int | None = None,
):
    """Expectation of the (n, k) affinity over level-n atoms under the
    selected measure.  For coordinate-independent models this collapses to
    the product of per-coordinate affinities under either measure."""
    if under not in ("p", "q"):
        raise ValueError(f"measure selector must be 'p' or 'q', got {under!r}")
    if n < 1 or k < n:
        raise ValueError(f"need 1 <= n <= k, got n={n}, k={k}")
    if _is_product_like(model):
        return _m_product(model, n, k)
    if isinstance(model, MarkovModel) and n == 1:
        return _m_markov(model, (), 1, k)
    weights = tree_ops.enumerate_cylinders(model, n - 1, budget)
    table = m_table(model, n, k, budget=budget)
    index = 0 if under == "p" else 1
    total = _zero(model.exact)
    for prefix in sorted(weights.entries):
        total = total + weights.entries[prefix][index] * table[prefix]
    return total


def n_nk(model: KernelPairModel, prefix: Prefix, n: int, k: int, engine: str = "auto"):
    """sqrt of the prefix likelihood ratio times the (n, k) affinity: the
    finite-k stage of the L2-bounded affinity martingale."""
    if not model.discrete:
        raise ContinuousCoordinate(
            "likelihood ratios on prefixes need a finite alphabet"
        )
    prefix = model.validate_prefix(prefix)
    value = m_nk(model, prefix, n, k, engine)
    if model.exact:
        return sqrt_rational(tree_ops.phi(model, prefix)) * value
    return math.exp(0.5 * tree_ops.log_phi(model, prefix)) * value


def hellinger_identity(
    model: KernelPairModel, n: int, k: int, budget: int | None = None
):
    """Both sides of the squared-Hellinger truncation identity.

    lhs: brute-force expectation, under the first measure, of the squared
    difference of the square-rooted likelihood ratios at levels n and k+1.
    rhs: 2 * (1 - expectation of the (n, k) affinity under the second
    measure).  Equal exactly in rational mode, to 1e-10 in float mode.
    """
    if not model.discrete:
        raise ContinuousCoordinate("the brute-force side needs a finite alphabet")
    if n < 1 or k < n:
        raise ValueError(f"need 1 <= n <= k, got n={n}, k={k}")
    exact = model.exact
    cap = tree_ops.atom_budget(budget)
    # walk to depth k carrying (p mass, sqrt of the ratio so far)
    level: dict = {(): (_one(exact), _one(exact))}
    sqrt_at_n: dict = {}
    for depth in range(k):
        if depth == n - 1:
            sqrt_at_n = {prefix: pair[1] for prefix, pair in level.items()}
        new: dict = {}
        for prefix, (p_mass, sqrt_ratio) in level.items():
            step = model.kernel(prefix)
            for a in step.support():
                if exact:
                    factor = sqrt_rational(Fraction(step.q[a]) / Fraction(step.p[a]))
                else:
                    factor = math.sqrt(step.q[a] / step.p[a])
                new[prefix + (a,)] = (p_mass * step.p[a], sqrt_ratio * factor)
            if len(new) > cap:
                raise BudgetExceeded(f"atom count exceeded budget at depth {depth + 1}")
        level = new
    if n - 1 == k:
        sqrt_at_n = {prefix: pair[1] for prefix, pair in level.items()}

    lhs = _zero(exact)
    for prefix in sorted(level):
        p_mass, sqrt_k = level[prefix]
        diff = sqrt_at_n[prefix[: n - 1]] - sqrt_k
        if exact:
            lhs = lhs + p_mass * (diff * diff)
        else:
            lhs += p_mass * diff * diff
    em = expected_m(model, n, k, under="q", budget=budget)
    if exact:
        rhs = (RadicalSum.from_rational(1) - em) * 2
    else:
        rhs = 2.0 * (1.0 - em)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Markov spectral structure
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class MarkovAffinityOperator:
    """Elementwise sqrt(P*Q) with its Perron data.

    Row s sums to the one-step affinity of rows s of P and Q, so all row sums
    are in [0, 1] and a row sums to 1 exactly when the two rows coincide; the
    spectral radius is sandwiched by the row-sum extremes.
    """

    matrix: np.ndarray
    row_sums: np.ndarray
    spectral_radius: float
    spectral_radius_upper: float
    perron_vector: Optional[np.ndarray]
    irreducible: bool
    iterations: int


def markov_operator(
    model: KernelPairModel,
    tol: float = POWER_ITERATION_TOL,
    max_iter: int = POWER_ITERATION_MAX,
) -> MarkovAffinityOperator:
    """Power iteration with deterministic all-ones start.

    The iteration runs on the matrix plus the identity (the shift keeps
    periodic chains convergent and moves every eigenvalue by exactly one) and
    tracks the min/max ratio bracket, whose upper end is a certified bound on
    the spectral radius for any positive vector.
    """
    if not isinstance(model, MarkovModel):
        raise NotMarkov(f"markov operator on {model.variant} model")
    size = model.alphabet.size
    p_matrix = np.array([[float(v) for v in row] for row in model.transition_p])
    q_matrix = np.array([[float(v) for v in row] for row in model.transition_q])
    h_matrix = np.sqrt(p_matrix * q_matrix)
    row_sums = h_matrix.sum(axis=1)

    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    n_components, _ = connected_components(
        csr_matrix(h_matrix > 0), directed=True, connection="strong"
    )
    irreducible = n_components == 1

    shifted = h_matrix + np.eye(size)
    x = np.ones(size)
    low, high = 0.0, float(row_sums.max()) + 1.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        y = shifted @ x
        ratios = y / x
        low, high = float(ratios.min()), float(ratios.max())
        x = y / y.sum()
        if high - low <= tol * max(1.0, high):
            break
    else:
        raise ArithmeticError(
            f"power iteration did not converge in {max_iter} iterations"
        )

    if irreducible:
        radius = 0.5 * (low + high) - 1.0
        perron = x / x.sum()
    else:
        # the bracket lower end is only valid for irreducible matrices
        radius = high - 1.0
        perron = None
    return MarkovAffinityOperator(
        matrix=h_matrix,
        row_sums=row_sums,
        spectral_radius=radius,
        spectral_radius_upper=high - 1.0,
        perron_vector=perron,
        irreducible=irreducible,
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# Limit brackets and tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MLimitEstimate:
    """Bracket for the k-limit of the level-n affinity.

    ``upper`` is the truncation value (a valid upper bound by monotonicity);
    ``lower`` exists only with an analytic tail bound or a spectral
    certificate.  ``status`` is "Bracketed" or "UpperOnly".
    """

    n: int
    k_used: int
    upper: float
    lower: Optional[float]
    status: str


def estimate_m_limit(
    model: KernelPairModel,
    n: int,
    k_max: int,
    tail_bound: Optional[float] = None,
    zero_tol: float = 1e-9,
) -> MLimitEstimate:
    """Truncation upper bound plus, where justified, a lower bound.

    Product families: lower = upper * exp(-2B) with B a bound on the tail sum
    of one-minus-affinities, valid while each tail term is at most 1/2 (the
    generator's per-term bound is checked at the truncation point).  Markov
    pairs with certified spectral radius < 1 have limit exactly zero, declared
    once the truncation value itself is below ``zero_tol``.
    """
    if n < 1 or k_max < n:
        raise ValueError(f"need 1 <= n <= k_max, got n={n}, k_max={k_max}")

    if _is_product_like(model):
        upper = 1.0
        for i in range(n, k_max + 1):
            upper *= float(model.coordinate_rho(i))
        bound = tail_bound
        terms_small = True
        if bound is None:
            if model.tail is not None:
                bound = model.tail.tail_bound(k_max)
                if bound is not None:
                    terms_small = model.tail.per_term_bound(k_max + 1) <= 0.5
            else:
                bound = 0.0  # identical tail beyond the stored coordinates
        if bound is not None and terms_small:
            return MLimitEstimate(n, k_max, upper, upper * math.exp(-2.0 * bound), "Bracketed")
        return MLimitEstimate(n, k_max, upper, None, "UpperOnly")

    if isinstance(model, MarkovModel):
        if n == 1:
            upper = float(_m_markov_float(model, (), 1, k_max))
        else:
            table = _markov_value_vector(model, n, k_max)
            upper = float(max(table))
        op = markov_operator(model)
        if op.spectral_radius_upper < 1.0 and upper <= zero_tol:
            return MLimitEstimate(n, k_max, upper, 0.0, "Bracketed")
        return MLimitEstimate(n, k_max, upper, None, "UpperOnly")

    if isinstance(model, TreeModel):
        k_used = min(k_max, model.depth)
        if k_used < n:
            raise ValueError(f"tree depth {model.depth} gives no k >= n={n}")
        table = m_table(model, n, k_used)
        upper = max(float(v) for v in table.values())
        return MLimitEstimate(n, k_used, upper, None, "UpperOnly")

    raise ValueError(f"unsupported model variant {model.variant}")


def _m_markov_float(model: MarkovModel, prefix: Prefix, n: int, k: int) -> float:
    h_matrix = np.sqrt(
        np.array([[float(v) for v in row] for row in model.transition_p])
        * np.array([[float(v) for v in row] for row in model.transition_q])
    )
    vector = np.ones(model.alphabet.size)
    steps = k - n + 1 if prefix else k - 1
    for _ in range(steps):
        vector = h_matrix @ vector
    if prefix:
        return float(vector[prefix[-1]])
    init_weights = np.sqrt(
        np.array([float(v) for v in model.init_p])
        * np.array([float(v) for v in model.init_q])
    )
    return float(init_weights @ vector)


def _markov_value_vector(model: MarkovModel, n: int, k: int) -> np.ndarray:
    h_matrix = np.sqrt(
        np.array([[float(v) for v in row] for row in model.transition_p])
        * np.array([[float(v) for v in row] for row in model.transition_q])
    )
    vector = np.ones(model.alphabet.size)
    for _ in range(k - n + 1):
        vector = h_matrix @ vector
    return vector


@dataclass
class AffinityTable:
    """Affinities at one level for a range of truncation depths, with their
    expectations under the second measure."""

    n: int
    entries: dict  # k -> {prefix: float}
    expected: dict  # k -> float


def affinity_table(
    model: KernelPairModel,
    n: int,
    k_values,
    budget: int | None = None,
    include_atoms: bool = True,
) -> AffinityTable:
    entries: dict = {}
    expected: dict = {}
    for k in sorted(set(k_values)):
        if k < n:
            continue
        if include_atoms and model.discrete:
            table = m_table(model, n, k, budget=budget)
            entries[k] = {prefix: float(v) for prefix, v in table.items()}
        elif _is_product_like(model):
            entries[k] = {(): float(_m_product(model, n, k))}
        expected[k] = float(expected_m(model, n, k, under="q", budget=budget))
    return AffinityTable(n, entries, expected)


@dataclass
class NTable:
    """Finite-stage values of the L2-bounded martingale on atoms, indexed by
    (level, truncation depth)."""

    entries: dict  # (n, k) -> {prefix: float}


def n_table(model: KernelPairModel, pairs, budget: int | None = None) -> NTable:
    entries: dict = {}
    for n, k in pairs:
        table = m_table(model, n, k, budget=budget)
        level: dict = {}
        for prefix, value in table.items():
            level[prefix] = math.exp(0.5 * tree_ops.log_phi(model, prefix)) * float(value)
        entries[(n, k)] = level
    return NTable(entries)
