"""Evidence-backed equivalence/singularity verdicts.

Criteria are computed independently and folded deterministically: any
certified singularity wins, equivalence requires a certified basis (exact
kernel identity, a convergent affinity log-sum with an analytic tail bound,
or the spectral equality case), and two certified criteria that disagree
raise loudly since that can only be an implementation bug.  Everything else
is Inconclusive, with truncation evidence attached.

Certification is deliberately conservative: a large partial sum never proves
divergence (an analytic minorant from the tail generator does), and float
near-equality never proves anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import (
    BudgetExceeded,
    ContinuousCoordinate,
    InconsistentCriteria,
    NotMarkov,
    NotProduct,
)
from .models import (
    GaussianProductModel,
    KernelPairModel,
    MarkovModel,
    Prefix,
    ProductModel,
    TreeModel,
)
from . import affinity as affinity_ops
from . import tree as tree_ops

EQUIVALENT = "Equivalent"
SINGULAR = "Singular"
INCONCLUSIVE = "Inconclusive"

BASIS_EXACT = "Exact"
BASIS_ANALYTIC_TAIL = "AnalyticTail"
BASIS_SPECTRAL = "SpectralCertificate"
BASIS_TRUNCATION = "TruncationOnly"

_BASIS_RANK = {BASIS_EXACT: 0, BASIS_ANALYTIC_TAIL: 1, BASIS_SPECTRAL: 2}

DEFAULT_EPS_SPECTRAL = 1e-9


@dataclass(frozen=True)
class DecisionConfig:
    k_max: int = 200
    depth: int = 4
    tol: float = 1e-10
    eps_spectral: float = DEFAULT_EPS_SPECTRAL
    witness_depth: Optional[int] = None
    atom_budget: Optional[int] = None


@dataclass
class CriterionResult:
    """One criterion's numeric evidence and its verdict contribution."""

    name: str
    decision: str
    certified: bool
    basis: Optional[str]
    values: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "decision": self.decision,
            "certified": self.certified,
            "basis": self.basis,
            "values": dict(self.values),
            "bounds": dict(self.bounds),
            "note": self.note,
        }


@dataclass
class WitnessSet:
    """Finite-depth near-orthogonality witness.

    ``description`` names the event: the depth-k atoms whose likelihood ratio
    exceeds 1.  Its mass under the first measure and the complement's mass
    under the second are each bounded by the expected level-1 affinity at
    truncation k, so their sum is bounded by twice that value.
    """

    k: int
    description: str
    p_mass: object
    q_complement_mass: object
    bound_each_side: object
    certified_bound: object
    atom_count: int

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "description": self.description,
            "p_mass": float(self.p_mass),
            "q_complement_mass": float(self.q_complement_mass),
            "bound_each_side": float(self.bound_each_side),
            "certified_bound": float(self.certified_bound),
            "atom_count": self.atom_count,
        }


@dataclass
class Verdict:
    decision: str
    basis: str
    criteria: list
    witness: Optional[WitnessSet] = None

    def as_dict(self) -> dict:
        return {
            "decision": self.decision,
            "basis": self.basis,
            "criteria": [c.as_dict() for c in self.criteria],
            "witness": self.witness.as_dict() if self.witness else None,
        }


# ---------------------------------------------------------------------------
# Individual criteria
# ---------------------------------------------------------------------------


def predictable_sum(model: KernelPairModel, n_max: int, path: Optional[Prefix] = None):
    """Partial sums of |ln one-step-affinity| along a path.

    For coordinate-independent models the affinities do not depend on the
    path, so ``path`` may be omitted and the result equals the partial
    log-sums of the product-measure affinity test.  Prefix-dependent models
    need an explicit path of length at least n_max - 1.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    product_like = isinstance(model, (ProductModel, GaussianProductModel))
    if path is None:
        if not product_like:
            raise ValueError(
                "prefix-dependent model: predictable_sum needs an explicit path"
            )
        path = ()
    path = tuple(path)
    if not product_like and len(path) < n_max - 1:
        raise ValueError(
            f"path of length {len(path)} too short for n_max={n_max}"
        )
    sums = []
    total = 0.0
    for n in range(1, n_max + 1):
        prefix = path[: n - 1] if not product_like else ()
        if product_like:
            rho = float(model.coordinate_rho(n))
        else:
            rho = float(model.step_affinity(prefix))
        total += abs(math.log(rho)) if rho < 1.0 else 0.0
        sums.append(total)
    return sums


def predictable_sum_by_atom(
    model: KernelPairModel, n_max: int, budget: Optional[int] = None
) -> dict:
    """Per-atom partial sums at depth n_max - 1 (tree mode): each reachable
    atom maps to the sum of |ln rho| along its own history."""
    if not model.discrete:
        raise ContinuousCoordinate("tree mode needs a finite alphabet")
    cap = tree_ops.atom_budget(budget)
    level = {(): 0.0}
    for n in range(1, n_max):
        new: dict = {}
        for prefix, total in level.items():
            step = model.kernel(prefix)
            rho = float(model.step_affinity(prefix))
            contribution = abs(math.log(rho)) if rho < 1.0 else 0.0
            for a in step.support():
                new[prefix + (a,)] = total + contribution
            if len(new) > cap:
                raise BudgetExceeded(f"atom count exceeded budget {cap}")
        level = new
    # close with the affinity conditioned on the deepest atoms themselves
    closed = {}
    for prefix, total in level.items():
        rho = float(model.step_affinity(prefix))
        closed[prefix] = total + (abs(math.log(rho)) if rho < 1.0 else 0.0)
    return closed


def kakutani_decide(model: KernelPairModel, k_max: int) -> CriterionResult:
    """Product-measure affinity test with certified tails.

    Equivalence needs the truncated sum of (1 - rho_i) plus a finite analytic
    tail bound; singularity needs the generator's divergence certificate
    (an analytic minorant, never just a large partial sum).
    """
    if not isinstance(model, (ProductModel, GaussianProductModel)):
        raise NotProduct(f"product-measure test on {model.variant} model")
    stored = len(model.coordinates)
    horizon = k_max if model.tail is not None else min(k_max, stored)
    partial = 0.0
    log_product = 0.0
    for i in range(1, horizon + 1):
        rho = float(model.coordinate_rho(i))
        partial += 1.0 - rho
        log_product += math.log(rho) if rho > 0 else float("-inf")
    values = {
        "partial_sum_one_minus_rho": partial,
        "affinity_upper": math.exp(log_product),
        "k_max": float(horizon),
    }
    bounds: dict = {}
    if model.tail is None:
        # finite document: coordinates beyond the stored ones are identical
        bounds["tail_bound"] = 0.0
        estimate = affinity_ops.estimate_m_limit(model, 1, max(1, horizon))
        if estimate.lower is not None:
            bounds["affinity_lower"] = estimate.lower
        return CriterionResult(
            "Kakutani",
            EQUIVALENT,
            True,
            BASIS_ANALYTIC_TAIL,
            values,
            bounds,
            note="finite coordinate list with identical tail",
        )
    if model.tail.diverges():
        values["minorant_exponent"] = 2.0 * model.tail.alpha
        return CriterionResult(
            "Kakutani",
            SINGULAR,
            True,
            BASIS_ANALYTIC_TAIL,
            values,
            bounds,
            note=(
                "sum of (1 - rho_i) dominates a divergent p-series "
                f"(exponent {2.0 * model.tail.alpha:g} <= 1)"
            ),
        )
    tail_bound = model.tail.tail_bound(k_max)
    if tail_bound is not None:
        bounds["tail_bound"] = tail_bound
        estimate = affinity_ops.estimate_m_limit(model, 1, k_max)
        bounds["affinity_upper"] = estimate.upper
        if estimate.lower is not None:
            bounds["affinity_lower"] = estimate.lower
        return CriterionResult(
            "Kakutani",
            EQUIVALENT,
            True,
            BASIS_ANALYTIC_TAIL,
            values,
            bounds,
            note="truncated sum plus analytic tail bound is finite",
        )
    return CriterionResult(
        "Kakutani",
        INCONCLUSIVE,
        False,
        None,
        values,
        bounds,
        note="no analytic tail information",
    )


def markov_spectral_decide(
    model: KernelPairModel, eps_spectral: float = DEFAULT_EPS_SPECTRAL
) -> CriterionResult:
    """Spectral rule for Markov pairs.

    Identical transition rows give equivalence exactly.  A certified spectral
    radius below 1 forces the tail affinities to zero geometrically, which is
    a singularity certificate.  Radii within eps of 1, and reducible support
    graphs, fall back to Inconclusive.
    """
    if not isinstance(model, MarkovModel):
        raise NotMarkov(f"spectral rule on {model.variant} model")
    if model.transition_p == model.transition_q:
        return CriterionResult(
            "MarkovSpectral",
            EQUIVALENT,
            True,
            BASIS_EXACT,
            {"spectral_radius": 1.0},
            {},
            note="transition kernels identical; initial laws have matched supports",
        )
    op = affinity_ops.markov_operator(model)
    values = {
        "spectral_radius": op.spectral_radius,
        "spectral_radius_upper": op.spectral_radius_upper,
        "max_row_sum": float(op.row_sums.max()),
    }
    if not op.irreducible:
        return CriterionResult(
            "MarkovSpectral",
            INCONCLUSIVE,
            False,
            None,
            values,
            {},
            note="affinity support graph is reducible; no spectral certificate",
        )
    if op.spectral_radius_upper <= 1.0 - eps_spectral:
        sample_k = 64
        values["m_1k_sample"] = affinity_ops._m_markov_float(model, (), 1, sample_k)
        values["m_1k_sample_k"] = float(sample_k)
        return CriterionResult(
            "MarkovSpectral",
            SINGULAR,
            True,
            BASIS_SPECTRAL,
            values,
            {"geometric_rate": op.spectral_radius_upper},
            note="tail affinities decay geometrically at the spectral radius",
        )
    return CriterionResult(
        "MarkovSpectral",
        INCONCLUSIVE,
        False,
        None,
        values,
        {},
        note="spectral radius within tolerance of 1 but kernels differ",
    )


def witness_set(model: KernelPairModel, k: int, budget: Optional[int] = None) -> WitnessSet:
    """Depth-k witness event and its certified mass bounds.

    The event collects the atoms whose likelihood ratio exceeds 1.  Both its
    mass under the first measure and the complement's mass under the second
    are bounded by the expected level-1 affinity at truncation k; exact in
    rational mode.
    """
    if not model.discrete:
        raise ContinuousCoordinate("witness extraction needs a finite alphabet")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    weights = tree_ops.enumerate_cylinders(model, k, budget)
    zero = Fraction(0) if model.exact else 0.0
    p_mass = zero
    q_mass = zero
    count = 0
    for prefix, (p_atom, q_atom) in weights.entries.items():
        if q_atom > p_atom:  # likelihood ratio q/p > 1
            p_mass = p_mass + p_atom
            q_mass = q_mass + q_atom
            count += 1
    q_complement = (Fraction(1) if model.exact else 1.0) - q_mass
    bound = affinity_ops.expected_m(model, 1, k, under="q", budget=budget)
    certified = 2 * bound if model.exact else 2.0 * float(bound)
    return WitnessSet(
        k=k,
        description="atoms at depth k with likelihood ratio > 1",
        p_mass=p_mass,
        q_complement_mass=q_complement,
        bound_each_side=bound,
        certified_bound=certified,
        atom_count=count,
    )


# ---------------------------------------------------------------------------
# Verdict assembly
# ---------------------------------------------------------------------------


def _m_criterion(model: KernelPairModel, cfg: DecisionConfig) -> CriterionResult:
    if model.identical_kernels():
        return CriterionResult(
            "MCriterion",
            EQUIVALENT,
            True,
            BASIS_EXACT,
            {"m_upper": 1.0},
            {},
            note="kernels of the two measures coincide exactly",
        )
    k_max = cfg.k_max
    if isinstance(model, TreeModel):
        k_max = min(k_max, model.depth)
    estimate = affinity_ops.estimate_m_limit(model, 1, k_max)
    values = {"m_upper": estimate.upper, "k_used": float(estimate.k_used)}
    bounds = {}
    if estimate.lower is not None:
        bounds["m_lower"] = estimate.lower
    return CriterionResult(
        "MCriterion",
        INCONCLUSIVE,
        False,
        None,
        values,
        bounds,
        note=f"truncation bound only ({estimate.status})",
    )


def _predictable_evidence(model: KernelPairModel, cfg: DecisionConfig) -> CriterionResult:
    if isinstance(model, (ProductModel, GaussianProductModel)):
        horizon = cfg.k_max if model.tail is not None else min(cfg.k_max, len(model.coordinates))
        horizon = max(horizon, 1)
        sums = predictable_sum(model, horizon)
        values = {"partial_sum": sums[-1], "n_terms": float(len(sums))}
    else:
        depth = cfg.depth
        if isinstance(model, TreeModel):
            depth = min(depth, model.depth)
        by_atom = predictable_sum_by_atom(model, depth, cfg.atom_budget)
        values = {
            "max_atom_sum": max(by_atom.values()),
            "min_atom_sum": min(by_atom.values()),
            "depth": float(depth),
        }
    return CriterionResult(
        "PredictableSum",
        INCONCLUSIVE,
        False,
        None,
        values,
        {},
        note="trajectory evidence; certification comes from the other criteria",
    )


def _fold_criteria(criteria: list) -> tuple[str, str]:
    singular = [c for c in criteria if c.certified and c.decision == SINGULAR]
    equivalent = [c for c in criteria if c.certified and c.decision == EQUIVALENT]
    if singular and equivalent:
        raise InconsistentCriteria(
            "certified criteria disagree: "
            + ", ".join(f"{c.name}={c.decision}" for c in singular + equivalent)
        )
    if singular:
        basis = min((c.basis for c in singular), key=lambda b: _BASIS_RANK[b])
        return SINGULAR, basis
    if equivalent:
        basis = min((c.basis for c in equivalent), key=lambda b: _BASIS_RANK[b])
        return EQUIVALENT, basis
    return INCONCLUSIVE, BASIS_TRUNCATION


def decide_equivalence(
    model: KernelPairModel, config: Optional[DecisionConfig] = None
) -> Verdict:
    """Run all applicable criteria and fold them into a verdict.

    Exit semantics: any certified singularity wins; equivalence needs a
    certified basis; otherwise Inconclusive with truncation evidence.  A
    conflict between certified criteria raises InconsistentCriteria.
    """
    cfg = config or DecisionConfig()
    criteria = [_m_criterion(model, cfg)]
    if isinstance(model, (ProductModel, GaussianProductModel)):
        criteria.append(kakutani_decide(model, cfg.k_max))
    if isinstance(model, MarkovModel):
        criteria.append(markov_spectral_decide(model, cfg.eps_spectral))
    criteria.append(_predictable_evidence(model, cfg))

    decision, basis = _fold_criteria(criteria)

    witness = None
    if model.discrete:
        depth = cfg.witness_depth or min(cfg.depth, 8)
        if isinstance(model, TreeModel):
            depth = min(depth, model.depth)
        size = model.alphabet.size
        cap = tree_ops.atom_budget(cfg.atom_budget)
        if depth >= 1 and size**depth <= cap:
            witness = witness_set(model, depth, cfg.atom_budget)
    return Verdict(decision, basis, criteria, witness)
