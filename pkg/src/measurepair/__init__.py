"""Decide and diagnose mutual absolute continuity of kernel-pair measures
on sequence spaces: exact density-process and affinity computations on
discrete models, certified equivalence/singularity criteria, and Monte Carlo
trajectory diagnostics."""

from .errors import (
    BudgetExceeded,
    ContinuousCoordinate,
    DepthExceeded,
    EngineMismatch,
    InconsistentCriteria,
    IndexOutOfRange,
    MeasurePairError,
    NotMarkov,
    NotProduct,
    SchemaError,
    ValidationError,
)
from .models import (
    Alphabet,
    BernoulliPerturbationTail,
    GaussianCoordinate,
    GaussianProductModel,
    KernelPairModel,
    KernelStep,
    MarkovModel,
    MeanGapTail,
    ProductModel,
    TreeModel,
    conditional_kernels,
    load_model,
    parse_model,
    serialize_model,
    step_affinity,
)
from .radicals import RadicalSum, sqrt_rational
from .tree import (
    CylinderWeights,
    DensityState,
    conditional_expectation,
    density_state,
    enumerate_cylinders,
    log_phi,
    phi,
    small_phi,
)
from .affinity import (
    AffinityTable,
    MarkovAffinityOperator,
    MLimitEstimate,
    NTable,
    affinity_table,
    estimate_m_limit,
    expected_m,
    hellinger_identity,
    m_nk,
    m_nk_dual,
    m_table,
    markov_operator,
    n_nk,
    n_table,
)
from .decide import (
    CriterionResult,
    DecisionConfig,
    Verdict,
    WitnessSet,
    decide_equivalence,
    kakutani_decide,
    markov_spectral_decide,
    predictable_sum,
    predictable_sum_by_atom,
    witness_set,
)
from .montecarlo import (
    EnsembleSummary,
    MonteCarloEstimate,
    NMRelationReport,
    PathTrace,
    PhiLimitReport,
    empirical_hellinger,
    nm_relation_diagnostic,
    phi_limit_diagnostic,
    sample_paths,
    summarize_ensemble,
)
from .report import RunConfig, run_analyze, run_sample, run_sweep, run_verify

__version__ = "0.1.0"
