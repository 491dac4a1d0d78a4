"""Oracle-efficient online learning against smoothed and hint-constrained
adversaries, with an executable verification suite for the supporting
lemmas (coupling, Poisson TV/chi-square bounds, Rademacher monotonicity,
admissibility) and a reproducible experiment harness."""

from .core import (
    ExampleMultiset,
    FiniteDomain,
    Hypothesis,
    HypothesisClass,
    LabeledExample,
    LossKind,
    LossSpec,
    SmoothDistribution,
    compute_vc_dimension,
    loss_eval,
    make_partition_class,
    make_shatter_class,
    make_support_partition_class,
    validate_smooth,
)
from .errors import CapacityError, ContractViolation, FitError, InputError
from .oracle import OracleStats, TiePolicy, approx_erm, erm, mixed_opt
from .adversary import (
    Adversary,
    AdversaryKind,
    AdversarySpec,
    HintSchedule,
    biased_label_rule,
    cyclic_hint_schedule,
    full_domain_schedule,
    known_sequence_schedule,
    make_hint_schedule,
    next_round,
)
from .learner import (
    Alg1Smoothed,
    Alg2PoissonFTPL,
    Alg3Transductive,
    DoublingMeta,
    FTL,
    HedgeLearner,
    default_n,
    hedge_update,
    hint_count,
    poisson_sample,
)
from .verify import (
    RelaxationMode,
    RelaxationParams,
    VerificationReport,
    admissibility_check,
    beta_budget,
    chi2_mixture,
    chi2_mixture_direct,
    coupling_montecarlo,
    coupling_select,
    eta_budget,
    generalization_gap_mc,
    monotonicity_check,
    rademacher_estimate,
    relaxation_value,
    shifted_poisson_tv,
    smooth_polytope_vertices,
    tv_exact_poisson,
)
from .harness import (
    ExperimentConfig,
    FitResult,
    Transcript,
    fit_scaling,
    run_experiment,
    run_game,
)

__version__ = "0.1.0"
