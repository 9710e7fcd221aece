"""Survival of a simple random walk among heavy-tailed soft traps."""

__version__ = "0.1.0"

from .env import (
    Environment,
    GapLaw,
    PointMeasure,
    RecordSequence,
    compute_records,
    mean_log_gap,
    rescaled_point_measure,
    sample_covering,
    sample_environment,
)
from .errors import (
    EmptyMeasure,
    EnvironmentTooShort,
    IndexOrder,
    NumericalGuaranteeError,
    PhiOutOfRange,
    PositionOverflow,
    TrapwalkError,
    TruncationTooCoarse,
    ValidationError,
)
from .limit import (
    LimitParams,
    infimum_over_measure,
    limit_cdf,
    limit_tail_cdf,
    psi_value,
    sample_limit_F,
    sample_limit_many,
    sample_ppp,
)
from .periodic import (
    PeriodicSpec,
    laplace_matrix,
    periodic_decay_rate,
    perron_root,
    phi_homogeneous,
    phi_periodic,
)
from .stats import (
    ExperimentConfig,
    convergence_experiment,
    gap_score_profile,
    ks_distance,
    ks_two_sample,
    lambda_estimate,
    records_statistics,
)
from .survival import (
    SurvivalParams,
    SurvivalResult,
    confined_survival_probability,
    crossing_costs,
    crossing_probability,
    fkg_compare,
    lambda_sequence,
    lambda_two_sided,
    log_survival_probability,
)
