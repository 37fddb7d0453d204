"""Temporal Bell inequalities for consecutive dichotomic measurements.

Exact qubit predictions for sequential projective measurements, a
joint-reality hidden-variable model with perfect correlation, Monte Carlo
run ensembles for both, inequality evaluation with error bars, and a
numerical search for maximally violating measurement directions.
"""

from .qubit import (
    Direction,
    Outcome,
    PureState,
    Z_AXIS,
    bloch_vector,
    born_prob,
    collapse,
    direction_from_spherical,
    dot,
    eigenstate,
    measure,
    state_from_bloch,
)
from .lhv import (
    ALL_TRIPLES,
    Disturbance,
    HiddenCountTable,
    HiddenTriple,
    Setting,
    TripleDistribution,
    check_count_inequality,
    hidden_marginal,
    hidden_marginals,
    lhv_read,
    sample_triple,
)
from .engine import (
    EnsembleResult,
    Mode,
    Model,
    ProtocolConfig,
    RunCountTable,
    RunRecord,
    draw_setting_pair,
    estimate_expectation,
    estimate_pair_prob,
    execute_run_lhv,
    execute_run_quantum,
    perfect_correlation_check,
    prepared_run,
    run_ensemble,
    run_two_series,
    two_series_estimate,
)
from .inequalities import (
    eq5_ratio,
    eval_eq6,
    eval_eq7,
    eval_eq8,
    eval_eq10,
    lhs16,
    lhs18,
    quantum_expectation,
    quantum_pair_prob,
)
from .reporting import InequalityReport
from .search import SearchConfig, TripleConfiguration, grid_oracle, maximize
from .config import ExperimentConfig, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "ALL_TRIPLES",
    "Direction",
    "Disturbance",
    "EnsembleResult",
    "ExperimentConfig",
    "HiddenCountTable",
    "HiddenTriple",
    "InequalityReport",
    "Mode",
    "Model",
    "Outcome",
    "ProtocolConfig",
    "PureState",
    "RunCountTable",
    "RunRecord",
    "SearchConfig",
    "Setting",
    "TripleConfiguration",
    "TripleDistribution",
    "Z_AXIS",
    "bloch_vector",
    "born_prob",
    "check_count_inequality",
    "collapse",
    "direction_from_spherical",
    "dot",
    "draw_setting_pair",
    "eigenstate",
    "eq5_ratio",
    "estimate_expectation",
    "estimate_pair_prob",
    "eval_eq6",
    "eval_eq7",
    "eval_eq8",
    "eval_eq10",
    "execute_run_lhv",
    "execute_run_quantum",
    "grid_oracle",
    "hidden_marginal",
    "hidden_marginals",
    "lhs16",
    "lhs18",
    "lhv_read",
    "load_config",
    "maximize",
    "measure",
    "parse_config",
    "perfect_correlation_check",
    "prepared_run",
    "quantum_expectation",
    "quantum_pair_prob",
    "run_ensemble",
    "run_two_series",
    "sample_triple",
    "state_from_bloch",
    "two_series_estimate",
    "__version__",
]
