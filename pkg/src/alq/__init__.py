"""Exact active-learning query policies for Bayesian graph classification,
with entropy bounds on the query-budget / accuracy tradeoff."""

from .bounds import (
    AlphaGrid,
    BoundReport,
    arimoto_conditional_entropy,
    big_gamma,
    bound_report,
    conditional_event_renyi,
    gamma,
    renyi_entropy,
    theorem2_upper_bound,
    theorem3_lower_bound,
    theorem4_bounds,
)
from .errors import (
    AlqError,
    InvariantViolation,
    UnreachableStateError,
    ValidationError,
    ZeroMassError,
)
from .harness import ScenarioResult, emit_results, run_scenario, run_scenarios
from .model import (
    LabelConfig,
    Observation,
    SbmParams,
    ScenarioConfig,
    default_scenarios,
    load_graph,
    load_scenarios,
    log_likelihood,
    rng_stream,
    sample_labels,
    sample_observation,
    save_graph,
    save_scenarios,
)
from .oracle import (
    best_batch_gamma_policy,
    brute_posterior,
    enumerate_adaptive_policies,
    run_verification,
)
from .policy import (
    BINARY,
    HAMMING,
    LossFunction,
    QueryPlan,
    al_gain,
    build_plan,
    leaf_risk_by_enumeration,
    pc_batch,
    pc_ssp,
)
from .posterior import (
    PosteriorTable,
    compute_posterior,
    conditional_label_dist,
    is_permutation_invariant,
    max_joint_consistent,
    normalized_accuracy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
