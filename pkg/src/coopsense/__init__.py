"""Cooperative multi-channel spectrum-sensing schedules, throughput and robust selection."""

from .detection import (
    Fusion,
    HetSensingSolution,
    SensingRequirements,
    coop_sensing_time_hom,
    db_to_linear,
    het_coop_sensing_time,
    het_optimal_subset,
    linear_to_db,
    q_func,
    q_inv,
    sensing_time_single,
)
from .errors import (
    CoopSenseError,
    DomainError,
    FitError,
    InfeasibleError,
    InvalidScheduleError,
    NoSolutionError,
    ScenarioError,
    SizeGuardError,
)
from .het_strategies import het_parallel, het_seqpar, het_sequential
from .model import (
    ChannelSpec,
    Job,
    Scenario,
    Schedule,
    ThroughputReport,
    capacity,
    evaluate_schedule,
    validate_schedule,
)
from .robust import (
    DtmcTraffic,
    RobustSpec,
    TruncExpSnr,
    dtmc_simulate,
    estimate_duty_cycle,
    estimator_variance,
    expint_e1,
    lag_correlation,
    rop1_solve,
    rop4_solve,
    rop_min_samples,
    rop_min_variance,
    throughput_variance_traffic,
    trunc_exp_inverse_moments,
)
from .scenario import bundled_scenario, load_scenario, scenario_from_dict, scenario_to_dict
from .strategies import (
    hom_analytic,
    iterative_parallel,
    parallel_dp,
    parallel_greedy,
    parallel_marginal,
    parallel_relaxed,
    seqpar_dp,
    seqpar_greedy,
    sequential_schedule,
)

__version__ = "0.1.0"
