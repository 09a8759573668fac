"""Simulation and bounds for generalized renewal processes: hazards with atoms, Lorden bounds,
couplings with guaranteed coalescence, and total-variation convergence experiments."""

__version__ = "0.1.0"

from .gendist import (  # noqa: F401
    DistributionView,
    HazardSpec,
    ImproperDistributionError,
    as_view,
    atoms_only,
    common_part_kappa,
    cumulative_hazard,
    delayed,
    evaluate,
    exponential,
    min_compose,
    moment,
    pareto,
    sample,
    spec_from_dict,
    stochastic_order_check,
    tabulated,
    uniform,
    weibull,
)
from .renewal import (  # noqa: F401
    AlternatingPolicy,
    CustomPolicy,
    Envelope,
    IIDPolicy,
    MinCompositionPolicy,
    PathRecord,
    empirical_overshoot_distribution,
    overshoot_at,
    renewal_function,
    simulate_path,
    simulate_paths,
    smith_limit_check,
    stationary_overshoot_cdf,
    undershoot_at,
)
from .lorden import (  # noqa: F401
    BoundReport,
    asymptotic_mean_overshoot,
    classical_bound,
    generalized_bound,
    moment_bound,
    verify_bounds_mc,
)
from .coupling import (  # noqa: F401
    CouplingConfig,
    CouplingResult,
    convergence_experiment,
    couple_n,
    couple_pair,
    coupling_runs,
    empirical_tv,
    rate_constant,
    residual_kappa,
    successful_coupling,
)
from .models import (  # noqa: F401
    MmppState,
    ReliabilityState,
    envelope_audit,
    reliability_ergodicity_experiment,
    simulate_mmpp,
    simulate_reliability,
)
