"""Interacting urn models with strong reinforcement: exact discrete
simulators, a continuous-time embedding with delayed rate updates, the
planar mean-field gradient system, and seeded Monte Carlo ensembles."""

__version__ = "0.1.0"

from .errors import ConditionViolation, InternalConsistencyError
from .reinforcement import (
    ConditionVerdict,
    ConstBranch,
    ExpBranch,
    PolyBranch,
    ReinforcementSeq,
    TailRule,
    check_mdrem_conditions,
    check_remainder_bound,
    check_strong,
    check_variation_bound,
    make_exponential,
    make_polynomial,
    make_table,
    remainder,
)
from .meanfield import (
    Equilibrium,
    FlowTrajectory,
    ModelParams,
    eigenvalues,
    f_weight,
    field,
    find_equilibria,
    flow,
    h_of_z,
    jacobian,
    lyapunov,
    lyapunov_closed,
    power_ratio,
    sample_field,
    solve_sm,
    solve_um,
    um_stability_margin,
)
from .urns import (
    MultiColorState,
    SequentialState,
    Trajectory,
    UrnState,
    classify_limit,
    detect_monopoly,
    init_ium,
    init_multicolor,
    init_sequential,
    proportions,
    run,
    run_coupled,
    step_ium,
    step_multicolor,
    step_sequential,
)
from .embedding import (
    EmbeddingState,
    JumpEvent,
    LawTestReport,
    advance_to_next_jump,
    compare_laws,
    extract_discrete,
    init_embedding,
    refresh_rates,
    sample_embedding_counts,
    sample_multicolor_counts,
    save_jump_log,
    sigma_decomposition,
    visit_times,
)
from .ensembles import (
    EnsembleConfig,
    McReport,
    MonopolyEstimate,
    PhaseCurve,
    estimate_monopoly_prob,
    run_ensemble,
    scan_p,
    wilson_interval,
)
from .seeds import derive_seed, make_rng

__all__ = [name for name in dir() if not name.startswith("_")]
