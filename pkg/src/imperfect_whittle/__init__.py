"""Approximated Whittle indices for restless bandits with imperfect state observations."""
from .belief import (
    ObservationModel,
    TransitionMatrix,
    lipschitz_bound,
    phi,
    stationary_belief,
    tau,
    tau_k,
    tau_phi,
    update_belief,
)
from .crossing import NEVER, first_crossing_time
from .index import (
    AffineValue,
    IndexQuery,
    PassiveTimeChain,
    ValueChain,
    check_indexability,
    closed_form_whittle_index,
    threshold_beta_bound,
    whittle_index,
)
from .models import ArmModel, BanditConfig
from .policies import (
    joint_optimal_value,
    select_myopic,
    select_whittle,
    single_arm_finite_value,
    single_arm_threshold_scan,
)
from .sim import Policy, monte_carlo, run_episode

__version__ = "0.1.0"
