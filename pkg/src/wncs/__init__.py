"""Variable-length packet scheduling for wireless networked control.

The hot loops (relative value iteration, closed-loop episodes) run in a
compiled extension when it is available and in pure Python otherwise;
``wncs.kernels.BACKEND`` tells which one was loaded.
"""

from .channel import ChannelModel, error_prob, validate
from .config import ExperimentConfig, load_config, reference_defaults, parse_config
from .errors import (
    ConfigError,
    ConvergenceError,
    DefinitenessError,
    DimensionError,
    DivergenceError,
    DomainError,
    NumericError,
    PreconditionError,
    StructureError,
    WncsError,
)
from .kernels import BACKEND
from .lti import SystemModel, check_controllable_observable, h_matrix, slot_cost
from .oracle import FixedLengthCost, analytic_fixed_cost, aoi_stationary_pmf, cost_bounds
from .sim import SimConfig, SimReport, control_command, estimate_cost, run_episode, step_plant
from .smdp import (
    Policy,
    RviResult,
    SmdpSpec,
    TransformedMdp,
    duration,
    evaluate_policy,
    one_stage_cost,
    solve_rvi,
    stationary_distribution,
    transform,
    transition,
)
from .stability import (
    StabilityReport,
    fixed_length_stable,
    stability_report,
    variable_length_stable,
)

__version__ = "0.1.0"
