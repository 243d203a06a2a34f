"""Truncated-dimension randomized Euler scheme for jump-diffusion SDEs driven
by a countably dimensional Wiener process and a compound Poisson process."""
from .analysis import (
    ConvergenceTable,
    RatePrediction,
    delta_inverse,
    fit_loglog_slope,
    optimal_params,
    predict_rate,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    InvalidParameter,
    JumpEulerError,
    MissingReference,
    NonFiniteCoefficient,
    NonFiniteState,
    TrajectoryFailure,
)
from .estimator import (
    CostModel,
    ErrorEstimate,
    informational_cost,
    mc_error_coupled,
    mc_error_vs_reference,
    sample_terminals,
)
from .model import (
    ClassParams,
    CompiledCoefficients,
    ExactReference,
    FactorizedDiffusion,
    JumpLaw,
    ModelSpec,
    SeriesDiffusion,
    power_tail_delta,
    truncated_diffusion_apply,
    validate_model,
)
from .models import (
    MertonSpec,
    OuJumpSpec,
    make_merton_model,
    make_ou_model,
    make_preset,
    merton_exact_terminal,
    merton_mean,
    ou_mean,
)
from .noise import (
    Channel,
    JumpStream,
    NoiseGrid,
    StreamKey,
    aggregate_to_rare,
    generate_fine_grid,
    generate_jump_stream,
)
from .scheme import (
    SchemeParams,
    StepInputs,
    TerminalValue,
    randomized_euler_step,
    simulate_coupled_pair,
    simulate_terminal,
    simulate_with_reference,
)

__version__ = "0.1.0"
