"""Hausdorff-dimension bounds for eventually-always-hitting sets of IFS attractors."""

from .errors import EahdimError, InputError, NumericError, ResourceError
from .ifs import (
    ConformalOracle,
    PressureSolverConfig,
    Similarity,
    continued_fraction_oracle,
    dim_attractor,
    log_deriv_norm,
    pressure,
    pressure_bracket,
    pressure_derivative,
    pressure_linear_root,
)
from .symbolic import (
    DoublingBlocks,
    ExplicitPrefix,
    FloorWindow,
    Periodic,
    PowerWindow,
    Semantics,
    decompose_matches,
    eah_feasible,
    estimate_rates,
    in_lambda_t_prefix,
    is_in_G_up_to,
)
from .dimension import (
    Case,
    DimensionReport,
    Sign,
    classify_case,
    gap_bound_check,
    omega_bounds,
    omega_estimate,
    omega_exact_periodic,
    s_hat,
    solve_s,
    solve_s_bar,
)
from .oracle import build_L, count_eah_words, dim_bracket_from_counts, discrete_measure

__version__ = "0.1.0"
