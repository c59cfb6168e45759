"""Feedback particle filter with a diffusion-map gain, exact oracles, and a
numerical verification harness for the gain's structural properties."""

__version__ = "0.1.0"

from .kernels import (
    Ensemble,
    KernelConfig,
    MarkovBundle,
    build_markov,
    gaussian_kernel,
    stationary_by_power_iteration,
)
from .gain import (
    GainConfig,
    GainField,
    compute_gain_field,
    constant_gain,
    evaluate_potential_at,
    exact_gain_1d,
    gain_at_particles,
    gain_at_points,
    solve_fixed_point,
)
from .meanfield import (
    DensityGrid,
    MeanFieldField,
    gain_bound_certificate,
    meanfield_gain,
    poincare_check,
    solve_meanfield_fixed_point,
    transition_density,
)
from .models import ModelSpec
from .filtering import (
    MonitorState,
    SimConfig,
    kalman_bucy,
    run_coupled_poc,
    run_filter_compare,
    simulate_truth_and_observations,
    sir_reference,
    step_enkbf,
    step_fpf,
    update_monitors,
)
from .diagnostics import (
    brascamp_lieb_check,
    compute_constants,
    lln_gain_gap,
    rate_regression,
    verify_appendix_inequalities,
    verify_kernel_lipschitz,
)

__all__ = [name for name in dir() if not name.startswith("_")]
