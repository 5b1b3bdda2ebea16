//! Trajectory sampling and numerical verification of the decay estimates.

mod bounds;
mod checks;
mod fit;
mod trajectory;

pub use bounds::{entropy_factor, hyper_inner_eps, BoundsBundle};
pub use checks::{
    box_grid, check_contractivity, check_entropy_monotone, check_fisher_differential,
    check_improved_decay, check_interpolation, check_interpolation_traj, check_log_sobolev,
    check_lower_bound, check_main_theorems, check_splitting, interpolation_from_values,
    CheckRecord, ContractivityReport, ContractivityTimes, ImprovedDecayReport,
    InterpolationCheck, LowerBoundReport, MainTheoremReport, TrajectoryReport, FD_STEP, FD_TOL,
    IMPROVED_SLACK, INTERPOLATION_SLACK, ORDER_TOLERANCE, PAIRWISE_SLACK, RATE_TOLERANCE,
};
pub use fit::{fit_decay, linear_fit, log_slope, FitResult, INCONCLUSIVE_RESIDUAL};
pub use trajectory::{
    certified_rate, default_time_grid, lp_finite, run_trajectory, Sample, SampleBounds,
    Trajectory, TrajectoryOptions, DEFAULT_ETA, DEFAULT_EPS, DEFAULT_RESOLUTION_TOL,
};
