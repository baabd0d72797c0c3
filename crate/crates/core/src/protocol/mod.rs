//! The seven-step protocol: control schedules, duration bounds, feasibility
//! checks, target states, full runs and step-7 calibration.

mod calibrate;
mod durations;
mod feasibility;
mod run;
mod schedule;
mod target;

pub use calibrate::{
    calibrate_dt7, calibrate_schedule, default_window, fit_total_duration, maximize, Calibration, Maximum, TotalFit,
    DEFAULT_CANDIDATES, REFINE_ITERATIONS,
};
pub use durations::{
    duration_bounds, recommend_durations, recommend_durations_with_floor, DurationBounds, RecommendedDurations,
    DEFAULT_MARGIN, FAST_STEP,
};
pub use feasibility::{
    delta_omega_bound, feasibility, n_max_bound, Constraint, FeasibilityInput, FeasibilityReport, Status,
    RATE_GRID, RATE_RATIO_CAP,
};
pub use run::{run_disorder_sweep, run_protocol, Protocol, ProtocolRun, ProtocolSetup, RunOptions};
pub use schedule::{build_schedule, ControlSchedule, HoppingBranch, Segment, STEPS};
pub use target::target_state;
