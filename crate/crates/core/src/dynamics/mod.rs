//! Time integration: Lindblad master equation, closed-system evolution per
//! number sector, an exponential-propagator oracle and accumulated-phase tracking.

mod closed;
mod lindblad;
mod open;
mod oracle;
mod rk4;
mod trajectory;

pub use closed::{evolve_closed_sector, wrap_phase, ClosedIntegrator, PhaseLedger, SectorPropagator};
pub use lindblad::{lindblad_rhs, DampingModel, Dissipators, LindbladGenerator};
pub use open::{evolve_open, OpenIntegrator, OpenRun};
pub use oracle::{exponential_oracle, exponential_oracle_with_limit, propagator, DENSE_LIMIT};
pub use rk4::{rk4_step, step_count, OdeState};
pub use trajectory::{IntegrationStats, Sample, Trajectory};

use crate::operators::Controls;

/// Reference time step, 1 ps.
pub const REFERENCE_DT: f64 = 1e-12;
pub const DEFAULT_SAMPLE_STRIDE: usize = 100;
pub const DEFAULT_SYMMETRIZE_EVERY: usize = 1000;
pub const DEFAULT_TRACE_BUDGET: f64 = 1e-6;

/// Time-dependent control values.
pub trait ControlSource: Sync {
    fn controls(&self, t: f64) -> Controls;
}

impl ControlSource for Controls {
    fn controls(&self, _t: f64) -> Controls {
        *self
    }
}

impl<F: Fn(f64) -> Controls + Sync> ControlSource for F {
    fn controls(&self, t: f64) -> Controls {
        self(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub dt: f64,
    /// Record a sample every `stride` steps (segment ends are always recorded).
    pub stride: usize,
    /// Hermitian symmetrization interval for density matrices.
    pub symmetrize_every: usize,
    /// Allowed `|Tr rho - Tr rho_0|` before failing.
    pub trace_budget: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            dt: REFERENCE_DT,
            stride: DEFAULT_SAMPLE_STRIDE,
            symmetrize_every: DEFAULT_SYMMETRIZE_EVERY,
            trace_budget: DEFAULT_TRACE_BUDGET,
        }
    }
}
