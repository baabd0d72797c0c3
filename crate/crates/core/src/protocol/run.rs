use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;

use crate::basis::{LatticeBasis, LatticeSpec};
use crate::dynamics::{
    ClosedIntegrator, DampingModel, IntegratorOptions, LindbladGenerator, OpenIntegrator, PhaseLedger, Trajectory,
};
use crate::error::{Error, Result};
use crate::operators::Boundary;
use crate::state::{embed_input_state, InputState, QuantumState, LOW_OCCUPATION_THRESHOLD};
use crate::C64;

use super::durations::duration_bounds;
use super::schedule::{ControlSchedule, STEPS};
use super::target::target_state;

/// Everything about the device and input that stays fixed across schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSetup {
    pub sites: usize,
    pub per_site_cap: u32,
    pub boundary: Boundary,
    pub input: InputState,
    /// Static detuning per site (rad/s).
    pub detuning: Vec<f64>,
    pub damping: Option<DampingModel>,
}

impl ProtocolSetup {
    pub fn new(sites: usize, per_site_cap: u32, input: InputState) -> Self {
        Self {
            sites,
            per_site_cap,
            boundary: Boundary::Periodic,
            input,
            detuning: vec![0.0; sites],
            damping: None,
        }
    }

    pub fn with_damping(mut self, damping: Option<DampingModel>) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_detuning(mut self, detuning: Vec<f64>) -> Self {
        self.detuning = detuning;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct RunOptions {
    pub integrator: IntegratorOptions,
    /// Record per-sector phase ledgers (closed engine only).
    pub track_phases: bool,
}


#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub trajectory: Trajectory,
    pub state: QuantumState,
    /// `<target_N | psi_N>` per occupied sector at the end (closed engine).
    pub sector_overlaps: Option<Vec<(u32, C64)>>,
    pub ledgers: Option<Vec<PhaseLedger>>,
}

impl ProtocolRun {
    pub fn final_fidelity(&self) -> f64 {
        self.trajectory.final_fidelity().unwrap_or(0.0)
    }

    pub fn peak_fidelity(&self) -> f64 {
        self.trajectory.peak().map_or(0.0, |s| s.fidelity)
    }
}

/// Prepared basis, initial state, target and generator for one setup.
#[derive(Debug, Clone)]
pub struct Protocol {
    setup: ProtocolSetup,
    basis: Arc<LatticeBasis>,
    initial: QuantumState,
    target: QuantumState,
    generator: LindbladGenerator,
}

impl Protocol {
    /// The basis keeps states with at most `max n` quanta in total; no term of
    /// the dynamics raises the total, so nothing is lost.
    pub fn new(setup: ProtocolSetup) -> Result<Self> {
        if setup.detuning.len() != setup.sites {
            return Err(Error::config(format!(
                "{} detunings given for {} sites",
                setup.detuning.len(),
                setup.sites
            )));
        }
        let n = setup.input.max_n();
        if n > setup.per_site_cap {
            return Err(Error::Truncation(format!(
                "input has {n} quanta but the per-site cap is {}",
                setup.per_site_cap
            )));
        }
        setup.input.check_low_occupation(LOW_OCCUPATION_THRESHOLD);
        let spec = LatticeSpec::new(setup.sites, setup.per_site_cap, Some(n))?;
        let basis = Arc::new(LatticeBasis::new(spec)?);
        let initial = embed_input_state(&setup.input, &basis, 0)?;
        let target = target_state(&setup.input, &basis)?;
        let generator = LindbladGenerator::new(&basis, setup.boundary, setup.detuning.clone(), setup.damping)?;
        Ok(Self {
            setup,
            basis,
            initial,
            target,
            generator,
        })
    }

    pub fn setup(&self) -> &ProtocolSetup {
        &self.setup
    }

    pub fn basis(&self) -> &Arc<LatticeBasis> {
        &self.basis
    }

    pub fn initial(&self) -> &QuantumState {
        &self.initial
    }

    pub fn target(&self) -> &QuantumState {
        &self.target
    }

    pub fn generator(&self) -> &LindbladGenerator {
        &self.generator
    }

    fn warn_short_steps(&self, schedule: &ControlSchedule) {
        let (lo, hi) = (self.setup.input.min_n().max(2), self.setup.input.max_n().max(2));
        let Ok(b) = duration_bounds(schedule.chi_max(), schedule.kappa_max(), lo, hi) else {
            return;
        };
        let d = schedule.durations();
        for (step, bound) in [(2, b.dt2), (3, b.dt3), (5, b.dt5), (6, b.dt6)] {
            if d[step - 1] < bound {
                warn!(
                    "step {step} lasts {:.3e} s, below its adiabatic bound {bound:.3e} s even without margin",
                    d[step - 1]
                );
            }
        }
    }

    /// Full seven-step run from the embedded input state.
    pub fn run(&self, schedule: &ControlSchedule, options: RunOptions) -> Result<ProtocolRun> {
        self.warn_short_steps(schedule);
        self.run_steps(schedule, &self.initial, 1, STEPS, options)
    }

    /// Runs steps `first..=last` (1-based) starting from `state` at the start of `first`.
    /// A pure state without damping uses the per-sector engine, anything else the
    /// density-matrix engine.
    pub fn run_steps(
        &self,
        schedule: &ControlSchedule,
        state: &QuantumState,
        first: usize,
        last: usize,
        options: RunOptions,
    ) -> Result<ProtocolRun> {
        if !(1 <= first && first <= last && last <= STEPS) {
            return Err(Error::config(format!("invalid step range {first}..={last}")));
        }
        if state.basis().as_ref() != self.basis.as_ref() {
            return Err(Error::dimension("state basis differs from the protocol basis"));
        }
        let t0 = schedule.step_start(first);
        let target = self.target.as_pure().expect("target is pure");
        let mut trajectory = Trajectory::new(self.setup.sites);
        info!(
            "running steps {first}..={last} over [{t0:.4e}, {:.4e}] s",
            schedule.step_end(last)
        );
        match (state.as_pure(), &self.setup.damping) {
            (Some(psi), None) => {
                let mut integ = ClosedIntegrator::new(
                    self.basis.clone(),
                    self.setup.boundary,
                    &self.setup.detuning,
                    psi,
                    target,
                    t0,
                    options.integrator,
                )?;
                integ.record(schedule, &mut trajectory);
                if options.track_phases {
                    integ.track_phases(schedule);
                }
                for step in first..=last {
                    integ.advance_to(schedule.step_end(step), schedule, &mut trajectory)?;
                }
                Ok(ProtocolRun {
                    state: integ.state()?,
                    sector_overlaps: Some(integ.sector_overlaps()),
                    ledgers: integ.ledgers().map(|l| l.to_vec()),
                    trajectory,
                })
            }
            _ => {
                let rho = state.to_density();
                let mut integ = OpenIntegrator::new(&self.generator, rho, target.clone(), t0, options.integrator)?;
                integ.record(schedule, &mut trajectory)?;
                for step in first..=last {
                    integ.advance_to(schedule.step_end(step), schedule, &mut trajectory)?;
                }
                Ok(ProtocolRun {
                    state: QuantumState::density(self.basis.clone(), integ.into_density())?,
                    sector_overlaps: None,
                    ledgers: None,
                    trajectory,
                })
            }
        }
    }
}

pub fn run_protocol(setup: ProtocolSetup, schedule: &ControlSchedule, options: RunOptions) -> Result<ProtocolRun> {
    Protocol::new(setup)?.run(schedule, options)
}

/// Independent runs that differ only in the static detunings.
pub fn run_disorder_sweep(
    setup: &ProtocolSetup,
    schedule: &ControlSchedule,
    detunings: &[Vec<f64>],
    options: RunOptions,
) -> Vec<Result<ProtocolRun>> {
    detunings
        .par_iter()
        .map(|d| run_protocol(setup.clone().with_detuning(d.clone()), schedule, options))
        .collect()
}
