use std::sync::Arc;

use log::debug;
use nalgebra::{DMatrix, DVector};

use super::rk4::{rk4_step, step_count};
use super::trajectory::{Sample, Trajectory};
use super::{ControlSource, IntegratorOptions, LindbladGenerator};
use crate::basis::LatticeBasis;
use crate::error::{Error, Result};
use crate::state::{density_purity, expectation, hermiticity_error, QuantumState};
use crate::C64;

/// Density-matrix integrator that can be advanced segment by segment.
#[derive(Debug, Clone)]
pub struct OpenIntegrator<'g> {
    generator: &'g LindbladGenerator,
    target: DVector<C64>,
    rho: DMatrix<C64>,
    t: f64,
    steps: usize,
    initial_trace: f64,
    options: IntegratorOptions,
}

impl<'g> OpenIntegrator<'g> {
    pub fn new(
        generator: &'g LindbladGenerator,
        rho: DMatrix<C64>,
        target: DVector<C64>,
        t0: f64,
        options: IntegratorOptions,
    ) -> Result<Self> {
        let d = generator.dim();
        if rho.nrows() != d || rho.ncols() != d || target.len() != d {
            return Err(Error::dimension(format!(
                "density matrix {}x{} / target {} for generator of dimension {d}",
                rho.nrows(),
                rho.ncols(),
                target.len()
            )));
        }
        if options.stride == 0 {
            return Err(Error::config("sample stride must be at least 1"));
        }
        let initial_trace = rho.trace().re;
        Ok(Self {
            generator,
            target,
            rho,
            t: t0,
            steps: 0,
            initial_trace,
            options,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn density(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn into_density(self) -> DMatrix<C64> {
        self.rho
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sample(&self, controls: &dyn ControlSource) -> Sample {
        let d = self.generator.dim();
        let m = self.generator.sites();
        let mut occupations = vec![0.0; m];
        for (j, o) in occupations.iter_mut().enumerate() {
            let n = self.generator.terms().occupation(j);
            *o = (0..d).map(|a| n[a] * self.rho[(a, a)].re).sum();
        }
        Sample {
            t: self.t,
            fidelity: expectation(&self.rho, &self.target).clamp(0.0, 1.0),
            trace: self.rho.trace().re,
            purity: density_purity(&self.rho),
            occupations,
            controls: controls.controls(self.t),
        }
    }

    /// Integrates to `t1` in equal steps close to `options.dt`, recording every
    /// `stride`-th step and the end point into `trajectory`.
    pub fn advance_to(&mut self, t1: f64, controls: &dyn ControlSource, trajectory: &mut Trajectory) -> Result<()> {
        let n = step_count(t1 - self.t, self.options.dt)?;
        if n == 0 {
            return Ok(());
        }
        let t0 = self.t;
        let h = (t1 - t0) / n as f64;
        let gen = self.generator;
        let mut rhs = |t: f64, rho: &DMatrix<C64>| gen.rhs(&controls.controls(t), rho);
        for i in 0..n {
            let t = t0 + i as f64 * h;
            self.rho = rk4_step(&self.rho, t, h, self.steps, &mut rhs)?;
            self.steps += 1;
            self.t = if i + 1 == n { t1 } else { t0 + (i + 1) as f64 * h };

            if self.steps.is_multiple_of(self.options.symmetrize_every) {
                let err = hermiticity_error(&self.rho);
                trajectory.stats.max_hermiticity_error = trajectory.stats.max_hermiticity_error.max(err);
                debug!("step {}: symmetrizing, |rho - rho^+|_max = {err:.3e}", self.steps);
                self.rho = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
            }
            if self.steps.is_multiple_of(self.options.stride) || i + 1 == n {
                self.record(controls, trajectory)?;
            }
        }
        trajectory.stats.steps = self.steps;
        Ok(())
    }

    pub fn record(&self, controls: &dyn ControlSource, trajectory: &mut Trajectory) -> Result<()> {
        let s = self.sample(controls);
        let drift = (s.trace - self.initial_trace).abs();
        trajectory.stats.max_trace_drift = trajectory.stats.max_trace_drift.max(drift);
        trajectory.stats.max_hermiticity_error = trajectory
            .stats
            .max_hermiticity_error
            .max(hermiticity_error(&self.rho));
        if drift > self.options.trace_budget {
            return Err(Error::IntegrationQuality(format!(
                "trace drifted by {drift:.3e} at t = {:.6e} s (budget {:.1e})",
                self.t, self.options.trace_budget
            )));
        }
        trajectory.push(s);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OpenRun {
    pub state: QuantumState,
    pub trajectory: Trajectory,
}

/// Lindblad evolution of `rho` from `t0` to `t1`; fidelity is measured against `target`.
pub fn evolve_open(
    generator: &LindbladGenerator,
    basis: &Arc<LatticeBasis>,
    rho: &QuantumState,
    target: &QuantumState,
    controls: &dyn ControlSource,
    t0: f64,
    t1: f64,
    options: IntegratorOptions,
) -> Result<OpenRun> {
    let t = target
        .as_pure()
        .ok_or_else(|| Error::config("fidelity target must be a pure state"))?
        .clone();
    let mut integ = OpenIntegrator::new(generator, rho.to_density(), t, t0, options)?;
    let mut trajectory = Trajectory::new(generator.sites());
    integ.record(controls, &mut trajectory)?;
    integ.advance_to(t1, controls, &mut trajectory)?;
    let state = QuantumState::density(basis.clone(), integ.into_density())?;
    Ok(OpenRun { state, trajectory })
}
