use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::state::QuantumState;
use crate::TWO_PI;

use super::durations::{RecommendedDurations, FAST_STEP};
use super::run::{Protocol, RunOptions};
use super::schedule::{ControlSchedule, HoppingBranch, STEPS};

pub const DEFAULT_CANDIDATES: usize = 200;
/// Golden-section iterations after the grid scan.
pub const REFINE_ITERATIONS: usize = 60;

/// `[3 ns, 3 ns + 4 pi / chi_max]`, about one oscillation period of step 7.
pub fn default_window(chi_max: f64) -> (f64, f64) {
    (FAST_STEP, FAST_STEP + 2.0 * TWO_PI / chi_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// `(x, f(x))` for every grid candidate.
    pub grid: Vec<(f64, f64)>,
}

/// Grid scan over `[lo, hi]` followed by golden-section refinement around the
/// best interior candidate. A maximum on either end of the window is an error.
pub fn maximize<F>(f: F, lo: f64, hi: f64, candidates: usize) -> Result<Maximum>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(lo < hi && lo > 0.0 && hi.is_finite()) {
        return Err(Error::config(format!("invalid search window [{lo:e}, {hi:e}]")));
    }
    if candidates < 3 {
        return Err(Error::config("a search window needs at least 3 candidates"));
    }
    let step = (hi - lo) / (candidates - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..candidates)
        .into_par_iter()
        .map(|k| {
            let x = if k + 1 == candidates { hi } else { lo + k as f64 * step };
            f(x).map(|v| (x, v))
        })
        .collect::<Result<_>>()?;
    let best = (0..candidates).max_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1)).unwrap();
    if best == 0 || best + 1 == candidates {
        return Err(Error::WidenWindow { lo, hi });
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (grid[best - 1].0, grid[best + 1].0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..REFINE_ITERATIONS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let (mut x, mut value) = grid[best];
    for (xi, vi) in [(c, fc), (d, fd)] {
        if vi > value {
            x = xi;
            value = vi;
        }
    }
    Ok(Maximum { x, value, grid })
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub dt7: f64,
    pub fidelity: f64,
    pub grid: Vec<(f64, f64)>,
    pub schedule: ControlSchedule,
}

fn scan_options(options: RunOptions) -> RunOptions {
    RunOptions {
        integrator: crate::dynamics::IntegratorOptions {
            stride: usize::MAX,
            ..options.integrator
        },
        track_phases: false,
    }
}

/// Chooses the step-7 duration that maximizes the final fidelity, simulating only
/// step 7 from `state_t6`, the state at the end of step 6 under `schedule`.
pub fn calibrate_dt7(
    protocol: &Protocol,
    schedule: &ControlSchedule,
    state_t6: &QuantumState,
    window: (f64, f64),
    candidates: usize,
    options: RunOptions,
) -> Result<Calibration> {
    let opts = scan_options(options);
    let fid = |dt7: f64| -> Result<f64> {
        let s = schedule.with_duration(STEPS, dt7)?;
        Ok(protocol.run_steps(&s, state_t6, STEPS, STEPS, opts)?.final_fidelity())
    };
    let m = maximize(fid, window.0, window.1, candidates)?;
    Ok(Calibration {
        dt7: m.x,
        fidelity: m.value,
        grid: m.grid,
        schedule: schedule.with_duration(STEPS, m.x)?,
    })
}

/// Runs steps 1 to 6 and calibrates step 7 over the default window.
pub fn calibrate_schedule(protocol: &Protocol, schedule: &ControlSchedule, options: RunOptions) -> Result<Calibration> {
    let head = protocol.run_steps(schedule, protocol.initial(), 1, STEPS - 1, scan_options(options))?;
    calibrate_dt7(
        protocol,
        schedule,
        &head.state,
        default_window(schedule.chi_max()),
        DEFAULT_CANDIDATES,
        options,
    )
}

#[derive(Debug, Clone)]
pub struct TotalFit {
    pub durations: [f64; STEPS],
    pub fidelity: f64,
    pub grid: Vec<(f64, f64)>,
}

/// Fits a schedule to a fixed total time: steps 1 to 6 keep the proportions of
/// `base` and fill `total - dt7`, and `dt7` is chosen over `window` to maximize
/// the final fidelity of the full run.
pub fn fit_total_duration(
    protocol: &Protocol,
    chi_max: f64,
    kappa_max: f64,
    branch: HoppingBranch,
    base: &RecommendedDurations,
    total: f64,
    window: (f64, f64),
    candidates: usize,
    options: RunOptions,
) -> Result<TotalFit> {
    let opts = scan_options(options);
    let fid = |dt7: f64| -> Result<f64> {
        let s = ControlSchedule::new(chi_max, kappa_max, base.rescaled(total, dt7)?, branch)?;
        Ok(protocol.run(&s, opts)?.final_fidelity())
    };
    let m = maximize(fid, window.0, window.1, candidates)?;
    Ok(TotalFit {
        durations: base.rescaled(total, m.x)?,
        fidelity: m.value,
        grid: m.grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::IntegratorOptions;
    use crate::mhz;
    use crate::protocol::{build_schedule, ProtocolSetup};
    use crate::state::InputState;
    use crate::C64;

    #[test]
    fn maximize_finds_interior_peak() {
        let m = maximize(|x| Ok(-(x - 0.37).powi(2)), 0.1, 1.0, 20).unwrap();
        assert!((m.x - 0.37).abs() < 1e-7);
        assert_eq!(m.grid.len(), 20);
        assert!(m.value >= m.grid[0].1 && m.value >= m.grid[19].1);
    }

    #[test]
    fn maximize_rejects_edge_peak() {
        let e = maximize(Ok, 0.1, 1.0, 20).unwrap_err();
        assert!(matches!(e, Error::WidenWindow { .. }));
        assert!(maximize(Ok, 1.0, 0.1, 20).is_err());
    }

    fn opts() -> RunOptions {
        RunOptions {
            integrator: IntegratorOptions {
                dt: 2e-12,
                ..Default::default()
            },
            track_phases: false,
        }
    }

    #[test]
    fn fock_input_peaks_are_equivalent() {
        // a single sector has no relative phase to fix, so every dt7 gives the same
        // fidelity up to the ramp-rate dependence of step 7
        let chi = mhz(100.0);
        let p = Protocol::new(ProtocolSetup::new(3, 2, InputState::fock(2))).unwrap();
        let s = build_schedule(chi, mhz(30.0), [1e-9, 20e-9, 30e-9, 1e-9, 30e-9, 20e-9, 5e-9]).unwrap();
        let head = p.run_steps(&s, p.initial(), 1, 6, opts()).unwrap();
        let f: Vec<f64> = [5e-9, 10e-9, 15e-9]
            .iter()
            .map(|&d| p.run_steps(&s.with_duration(7, d).unwrap(), &head.state, 7, 7, opts()).unwrap().final_fidelity())
            .collect();
        assert!((f[0] - f[1]).abs() < 1e-6 && (f[1] - f[2]).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn calibration_improves_on_window_ends() {
        let chi = mhz(100.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let input = InputState::new([(2, C64::new(s, 0.0)), (3, C64::new(s, 0.0))]).unwrap();
        let p = Protocol::new(ProtocolSetup::new(3, 3, input)).unwrap();
        let sched = build_schedule(chi, mhz(30.0), [1e-9, 20e-9, 30e-9, 1e-9, 30e-9, 20e-9, 5e-9]).unwrap();
        let head = p.run_steps(&sched, p.initial(), 1, 6, opts()).unwrap();
        let c = calibrate_dt7(&p, &sched, &head.state, default_window(chi), 40, opts()).unwrap();
        let (first, last) = (c.grid[0].1, c.grid[39].1);
        assert!(c.fidelity >= first && c.fidelity >= last);
        let check = p.run_steps(&c.schedule, &head.state, 7, 7, opts()).unwrap();
        assert!((check.final_fidelity() - c.fidelity).abs() < 1e-12);
    }
}
