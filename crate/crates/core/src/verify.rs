//! Reference measurements and the built-in check suite behind `abhsim verify`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::basis::{LatticeBasis, LatticeSpec};
use crate::config::{load_config, RunConfig};
use crate::dynamics::{
    evolve_open, exponential_oracle, wrap_phase, DampingModel, IntegratorOptions, LindbladGenerator,
};
use crate::error::{Error, Result};
use crate::operators::{build_hamiltonian, Boundary, Controls, HamiltonianParams};
use crate::protocol::{
    calibrate_dt7, default_window, feasibility, n_max_bound, ControlSchedule, FeasibilityInput,
    HoppingBranch, Protocol, ProtocolRun, ProtocolSetup, RunOptions, DEFAULT_CANDIDATES, STEPS,
};
use crate::spectra::{diagonalize_sector, phase_scan, tau2, w_state, PhaseScanRow};
use crate::state::{embed_input_state, InputState};
use crate::{mhz, C64};

pub const SIM1: &str = "sim1";
pub const SIM1_CLOSED: &str = "sim1_no_damping";
pub const SIM1_DISORDER_HALF: &str = "sim1_disorder_0p5";
pub const SIM1_DISORDER_ONE: &str = "sim1_disorder_1";
pub const SIM2: &str = "sim2";
pub const SIM2_CLOSED: &str = "sim2_no_damping";

/// `dir/name`, with `.toml` appended when the bare name does not exist.
pub fn preset_path(dir: &Path, name: &str) -> PathBuf {
    let p = dir.join(name);
    if p.exists() {
        p
    } else {
        p.with_extension("toml")
    }
}

pub fn load_preset(dir: &Path, name: &str) -> Result<RunConfig> {
    load_config(&preset_path(dir, name))
}

#[derive(Debug, Clone)]
pub struct PresetRun {
    pub config: RunConfig,
    pub protocol: Protocol,
    pub schedule: ControlSchedule,
    pub run: ProtocolRun,
}

pub fn run_config(config: &RunConfig, track_phases: bool) -> Result<PresetRun> {
    let protocol = Protocol::new(config.protocol_setup()?)?;
    let options = RunOptions {
        integrator: config.integrator_options(),
        track_phases,
    };
    let schedule = config.schedule(&protocol, options)?;
    let run = protocol.run(&schedule, options)?;
    Ok(PresetRun {
        config: config.clone(),
        protocol,
        schedule,
        run,
    })
}

/// Local maxima of the fidelity during step 7, in time order.
pub fn step7_peaks(run: &ProtocolRun, schedule: &ControlSchedule) -> Vec<f64> {
    run.trajectory
        .local_maxima(schedule.step_start(STEPS))
        .iter()
        .map(|s| s.fidelity)
        .collect()
}

/// Kerr phase `theta = int chi / 2 dt` accumulated over step 7.
pub fn step7_kerr_phase(schedule: &ControlSchedule) -> f64 {
    step7_kerr_phase_at(schedule, schedule.total_time())
}

/// Kerr phase accumulated between the start of step 7 and `t`.
pub fn step7_kerr_phase_at(schedule: &ControlSchedule, t: f64) -> f64 {
    let t0 = schedule.step_start(STEPS);
    let t = t.clamp(t0, schedule.total_time());
    // chi is linear in t within the step, so the trapezoid is exact
    0.25 * (schedule.at(t0).chi + schedule.at(t).chi) * (t - t0)
}

/// Beat period in Kerr phase of the multi-sector pattern, `None` for one sector.
/// Sector phases go as `n (n-1) theta`; the pattern repeats when every difference
/// of `n (n-1)` over the occupied sectors advances by a multiple of `2 pi`.
pub fn beat_period(input: &InputState) -> Option<f64> {
    let ns: Vec<u64> = input.occupations().map(|n| n as u64 * (n as u64).saturating_sub(1)).collect();
    let g = ns
        .iter()
        .flat_map(|a| ns.iter().map(move |b| a.abs_diff(*b)))
        .fold(0u64, gcd);
    (g > 0).then(|| crate::TWO_PI / g as f64)
}

/// Step-7 fidelity maxima per beat period: `(k - 1)` maxima-to-maxima gaps over
/// the Kerr phase between the first and last of the `k` maxima. Zero with fewer
/// than two maxima.
pub fn maxima_per_period(run: &ProtocolRun, schedule: &ControlSchedule, input: &InputState) -> f64 {
    let Some(period) = beat_period(input) else {
        return 0.0;
    };
    let peaks = run.trajectory.local_maxima(schedule.step_start(STEPS));
    if peaks.len() < 2 {
        return 0.0;
    }
    let span = step7_kerr_phase_at(schedule, peaks[peaks.len() - 1].t) - step7_kerr_phase_at(schedule, peaks[0].t);
    (peaks.len() - 1) as f64 * period / span
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    /// `1 - |<oracle|rk4>|^2`, clamped at zero.
    pub infidelity: f64,
    /// `||psi_oracle - psi_rk4||`.
    pub distance: f64,
}

/// Final state of a closed run against piecewise-constant exponentials, with the
/// slices shared among the steps in proportion to their durations.
pub fn oracle_comparison(
    protocol: &Protocol,
    schedule: &ControlSchedule,
    run: &ProtocolRun,
    slices: usize,
) -> Result<OracleComparison> {
    let psi = run
        .state
        .as_pure()
        .ok_or_else(|| Error::config("oracle comparison needs a closed run"))?;
    let terms = protocol.generator().terms();
    let det = protocol.generator().detuning();
    let total = schedule.total_time();
    let mut v = protocol.initial().as_pure().expect("initial state is pure").clone();
    for step in 1..=STEPS {
        let (a, b) = (schedule.step_start(step), schedule.step_end(step));
        let n = ((slices as f64 * (b - a) / total).round() as usize).max(1);
        v = exponential_oracle(&v, terms, det, schedule, a, b, n)?;
    }
    Ok(OracleComparison {
        infidelity: (1.0 - v.dotc(psi).norm_sqr()).max(0.0),
        distance: (&v - psi).norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenstructure {
    pub degeneracy: usize,
    /// `max_k |E_k - E_0^exact| / |E_0^exact|` over the lowest `M` levels.
    pub energy_error: f64,
    /// `max_k ||H w_k - E w_k||`.
    pub w_residual: f64,
}

pub fn eigenstructure(sites: usize, n: u32, chi: f64) -> Result<Eigenstructure> {
    let basis = Arc::new(LatticeBasis::new(LatticeSpec::new(sites, n, Some(n))?)?);
    let params = HamiltonianParams::uniform(sites, chi, 0.0);
    let e0 = -chi * (n * (n - 1)) as f64 / 2.0;
    let spec = diagonalize_sector(&basis, &params, n)?;
    let degeneracy = spec.ground_degeneracy();
    let energy_error = spec.eigenvalues[..sites]
        .iter()
        .map(|e| (e - e0).abs() / e0.abs())
        .fold(0.0, f64::max);
    let h = build_hamiltonian(&basis, &params)?;
    let mut w_residual = 0.0f64;
    for k in 0..sites {
        let w = w_state(&basis, n, k)?;
        let v = w.as_pure().expect("w state is pure");
        let hv = h.apply(v);
        w_residual = w_residual.max((hv - v * C64::new(e0, 0.0)).norm());
    }
    Ok(Eigenstructure {
        degeneracy,
        energy_error,
        w_residual,
    })
}

/// Final overlap phase `arg <W|psi(T)>` of a Fock input for several hopping
/// strengths at fixed durations; returns the phases and their largest pairwise
/// difference modulo `2 pi`.
pub fn hopping_phase_spread(
    sites: usize,
    n: u32,
    chi_max: f64,
    kappas: &[f64],
    durations: [f64; STEPS],
    branch: HoppingBranch,
    options: IntegratorOptions,
) -> Result<(Vec<f64>, f64)> {
    let protocol = Protocol::new(ProtocolSetup::new(sites, n, InputState::fock(n)))?;
    let mut phases = Vec::new();
    for &k in kappas {
        let s = ControlSchedule::new(chi_max, k, durations, branch)?;
        let run = protocol.run(
            &s,
            RunOptions {
                integrator: options,
                track_phases: false,
            },
        )?;
        let o = run.sector_overlaps.expect("closed run")[0].1;
        phases.push(o.arg());
    }
    let spread = phases
        .iter()
        .flat_map(|a| phases.iter().map(move |b| wrap_phase(a - b).abs()))
        .fold(0.0, f64::max);
    Ok((phases, spread))
}

#[derive(Debug, Clone)]
pub struct KerrPhase {
    pub dt7: f64,
    pub fidelity: f64,
    /// `(N, arg <target_N|psi_N(T)>)`.
    pub sector_phases: Vec<(u32, f64)>,
    /// Largest `|phase_N - phase_first|` modulo `2 pi`.
    pub max_relative: f64,
}

/// Calibrates step 7 over the default window and reports the sector phases at `T`.
pub fn kerr_phase_after_calibration(
    protocol: &Protocol,
    schedule: &ControlSchedule,
    options: IntegratorOptions,
) -> Result<KerrPhase> {
    let opts = RunOptions {
        integrator: options,
        track_phases: false,
    };
    let head = protocol.run_steps(schedule, protocol.initial(), 1, STEPS - 1, opts)?;
    let cal = calibrate_dt7(
        protocol,
        schedule,
        &head.state,
        default_window(schedule.chi_max()),
        DEFAULT_CANDIDATES,
        opts,
    )?;
    let tail = protocol.run_steps(&cal.schedule, &head.state, STEPS, STEPS, opts)?;
    let overlaps = tail
        .sector_overlaps
        .as_ref()
        .ok_or_else(|| Error::config("sector phases need a closed run"))?;
    let sector_phases: Vec<(u32, f64)> = overlaps.iter().map(|(n, o)| (*n, o.arg())).collect();
    let first = sector_phases[0].1;
    let max_relative = sector_phases
        .iter()
        .map(|(_, p)| wrap_phase(p - first).abs())
        .fold(0.0, f64::max);
    Ok(KerrPhase {
        dt7: cal.dt7,
        fidelity: tail.final_fidelity(),
        sector_phases,
        max_relative,
    })
}

/// Largest relative deviation of `<N>(t)` from `<N>(0) exp(-t/T1)` over three decay
/// constants with every control off.
pub fn decay_error(sites: usize, input: &InputState, t1: f64, steps_per_t1: usize) -> Result<f64> {
    let cap = input.max_n();
    let basis = Arc::new(LatticeBasis::new(LatticeSpec::new(sites, cap, Some(cap))?)?);
    let damping = DampingModel::new(t1, 1.0, 300e-6, mhz(100.0))?;
    let gen = LindbladGenerator::new(&basis, Boundary::Periodic, vec![0.0; sites], Some(damping))?;
    let rho = embed_input_state(input, &basis, 0)?;
    let opts = IntegratorOptions {
        dt: t1 / steps_per_t1 as f64,
        stride: (steps_per_t1 / 50).max(1),
        ..Default::default()
    };
    let run = evolve_open(&gen, &basis, &rho, &rho, &Controls::default(), 0.0, 3.0 * t1, opts)?;
    let n0: f64 = run.trajectory.samples[0].occupations.iter().sum();
    Ok(run
        .trajectory
        .samples
        .iter()
        .map(|s| {
            let exact = n0 * (-s.t / t1).exp();
            (s.occupations.iter().sum::<f64>() - exact).abs() / exact
        })
        .fold(0.0, f64::max))
}

/// Ground-state W fidelity for `M = 3, N = 3` over `tau = 0, 0.05, ..., 1`.
pub fn reference_phase_scan() -> Result<Vec<PhaseScanRow>> {
    let basis = Arc::new(LatticeBasis::new(LatticeSpec::new(3, 3, Some(3))?)?);
    let taus: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    phase_scan(&basis, 3, 1.0, &taus)
}

/// `|F(dt) - F(dt/2)|` for the final fidelity of a full run.
pub fn step_halving(protocol: &Protocol, schedule: &ControlSchedule, options: IntegratorOptions) -> Result<f64> {
    let run = |dt: f64| -> Result<f64> {
        let o = RunOptions {
            integrator: IntegratorOptions {
                dt,
                stride: usize::MAX,
                ..options
            },
            track_phases: false,
        };
        Ok(protocol.run(schedule, o)?.final_fidelity())
    };
    Ok((run(options.dt)? - run(options.dt / 2.0)?).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }

    fn failed(name: impl Into<String>, e: &Error) -> Self {
        Self::new(name, false, format!("error: {e}"))
    }

    pub fn line(&self) -> String {
        format!("[{}] {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Runs the check suite. `quick` skips the damped preset runs.
pub fn run_checks(presets: &Path, quick: bool) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut push = |name: &str, r: Result<CheckOutcome>| out.push(r.unwrap_or_else(|e| CheckOutcome::failed(name, &e)));

    push("constraint golden values", (|| {
        let n = [14.0, 25.0, 100.0].map(|c| n_max_bound(mhz(7500.0), mhz(c), 10.0));
        let f = feasibility(
            &FeasibilityInput {
                chi_max: mhz(14.0),
                kappa_max: mhz(30.0),
                n_min: 2,
                n_max: 2,
                omega_c: mhz(7500.0),
                delta_omega: mhz(1.0),
                margin: 10.0,
                sites: None,
            },
            None,
        )?;
        let t2 = tau2(2)?.value;
        let ok = n == [40, 23, 6] && f.sites_bound == 42 && t2 == 0.25;
        Ok(CheckOutcome::new(
            "constraint golden values",
            ok,
            format!("n_max {n:?}, M <= {}, tau2(2) = {t2}", f.sites_bound),
        ))
    })());

    push("eigenstructure at kappa = 0", (|| {
        let e = eigenstructure(3, 3, 1.0)?;
        let ok = e.degeneracy == 3 && e.energy_error <= 1e-10 && e.w_residual <= 1e-10;
        Ok(CheckOutcome::new(
            "eigenstructure at kappa = 0",
            ok,
            format!("degeneracy {}, energy error {:.2e}, W residual {:.2e}", e.degeneracy, e.energy_error, e.w_residual),
        ))
    })());

    push("phase-diagram monotonicity", (|| {
        let rows = reference_phase_scan()?;
        let dec = rows.windows(2).all(|w| w[1].w_fidelity < w[0].w_fidelity);
        let ok = dec && (rows[0].w_fidelity - 1.0).abs() <= 1e-12;
        Ok(CheckOutcome::new(
            "phase-diagram monotonicity",
            ok,
            format!("w_fidelity {:.6} -> {:.6}", rows[0].w_fidelity, rows[rows.len() - 1].w_fidelity),
        ))
    })());

    push("amplitude damping analytics", (|| {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let input = InputState::new([(2, C64::new(s, 0.0)), (3, C64::new(s, 0.0))])?;
        let e = decay_error(3, &input, 20e-6, 1000)?;
        Ok(CheckOutcome::new("amplitude damping analytics", e <= 1e-6, format!("max relative error {e:.2e}")))
    })());

    push("sim1 closed peak", (|| {
        let cfg = load_preset(presets, SIM1_CLOSED)?;
        let r = run_config(&cfg, false)?;
        let p = r.run.peak_fidelity();
        let o = oracle_comparison(&r.protocol, &r.schedule, &r.run, 10_000)?;
        let ok = (p - 0.986).abs() <= 0.01 && o.infidelity <= 1e-6;
        Ok(CheckOutcome::new(
            "sim1 closed peak",
            ok,
            format!("peak {p:.4}, oracle infidelity {:.2e}, distance {:.2e}", o.infidelity, o.distance),
        ))
    })());

    push("sim1 disorder peaks", (|| {
        let mut details = Vec::new();
        let mut ok = true;
        for (name, want) in [(SIM1_DISORDER_HALF, [(0.968, 0.015), (0.947, 0.02)]), (SIM1_DISORDER_ONE, [(0.925, 0.02), (0.859, 0.03)])] {
            let r = run_config(&load_preset(presets, name)?, false)?;
            let p = step7_peaks(&r.run, &r.schedule);
            ok &= p.len() >= 2 && (p[0] - want[0].0).abs() <= want[0].1 && (p[1] - want[1].0).abs() <= want[1].1 && p[1] < p[0];
            details.push(format!("{name} {:?}", p.iter().take(2).map(|x| format!("{x:.4}")).collect::<Vec<_>>()));
        }
        Ok(CheckOutcome::new("sim1 disorder peaks", ok, details.join("; ")))
    })());

    push("hopping-phase cancellation", (|| {
        let cfg = load_preset(presets, SIM1_CLOSED)?;
        let d = cfg.durations().ok_or_else(|| Error::config("preset needs explicit durations"))?;
        let kappas = [mhz(20.0), mhz(30.0), mhz(40.0)];
        let mut worst = 0.0f64;
        for n in [2, 3] {
            let (_, s) = hopping_phase_spread(3, n, cfg.chi_max(), &kappas, d, cfg.schedule.branch, cfg.integrator_options())?;
            worst = worst.max(s);
        }
        Ok(CheckOutcome::new("hopping-phase cancellation", worst <= 1e-3, format!("largest spread {worst:.3e} rad")))
    })());

    push("Kerr-phase cancellation", (|| {
        let cfg = load_preset(presets, SIM1_CLOSED)?;
        let p = Protocol::new(cfg.protocol_setup()?)?;
        let s = cfg.schedule(&p, RunOptions::default())?;
        let k = kerr_phase_after_calibration(&p, &s, cfg.integrator_options())?;
        Ok(CheckOutcome::new(
            "Kerr-phase cancellation",
            k.max_relative <= 1e-2,
            format!("dt7 {:.4} ns, relative phase {:.2e} rad", k.dt7 * 1e9, k.max_relative),
        ))
    })());

    if !quick {
        push("sim1 damped", (|| {
            let r = run_config(&load_preset(presets, SIM1)?, false)?;
            let f = r.run.final_fidelity();
            let st = r.run.trajectory.stats;
            let ok = (f - 0.975).abs() <= 0.02 && st.max_trace_drift <= 1e-6 && st.max_hermiticity_error <= 1e-9;
            Ok(CheckOutcome::new(
                "sim1 damped",
                ok,
                format!("final {f:.4}, trace drift {:.2e}, hermiticity {:.2e}", st.max_trace_drift, st.max_hermiticity_error),
            ))
        })());
        push("sim2 damped", (|| {
            let cfg = load_preset(presets, SIM2)?;
            let r = run_config(&cfg, false)?;
            let p = r.run.peak_fidelity();
            let m = maxima_per_period(&r.run, &r.schedule, &cfg.input_state()?);
            let ok = (p - 0.95).abs() <= 0.03 && m.round() == 3.0;
            Ok(CheckOutcome::new("sim2 damped", ok, format!("peak {p:.4}, maxima per period {m:.2}")))
        })());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenstructure_small_rings() {
        for m in 2..=4 {
            let e = eigenstructure(m, 3, 0.7).unwrap();
            assert_eq!(e.degeneracy, m);
            assert!(e.energy_error < 1e-12 && e.w_residual < 1e-12);
        }
    }

    #[test]
    fn decay_matches_exponential() {
        let e = decay_error(2, &InputState::fock(2), 1e-6, 400).unwrap();
        assert!(e < 1e-8, "{e}");
    }

    #[test]
    fn preset_path_adds_extension() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.toml"), "").unwrap();
        std::fs::write(dir.path().join("b"), "").unwrap();
        assert_eq!(preset_path(dir.path(), "a"), dir.path().join("a.toml"));
        assert_eq!(preset_path(dir.path(), "b"), dir.path().join("b"));
    }

    #[test]
    fn oracle_agrees_on_short_schedule() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let input = InputState::new([(2, C64::new(s, 0.0)), (3, C64::new(s, 0.0))]).unwrap();
        let p = Protocol::new(ProtocolSetup::new(3, 3, input)).unwrap();
        let sched = ControlSchedule::new(
            mhz(100.0),
            mhz(30.0),
            [1e-9, 4e-9, 6e-9, 1e-9, 6e-9, 4e-9, 3e-9],
            HoppingBranch::Ground,
        )
        .unwrap();
        let run = p.run(&sched, RunOptions::default()).unwrap();
        let o = oracle_comparison(&p, &sched, &run, 4000).unwrap();
        assert!(o.infidelity < 1e-7 && o.distance < 1e-4, "{o:?}");
    }

    #[test]
    fn period_counting() {
        assert_eq!(gcd(12, 18), 6);
        let a = 1.0 / 6f64.sqrt();
        let input = InputState::new([(2, C64::new(a, 0.0)), (3, C64::new(2.0 * a, 0.0)), (4, C64::new(a, 0.0))]).unwrap();
        // n(n-1) = 2, 6, 12: differences 4, 6, 10 share a factor 2
        assert!((beat_period(&input).unwrap() - std::f64::consts::PI).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let two = InputState::new([(2, C64::new(s, 0.0)), (3, C64::new(s, 0.0))]).unwrap();
        assert!((beat_period(&two).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(beat_period(&InputState::fock(3)), None);
    }

    #[test]
    fn kerr_phase_of_linear_ramp() {
        let chi = mhz(100.0);
        let sched = ControlSchedule::new(chi, mhz(30.0), [1e-9; 7], HoppingBranch::Ground).unwrap();
        assert_eq!(step7_kerr_phase_at(&sched, 0.0), 0.0);
        // half of chi_max over the full step, then the linear falloff
        assert!((step7_kerr_phase(&sched) - chi * 1e-9 / 4.0).abs() < 1e-12);
        let mid = step7_kerr_phase_at(&sched, 6.5e-9);
        assert!((mid - 0.5 * (chi + 0.5 * chi) * 0.5e-9 / 2.0).abs() < 1e-12);
    }
}
