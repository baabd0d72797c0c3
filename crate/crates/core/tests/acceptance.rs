//! Acceptance suite. Each criterion prints one `PASS` / `FAIL` line to stderr
//! (outside the test harness capture) and then asserts.

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use abhsim::protocol::{feasibility, n_max_bound, FeasibilityInput, Protocol, RunOptions};
use abhsim::spectra::tau2;
use abhsim::verify::{
    decay_error, eigenstructure, hopping_phase_spread, kerr_phase_after_calibration, load_preset, maxima_per_period,
    oracle_comparison, reference_phase_scan, run_config, step7_peaks, PresetRun, SIM1, SIM1_CLOSED,
    SIM1_DISORDER_HALF, SIM1_DISORDER_ONE, SIM2,
};
use abhsim::{mhz, C64, InputState};

fn presets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!(
        "criterion {criterion:>2}: {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

struct Timed {
    run: PresetRun,
    elapsed: Duration,
}

fn timed(name: &str) -> Timed {
    let cfg = load_preset(&presets(), name).unwrap();
    let t = Instant::now();
    let run = run_config(&cfg, false).unwrap();
    Timed {
        run,
        elapsed: t.elapsed(),
    }
}

fn sim1() -> &'static Timed {
    static RUN: OnceLock<Timed> = OnceLock::new();
    RUN.get_or_init(|| timed(SIM1))
}

fn sim1_closed() -> &'static Timed {
    static RUN: OnceLock<Timed> = OnceLock::new();
    RUN.get_or_init(|| timed(SIM1_CLOSED))
}

#[test]
fn criterion_01_sim1_damped_fidelity() {
    let r = sim1();
    let f = r.run.run.final_fidelity();
    let secs = r.elapsed.as_secs_f64();
    let pass = (f - 0.975).abs() <= 0.02 && secs <= 300.0;
    report(1, pass, &format!("final fidelity {f:.4} (0.975 +- 0.02), runtime {secs:.1} s (<= 300 s)"));
    assert!(pass);
}

#[test]
fn criterion_02_sim1_closed_peak() {
    let r = sim1_closed();
    let p = r.run.run.peak_fidelity();
    let secs = r.elapsed.as_secs_f64();
    let pass = (p - 0.986).abs() <= 0.01 && secs <= 60.0 && r.run.run.state.as_pure().is_some();
    report(2, pass, &format!("peak fidelity {p:.4} (0.986 +- 0.01), runtime {secs:.1} s (<= 60 s)"));
    assert!(pass);
}

#[test]
fn criterion_03_disorder_peaks() {
    let cases = [
        (SIM1_DISORDER_HALF, (0.968, 0.015), (0.947, 0.02)),
        (SIM1_DISORDER_ONE, (0.925, 0.02), (0.859, 0.03)),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, first, second) in cases {
        let r = run_config(&load_preset(&presets(), name).unwrap(), false).unwrap();
        let peaks = step7_peaks(&r.run, &r.schedule);
        let ok = peaks.len() >= 2
            && (peaks[0] - first.0).abs() <= first.1
            && (peaks[1] - second.0).abs() <= second.1
            && peaks[1] < peaks[0];
        pass &= ok;
        detail.push(format!(
            "{name}: peaks {:.4} ({} +- {}), {:.4} ({} +- {})",
            peaks.first().copied().unwrap_or(f64::NAN),
            first.0,
            first.1,
            peaks.get(1).copied().unwrap_or(f64::NAN),
            second.0,
            second.1
        ));
    }
    report(3, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_04_sim2_peak_and_beats() {
    let r = timed(SIM2);
    let input = r.run.config.input_state().unwrap();
    let p = r.run.run.peak_fidelity();
    let m = maxima_per_period(&r.run.run, &r.run.schedule, &input);
    let secs = r.elapsed.as_secs_f64();
    let pass = (p - 0.95).abs() <= 0.03 && (m - 3.0).abs() <= 0.1 && secs <= 2700.0;
    report(
        4,
        pass,
        &format!("peak fidelity {p:.4} (0.95 +- 0.03), step-7 maxima per period {m:.3} (3 +- 0.1), runtime {secs:.1} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_constraint_golden_values() {
    let omega_c = mhz(7500.0);
    let n = [14.0, 25.0, 100.0].map(|c| n_max_bound(omega_c, mhz(c), 10.0));
    let report_m = feasibility(
        &FeasibilityInput {
            chi_max: mhz(14.0),
            kappa_max: mhz(30.0),
            n_min: 2,
            n_max: 2,
            omega_c,
            delta_omega: 0.0,
            margin: 10.0,
            sites: None,
        },
        None,
    )
    .unwrap();
    let t2 = tau2(2).unwrap();
    let pass = n == [40, 23, 6] && report_m.sites_bound == 42 && t2.value == 0.25 && !t2.approximate;
    report(
        5,
        pass,
        &format!("n_max {n:?} ([40, 23, 6]), M <= {} (42), tau2(2) = {}", report_m.sites_bound, t2.value),
    );
    assert!(pass);
}

#[test]
fn criterion_06_trace_and_hermiticity() {
    let st = sim1().run.run.trajectory.stats;
    let pass = st.max_trace_drift <= 1e-6 && st.max_hermiticity_error <= 1e-9;
    report(
        6,
        pass,
        &format!(
            "trace drift {:.2e} (<= 1e-6), hermiticity drift {:.2e} (<= 1e-9) over {} steps",
            st.max_trace_drift, st.max_hermiticity_error, st.steps
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_rk4_against_exponential_oracle() {
    let r = &sim1_closed().run;
    let o = oracle_comparison(&r.protocol, &r.schedule, &r.run, 10_000).unwrap();
    let pass = o.infidelity <= 1e-6;
    report(
        7,
        pass,
        &format!(
            "final-state infidelity {:.2e} (<= 1e-6), state distance {:.2e}, with 10^4 slices",
            o.infidelity, o.distance
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_eigenstructure() {
    let chi = mhz(100.0);
    let mut pass = true;
    let mut worst = (0.0f64, 0.0f64);
    for sites in 2..=4 {
        for n in 2..=4 {
            let e = eigenstructure(sites, n, chi).unwrap();
            pass &= e.degeneracy == sites && e.energy_error <= 1e-10 && e.w_residual / chi <= 1e-10;
            worst = (worst.0.max(e.energy_error), worst.1.max(e.w_residual / chi));
        }
    }
    report(
        8,
        pass,
        &format!(
            "M = 2..4, N = 2..4: M-fold degeneracy, relative energy error {:.2e} (<= 1e-10), W residual / chi {:.2e} (<= 1e-10)",
            worst.0, worst.1
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_hopping_phase_cancellation() {
    let cfg = load_preset(&presets(), SIM1_CLOSED).unwrap();
    let d = cfg.durations().unwrap();
    let kappas = [mhz(20.0), mhz(30.0), mhz(40.0)];
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for n in [2, 3] {
        let (phases, spread) = hopping_phase_spread(
            3,
            n,
            cfg.chi_max(),
            &kappas,
            d,
            cfg.schedule.branch,
            cfg.integrator_options(),
        )
        .unwrap();
        worst = worst.max(spread);
        detail.push(format!(
            "|{n}>: phases {:?} spread {spread:.3e}",
            phases.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>()
        ));
    }
    let pass = worst <= 1e-3;
    report(9, pass, &format!("{} (<= 1e-3 rad)", detail.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_10_kerr_phase_cancellation() {
    let cfg = load_preset(&presets(), SIM1_CLOSED).unwrap();
    let p = Protocol::new(cfg.protocol_setup().unwrap()).unwrap();
    let s = cfg.schedule(&p, RunOptions::default()).unwrap();
    let k = kerr_phase_after_calibration(&p, &s, cfg.integrator_options()).unwrap();
    let pass = k.max_relative <= 1e-2;
    report(
        10,
        pass,
        &format!(
            "calibrated dt7 {:.4} ns, inter-sector relative phase {:.2e} rad (<= 1e-2)",
            k.dt7 * 1e9,
            k.max_relative
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_phase_diagram_monotonicity() {
    let rows = reference_phase_scan().unwrap();
    let decreasing = rows.windows(2).all(|w| w[1].w_fidelity < w[0].w_fidelity);
    let at_zero = (rows[0].w_fidelity - 1.0).abs();
    let half = rows
        .windows(2)
        .find(|w| w[0].w_fidelity >= 0.5 && w[1].w_fidelity < 0.5)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            a.tau + (a.w_fidelity - 0.5) / (a.w_fidelity - b.w_fidelity) * (b.tau - a.tau)
        });
    let pass = decreasing && rows[0].tau == 0.0 && at_zero <= 1e-12;
    report(
        11,
        pass,
        &format!(
            "M = 3, N = 3, tau 0..1: strictly decreasing {decreasing}, |F_W(0) - 1| = {at_zero:.1e} (<= 1e-12), F_W(1) = {:.4}, F_W = 0.5 near tau {}",
            rows[rows.len() - 1].w_fidelity,
            half.map_or("none".to_string(), |t| format!("{t:.3}"))
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_12_damping_analytics() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let input = InputState::new([(2, C64::new(s, 0.0)), (3, C64::new(s, 0.0))]).unwrap();
    let e = decay_error(3, &input, 20e-6, 1000).unwrap();
    let pass = e <= 1e-6;
    report(12, pass, &format!("<N>(t) vs <N>(0) exp(-t/T1) over 3 T1: max relative error {e:.2e} (<= 1e-6)"));
    assert!(pass);
}
