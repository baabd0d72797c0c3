use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spectra::{max_sites_for_tau, tau2, TAU1};
use crate::TWO_PI;

use super::durations::{duration_bounds, DurationBounds};
use super::schedule::ControlSchedule;

/// Cap on `tau / tau2` when measuring ramp rates; `chi -> 0` sends `tau` to infinity.
pub const RATE_RATIO_CAP: f64 = 10.0;
/// Grid points per step for the ramp-rate scan.
pub const RATE_GRID: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityInput {
    pub chi_max: f64,
    pub kappa_max: f64,
    pub n_min: u32,
    pub n_max: u32,
    /// Resonator frequency (rad/s).
    pub omega_c: f64,
    /// Largest site detuning expected (rad/s).
    pub delta_omega: f64,
    pub margin: f64,
    /// Ring size, when known.
    pub sites: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The inequality has no valid regime for these inputs.
    Vacuous,
    /// Reported only; nothing to compare against.
    Info,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Vacuous => "vacuous",
            Status::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub key: &'static str,
    /// Inequality in words, including its direction.
    pub relation: &'static str,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub margin: f64,
    pub status: Status,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub input: FeasibilityInput,
    pub n_max_bound: u32,
    pub durations: DurationBounds,
    /// `kappa_max / (chi_max (n_min - 1))`.
    pub tau_star: f64,
    pub dt6a: f64,
    pub dt6b: f64,
    pub delta_omega_bound: Option<f64>,
    pub sites_bound: usize,
    /// Largest `|d(tau/tau2)/dt|` with `tau/tau2 <= 1` and `> 1`, when a schedule was given.
    pub rate_low: Option<f64>,
    pub rate_high: Option<f64>,
    pub constraints: Vec<Constraint>,
}

/// Largest quanta number for which the nonlinear corrections stay negligible:
/// `n_max << (3/4) omega_c / chi_max`, read as `round((3/4) omega_c / (chi_max margin))`
/// with halves rounded up.
pub fn n_max_bound(omega_c: f64, chi_max: f64, margin: f64) -> u32 {
    let x = 0.75 * omega_c / chi_max / margin;
    (x + 0.5 + 1e-9).floor().max(0.0) as u32
}

/// `chi kappa / (100 (kappa - chi (n_min - 1) / 4))`; `None` when the denominator is not positive.
pub fn delta_omega_bound(chi_max: f64, kappa_max: f64, n_min: u32) -> Option<f64> {
    let den = 100.0 * (kappa_max - chi_max * (n_min as f64 - 1.0) / 4.0);
    (den > 0.0).then(|| chi_max * kappa_max / den)
}

fn validate(i: &FeasibilityInput) -> Result<()> {
    let positive = [i.chi_max, i.kappa_max, i.omega_c];
    if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::domain("chi_max, kappa_max and omega_c must be positive"));
    }
    if !(i.delta_omega >= 0.0 && i.delta_omega.is_finite()) {
        return Err(Error::domain(format!("delta_omega must be non-negative, got {}", i.delta_omega)));
    }
    if !(i.margin >= 1.0) {
        return Err(Error::domain(format!("margin must be at least 1, got {}", i.margin)));
    }
    if i.n_min < 2 || i.n_max < i.n_min {
        return Err(Error::domain(format!("quanta range [{}, {}] is invalid", i.n_min, i.n_max)));
    }
    Ok(())
}

/// Largest `|d(tau/tau2)/dt|` in the two regions over the slow steps 2, 3, 5, 6.
fn ramp_rates(schedule: &ControlSchedule, sites: usize, n_min: u32) -> Result<(f64, f64)> {
    let t2 = tau2(sites)?.value;
    let ratio = |t: f64| {
        let c = schedule.at(t);
        let chi = c.chi1.max(c.chi);
        if chi <= 0.0 {
            return RATE_RATIO_CAP;
        }
        (c.kappa.abs() / (chi * (n_min - 1) as f64) / t2).min(RATE_RATIO_CAP)
    };
    let (mut low, mut high) = (0.0f64, 0.0f64);
    for step in [2, 3, 5, 6] {
        let (a, b) = (schedule.step_start(step), schedule.step_end(step));
        let h = (b - a) / RATE_GRID as f64;
        let mut prev = ratio(a);
        for i in 1..=RATE_GRID {
            let r = ratio(a + i as f64 * h);
            let rate = (r - prev).abs() / h;
            if 0.5 * (r + prev) <= 1.0 {
                low = low.max(rate);
            } else {
                high = high.max(rate);
            }
            prev = r;
        }
    }
    Ok((low, high))
}

/// Evaluates the hardware and timing constraints; failures are reported, not raised.
pub fn feasibility(input: &FeasibilityInput, schedule: Option<&ControlSchedule>) -> Result<FeasibilityReport> {
    validate(input)?;
    let i = *input;
    let m = i.margin;
    let mut constraints = Vec::new();

    let nb = n_max_bound(i.omega_c, i.chi_max, m);
    constraints.push(Constraint {
        key: "n_max",
        relation: "n_max <= round(0.75 omega_c / (chi_max margin))",
        value: Some(i.n_max as f64),
        bound: Some(nb as f64),
        margin: m,
        status: Status::from_bool(i.n_max <= nb),
        note: None,
    });

    let durations = duration_bounds(i.chi_max, i.kappa_max, i.n_min, i.n_max)?;
    let tau_star = i.kappa_max / (i.chi_max * (i.n_min - 1) as f64);
    let dt6a = 10.0 * (tau_star - TAU1) / (i.chi_max * tau_star);
    let dt6b = 10.0 * TAU1 / (i.chi_max * tau_star);

    let sched = schedule.map(|s| s.durations());
    let mut duration_check = |key: &'static str, relation: &'static str, step: usize, bound: f64| {
        let value = sched.map(|d| d[step - 1]);
        constraints.push(Constraint {
            key,
            relation,
            value,
            bound: Some(m * bound),
            margin: m,
            status: value.map_or(Status::Info, |v| Status::from_bool(v >= m * bound)),
            note: None,
        });
    };
    duration_check("dt2", "dt2 >= margin max_n 4 kappa_max / (chi_max (n-1))^2", 2, durations.dt2);
    duration_check("dt3", "dt3 >= margin max_n chi_max (n-1) / (2 kappa_max^2)", 3, durations.dt3);
    duration_check("dt5", "dt5 >= margin 5 / kappa_max", 5, durations.dt5);
    duration_check("dt6", "dt6 >= margin 10 / chi_max", 6, durations.dt6);
    for (key, relation, v) in [
        ("dt6a", "dt6a = 10 (tau* - tau1) / (chi_max tau*)", dt6a),
        ("dt6b", "dt6b = 10 tau1 / (chi_max tau*)", dt6b),
    ] {
        constraints.push(Constraint {
            key,
            relation,
            value: Some(v),
            bound: None,
            margin: 1.0,
            status: Status::Info,
            note: (tau_star <= TAU1).then(|| "tau* <= tau1: the W-phase region is never left".to_string()),
        });
    }

    let dw = delta_omega_bound(i.chi_max, i.kappa_max, i.n_min);
    constraints.push(Constraint {
        key: "delta_omega",
        relation: "delta_omega <= chi_max kappa_max / (100 (kappa_max - chi_max (n_min-1) / 4))",
        value: Some(i.delta_omega),
        bound: dw,
        margin: 1.0,
        status: dw.map_or(Status::Vacuous, |b| Status::from_bool(i.delta_omega <= b)),
        note: Some(match dw {
            Some(b) => format!(
                "evaluated verbatim: bound/2pi = {:.4} MHz, supplied delta_omega/2pi = {:.4} MHz",
                b / TWO_PI / 1e6,
                i.delta_omega / TWO_PI / 1e6
            ),
            None => "denominator <= 0: constraint vacuous / invalid regime".to_string(),
        }),
    });

    let sites_bound = max_sites_for_tau(tau_star);
    constraints.push(Constraint {
        key: "sites",
        relation: "tau2(M) <= kappa_max / (chi_max (n_min-1))",
        value: i.sites.map(|s| s as f64),
        bound: Some(sites_bound as f64),
        margin: 1.0,
        status: i.sites.map_or(Status::Info, |s| Status::from_bool(s <= sites_bound)),
        note: Some("tau2 for M = 3, 4 is interpolated".to_string()),
    });

    let (mut rate_low, mut rate_high) = (None, None);
    if let (Some(s), Some(sites)) = (schedule, i.sites) {
        let (lo, hi) = ramp_rates(s, sites, i.n_min)?;
        rate_low = Some(lo);
        rate_high = Some(hi);
        constraints.push(Constraint {
            key: "rate_w_region",
            relation: "|d(tau/tau2)/dt| <= chi_max / margin where tau/tau2 <= 1",
            value: Some(lo),
            bound: Some(i.chi_max / m),
            margin: m,
            status: Status::from_bool(lo <= i.chi_max / m),
            note: None,
        });
        constraints.push(Constraint {
            key: "rate_superfluid_region",
            relation: "|d(tau/tau2)/dt| <= 2 kappa_max / margin where tau/tau2 > 1",
            value: Some(hi),
            bound: Some(2.0 * i.kappa_max / m),
            margin: m,
            status: Status::from_bool(hi <= 2.0 * i.kappa_max / m),
            note: Some(format!("tau/tau2 capped at {RATE_RATIO_CAP}")),
        });
    }

    Ok(FeasibilityReport {
        input: i,
        n_max_bound: nb,
        durations,
        tau_star,
        dt6a,
        dt6b,
        delta_omega_bound: dw,
        sites_bound,
        rate_low,
        rate_high,
        constraints,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

impl FeasibilityReport {
    pub fn failures(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn constraint(&self, key: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.key == key)
    }

    /// One `key: value` line per constraint, SI units.
    pub fn to_text(&self) -> String {
        let i = &self.input;
        let mut s = String::new();
        let _ = writeln!(s, "chi_max_radps: {:.6e}", i.chi_max);
        let _ = writeln!(s, "kappa_max_radps: {:.6e}", i.kappa_max);
        let _ = writeln!(s, "omega_c_radps: {:.6e}", i.omega_c);
        let _ = writeln!(s, "n_range: [{}, {}]", i.n_min, i.n_max);
        let _ = writeln!(s, "margin: {}", i.margin);
        let _ = writeln!(s, "n_max_bound: {}", self.n_max_bound);
        let _ = writeln!(s, "tau_star: {:.6}", self.tau_star);
        let _ = writeln!(s, "sites_bound: {}", self.sites_bound);
        for c in &self.constraints {
            let _ = write!(
                s,
                "{}: value={} bound={} margin={} status={} relation=\"{}\"",
                c.key,
                fmt_opt(c.value),
                fmt_opt(c.bound),
                c.margin,
                c.status.label(),
                c.relation
            );
            if let Some(n) = &c.note {
                let _ = write!(s, " note=\"{n}\"");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "overall: {}", if self.all_pass() { "pass" } else { "FAIL" });
        s
    }
}
