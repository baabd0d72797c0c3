//! Run files: TOML with MHz / GHz / ns / μs / ps units, converted to rad/s and
//! seconds by the accessor methods.
//!
//! ```toml
//! [lattice]
//! sites = 3
//! per_site_cap = 3
//! boundary = "periodic"      # optional
//!
//! [hardware]
//! chi_max_mhz = 100.0
//! kappa_max_mhz = 30.0
//! omega_c_ghz = 7.5          # optional
//!
//! [damping]                  # optional; omit for a closed system
//! t1_us = 20.0
//! tphi_zero_s = 1.0
//! tphi_max_us = 300.0
//!
//! [disorder]                 # optional
//! detuning_mhz = [0.5, 0.0, -0.5]
//!
//! [input_state]
//! amplitudes = [[2, 0.7071067811865476, 0.0], [3, 0.7071067811865476, 0.0]]
//!
//! [schedule]
//! durations_ns = [0.3157, 16.747, 27.912, 0.3157, 27.912, 16.747, 16.449]
//! # or: auto = true, margin = 10.0, total_ns = 106.4
//!
//! [integrator]               # optional
//! dt_ps = 1.0
//! sample_stride = 100
//!
//! [outputs]                  # optional
//! trajectory = "trajectory.csv"
//! summary = "summary.txt"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DampingModel, IntegratorOptions, DEFAULT_SAMPLE_STRIDE};
use crate::error::{Error, Result};
use crate::operators::Boundary;
use crate::protocol::{
    calibrate_schedule, fit_total_duration, recommend_durations, ControlSchedule, HoppingBranch, Protocol,
    ProtocolSetup, RunOptions, DEFAULT_CANDIDATES, DEFAULT_MARGIN, STEPS,
};
use crate::state::InputState;
use crate::{C64, TWO_PI};

pub const DEFAULT_OMEGA_C_GHZ: f64 = 7.5;
pub const DEFAULT_DT_PS: f64 = 1.0;
/// Step-7 search window for fitting a total time, in units of `4 pi / chi_max`.
pub const AUTO_FIT_PERIODS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub sites: usize,
    pub per_site_cap: u32,
    #[serde(default)]
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareConfig {
    pub chi_max_mhz: f64,
    pub kappa_max_mhz: f64,
    #[serde(default = "default_omega_c")]
    pub omega_c_ghz: f64,
}

fn default_omega_c() -> f64 {
    DEFAULT_OMEGA_C_GHZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    pub t1_us: f64,
    /// Pure-dephasing time with the nonlinearity off.
    pub tphi_zero_s: f64,
    /// Pure-dephasing time at `chi_max`.
    pub tphi_max_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    pub detuning_mhz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputStateConfig {
    /// `(n, re, im)` triples; normalized on use.
    pub amplitudes: Vec<(u32, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub durations_ns: Option<Vec<f64>>,
    /// Derive steps 1 to 6 from the adiabatic bounds and calibrate step 7.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub auto: bool,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// With `auto`, rescale to this total time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_ns: Option<f64>,
    #[serde(default)]
    pub branch: HoppingBranch,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_dt")]
    pub dt_ps: f64,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
}

fn default_dt() -> f64 {
    DEFAULT_DT_PS
}

fn default_stride() -> usize {
    DEFAULT_SAMPLE_STRIDE
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt_ps: DEFAULT_DT_PS,
            sample_stride: DEFAULT_SAMPLE_STRIDE,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    pub hardware: HardwareConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<DampingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderConfig>,
    pub input_state: InputStateConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

fn mhz_to_radps(x: f64) -> f64 {
    TWO_PI * x * 1e6
}

fn positive(key: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{key} must be positive, got {x}")))
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let l = &self.lattice;
        if l.sites == 0 {
            return Err(Error::config("lattice.sites must be at least 1"));
        }
        let h = &self.hardware;
        positive("hardware.chi_max_mhz", h.chi_max_mhz)?;
        if !(h.kappa_max_mhz >= 0.0 && h.kappa_max_mhz.is_finite()) {
            return Err(Error::config(format!(
                "hardware.kappa_max_mhz must be non-negative, got {}",
                h.kappa_max_mhz
            )));
        }
        positive("hardware.omega_c_ghz", h.omega_c_ghz)?;
        if let Some(d) = &self.damping {
            positive("damping.t1_us", d.t1_us)?;
            positive("damping.tphi_zero_s", d.tphi_zero_s)?;
            positive("damping.tphi_max_us", d.tphi_max_us)?;
        }
        if let Some(d) = &self.disorder {
            if d.detuning_mhz.len() != l.sites {
                return Err(Error::config(format!(
                    "disorder.detuning_mhz has {} entries for {} sites",
                    d.detuning_mhz.len(),
                    l.sites
                )));
            }
            if d.detuning_mhz.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("disorder.detuning_mhz must be finite"));
            }
        }
        let a = &self.input_state.amplitudes;
        if a.iter().any(|(_, re, im)| !re.is_finite() || !im.is_finite()) {
            return Err(Error::config("input_state.amplitudes must be finite"));
        }
        self.input_state().map_err(|e| Error::config(format!("input_state.amplitudes: {e}")))?;
        let max_n = a.iter().map(|t| t.0).max().unwrap_or(0);
        if max_n > l.per_site_cap {
            return Err(Error::config(format!(
                "input_state.amplitudes reaches n = {max_n} above lattice.per_site_cap = {}",
                l.per_site_cap
            )));
        }
        let s = &self.schedule;
        match (&s.durations_ns, s.auto) {
            (Some(d), false) => {
                if d.len() != STEPS {
                    return Err(Error::config(format!(
                        "schedule.durations_ns needs exactly {STEPS} entries, got {}",
                        d.len()
                    )));
                }
                for (k, &x) in d.iter().enumerate() {
                    positive(&format!("schedule.durations_ns[{k}]"), x)?;
                }
            }
            (None, true) => {}
            (Some(_), true) => return Err(Error::config("schedule: give either durations_ns or auto = true, not both")),
            (None, false) => return Err(Error::config("schedule: missing durations_ns (or set auto = true)")),
        }
        if !(s.margin >= 1.0 && s.margin.is_finite()) {
            return Err(Error::config(format!("schedule.margin must be at least 1, got {}", s.margin)));
        }
        if let Some(t) = s.total_ns {
            positive("schedule.total_ns", t)?;
        }
        positive("integrator.dt_ps", self.integrator.dt_ps)?;
        if self.integrator.sample_stride == 0 {
            return Err(Error::config("integrator.sample_stride must be at least 1"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn chi_max(&self) -> f64 {
        mhz_to_radps(self.hardware.chi_max_mhz)
    }

    pub fn kappa_max(&self) -> f64 {
        mhz_to_radps(self.hardware.kappa_max_mhz)
    }

    pub fn omega_c(&self) -> f64 {
        mhz_to_radps(self.hardware.omega_c_ghz * 1e3)
    }

    pub fn damping_model(&self) -> Result<Option<DampingModel>> {
        self.damping
            .as_ref()
            .map(|d| DampingModel::new(d.t1_us * 1e-6, d.tphi_zero_s, d.tphi_max_us * 1e-6, self.chi_max()))
            .transpose()
    }

    /// Static detunings in rad/s; zero without a disorder section.
    pub fn detuning(&self) -> Vec<f64> {
        match &self.disorder {
            Some(d) => d.detuning_mhz.iter().map(|&x| mhz_to_radps(x)).collect(),
            None => vec![0.0; self.lattice.sites],
        }
    }

    /// Largest `|detuning|` in rad/s.
    pub fn max_detuning(&self) -> f64 {
        self.detuning().iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    pub fn input_state(&self) -> Result<InputState> {
        InputState::new(
            self.input_state
                .amplitudes
                .iter()
                .map(|&(n, re, im)| (n, C64::new(re, im))),
        )
    }

    pub fn protocol_setup(&self) -> Result<ProtocolSetup> {
        let mut s = ProtocolSetup::new(self.lattice.sites, self.lattice.per_site_cap, self.input_state()?)
            .with_detuning(self.detuning())
            .with_damping(self.damping_model()?);
        s.boundary = self.lattice.boundary;
        Ok(s)
    }

    pub fn integrator_options(&self) -> IntegratorOptions {
        IntegratorOptions {
            dt: self.integrator.dt_ps * 1e-12,
            stride: self.integrator.sample_stride,
            ..Default::default()
        }
    }

    /// Quanta range of the input used for the duration bounds.
    pub fn n_range(&self) -> Result<(u32, u32)> {
        let input = self.input_state()?;
        Ok((input.min_n().max(2), input.max_n().max(2)))
    }

    /// The configured schedule. With `auto`, steps 1 to 6 come from the adiabatic
    /// bounds at the configured margin and step 7 is calibrated; with `total_ns`
    /// as well, the whole program is fitted to that total.
    pub fn schedule(&self, protocol: &Protocol, options: RunOptions) -> Result<ControlSchedule> {
        let (chi, kappa, branch) = (self.chi_max(), self.kappa_max(), self.schedule.branch);
        if let Some(d) = self.durations() {
            return ControlSchedule::new(chi, kappa, d, branch);
        }
        let base = recommend_durations(chi, kappa, self.n_range()?, self.schedule.margin)?;
        match self.schedule.total_ns {
            Some(total) => {
                let window = (1e-9, 1e-9 + AUTO_FIT_PERIODS * 2.0 * TWO_PI / chi);
                let fit = fit_total_duration(
                    protocol,
                    chi,
                    kappa,
                    branch,
                    &base,
                    total * 1e-9,
                    window,
                    DEFAULT_CANDIDATES,
                    options,
                )?;
                ControlSchedule::new(chi, kappa, fit.durations, branch)
            }
            None => {
                let first = ControlSchedule::new(chi, kappa, base.with_dt7(base.steps[0]), branch)?;
                Ok(calibrate_schedule(protocol, &first, options)?.schedule)
            }
        }
    }

    /// Explicit step durations in seconds.
    pub fn durations(&self) -> Option<[f64; STEPS]> {
        let d = self.schedule.durations_ns.as_ref()?;
        let mut out = [0.0; STEPS];
        for (o, x) in out.iter_mut().zip(d) {
            *o = x * 1e-9;
        }
        Some(out)
    }
}
