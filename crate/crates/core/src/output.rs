//! Trajectory CSV and run summaries.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn trajectory_header(sites: usize) -> String {
    let mut h = String::from("t_seconds,fidelity,trace,purity");
    for j in 1..=sites {
        let _ = write!(h, ",n_site_{j}");
    }
    h.push_str(",chi1_radps,chi_radps,kappa_radps");
    h
}

/// One row per sample, 17 significant digits.
pub fn write_trajectory_csv<W: Write>(trajectory: &Trajectory, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", trajectory_header(trajectory.sites))?;
    for s in &trajectory.samples {
        write!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", s.t, s.fidelity, s.trace, s.purity)?;
        for n in &s.occupations {
            write!(w, ",{n:.16e}")?;
        }
        writeln!(w, ",{:.16e},{:.16e},{:.16e}", s.controls.chi1, s.controls.chi, s.controls.kappa)?;
    }
    w.flush()
}

pub fn save_trajectory(trajectory: &Trajectory, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory_csv(trajectory, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_fidelity: f64,
    pub peak_fidelity: f64,
    pub peak_time: f64,
    pub total_time: f64,
    pub trace_drift: f64,
    pub hermiticity_error: f64,
    pub steps: usize,
    /// Short constraint status, e.g. `"pass"` or the failing keys.
    pub constraints: String,
    pub config_echo: String,
    pub code_version: String,
    pub timestamp: String,
}

impl RunSummary {
    pub fn new(trajectory: &Trajectory, total_time: f64, constraints: String, config_echo: String) -> Self {
        let (peak_fidelity, peak_time) = trajectory.peak().map_or((0.0, 0.0), |s| (s.fidelity, s.t));
        Self {
            final_fidelity: trajectory.final_fidelity().unwrap_or(0.0),
            peak_fidelity,
            peak_time,
            total_time,
            trace_drift: trajectory.stats.max_trace_drift,
            hermiticity_error: trajectory.stats.max_hermiticity_error,
            steps: trajectory.stats.steps,
            constraints,
            config_echo,
            code_version: CODE_VERSION.to_string(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "final_fidelity: {:.10}", self.final_fidelity);
        let _ = writeln!(s, "peak_fidelity: {:.10}", self.peak_fidelity);
        let _ = writeln!(s, "peak_time_s: {:.6e}", self.peak_time);
        let _ = writeln!(s, "total_time_T_s: {:.6e}", self.total_time);
        let _ = writeln!(s, "trace_drift: {:.3e}", self.trace_drift);
        let _ = writeln!(s, "hermiticity_error: {:.3e}", self.hermiticity_error);
        let _ = writeln!(s, "steps: {}", self.steps);
        let _ = writeln!(s, "constraints: {}", self.constraints);
        let _ = writeln!(s, "code_version: {}", self.code_version);
        let _ = writeln!(s, "timestamp: {}", self.timestamp);
        let _ = writeln!(s, "config: |");
        for line in self.config_echo.lines() {
            let _ = writeln!(s, "  {line}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub trajectory: PathBuf,
    pub summary: PathBuf,
}

pub fn write_outputs(trajectory: &Trajectory, summary: &RunSummary, paths: &OutputPaths) -> Result<()> {
    save_trajectory(trajectory, &paths.trajectory)?;
    std::fs::write(&paths.summary, summary.to_text()).map_err(|e| Error::io(&paths.summary, e))
}
