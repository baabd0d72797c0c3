use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use abhsim::config::{load_config, DisorderConfig, RunConfig, AUTO_FIT_PERIODS};
use abhsim::output::{write_outputs, OutputPaths, RunSummary};
use abhsim::protocol::{
    calibrate_dt7, default_window, feasibility, fit_total_duration, recommend_durations, ControlSchedule,
    FeasibilityInput, FeasibilityReport, Protocol, RunOptions, STEPS,
};
use abhsim::spectra::{phase_scan, write_phase_scan_csv};
use abhsim::verify::{run_checks, run_config, step_halving};
use abhsim::{Error, LatticeBasis, LatticeSpec, TWO_PI};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

/// Reference step used by the presets; coarser steps must pass a halving check.
const REFERENCE_DT_PS: f64 = 1.0;
const HALVING_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "abhsim", version, about = "Attractive Bose-Hubbard ring simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the seven-step protocol and write the trajectory and summary.
    Protocol {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Ground-state scan of one number sector against tau = kappa / (chi (N-1)).
    Spectrum {
        config: PathBuf,
        #[arg(long)]
        sector: u32,
        /// `start:stop:step`, stop inclusive.
        #[arg(long, value_parser = parse_scan)]
        tau_scan: TauScan,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the feasibility report for a run file.
    Constraints {
        config: PathBuf,
        #[arg(long)]
        margin: Option<f64>,
        /// Comma-separated detunings in MHz.
        #[arg(long)]
        disorder: Option<String>,
    },
    /// Calibrate the step-7 duration, or fit a whole schedule to a total time.
    Calibrate {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long, default_value_t = abhsim::protocol::DEFAULT_CANDIDATES)]
        candidates: usize,
        /// Fit all seven durations to this total time in ns.
        #[arg(long)]
        total_ns: Option<f64>,
    },
    /// Run the built-in reference checks.
    Verify {
        #[arg(long, default_value = "presets")]
        presets: PathBuf,
        /// Skip the damped preset runs.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args, Clone, Default)]
struct RunFlags {
    #[arg(long)]
    dt_ps: Option<f64>,
    #[arg(long)]
    no_damping: bool,
    /// Comma-separated detunings in MHz, one per site.
    #[arg(long)]
    disorder: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Clone, Debug)]
struct TauScan(Vec<f64>);

fn parse_scan(s: &str) -> Result<TauScan, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [a, b, step] = parts[..] else {
        return Err("expected start:stop:step".into());
    };
    if !(step > 0.0 && b >= a && a >= 0.0) {
        return Err("need 0 <= start <= stop and step > 0".into());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok(TauScan((0..=n).map(|k| a + k as f64 * step).collect()))
}

fn parse_disorder(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Config(format!("--disorder {s:?}: {e}")))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } | Error::IntegrationQuality(_) | Error::Invariant(_) | Error::WidenWindow { .. } => {
            EXIT_NUMERICAL
        }
        _ => EXIT_CONFIG,
    }
}

fn configure_threads() {
    let Ok(v) = std::env::var("ABHSIM_THREADS") else {
        return;
    };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                warn!("ABHSIM_THREADS: {e}");
            }
        }
        _ => warn!("ignoring ABHSIM_THREADS={v:?}"),
    }
}

fn load(path: &Path, flags: &RunFlags) -> Result<RunConfig, Error> {
    let mut cfg = load_config(path)?;
    if let Some(dt) = flags.dt_ps {
        cfg.integrator.dt_ps = dt;
    }
    if let Some(s) = flags.stride {
        cfg.integrator.sample_stride = s;
    }
    if let Some(m) = flags.margin {
        cfg.schedule.margin = m;
    }
    if flags.no_damping {
        cfg.damping = None;
    }
    if let Some(d) = &flags.disorder {
        cfg.disorder = Some(DisorderConfig {
            detuning_mhz: parse_disorder(d)?,
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn feasibility_input(cfg: &RunConfig) -> Result<FeasibilityInput, Error> {
    let (n_min, n_max) = cfg.n_range()?;
    Ok(FeasibilityInput {
        chi_max: cfg.chi_max(),
        kappa_max: cfg.kappa_max(),
        n_min,
        n_max,
        omega_c: cfg.omega_c(),
        delta_omega: cfg.max_detuning(),
        margin: cfg.schedule.margin,
        sites: Some(cfg.lattice.sites),
    })
}

fn constraint_digest(report: &FeasibilityReport) -> String {
    let failed: Vec<&str> = report.failures().map(|c| c.key).collect();
    if failed.is_empty() {
        "pass".into()
    } else {
        format!("fail ({})", failed.join(", "))
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

fn check_step(protocol: &Protocol, schedule: &ControlSchedule, cfg: &RunConfig) -> Result<(), Error> {
    if cfg.integrator.dt_ps <= REFERENCE_DT_PS {
        return Ok(());
    }
    let d = step_halving(protocol, schedule, cfg.integrator_options())?;
    info!("step halving at dt = {} ps: |dF| = {d:.3e}", cfg.integrator.dt_ps);
    if d > HALVING_TOLERANCE {
        return Err(Error::IntegrationQuality(format!(
            "dt = {} ps fails step halving: |F(dt) - F(dt/2)| = {d:.3e} > {HALVING_TOLERANCE:e}",
            cfg.integrator.dt_ps
        )));
    }
    Ok(())
}

fn cmd_protocol(path: &Path, flags: &RunFlags) -> Result<(), Error> {
    let cfg = load(path, flags)?;
    let r = run_config(&cfg, false)?;
    check_step(&r.protocol, &r.schedule, &cfg)?;
    let report = feasibility(&feasibility_input(&cfg)?, Some(&r.schedule))?;
    for c in report.failures() {
        warn!("constraint {} fails: value {:?}, bound {:?}", c.key, c.value, c.bound);
    }
    let summary = RunSummary::new(&r.run.trajectory, r.schedule.total_time(), constraint_digest(&report), cfg.to_toml());
    let name = stem(path);
    std::fs::create_dir_all(&flags.out).map_err(|e| Error::Io {
        path: flags.out.clone(),
        source: e,
    })?;
    let paths = OutputPaths {
        trajectory: flags.out.join(cfg.outputs.trajectory.clone().unwrap_or(format!("{name}_trajectory.csv"))),
        summary: flags.out.join(cfg.outputs.summary.clone().unwrap_or(format!("{name}_summary.txt"))),
    };
    write_outputs(&r.run.trajectory, &summary, &paths)?;
    println!(
        "final fidelity {:.6}, peak {:.6} at {:.3} ns, T = {:.3} ns",
        summary.final_fidelity,
        summary.peak_fidelity,
        summary.peak_time * 1e9,
        summary.total_time * 1e9
    );
    println!("wrote {} and {}", paths.trajectory.display(), paths.summary.display());
    Ok(())
}

fn cmd_spectrum(path: &Path, sector: u32, taus: &[f64], out: &Path) -> Result<(), Error> {
    let cfg = load_config(path)?;
    let basis = Arc::new(LatticeBasis::new(LatticeSpec::new(cfg.lattice.sites, sector, Some(sector))?)?);
    let rows = phase_scan(&basis, sector, cfg.chi_max(), taus)?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let file = out.join(format!("{}_spectrum_n{sector}.csv", stem(path)));
    let f = std::fs::File::create(&file).map_err(|e| Error::Io {
        path: file.clone(),
        source: e,
    })?;
    write_phase_scan_csv(&rows, std::io::BufWriter::new(f)).map_err(|e| Error::Io {
        path: file.clone(),
        source: e,
    })?;
    println!("{} tau points, wrote {}", rows.len(), file.display());
    Ok(())
}

fn cmd_constraints(path: &Path, margin: Option<f64>, disorder: Option<&str>) -> Result<(), Error> {
    let flags = RunFlags {
        margin,
        disorder: disorder.map(str::to_owned),
        ..Default::default()
    };
    let cfg = load(path, &flags)?;
    let schedule = match cfg.durations() {
        Some(d) => Some(ControlSchedule::new(cfg.chi_max(), cfg.kappa_max(), d, cfg.schedule.branch)?),
        None => None,
    };
    let report = feasibility(&feasibility_input(&cfg)?, schedule.as_ref())?;
    print!("{}", report.to_text());
    Ok(())
}

fn cmd_calibrate(path: &Path, flags: &RunFlags, candidates: usize, total_ns: Option<f64>) -> Result<(), Error> {
    let cfg = load(path, flags)?;
    let protocol = Protocol::new(cfg.protocol_setup()?)?;
    let opts = RunOptions {
        integrator: cfg.integrator_options(),
        track_phases: false,
    };
    let (chi, kappa, branch) = (cfg.chi_max(), cfg.kappa_max(), cfg.schedule.branch);
    let base = recommend_durations(chi, kappa, cfg.n_range()?, cfg.schedule.margin)?;
    let (durations, fidelity) = match total_ns {
        Some(total) => {
            let window = (1e-9, 1e-9 + AUTO_FIT_PERIODS * 2.0 * TWO_PI / chi);
            let fit = fit_total_duration(&protocol, chi, kappa, branch, &base, total * 1e-9, window, candidates, opts)?;
            (fit.durations, fit.fidelity)
        }
        None => {
            let d = cfg.durations().unwrap_or_else(|| base.with_dt7(base.steps[0]));
            let schedule = ControlSchedule::new(chi, kappa, d, branch)?;
            let head = protocol.run_steps(&schedule, protocol.initial(), 1, STEPS - 1, opts)?;
            let c = calibrate_dt7(&protocol, &schedule, &head.state, default_window(chi), candidates, opts)?;
            (c.schedule.durations(), c.fidelity)
        }
    };
    let ns: Vec<String> = durations.iter().map(|d| format!("{}", d * 1e9)).collect();
    println!("fidelity = {fidelity:.10}");
    println!("durations_ns = [{}]", ns.join(", "));
    Ok(())
}

fn cmd_verify(presets: &Path, quick: bool) -> Result<bool, Error> {
    let outcomes = run_checks(presets, quick);
    for o in &outcomes {
        println!("{}", o.line());
    }
    Ok(outcomes.iter().all(|o| o.pass))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Protocol { config, run } => cmd_protocol(config, run).map(|_| true),
        Command::Spectrum {
            config,
            sector,
            tau_scan,
            out,
        } => cmd_spectrum(config, *sector, &tau_scan.0, out).map(|_| true),
        Command::Constraints {
            config,
            margin,
            disorder,
        } => cmd_constraints(config, *margin, disorder.as_deref()).map(|_| true),
        Command::Calibrate {
            config,
            run,
            candidates,
            total_ns,
        } => cmd_calibrate(config, run, *candidates, *total_ns).map(|_| true),
        Command::Verify { presets, quick } => cmd_verify(presets, *quick),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_MISMATCH),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_is_inclusive() {
        let s = parse_scan("0:1:0.25").unwrap().0;
        assert_eq!(s, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_scan("0:1:0.05").unwrap().0.len(), 21);
        assert!(parse_scan("1:0:0.1").is_err());
        assert!(parse_scan("0:1").is_err());
    }

    #[test]
    fn disorder_list() {
        assert_eq!(parse_disorder("0.5, 0,-0.5").unwrap(), vec![0.5, 0.0, -0.5]);
        assert!(matches!(parse_disorder("a,b"), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::WidenWindow { lo: 1.0, hi: 2.0 }), EXIT_NUMERICAL);
        assert_eq!(
            exit_code(&Error::Numerical {
                step: 3,
                reason: "nan".into()
            }),
            EXIT_NUMERICAL
        );
    }
}
