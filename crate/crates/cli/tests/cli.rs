use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[lattice]
sites = 2
per_site_cap = 2

[hardware]
chi_max_mhz = 100.0
kappa_max_mhz = 30.0

[input_state]
amplitudes = [[2, 1.0, 0.0]]

[schedule]
durations_ns = [0.3, 2.0, 3.0, 0.3, 3.0, 2.0, 2.0]

[integrator]
dt_ps = 1.0
sample_stride = 50
"#;

fn abhsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abhsim"))
        .args(args)
        .env("ABHSIM_THREADS", "1")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn protocol_writes_trajectory_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out");
    let o = abhsim(&["protocol", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("final fidelity"));

    let csv = std::fs::read_to_string(out.join("small_trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t_seconds,fidelity,trace,purity,n_site_1,n_site_2,chi1_radps,chi_radps,kappa_radps"
    );
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[0] - 12.6e-9).abs() < 1e-15);
    assert!((last[2] - 1.0).abs() < 1e-9);

    let summary = std::fs::read_to_string(out.join("small_summary.txt")).unwrap();
    for key in ["final_fidelity:", "peak_fidelity:", "total_time_T_s:", "constraints:", "code_version:", "timestamp:"] {
        assert!(summary.contains(key), "missing {key}");
    }
    assert!(summary.contains("  sites = 2"));
}

#[test]
fn protocol_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let read = |sub: &str| {
        let out = dir.path().join(sub);
        let o = abhsim(&["protocol", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out.join("small_trajectory.csv")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let damped = format!("{SMALL}\n[damping]\nt1_us = 0.05\ntphi_zero_s = 1.0\ntphi_max_us = 300.0\n");
    let cfg = write_config(dir.path(), "d.toml", &damped);
    let run = |extra: &[&str]| -> f64 {
        let out = dir.path().join("o");
        let mut args = vec!["protocol", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = abhsim(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let csv = std::fs::read_to_string(out.join("d_trajectory.csv")).unwrap();
        let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        last[3]
    };
    assert!(run(&[]) < 0.99);
    assert!((run(&["--no-damping"]) - 1.0).abs() < 1e-9);
    let o = abhsim(&["protocol", cfg.to_str().unwrap(), "--disorder", "0.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("disorder.detuning_mhz"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = abhsim(&["protocol", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.toml"));

    let bad = write_config(dir.path(), "bad.toml", &SMALL.replace("dt_ps = 1.0", "dt_ps = -1.0"));
    let o = abhsim(&["protocol", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("integrator.dt_ps"));

    let o = abhsim(&["protocol", bad.to_str().unwrap(), "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn coarse_step_needs_halving_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().to_str().unwrap();
    let o = abhsim(&["protocol", cfg.to_str().unwrap(), "--dt-ps", "2", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = abhsim(&["protocol", cfg.to_str().unwrap(), "--dt-ps", "300", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("step halving"), "{}", stderr(&o));
}

#[test]
fn constraints_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let o = abhsim(&["constraints", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("n_max_bound: 6"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("dt2: ")));
    assert!(text.lines().last().unwrap().starts_with("overall: "));
}

#[test]
fn spectrum_scan_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let o = abhsim(&[
        "spectrum",
        cfg.to_str().unwrap(),
        "--sector",
        "3",
        "--tau-scan",
        "0:1:0.05",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("small_spectrum_n3.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 21);
    assert!((rows[0][2] - 1.0).abs() < 1e-12, "{}", rows[0][2]);
    assert!(rows.windows(2).all(|w| w[1][2] < w[0][2]));

    let o = abhsim(&["spectrum", cfg.to_str().unwrap(), "--sector", "3", "--tau-scan", "1:0:0.1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn calibrate_prints_durations() {
    let dir = tempfile::tempdir().unwrap();
    let two = SMALL.replace("[[2, 1.0, 0.0]]", "[[1, 0.7071067811865476, 0.0], [2, 0.7071067811865476, 0.0]]");
    let cfg = write_config(dir.path(), "c.toml", &two);
    let o = abhsim(&["calibrate", cfg.to_str().unwrap(), "--candidates", "30", "--dt-ps", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("durations_ns = [")).unwrap();
    let inner = line.trim_start_matches("durations_ns = [").trim_end_matches(']');
    let d: Vec<f64> = inner.split(", ").map(|x| x.parse().unwrap()).collect();
    assert_eq!(d.len(), 7);
    for (a, b) in d.iter().zip([0.3, 2.0, 3.0, 0.3, 3.0, 2.0]) {
        assert!((a - b).abs() < 1e-12, "{d:?}");
    }
    assert!(d[6] > 3.0);
}

#[test]
fn verify_reports_mismatch_with_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = abhsim(&["verify", "--quick", "--presets", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.contains("[PASS] constraint golden values"));
    assert!(text.contains("[PASS] eigenstructure at kappa = 0"));
    assert!(text.contains("[FAIL] sim1 closed peak"));
}
