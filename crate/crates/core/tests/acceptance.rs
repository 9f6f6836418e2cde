//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines come out in order and unbuffered.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use agehawkes::checks::{self, CheckOutcome};

const BIN: &str = env!("CARGO_BIN_EXE_agehawkes");

fn outcome(name: &'static str, started: Instant, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    }
}

fn binary(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// `alpha-m --beta 0.01` through the binary, value read back from its CSV.
fn alpha_m_cli(dir: &Path) -> CheckOutcome {
    let started = Instant::now();
    let prefix = dir.join("am");
    let run = binary(&["alpha-m", "--beta", "0.01", "--out", prefix.to_str().unwrap()]);
    let elapsed = started.elapsed().as_secs_f64();
    let parsed = run.and_then(|_| {
        let text = std::fs::read_to_string(dir.join("am.csv")).map_err(|e| e.to_string())?;
        let row = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .nth(1)
            .ok_or("no data row")?
            .to_string();
        row.split(',')
            .nth(1)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or(format!("bad row {row:?}"))
    });
    match parsed {
        Ok(a) => outcome(
            "alpha_m reproduction (cli)",
            started,
            (a - 0.973).abs() <= 0.005 && elapsed < 1.0,
            format!("alpha-m --beta 0.01 -> {a} (target 0.973 +- 0.005), {elapsed:.3} s wall (limit 1 s)"),
        ),
        Err(e) => outcome("alpha_m reproduction (cli)", started, false, e),
    }
}

/// Two separate processes per command, data files compared byte for byte.
fn determinism_cli(dir: &Path) -> CheckOutcome {
    let started = Instant::now();
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let sim = |prefix: &str| {
        binary(&[
            "simulate", "--mu", "2", "--alpha", "0.5", "--delta", "0.005", "--n", "200", "--spikes", "3000",
            "--seed", "11", "--out", &p(prefix),
        ])
    };
    let fig = |prefix: &str, jobs: &str| {
        binary(&[
            "fig1", "--mu", "0.05:50:4:log", "--alpha", "0:2:3", "--n", "200", "--spikes", "2000", "--seed", "5",
            "--jobs", jobs, "--out", &p(prefix),
        ])
    };
    for run in [sim("sim_a"), sim("sim_b"), fig("fig_a", "1"), fig("fig_b", "2")] {
        if let Err(e) = run {
            return outcome("determinism (cli)", started, false, e);
        }
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b) in [
        ("sim_a.spikes.csv", "sim_b.spikes.csv"),
        ("sim_a.estimate.json", "sim_b.estimate.json"),
        ("fig_a.csv", "fig_b.csv"),
    ] {
        let same = match (std::fs::read(dir.join(a)), std::fs::read(dir.join(b))) {
            (Ok(x), Ok(y)) => !x.is_empty() && x == y,
            _ => false,
        };
        ok &= same;
        parts.push(format!("{a} vs {b}: {}", if same { "identical" } else { "DIFFERENT" }));
    }
    outcome("determinism (cli)", started, ok, parts.join(", "))
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("scratch dir");
    type Check<'a> = Box<dyn Fn() -> CheckOutcome + 'a>;
    let suite: Vec<Check> = vec![
        Box::new(|| alpha_m_cli(scratch.path())),
        Box::new(checks::theorem_extremes),
        Box::new(checks::alpha_m_oracle),
        Box::new(checks::sigma_finite_differences),
        Box::new(checks::algebraic_identities),
        Box::new(checks::fig1_reproduction),
        Box::new(checks::saturation_and_onset),
        Box::new(checks::pde_convergence),
        Box::new(checks::cross_engine_triangle),
        Box::new(|| determinism_cli(scratch.path())),
    ];
    let mut failed = 0;
    for check in &suite {
        let result = check();
        println!("{}", result.line());
        failed += usize::from(!result.passed);
    }
    println!("acceptance: {} passed, {failed} failed", suite.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
