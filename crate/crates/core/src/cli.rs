//! Command-line front end. `run` parses an argument vector, writes the
//! requested files and returns the process exit code:
//! 0 success, 1 I/O failure, 2 usage error, 3 engine error, 4 failed check.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analytics::{sensitivity, sensitivity_derivative, sensitivity_reduced, steady_activity, alpha_m, ModelParams};
use crate::io::{fmt_num, parse_grid, timestamp, with_suffix, write_csv, write_json, VERSION};
use crate::pde::{
    init_state, solve_from, ExponentialKernel, InitialDensity, PdeError, PdeGrid, PdeSolution, SolveOptions,
};
use crate::presets::{
    fig1_rows, fig2_rows, Fig1Preset, Fig2Preset, WeightFamily, ALPHA_M_HEADER, FIG1_HEADER, FIG2_HEADER,
};
use crate::sim::{
    build_network, estimate_activity, simulate_with, EstimationScheme, Kernel, NetworkConfig, RunOptions, StopRule,
};

#[derive(Debug, Parser)]
#[command(name = "agehawkes", version, about = "Steady state, sensitivity and simulation of age-dependent Hawkes networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form steady activity over a parameter sweep.
    Steady(SteadyArgs),
    /// Sensitivity d a_inf / d mu over a sweep.
    Sensitivity(SensitivityArgs),
    /// Connectivity maximizing the sensitivity.
    AlphaM(AlphaMArgs),
    /// Simulate one finite network.
    Simulate(SimulateArgs),
    /// Integrate the age-structured equation to stationarity.
    Pde(PdeArgs),
    /// Steady activity against mu: closed form and simulation.
    Fig1(Fig1Args),
    /// Sensitivity against alpha for several beta, with optimum markers.
    Fig2(Fig2Args),
    /// Run the built-in acceptance checks.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum WeightArg {
    Dirac,
    Bernoulli,
}

impl From<WeightArg> for WeightFamily {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Dirac => WeightFamily::Dirac,
            WeightArg::Bernoulli => WeightFamily::Bernoulli,
        }
    }
}

#[derive(Debug, Args)]
struct Output {
    /// Output path prefix; extensions are appended.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (0: one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Args, Serialize)]
struct SteadyArgs {
    /// Value, list `a,b,c` or grid `start:stop:count[:log]`.
    #[arg(long)]
    mu: String,
    #[arg(long)]
    alpha: String,
    #[arg(long)]
    delta: String,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct SensitivityArgs {
    #[arg(long)]
    alpha: String,
    /// Reduced parameter beta = mu * delta; alternatively give --mu and --delta.
    #[arg(long, conflicts_with_all = ["mu", "delta"], required_unless_present_all = ["mu", "delta"])]
    beta: Option<String>,
    #[arg(long, requires = "delta")]
    mu: Option<String>,
    #[arg(long, requires = "mu")]
    delta: Option<String>,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct AlphaMArgs {
    #[arg(long)]
    beta: String,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Stop after this many spikes past the burn-in (default 5000).
    #[arg(long, conflicts_with = "max_time")]
    spikes: Option<usize>,
    /// Stop at this time instead.
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    burn_in: f64,
    #[arg(long, default_value_t = Kernel::DEFAULT_TAU)]
    kernel_tau: f64,
    #[arg(long, value_enum, default_value_t = WeightArg::Dirac)]
    weight_law: WeightArg,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct PdeArgs {
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 1e-4)]
    ds: f64,
    /// Age truncation (default: the smallest admissible one).
    #[arg(long)]
    s_max: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1000.0)]
    max_time: f64,
    #[arg(long, default_value_t = Kernel::DEFAULT_TAU)]
    kernel_tau: f64,
    /// `default`, `stationary`, `analytic`, `delta:S0` or `uniform:S0:S1`.
    #[arg(long, default_value = "default")]
    init: String,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct Fig1Args {
    #[arg(long, default_value = "0.01:100:9:log")]
    mu: String,
    #[arg(long, default_value = "0:2:7")]
    alpha: String,
    #[arg(long, default_value_t = 0.005)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 5000)]
    spikes: usize,
    #[arg(long, default_value_t = 0.0)]
    burn_in: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Independent runs averaged per grid point.
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long, default_value_t = Kernel::DEFAULT_TAU)]
    kernel_tau: f64,
    #[arg(long, value_enum, default_value_t = WeightArg::Dirac)]
    weight_law: WeightArg,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args, Serialize)]
struct Fig2Args {
    #[arg(long, default_value = "0,0.01,0.2,0.5,0.6")]
    beta: String,
    #[arg(long, default_value = "0:2:201")]
    alpha: String,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Directory for the determinism reruns (default: a fresh temporary one).
    #[arg(long)]
    scratch: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    /// Engine failure, reported with the error's variant name.
    Engine(String),
    Io(std::io::Error),
    CheckFailed(usize),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

macro_rules! engine {
    ($e:expr) => {
        $e.map_err(|e| CliError::Engine(e.to_string()))
    };
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("agehawkes: usage error: {msg}");
            2
        }
        Err(CliError::Engine(msg)) => {
            eprintln!("agehawkes: {msg}");
            3
        }
        Err(CliError::Io(e)) => {
            eprintln!("agehawkes: I/O error: {e}");
            1
        }
        Err(CliError::CheckFailed(n)) => {
            eprintln!("agehawkes: {n} acceptance check(s) failed");
            4
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Steady(a) => steady(&a),
        Command::Sensitivity(a) => sensitivity_cmd(&a),
        Command::AlphaM(a) => alpha_m_cmd(&a),
        Command::Simulate(a) => simulate_cmd(&a),
        Command::Pde(a) => pde_cmd(&a),
        Command::Fig1(a) => fig1_cmd(&a),
        Command::Fig2(a) => fig2_cmd(&a),
        Command::Check(a) => check_cmd(&a),
    }
}

fn grid(flag: &str, spec: &str) -> Result<Vec<f64>, CliError> {
    parse_grid(spec).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn prefix(output: &Output, default: &str) -> PathBuf {
    output.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

/// `command=... version=...` followed by the resolved arguments.
fn comment<T: Serialize>(command: &str, args: &T) -> String {
    let mut line = format!("command={command} version={VERSION}");
    if let Ok(Value::Object(map)) = serde_json::to_value(args) {
        for (k, v) in map {
            match v {
                Value::Null => {}
                Value::String(s) => line.push_str(&format!(" {k}={s}")),
                other => line.push_str(&format!(" {k}={other}")),
            }
        }
    }
    line
}

fn meta<T: Serialize>(command: &str, args: &T, outputs: &[&Path], extra: Value) -> Value {
    json!({
        "command": command,
        "version": VERSION,
        "timestamp": timestamp(),
        "args": args,
        "outputs": outputs.iter().map(|p| p.to_string_lossy()).collect::<Vec<_>>(),
        "results": extra,
    })
}

/// Runs `f` on a rayon pool with `jobs` workers (0: rayon's default).
fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    Ok(pool.install(f))
}

fn emit_table<T: Serialize>(
    command: &str,
    args: &T,
    output: &Output,
    header: &str,
    rows: &[String],
) -> Result<(), CliError> {
    let base = prefix(output, command);
    let csv = with_suffix(&base, ".csv");
    let meta_path = with_suffix(&base, ".meta.json");
    write_csv(&csv, &comment(command, args), header, rows)?;
    write_json(&meta_path, &meta(command, args, &[&csv], json!({ "rows": rows.len() })))?;
    println!("{header}");
    for row in rows {
        println!("{row}");
    }
    Ok(())
}

fn steady(args: &SteadyArgs) -> Result<(), CliError> {
    let (mus, alphas, deltas) = (grid("mu", &args.mu)?, grid("alpha", &args.alpha)?, grid("delta", &args.delta)?);
    let mut points = Vec::with_capacity(mus.len() * alphas.len() * deltas.len());
    for &mu in &mus {
        for &alpha in &alphas {
            points.extend(deltas.iter().map(|&delta| ModelParams { mu, alpha, delta }));
        }
    }
    let rows: Vec<String> = with_pool(args.output.jobs, || {
        points
            .par_iter()
            .map(|p| {
                steady_activity(p).map(|a| [p.mu, p.alpha, p.delta, a].map(fmt_num).join(","))
            })
            .collect::<Result<_, _>>()
    })?
    .map_err(|e| CliError::Engine(e.to_string()))?;
    emit_table("steady", args, &args.output, "mu,alpha,delta,a_inf", &rows)
}

fn sensitivity_cmd(args: &SensitivityArgs) -> Result<(), CliError> {
    let alphas = grid("alpha", &args.alpha)?;
    let rows: Vec<String> = match (&args.beta, &args.mu, &args.delta) {
        (Some(beta), _, _) => {
            let betas = grid("beta", beta)?;
            let points: Vec<(f64, f64)> =
                alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
            with_pool(args.output.jobs, || {
                points
                    .par_iter()
                    .map(|&(a, b)| sensitivity_reduced(a, b).map(|s| [a, b, s].map(fmt_num).join(",")))
                    .collect::<Result<_, _>>()
            })?
        }
        (None, Some(mu), Some(delta)) => {
            let (mus, deltas) = (grid("mu", mu)?, grid("delta", delta)?);
            let mut points = Vec::with_capacity(alphas.len() * mus.len() * deltas.len());
            for &alpha in &alphas {
                for &mu in &mus {
                    points.extend(deltas.iter().map(|&delta| ModelParams { mu, alpha, delta }));
                }
            }
            with_pool(args.output.jobs, || {
                points
                    .par_iter()
                    .map(|p| sensitivity(p).map(|s| [p.alpha, p.beta(), s].map(fmt_num).join(",")))
                    .collect::<Result<_, _>>()
            })?
        }
        _ => return Err(CliError::Usage("give --beta, or both --mu and --delta".into())),
    }
    .map_err(|e| CliError::Engine(e.to_string()))?;
    emit_table("sensitivity", args, &args.output, "alpha,beta,sigma", &rows)
}

fn alpha_m_cmd(args: &AlphaMArgs) -> Result<(), CliError> {
    let betas = grid("beta", &args.beta)?;
    let rows: Vec<String> = with_pool(args.output.jobs, || {
        betas
            .par_iter()
            .map(|&b| {
                let a = alpha_m(b)?;
                let g = sensitivity_derivative(a, b)?;
                Ok([b, a, g].map(fmt_num).join(","))
            })
            .collect::<Result<_, crate::analytics::AnalyticsError>>()
    })?
    .map_err(|e| CliError::Engine(e.to_string()))?;
    emit_table("alpha-m", args, &args.output, "beta,alpha_m,g_residual", &rows)
}

#[derive(Serialize)]
struct EstimateFile {
    rate: Option<f64>,
    std_error: Option<f64>,
    spikes_used: Option<usize>,
    t_start: Option<f64>,
    t_end: Option<f64>,
    a_inf_analytic: Option<f64>,
    total_spikes: usize,
    end_time: f64,
    proposals: u64,
    acceptance_rate: f64,
    exhausted: bool,
}

fn simulate_cmd(args: &SimulateArgs) -> Result<(), CliError> {
    let config = NetworkConfig {
        n: args.n,
        mu: args.mu,
        delta: args.delta,
        weight_law: WeightFamily::from(args.weight_law).law(args.alpha),
        kernel: Kernel::Exponential { tau: args.kernel_tau },
        seed: args.seed,
    };
    let (stop, scheme) = match (args.spikes, args.max_time) {
        (_, Some(t)) => (StopRule::MaxTime(t), EstimationScheme::Window { t0: args.burn_in, t1: t }),
        (k, None) => {
            let k = k.unwrap_or(5000);
            (StopRule::MaxSpikes(k), EstimationScheme::FirstK { k, burn_in: args.burn_in })
        }
    };
    let network = engine!(build_network(&config))?;
    let record = engine!(simulate_with(&network, &RunOptions::new(stop).with_burn_in(args.burn_in)))?;
    let estimate = estimate_activity(&record, args.n, scheme);
    let a_inf = ModelParams::new(args.mu, args.alpha, args.delta)
        .and_then(|p| steady_activity(&p))
        .ok();

    let base = prefix(&args.output, "simulate");
    let spikes = with_suffix(&base, ".spikes.csv");
    let est_path = with_suffix(&base, ".estimate.json");
    let meta_path = with_suffix(&base, ".meta.json");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&spikes)?);
    record.write_csv(&mut out, Some(&comment("simulate", args)))?;
    let est = estimate.as_ref().ok();
    let file = EstimateFile {
        rate: est.map(|e| e.rate),
        std_error: est.map(|e| e.std_error),
        spikes_used: est.map(|e| e.spikes),
        t_start: est.map(|e| e.t_start),
        t_end: est.map(|e| e.t_end),
        a_inf_analytic: a_inf,
        total_spikes: record.len(),
        end_time: record.meta.end_time,
        proposals: record.meta.proposals,
        acceptance_rate: record.meta.acceptance_rate,
        exhausted: record.meta.exhausted,
    };
    write_json(&est_path, &file)?;
    write_json(
        &meta_path,
        &meta("simulate", args, &[&spikes, &est_path], serde_json::to_value(&record.meta).unwrap_or(Value::Null)),
    )?;
    let est = engine!(estimate)?;
    println!(
        "rate {} +- {} over {} spikes (closed form {})",
        est.rate,
        est.std_error,
        est.spikes,
        a_inf.map_or("n/a".to_string(), |a| a.to_string())
    );
    Ok(())
}

fn parse_init(spec: &str, params: &ModelParams) -> Result<InitialDensity, CliError> {
    let bad = || CliError::Usage(format!("--init: expected default, stationary, analytic, delta:S0 or uniform:S0:S1, got {spec:?}"));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["default"] => Ok(InitialDensity::default_for(params)),
        ["stationary"] => Ok(InitialDensity::Stationary),
        ["analytic"] => Ok(InitialDensity::Analytic),
        ["delta", s0] => Ok(InitialDensity::DeltaAtAge { s0: num(s0)? }),
        ["uniform", s0, s1] => Ok(InitialDensity::Uniform {
            s0: num(s0)?,
            s1: num(s1)?,
        }),
        _ => Err(bad()),
    }
}

fn pde_cmd(args: &PdeArgs) -> Result<(), CliError> {
    let params = engine!(ModelParams::new(args.mu, args.alpha, args.delta))?;
    let init = parse_init(&args.init, &params)?;
    let kernel = engine!(ExponentialKernel::new(args.kernel_tau))?;
    let grid = match args.s_max {
        Some(s_max) => engine!(PdeGrid::new(args.ds, s_max))?,
        None => engine!(PdeGrid::for_params(&params, args.ds))?,
    };
    let state = engine!(init_state(&params, &grid, init))?;
    let result = solve_from(state, &params, &kernel, &SolveOptions::new(args.tol, args.max_time));
    let (solution, failure) = match result {
        Ok(sol) => (sol, None),
        Err(PdeError::NotConverged { spread, solution }) => {
            let msg = PdeError::NotConverged {
                spread,
                solution: solution.clone(),
            }
            .to_string();
            (*solution, Some(msg))
        }
        Err(e) => return Err(CliError::Engine(e.to_string())),
    };
    write_pde(args, &grid, &solution)?;
    println!(
        "a_end {} (closed form {}), converged {}, t = {}",
        solution.a_end(),
        solution.a_inf.map_or("n/a".into(), |a| a.to_string()),
        solution.converged,
        solution.state.t()
    );
    match failure {
        Some(msg) => Err(CliError::Engine(msg)),
        None => Ok(()),
    }
}

fn write_pde(args: &PdeArgs, grid: &PdeGrid, solution: &PdeSolution) -> Result<(), CliError> {
    let base = prefix(&args.output, "pde");
    let traj = with_suffix(&base, ".trajectory.csv");
    let dens = with_suffix(&base, ".density.csv");
    let meta_path = with_suffix(&base, ".meta.json");
    let note = format!(
        "{} delta_snapped={} n_cells={} tail={}",
        comment("pde", args),
        fmt_num(solution.delta_snapped),
        grid.n_cells,
        fmt_num(solution.state.tail())
    );
    solution.write_trajectory_csv(std::io::BufWriter::new(std::fs::File::create(&traj)?), Some(&note))?;
    solution
        .state
        .write_density_csv(std::io::BufWriter::new(std::fs::File::create(&dens)?), Some(&note))?;
    let results = json!({
        "converged": solution.converged,
        "a_end": solution.a_end(),
        "x_end": solution.state.x(),
        "t_end": solution.state.t(),
        "a_inf_analytic": solution.a_inf,
        "relative_error": solution.relative_error(),
        "l1_distance": solution.l1_distance,
        "spread": solution.spread,
        "window": solution.window,
        "delta_snapped": solution.delta_snapped,
        "grid": grid,
        "max_mass_drift": solution.max_mass_drift,
        "wall_clock_seconds": solution.wall_clock_seconds,
    });
    write_json(&meta_path, &meta("pde", args, &[&traj, &dens], results))?;
    Ok(())
}

fn fig1_cmd(args: &Fig1Args) -> Result<(), CliError> {
    let preset = Fig1Preset {
        delta: args.delta,
        alphas: grid("alpha", &args.alpha)?,
        mus: grid("mu", &args.mu)?,
        n: args.n,
        spikes: args.spikes,
        burn_in: args.burn_in,
        seed: args.seed,
        replicates: args.replicates,
        kernel: Kernel::Exponential { tau: args.kernel_tau },
        weights: args.weight_law.into(),
    };
    let started = std::time::Instant::now();
    let rows = with_pool(args.output.jobs, || fig1_rows(&preset))?.map_err(|e| CliError::Engine(e.to_string()))?;
    let base = prefix(&args.output, "fig1");
    let csv = with_suffix(&base, ".csv");
    let meta_path = with_suffix(&base, ".meta.json");
    let lines: Vec<String> = rows.iter().map(|r| r.csv()).collect();
    write_csv(&csv, &comment("fig1", args), FIG1_HEADER, &lines)?;
    let results = json!({
        "preset": preset,
        "seeds": rows.iter().map(|r| &r.seeds).collect::<Vec<_>>(),
        "replicate_rates": rows.iter().map(|r| &r.rates).collect::<Vec<_>>(),
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
    });
    write_json(&meta_path, &meta("fig1", args, &[&csv], results))?;
    println!("{} rows written to {}", rows.len(), csv.display());
    Ok(())
}

fn fig2_cmd(args: &Fig2Args) -> Result<(), CliError> {
    let preset = Fig2Preset {
        betas: grid("beta", &args.beta)?,
        alphas: grid("alpha", &args.alpha)?,
    };
    let (rows, markers) = engine!(fig2_rows(&preset))?;
    let base = prefix(&args.output, "fig2");
    let csv = with_suffix(&base, ".csv");
    let marks = with_suffix(&base, ".alpha_m.csv");
    let meta_path = with_suffix(&base, ".meta.json");
    let note = comment("fig2", args);
    write_csv(&csv, &note, FIG2_HEADER, &rows.iter().map(|r| r.csv()).collect::<Vec<_>>())?;
    write_csv(&marks, &note, ALPHA_M_HEADER, &markers.iter().map(|m| m.csv()).collect::<Vec<_>>())?;
    write_json(&meta_path, &meta("fig2", args, &[&csv, &marks], json!({ "markers": markers })))?;
    for m in &markers {
        println!("beta {}: alpha_m {}", m.beta, m.alpha_m);
    }
    Ok(())
}

fn check_cmd(args: &CheckArgs) -> Result<(), CliError> {
    let (dir, cleanup) = match &args.scratch {
        Some(d) => (d.clone(), false),
        None => (std::env::temp_dir().join(format!("agehawkes-check-{}", std::process::id())), true),
    };
    std::fs::create_dir_all(&dir)?;
    let outcomes = crate::checks::run_all(&dir);
    for o in &outcomes {
        println!("{}", o.line());
    }
    if cleanup {
        let _ = std::fs::remove_dir_all(&dir);
    }
    match outcomes.iter().filter(|o| !o.passed).count() {
        0 => Ok(()),
        n => Err(CliError::CheckFailed(n)),
    }
}
