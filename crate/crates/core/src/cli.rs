//! Command-line front end. Exit codes: 0 success, 1 runtime failure,
//! 2 configuration error, 3 model error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::{
    build_closed_loop, exact_output_peak, relaxed_output_peak, ClosedLoopSystem, HorizonConfig, RelaxedConfig,
};
use crate::error::{Error, Result};
use crate::governor::{double_integrator, ControllerMode};
use crate::metric::{make_directional_matrix, DirectionalWeights};
use crate::sim::{compare_controllers, parse_override, run_scenario, ScenarioConfig, TrajectoryLog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MODEL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "sddm-nav",
    version,
    about = "Safe path following with directional safe zones"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write trajectory.csv and metrics.json.
    Run(RunArgs),
    /// Run a scenario with both controllers and write comparison.json.
    Compare(RunArgs),
    /// Print exact and relaxed output-peak bounds as JSON.
    Bound(BoundArgs),
    /// Check a scenario file without running it.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Controller, overriding the scenario file.
    #[arg(long)]
    pub mode: Option<ControllerMode>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override a setting, e.g. `--set controller.k=2` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write occupancy-grid snapshots as PGM (0 or 1).
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub grid_snapshots: u8,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// JSON system description; without it the planar double integrator is used.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Initial position as `x,y`.
    #[arg(long, default_value = "-2,0", allow_hyphen_values = true)]
    pub x0: String,
    /// Initial velocity as `vx,vy`.
    #[arg(long, default_value = "0,2", allow_hyphen_values = true)]
    pub v0: String,
    /// Governor position as `x,y`.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub goal: String,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = 2.0 * std::f64::consts::SQRT_2)]
    pub zeta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 4.0)]
    pub c2: f64,
    /// Use `Q = I` instead of the directional metric.
    #[arg(long)]
    pub euclidean: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// System file for `bound`: either `a_bar` or all of `a`, `b`, `k`, plus `q` and `s0`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub a_bar: Option<Vec<Vec<f64>>>,
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<Vec<f64>>>,
    pub k: Option<Vec<Vec<f64>>>,
    pub q: Vec<Vec<f64>>,
    pub s0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub eta: f64,
    pub delta: f64,
    /// `δ / η`; `null` when `η = 0`.
    pub ratio: Option<f64>,
    pub argmax_time: Option<f64>,
    pub decay_rate: Option<f64>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) => EXIT_CONFIG,
        Error::NotHurwitz { .. }
        | Error::EigenvaluePairing(..)
        | Error::Dimension(_)
        | Error::BoundUncertain { .. }
        | Error::Numerical(_) => EXIT_MODEL,
        Error::NumericalBlowup { .. } | Error::Planning(_) | Error::SensorPose(..) => EXIT_RUNTIME,
    }
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Config(format!("{name} must be a non-empty rectangular array")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn pair(s: &str, name: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok([a, b]),
            _ => Err(Error::Config(format!("--{name} '{s}' is not two numbers"))),
        },
        _ => Err(Error::Config(format!("--{name} expects x,y, got '{s}'"))),
    }
}

fn system_from_args(args: &BoundArgs) -> Result<(ClosedLoopSystem, DVector<f64>)> {
    if let Some(path) = &args.system {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let spec: SystemSpec =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let q = matrix(&spec.q, "q")?;
        let s0 = DVector::from_vec(spec.s0.clone());
        let sys = match (&spec.a_bar, &spec.a, &spec.b, &spec.k) {
            (Some(ab), None, None, None) => ClosedLoopSystem::from_matrix(matrix(ab, "a_bar")?, &q)?,
            (None, Some(a), Some(b), Some(k)) => {
                build_closed_loop(&matrix(a, "a")?, &matrix(b, "b")?, &matrix(k, "k")?, &q)?
            }
            _ => return Err(Error::Config("give either a_bar or all of a, b, k".into())),
        };
        if s0.len() != sys.state_dim() {
            return Err(Error::Dimension(format!(
                "s0 has {} entries, state has {}",
                s0.len(),
                sys.state_dim()
            )));
        }
        return Ok((sys, s0));
    }
    let x0 = pair(&args.x0, "x0")?;
    let v0 = pair(&args.v0, "v0")?;
    let g = pair(&args.goal, "goal")?;
    if !(args.k > 0.0 && args.zeta > 0.0) {
        return Err(Error::Config("k and zeta must be positive".into()));
    }
    let q = if args.euclidean {
        DMatrix::identity(2, 2)
    } else {
        let w = DirectionalWeights::new(args.c1, args.c2)?;
        make_directional_matrix(&DVector::from_vec(vec![g[0] - x0[0], g[1] - x0[1]]), w).into_matrix()
    };
    let (a, b, k) = double_integrator(args.k, args.zeta, 2);
    let sys = build_closed_loop(&a, &b, &k, &q)?;
    let s0 = DVector::from_vec(vec![x0[0] - g[0], x0[1] - g[1], v0[0], v0[1]]);
    Ok((sys, s0))
}

/// Exact and relaxed bounds for the system described by `args`.
pub fn bound_report(args: &BoundArgs) -> Result<BoundReport> {
    let (sys, s0) = system_from_args(args)?;
    let exact = exact_output_peak(&sys, &s0, HorizonConfig::default())?;
    let (relaxed, _) = relaxed_output_peak(&sys, &s0, RelaxedConfig::default())?;
    Ok(BoundReport {
        eta: exact.value,
        delta: relaxed.value,
        ratio: (exact.value > 0.0).then(|| relaxed.value / exact.value),
        argmax_time: exact.argmax_time,
        decay_rate: relaxed.decay_rate,
    })
}

fn load(args: &RunArgs) -> Result<ScenarioConfig> {
    let overrides = args
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = ScenarioConfig::load(&args.scenario, &overrides)?;
    if let Some(m) = args.mode {
        cfg.controller.mode = m;
    }
    if let Some(s) = args.seed {
        cfg.sim.seed = s;
    }
    Ok(cfg)
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn write_run(dir: &Path, log: &TrajectoryLog) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    write(&dir.join("trajectory.csv"), log.csv_string().as_bytes())?;
    write(&dir.join("metrics.json"), &to_json(&log.metrics))?;
    for (i, snap) in log.snapshots.iter().enumerate() {
        write(&dir.join(format!("grid_{i:04}.pgm")), snap.pgm.as_bytes())?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let cfg = load(args)?;
    let log = run_scenario(&cfg, args.grid_snapshots == 1)?;
    write_run(&args.out, &log)?;
    let m = &log.metrics;
    log::info!("{} [{}]: {:?} after {:.3} s", cfg.name, m.mode, m.status, m.sim_time);
    Ok(if m.status.succeeded() { EXIT_OK } else { EXIT_RUNTIME })
}

fn cmd_compare(args: &RunArgs) -> Result<i32> {
    let cfg = load(args)?;
    let (cmp, sddm, euclid) = compare_controllers(&cfg, args.grid_snapshots == 1)?;
    write_run(&args.out.join("sddm"), &sddm)?;
    write_run(&args.out.join("euclidean"), &euclid)?;
    write(&args.out.join("comparison.json"), &to_json(&cmp))?;
    let ok = cmp.sddm.status.succeeded() && cmp.euclidean.status.succeeded();
    Ok(if ok { EXIT_OK } else { EXIT_RUNTIME })
}

fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let overrides = args
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    let cfg = ScenarioConfig::load(&args.scenario, &overrides)?;
    println!(
        "{}: ok ({} disks, {} segments, {} sensing)",
        args.scenario.display(),
        cfg.disks.len(),
        cfg.segments.len(),
        match cfg.sensor.mode {
            crate::sim::SensorMode::Geometric => "geometric",
            crate::sim::SensorMode::Lidar => "lidar",
        }
    );
    Ok(EXIT_OK)
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Bound(a) => bound_report(a).map(|r| {
            print!("{}", String::from_utf8(to_json(&r)).expect("json is utf-8"));
            EXIT_OK
        }),
        Command::Validate(a) => cmd_validate(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}
