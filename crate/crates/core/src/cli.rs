//! Command-line front end.
//!
//! Exit codes: 0 when the solve converged, 2 when it stopped on the
//! iteration cap or the certificate horizon (results are still written),
//! 1 on any input or validation error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{self, RandomQpConfig, ScalingConfig, SensitivityConfig};
use crate::certify;
use crate::error::{Error, Result};
use crate::mpc::{self, AngleUnit, DisturbanceConfig};
use crate::outer::{self, DeltaPolicy, Recovery, SolveConfig, Status, Variant};
use crate::problem::{self, QpProblem};
use crate::serde_ext::finite_or_null;

#[derive(Debug, Parser)]
#[command(name = "idfom", version, about = "Inexact dual first-order QP solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a QP read from a JSON file.
    Solve(SolveArgs),
    /// Print the complexity certificate for a QP as JSON.
    Certify(CertifyArgs),
    /// Suboptimality traces for several inner accuracies on one random QP.
    BenchSensitivity(SensitivityArgs),
    /// Outer iteration counts on random QPs of growing dimension.
    BenchScaling(ScalingArgs),
    /// Closed-loop MPC of the balancing robot.
    Mpc(MpcArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Idgm,
    Idfgm,
}

impl From<AlgorithmArg> for Variant {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Idgm => Variant::Idgm,
            AlgorithmArg::Idfgm => Variant::Idfgm,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RecoveryArg {
    Last,
    Average,
}

impl From<RecoveryArg> for Recovery {
    fn from(r: RecoveryArg) -> Self {
        match r {
            RecoveryArg::Last => Recovery::LastIterate,
            RecoveryArg::Average => Recovery::Average,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AngleUnitArg {
    Degrees,
    Radians,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value = "idfgm")]
    pub algorithm: AlgorithmArg,
    #[arg(long, value_enum, default_value = "last")]
    pub recovery: RecoveryArg,
    #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
    pub eps: f64,
    /// Fixed inner accuracy. Overrides the certificate: the outcome is then
    /// governed by the inexactness plateau rather than by eps.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub max_outer: usize,
    /// Dual radius used by the certificate (default max{1, 1/c_g, L_f/c_g}).
    #[arg(long, allow_negative_numbers = true)]
    pub rd: Option<f64>,
}

impl MethodArgs {
    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: format!("must be positive and finite, got {}", self.eps),
            });
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "delta",
                    reason: format!("must be positive and finite, got {d}"),
                });
            }
        }
        if let Some(r) = self.rd {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "rd",
                    reason: format!("must be positive and finite, got {r}"),
                });
            }
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter {
                name: "max-outer",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    fn solve_config(&self) -> Result<SolveConfig> {
        self.validate()?;
        let mut cfg = SolveConfig::new(self.algorithm.into(), self.recovery.into(), self.eps);
        if let Some(d) = self.delta {
            cfg.delta = DeltaPolicy::Fixed(d);
        }
        cfg.max_outer = self.max_outer;
        cfg.rd = self.rd;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Per-iteration CSV trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Also write the result JSON here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long, value_enum, default_value = "idfgm")]
    pub algorithm: AlgorithmArg,
    #[arg(long, value_enum, default_value = "last")]
    pub recovery: RecoveryArg,
    #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
    pub eps: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub rd: Option<f64>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 75)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
    pub eps: f64,
    /// Comma-separated inner accuracies.
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4,1e-5")]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,200,500")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
    pub eps: f64,
    /// First seed; trials use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MpcArgs {
    #[arg(long, value_enum, default_value = "idgm")]
    pub algorithm: AlgorithmArg,
    #[arg(long, value_enum, default_value = "last")]
    pub recovery: RecoveryArg,
    #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
    pub eps: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 10)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    /// Unit of the model's angle state; the 15 degree bound is converted.
    #[arg(long, value_enum, default_value = "degrees")]
    pub angle_unit: AngleUnitArg,
    /// Steps between disturbances, 0 disables them.
    #[arg(long, default_value_t = 20)]
    pub disturbance_period: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SolveOutput<'a> {
    status: &'static str,
    #[serde(serialize_with = "finite_or_null")]
    f: f64,
    #[serde(serialize_with = "finite_or_null")]
    infeas: f64,
    outer_iterations: usize,
    total_inner_iterations: usize,
    u: &'a [f64],
    x: &'a [f64],
}

fn load_problem(path: &Path) -> Result<QpProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    QpProblem::from_json_str(&text)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn status_code(s: Status) -> i32 {
    match s {
        Status::Converged => 0,
        Status::MaxIterations | Status::CertificateHorizonReached => 2,
    }
}

fn run_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = a.method.solve_config()?;
    cfg.record_trace = a.trace.is_some();
    let np = problem::normalize(&load_problem(&a.input)?)?;
    let consts = problem::constants(&np)?;
    let r = outer::solve(&np, &consts, &cfg)?;
    if let Some(path) = &a.trace {
        outer::write_trace_csv(&r.trace, create(path)?)?;
    }
    let json = serde_json::to_string_pretty(&SolveOutput {
        status: r.status.name(),
        f: r.f,
        infeas: r.infeas,
        outer_iterations: r.outer_iterations,
        total_inner_iterations: r.total_inner_iterations,
        u: &r.u_out,
        x: &r.x_out,
    })?;
    writeln!(out, "{json}")?;
    if let Some(path) = &a.output {
        let mut w = create(path)?;
        writeln!(w, "{json}")?;
        w.flush()?;
    }
    Ok(status_code(r.status))
}

fn run_certify(a: &CertifyArgs, out: &mut dyn Write) -> Result<i32> {
    let np = problem::normalize(&load_problem(&a.input)?)?;
    let consts = problem::constants(&np)?;
    let cert = certify::certificate(&consts, a.algorithm.into(), a.recovery.into(), a.eps, a.rd)?;
    let json = serde_json::to_string_pretty(&cert)?;
    writeln!(out, "{json}")?;
    if let Some(path) = &a.output {
        let mut w = create(path)?;
        writeln!(w, "{json}")?;
        w.flush()?;
    }
    Ok(0)
}

fn write_csv_to(path: &Option<PathBuf>, out: &mut dyn Write, f: impl Fn(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(out),
    }
}

fn run_sensitivity(a: &SensitivityArgs, out: &mut dyn Write) -> Result<i32> {
    if a.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "deltas",
            reason: "every inner accuracy must be positive and finite".into(),
        });
    }
    let rows = bench::run_sensitivity(&SensitivityConfig {
        qp: RandomQpConfig::new(a.n, a.p, a.seed),
        eps: a.eps,
        deltas: a.deltas.clone(),
        iterations: a.iterations,
    })?;
    write_csv_to(&a.output, out, |w| bench::write_sensitivity_csv(&rows, w))?;
    Ok(0)
}

fn run_scaling(a: &ScalingArgs, out: &mut dyn Write) -> Result<i32> {
    if !(a.eps > 0.0 && a.eps.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must be positive and finite, got {}", a.eps),
        });
    }
    let mut cfg = ScalingConfig::new(a.dims.clone(), a.trials, a.eps);
    cfg.first_seed = a.seed;
    cfg.max_outer = a.max_outer;
    cfg.jobs = a.jobs;
    let rows = bench::run_scaling(&cfg)?;
    write_csv_to(&a.output, out, |w| bench::write_scaling_csv(&rows, w))?;
    Ok(if rows.iter().all(|r| r.converged) { 0 } else { 2 })
}

fn run_mpc(a: &MpcArgs, out: &mut dyn Write) -> Result<i32> {
    let method = MethodArgs {
        algorithm: a.algorithm,
        recovery: a.recovery,
        eps: a.eps,
        delta: a.delta,
        max_outer: a.max_outer,
        rd: None,
    };
    let cfg = method.solve_config()?;
    let unit = match a.angle_unit {
        AngleUnitArg::Degrees => AngleUnit::Degrees,
        AngleUnitArg::Radians => AngleUnit::Radians,
    };
    let model = mpc::balancing_robot_model();
    let spec = mpc::balancing_robot_spec(a.horizon, a.beta, unit);
    let mut dist = DisturbanceConfig::robot_default();
    dist.period = a.disturbance_period;
    let sim = mpc::simulate_closed_loop(&model, &spec, &[0.0, 0.0, 0.5, -0.35], &cfg, a.steps, &dist)?;
    write_csv_to(&a.output, out, |w| mpc::write_trajectory_csv(&sim, w))?;
    Ok(if sim.steps.iter().all(|s| s.status == Status::Converged) { 0 } else { 2 })
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Solve(a) => run_solve(a, out),
        Command::Certify(a) => run_certify(a, out),
        Command::BenchSensitivity(a) => run_sensitivity(a, out),
        Command::BenchScaling(a) => run_scaling(a, out),
        Command::Mpc(a) => run_mpc(a, out),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
