//! `phs-kit` command-line front end.
//!
//! Exit codes: 0 pass, 1 check or validation failure, 2 usage or parse
//! error, 3 solver failure.

mod input;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Value};

use crate::dirac::DEFAULT_TOL;
use crate::discretize::{
    damped_oscillator, diffusion_system, oscillator, string_system, DiffusionSpec, ForceLaw, StringSpec,
};
use crate::error::PhsError;
use crate::integrate::{consistent_init, simulate_with_stats, JacobianMode, Scheme, SchemeConfig};
use crate::io::{read_system_file, read_trajectory_file, write_trajectory, SimulationDefaults, SystemFileV1};
use crate::system::{PhsSystem, PortSignal};
use crate::verify::{energy_report, strong_report, weak_residual};

pub use input::{parse_assignment, parse_signal};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "phs-kit", version, about = "Port-Hamiltonian systems: validate, simulate, certify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    #[value(name = "implicit_midpoint", alias = "implicit-midpoint")]
    ImplicitMidpoint,
    #[value(name = "discrete_gradient", alias = "discrete-gradient")]
    DiscreteGradient,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::ImplicitMidpoint => Scheme::ImplicitMidpoint,
            SchemeArg::DiscreteGradient => Scheme::DiscreteGradient,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum JacobianArg {
    #[value(name = "finite_difference", alias = "finite-difference")]
    FiniteDifference,
    #[value(name = "user_supplied", alias = "user-supplied")]
    UserSupplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Weak,
    Strong,
    Energy,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExampleName {
    Oscillator,
    #[value(name = "damped_oscillator", alias = "damped-oscillator")]
    DampedOscillator,
    String,
    Diffusion,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ForceArg {
    Linear,
    Tanh,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the Dirac and passivity conditions of a system file.
    Validate {
        system: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Simulate a system and write the trajectory as CSV.
    Simulate {
        system: PathBuf,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        t0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        dt: Option<f64>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        /// Port input `<channel>=<expr>`; repeatable.
        #[arg(long = "input")]
        inputs: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        newton_tol: f64,
        #[arg(long, default_value_t = 50)]
        newton_max_iter: usize,
        #[arg(long, value_enum, default_value = "finite_difference")]
        jacobian: JacobianArg,
    },
    /// Certify a trajectory against a system.
    Check {
        system: PathBuf,
        trajectory: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        mode: Mode,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Emit a built-in example system file.
    Example {
        #[arg(value_enum)]
        name: ExampleName,
        #[arg(long = "N", alias = "n", default_value_t = 16)]
        n: usize,
        #[arg(long, value_enum, default_value = "linear")]
        force: ForceArg,
        /// Damping coefficient of the damped oscillator.
        #[arg(long, default_value_t = 1.0)]
        damping: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<PhsError> for Failure {
    fn from(e: PhsError) -> Self {
        let code = match e {
            PhsError::Validation(_) => EXIT_FAIL,
            PhsError::Newton { .. } | PhsError::Inconsistent { .. } | PhsError::Domain(_) => EXIT_SOLVER,
            _ => EXIT_USAGE,
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = std::result::Result<i32, Failure>;

fn configure_threads() {
    if let Some(n) = std::env::var("PHS_KIT_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // a pool may already exist when embedded; that is fine
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Validate { system, tol } => cmd_validate(&system, tol),
        Command::Simulate {
            system,
            x0,
            t0,
            t1,
            dt,
            scheme,
            inputs,
            out,
            newton_tol,
            newton_max_iter,
            jacobian,
        } => {
            let overrides = SimulationDefaults {
                x0,
                t0,
                t1,
                dt,
                scheme: scheme.map(Scheme::from),
                inputs: None,
            };
            let jacobian = match jacobian {
                JacobianArg::FiniteDifference => JacobianMode::FiniteDifference,
                JacobianArg::UserSupplied => JacobianMode::UserSupplied,
            };
            cmd_simulate(&system, overrides, &inputs, out.as_deref(), newton_tol, newton_max_iter, jacobian)
        }
        Command::Check {
            system,
            trajectory,
            mode,
            tol,
        } => cmd_check(&system, &trajectory, mode, tol),
        Command::Example {
            name,
            n,
            force,
            damping,
            out,
        } => cmd_example(name, n, force, damping, out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn print_json(v: &Value) -> std::result::Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(v).expect("report serializes"))
        .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))
}

fn cmd_validate(path: &std::path::Path, tol: f64) -> CmdResult {
    let file = read_system_file(path)?;
    let parts = file.parts()?;
    let report = parts.report(tol)?;
    let passed = report.dirac.passed && report.resistive.passed;
    print_json(&json!({
        "passed": passed,
        "dims": file.dims,
        "tolerance": tol,
        "dirac": report.dirac,
        "resistive": report.resistive,
    }))?;
    Ok(if passed { EXIT_OK } else { EXIT_FAIL })
}

fn load_system(path: &std::path::Path) -> std::result::Result<(SystemFileV1, PhsSystem), Failure> {
    let file = read_system_file(path)?;
    let sys = file.to_system()?;
    Ok((file, sys))
}

fn cmd_simulate(
    path: &std::path::Path,
    overrides: SimulationDefaults,
    inputs: &[String],
    out: Option<&std::path::Path>,
    newton_tol: f64,
    newton_max_iter: usize,
    jacobian: JacobianMode,
) -> CmdResult {
    let (file, sys) = load_system(path)?;
    let defaults = file.defaults()?;
    let dims = sys.dims();
    let x0 = overrides
        .x0
        .or(defaults.x0)
        .ok_or_else(|| Failure::new(EXIT_USAGE, "no initial state: pass --x0 or set metadata.x0"))?;
    if x0.len() != dims.n_s {
        return Err(Failure::new(EXIT_USAGE, format!("--x0 has {} entries, n_s = {}", x0.len(), dims.n_s)));
    }
    let t0 = overrides.t0.or(defaults.t0).unwrap_or(0.0);
    let t1 = overrides
        .t1
        .or(defaults.t1)
        .ok_or_else(|| Failure::new(EXIT_USAGE, "no final time: pass --t1 or set metadata.t1"))?;
    let dt = overrides
        .dt
        .or(defaults.dt)
        .ok_or_else(|| Failure::new(EXIT_USAGE, "no step: pass --dt or set metadata.dt"))?;
    if !(dt > 0.0) {
        return Err(Failure::new(EXIT_USAGE, format!("--dt must be positive, got {dt}")));
    }
    if !(t1 > t0) {
        return Err(Failure::new(EXIT_USAGE, format!("empty time span [{t0}, {t1}]")));
    }
    let scheme = overrides.scheme.or(defaults.scheme).unwrap_or(Scheme::ImplicitMidpoint);

    let mut signal = PortSignal::zeros(dims.n_p);
    if let Some(exprs) = &defaults.inputs {
        for (ch, e) in exprs.iter().enumerate().take(dims.n_p) {
            signal.set(ch, parse_signal(e).map(|f| move |t| f(t))?);
        }
    }
    for a in inputs {
        let (ch, e) = parse_assignment(a)?;
        if ch >= dims.n_p {
            return Err(Failure::new(EXIT_USAGE, format!("input channel {ch} out of range (n_p = {})", dims.n_p)));
        }
        let f = parse_signal(&e)?;
        signal.set(ch, move |t| f(t));
    }

    let cfg = SchemeConfig {
        scheme,
        dt,
        newton_tol,
        newton_max_iter,
        jacobian,
    };
    cfg.validate()?;
    let init = consistent_init(&sys, &DVector::from_vec(x0), &signal.eval(t0), newton_tol)?;
    let (traj, stats) = simulate_with_stats(&sys, &init.x0, &signal, (t0, t1), cfg)?;
    match out {
        Some(p) => crate::io::write_trajectory_file(p, &traj)?,
        None => write_trajectory(std::io::stdout().lock(), &traj)?,
    }
    eprintln!(
        "{}",
        json!({
            "steps": stats.steps,
            "dt": traj.dt(),
            "newton_iterations": stats.newton_iterations,
            "jacobian_evaluations": stats.jacobian_evaluations,
            "max_newton_residual": stats.max_residual,
            "initial_jacobian_condition": stats.initial_condition_number,
            "consistent_init_distance": init.distance,
        })
    );
    Ok(EXIT_OK)
}

fn cmd_check(sys_path: &std::path::Path, traj_path: &std::path::Path, mode: Mode, tol: f64) -> CmdResult {
    let (_, sys) = load_system(sys_path)?;
    let traj = read_trajectory_file(traj_path)?;
    traj.check_dims(sys.dims())?;
    let mut report = serde_json::Map::new();
    report.insert("mode".into(), json!(format!("{mode:?}").to_lowercase()));
    report.insert("tolerance".into(), json!(tol));
    let mut passed = true;
    if matches!(mode, Mode::Weak | Mode::All) {
        let w = weak_residual(&sys, &traj)?;
        let ok = w.max_residual <= tol;
        passed &= ok;
        let mut v = serde_json::to_value(&w).expect("report serializes");
        v["passed"] = json!(ok);
        report.insert("weak".into(), v);
    }
    if matches!(mode, Mode::Strong | Mode::All) {
        let s = strong_report(&sys, &traj)?;
        let ok = s.passes(tol);
        passed &= ok;
        let mut v = serde_json::to_value(&s).expect("report serializes");
        v["passed"] = json!(ok);
        report.insert("strong".into(), v);
    }
    if matches!(mode, Mode::Energy | Mode::All) {
        let e = energy_report(&sys, &traj)?;
        let ok = e.passes(tol);
        passed &= ok;
        let mut v = serde_json::to_value(&e).expect("report serializes");
        v["passed"] = json!(ok);
        report.insert("energy".into(), v);
    }
    report.insert("passed".into(), json!(passed));
    print_json(&Value::Object(report))?;
    Ok(if passed { EXIT_OK } else { EXIT_FAIL })
}

/// The built-in example systems with their simulation defaults.
pub fn example_file(name: &str, n: usize, tanh: bool, damping: f64) -> crate::error::Result<SystemFileV1> {
    use std::f64::consts::PI;
    let (sys, meta) = match name {
        "oscillator" => (
            oscillator(),
            json!({"x0": [1.0, 0.0], "t0": 0.0, "t1": 2.0 * PI, "dt": 1e-3, "scheme": "implicit_midpoint"}),
        ),
        "damped_oscillator" => (
            damped_oscillator(damping)?,
            json!({"x0": [1.0, 0.0], "t0": 0.0, "t1": 10.0, "dt": 1e-3, "scheme": "discrete_gradient"}),
        ),
        "string" => {
            let force = if tanh {
                ForceLaw::Tanh { stiffness: 1.0 }
            } else {
                ForceLaw::Linear { stiffness: 1.0 }
            };
            let s = string_system(&StringSpec::new(n, force))?;
            // lowest clamped-clamped mode of the discrete string
            let x0 = s.state(|_| 0.0, |xi| 0.1 * (PI * xi).cos());
            let scheme = if tanh { "discrete_gradient" } else { "implicit_midpoint" };
            (
                s.system,
                json!({"x0": x0.as_slice(), "t0": 0.0, "t1": 1.0, "dt": 1e-3, "scheme": scheme,
                       "inputs": ["0", "0"], "grid": {"a": 0.0, "b": 1.0, "cells": n}}),
            )
        }
        "diffusion" => {
            let d = diffusion_system(&DiffusionSpec::new(n))?;
            let x0 = d.state(|xi| (PI * xi).cos());
            (
                d.system,
                json!({"x0": x0.as_slice(), "t0": 0.0, "t1": 0.1, "dt": 2e-4, "scheme": "implicit_midpoint",
                       "inputs": ["0", "0"], "grid": {"a": 0.0, "b": 1.0, "cells": n}}),
            )
        }
        other => return Err(PhsError::InvalidArgument(format!("unknown example '{other}'"))),
    };
    SystemFileV1::from_system(&sys, meta)
}

fn cmd_example(name: ExampleName, n: usize, force: ForceArg, damping: f64, out: Option<&std::path::Path>) -> CmdResult {
    let key = match name {
        ExampleName::Oscillator => "oscillator",
        ExampleName::DampedOscillator => "damped_oscillator",
        ExampleName::String => "string",
        ExampleName::Diffusion => "diffusion",
    };
    let file = example_file(key, n, matches!(force, ForceArg::Tanh), damping)?;
    match out {
        Some(p) => crate::io::write_system_file(p, &file)?,
        None => {
            use std::io::Write;
            writeln!(std::io::stdout().lock(), "{}", file.to_json()).map_err(PhsError::from)?;
        }
    }
    Ok(EXIT_OK)
}
