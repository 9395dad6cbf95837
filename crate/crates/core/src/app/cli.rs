//! Command-line entry points.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use super::export::export_evolution;
use super::gradcheck::gradcheck;
use super::scenario::{load_scenario, preset, Scenario, PRESETS};
use crate::error::{Error, Result};
use crate::material::{classify_hardening, DamageLaw, DamageModel};
use crate::solver::{check_kkt, run_quasi_static, Algorithm, Evolution};

/// Exit code of runtime failures.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code of command-line usage errors.
pub const EXIT_USAGE: i32 = 2;

/// Gradient tolerance of the `gradcheck` subcommand.
pub const GRADIENT_TOL: f64 = 1e-5;
/// Hessian tolerance of the `gradcheck` subcommand.
pub const HESSIAN_TOL: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "caving", version, about = "Gradient damage simulation of block caving excavation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = true)]
struct Source {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario; values in --config override it.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a quasi-static evolution and export fields and history.
    Run {
        #[command(flatten)]
        source: Source,
        /// Outer algorithm (overrides the scenario).
        #[arg(long)]
        algorithm: Option<Algorithm>,
        /// Relaxation constant of the fast algorithm.
        #[arg(long)]
        cl: Option<f64>,
        /// Output directory (overrides the scenario).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Classify strain hardening and stress softening of a damage model.
    Hardening {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        model: u8,
        /// Exponent of model 3.
        #[arg(long, default_value_t = 4.0)]
        p: f64,
        /// Softening parameter of model 4.
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Check damage derivatives against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
    /// Run both algorithms on one scenario and compare iteration counts.
    Compare {
        #[command(flatten)]
        source: Source,
        /// Output directory for the two history tables (overrides the scenario).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn scenario(source: &Source) -> Result<Scenario> {
    match (&source.config, &source.preset) {
        (Some(path), None) => load_scenario(path),
        (None, Some(name)) => {
            preset(name).ok_or_else(|| Error::Config(format!("unknown preset {name:?}; known presets: {}", PRESETS.join(", "))))
        }
        (Some(path), Some(name)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let quoted = toml::Value::String(name.clone());
            Scenario::from_toml_str(&format!("preset = {quoted}\n{text}"))
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        (None, None) => unreachable!("clap requires a source"),
    }
}

fn max_alpha(alpha: &[f64]) -> f64 {
    alpha.iter().fold(0.0, |m, a| m.max(*a))
}

fn io(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn summarize(out: &mut dyn Write, s: &Scenario, run: &Evolution) -> Result<()> {
    let params = s.material_params()?;
    for (r, h) in run.steps.iter().zip(&run.history.steps) {
        let kkt = check_kkt(&r.mesh, &r.state.u, &r.state.alpha, &r.lower, &params, s.solver.tol_kkt)?;
        writeln!(
            out,
            "step {:>3}: nodes {:>6}  outer {:>4}  blends {:>5}  converged {:<5}  kkt {:<4}  max alpha {:.6}",
            h.step,
            r.mesh.node_count(),
            h.iterations(),
            h.total_blends(),
            h.converged,
            if kkt.passed() { "ok" } else { "FAIL" },
            max_alpha(&r.state.alpha),
        )
        .map_err(io)?;
    }
    Ok(())
}

fn run_command(out: &mut dyn Write, mut s: Scenario, algorithm: Option<Algorithm>, cl: Option<f64>, output: Option<PathBuf>) -> Result<()> {
    if let Some(a) = algorithm {
        s.solver.algorithm = a;
    }
    if let Some(c) = cl {
        s.solver.c_l = c;
    }
    if let Some(o) = output {
        s.output_dir = o;
    }
    s.validate()?;
    let program = s.program()?;
    let steps = program.loading.steps();
    let clock = Instant::now();
    let run = match run_quasi_static(&program, &s.solver_config()) {
        Ok(run) => run,
        Err(failure) => {
            // keep what was computed before reporting the failure
            export_evolution(&failure.partial, steps, &s.output_dir, "history.csv")?;
            return Err(failure.error);
        }
    };
    let files = export_evolution(&run, steps, &s.output_dir, "history.csv")?;
    summarize(out, &s, &run)?;
    writeln!(
        out,
        "algorithm {}: {} steps, {} outer iterations, {} blends, {:.2} s; wrote {} field files and history.csv to {}",
        s.solver.algorithm,
        run.steps.len(),
        run.history.total_iterations(),
        run.history.total_blends(),
        clock.elapsed().as_secs_f64(),
        files.len(),
        s.output_dir.display()
    )
    .map_err(io)
}

fn compare_command(out: &mut dyn Write, mut s: Scenario, output: Option<PathBuf>) -> Result<()> {
    if let Some(o) = output {
        s.output_dir = o;
    }
    s.validate()?;
    let program = s.program()?;
    let mut totals = Vec::new();
    for algorithm in [Algorithm::Alternate, Algorithm::Fast] {
        let cfg = crate::solver::SolverConfig {
            algorithm,
            ..s.solver_config()
        };
        let clock = Instant::now();
        let run = run_quasi_static(&program, &cfg).map_err(|f| f.error)?;
        let seconds = clock.elapsed().as_secs_f64();
        super::export::export_history(&run.history, s.output_dir.join(format!("history_{algorithm}.csv")))?;
        let h = &run.history;
        writeln!(
            out,
            "{algorithm:<9}  outer iterations {:>6}  nonmonotone {:>4}  blends {:>6}  unconverged steps {:>3}  time {:.2} s",
            h.total_iterations(),
            h.nonmonotone_steps(),
            h.total_blends(),
            h.steps.iter().filter(|st| !st.converged).count(),
            seconds
        )
        .map_err(io)?;
        totals.push((h.total_iterations(), seconds));
    }
    let (alt, fast) = (totals[0], totals[1]);
    writeln!(
        out,
        "speedup: {:.3} in outer iterations, {:.3} in time",
        alt.0 as f64 / fast.0 as f64,
        alt.1 / fast.1.max(f64::MIN_POSITIVE)
    )
    .map_err(io)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Run {
            source,
            algorithm,
            cl,
            output,
        } => run_command(out, scenario(&source)?, algorithm, cl, output),
        Command::Hardening { model, p, k, samples } => {
            let model = match model {
                1 => DamageModel::Model1,
                2 => DamageModel::Model2,
                3 => DamageModel::Model3 { p },
                _ => DamageModel::Model4 { k },
            };
            // both sign functions are linear in the dissipation scale
            let report = classify_hardening(&DamageLaw::new(model, 1.0)?, samples)?;
            writeln!(out, "{report}").map_err(io)
        }
        Command::Gradcheck { seed, cases } => {
            let report = gradcheck(seed, cases)?;
            writeln!(out, "{report}").map_err(io)?;
            if report.passed(GRADIENT_TOL, HESSIAN_TOL) {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "derivative check failed (tolerances {GRADIENT_TOL:e} gradient, {HESSIAN_TOL:e} hessian)"
                )))
            }
        }
        Command::Compare { source, output } => compare_command(out, scenario(&source)?, output),
    }
}

/// Run the command line `args` (program name first); returns the exit code.
/// Failures print one line starting with `error: ` to `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return if code == 0 { 0 } else { EXIT_USAGE };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let line = e.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
            let _ = writeln!(err, "error: {line}");
            EXIT_FAILURE
        }
    }
}
