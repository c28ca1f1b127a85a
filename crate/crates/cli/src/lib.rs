//! Command-line front end for the goalfem demos.

pub mod demos;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use goalfem::mesh::{write_msh2, write_svg};
use goalfem::{adapt, AdaptOptions, AdaptiveReport, Outcome};
use serde_json::{json, Value};

pub use demos::Demo;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "goalfem", version, about = "Goal-oriented adaptive finite element demos")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a built-in demo problem.
    Demo(DemoArgs),
}

#[derive(Clone, Debug, Args)]
pub struct DemoArgs {
    /// poisson-smooth, poisson-lshape or nonlinear-poisson.
    pub name: Demo,
    /// Stop once the error estimate is below this.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Dörfler marking fraction in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Polynomial degree, 1 to 3.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=3))]
    pub degree: u64,
    /// Maximum number of meshes.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iter: u64,
    /// Output directory.
    #[arg(long, default_value = "./out")]
    pub out: PathBuf,
    /// Refine uniformly instead of adaptively.
    #[arg(long)]
    pub uniform: bool,
    /// Also write SVG snapshots of every mesh.
    #[arg(long)]
    pub svg: bool,
    /// Accepted for compatibility; all algorithms are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DemoArgs {
    pub fn options(&self) -> Result<AdaptOptions, String> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(format!("--tol must be positive, got {}", self.tol));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("--alpha must lie in (0, 1], got {}", self.alpha));
        }
        Ok(AdaptOptions {
            degree: self.degree as usize,
            tol: self.tol,
            alpha: self.alpha,
            max_iter: self.max_iter as usize,
            uniform: self.uniform,
            ..Default::default()
        })
    }

    fn metadata(&self) -> Value {
        json!({
            "demo": self.name.name(),
            "tol": self.tol,
            "alpha": self.alpha,
            "degree": self.degree,
            "max_iter": self.max_iter,
            "out": self.out.display().to_string(),
            "uniform": self.uniform,
            "svg": self.svg,
            "seed": self.seed,
        })
    }
}

/// Rounds to 12 significant digits.
fn round12(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.11e}").parse().unwrap()
    } else {
        x
    }
}

fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round12).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_numbers),
        Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

/// `report.json`: the flags and every iteration of the report, with floats
/// rounded to 12 significant digits.
pub fn report_json(args: &DemoArgs, report: &AdaptiveReport) -> serde_json::Result<String> {
    let mut v = json!({
        "metadata": args.metadata(),
        "converged": report.converged,
        "iterations": serde_json::to_value(&report.iterations)?,
    });
    round_numbers(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn create(dir: &Path, name: &str) -> goalfem::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Runs a demo, writing meshes, indicators and reports into `args.out`.
pub fn run_demo(args: &DemoArgs) -> Result<Outcome, String> {
    let opts = args.options()?;
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let demo = args.name;
    let outcome = adapt(&demo.problem(), demo.initial_mesh(), &opts, |step| {
        let k = step.record.iter;
        let mut f = create(out, &format!("mesh_{k}.msh2"))?;
        write_msh2(step.mesh, &mut f)?;
        f.flush()?;
        if args.svg {
            let mut f = create(out, &format!("mesh_{k}.svg"))?;
            write_svg(step.mesh, &mut f)?;
            f.flush()?;
        }
        let mut f = create(out, &format!("indicators_{k}.csv"))?;
        step.indicators.write_csv(&mut f)?;
        f.flush()?;
        let r = step.record;
        println!(
            "iter {k:>2}  cells {:>7}  dofs {:>7}  goal {:.11e}  eta_h {:.5e}",
            r.cells, r.dofs, r.goal, r.eta_h
        );
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    let report = &outcome.report;
    let json = report_json(args, report).map_err(|e| e.to_string())?;
    fs::write(out.join("report.json"), json).map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(|e| e.to_string())?;
    fs::write(out.join("report.csv"), csv).map_err(|e| e.to_string())?;
    Ok(outcome)
}

/// Parses `argv` and runs; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_CONVERGED };
            let _ = e.print();
            return code;
        }
    };
    let Command::Demo(args) = cli.command;
    if let Err(msg) = args.options() {
        eprintln!("error: {msg}\n");
        eprintln!("Usage: goalfem demo <NAME> [--tol <TOL>] [--alpha <ALPHA>] [--degree <DEGREE>] [--max-iter <N>] [--out <DIR>] [--uniform] [--svg] [--seed <SEED>]");
        return EXIT_ERROR;
    }
    match run_demo(&args) {
        Ok(outcome) => {
            let last = outcome.report.last().expect("at least one iteration");
            println!("goal  = {:.11e}", last.goal);
            println!("eta_h = {:.11e}", last.eta_h);
            if outcome.report.converged {
                EXIT_CONVERGED
            } else {
                eprintln!("tolerance not reached after {} iterations", outcome.report.iterations.len());
                EXIT_MAX_ITER
            }
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
        assert_eq!(round12(0.0), 0.0);
        let mut v = json!({"a": [1.0 / 7.0, 2], "b": true});
        round_numbers(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[0.142857142857,2],"b":true}"#);
    }

    #[test]
    fn flags_are_validated() {
        assert_eq!(main_with_args(["goalfem", "demo", "nope"]), EXIT_ERROR);
        assert_eq!(main_with_args(["goalfem", "demo", "poisson-smooth", "--degree", "0"]), EXIT_ERROR);
        assert_eq!(main_with_args(["goalfem", "demo", "poisson-smooth", "--alpha", "1.5"]), EXIT_ERROR);
        assert_eq!(main_with_args(["goalfem", "demo", "poisson-smooth", "--tol", "-1"]), EXIT_ERROR);
        assert_eq!(main_with_args(["goalfem", "demo", "poisson-smooth", "--bogus"]), EXIT_ERROR);
        assert_eq!(main_with_args(["goalfem"]), EXIT_ERROR);
    }
}
