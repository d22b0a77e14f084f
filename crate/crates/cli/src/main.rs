//! `rdcert`: batch driver for simulations, dispersion analysis and decay certificates.
//!
//! Exit codes: 0 all checks passed, 1 usage or configuration error,
//! 2 hypotheses failed or not applicable, 3 envelope or pointwise bound violated.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::{Ctx, Theorem, Verdict};
use config::{Config, ConfigError};

#[derive(Parser)]
#[command(name = "rdcert", version, about = "Decay certificates for reaction-diffusion systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write SVG plots under OUT/plots.
    #[arg(long)]
    plots: bool,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `[certificate] grid_points`.
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured system and record norms and snapshots.
    Simulate(Common),
    /// Dispersion relation, instability band and admissible modes of a 2x2 system.
    AnalyzeDispersion(Common),
    /// Check a certificate against a scalar differential inequality.
    CheckCertificate(Common),
    /// Check hypotheses, simulate and verify the envelope for one setting.
    RunTheorem {
        /// exponential, power, neumann or turing (also 3.1 to 3.4); defaults to `[theorem] name`.
        #[arg(value_parser = parse_theorem)]
        theorem: Option<Theorem>,
        #[command(flatten)]
        common: Common,
    },
    /// Observed space and time orders on a manufactured solution.
    ConvergenceTest(Common),
    /// Measure the interpolation and H2 constants and check the pointwise bound.
    EstimateConstants(Common),
}

fn parse_theorem(s: &str) -> Result<Theorem, String> {
    Theorem::parse(s).ok_or_else(|| format!("unknown theorem `{s}` (expected exponential, power, neumann, turing)"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(v) => ExitCode::from(v.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error_code(&e))
        }
    }
}

fn error_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 1;
    }
    match e.downcast_ref::<rdcert::Error>() {
        Some(rdcert::Error::NotApplicable(_)) => Verdict::HypothesesFailed.code(),
        Some(rdcert::Error::BlowUp { .. }) => Verdict::Violated.code(),
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<Verdict> {
    let (name, common, theorem) = match &cli.command {
        Command::Simulate(c) => ("simulate", c, None),
        Command::AnalyzeDispersion(c) => ("analyze-dispersion", c, None),
        Command::CheckCertificate(c) => ("check-certificate", c, None),
        Command::RunTheorem { theorem, common } => ("run-theorem", common, *theorem),
        Command::ConvergenceTest(c) => ("convergence-test", c, None),
        Command::EstimateConstants(c) => ("estimate-constants", c, None),
    };
    let cfg = Config::load(&common.config)?;
    std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    let ctx = Ctx {
        cfg: &cfg,
        out: &common.out,
        plots: common.plots,
        seed: common.seed,
        grid_points: common.grid_points,
    };
    let verdict = match cli.command {
        Command::Simulate(_) => commands::simulate_cmd(&ctx),
        Command::AnalyzeDispersion(_) => commands::analyze_dispersion_cmd(&ctx),
        Command::CheckCertificate(_) => {
            commands::require_section(&cfg, "certificate")?;
            commands::check_certificate_cmd(&ctx)
        }
        Command::RunTheorem { .. } => commands::run_theorem_cmd(&ctx, theorem),
        Command::ConvergenceTest(_) => commands::convergence_cmd(&ctx),
        Command::EstimateConstants(_) => commands::estimate_constants_cmd(&ctx),
    }?;
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    output::write_json(
        &common.out.join("metadata.json"),
        &json!({
            "command": name,
            "theorem": theorem.map(Theorem::name),
            "config": common.config.display().to_string(),
            "version": env!("CARGO_PKG_VERSION"),
            "created_unix": created,
            "exit_code": verdict.code(),
        }),
    )?;
    Ok(verdict)
}
