//! Command-line orchestration of the stochastic beam verification suites.

pub mod config;
pub mod error;
pub mod output;
pub mod suites;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::{Overrides, RunConfig};
pub use error::CliError;
pub use output::{emit_plot_data, Artifacts, RunManifest};
pub use suites::{RunOptions, Suite};

use output::{SuiteSummary, MANIFEST, TIMINGS};

pub const DEFAULT_OUT: &str = "stobeam-out";

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaList(pub Vec<f64>);

fn parse_lambdas(s: &str) -> Result<LambdaList, String> {
    config::parse_lambda_list(s).map(LambdaList)
}

#[derive(Debug, Parser)]
#[command(name = "stobeam", version, about = "Simulate the stochastic clamped beam and check its estimates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Ensemble size.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Comma-separated λ grid.
    #[arg(long, global = true, value_parser = parse_lambdas)]
    pub lambda: Option<LambdaList>,
    /// Cutoff width.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Also write the first trial of the energy ensemble as CSV.
    #[arg(long, global = true)]
    pub export_trajectory: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one suite or all of them.
    Run {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// λ sweep of the Carleman ratio with plot data.
    Sweep,
    /// Summarise the manifest in the output directory.
    Report,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timings {
    pub seconds: Vec<(String, f64)>,
}

/// Result of one invocation.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub all_pass: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.all_pass {
            0
        } else {
            1
        }
    }
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            trials: self.trials,
            lambdas: self.lambda.as_ref().map(|l| l.0.clone()),
            epsilon: self.epsilon,
        }
    }

    /// Loads the configuration, applies flags and validates the result.
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.run.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn command_label(cli: &Cli) -> String {
    match &cli.command {
        Command::Run { suite } => format!("run {}", suite.name()),
        Command::Sweep => "sweep".into(),
        Command::Report => "report".into(),
    }
}

/// Runs the selected suites; nothing is written unless every suite completes.
pub fn run_suites(cfg: &RunConfig, suite: Suite, opts: RunOptions, command: &str) -> Result<(RunManifest, Artifacts, Timings, Vec<String>), CliError> {
    let hash = cfg.hash();
    let mut artifacts = Artifacts::default();
    let mut summaries = Vec::new();
    let mut timings = Vec::new();
    let mut lines = vec![format!("config {hash}"), format!("seed {}", cfg.run.seed)];
    for s in suite.expand() {
        let start = Instant::now();
        let outcome = suites::run_one(s, cfg, opts)?;
        timings.push((s.name().to_string(), start.elapsed().as_secs_f64()));
        lines.push(format!("{}: {}", s.name(), if outcome.pass { "PASS" } else { "FAIL" }));
        lines.extend(outcome.summary.iter().map(|l| format!("  {l}")));
        summaries.push(SuiteSummary { suite: s.name().to_string(), pass: outcome.pass });
        artifacts.extend(outcome.artifacts);
    }
    finish(cfg, command, summaries, artifacts, Timings { seconds: timings }, lines)
}

fn finish(
    cfg: &RunConfig,
    command: &str,
    suites: Vec<SuiteSummary>,
    mut artifacts: Artifacts,
    timings: Timings,
    lines: Vec<String>,
) -> Result<(RunManifest, Artifacts, Timings, Vec<String>), CliError> {
    artifacts.add("config.toml", cfg.canonical().to_toml().into_bytes());
    let mut summary = lines.join("\n");
    summary.push('\n');
    artifacts.add("summary.txt", summary.into_bytes());
    let all_pass = suites.iter().all(|s| s.pass);
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config_hash: cfg.hash(),
        seed: cfg.run.seed,
        backend: stobeam_core::parallel::backend().to_string(),
        suites,
        all_pass,
        files: artifacts.inventory(),
    };
    Ok((manifest, artifacts, timings, lines))
}

fn write_run(dir: &Path, manifest: &RunManifest, artifacts: &Artifacts, timings: &Timings) -> Result<(), CliError> {
    let mut all = artifacts.clone();
    all.add_json(MANIFEST, manifest);
    all.add_json(TIMINGS, timings);
    all.write_to(dir)
}

/// Reads a manifest written by an earlier run.
pub fn read_manifest(dir: &Path) -> Result<RunManifest, CliError> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Report(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Report(format!("{}: {e}", path.display())))
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = cli.resolve_config()?;
    let dir = out_dir(&cfg);
    let command = command_label(cli);
    match &cli.command {
        Command::Run { suite } => {
            let opts = RunOptions { export_trajectory: cli.export_trajectory };
            let (manifest, artifacts, timings, lines) = run_suites(&cfg, *suite, opts, &command)?;
            write_run(&dir, &manifest, &artifacts, &timings)?;
            Ok(Outcome { all_pass: manifest.all_pass, lines })
        }
        Command::Sweep => {
            let start = Instant::now();
            let (report, artifacts) = suites::sweep(&cfg, &cfg.hash())?;
            let timings = Timings { seconds: vec![("sweep".into(), start.elapsed().as_secs_f64())] };
            let mut lines = vec![format!("config {}", cfg.hash())];
            lines.extend(report.combined.rows.iter().map(|r| format!("λ = {:>6}: ratio {:.6e}", r.lambda, r.ratio)));
            lines.push(format!(
                "sweep λ₀ {:?}, coefficient-positivity λ₀ {:?}",
                report.combined.empirical_lambda0, report.coefficient_lambda0
            ));
            let summaries = vec![SuiteSummary { suite: "sweep".into(), pass: report.pass }];
            let (manifest, artifacts, timings, lines) = finish(&cfg, &command, summaries, artifacts, timings, lines)?;
            write_run(&dir, &manifest, &artifacts, &timings)?;
            Ok(Outcome { all_pass: manifest.all_pass, lines })
        }
        Command::Report => {
            let manifest = read_manifest(&dir)?;
            let mut lines = vec![
                format!("{} {} ({})", manifest.tool, manifest.version, manifest.command),
                format!("config {}", manifest.config_hash),
                format!("seed {}", manifest.seed),
            ];
            for s in &manifest.suites {
                lines.push(format!("{}: {}", s.suite, if s.pass { "PASS" } else { "FAIL" }));
            }
            for f in &manifest.files {
                let path = dir.join(&f.name);
                let ok = std::fs::read(&path).map(|b| output::sha256_hex(&b) == f.sha256).unwrap_or(false);
                lines.push(format!("  {} ({} bytes){}", f.name, f.bytes, if ok { "" } else { " MODIFIED OR MISSING" }));
            }
            Ok(Outcome { all_pass: manifest.all_pass, lines })
        }
    }
}

/// Entry point shared by the binary and the tests; returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
