//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for configuration, contract and unsupported
//! errors, 3 for numerical failures, 1 for I/O failures while writing.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, ExperimentKind};
use crate::harness::container::{load_batch, load_model, save_batch, save_model};
use crate::harness::experiments::{self, write_results, ResultRow, RESULTS_HEADER, RESULTS_SCHEMA_VERSION};
use crate::envs::{collect_batch, ActionPolicy, Env};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "mffqi", version, about = "Mean-field fitted Q-iteration with kernel mean embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config or run manifest (JSON); the built-in reference config when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config field by dotted path, e.g. `--set fqi.lambda=1e-4`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    pub set: Vec<String>,
    /// Primary output file (results CSV, or the batch container for `collect`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collect a batch of transitions into a container file.
    Collect,
    /// Fit MF-FQI on a batch (collected on the fly unless `--batch` is given).
    Train {
        #[arg(long)]
        batch: Option<PathBuf>,
        #[arg(long, default_value = "model.json")]
        model_out: PathBuf,
    },
    /// Score a saved model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        batch: Option<PathBuf>,
    },
    /// Train on a deterministic chain and compare against exact value iteration.
    OracleCompare {
        #[arg(long)]
        oracle_out: Option<PathBuf>,
    },
    SweepAgents,
    SweepBatch,
    Convergence,
    Concentration,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Collect => "collect",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::OracleCompare { .. } => "oracle-compare",
            Command::SweepAgents => "sweep-agents",
            Command::SweepBatch => "sweep-batch",
            Command::Convergence => "convergence",
            Command::Concentration => "concentration",
        }
    }

    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Collect | Command::Train { .. } | Command::Evaluate { .. } => ExperimentKind::Train,
            Command::OracleCompare { .. } => ExperimentKind::OracleCompare,
            Command::SweepAgents => ExperimentKind::SweepAgents,
            Command::SweepBatch => ExperimentKind::SweepBatch,
            Command::Convergence => ExperimentKind::Convergence,
            Command::Concentration => ExperimentKind::Concentration,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Contract(_) | Error::Unsupported(_) | Error::Json(_) => 2,
        Error::Numerical { .. } => 3,
        Error::Io(_) | Error::Csv(_) => 1,
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn cli_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_manifest(output: &Path, command: &str, cfg: &ExperimentConfig, inputs: Value, outputs: Value) -> Result<()> {
    let manifest = json!({
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "git_describe": git_describe(),
        "seeds": cfg.seed_list(),
        "results_schema_version": RESULTS_SCHEMA_VERSION,
        "results_header": RESULTS_HEADER,
        "inputs": inputs,
        "outputs": outputs,
        "config": cfg,
    });
    let mut f = File::create(manifest_path(output))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn save_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_results(File::create(path)?, rows)
}

fn results_path(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results.csv"))
}

fn execute(cli: &Cli) -> Result<()> {
    let cmd = &cli.command;
    let cfg = ExperimentConfig::load(cli.common.config.as_deref(), cmd.kind(), &cli.common.set)?;
    let name = cmd.name();
    match cmd {
        Command::Collect => {
            let out = cli.common.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| "batch.json".into());
            let seed = cfg.seed_list()[0];
            let env = Env::new(cfg.env.clone())?;
            let batch = collect_batch(&env, cfg.batch_size, ActionPolicy::UniformRandom, seed)?;
            save_batch(&out, &batch, Some(&cfg.env), Some(seed))?;
            write_manifest(&out, name, &cfg, json!({}), json!({ "batch": out }))
        }
        Command::Train { batch, model_out } => {
            let loaded = match batch {
                Some(p) => Some(load_batch(p)?.0),
                None => None,
            };
            let outcome = experiments::train(&cfg, loaded)?;
            save_model(model_out, &outcome.run.model)?;
            let primary = match &cli.common.out {
                Some(p) => {
                    save_rows(p, &outcome.rows)?;
                    p.clone()
                }
                None => model_out.clone(),
            };
            write_manifest(
                &primary,
                name,
                &cfg,
                json!({ "batch": batch }),
                json!({ "model": model_out, "results": cli.common.out }),
            )
        }
        Command::Evaluate { model, batch } => {
            let q = load_model(model)?;
            let b = match batch {
                Some(p) => Some(load_batch(p)?.0),
                None => None,
            };
            let rows = experiments::evaluate(&cfg, &q, b.as_ref())?;
            let out = results_path(cli, &cfg);
            save_rows(&out, &rows)?;
            write_manifest(&out, name, &cfg, json!({ "model": model, "batch": batch }), json!({ "results": out }))
        }
        Command::OracleCompare { oracle_out } => {
            let outcome = experiments::oracle_compare(&cfg)?;
            let out = results_path(cli, &cfg);
            save_rows(&out, &outcome.rows)?;
            if let Some(p) = oracle_out {
                outcome.oracle.write_csv(File::create(p)?)?;
            }
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for (seed, report) in &outcome.reports {
                let mut v = serde_json::to_value(report)?;
                v["seed"] = json!(seed);
                v["q_max"] = json!(outcome.oracle.q_max());
                writeln!(lock, "{v}")?;
            }
            write_manifest(&out, name, &cfg, json!({}), json!({ "results": out, "oracle": oracle_out }))
        }
        Command::SweepAgents | Command::SweepBatch | Command::Convergence | Command::Concentration => {
            let rows = match cmd {
                Command::SweepAgents => experiments::sweep_agents(&cfg)?,
                Command::SweepBatch => experiments::sweep_batch(&cfg)?,
                Command::Convergence => experiments::convergence_curve(&cfg)?,
                _ => experiments::concentration_curve(&cfg)?,
            };
            let out = results_path(cli, &cfg);
            save_rows(&out, &rows)?;
            write_manifest(&out, name, &cfg, json!({}), json!({ "results": out }))
        }
    }
}
