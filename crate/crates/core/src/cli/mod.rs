//! Command-line front end: `gen`, `train`, `transfer` and `eval` over a JSON
//! run config with dotted `--set key=value` overrides.

mod commands;
mod config;
mod dataset;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use commands::{cmd_eval, cmd_gen, cmd_train, cmd_transfer, TrainLogEntry};
pub use config::{EvalConfig, GenConfig, RunConfig};
pub use dataset::{DemoEntry, Manifest, PairEntry, PairSpec, DEMO, MANIFEST};

use crate::error::Result;
use crate::synth::Task;

#[derive(Debug, Parser)]
#[command(name = "partwarp", version, about = "Part-wise shape warping for one-shot placement transfer")]
pub struct Cli {
    /// JSON run config; missing keys take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override a config value, e.g. `--set inference.restarts=2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Cap on worker threads (overrides `jobs`).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset: object pairs with specs and clouds, a demonstration, and a manifest.
    Gen {
        /// mug_on_rack, bowl_on_mug or teapot_pour_align.
        #[arg(value_parser = parse_task)]
        task: Task,
        /// Total number of object pairs (training plus test).
        #[arg(long, default_value_t = 12)]
        count: usize,
    },
    /// Train part-wise and whole-object shape models from the dataset's training split.
    Train,
    /// Transfer a demonstrated placement to a novel object pair.
    Transfer {
        /// Demonstration file.
        #[arg(long, value_name = "FILE")]
        demo: PathBuf,
        /// Novel object A (the one that moves).
        #[arg(long, value_name = "FILE")]
        object_a: PathBuf,
        /// Novel object B.
        #[arg(long, value_name = "FILE")]
        object_b: PathBuf,
        /// Result path; defaults to `<output_dir>/transfer.json`.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the paired PSW / whole-object experiment on the dataset's test split.
    Eval,
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

impl Cli {
    /// The run config after the file, the overrides and `--jobs`.
    pub fn run_config(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let mut cfg = base.with_overrides(&self.overrides)?;
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        Ok(cfg)
    }

    pub fn execute(&self) -> Result<()> {
        let cfg = self.run_config()?;
        match &self.command {
            Command::Gen { task, count } => cmd_gen(&cfg, *task, *count).map(|_| ()),
            Command::Train => cmd_train(&cfg).map(|_| ()),
            Command::Transfer {
                demo,
                object_a,
                object_b,
                out,
            } => cmd_transfer(&cfg, demo, object_a, object_b, out.as_deref()).map(|_| ()),
            Command::Eval => cmd_eval(&cfg).map(|_| ()),
        }
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code:
/// 0 success, 1 runtime failure, 2 usage error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
