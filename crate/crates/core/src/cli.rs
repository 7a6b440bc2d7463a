//! Command-line front end: `generate`, `run` and `report`.
//!
//! Exit codes: 0 success, 1 partial failure (some scenarios failed, or an
//! output could not be written), 2 usage or validation error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::allocation::{Inclusion, DEFAULT_CARRY_FRACTION};
use crate::corpus::{load_corpus, Corpus, FeatureDim, LoadOptions};
use crate::error::{Error, Result};
use crate::monitor::{MonitorConfig, ScheduleKind};
use crate::orchestrator::{RunSettings, ScenarioConfig, Simulator};
use crate::report::{self, RunStatus, TimingMode};
use crate::splitter::{SplitRatio, SplitStrategy};
use crate::synth::{generate, DriftSpec};
use crate::trainer::{FinetuneMode, LinearLearner, TrainOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ctsim", version, about = "Continuous-training simulator for multilabel text classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus (JSON lines) from a drift spec (TOML).
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the selected scenarios and write their artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Merge the weekly scores of a finished run into weekly_scores.csv.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

/// A scenario chosen by matrix row or spelled out as a tuple.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSelector {
    Row(u32),
    Tuple(ScenarioTuple),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTuple {
    pub split_strategy: SplitStrategy,
    pub finetune_mode: FinetuneMode,
    pub inclusion: Inclusion,
    pub schedule: ScheduleKind,
    /// Report number; defaults to the matching matrix row, or the next free
    /// number above 12.
    #[serde(default)]
    pub number: Option<u32>,
}

fn default_workers() -> usize {
    1
}

fn default_x() -> f64 {
    DEFAULT_CARRY_FRACTION
}

/// `ctsim run` configuration file (TOML). Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// JSON-lines corpus. Exactly one of `corpus` and `drift_spec` is set.
    pub corpus: Option<PathBuf>,
    /// Drift spec to generate the corpus from.
    pub drift_spec: Option<PathBuf>,
    /// Label space for a `corpus` file; inferred from the file when absent.
    pub labels: Option<Vec<String>>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub research_cutoff: NaiveDate,
    pub monitoring_end: NaiveDate,
    pub scenarios: Vec<ScenarioSelector>,
    /// Allow tuples outside the twelve matrix rows.
    #[serde(default)]
    pub free_composition: bool,
    #[serde(default = "default_x")]
    pub x: f64,
    #[serde(default)]
    pub ratio: SplitRatio,
    #[serde(default)]
    pub monitor: MonitorConfig,
    #[serde(default)]
    pub trainer: TrainOptions,
    #[serde(default)]
    pub feature_dim: FeatureDim,
    #[serde(default)]
    pub timing: TimingMode,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.corpus, &mut cfg.drift_spec, &mut cfg.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            x: self.x,
            ratio: self.ratio,
            monitor: self.monitor,
            ..RunSettings::new(self.research_cutoff, self.monitoring_end, self.seed)
        }
    }

    /// Expands the selection into validated scenario configs.
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>> {
        if self.scenarios.is_empty() {
            return Err(Error::InvalidConfig("no scenarios selected".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        let settings = self.settings();
        let mut taken = BTreeSet::new();
        let mut out = Vec::new();
        for sel in &self.scenarios {
            let cfg = match sel {
                ScenarioSelector::Row(n) => ScenarioConfig::table_row(*n, &settings)?,
                ScenarioSelector::Tuple(t) => {
                    let mut cfg = ScenarioConfig::table_row(1, &settings)?;
                    cfg.split_strategy = t.split_strategy;
                    cfg.finetune_mode = t.finetune_mode;
                    cfg.inclusion = t.inclusion;
                    cfg.schedule = t.schedule;
                    cfg.number = match t.number.or_else(|| cfg.table_number()) {
                        Some(n) => n,
                        None => (13..).find(|n| !taken.contains(n)).expect("free number"),
                    };
                    cfg
                }
            };
            cfg.validate(self.free_composition)?;
            if !taken.insert(cfg.number) {
                return Err(Error::InvalidConfig(format!("scenario {} selected twice", cfg.number)));
            }
            out.push(cfg);
        }
        Ok(out)
    }

    fn load_data(&self) -> Result<Corpus> {
        match (&self.corpus, &self.drift_spec) {
            (Some(path), None) => load_corpus(path, &LoadOptions { labels: self.labels.clone() }),
            (None, Some(path)) => Ok(generate(&DriftSpec::load(path)?)?.corpus),
            _ => Err(Error::InvalidConfig("set exactly one of `corpus` and `drift_spec`".into())),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match cli.command {
        Command::Generate { spec, out: path } => cmd_generate(&spec, &path, out, err),
        Command::Run { config, out: dir, seed, workers } => cmd_run(&config, dir, seed, workers, out, err),
        Command::Report { run_dir } => cmd_report(&run_dir, out, err),
    }
}

fn fail(err: &mut dyn Write, code: i32, e: impl std::fmt::Display) -> i32 {
    let _ = writeln!(err, "error: {e}");
    code
}

pub fn cmd_generate(spec_path: &Path, out_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let generated = match DriftSpec::load(spec_path).and_then(|spec| generate(&spec)) {
        Ok(g) => g,
        Err(e) => return fail(err, EXIT_USAGE, e),
    };
    if let Err(e) = generated.corpus.write_jsonl(out_path) {
        return fail(err, EXIT_PARTIAL, e);
    }
    let _ = writeln!(out, "wrote {} documents to {}", generated.corpus.len(), out_path.display());
    EXIT_OK
}

pub fn cmd_run(
    config_path: &Path,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let mut cfg = match RunConfig::load(config_path) {
        Ok(cfg) => cfg,
        Err(e) => return fail(err, EXIT_USAGE, e),
    };
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.workers = workers.unwrap_or(cfg.workers);
    let Some(run_dir) = out_dir.or_else(|| cfg.output_dir.clone()) else {
        return fail(err, EXIT_USAGE, "no output directory: pass --out or set output_dir");
    };
    let scenarios = match cfg.trainer.validate().and_then(|_| cfg.scenarios()) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}\n\nusage: ctsim run --config <FILE> [--out <DIR>] [--seed <N>] [--workers <N>]");
            return EXIT_USAGE;
        }
    };
    let corpus = match cfg.load_data() {
        Ok(c) => c,
        Err(e) => return fail(err, EXIT_USAGE, e),
    };
    let encoded = corpus.encode(cfg.feature_dim);
    let learner = LinearLearner::new(corpus.label_space().len(), cfg.feature_dim, cfg.trainer);
    let sim = match Simulator::new(&corpus, &encoded, &learner) {
        Ok(s) => s,
        Err(e) => return fail(err, EXIT_USAGE, e),
    };
    let results = sim.run_matrix(&scenarios, cfg.workers);
    let status = match report::write_run(&run_dir, &results, cfg.timing) {
        Ok(s) => s,
        Err(e) => return fail(err, EXIT_PARTIAL, e),
    };
    for (scenario, result) in &results {
        match result {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "scenario {:2}: avg monitoring weighted-F1 {:.4}, {} retraining(s)",
                    scenario.number, r.avg_monitoring_performance, r.retraining_count
                );
            }
            Err(e) => {
                let _ = writeln!(err, "scenario {}: failed: {e}", scenario.number);
            }
        }
    }
    let _ = writeln!(out, "wrote {}", run_dir.join(report::SUMMARY_FILE).display());
    if status.failures().next().is_some() {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

pub fn cmd_report(run_dir: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let merge = match report::merge_weekly(run_dir) {
        Ok(m) => m,
        Err(e @ Error::MissingArtifact(_)) => return fail(err, EXIT_USAGE, e),
        Err(e) => return fail(err, EXIT_PARTIAL, e),
    };
    for (n, e) in &merge.failed {
        let _ = writeln!(err, "warning: scenario {n} failed and has no series: {e}");
    }
    let _ = writeln!(
        out,
        "wrote {} weekly rows for {} scenario(s) to {}",
        merge.rows,
        merge.scenarios.len(),
        merge.path.display()
    );
    if merge.failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}

/// Status of a finished run directory, for callers that want more than the
/// exit code.
pub fn run_status(run_dir: &Path) -> Result<RunStatus> {
    RunStatus::load(run_dir)
}
