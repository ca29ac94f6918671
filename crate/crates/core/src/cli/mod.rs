//! Command-line front end. [`run`] parses arguments, executes one command and
//! returns the process exit code: 0 on success, 2 for usage and data errors,
//! 3 for internal errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write as _;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{load_csv, Schema};
use crate::domain::{check, fit_ranges, RuleSet};
use crate::metrics::{evaluate, json, EvalOptions, NormalizationMode, QualityReport, ReportInputs};
use crate::plots::{figure_file_name, report_figures, ScatterOptions};
use crate::rank::{
    compare_rankings, improvement_table, improvements_to_csv, metric_rankings, rank_models, rankings_to_csv,
};
use crate::refsynth::{self, Method};
use crate::tuner::{self, Best, ExternalSynthCommand, Journal, SearchSpace, Study, StudyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "synthqa", version, about = "Fidelity evaluation, validation, ranking and tuning for synthetic tabular data")]
pub struct Cli {
    /// Worker threads for metric and plot computation (default: all cores).
    #[arg(long, global = true, env = "SYNTHQA_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the quality report of a synthetic dataset.
    Evaluate(EvaluateArgs),
    /// Render the figures of an existing report.
    Plot(PlotArgs),
    /// Check domain rules on a dataset.
    Validate(ValidateArgs),
    /// Tune an external synthesizer command.
    Tune(TuneArgs),
    /// Rank models from quality reports.
    Rank(RankArgs),
    /// Reference samplers, usable as an external synthesizer.
    Refsynth(RefsynthArgs),
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Real data CSV.
    #[arg(long)]
    pub real: PathBuf,
    /// Synthetic data CSV.
    #[arg(long)]
    pub synth: PathBuf,
    /// Schema JSON.
    #[arg(long)]
    pub schema: PathBuf,
    /// Output report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write SVG figures into this directory.
    #[arg(long)]
    pub plots: Option<PathBuf>,
    /// MAE normalization: point-mean or variable-l1.
    #[arg(long, default_value = "point-mean")]
    pub mode: NormalizationMode,
    /// Equal-width bins per numerical column.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub bins: u32,
    /// Dataset identifier (default: real file stem).
    #[arg(long)]
    pub dataset_id: Option<String>,
    /// Model identifier (default: synthetic file stem).
    #[arg(long)]
    pub model_id: Option<String>,
    /// Draw scatter plots on log-log axes.
    #[arg(long)]
    pub log_scale: bool,
    /// Seed for scatter subsampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Report JSON written by `evaluate`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub log_scale: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Dataset to check.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Rule file (default: the shipped sex/ICD-10 exclusion rules).
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Fit unbounded range rules from this real CSV.
    #[arg(long)]
    pub fit_ranges_from: Option<PathBuf>,
    /// Real CSV for level cardinalities (default: --fit-ranges-from, else --data).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Output JSON; a CSV table is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Search space JSON.
    #[arg(long)]
    pub space: PathBuf,
    /// Study config JSON (budget, timeouts, seed, objectives).
    #[arg(long)]
    pub study: Option<PathBuf>,
    /// Synthesizer command line; `train ...` / `synth ...` are appended.
    #[arg(long)]
    pub command: String,
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Completed trials to run (overrides the study file).
    #[arg(long)]
    pub budget: Option<u64>,
    /// Train phase timeout in seconds.
    #[arg(long)]
    pub train_timeout: Option<f64>,
    /// Synth phase timeout in seconds.
    #[arg(long)]
    pub synth_timeout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trial journal (JSON Lines); an existing journal is resumed.
    #[arg(long)]
    pub journal: PathBuf,
    /// Root for per-trial work directories (default: next to the journal).
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// Rows to synthesize per trial (default: real row count).
    #[arg(long)]
    pub n_synth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Report files or glob patterns.
    #[arg(long, num_args = 1.., required = true)]
    pub reports: Vec<String>,
    /// Reports under default hyperparameters, for the improvement table.
    #[arg(long, num_args = 1..)]
    pub defaults: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RefsynthArgs {
    #[arg(long, default_value = "bootstrap")]
    pub method: Method,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub phase: RefsynthPhase,
}

#[derive(Debug, Subcommand)]
pub enum RefsynthPhase {
    /// Record the sampler configuration in a work directory.
    Train {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        workdir: PathBuf,
    },
    /// Sample from a trained work directory.
    Synth {
        #[arg(long)]
        workdir: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample directly from a real CSV.
    Sample {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failure reported to the user with exit code 2.
#[derive(Debug)]
pub struct CliError(pub String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn write_file(path: &Path, contents: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

fn write_figures(report: &QualityReport, real: &crate::dataset::TableData, synth: &crate::dataset::TableData, dir: &Path, opts: ScatterOptions) -> CliResult {
    let title = format!("{} / {}", report.dataset_id, report.model_id);
    for (name, svg) in report_figures(real, synth, &title, opts)? {
        write_file(&dir.join(figure_file_name(&report.dataset_id, &report.model_id, name)), &svg)?;
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult {
    let schema = Schema::load(&a.schema)?;
    let real = load_csv(&a.real, &schema)?;
    let synth = load_csv(&a.synth, &schema)?;
    let dataset_id = a.dataset_id.unwrap_or_else(|| stem(&a.real));
    let model_id = a.model_id.unwrap_or_else(|| stem(&a.synth));
    let opts = EvalOptions {
        mode: a.mode,
        bins: a.bins,
    };
    let mut report = evaluate(&real, &synth, &dataset_id, &model_id, opts)?;
    report.inputs = Some(ReportInputs {
        real: a.real.clone(),
        synth: a.synth.clone(),
        schema: a.schema.clone(),
    });
    write_file(&a.out, &json::to_string(&report)?)?;
    if let Some(dir) = &a.plots {
        let scatter = ScatterOptions {
            log_scale: a.log_scale,
            seed: a.seed,
            ..ScatterOptions::default()
        };
        write_figures(&report, &real, &synth, dir, scatter)?;
    }
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.report).map_err(|e| CliError(format!("{}: {e}", a.report.display())))?;
    let report: QualityReport = serde_json::from_str(&text).map_err(|e| CliError(format!("{}: {e}", a.report.display())))?;
    let inputs = report
        .inputs
        .clone()
        .ok_or_else(|| CliError(format!("{}: report does not record its input files", a.report.display())))?;
    let schema = Schema::load(&inputs.schema)?;
    let real = load_csv(&inputs.real, &schema)?;
    let synth = load_csv(&inputs.synth, &schema)?;
    let scatter = ScatterOptions {
        log_scale: a.log_scale,
        seed: a.seed,
        ..ScatterOptions::default()
    };
    write_figures(&report, &real, &synth, &a.out_dir, scatter)
}

fn cmd_validate(a: ValidateArgs) -> CliResult {
    let schema = Schema::load(&a.schema)?;
    let data = load_csv(&a.data, &schema)?;
    let mut rules = match &a.rules {
        Some(p) => RuleSet::load(p).map_err(|e| CliError(format!("{}: {e}", p.display())))?,
        None => RuleSet::shipped_sex_icd(),
    };
    let fit_source = a.fit_ranges_from.as_ref().map(|p| load_csv(p, &schema)).transpose()?;
    if let Some(real) = &fit_source {
        rules = fit_ranges(&rules, real)?;
    }
    let reference = match &a.reference {
        Some(p) => Some(load_csv(p, &schema)?),
        None => fit_source,
    };
    let report = check(&rules, &data, reference.as_ref())?;
    write_file(&a.out, &json::to_string(&report)?)?;
    write_file(&a.out.with_extension("csv"), &report.to_csv())
}

fn strata_runs(space: &SearchSpace, journal: &Path) -> Vec<(Option<String>, SearchSpace, PathBuf)> {
    if space.strata.is_empty() {
        return vec![(None, space.clone(), journal.to_path_buf())];
    }
    let ext = journal.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "jsonl".into());
    space
        .strata
        .iter()
        .map(|s| {
            let path = journal.with_extension(format!("{}.{ext}", s.name));
            (Some(s.name.clone()), space.with_stratum(s), path)
        })
        .collect()
}

fn cmd_tune(a: TuneArgs) -> CliResult {
    let space = SearchSpace::load(&a.space)?;
    let mut config = match &a.study {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<StudyConfig>(&text).map_err(|e| CliError(format!("{}: {e}", p.display())))?
        }
        None => StudyConfig {
            budget: 0,
            train_timeout: 3600.0,
            synth_timeout: 3600.0,
            seed: 0,
            objectives: None,
            n_synth: None,
            sampler: Default::default(),
            max_consecutive_failures: None,
        },
    };
    if let Some(b) = a.budget {
        config.budget = b;
    }
    if let Some(t) = a.train_timeout {
        config.train_timeout = t;
    }
    if let Some(t) = a.synth_timeout {
        config.synth_timeout = t;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.n_synth {
        config.n_synth = Some(n);
    }
    let command = shlex::split(&a.command)
        .filter(|c| !c.is_empty())
        .ok_or_else(|| CliError(format!("cannot parse command `{}`", a.command)))?;
    let workroot = a.workdir.clone().unwrap_or_else(|| {
        let parent = a.journal.parent().unwrap_or(Path::new("."));
        parent.join(format!("{}_trials", stem(&a.journal)))
    });

    let mut summary = serde_json::Map::new();
    for (stratum, space, journal_path) in strata_runs(&space, &a.journal) {
        let root = match &stratum {
            Some(s) => workroot.join(s),
            None => workroot.clone(),
        };
        let mut runner = ExternalSynthCommand::new(command.clone(), &a.real, &a.schema, &root)?;
        if let Some(n) = config.n_synth {
            runner.n_synth = n;
        }
        let mut study = Study::from_config(space, &config, runner.schema())?;
        let (mut journal, prior) = Journal::open(&journal_path)?;
        study.trials = prior;
        tuner::optimize(&mut study, &mut runner, Some(&mut journal))?;
        let best = match tuner::best(&study)? {
            Best::Single(t) => serde_json::to_value(t)?,
            Best::Front(ts) => serde_json::to_value(ts)?,
        };
        let mut entry = serde_json::Map::new();
        entry.insert("journal".into(), journal_path.to_string_lossy().into_owned().into());
        entry.insert("objectives".into(), serde_json::to_value(&study.objectives)?);
        entry.insert("completed".into(), study.n_completed().into());
        entry.insert("failed".into(), (study.trials.len() as u64 - study.n_completed()).into());
        entry.insert("best".into(), best);
        summary.insert(stratum.unwrap_or_else(|| "default".into()), entry.into());
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in patterns {
        let mut matched: Vec<PathBuf> = glob::glob(p)?.collect::<Result<_, _>>()?;
        if matched.is_empty() && Path::new(p).exists() {
            matched.push(PathBuf::from(p));
        }
        matched.sort();
        out.extend(matched);
    }
    out.dedup();
    Ok(out)
}

fn load_reports(patterns: &[String]) -> Result<Vec<QualityReport>, CliError> {
    expand(patterns)?
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| CliError(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn cmd_rank(a: RankArgs) -> CliResult {
    let reports = load_reports(&a.reports)?;
    if reports.is_empty() {
        return Err(CliError("no reports matched".into()));
    }
    let mut by_dataset: BTreeMap<String, Vec<QualityReport>> = BTreeMap::new();
    for r in &reports {
        by_dataset.entry(r.dataset_id.clone()).or_default().push(r.clone());
    }
    let mut rankings = Vec::new();
    let mut comparisons = BTreeMap::new();
    for (dataset, group) in &by_dataset {
        rankings.push(rank_models(group)?);
        let cmp = compare_rankings(&metric_rankings(group)?)?;
        write_file(&a.out.join(format!("{dataset}_orders.csv")), &cmp.orders_csv())?;
        write_file(&a.out.join(format!("{dataset}_tau.csv")), &cmp.tau_csv())?;
        comparisons.insert(dataset.clone(), cmp);
    }
    write_file(&a.out.join("ranking.csv"), &rankings_to_csv(&rankings))?;
    write_file(&a.out.join("ranking.json"), &json::to_string(&rankings)?)?;
    write_file(&a.out.join("comparison.json"), &json::to_string(&comparisons)?)?;
    if !a.defaults.is_empty() {
        let defaults = load_reports(&a.defaults)?;
        if defaults.is_empty() {
            return Err(CliError("no default reports matched".into()));
        }
        let rows = improvement_table(&defaults, &reports);
        write_file(&a.out.join("improvement.csv"), &improvements_to_csv(&rows))?;
        write_file(&a.out.join("improvement.json"), &json::to_string(&rows)?)?;
    }
    Ok(())
}

fn cmd_refsynth(a: RefsynthArgs) -> CliResult {
    match a.phase {
        RefsynthPhase::Train {
            real,
            schema,
            params,
            workdir,
        } => {
            refsynth::train(a.method, a.seed, &real, &schema, params.as_deref(), &workdir)?;
        }
        RefsynthPhase::Synth { workdir, n, out } => refsynth::synth(&workdir, n, &out)?,
        RefsynthPhase::Sample { real, schema, n, out } => {
            let schema = Schema::load(&schema)?;
            let data = load_csv(&real, &schema)?;
            refsynth::sample(a.method, &data, n, a.seed)?.save_csv(&out)?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError("--threads must be at least 1".into()));
        }
        // Ignore the error when a pool already exists (repeated in-process runs).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Refsynth(a) => cmd_refsynth(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
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
    match std::panic::catch_unwind(AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(CliError(msg))) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(_) => {
            eprintln!("internal error");
            EXIT_INTERNAL
        }
    }
}
