//! Trial execution: the external-synthesizer subprocess contract and an
//! in-process runner for objective functions.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use super::space::Assignment;
use super::{objective_values, Objective, TrialStatus, TunerError};
use crate::dataset::{load_csv, Schema, TableData};
use crate::metrics::{evaluate, EvalOptions};

/// What one trial produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub status: TrialStatus,
    pub objectives: Option<Vec<f64>>,
    pub train_seconds: f64,
    pub synth_seconds: f64,
}

impl TrialOutcome {
    pub fn failed(status: TrialStatus) -> Self {
        TrialOutcome {
            status,
            objectives: None,
            train_seconds: 0.0,
            synth_seconds: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timeouts {
    pub train: Duration,
    pub synth: Duration,
}

impl Default for Timeouts {
    fn default() -> Self {
        Timeouts {
            train: Duration::from_secs(3600),
            synth: Duration::from_secs(3600),
        }
    }
}

/// Everything a runner needs besides the assignment.
pub struct TrialContext<'a> {
    pub trial_id: u64,
    pub objectives: &'a [Objective],
    pub timeouts: Timeouts,
}

pub trait TrialRunner {
    /// Runs one trial. Failures are reported through the outcome, never as panics.
    fn run(&mut self, params: &Assignment, ctx: &TrialContext) -> TrialOutcome;
}

/// Wraps a closure returning objective values or a failure status.
pub struct FnRunner<F>(pub F);

impl<F> TrialRunner for FnRunner<F>
where
    F: FnMut(&Assignment) -> Result<Vec<f64>, TrialStatus>,
{
    fn run(&mut self, params: &Assignment, _ctx: &TrialContext) -> TrialOutcome {
        match (self.0)(params) {
            Ok(v) if v.iter().all(|x| x.is_finite()) => TrialOutcome {
                status: TrialStatus::Completed,
                objectives: Some(v),
                train_seconds: 0.0,
                synth_seconds: 0.0,
            },
            Ok(_) => TrialOutcome::failed(TrialStatus::FailedSynth),
            Err(status) => TrialOutcome::failed(status),
        }
    }
}

enum PhaseResult {
    Exited(ExitStatus),
    TimedOut,
    SpawnFailed,
}

#[cfg(unix)]
fn isolate(cmd: &mut Command) {
    use std::os::unix::process::CommandExt;
    cmd.process_group(0);
}

#[cfg(not(unix))]
fn isolate(_cmd: &mut Command) {}

fn kill_tree(child: &mut Child) {
    // The child leads its own process group; take down any grandchildren too.
    #[cfg(unix)]
    if let Ok(pgid) = libc::pid_t::try_from(child.id()) {
        unsafe {
            libc::killpg(pgid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
    let _ = child.wait();
}

fn run_phase(argv: &[String], log: &Path, timeout: Duration) -> (PhaseResult, f64) {
    let start = Instant::now();
    let (Some(program), Ok(out)) = (argv.first(), File::create(log)) else {
        return (PhaseResult::SpawnFailed, 0.0);
    };
    let Ok(err) = out.try_clone() else {
        return (PhaseResult::SpawnFailed, 0.0);
    };
    let mut cmd = Command::new(program);
    cmd.args(&argv[1..]).stdin(Stdio::null()).stdout(out).stderr(err);
    isolate(&mut cmd);
    let Ok(mut child) = cmd.spawn() else {
        return (PhaseResult::SpawnFailed, start.elapsed().as_secs_f64());
    };
    let mut poll = Duration::from_millis(2);
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return (PhaseResult::Exited(status), start.elapsed().as_secs_f64()),
            Ok(None) => {}
            Err(_) => {
                kill_tree(&mut child);
                return (PhaseResult::SpawnFailed, start.elapsed().as_secs_f64());
            }
        }
        let elapsed = start.elapsed();
        if elapsed >= timeout {
            kill_tree(&mut child);
            return (PhaseResult::TimedOut, start.elapsed().as_secs_f64());
        }
        std::thread::sleep(poll.min(timeout - elapsed));
        poll = (poll * 2).min(Duration::from_millis(50));
    }
}

/// Runs a synthesizer program through the two-phase subprocess contract:
///
/// ```text
/// <command> train --real <csv> --schema <json> --params <json> --workdir <dir>
/// <command> synth --workdir <dir> --n <count> --out <csv>
/// ```
///
/// Each trial gets its own work directory under `workroot`, holding the
/// params file, phase logs and the synthetic output.
pub struct ExternalSynthCommand {
    pub command: Vec<String>,
    pub real_path: PathBuf,
    pub schema_path: PathBuf,
    pub workroot: PathBuf,
    pub n_synth: usize,
    pub eval: EvalOptions,
    pub dataset_id: String,
    schema: Schema,
    real: TableData,
}

impl ExternalSynthCommand {
    pub fn new(command: Vec<String>, real_path: &Path, schema_path: &Path, workroot: &Path) -> Result<Self, TunerError> {
        if command.is_empty() {
            return Err(TunerError::InvalidConfig("empty synthesizer command".into()));
        }
        let schema = Schema::load(schema_path)?;
        let real = load_csv(real_path, &schema)?;
        std::fs::create_dir_all(workroot).map_err(|source| TunerError::Io {
            path: workroot.to_path_buf(),
            source,
        })?;
        let dataset_id = real_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        Ok(ExternalSynthCommand {
            command,
            real_path: real_path.to_path_buf(),
            schema_path: schema_path.to_path_buf(),
            workroot: workroot.to_path_buf(),
            n_synth: real.n_rows,
            eval: EvalOptions::default(),
            dataset_id,
            schema,
            real,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    fn phase_argv(&self, args: &[&str]) -> Vec<String> {
        self.command.iter().cloned().chain(args.iter().map(|s| s.to_string())).collect()
    }
}

impl TrialRunner for ExternalSynthCommand {
    fn run(&mut self, params: &Assignment, ctx: &TrialContext) -> TrialOutcome {
        let workdir = self.workroot.join(format!("trial_{:05}", ctx.trial_id));
        if std::fs::create_dir_all(&workdir).is_err() {
            return TrialOutcome::failed(TrialStatus::FailedTrain);
        }
        let params_path = workdir.join("params.json");
        let params_text = serde_json::to_string_pretty(params).expect("serializable");
        if std::fs::write(&params_path, params_text).is_err() {
            return TrialOutcome::failed(TrialStatus::FailedTrain);
        }
        let path_str = |p: &Path| p.to_string_lossy().into_owned();

        let train = self.phase_argv(&[
            "train",
            "--real",
            &path_str(&self.real_path),
            "--schema",
            &path_str(&self.schema_path),
            "--params",
            &path_str(&params_path),
            "--workdir",
            &path_str(&workdir),
        ]);
        let (result, train_seconds) = run_phase(&train, &workdir.join("train.log"), ctx.timeouts.train);
        let mut outcome = TrialOutcome {
            train_seconds,
            ..TrialOutcome::failed(TrialStatus::FailedTrain)
        };
        match result {
            PhaseResult::Exited(s) if s.success() => {}
            PhaseResult::TimedOut => return TrialOutcome { status: TrialStatus::TimeoutTrain, ..outcome },
            _ => return outcome,
        }

        let out_csv = workdir.join("synth.csv");
        let synth = self.phase_argv(&[
            "synth",
            "--workdir",
            &path_str(&workdir),
            "--n",
            &self.n_synth.to_string(),
            "--out",
            &path_str(&out_csv),
        ]);
        let (result, synth_seconds) = run_phase(&synth, &workdir.join("synth.log"), ctx.timeouts.synth);
        outcome.synth_seconds = synth_seconds;
        outcome.status = TrialStatus::FailedSynth;
        match result {
            PhaseResult::Exited(s) if s.success() => {}
            PhaseResult::TimedOut => return TrialOutcome { status: TrialStatus::TimeoutSynth, ..outcome },
            _ => return outcome,
        }

        let Ok(data) = load_csv(&out_csv, &self.schema) else {
            return outcome;
        };
        let Ok(report) = evaluate(&self.real, &data, &self.dataset_id, "trial", self.eval) else {
            return outcome;
        };
        match objective_values(&report, ctx.objectives) {
            Some(v) => TrialOutcome {
                status: TrialStatus::Completed,
                objectives: Some(v),
                ..outcome
            },
            None => outcome,
        }
    }
}
