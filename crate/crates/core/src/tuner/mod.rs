//! Hyperparameter optimization of external synthesizers.
//!
//! The budget counts completed trials only. Failed and timed-out trials are
//! journaled for audit but never reach the sampler: the next suggestion is a
//! pure function of the seed and the completed-trial history, so a run with
//! failures follows exactly the same path as one without.

pub mod adapter;
pub mod journal;
pub mod pareto;
pub mod space;
pub mod tpe;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ColumnKind, DatasetError, Schema};
use crate::metrics::QualityReport;

pub use adapter::{ExternalSynthCommand, FnRunner, Timeouts, TrialContext, TrialOutcome, TrialRunner};
pub use journal::{read_journal, Journal};
pub use space::{Assignment, Param, SearchSpace, Stratum};
pub use tpe::{Observation, Sampler, TpeConfig};

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown objective metric `{0}`")]
    UnknownMetric(String),
    #[error("no completed trials")]
    NoCompletedTrials,
    #[error("giving up after {0} consecutive failed trials")]
    FailureLimit(u64),
    #[error("journal {path}, line {line}: {message}")]
    Journal { path: PathBuf, line: usize, message: String },
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub metric: String,
    pub direction: Direction,
}

impl Objective {
    pub fn new(metric: &str, direction: Direction) -> Self {
        Objective {
            metric: metric.to_string(),
            direction,
        }
    }

    /// Objective value as a loss (maximized objectives are negated).
    pub fn loss(&self, value: f64) -> f64 {
        match self.direction {
            Direction::Minimize => value,
            Direction::Maximize => -value,
        }
    }
}

pub const METRICS: [&str; 10] = [
    "mae1",
    "mae2",
    "coverage1",
    "coverage2",
    "invented1",
    "invented2",
    "hist_iou1",
    "hist_iou2",
    "jsd1",
    "jsd2",
];

/// Reads a named metric from a report; `None` for an unknown name.
pub fn metric_value(report: &QualityReport, metric: &str) -> Option<Option<f64>> {
    Some(match metric {
        "mae1" => report.mae1,
        "mae2" => report.mae2,
        "coverage1" => report.coverage1,
        "coverage2" => report.coverage2,
        "invented1" => report.invented1,
        "invented2" => report.invented2,
        "hist_iou1" => report.hist_iou1,
        "hist_iou2" => report.hist_iou2,
        "jsd1" => report.jsd1,
        "jsd2" => report.jsd2,
        _ => return None,
    })
}

/// All objective values, or `None` if any is undefined or non-finite.
pub fn objective_values(report: &QualityReport, objectives: &[Objective]) -> Option<Vec<f64>> {
    objectives
        .iter()
        .map(|o| metric_value(report, &o.metric).flatten().filter(|v| v.is_finite()))
        .collect()
}

/// Objectives by column mix: categorical columns are tuned on MAE2
/// (minimized), numerical columns on Hist_IoU2 (maximized), both together as
/// a two-objective study. With a single column of a kind the degree-1
/// variant is used.
pub fn default_objectives(schema: &Schema) -> Vec<Objective> {
    let n_cat = schema.indices_of_kind(ColumnKind::Categorical).len();
    let n_num = schema.indices_of_kind(ColumnKind::Numerical).len();
    let mut out = Vec::new();
    match n_cat {
        0 => {}
        1 => out.push(Objective::new("mae1", Direction::Minimize)),
        _ => out.push(Objective::new("mae2", Direction::Minimize)),
    }
    match n_num {
        0 => {}
        1 => out.push(Objective::new("hist_iou1", Direction::Maximize)),
        _ => out.push(Objective::new("hist_iou2", Direction::Maximize)),
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    FailedTrain,
    FailedSynth,
    TimeoutTrain,
    TimeoutSynth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: u64,
    pub params: Assignment,
    pub status: TrialStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objectives: Option<Vec<f64>>,
    pub train_seconds: f64,
    pub synth_seconds: f64,
}

impl Trial {
    pub fn is_completed(&self) -> bool {
        self.status == TrialStatus::Completed
    }
}

/// Study configuration file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub budget: u64,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub train_timeout: f64,
    #[serde(default = "default_timeout")]
    pub synth_timeout: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub objectives: Option<Vec<Objective>>,
    #[serde(default)]
    pub n_synth: Option<usize>,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub max_consecutive_failures: Option<u64>,
}

fn default_timeout() -> f64 {
    3600.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub space: SearchSpace,
    pub objectives: Vec<Objective>,
    pub budget: u64,
    pub timeouts: Timeouts,
    pub seed: u64,
    pub sampler: Sampler,
    pub tpe: TpeConfig,
    /// Abort after this many failures in a row; unlimited when `None`.
    pub max_consecutive_failures: Option<u64>,
    pub trials: Vec<Trial>,
}

impl Study {
    pub fn new(space: SearchSpace, objectives: Vec<Objective>, budget: u64, seed: u64) -> Result<Self, TunerError> {
        space.validate()?;
        if objectives.is_empty() || objectives.len() > 2 {
            return Err(TunerError::InvalidConfig(format!(
                "need 1 or 2 objectives, got {}",
                objectives.len()
            )));
        }
        if let Some(o) = objectives.iter().find(|o| !METRICS.contains(&o.metric.as_str())) {
            return Err(TunerError::UnknownMetric(o.metric.clone()));
        }
        if budget == 0 {
            return Err(TunerError::InvalidConfig("budget must be at least 1".into()));
        }
        Ok(Study {
            space,
            objectives,
            budget,
            timeouts: Timeouts::default(),
            seed,
            sampler: Sampler::Tpe,
            tpe: TpeConfig::default(),
            max_consecutive_failures: None,
            trials: Vec::new(),
        })
    }

    /// Builds a study from a config file; objectives default by column mix.
    pub fn from_config(space: SearchSpace, config: &StudyConfig, schema: &Schema) -> Result<Self, TunerError> {
        let objectives = config.objectives.clone().unwrap_or_else(|| default_objectives(schema));
        let mut study = Study::new(space, objectives, config.budget, config.seed)?;
        let secs = |s: f64, what: &str| {
            if s.is_finite() && s > 0.0 {
                Ok(Duration::from_secs_f64(s))
            } else {
                Err(TunerError::InvalidConfig(format!("{what} timeout must be positive")))
            }
        };
        study.timeouts = Timeouts {
            train: secs(config.train_timeout, "train")?,
            synth: secs(config.synth_timeout, "synth")?,
        };
        study.sampler = config.sampler;
        study.max_consecutive_failures = config.max_consecutive_failures;
        Ok(study)
    }

    pub fn completed(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| t.is_completed())
    }

    pub fn n_completed(&self) -> u64 {
        self.completed().count() as u64
    }

    fn losses(&self, trial: &Trial) -> Vec<f64> {
        let values = trial.objectives.as_deref().unwrap_or_default();
        self.objectives.iter().zip(values).map(|(o, &v)| o.loss(v)).collect()
    }
}

/// Next assignment to try; depends only on the seed and completed trials.
pub fn suggest(study: &Study) -> Assignment {
    let observations: Vec<Observation> = study
        .completed()
        .map(|t| Observation {
            params: &t.params,
            losses: study.losses(t),
        })
        .collect();
    tpe::suggest(&study.space, &observations, study.seed, &study.tpe, study.sampler)
}

/// Runs one trial and records it in the study.
pub fn run_trial<'a>(study: &'a mut Study, params: Assignment, runner: &mut dyn TrialRunner) -> &'a Trial {
    let id = study.trials.len() as u64;
    let ctx = TrialContext {
        trial_id: id,
        objectives: &study.objectives,
        timeouts: study.timeouts,
    };
    let mut outcome = runner.run(&params, &ctx);
    if outcome.status == TrialStatus::Completed {
        let ok = outcome
            .objectives
            .as_ref()
            .is_some_and(|v| v.len() == study.objectives.len() && v.iter().all(|x| x.is_finite()));
        if !ok {
            outcome.status = TrialStatus::FailedSynth;
        }
    }
    if outcome.status != TrialStatus::Completed {
        outcome.objectives = None;
    }
    study.trials.push(Trial {
        id,
        params,
        status: outcome.status,
        objectives: outcome.objectives,
        train_seconds: outcome.train_seconds,
        synth_seconds: outcome.synth_seconds,
    });
    study.trials.last().expect("just pushed")
}

/// Suggests and runs trials until `budget` trials have completed.
pub fn optimize(study: &mut Study, runner: &mut dyn TrialRunner, mut journal: Option<&mut Journal>) -> Result<(), TunerError> {
    let mut streak = study.trials.iter().rev().take_while(|t| !t.is_completed()).count() as u64;
    while study.n_completed() < study.budget {
        if let Some(limit) = study.max_consecutive_failures {
            if streak >= limit {
                return Err(TunerError::FailureLimit(streak));
            }
        }
        let params = suggest(study);
        let trial = run_trial(study, params, runner);
        streak = if trial.is_completed() { 0 } else { streak + 1 };
        if let Some(j) = journal.as_deref_mut() {
            j.append(trial)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Best {
    Single(Trial),
    /// Non-dominated completed trials, in id order.
    Front(Vec<Trial>),
}

pub fn best(study: &Study) -> Result<Best, TunerError> {
    let done: Vec<&Trial> = study.completed().collect();
    if done.is_empty() {
        return Err(TunerError::NoCompletedTrials);
    }
    let losses: Vec<Vec<f64>> = done.iter().map(|t| study.losses(t)).collect();
    if study.objectives.len() == 1 {
        let mut i_best = 0;
        for i in 1..done.len() {
            if losses[i][0] < losses[i_best][0] {
                i_best = i;
            }
        }
        return Ok(Best::Single(done[i_best].clone()));
    }
    let ranks = pareto::nondominated_ranks(&losses);
    Ok(Best::Front(
        done.iter().zip(ranks).filter(|(_, r)| *r == 0).map(|(t, _)| (*t).clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn x_space() -> SearchSpace {
        SearchSpace::from_json(r#"{"parameters":[{"type":"float","name":"x","min":0,"max":1}]}"#).unwrap()
    }

    fn fx(a: &Assignment) -> f64 {
        (a["x"].as_f64().unwrap() - 0.3).powi(2)
    }

    fn completed(id: u64, objectives: Vec<f64>) -> Trial {
        Trial {
            id,
            params: Assignment::new(),
            status: TrialStatus::Completed,
            objectives: Some(objectives),
            train_seconds: 0.0,
            synth_seconds: 0.0,
        }
    }

    #[test]
    fn budget_counts_completed_only() {
        let mut study = Study::new(x_space(), vec![Objective::new("mae2", Direction::Minimize)], 5, 1).unwrap();
        let mut calls = 0;
        let mut runner = FnRunner(|a: &Assignment| {
            calls += 1;
            if calls % 2 == 0 {
                Err(TrialStatus::FailedTrain)
            } else {
                Ok(vec![fx(a)])
            }
        });
        optimize(&mut study, &mut runner, None).unwrap();
        assert_eq!(study.n_completed(), 5);
        assert!(study.trials.len() - 5 >= 4);
        assert!(study.trials.iter().filter(|t| !t.is_completed()).all(|t| t.objectives.is_none()));
    }

    #[test]
    fn failure_limit() {
        let mut study = Study::new(x_space(), vec![Objective::new("mae2", Direction::Minimize)], 2, 1).unwrap();
        study.max_consecutive_failures = Some(3);
        let mut runner = FnRunner(|_: &Assignment| Err(TrialStatus::FailedTrain));
        assert!(matches!(optimize(&mut study, &mut runner, None), Err(TunerError::FailureLimit(3))));
        assert_eq!(study.trials.len(), 3);
    }

    #[test]
    fn best_single_earliest_tie() {
        let mut study = Study::new(x_space(), vec![Objective::new("mae2", Direction::Minimize)], 3, 0).unwrap();
        study.trials = vec![completed(0, vec![0.3]), completed(1, vec![0.1]), completed(2, vec![0.1])];
        assert!(matches!(best(&study).unwrap(), Best::Single(t) if t.id == 1));
        study.trials.clear();
        assert!(matches!(best(&study), Err(TunerError::NoCompletedTrials)));
    }

    #[test]
    fn best_front_mixed_directions() {
        let mut study = Study::new(
            x_space(),
            vec![
                Objective::new("mae2", Direction::Minimize),
                Objective::new("hist_iou2", Direction::Maximize),
            ],
            2,
            0,
        )
        .unwrap();
        study.trials = vec![completed(0, vec![0.1, 0.9]), completed(1, vec![0.2, 0.8])];
        assert!(matches!(best(&study).unwrap(), Best::Front(f) if f.len() == 1 && f[0].id == 0));
    }

    #[test]
    fn default_objectives_by_column_mix() {
        let cat = Schema::from_pairs(&[("a", ColumnKind::Categorical), ("b", ColumnKind::Categorical)]).unwrap();
        assert_eq!(default_objectives(&cat), vec![Objective::new("mae2", Direction::Minimize)]);
        let mixed = Schema::from_pairs(&[
            ("a", ColumnKind::Categorical),
            ("b", ColumnKind::Categorical),
            ("x", ColumnKind::Numerical),
            ("y", ColumnKind::Numerical),
        ])
        .unwrap();
        assert_eq!(
            default_objectives(&mixed),
            vec![
                Objective::new("mae2", Direction::Minimize),
                Objective::new("hist_iou2", Direction::Maximize)
            ]
        );
    }

    #[test]
    fn suggestions_respect_bounds() {
        let space = SearchSpace::from_json(
            r#"{"parameters":[
                {"type":"float","name":"lr","min":1e-4,"max":1e-1,"log":true},
                {"type":"int","name":"layers","min":1,"max":4},
                {"type":"categorical","name":"act","choices":["relu","tanh","gelu"]},
                {"type":"fixed","name":"eps","value":1e8}]}"#,
        )
        .unwrap();
        let mut study = Study::new(space.clone(), vec![Objective::new("mae2", Direction::Minimize)], 30, 5).unwrap();
        let mut runner = FnRunner(|a: &Assignment| {
            let lr = a["lr"].as_f64().unwrap();
            let act = if a["act"] == Value::from("tanh") { 0.0 } else { 1.0 };
            Ok(vec![(lr.ln() - 0.01f64.ln()).abs() + a["layers"].as_f64().unwrap() + act])
        });
        optimize(&mut study, &mut runner, None).unwrap();
        assert!(study.trials.iter().all(|t| space.contains(&t.params)));
    }
}
