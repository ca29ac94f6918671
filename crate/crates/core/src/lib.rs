//! Fidelity evaluation for synthetic tabular data.
//!
//! The crate compares a synthetic table against the real one it imitates
//! through a small set of marginal-based metrics (MAE, coverage, invented
//! combinations, histogram IoU), renders them as one-figure SVG scatter and
//! QQ plots, checks declarative domain rules, ranks competing synthesizers,
//! and tunes external synthesizer programs with TPE / multi-objective TPE.
//!
//! ```no_run
//! use synthqa::dataset::{load_csv, Schema};
//! use synthqa::metrics::{evaluate, EvalOptions};
//! # fn main() -> Result<(), synthqa::Error> {
//! let schema = Schema::load("schema.json".as_ref())?;
//! let real = load_csv("real.csv".as_ref(), &schema)?;
//! let synth = load_csv("synth.csv".as_ref(), &schema)?;
//! let report = evaluate(&real, &synth, "adult", "ctgan", EvalOptions::default())?;
//! println!("MAE2 = {:?}", report.mae2);
//! # Ok(())
//! # }
//! ```

pub mod cli;
pub mod dataset;
pub mod domain;
pub mod marginals;
pub mod metrics;
pub mod plots;
pub mod rank;
pub mod refsynth;
pub mod tuner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Marginal(#[from] marginals::MarginalError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
    #[error(transparent)]
    Plot(#[from] plots::PlotError),
    #[error(transparent)]
    Domain(#[from] domain::DomainError),
    #[error(transparent)]
    Rank(#[from] rank::RankError),
    #[error(transparent)]
    Tuner(#[from] tuner::TunerError),
    #[error(transparent)]
    Refsynth(#[from] refsynth::RefsynthError),
}
