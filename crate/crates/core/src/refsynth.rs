//! Minimal reference samplers: column-independent resampling, row bootstrap
//! and mode collapse. They serve as test fixtures and as a stand-in external
//! synthesizer for the tuner.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_csv, CategoricalColumn, Column, DatasetError, NumericalColumn, Schema, TableData};

#[derive(Debug, Error)]
pub enum RefsynthError {
    #[error("n must be at least 1")]
    ZeroRows,
    #[error("real data has no rows")]
    EmptyReal,
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("invalid params: {0}")]
    Params(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Independent,
    Bootstrap,
    Mode,
}

impl std::str::FromStr for Method {
    type Err = RefsynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" => Ok(Method::Independent),
            "bootstrap" => Ok(Method::Bootstrap),
            "mode" => Ok(Method::Mode),
            other => Err(RefsynthError::UnknownMethod(other.to_string())),
        }
    }
}

fn check(real: &TableData, n: usize) -> Result<(), RefsynthError> {
    if n == 0 {
        return Err(RefsynthError::ZeroRows);
    }
    if real.n_rows == 0 {
        return Err(RefsynthError::EmptyReal);
    }
    Ok(())
}

/// Samples every column independently from its real marginal. Categorical
/// columns keep the missing level as a category; numerical columns resample
/// observed values only.
pub fn independent_sample(real: &TableData, n: usize, seed: u64) -> Result<TableData, RefsynthError> {
    check(real, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = real
        .columns
        .iter()
        .map(|col| match col {
            Column::Categorical(c) => Column::Categorical(CategoricalColumn {
                codes: (0..n).map(|_| c.codes[rng.random_range(0..c.codes.len())]).collect(),
                levels: c.levels.clone(),
            }),
            Column::Numerical(c) => {
                let observed = c.observed();
                if observed.is_empty() {
                    Column::Numerical(NumericalColumn::from_values(vec![f64::NAN; n]))
                } else {
                    Column::Numerical(NumericalColumn::from_values(
                        (0..n).map(|_| observed[rng.random_range(0..observed.len())]).collect(),
                    ))
                }
            }
            Column::Binned(b) => Column::Binned(crate::dataset::BinnedColumn {
                bins: (0..n).map(|_| b.bins[rng.random_range(0..b.bins.len())]).collect(),
                ..b.clone()
            }),
        })
        .collect();
    Ok(TableData {
        schema: real.schema.clone(),
        n_rows: n,
        columns,
    })
}

/// Draws whole rows uniformly with replacement.
pub fn bootstrap_sample(real: &TableData, n: usize, seed: u64) -> Result<TableData, RefsynthError> {
    check(real, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..real.n_rows)).collect();
    Ok(real.take_rows(&rows))
}

fn modal_code(codes: &[u32], n_levels: usize) -> u32 {
    let mut counts = vec![0u64; n_levels];
    for &c in codes {
        counts[c as usize] += 1;
    }
    // Levels are sorted, so the first maximum is the lexicographically smallest.
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as u32
}

fn modal_value(values: &[f64]) -> f64 {
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for v in values {
        *counts.entry(v.to_bits()).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|(bits, c)| (c, f64::from_bits(bits)))
        .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.total_cmp(&a.1)))
        .map(|(_, v)| v)
        .unwrap_or(f64::NAN)
}

/// Every row is the per-column most frequent real value.
pub fn mode_collapse_sample(real: &TableData, n: usize) -> Result<TableData, RefsynthError> {
    check(real, n)?;
    let columns = real
        .columns
        .iter()
        .map(|col| match col {
            Column::Categorical(c) => Column::Categorical(CategoricalColumn {
                codes: vec![modal_code(&c.codes, c.levels.len()); n],
                levels: c.levels.clone(),
            }),
            Column::Numerical(c) => Column::Numerical(NumericalColumn::from_values(vec![modal_value(&c.observed()); n])),
            Column::Binned(b) => {
                let observed: Vec<u32> = b.bins.iter().copied().filter(|&x| x != crate::dataset::EXCLUDED).collect();
                let bin = if observed.is_empty() {
                    crate::dataset::EXCLUDED
                } else {
                    modal_code(&observed, b.n_bins as usize)
                };
                Column::Binned(crate::dataset::BinnedColumn {
                    bins: vec![bin; n],
                    ..b.clone()
                })
            }
        })
        .collect();
    Ok(TableData {
        schema: real.schema.clone(),
        n_rows: n,
        columns,
    })
}

pub fn sample(method: Method, real: &TableData, n: usize, seed: u64) -> Result<TableData, RefsynthError> {
    match method {
        Method::Independent => independent_sample(real, n, seed),
        Method::Bootstrap => bootstrap_sample(real, n, seed),
        Method::Mode => mode_collapse_sample(real, n),
    }
}

/// State written by the `train` phase of the external-synthesizer contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub method: Method,
    pub seed: u64,
    pub real: PathBuf,
    pub schema: PathBuf,
}

pub const MODEL_FILE: &str = "refsynth_model.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RefsynthError + '_ {
    move |source| RefsynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `train` phase: validates the inputs and records the sampler configuration.
/// A `method` or `seed` entry in the params file overrides the defaults;
/// other entries are accepted and ignored.
pub fn train(
    default_method: Method,
    default_seed: u64,
    real: &Path,
    schema: &Path,
    params: Option<&Path>,
    workdir: &Path,
) -> Result<TrainedModel, RefsynthError> {
    let schema_v = Schema::load(schema)?;
    let data = load_csv(real, &schema_v)?;
    if data.n_rows == 0 {
        return Err(RefsynthError::EmptyReal);
    }
    let mut model = TrainedModel {
        method: default_method,
        seed: default_seed,
        real: std::path::absolute(real).map_err(io_err(real))?,
        schema: std::path::absolute(schema).map_err(io_err(schema))?,
    };
    if let Some(p) = params {
        let text = std::fs::read_to_string(p).map_err(io_err(p))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| RefsynthError::Params(e.to_string()))?;
        let obj = v
            .as_object()
            .ok_or_else(|| RefsynthError::Params("expected a JSON object".into()))?;
        if let Some(m) = obj.get("method") {
            let s = m
                .as_str()
                .ok_or_else(|| RefsynthError::Params("method must be a string".into()))?;
            model.method = s.parse()?;
        }
        if let Some(s) = obj.get("seed") {
            model.seed = s
                .as_u64()
                .ok_or_else(|| RefsynthError::Params("seed must be a non-negative integer".into()))?;
        }
    }
    std::fs::create_dir_all(workdir).map_err(io_err(workdir))?;
    let path = workdir.join(MODEL_FILE);
    let text = serde_json::to_string_pretty(&model).expect("serializable");
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(model)
}

/// `synth` phase: loads the trained configuration and writes `n` rows.
pub fn synth(workdir: &Path, n: usize, out: &Path) -> Result<(), RefsynthError> {
    let path = workdir.join(MODEL_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let model: TrainedModel = serde_json::from_str(&text).map_err(|e| RefsynthError::Params(e.to_string()))?;
    let schema = Schema::load(&model.schema)?;
    let real = load_csv(&model.real, &schema)?;
    sample(model.method, &real, n, model.seed)?.save_csv(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnKind;
    use crate::metrics::{evaluate, EvalOptions};

    fn two_cols(a: &[&str], b: &[&str]) -> TableData {
        let schema = Schema::from_pairs(&[("a", ColumnKind::Categorical), ("b", ColumnKind::Categorical)]).unwrap();
        TableData::new(
            schema,
            vec![
                Column::Categorical(CategoricalColumn::from_strings(a)),
                Column::Categorical(CategoricalColumn::from_strings(b)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_level_column() {
        let real = two_cols(&["x", "x", "x"], &["p", "q", "r"]);
        let s = independent_sample(&real, 50, 1).unwrap();
        let a = s.columns[0].as_categorical().unwrap();
        assert!((0..50).all(|r| a.level(r) == "x"));
    }

    #[test]
    fn mode_collapse() {
        let real = two_cols(&["A", "A", "A", "B"], &["p", "q", "q", "p"]);
        let s = mode_collapse_sample(&real, 10).unwrap();
        assert!((0..10).all(|r| s.columns[0].as_categorical().unwrap().level(r) == "A"));
        // q and p tie at 2 rows each: smallest wins.
        assert!((0..10).all(|r| s.columns[1].as_categorical().unwrap().level(r) == "p"));
        let rep = evaluate(&real, &s, "d", "mode", EvalOptions::default()).unwrap();
        assert_eq!(rep.coverage1, Some(0.5));
    }

    #[test]
    fn modes_that_never_co_occur() {
        let real = two_cols(&["A", "A", "B", "C"], &["q", "q", "p", "p"]);
        // modes: a = A (2), b = p/q tie -> p; (A, p) never occurs.
        let s = mode_collapse_sample(&real, 8).unwrap();
        let rep = evaluate(&real, &s, "d", "mode", EvalOptions::default()).unwrap();
        assert_eq!(rep.invented2, Some(1.0));
    }

    #[test]
    fn bootstrap_invents_nothing() {
        let real = two_cols(&["A", "A", "B", "B", "C"], &["p", "q", "q", "r", "r"]);
        for seed in 0..10 {
            let s = bootstrap_sample(&real, 5, seed).unwrap();
            let rep = evaluate(&real, &s, "d", "b", EvalOptions::default()).unwrap();
            assert_eq!(rep.invented2, Some(0.0));
            assert!(rep.coverage1.unwrap() <= 1.0);
        }
        let one = bootstrap_sample(&real, 1, 3).unwrap();
        let rep = evaluate(&real, &one, "d", "b", EvalOptions::default()).unwrap();
        assert_eq!(rep.invented2, Some(0.0));
    }

    #[test]
    fn deterministic_under_seed() {
        let real = two_cols(&["A", "B", "C", "D"], &["p", "q", "r", "s"]);
        assert_eq!(independent_sample(&real, 30, 9).unwrap(), independent_sample(&real, 30, 9).unwrap());
        assert_ne!(independent_sample(&real, 30, 9).unwrap(), independent_sample(&real, 30, 10).unwrap());
        assert!(matches!(bootstrap_sample(&real, 0, 1), Err(RefsynthError::ZeroRows)));
    }

    #[test]
    fn numeric_mode_prefers_smallest_on_tie() {
        assert_eq!(modal_value(&[3.0, 1.0, 3.0, 1.0, 2.0]), 1.0);
        assert!(modal_value(&[]).is_nan());
    }
}
