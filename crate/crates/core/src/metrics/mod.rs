//! Fidelity metrics computed from marginal tables: mean absolute error of
//! marginal probabilities, coverage of real categories, the rate of invented
//! (hallucinated) combinations, histogram intersection-over-union, and the
//! secondary Jensen-Shannon and Wasserstein distances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AlignedPair, BinnedColumn, Column, TableData, EXCLUDED};
use crate::marginals::MarginalTable;

pub mod json;
mod report;

pub use report::{
    evaluate, EvalOptions, MaeByMode, MaePair, MissingRate, QualityReport, ReportInputs, TupleDetail, WassersteinEntry,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("marginal table has no cells")]
    EmptyTable,
    #[error("no tables to aggregate")]
    EmptyList,
    #[error("tables of different degrees cannot be aggregated")]
    MixedDegrees,
    #[error("marginal table has no real support")]
    NoRealSupport,
    #[error("synthetic side of the marginal table is empty")]
    EmptySynth,
    #[error("column has no observed values")]
    EmptyColumn,
}

/// How per-cell absolute differences are reduced for one table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Mean over the union support.
    #[default]
    PointMean,
    /// Sum over the union support (twice the total variation distance).
    VariableL1,
}

impl std::str::FromStr for NormalizationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "point-mean" => Ok(Self::PointMean),
            "variable-l1" => Ok(Self::VariableL1),
            other => Err(format!("unknown normalization mode `{other}`")),
        }
    }
}

pub fn mae(table: &MarginalTable, mode: NormalizationMode) -> Result<f64, MetricError> {
    if table.is_empty() {
        return Err(MetricError::EmptyTable);
    }
    let sum: f64 = table.probabilities().map(|(p, q)| (p - q).abs()).sum();
    Ok(match mode {
        NormalizationMode::PointMean => sum / table.cells.len() as f64,
        NormalizationMode::VariableL1 => sum,
    })
}

/// Unweighted mean of the per-table MAE.
pub fn mae_k(tables: &[MarginalTable], mode: NormalizationMode) -> Result<f64, MetricError> {
    let first = tables.first().ok_or(MetricError::EmptyList)?;
    if tables.iter().any(|t| t.tuple.degree() != first.tuple.degree()) {
        return Err(MetricError::MixedDegrees);
    }
    let mut sum = 0.0;
    for t in tables {
        sum += mae(t, mode)?;
    }
    Ok(sum / tables.len() as f64)
}

/// Share of real-supported cells that the synthetic side produced at least once.
pub fn coverage(table: &MarginalTable) -> Result<f64, MetricError> {
    let supported = table.cells.iter().filter(|c| c.count_real > 0).count();
    if supported == 0 {
        return Err(MetricError::NoRealSupport);
    }
    let covered = table
        .cells
        .iter()
        .filter(|c| c.count_real > 0 && c.count_synth > 0)
        .count();
    Ok(covered as f64 / supported as f64)
}

/// Share of synthetic rows whose level combination never occurs in the real data.
pub fn invented(table: &MarginalTable) -> Result<f64, MetricError> {
    if table.n_synth == 0 {
        return Err(MetricError::EmptySynth);
    }
    let outside: u64 = table
        .cells
        .iter()
        .filter(|c| c.count_real == 0)
        .map(|c| c.count_synth)
        .sum();
    Ok(outside as f64 / table.n_synth as f64)
}

/// Intersection over union of two histograms: `Σ min / Σ max`.
pub fn hist_iou(table: &MarginalTable) -> Result<f64, MetricError> {
    if table.is_empty() {
        return Err(MetricError::EmptyTable);
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    for (p, q) in table.probabilities() {
        lo += p.min(q);
        hi += p.max(q);
    }
    if hi == 0.0 {
        return Err(MetricError::EmptyTable);
    }
    Ok(lo / hi)
}

/// Jensen-Shannon distance (square root of the base-2 divergence).
pub fn jsd(table: &MarginalTable) -> Result<f64, MetricError> {
    if table.is_empty() {
        return Err(MetricError::EmptyTable);
    }
    let mut div = 0.0;
    for (p, q) in table.probabilities() {
        let m = 0.5 * (p + q);
        if p > 0.0 {
            div += 0.5 * p * (p / m).log2();
        }
        if q > 0.0 {
            div += 0.5 * q * (q / m).log2();
        }
    }
    Ok(div.clamp(0.0, 1.0).sqrt())
}

/// Exact 1-D earth mover's distance between two empirical distributions,
/// `∫ |F_real(x) - F_synth(x)| dx`. For equal sample sizes this is the mean
/// absolute difference of the sorted samples.
pub fn wasserstein1d(real: &[f64], synth: &[f64]) -> Result<f64, MetricError> {
    if real.is_empty() || synth.is_empty() {
        return Err(MetricError::EmptyColumn);
    }
    let mut a = real.to_vec();
    let mut b = synth.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        return Ok(s / a.len() as f64);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let fa = i as f64 / na;
        let fb = j as f64 / nb;
        total += (fa - fb).abs() * (next - prev);
        while i < a.len() && a[i] == next {
            i += 1;
        }
        while j < b.len() && b[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

/// `n_points` quantiles at ranks `i / (n_points - 1)`, linearly interpolated
/// between order statistics. A single point yields the median.
pub fn quantiles(values: &[f64], n_points: usize) -> Result<Vec<f64>, MetricError> {
    if values.is_empty() || n_points == 0 {
        return Err(MetricError::EmptyColumn);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let last = (v.len() - 1) as f64;
    let at = |q: f64| {
        let pos = q * last;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        if lo == hi {
            v[lo]
        } else {
            v[lo] + (v[hi] - v[lo]) * frac
        }
    };
    if n_points == 1 {
        return Ok(vec![at(0.5)]);
    }
    Ok((0..n_points)
        .map(|i| at(i as f64 / (n_points - 1) as f64))
        .collect())
}

/// Equal-width binning bounds for one numerical column, taken from real data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnBins {
    pub lower: f64,
    pub upper: f64,
    pub bins: u32,
}

impl ColumnBins {
    /// Bin index for `x`. The last bin is closed on the right; values outside
    /// `[lower, upper]` clamp to the edge bins.
    pub fn bin_of(&self, x: f64) -> u32 {
        if self.bins <= 1 || self.upper <= self.lower {
            return 0;
        }
        let width = (self.upper - self.lower) / self.bins as f64;
        let raw = ((x - self.lower) / width).floor();
        if raw < 0.0 {
            0
        } else if raw >= self.bins as f64 {
            self.bins - 1
        } else {
            raw as u32
        }
    }
}

/// Per-column binning for every numerical column of a schema (`None` for
/// categorical columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub columns: Vec<Option<ColumnBins>>,
}

impl BinSpec {
    /// Bounds from the observed real values; constant or empty columns get a
    /// single degenerate bin.
    pub fn from_real(real: &TableData, bins: u32) -> Self {
        let bins = bins.max(1);
        let columns = real
            .columns
            .iter()
            .map(|col| match col {
                Column::Numerical(c) => {
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for (v, m) in c.values.iter().zip(&c.missing) {
                        if !*m {
                            lo = lo.min(*v);
                            hi = hi.max(*v);
                        }
                    }
                    if !lo.is_finite() || !hi.is_finite() {
                        (lo, hi) = (0.0, 0.0);
                    }
                    let bins = if hi > lo { bins } else { 1 };
                    Some(ColumnBins { lower: lo, upper: hi, bins })
                }
                _ => None,
            })
            .collect();
        BinSpec { columns }
    }
}

fn bin_table(table: &TableData, spec: &BinSpec) -> TableData {
    let columns = table
        .columns
        .iter()
        .zip(&spec.columns)
        .map(|(col, b)| match (col, b) {
            (Column::Numerical(c), Some(b)) => Column::Binned(BinnedColumn {
                bins: c
                    .values
                    .iter()
                    .zip(&c.missing)
                    .map(|(v, m)| if *m { EXCLUDED } else { b.bin_of(*v) })
                    .collect(),
                n_bins: b.bins,
                lower: b.lower,
                upper: b.upper,
            }),
            _ => col.clone(),
        })
        .collect();
    TableData {
        schema: table.schema.clone(),
        n_rows: table.n_rows,
        columns,
    }
}

/// Replaces numerical columns on both sides by their bin indices.
pub fn bin_numeric(pair: &AlignedPair, spec: &BinSpec) -> AlignedPair {
    AlignedPair {
        schema: pair.schema.clone(),
        real: bin_table(&pair.real, spec),
        synth: bin_table(&pair.synth, spec),
        origins: pair.origins.clone(),
    }
}
