use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    bin_numeric, coverage, hist_iou, invented, jsd, mae, wasserstein1d, BinSpec, NormalizationMode,
};
use crate::dataset::{align_dictionaries, AlignedPair, Column, ColumnKind, TableData};
use crate::marginals::{count_all, enumerate_tuples, MarginalTable, VariableTuple};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub mode: NormalizationMode,
    pub bins: u32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: NormalizationMode::PointMean,
            bins: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaePair {
    pub mae1: Option<f64>,
    pub mae2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaeByMode {
    pub point_mean: MaePair,
    pub variable_l1: MaePair,
}

/// Metrics of one variable tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleDetail {
    pub columns: Vec<String>,
    pub kind: ColumnKind,
    pub n_cells: usize,
    pub mae_point_mean: Option<f64>,
    pub mae_variable_l1: Option<f64>,
    pub coverage: Option<f64>,
    pub invented: Option<f64>,
    pub hist_iou: Option<f64>,
    pub jsd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WassersteinEntry {
    pub column: String,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingRate {
    pub column: String,
    pub real: f64,
    pub synth: f64,
}

/// Full metric bundle for one (real, synthetic) pair.
///
/// Degree-1 and degree-2 categorical metrics are averaged over the
/// categorical columns and column pairs; histogram IoU over the binned
/// numerical columns and pairs. A field is `None` when the dataset has no
/// tuple of the relevant kind and degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub dataset_id: String,
    pub model_id: String,
    pub normalization_mode: NormalizationMode,
    pub bins: u32,
    pub n_real: usize,
    pub n_synth: usize,
    pub mae1: Option<f64>,
    pub mae2: Option<f64>,
    pub coverage1: Option<f64>,
    pub coverage2: Option<f64>,
    pub invented1: Option<f64>,
    pub invented2: Option<f64>,
    pub hist_iou1: Option<f64>,
    pub hist_iou2: Option<f64>,
    pub jsd1: Option<f64>,
    pub jsd2: Option<f64>,
    pub wd1: Vec<WassersteinEntry>,
    pub mae_by_mode: MaeByMode,
    pub missing_rates: Vec<MissingRate>,
    pub details: Vec<TupleDetail>,
    /// Files the report was computed from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<ReportInputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInputs {
    pub real: PathBuf,
    pub synth: PathBuf,
    pub schema: PathBuf,
}

impl QualityReport {
    /// Mean Wasserstein distance over numerical columns.
    pub fn wd1_mean(&self) -> Option<f64> {
        mean(self.wd1.iter().map(|w| w.distance))
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn detail(pair: &AlignedPair, table: &MarginalTable, kind: ColumnKind) -> TupleDetail {
    let columns = table
        .tuple
        .indices()
        .iter()
        .map(|&i| pair.schema.columns[i].name.clone())
        .collect();
    let categorical = kind == ColumnKind::Categorical;
    TupleDetail {
        columns,
        kind,
        n_cells: table.cells.len(),
        mae_point_mean: mae(table, NormalizationMode::PointMean).ok(),
        mae_variable_l1: mae(table, NormalizationMode::VariableL1).ok(),
        coverage: if categorical { coverage(table).ok() } else { None },
        invented: if categorical { invented(table).ok() } else { None },
        hist_iou: if categorical { None } else { hist_iou(table).ok() },
        jsd: jsd(table).ok(),
    }
}

/// Aligns, bins and counts both datasets, then computes every metric.
pub fn evaluate(
    real: &TableData,
    synth: &TableData,
    dataset_id: &str,
    model_id: &str,
    opts: EvalOptions,
) -> Result<QualityReport, Error> {
    let pair = align_dictionaries(real, synth)?;
    let spec = BinSpec::from_real(&pair.real, opts.bins);
    let binned = bin_numeric(&pair, &spec);
    let schema = &pair.schema;

    let tuples_for = |k: usize, kind: ColumnKind| -> Vec<VariableTuple> { enumerate_tuples(schema, k, kind) };
    let cat1 = count_all(&binned, &tuples_for(1, ColumnKind::Categorical))?;
    let cat2 = count_all(&binned, &tuples_for(2, ColumnKind::Categorical))?;
    let num1 = count_all(&binned, &tuples_for(1, ColumnKind::Numerical))?;
    let num2 = count_all(&binned, &tuples_for(2, ColumnKind::Numerical))?;

    let build = |tables: &[MarginalTable], kind| -> Vec<TupleDetail> {
        tables.par_iter().map(|t| detail(&binned, t, kind)).collect()
    };
    let d_cat1 = build(&cat1, ColumnKind::Categorical);
    let d_cat2 = build(&cat2, ColumnKind::Categorical);
    let d_num1 = build(&num1, ColumnKind::Numerical);
    let d_num2 = build(&num2, ColumnKind::Numerical);

    let avg = |d: &[TupleDetail], f: fn(&TupleDetail) -> Option<f64>| mean(d.iter().map(f));
    let mae_pair = |f: fn(&TupleDetail) -> Option<f64>| MaePair {
        mae1: avg(&d_cat1, f),
        mae2: avg(&d_cat2, f),
    };
    let mae_by_mode = MaeByMode {
        point_mean: mae_pair(|d| d.mae_point_mean),
        variable_l1: mae_pair(|d| d.mae_variable_l1),
    };
    let chosen = match opts.mode {
        NormalizationMode::PointMean => mae_by_mode.point_mean,
        NormalizationMode::VariableL1 => mae_by_mode.variable_l1,
    };

    let mut wd1 = Vec::new();
    let mut missing_rates = Vec::new();
    for (i, spec_col) in schema.columns.iter().enumerate() {
        if let (Column::Numerical(r), Column::Numerical(s)) = (&pair.real.columns[i], &pair.synth.columns[i]) {
            wd1.push(WassersteinEntry {
                column: spec_col.name.clone(),
                distance: wasserstein1d(&r.observed(), &s.observed()).ok(),
            });
            missing_rates.push(MissingRate {
                column: spec_col.name.clone(),
                real: r.missing_rate(),
                synth: s.missing_rate(),
            });
        }
    }

    let pairs_jsd: Vec<&TupleDetail> = d_cat2.iter().chain(&d_num2).collect();
    let singles_jsd: Vec<&TupleDetail> = d_cat1.iter().chain(&d_num1).collect();

    let report = QualityReport {
        dataset_id: dataset_id.to_string(),
        model_id: model_id.to_string(),
        normalization_mode: opts.mode,
        bins: opts.bins,
        n_real: real.n_rows,
        n_synth: synth.n_rows,
        mae1: chosen.mae1,
        mae2: chosen.mae2,
        coverage1: avg(&d_cat1, |d| d.coverage),
        coverage2: avg(&d_cat2, |d| d.coverage),
        invented1: avg(&d_cat1, |d| d.invented),
        invented2: avg(&d_cat2, |d| d.invented),
        hist_iou1: avg(&d_num1, |d| d.hist_iou),
        hist_iou2: avg(&d_num2, |d| d.hist_iou),
        jsd1: mean(singles_jsd.iter().map(|d| d.jsd)),
        jsd2: mean(pairs_jsd.iter().map(|d| d.jsd)),
        wd1,
        mae_by_mode,
        missing_rates,
        details: d_cat1.into_iter().chain(d_cat2).chain(d_num1).chain(d_num2).collect(),
        inputs: None,
    };
    Ok(report)
}
