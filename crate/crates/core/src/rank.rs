//! Model ranking, tuning-improvement tables and cross-metric rank agreement.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::QualityReport;
use crate::tuner::pareto::dominates;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("no reports to rank")]
    Empty,
    #[error("reports mix datasets `{0}` and `{1}`")]
    MixedDatasets(String, String),
    #[error("model `{0}` appears more than once")]
    DuplicateModel(String),
    #[error("rankings cover different model sets (`{0}` vs `{1}`)")]
    ModelSetMismatch(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Categorical,
    Numerical,
    Mixed,
}

/// Columns of the main results table, with their preferred direction.
pub const TABLE_METRICS: [(&str, bool); 7] = [
    ("mae1", false),
    ("mae2", false),
    ("coverage1", true),
    ("coverage2", true),
    ("invented2", false),
    ("hist_iou1", true),
    ("hist_iou2", true),
];

fn table_value(r: &QualityReport, metric: &str) -> Option<f64> {
    match metric {
        "mae1" => r.mae1,
        "mae2" => r.mae2,
        "coverage1" => r.coverage1,
        "coverage2" => r.coverage2,
        "invented2" => r.invented2,
        "hist_iou1" => r.hist_iou1,
        "hist_iou2" => r.hist_iou2,
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub model_id: String,
    pub values: BTreeMap<String, Option<f64>>,
    /// Metrics on which this model attains the dataset's best value.
    pub best: Vec<String>,
    /// Membership of the (mae2, hist_iou2) Pareto front; mixed datasets only.
    pub pareto: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub dataset_id: String,
    pub kind: DatasetKind,
    pub sort_metric: String,
    pub rows: Vec<RankRow>,
}

impl Ranking {
    pub fn model_order(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.model_id.clone()).collect()
    }
}

fn cmp_opt(a: Option<f64>, b: Option<f64>, ascending: bool) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a, b) {
        (Some(x), Some(y)) => {
            if ascending {
                x.total_cmp(&y)
            } else {
                y.total_cmp(&x)
            }
        }
        (Some(_), None) => Less,
        (None, Some(_)) => Greater,
        (None, None) => Equal,
    }
}

fn check_reports(reports: &[QualityReport]) -> Result<(), RankError> {
    let first = reports.first().ok_or(RankError::Empty)?;
    let mut seen = BTreeSet::new();
    for r in reports {
        if r.dataset_id != first.dataset_id {
            return Err(RankError::MixedDatasets(first.dataset_id.clone(), r.dataset_id.clone()));
        }
        if !seen.insert(&r.model_id) {
            return Err(RankError::DuplicateModel(r.model_id.clone()));
        }
    }
    Ok(())
}

/// Orders model ids by a metric; undefined values go last, ties by model id.
pub fn order_by(reports: &[QualityReport], key: impl Fn(&QualityReport) -> Option<f64>, ascending: bool) -> Vec<String> {
    let mut idx: Vec<usize> = (0..reports.len()).collect();
    idx.sort_by(|&a, &b| {
        cmp_opt(key(&reports[a]), key(&reports[b]), ascending).then_with(|| reports[a].model_id.cmp(&reports[b].model_id))
    });
    idx.into_iter().map(|i| reports[i].model_id.clone()).collect()
}

/// Ranks the models of one dataset: by MAE2 ascending when categorical pairs
/// exist, otherwise by Hist_IoU2 descending. Mixed datasets additionally get
/// (MAE2, Hist_IoU2) Pareto-front membership.
pub fn rank_models(reports: &[QualityReport]) -> Result<Ranking, RankError> {
    check_reports(reports)?;
    let has_cat = reports.iter().any(|r| r.mae2.is_some());
    let has_num = reports.iter().any(|r| r.hist_iou2.is_some());
    let kind = match (has_cat, has_num) {
        (true, true) => DatasetKind::Mixed,
        (false, true) => DatasetKind::Numerical,
        _ => DatasetKind::Categorical,
    };
    let (sort_metric, ascending) = match kind {
        DatasetKind::Numerical => ("hist_iou2", false),
        _ if has_cat => ("mae2", true),
        // No pairs of either kind: fall back to the degree-1 metrics.
        _ if reports.iter().any(|r| r.mae1.is_some()) => ("mae1", true),
        _ => ("hist_iou1", false),
    };
    let order = order_by(reports, |r| table_value(r, sort_metric), ascending);
    let by_id: BTreeMap<&str, &QualityReport> = reports.iter().map(|r| (r.model_id.as_str(), r)).collect();

    let best_values: BTreeMap<&str, Option<f64>> = TABLE_METRICS
        .iter()
        .map(|&(m, higher)| {
            let vals = reports.iter().filter_map(|r| table_value(r, m));
            let best = if higher {
                vals.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            } else {
                vals.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
            };
            (m, best)
        })
        .collect();

    let loss = |r: &QualityReport| -> Option<Vec<f64>> { Some(vec![r.mae2?, -r.hist_iou2?]) };
    let rows = order
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let r = by_id[id.as_str()];
            let values = TABLE_METRICS.iter().map(|&(m, _)| (m.to_string(), table_value(r, m))).collect();
            let best = TABLE_METRICS
                .iter()
                .filter(|&&(m, _)| table_value(r, m).is_some() && table_value(r, m) == best_values[m])
                .map(|&(m, _)| m.to_string())
                .collect();
            let pareto = (kind == DatasetKind::Mixed).then(|| match loss(r) {
                Some(me) => !reports.iter().filter_map(loss).any(|other| dominates(&other, &me)),
                None => false,
            });
            RankRow {
                rank: i + 1,
                model_id: id.clone(),
                values,
                best,
                pareto,
            }
        })
        .collect();
    Ok(Ranking {
        dataset_id: reports[0].dataset_id.clone(),
        kind,
        sort_metric: sort_metric.to_string(),
        rows,
    })
}

fn fmt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Main results table as CSV: one row per (dataset, model) in rank order.
pub fn rankings_to_csv(rankings: &[Ranking]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dataset".to_string(), "model".to_string(), "rank".to_string()];
    header.extend(TABLE_METRICS.iter().map(|(m, _)| m.to_string()));
    header.extend(["best".to_string(), "pareto".to_string()]);
    w.write_record(&header).expect("in-memory write");
    for ranking in rankings {
        for row in &ranking.rows {
            let mut rec = vec![ranking.dataset_id.clone(), row.model_id.clone(), row.rank.to_string()];
            rec.extend(TABLE_METRICS.iter().map(|(m, _)| fmt4(row.values[*m])));
            rec.push(row.best.join(";"));
            rec.push(row.pareto.map(|p| p.to_string()).unwrap_or_default());
            w.write_record(&rec).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub delta: f64,
    /// Relative change `delta / default`; `None` when the baseline is zero.
    pub pct: Option<f64>,
    pub zero_baseline: bool,
}

/// Change from the default-hyperparameter value to the tuned one.
pub fn improvement(default: f64, hpo: f64) -> Improvement {
    let delta = hpo - default;
    if default == 0.0 {
        return Improvement {
            delta,
            pct: None,
            zero_baseline: true,
        };
    }
    Improvement {
        delta,
        pct: Some(delta / default),
        zero_baseline: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricChange {
    pub default: Option<f64>,
    pub hpo: Option<f64>,
    pub change: Option<Improvement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub dataset_id: String,
    pub model_id: String,
    pub mae2: MetricChange,
    pub hist_iou2: MetricChange,
}

fn change(default: Option<f64>, hpo: Option<f64>) -> MetricChange {
    MetricChange {
        default,
        hpo,
        change: default.zip(hpo).map(|(d, h)| improvement(d, h)),
    }
}

/// Pairs default and tuned reports by (dataset, model). Models present in
/// only one set get a row with the other side empty.
pub fn improvement_table(defaults: &[QualityReport], tuned: &[QualityReport]) -> Vec<ImprovementRow> {
    let key = |r: &QualityReport| (r.dataset_id.clone(), r.model_id.clone());
    let d: BTreeMap<_, _> = defaults.iter().map(|r| (key(r), r)).collect();
    let t: BTreeMap<_, _> = tuned.iter().map(|r| (key(r), r)).collect();
    let keys: BTreeSet<_> = d.keys().chain(t.keys()).cloned().collect();
    keys.into_iter()
        .map(|k| {
            let (dr, tr) = (d.get(&k), t.get(&k));
            ImprovementRow {
                mae2: change(dr.and_then(|r| r.mae2), tr.and_then(|r| r.mae2)),
                hist_iou2: change(dr.and_then(|r| r.hist_iou2), tr.and_then(|r| r.hist_iou2)),
                dataset_id: k.0,
                model_id: k.1,
            }
        })
        .collect()
}

/// Tuning-improvement table as CSV. Missing tuned values print as `N/A`.
pub fn improvements_to_csv(rows: &[ImprovementRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dataset",
        "model",
        "mae2_default",
        "mae2_hpo",
        "mae2_delta",
        "mae2_pct",
        "hist_iou2_default",
        "hist_iou2_hpo",
        "hist_iou2_delta",
        "hist_iou2_pct",
    ])
    .expect("in-memory write");
    let cells = |c: &MetricChange| -> [String; 4] {
        if c.default.is_none() && c.hpo.is_none() {
            return Default::default();
        }
        let na = || "N/A".to_string();
        let val = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(na);
        [
            val(c.default),
            val(c.hpo),
            c.change.map(|i| format!("{:.4}", i.delta)).unwrap_or_else(na),
            c.change
                .and_then(|i| i.pct)
                .map(|p| format!("{:.0}%", 100.0 * p))
                .unwrap_or_else(na),
        ]
    };
    for r in rows {
        let mut rec = vec![r.dataset_id.clone(), r.model_id.clone()];
        rec.extend(cells(&r.mae2));
        rec.extend(cells(&r.hist_iou2));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Kendall rank correlation between two orderings of the same models.
pub fn kendall_tau(a: &[String], b: &[String]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let pos_b: BTreeMap<&str, usize> = b.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let ranks: Vec<usize> = a.iter().map(|m| pos_b[m.as_str()]).collect();
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            score += if ranks[i] < ranks[j] { 1 } else { -1 };
        }
    }
    score as f64 / (n * (n - 1) / 2) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankComparison {
    pub metrics: Vec<String>,
    /// `tau[i][j]`: agreement between `metrics[i]` and `metrics[j]`.
    pub tau: Vec<Vec<f64>>,
    pub orders: BTreeMap<String, Vec<String>>,
}

impl RankComparison {
    /// Side-by-side order table: one row per rank position, one column per metric.
    pub fn orders_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["rank".to_string()];
        header.extend(self.metrics.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        let n = self.orders.values().next().map_or(0, Vec::len);
        for i in 0..n {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(self.metrics.iter().map(|m| self.orders[m][i].clone()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn tau_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["metric".to_string()];
        header.extend(self.metrics.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (m, row) in self.metrics.iter().zip(&self.tau) {
            let mut rec = vec![m.clone()];
            rec.extend(row.iter().map(|t| format!("{t:.4}")));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Pairwise Kendall tau between rankings produced by different metrics.
pub fn compare_rankings(rankings: &BTreeMap<String, Vec<String>>) -> Result<RankComparison, RankError> {
    let mut iter = rankings.iter();
    let (first_name, first) = iter.next().ok_or(RankError::Empty)?;
    let reference: BTreeSet<&String> = first.iter().collect();
    if reference.len() != first.len() {
        return Err(RankError::ModelSetMismatch(first_name.clone(), first_name.clone()));
    }
    for (name, order) in iter {
        let set: BTreeSet<&String> = order.iter().collect();
        if set != reference || order.len() != first.len() {
            return Err(RankError::ModelSetMismatch(first_name.clone(), name.clone()));
        }
    }
    let metrics: Vec<String> = rankings.keys().cloned().collect();
    let tau = metrics
        .iter()
        .map(|a| metrics.iter().map(|b| kendall_tau(&rankings[a], &rankings[b])).collect())
        .collect();
    Ok(RankComparison {
        metrics,
        tau,
        orders: rankings.clone(),
    })
}

/// Rankings of one dataset's models under the primary and secondary metrics.
pub fn metric_rankings(reports: &[QualityReport]) -> Result<BTreeMap<String, Vec<String>>, RankError> {
    check_reports(reports)?;
    let mut out = BTreeMap::new();
    let candidates: [(&str, fn(&QualityReport) -> Option<f64>, bool); 5] = [
        ("mae2", |r| r.mae2, true),
        ("hist_iou2", |r| r.hist_iou2, false),
        ("jsd1", |r| r.jsd1, true),
        ("jsd2", |r| r.jsd2, true),
        ("wd1", |r| r.wd1_mean(), true),
    ];
    for (name, key, asc) in candidates {
        if reports.iter().any(|r| key(r).is_some()) {
            out.insert(name.to_string(), order_by(reports, key, asc));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{MaeByMode, MaePair, NormalizationMode};

    pub(crate) fn report(dataset: &str, model: &str, mae2: Option<f64>, iou2: Option<f64>) -> QualityReport {
        let pair = MaePair { mae1: None, mae2 };
        QualityReport {
            dataset_id: dataset.into(),
            model_id: model.into(),
            normalization_mode: NormalizationMode::PointMean,
            bins: 10,
            n_real: 1,
            n_synth: 1,
            mae1: None,
            mae2,
            coverage1: None,
            coverage2: None,
            invented1: None,
            invented2: None,
            hist_iou1: None,
            hist_iou2: iou2,
            jsd1: None,
            jsd2: None,
            wd1: Vec::new(),
            mae_by_mode: MaeByMode {
                point_mean: pair,
                variable_l1: pair,
            },
            missing_rates: Vec::new(),
            details: Vec::new(),
            inputs: None,
        }
    }

    #[test]
    fn census_block_order() {
        let reports = vec![
            report("census", "TVAE", Some(0.0070), None),
            report("census", "CTGAN", Some(0.0065), None),
            report("census", "PrivSyn", Some(0.0002), None),
            report("census", "TabDDPM", Some(0.0019), None),
        ];
        let r = rank_models(&reports).unwrap();
        assert_eq!(r.kind, DatasetKind::Categorical);
        assert_eq!(r.model_order(), vec!["PrivSyn", "TabDDPM", "CTGAN", "TVAE"]);
        assert_eq!(r.rows[0].best, vec!["mae2"]);
    }

    #[test]
    fn numerical_sorts_descending_and_ties_by_id() {
        let reports = vec![
            report("abalone", "b", None, Some(0.5)),
            report("abalone", "a", None, Some(0.5)),
            report("abalone", "c", None, Some(0.9)),
        ];
        assert_eq!(rank_models(&reports).unwrap().model_order(), vec!["c", "a", "b"]);
    }

    #[test]
    fn mixed_gets_pareto() {
        let reports = vec![
            report("adult", "x", Some(0.1), Some(0.9)),
            report("adult", "y", Some(0.2), Some(0.8)),
            report("adult", "z", Some(0.3), Some(0.95)),
        ];
        let r = rank_models(&reports).unwrap();
        assert_eq!(r.kind, DatasetKind::Mixed);
        let pareto: Vec<bool> = r.rows.iter().map(|row| row.pareto.unwrap()).collect();
        assert_eq!(pareto, vec![true, false, true]);
    }

    #[test]
    fn errors() {
        assert_eq!(rank_models(&[]), Err(RankError::Empty));
        let mixed = vec![report("a", "m", Some(0.1), None), report("b", "m", Some(0.1), None)];
        assert!(matches!(rank_models(&mixed), Err(RankError::MixedDatasets(..))));
        let mut rankings = BTreeMap::new();
        rankings.insert("a".to_string(), vec!["x".to_string(), "y".to_string()]);
        rankings.insert("b".to_string(), vec!["x".to_string(), "z".to_string()]);
        assert!(matches!(compare_rankings(&rankings), Err(RankError::ModelSetMismatch(..))));
    }

    #[test]
    fn improvement_cases() {
        let i = improvement(0.5563, 0.9622);
        assert!((i.delta - 0.4059).abs() < 1e-9);
        assert_eq!((100.0 * i.pct.unwrap()).round(), 73.0);
        assert_eq!((100.0 * improvement(0.1094, 0.0070).pct.unwrap()).round(), -94.0);
        assert_eq!(improvement(0.3, 0.3), Improvement { delta: 0.0, pct: Some(0.0), zero_baseline: false });
        assert!(improvement(0.0, 0.1).zero_baseline);
    }

    #[test]
    fn tau_extremes() {
        let a: Vec<String> = ["p", "q", "r", "s"].iter().map(|s| s.to_string()).collect();
        let mut b = a.clone();
        assert_eq!(kendall_tau(&a, &b), 1.0);
        b.reverse();
        assert_eq!(kendall_tau(&a, &b), -1.0);
        assert_eq!(kendall_tau(&a[..1], &b[..1]), 1.0);
    }

    #[test]
    fn csv_layouts() {
        let reports = vec![report("d", "m", Some(0.1), None)];
        let csv = rankings_to_csv(&[rank_models(&reports).unwrap()]);
        assert!(csv.starts_with("dataset,model,rank,mae1,mae2,coverage1,coverage2,invented2,hist_iou1,hist_iou2,best,pareto\n"));
        let rows = improvement_table(&[report("d", "m", Some(0.1094), None)], &[report("d", "m", Some(0.0070), None)]);
        let csv = improvements_to_csv(&rows);
        assert!(csv.contains("d,m,0.1094,0.0070,-0.1024,-94%,,,,"), "{csv}");
    }
}
