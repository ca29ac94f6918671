//! Shared fixtures and brute-force oracles for integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthqa::dataset::{read_csv, ColumnKind, ColumnSpec, Schema, TableData, MISSING_LEVEL};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random (real, synthetic) pair kept both as raw string rows and as
/// parsed tables.
pub struct Fixture {
    pub schema: Schema,
    pub real_rows: Vec<Vec<String>>,
    pub synth_rows: Vec<Vec<String>>,
    pub real: TableData,
    pub synth: TableData,
}

pub struct FixtureShape {
    pub max_cols: usize,
    pub max_levels: usize,
    pub max_rows: usize,
    /// Probability that a column is numerical.
    pub numeric_share: f64,
    /// Per-cell probability of a missing value.
    pub missing_rate: f64,
}

impl FixtureShape {
    pub fn categorical(max_cols: usize, max_levels: usize, max_rows: usize) -> Self {
        FixtureShape {
            max_cols,
            max_levels,
            max_rows,
            numeric_share: 0.0,
            missing_rate: 0.05,
        }
    }
}

pub fn to_csv(schema: &Schema, rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(schema.columns.iter().map(|c| c.name.as_str())).unwrap();
    for r in rows {
        w.write_record(r).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn parse(schema: &Schema, rows: &[Vec<String>]) -> TableData {
    read_csv(to_csv(schema, rows).as_bytes(), schema).unwrap()
}

pub fn random_schema(r: &mut ChaCha8Rng, shape: &FixtureShape) -> Schema {
    let n = r.random_range(1..=shape.max_cols);
    let columns = (0..n)
        .map(|i| ColumnSpec {
            name: format!("c{i}"),
            kind: if r.random_bool(shape.numeric_share) {
                ColumnKind::Numerical
            } else {
                ColumnKind::Categorical
            },
        })
        .collect();
    Schema::new(columns, "").unwrap()
}

fn random_rows(r: &mut ChaCha8Rng, schema: &Schema, n: usize, levels: &[usize], missing_rate: f64) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            schema
                .columns
                .iter()
                .zip(levels)
                .map(|(c, &k)| {
                    if r.random_bool(missing_rate) {
                        return String::new();
                    }
                    match c.kind {
                        ColumnKind::Categorical => ((b'A' + r.random_range(0..k) as u8) as char).to_string(),
                        ColumnKind::Numerical => format!("{:.2}", r.random_range(-5.0..20.0f64)),
                    }
                })
                .collect()
        })
        .collect()
}

pub fn random_fixture(seed: u64, shape: &FixtureShape) -> Fixture {
    let mut r = rng(seed);
    let schema = random_schema(&mut r, shape);
    let levels_real: Vec<usize> = schema.columns.iter().map(|_| r.random_range(1..=shape.max_levels)).collect();
    // Synthetic side may use a different alphabet size: invented and uncovered levels.
    let levels_synth: Vec<usize> = schema.columns.iter().map(|_| r.random_range(1..=shape.max_levels)).collect();
    let n_real = r.random_range(1..=shape.max_rows);
    let n_synth = r.random_range(1..=shape.max_rows);
    let real_rows = random_rows(&mut r, &schema, n_real, &levels_real, shape.missing_rate);
    let synth_rows = random_rows(&mut r, &schema, n_synth, &levels_synth, shape.missing_rate);
    Fixture {
        real: parse(&schema, &real_rows),
        synth: parse(&schema, &synth_rows),
        schema,
        real_rows,
        synth_rows,
    }
}

/// Same rows on both sides.
pub fn identical_fixture(seed: u64, shape: &FixtureShape) -> Fixture {
    let f = random_fixture(seed, shape);
    Fixture {
        synth: f.real.clone(),
        synth_rows: f.real_rows.clone(),
        ..f
    }
}

// ---- brute-force oracle -------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct OracleTuple {
    pub columns: Vec<String>,
    pub mae_point_mean: Option<f64>,
    pub mae_l1: Option<f64>,
    pub tvd: Option<f64>,
    pub coverage: Option<f64>,
    pub invented: Option<f64>,
    pub hist_iou: Option<f64>,
    pub jsd: Option<f64>,
    /// (level tuple) -> (real count, synth count)
    pub counts: BTreeMap<Vec<String>, (u64, u64)>,
}

#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub cat1: Vec<OracleTuple>,
    pub cat2: Vec<OracleTuple>,
    pub num1: Vec<OracleTuple>,
    pub num2: Vec<OracleTuple>,
    pub wd1: Vec<Option<f64>>,
}

fn avg(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

impl OracleReport {
    pub fn mae1(&self) -> Option<f64> {
        avg(self.cat1.iter().map(|t| t.mae_point_mean))
    }
    pub fn mae2(&self) -> Option<f64> {
        avg(self.cat2.iter().map(|t| t.mae_point_mean))
    }
    pub fn mae1_l1(&self) -> Option<f64> {
        avg(self.cat1.iter().map(|t| t.mae_l1))
    }
    pub fn mae2_l1(&self) -> Option<f64> {
        avg(self.cat2.iter().map(|t| t.mae_l1))
    }
    pub fn coverage1(&self) -> Option<f64> {
        avg(self.cat1.iter().map(|t| t.coverage))
    }
    pub fn coverage2(&self) -> Option<f64> {
        avg(self.cat2.iter().map(|t| t.coverage))
    }
    pub fn invented1(&self) -> Option<f64> {
        avg(self.cat1.iter().map(|t| t.invented))
    }
    pub fn invented2(&self) -> Option<f64> {
        avg(self.cat2.iter().map(|t| t.invented))
    }
    pub fn hist_iou1(&self) -> Option<f64> {
        avg(self.num1.iter().map(|t| t.hist_iou))
    }
    pub fn hist_iou2(&self) -> Option<f64> {
        avg(self.num2.iter().map(|t| t.hist_iou))
    }
    pub fn jsd1(&self) -> Option<f64> {
        avg(self.cat1.iter().chain(&self.num1).map(|t| t.jsd))
    }
    pub fn jsd2(&self) -> Option<f64> {
        avg(self.cat2.iter().chain(&self.num2).map(|t| t.jsd))
    }
}

/// Ten equal-width bins over the observed real range; a constant or empty
/// column is a single bin. Values outside the range fall into the edge bins.
fn oracle_bin(real_values: &[f64], x: f64) -> usize {
    let lo = real_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = real_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return 0;
    }
    let w = (hi - lo) / 10.0;
    ((x - lo) / w).floor().clamp(0.0, 9.0) as usize
}

fn cell_key(fix: &Fixture, row: &[String], col: usize, real_num: &[Vec<f64>]) -> Option<String> {
    let raw = &row[col];
    match fix.schema.columns[col].kind {
        ColumnKind::Categorical => Some(if raw.is_empty() { MISSING_LEVEL.to_string() } else { raw.clone() }),
        ColumnKind::Numerical => {
            if raw.is_empty() {
                None
            } else {
                Some(format!("bin{}", oracle_bin(&real_num[col], raw.parse().unwrap())))
            }
        }
    }
}

fn oracle_tuple(fix: &Fixture, cols: &[usize], real_num: &[Vec<f64>], numeric: bool) -> OracleTuple {
    let mut counts: BTreeMap<Vec<String>, (u64, u64)> = BTreeMap::new();
    let (mut n_real, mut n_synth) = (0u64, 0u64);
    for row in &fix.real_rows {
        let key: Option<Vec<String>> = cols.iter().map(|&c| cell_key(fix, row, c, real_num)).collect();
        if let Some(k) = key {
            counts.entry(k).or_default().0 += 1;
            n_real += 1;
        }
    }
    for row in &fix.synth_rows {
        let key: Option<Vec<String>> = cols.iter().map(|&c| cell_key(fix, row, c, real_num)).collect();
        if let Some(k) = key {
            counts.entry(k).or_default().1 += 1;
            n_synth += 1;
        }
    }
    let p = |c: u64, n: u64| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    let mut t = OracleTuple {
        columns: cols.iter().map(|&c| fix.schema.columns[c].name.clone()).collect(),
        ..Default::default()
    };
    if !counts.is_empty() {
        let mut l1 = 0.0;
        let (mut mn, mut mx) = (0.0, 0.0);
        let mut js = 0.0;
        for &(cr, cs) in counts.values() {
            let (a, b) = (p(cr, n_real), p(cs, n_synth));
            l1 += (a - b).abs();
            mn += a.min(b);
            mx += a.max(b);
            let m = (a + b) / 2.0;
            if a > 0.0 {
                js += a * (a / m).log2() / 2.0;
            }
            if b > 0.0 {
                js += b * (b / m).log2() / 2.0;
            }
        }
        t.mae_l1 = Some(l1);
        t.mae_point_mean = Some(l1 / counts.len() as f64);
        t.tvd = Some(0.5 * l1);
        t.jsd = Some(js.clamp(0.0, 1.0).sqrt());
        if numeric && mx > 0.0 {
            t.hist_iou = Some(mn / mx);
        }
    }
    if !numeric {
        let real_keys: BTreeSet<&Vec<String>> = counts.iter().filter(|(_, c)| c.0 > 0).map(|(k, _)| k).collect();
        if !real_keys.is_empty() {
            let covered = real_keys.iter().filter(|k| counts[**k].1 > 0).count();
            t.coverage = Some(covered as f64 / real_keys.len() as f64);
        }
        if n_synth > 0 {
            let mut outside = 0u64;
            for row in &fix.synth_rows {
                let key: Vec<String> = cols.iter().map(|&c| cell_key(fix, row, c, real_num).unwrap()).collect();
                if !real_keys.contains(&key) {
                    outside += 1;
                }
            }
            t.invented = Some(outside as f64 / n_synth as f64);
        }
    }
    t.counts = counts;
    t
}

/// Exact W1 by integrating |F_a - F_b| between consecutive sample points.
pub fn oracle_wasserstein(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut pts: Vec<f64> = a.iter().chain(b).cloned().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let cdf = |xs: &[f64], t: f64| xs.iter().filter(|&&x| x <= t).count() as f64 / xs.len() as f64;
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += (cdf(a, w[0]) - cdf(b, w[0])).abs() * (w[1] - w[0]);
    }
    Some(total)
}

fn observed(rows: &[Vec<String>], col: usize) -> Vec<f64> {
    rows.iter().filter(|r| !r[col].is_empty()).map(|r| r[col].parse().unwrap()).collect()
}

pub fn oracle(fix: &Fixture) -> OracleReport {
    let n = fix.schema.columns.len();
    let real_num: Vec<Vec<f64>> = (0..n)
        .map(|c| match fix.schema.columns[c].kind {
            ColumnKind::Numerical => observed(&fix.real_rows, c),
            ColumnKind::Categorical => Vec::new(),
        })
        .collect();
    let of_kind = |k: ColumnKind| -> Vec<usize> { (0..n).filter(|&c| fix.schema.columns[c].kind == k).collect() };
    let cat = of_kind(ColumnKind::Categorical);
    let num = of_kind(ColumnKind::Numerical);
    let pairs = |cols: &[usize]| -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for i in 0..cols.len() {
            for j in i + 1..cols.len() {
                out.push(vec![cols[i], cols[j]]);
            }
        }
        out
    };
    OracleReport {
        cat1: cat.iter().map(|&c| oracle_tuple(fix, &[c], &real_num, false)).collect(),
        cat2: pairs(&cat).iter().map(|p| oracle_tuple(fix, p, &real_num, false)).collect(),
        num1: num.iter().map(|&c| oracle_tuple(fix, &[c], &real_num, true)).collect(),
        num2: pairs(&num).iter().map(|p| oracle_tuple(fix, p, &real_num, true)).collect(),
        wd1: num
            .iter()
            .map(|&c| oracle_wasserstein(&observed(&fix.real_rows, c), &observed(&fix.synth_rows, c)))
            .collect(),
    }
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

/// O(n^2) Pareto front over loss vectors.
pub fn brute_front(points: &[Vec<f64>]) -> BTreeSet<usize> {
    (0..points.len())
        .filter(|&i| {
            !(0..points.len()).any(|j| {
                points[j].iter().zip(&points[i]).all(|(a, b)| a <= b) && points[j].iter().zip(&points[i]).any(|(a, b)| a < b)
            })
        })
        .collect()
}

/// Kendall tau by concordant/discordant pair counting.
pub fn brute_tau(a: &[String], b: &[String]) -> f64 {
    let pos = |v: &[String], m: &str| v.iter().position(|x| x == m).unwrap() as i64;
    let (mut c, mut d) = (0i64, 0i64);
    for i in 0..a.len() {
        for j in 0..a.len() {
            if i < j {
                let s = (pos(a, &a[i]) - pos(a, &a[j])) * (pos(b, &a[i]) - pos(b, &a[j]));
                if s > 0 {
                    c += 1;
                } else if s < 0 {
                    d += 1;
                }
            }
        }
    }
    let pairs = (a.len() * a.len().saturating_sub(1) / 2) as f64;
    if pairs == 0.0 {
        1.0
    } else {
        (c - d) as f64 / pairs
    }
}
