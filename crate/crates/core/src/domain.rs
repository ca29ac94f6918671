//! Declarative domain-validity rules over pairs of columns.
//!
//! Three rule classes are supported:
//!
//! * `prefix`: the value of one column must be a string prefix of another
//!   (a 3-character ICD chapter and the full ICD code);
//! * `exclusion`: listed value pairs are forbidden (sex-specific chapters);
//! * `range`: per level of a grouping column, the bounded column must stay
//!   within `[min, max]`, either given or fitted from the real data
//!   (out-of-range detection, e.g. age group per chapter).
//!
//! A pair that is merely absent from the real data is not a violation; only
//! what the rules forbid is counted.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Column, TableData, MISSING_LEVEL};

/// Matches any value on its side of an exclusion pair.
pub const WILDCARD: &str = "*";

/// Number of example violations kept per rule.
pub const SAMPLE_CAP: usize = 20;

const SHIPPED_SEX_ICD: &str = include_str!("../rules/icd10_sex_exclusion.json");

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("rule references unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` has the wrong kind for this rule")]
    WrongKind(String),
    #[error("level `{level}` of `{column}` is not in the declared order")]
    UnorderedLevel { column: String, level: String },
    #[error("range for group `{0}` has min > max")]
    InvertedBounds(String),
    #[error("invalid rule file: {0}")]
    Parse(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixRule {
    #[serde(default)]
    pub name: Option<String>,
    pub full_col: String,
    pub prefix_col: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionRule {
    #[serde(default)]
    pub name: Option<String>,
    pub col_a: String,
    pub col_b: String,
    pub forbidden_pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeRule {
    #[serde(default)]
    pub name: Option<String>,
    pub group_col: String,
    pub bounded_col: String,
    /// Ordered levels of a categorical bounded column; positions are the
    /// values compared against the bounds. Absent for numerical columns.
    #[serde(default)]
    pub order: Option<Vec<String>>,
    /// Bounds per group level. Empty until given or fitted.
    #[serde(default)]
    pub bounds: BTreeMap<String, Bounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Rule {
    Prefix(PrefixRule),
    Exclusion(ExclusionRule),
    Range(RangeRule),
}

impl Rule {
    pub fn name(&self) -> String {
        match self {
            Rule::Prefix(r) => r
                .name
                .clone()
                .unwrap_or_else(|| format!("{} vs {}", r.full_col, r.prefix_col)),
            Rule::Exclusion(r) => r.name.clone().unwrap_or_else(|| format!("{} vs {}", r.col_a, r.col_b)),
            Rule::Range(r) => r
                .name
                .clone()
                .unwrap_or_else(|| format!("{} vs {}", r.bounded_col, r.group_col)),
        }
    }

    /// The `(a, b)` columns whose level pairs are reported.
    fn columns(&self) -> (&str, &str) {
        match self {
            Rule::Prefix(r) => (&r.full_col, &r.prefix_col),
            Rule::Exclusion(r) => (&r.col_a, &r.col_b),
            Rule::Range(r) => (&r.bounded_col, &r.group_col),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn from_json(text: &str) -> Result<Self, DomainError> {
        serde_json::from_str(text).map_err(|e| DomainError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DomainError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Sex versus ICD-10 chapter exclusions for the genital-organ chapters
    /// (`SEX`: 1 = male, 2 = female; `ICDGM10DREI`: 3-character chapter).
    pub fn shipped_sex_icd() -> Self {
        Self::from_json(SHIPPED_SEX_ICD).expect("shipped rule file is valid")
    }

    /// Checks that every referenced column exists with a usable kind.
    pub fn validate(&self, data: &TableData) -> Result<(), DomainError> {
        for rule in &self.rules {
            let (a, b) = rule.columns();
            for col in [a, b] {
                let c = data.column(col).ok_or_else(|| DomainError::UnknownColumn(col.to_string()))?;
                let needs_categorical = match rule {
                    Rule::Range(r) => col == r.group_col || r.order.is_some(),
                    _ => true,
                };
                let ok = match c {
                    Column::Categorical(_) => needs_categorical,
                    Column::Numerical(_) => !needs_categorical,
                    Column::Binned(_) => false,
                };
                if !ok {
                    return Err(DomainError::WrongKind(col.to_string()));
                }
            }
            if let Rule::Range(r) = rule {
                for (g, b) in &r.bounds {
                    if b.min > b.max {
                        return Err(DomainError::InvertedBounds(g.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Position lookup for an ordinal column.
fn ordinal_positions(rule: &RangeRule, col: &crate::dataset::CategoricalColumn) -> Result<Vec<Option<f64>>, DomainError> {
    let order = rule.order.as_ref().expect("ordinal rule");
    col.levels
        .iter()
        .map(|level| {
            if level == MISSING_LEVEL {
                return Ok(None);
            }
            order
                .iter()
                .position(|o| o == level)
                .map(|p| Some(p as f64))
                .ok_or_else(|| DomainError::UnorderedLevel {
                    column: rule.bounded_col.clone(),
                    level: level.clone(),
                })
        })
        .collect()
}

/// Bounded value per row (`None` when missing).
fn bounded_values(rule: &RangeRule, data: &TableData) -> Result<Vec<Option<f64>>, DomainError> {
    let col = data
        .column(&rule.bounded_col)
        .ok_or_else(|| DomainError::UnknownColumn(rule.bounded_col.clone()))?;
    match (col, &rule.order) {
        (Column::Categorical(c), Some(_)) => {
            let pos = ordinal_positions(rule, c)?;
            Ok(c.codes.iter().map(|&code| pos[code as usize]).collect())
        }
        (Column::Numerical(c), None) => Ok(c
            .values
            .iter()
            .zip(&c.missing)
            .map(|(v, m)| (!m).then_some(*v))
            .collect()),
        _ => Err(DomainError::WrongKind(rule.bounded_col.clone())),
    }
}

fn categorical<'a>(data: &'a TableData, name: &str) -> Result<&'a crate::dataset::CategoricalColumn, DomainError> {
    data.column(name)
        .ok_or_else(|| DomainError::UnknownColumn(name.to_string()))?
        .as_categorical()
        .ok_or_else(|| DomainError::WrongKind(name.to_string()))
}

/// Fits per-group `[min, max]` bounds from the real data. Group levels with no
/// observed bounded value get no bound.
pub fn fit_range_rule(rule: &RangeRule, real: &TableData) -> Result<RangeRule, DomainError> {
    let group = categorical(real, &rule.group_col)?;
    let values = bounded_values(rule, real)?;
    let mut bounds: BTreeMap<String, Bounds> = BTreeMap::new();
    for (row, v) in values.iter().enumerate() {
        let Some(v) = *v else { continue };
        let g = group.level(row);
        if g == MISSING_LEVEL {
            continue;
        }
        bounds
            .entry(g.to_string())
            .and_modify(|b| {
                b.min = b.min.min(v);
                b.max = b.max.max(v);
            })
            .or_insert(Bounds { min: v, max: v });
    }
    Ok(RangeRule {
        bounds,
        ..rule.clone()
    })
}

/// Fits every range rule that has no explicit bounds.
pub fn fit_ranges(rules: &RuleSet, real: &TableData) -> Result<RuleSet, DomainError> {
    let rules = rules
        .rules
        .iter()
        .map(|r| match r {
            Rule::Range(rr) if rr.bounds.is_empty() => fit_range_rule(rr, real).map(Rule::Range),
            other => Ok(other.clone()),
        })
        .collect::<Result<_, _>>()?;
    Ok(RuleSet { rules })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationExample {
    pub a: String,
    pub b: String,
    pub rows: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleViolations {
    pub rule: String,
    pub kind: String,
    pub columns: (String, String),
    pub n_distinct_violating_level_pairs: u64,
    pub n_violating_rows: u64,
    pub pct_samples_affected: f64,
    /// Product of the two dictionary sizes; `None` for a numerical bounded column.
    pub possible_levels: Option<u64>,
    pub levels_observed_in_real: Option<u64>,
    pub examples: Vec<ViolationExample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub n_rows: usize,
    pub rules: Vec<RuleViolations>,
}

impl ViolationReport {
    /// One CSV row per rule.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "rule",
            "n_distinct",
            "pct_samples",
            "n_violating_rows",
            "possible_levels",
            "levels_observed_in_real",
        ])
        .expect("in-memory write");
        for r in &self.rules {
            let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                r.rule.clone(),
                r.n_distinct_violating_level_pairs.to_string(),
                format!("{:.2}%", 100.0 * r.pct_samples_affected),
                r.n_violating_rows.to_string(),
                opt(r.possible_levels),
                opt(r.levels_observed_in_real),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

fn distinct_pairs(data: &TableData, a: &str, b: &str) -> Option<u64> {
    let (ca, cb) = (data.column(a)?, data.column(b)?);
    let key = |c: &Column, row: usize| -> Option<String> {
        match c {
            Column::Categorical(c) => Some(c.level(row).to_string()),
            Column::Numerical(c) => (!c.missing[row]).then(|| c.values[row].to_string()),
            Column::Binned(_) => None,
        }
    };
    let mut seen = BTreeSet::new();
    for row in 0..data.n_rows {
        if let (Some(x), Some(y)) = (key(ca, row), key(cb, row)) {
            seen.insert((x, y));
        }
    }
    Some(seen.len() as u64)
}

fn dictionary_size(data: &TableData, col: &str) -> Option<u64> {
    let c = data.column(col)?.as_categorical()?;
    let mut seen = vec![false; c.levels.len()];
    for &code in &c.codes {
        seen[code as usize] = true;
    }
    Some(seen.iter().filter(|s| **s).count() as u64)
}

fn exclusion_matcher(rule: &ExclusionRule) -> impl Fn(&str, &str) -> bool + '_ {
    move |a: &str, b: &str| {
        rule.forbidden_pairs
            .iter()
            .any(|(fa, fb)| (fa == WILDCARD || fa == a) && (fb == WILDCARD || fb == b))
    }
}

/// Evaluates every rule on `data`. Cardinalities come from `reference`
/// (the real data) when given, otherwise from `data` itself.
pub fn check(rules: &RuleSet, data: &TableData, reference: Option<&TableData>) -> Result<ViolationReport, DomainError> {
    rules.validate(data)?;
    let reference = reference.unwrap_or(data);
    let mut out = Vec::with_capacity(rules.rules.len());
    for rule in &rules.rules {
        let (a_name, b_name) = rule.columns();
        // Violating rows grouped by level pair.
        let mut violating: BTreeMap<(String, String), u64> = BTreeMap::new();
        match rule {
            Rule::Prefix(r) => {
                let full = categorical(data, &r.full_col)?;
                let prefix = categorical(data, &r.prefix_col)?;
                for row in 0..data.n_rows {
                    let (f, p) = (full.level(row), prefix.level(row));
                    if f == MISSING_LEVEL || p == MISSING_LEVEL {
                        continue;
                    }
                    if !f.starts_with(p) {
                        *violating.entry((f.to_string(), p.to_string())).or_insert(0) += 1;
                    }
                }
            }
            Rule::Exclusion(r) => {
                let a = categorical(data, &r.col_a)?;
                let b = categorical(data, &r.col_b)?;
                let forbidden = exclusion_matcher(r);
                for row in 0..data.n_rows {
                    let (x, y) = (a.level(row), b.level(row));
                    if forbidden(x, y) {
                        *violating.entry((x.to_string(), y.to_string())).or_insert(0) += 1;
                    }
                }
            }
            Rule::Range(r) => {
                let group = categorical(data, &r.group_col)?;
                let values = bounded_values(r, data)?;
                let bounded = data.column(&r.bounded_col).expect("validated");
                for (row, v) in values.iter().enumerate() {
                    let Some(v) = *v else { continue };
                    let g = group.level(row);
                    let Some(b) = r.bounds.get(g) else { continue };
                    if v < b.min || v > b.max {
                        let shown = match bounded {
                            Column::Categorical(c) => c.level(row).to_string(),
                            _ => v.to_string(),
                        };
                        *violating.entry((shown, g.to_string())).or_insert(0) += 1;
                    }
                }
            }
        }
        let n_violating_rows: u64 = violating.values().sum();
        let possible_levels = match (dictionary_size(reference, a_name), dictionary_size(reference, b_name)) {
            (Some(x), Some(y)) => Some(x * y),
            _ => None,
        };
        let mut examples: Vec<ViolationExample> = violating
            .iter()
            .map(|((a, b), &rows)| ViolationExample {
                a: a.clone(),
                b: b.clone(),
                rows,
            })
            .collect();
        examples.sort_by(|x, y| y.rows.cmp(&x.rows).then_with(|| (&x.a, &x.b).cmp(&(&y.a, &y.b))));
        examples.truncate(SAMPLE_CAP);
        out.push(RuleViolations {
            rule: rule.name(),
            kind: match rule {
                Rule::Prefix(_) => "prefix",
                Rule::Exclusion(_) => "exclusion",
                Rule::Range(_) => "range",
            }
            .to_string(),
            columns: (a_name.to_string(), b_name.to_string()),
            n_distinct_violating_level_pairs: violating.len() as u64,
            n_violating_rows,
            pct_samples_affected: if data.n_rows == 0 {
                0.0
            } else {
                n_violating_rows as f64 / data.n_rows as f64
            },
            possible_levels,
            levels_observed_in_real: distinct_pairs(reference, a_name, b_name),
            examples,
        });
    }
    Ok(ViolationReport {
        n_rows: data.n_rows,
        rules: out,
    })
}
