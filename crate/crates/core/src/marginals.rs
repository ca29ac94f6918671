//! k-way empirical marginals over an aligned real/synthetic pair.
//!
//! A [`MarginalTable`] holds, for one tuple of columns, the joint counts of
//! every level combination observed on either side. Cells are kept sorted by
//! level codes, which (since dictionaries are sorted) is also the
//! lexicographic order of the level strings.

use std::collections::HashMap;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AlignedPair, Column, ColumnKind, Schema, TableData, EXCLUDED};

/// Largest tuple degree the engine will count.
pub const MAX_DEGREE: usize = 3;

/// Joint spaces up to this many cells are counted into dense arrays.
const DENSE_LIMIT: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum MarginalError {
    #[error("tuple {0:?} is not a strictly increasing list of valid column indices")]
    InvalidTuple(Vec<usize>),
    #[error("column `{0}` is numerical and must be binned before counting")]
    BadTuple(String),
    #[error("tuple degree {0} is outside 1..={MAX_DEGREE}")]
    BadDegree(usize),
}

/// Column indices in canonical (strictly increasing) order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VariableTuple(Vec<usize>);

impl VariableTuple {
    pub fn new(mut indices: Vec<usize>) -> Result<Self, MarginalError> {
        indices.sort_unstable();
        if indices.is_empty() || indices.len() > MAX_DEGREE || indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(MarginalError::InvalidTuple(indices));
        }
        Ok(VariableTuple(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    /// Column names joined with `|`.
    pub fn label(&self, schema: &Schema) -> String {
        self.0.iter().map(|&i| schema.columns[i].name.as_str()).join("|")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginalCell {
    pub levels: Vec<u32>,
    pub count_real: u64,
    pub count_synth: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    pub tuple: VariableTuple,
    pub cells: Vec<MarginalCell>,
    /// Real rows counted (rows with an excluded cell in the tuple are skipped).
    pub n_real: u64,
    pub n_synth: u64,
}

impl MarginalTable {
    pub fn p_real(&self, cell: &MarginalCell) -> f64 {
        if self.n_real == 0 {
            0.0
        } else {
            cell.count_real as f64 / self.n_real as f64
        }
    }

    pub fn p_synth(&self, cell: &MarginalCell) -> f64 {
        if self.n_synth == 0 {
            0.0
        } else {
            cell.count_synth as f64 / self.n_synth as f64
        }
    }

    /// `(p_real, p_synth)` for each cell, in cell order.
    pub fn probabilities(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.cells.iter().map(move |c| (self.p_real(c), self.p_synth(c)))
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// All `k`-combinations of the columns of `kind`, in lexicographic order.
pub fn enumerate_tuples(schema: &Schema, k: usize, kind: ColumnKind) -> Vec<VariableTuple> {
    if k == 0 {
        return Vec::new();
    }
    schema
        .indices_of_kind(kind)
        .into_iter()
        .combinations(k)
        .map(VariableTuple)
        .collect()
}

struct CodedView<'a> {
    codes: &'a [u32],
    n_levels: u32,
}

fn coded<'a>(table: &'a TableData, col: usize) -> Result<CodedView<'a>, MarginalError> {
    match &table.columns[col] {
        Column::Categorical(c) => Ok(CodedView {
            codes: &c.codes,
            n_levels: c.levels.len() as u32,
        }),
        Column::Binned(b) => Ok(CodedView {
            codes: &b.bins,
            n_levels: b.n_bins,
        }),
        Column::Numerical(_) => Err(MarginalError::BadTuple(table.schema.columns[col].name.clone())),
    }
}

/// Mixed-radix key for every row; `None` when a cell in the tuple is excluded.
fn composite_counts(views: &[CodedView<'_>], radices: &[u64], n_rows: usize, dense: bool, space: u64) -> Counts {
    let key_of = |row: usize| -> Option<u64> {
        let mut key = 0u64;
        for (v, &r) in views.iter().zip(radices) {
            let c = v.codes[row];
            if c == EXCLUDED {
                return None;
            }
            key = key * r + c as u64;
        }
        Some(key)
    };
    if dense {
        let mut counts = vec![0u64; space as usize];
        let mut n = 0u64;
        // Specialised loops for the common degrees keep the hot path branch-light.
        match views {
            [a] => {
                for &c in a.codes {
                    if c != EXCLUDED {
                        counts[c as usize] += 1;
                        n += 1;
                    }
                }
            }
            [a, b] => {
                let rb = radices[1] as usize;
                for (&x, &y) in a.codes.iter().zip(b.codes) {
                    if x != EXCLUDED && y != EXCLUDED {
                        counts[x as usize * rb + y as usize] += 1;
                        n += 1;
                    }
                }
            }
            _ => {
                for row in 0..n_rows {
                    if let Some(k) = key_of(row) {
                        counts[k as usize] += 1;
                        n += 1;
                    }
                }
            }
        }
        Counts::Dense(counts, n)
    } else {
        let mut counts: HashMap<u64, u64> = HashMap::new();
        let mut n = 0u64;
        for row in 0..n_rows {
            if let Some(k) = key_of(row) {
                *counts.entry(k).or_insert(0) += 1;
                n += 1;
            }
        }
        Counts::Sparse(counts, n)
    }
}

enum Counts {
    Dense(Vec<u64>, u64),
    Sparse(HashMap<u64, u64>, u64),
}

impl Counts {
    fn total(&self) -> u64 {
        match self {
            Counts::Dense(_, n) | Counts::Sparse(_, n) => *n,
        }
    }
}

fn decode(mut key: u64, radices: &[u64]) -> Vec<u32> {
    let mut out = vec![0u32; radices.len()];
    for (slot, &r) in out.iter_mut().zip(radices).rev() {
        *slot = (key % r) as u32;
        key /= r;
    }
    out
}

/// Counts the joint distribution of `tuple` on both sides of the pair.
pub fn count_marginal(pair: &AlignedPair, tuple: &VariableTuple) -> Result<MarginalTable, MarginalError> {
    let ncols = pair.schema.columns.len();
    if tuple.indices().iter().any(|&i| i >= ncols) {
        return Err(MarginalError::InvalidTuple(tuple.indices().to_vec()));
    }
    let real_views: Vec<CodedView<'_>> = tuple
        .indices()
        .iter()
        .map(|&i| coded(&pair.real, i))
        .collect::<Result<_, _>>()?;
    let synth_views: Vec<CodedView<'_>> = tuple
        .indices()
        .iter()
        .map(|&i| coded(&pair.synth, i))
        .collect::<Result<_, _>>()?;
    // Both sides share the merged dictionary, so radices agree.
    let radices: Vec<u64> = real_views
        .iter()
        .zip(&synth_views)
        .map(|(r, s)| r.n_levels.max(s.n_levels).max(1) as u64)
        .collect();
    let space = radices.iter().try_fold(1u64, |acc, &r| acc.checked_mul(r));
    let dense = matches!(space, Some(s) if s <= DENSE_LIMIT);
    let space = space.unwrap_or(u64::MAX);

    let real = composite_counts(&real_views, &radices, pair.real.n_rows, dense, space);
    let synth = composite_counts(&synth_views, &radices, pair.synth.n_rows, dense, space);
    let (n_real, n_synth) = (real.total(), synth.total());

    let cells = match (real, synth) {
        (Counts::Dense(r, _), Counts::Dense(s, _)) => r
            .iter()
            .zip(&s)
            .enumerate()
            .filter(|(_, (a, b))| **a > 0 || **b > 0)
            .map(|(key, (&a, &b))| MarginalCell {
                levels: decode(key as u64, &radices),
                count_real: a,
                count_synth: b,
            })
            .collect(),
        (Counts::Sparse(r, _), Counts::Sparse(s, _)) => {
            let mut merged: HashMap<u64, (u64, u64)> = HashMap::with_capacity(r.len() + s.len());
            for (k, v) in r {
                merged.entry(k).or_default().0 = v;
            }
            for (k, v) in s {
                merged.entry(k).or_default().1 = v;
            }
            let mut keys: Vec<_> = merged.into_iter().collect();
            keys.sort_unstable_by_key(|(k, _)| *k);
            keys.into_iter()
                .map(|(key, (a, b))| MarginalCell {
                    levels: decode(key, &radices),
                    count_real: a,
                    count_synth: b,
                })
                .collect()
        }
        _ => unreachable!("both sides use the same counting strategy"),
    };

    Ok(MarginalTable {
        tuple: tuple.clone(),
        cells,
        n_real,
        n_synth,
    })
}

/// Counts every tuple in parallel; the result is in input order.
pub fn count_all(pair: &AlignedPair, tuples: &[VariableTuple]) -> Result<Vec<MarginalTable>, MarginalError> {
    tuples.par_iter().map(|t| count_marginal(pair, t)).collect()
}
