//! Typed tabular datasets: explicit schemas, CSV loading, dictionary
//! alignment between a real and a synthetic table, and the one-hot
//! "vector size" accounting used to characterise a dataset.
//!
//! Categorical columns are stored as integer codes into a per-column level
//! dictionary. Dictionaries are kept sorted by level string, so code order
//! and string order always agree; this is what makes marginal tables and
//! reports byte-stable regardless of row order.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Level used for categorical cells equal to the schema's missing token.
pub const MISSING_LEVEL: &str = "«missing»";

/// Sentinel code for a cell that is excluded from counting (missing numeric).
pub const EXCLUDED: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("column `{0}` declared in the schema is absent from the CSV header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    ParseError {
        row: usize,
        column: String,
        value: String,
    },
    #[error("file {0} is empty")]
    EmptyFile(PathBuf),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("malformed table: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub missing_token: String,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>, missing_token: impl Into<String>) -> Result<Self, DatasetError> {
        let schema = Schema {
            columns,
            missing_token: missing_token.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Convenience constructor from `(name, kind)` pairs with an empty missing token.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, ColumnKind)]) -> Result<Self, DatasetError> {
        Self::new(
            pairs
                .iter()
                .map(|(n, k)| ColumnSpec {
                    name: n.as_ref().to_string(),
                    kind: *k,
                })
                .collect(),
            "",
        )
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.columns.is_empty() {
            return Err(DatasetError::InvalidSchema("at least one column is required".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if c.name.is_empty() {
                return Err(DatasetError::InvalidSchema("column names must be non-empty".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(DatasetError::InvalidSchema(format!("duplicate column `{}`", c.name)));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let schema: Schema = serde_json::from_str(&text)
            .map_err(|e| DatasetError::InvalidSchema(format!("{}: {e}", path.display())))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn kind(&self, idx: usize) -> ColumnKind {
        self.columns[idx].kind
    }

    pub fn indices_of_kind(&self, kind: ColumnKind) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalColumn {
    pub codes: Vec<u32>,
    /// Sorted, duplicate-free level strings; `codes` index into this.
    pub levels: Vec<String>,
}

impl CategoricalColumn {
    /// Builds a column from raw strings, assigning codes in sorted level order.
    pub fn from_strings<S: AsRef<str>>(values: &[S]) -> Self {
        let levels: Vec<String> = values
            .iter()
            .map(|v| v.as_ref())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect();
        let index: HashMap<&str, u32> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let codes = values.iter().map(|v| index[v.as_ref()]).collect();
        CategoricalColumn { codes, levels }
    }

    pub fn level(&self, row: usize) -> &str {
        &self.levels[self.codes[row] as usize]
    }

    pub fn code_of(&self, level: &str) -> Option<u32> {
        self.levels
            .binary_search_by(|l| l.as_str().cmp(level))
            .ok()
            .map(|i| i as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericalColumn {
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl NumericalColumn {
    pub fn from_values(values: Vec<f64>) -> Self {
        let missing = values.iter().map(|v| v.is_nan()).collect();
        NumericalColumn { values, missing }
    }

    /// Non-missing values in row order.
    pub fn observed(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.missing)
            .filter(|(_, m)| !**m)
            .map(|(v, _)| *v)
            .collect()
    }

    pub fn missing_rate(&self) -> f64 {
        if self.missing.is_empty() {
            return 0.0;
        }
        self.missing.iter().filter(|m| **m).count() as f64 / self.missing.len() as f64
    }
}

/// A numerical column discretised into equal-width bins; rows whose value was
/// missing carry [`EXCLUDED`].
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedColumn {
    pub bins: Vec<u32>,
    pub n_bins: u32,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Categorical(CategoricalColumn),
    Numerical(NumericalColumn),
    Binned(BinnedColumn),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Categorical(c) => c.codes.len(),
            Column::Numerical(c) => c.values.len(),
            Column::Binned(c) => c.bins.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_categorical(&self) -> Option<&CategoricalColumn> {
        match self {
            Column::Categorical(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_numerical(&self) -> Option<&NumericalColumn> {
        match self {
            Column::Numerical(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableData {
    pub schema: Schema,
    pub n_rows: usize,
    pub columns: Vec<Column>,
}

impl TableData {
    /// Assembles a table and checks the structural invariants.
    pub fn new(schema: Schema, columns: Vec<Column>) -> Result<Self, DatasetError> {
        schema.validate()?;
        if columns.len() != schema.columns.len() {
            return Err(DatasetError::Malformed(format!(
                "{} columns for a schema of {}",
                columns.len(),
                schema.columns.len()
            )));
        }
        let n_rows = columns.first().map(Column::len).unwrap_or(0);
        for (spec, col) in schema.columns.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(DatasetError::Malformed(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    spec.name,
                    col.len()
                )));
            }
            match (spec.kind, col) {
                (ColumnKind::Categorical, Column::Categorical(c)) => {
                    if c.levels.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(DatasetError::Malformed(format!(
                            "levels of `{}` must be sorted and unique",
                            spec.name
                        )));
                    }
                    let n = c.levels.len() as u32;
                    if c.codes.iter().any(|&code| code >= n) {
                        return Err(DatasetError::Malformed(format!(
                            "code out of range in `{}`",
                            spec.name
                        )));
                    }
                }
                (ColumnKind::Numerical, Column::Numerical(c)) => {
                    if c.missing.len() != c.values.len() {
                        return Err(DatasetError::Malformed(format!(
                            "missing mask length mismatch in `{}`",
                            spec.name
                        )));
                    }
                }
                (ColumnKind::Numerical, Column::Binned(c)) => {
                    if c.bins.iter().any(|&b| b != EXCLUDED && b >= c.n_bins) {
                        return Err(DatasetError::Malformed(format!(
                            "bin out of range in `{}`",
                            spec.name
                        )));
                    }
                }
                _ => {
                    return Err(DatasetError::Malformed(format!(
                        "column `{}` storage does not match its declared kind",
                        spec.name
                    )))
                }
            }
        }
        Ok(TableData {
            schema,
            n_rows,
            columns,
        })
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.schema.index_of(name).map(|i| &self.columns[i])
    }

    /// Keeps only the given rows, in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> TableData {
        let columns = self
            .columns
            .iter()
            .map(|col| match col {
                Column::Categorical(c) => Column::Categorical(CategoricalColumn {
                    codes: rows.iter().map(|&r| c.codes[r]).collect(),
                    levels: c.levels.clone(),
                }),
                Column::Numerical(c) => Column::Numerical(NumericalColumn {
                    values: rows.iter().map(|&r| c.values[r]).collect(),
                    missing: rows.iter().map(|&r| c.missing[r]).collect(),
                }),
                Column::Binned(c) => Column::Binned(BinnedColumn {
                    bins: rows.iter().map(|&r| c.bins[r]).collect(),
                    ..c.clone()
                }),
            })
            .collect();
        TableData {
            schema: self.schema.clone(),
            n_rows: rows.len(),
            columns,
        }
    }

    /// Writes the table as CSV with a header row. Missing cells are written as
    /// the schema's missing token. Binned columns are written as bin indices.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))?;
        let token = self.schema.missing_token.as_str();
        let mut record: Vec<String> = Vec::with_capacity(self.columns.len());
        for row in 0..self.n_rows {
            record.clear();
            for col in &self.columns {
                record.push(match col {
                    Column::Categorical(c) => {
                        let level = c.level(row);
                        if level == MISSING_LEVEL {
                            token.to_string()
                        } else {
                            level.to_string()
                        }
                    }
                    Column::Numerical(c) => {
                        if c.missing[row] {
                            token.to_string()
                        } else {
                            format!("{}", c.values[row])
                        }
                    }
                    Column::Binned(c) => {
                        if c.bins[row] == EXCLUDED {
                            token.to_string()
                        } else {
                            c.bins[row].to_string()
                        }
                    }
                });
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|source| DatasetError::Io {
            path: PathBuf::from("<writer>"),
            source,
        })?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), DatasetError> {
        let file = File::create(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Loads a CSV file against an explicit schema.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<TableData, DatasetError> {
    let mut file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(DatasetError::EmptyFile(path.to_path_buf()));
    }
    read_csv(bytes.as_slice(), schema)
}

/// Parses CSV text from any reader. The header is matched to the schema by
/// column name; header columns unknown to the schema are ignored.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<TableData, DatasetError> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(DatasetError::EmptyFile(PathBuf::from("<reader>")));
    }
    let positions: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == c.name)
                .ok_or_else(|| DatasetError::MissingColumn(c.name.clone()))
        })
        .collect::<Result<_, _>>()?;

    let token = schema.missing_token.as_str();
    let mut raw_cat: Vec<Vec<String>> = vec![Vec::new(); schema.columns.len()];
    let mut num_vals: Vec<Vec<f64>> = vec![Vec::new(); schema.columns.len()];
    let mut num_missing: Vec<Vec<bool>> = vec![Vec::new(); schema.columns.len()];

    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while rdr.read_record(&mut record)? {
        for (ci, (spec, &pos)) in schema.columns.iter().zip(&positions).enumerate() {
            let cell = record.get(pos).unwrap_or("");
            match spec.kind {
                ColumnKind::Categorical => {
                    raw_cat[ci].push(if cell == token {
                        MISSING_LEVEL.to_string()
                    } else {
                        cell.to_string()
                    });
                }
                ColumnKind::Numerical => {
                    if cell == token {
                        num_vals[ci].push(f64::NAN);
                        num_missing[ci].push(true);
                    } else {
                        let v: f64 = cell.trim().parse().map_err(|_| DatasetError::ParseError {
                            row: row + 1,
                            column: spec.name.clone(),
                            value: cell.to_string(),
                        })?;
                        num_vals[ci].push(v);
                        num_missing[ci].push(false);
                    }
                }
            }
        }
        row += 1;
    }

    let columns = schema
        .columns
        .iter()
        .enumerate()
        .map(|(ci, spec)| match spec.kind {
            ColumnKind::Categorical => {
                Column::Categorical(CategoricalColumn::from_strings(&raw_cat[ci]))
            }
            ColumnKind::Numerical => Column::Numerical(NumericalColumn {
                values: std::mem::take(&mut num_vals[ci]),
                missing: std::mem::take(&mut num_missing[ci]),
            }),
        })
        .collect();
    TableData::new(schema.clone(), columns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub n_samples: usize,
    pub n_categorical: usize,
    pub n_numerical: usize,
    pub total_categories: usize,
    pub vector_size: usize,
}

/// One-hot accounting: every observed categorical level counts as one
/// dimension, every numerical column as one.
pub fn profile(data: &TableData) -> DatasetProfile {
    let mut n_categorical = 0;
    let mut n_numerical = 0;
    let mut total_categories = 0;
    for col in &data.columns {
        match col {
            Column::Categorical(c) => {
                n_categorical += 1;
                let mut seen = vec![false; c.levels.len()];
                for &code in &c.codes {
                    seen[code as usize] = true;
                }
                total_categories += seen.iter().filter(|s| **s).count();
            }
            Column::Numerical(_) | Column::Binned(_) => n_numerical += 1,
        }
    }
    DatasetProfile {
        n_samples: data.n_rows,
        n_categorical,
        n_numerical,
        total_categories,
        vector_size: total_categories + n_numerical,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelOrigin {
    RealOnly,
    SynthOnly,
    Shared,
}

/// A real/synthetic pair re-coded against merged dictionaries.
#[derive(Debug, Clone)]
pub struct AlignedPair {
    pub schema: Schema,
    pub real: TableData,
    pub synth: TableData,
    /// Per column: origin of every merged level (`None` for numerical columns).
    pub origins: Vec<Option<Vec<LevelOrigin>>>,
}

impl AlignedPair {
    /// Level labels of a categorical column (merged dictionary).
    pub fn levels(&self, col: usize) -> Option<&[String]> {
        self.real.columns[col].as_categorical().map(|c| c.levels.as_slice())
    }

    /// Levels of a column with the given origin.
    pub fn levels_with_origin(&self, col: usize, origin: LevelOrigin) -> Vec<&str> {
        match (&self.origins[col], self.levels(col)) {
            (Some(o), Some(levels)) => levels
                .iter()
                .zip(o)
                .filter(|(_, x)| **x == origin)
                .map(|(l, _)| l.as_str())
                .collect(),
            _ => Vec::new(),
        }
    }
}

fn recode(col: &CategoricalColumn, merged: &[String]) -> CategoricalColumn {
    let map: Vec<u32> = col
        .levels
        .iter()
        .map(|l| merged.binary_search(l).expect("level present in merged dictionary") as u32)
        .collect();
    CategoricalColumn {
        codes: col.codes.iter().map(|&c| map[c as usize]).collect(),
        levels: merged.to_vec(),
    }
}

fn observed_levels(col: &CategoricalColumn) -> BTreeSet<&str> {
    let mut seen = vec![false; col.levels.len()];
    for &c in &col.codes {
        seen[c as usize] = true;
    }
    col.levels
        .iter()
        .zip(seen)
        .filter(|(_, s)| *s)
        .map(|(l, _)| l.as_str())
        .collect()
}

/// Merges categorical dictionaries so both tables share one level index space.
pub fn align_dictionaries(real: &TableData, synth: &TableData) -> Result<AlignedPair, DatasetError> {
    if real.schema.columns != synth.schema.columns {
        return Err(DatasetError::SchemaMismatch(
            "real and synthetic schemas differ in column names or kinds".into(),
        ));
    }
    let mut real_cols = Vec::with_capacity(real.columns.len());
    let mut synth_cols = Vec::with_capacity(real.columns.len());
    let mut origins = Vec::with_capacity(real.columns.len());
    for (rc, sc) in real.columns.iter().zip(&synth.columns) {
        match (rc, sc) {
            (Column::Categorical(r), Column::Categorical(s)) => {
                let in_real = observed_levels(r);
                let in_synth = observed_levels(s);
                let merged: Vec<String> = in_real
                    .union(&in_synth)
                    .map(|l| l.to_string())
                    .collect();
                let origin = merged
                    .iter()
                    .map(|l| match (in_real.contains(l.as_str()), in_synth.contains(l.as_str())) {
                        (true, true) => LevelOrigin::Shared,
                        (true, false) => LevelOrigin::RealOnly,
                        _ => LevelOrigin::SynthOnly,
                    })
                    .collect();
                real_cols.push(Column::Categorical(recode(r, &merged)));
                synth_cols.push(Column::Categorical(recode(s, &merged)));
                origins.push(Some(origin));
            }
            _ => {
                real_cols.push(rc.clone());
                synth_cols.push(sc.clone());
                origins.push(None);
            }
        }
    }
    Ok(AlignedPair {
        schema: real.schema.clone(),
        real: TableData {
            schema: real.schema.clone(),
            n_rows: real.n_rows,
            columns: real_cols,
        },
        synth: TableData {
            schema: synth.schema.clone(),
            n_rows: synth.n_rows,
            columns: synth_cols,
        },
        origins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(cols: &[(&str, ColumnKind)]) -> Schema {
        Schema::from_pairs(cols).unwrap()
    }

    #[test]
    fn loads_small_csv() {
        let s = schema(&[("Sex", ColumnKind::Categorical), ("Rings", ColumnKind::Numerical)]);
        let t = read_csv("Sex,Rings\nM,15\nF,7\nI,9\n".as_bytes(), &s).unwrap();
        assert_eq!(t.n_rows, 3);
        let sex = t.columns[0].as_categorical().unwrap();
        assert_eq!(sex.levels, vec!["F", "I", "M"]);
        assert_eq!(sex.level(0), "M");
        assert_eq!(t.columns[1].as_numerical().unwrap().values, vec![15.0, 7.0, 9.0]);
    }

    #[test]
    fn header_match_is_order_insensitive() {
        let s = schema(&[("a", ColumnKind::Numerical), ("b", ColumnKind::Categorical)]);
        let t = read_csv("b,extra,a\nx,zz,1.5\n".as_bytes(), &s).unwrap();
        assert_eq!(t.columns[0].as_numerical().unwrap().values, vec![1.5]);
        assert_eq!(t.columns[1].as_categorical().unwrap().level(0), "x");
    }

    #[test]
    fn missing_column_is_reported() {
        let s = schema(&[("a", ColumnKind::Numerical), ("b", ColumnKind::Categorical)]);
        let err = read_csv("a\n1\n".as_bytes(), &s).unwrap_err();
        assert!(matches!(err, DatasetError::MissingColumn(c) if c == "b"));
    }

    #[test]
    fn parse_error_carries_location() {
        let s = schema(&[("a", ColumnKind::Numerical)]);
        let err = read_csv("a\n1\nabc\n".as_bytes(), &s).unwrap_err();
        match err {
            DatasetError::ParseError { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "a", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "").unwrap();
        let s = schema(&[("a", ColumnKind::Numerical)]);
        assert!(matches!(load_csv(&p, &s), Err(DatasetError::EmptyFile(_))));
    }

    #[test]
    fn missing_token_handling() {
        let mut s = schema(&[("c", ColumnKind::Categorical), ("n", ColumnKind::Numerical)]);
        s.missing_token = "NA".into();
        let t = read_csv("c,n\nNA,NA\nx,2\n".as_bytes(), &s).unwrap();
        let c = t.columns[0].as_categorical().unwrap();
        assert_eq!(c.level(0), MISSING_LEVEL);
        let n = t.columns[1].as_numerical().unwrap();
        assert_eq!(n.missing, vec![true, false]);
        assert_eq!(n.missing_rate(), 0.5);
        assert_eq!(profile(&t).total_categories, 2);
    }

    #[test]
    fn levels_are_exact_strings() {
        let s = schema(&[("c", ColumnKind::Categorical)]);
        let t = read_csv("c\nC20\nc20\n C20\n".as_bytes(), &s).unwrap();
        assert_eq!(t.columns[0].as_categorical().unwrap().levels.len(), 3);
    }

    #[test]
    fn schema_invariants() {
        assert!(Schema::from_pairs::<&str>(&[]).is_err());
        assert!(Schema::from_pairs(&[("a", ColumnKind::Numerical), ("a", ColumnKind::Numerical)]).is_err());
        assert!(Schema::from_pairs(&[("", ColumnKind::Numerical)]).is_err());
        let json = r#"{"columns":[{"name":"x","kind":"categorical"}],"missing_token":"?"}"#;
        let s: Schema = serde_json::from_str(json).unwrap();
        assert_eq!(s.missing_token, "?");
    }

    #[test]
    fn profile_counts() {
        let s = schema(&[("n", ColumnKind::Numerical)]);
        let t = TableData::new(s, vec![Column::Numerical(NumericalColumn::from_values(vec![1.0]))]).unwrap();
        assert_eq!(profile(&t).vector_size, 1);

        let s = schema(&[("a", ColumnKind::Categorical), ("b", ColumnKind::Categorical)]);
        let t = TableData::new(
            s,
            vec![
                Column::Categorical(CategoricalColumn::from_strings(&["A", "B", "A"])),
                Column::Categorical(CategoricalColumn::from_strings(&["X", "Y", "Z"])),
            ],
        )
        .unwrap();
        let p = profile(&t);
        assert_eq!(p.total_categories, 5);
        assert_eq!(p.vector_size, 5);
    }

    #[test]
    fn align_reports_origins() {
        let s = schema(&[("c", ColumnKind::Categorical)]);
        let real = TableData::new(s.clone(), vec![Column::Categorical(CategoricalColumn::from_strings(&["A", "B"]))]).unwrap();
        let synth = TableData::new(s.clone(), vec![Column::Categorical(CategoricalColumn::from_strings(&["B", "C"]))]).unwrap();
        let pair = align_dictionaries(&real, &synth).unwrap();
        assert_eq!(pair.levels(0).unwrap(), &["A", "B", "C"]);
        assert_eq!(pair.levels_with_origin(0, LevelOrigin::RealOnly), vec!["A"]);
        assert_eq!(pair.levels_with_origin(0, LevelOrigin::SynthOnly), vec!["C"]);
        assert_eq!(pair.levels_with_origin(0, LevelOrigin::Shared), vec!["B"]);
        assert_eq!(pair.synth.columns[0].as_categorical().unwrap().codes, vec![1, 2]);

        let same = align_dictionaries(&real, &real).unwrap();
        assert_eq!(same.levels_with_origin(0, LevelOrigin::Shared).len(), 2);

        let empty = real.take_rows(&[]);
        let degenerate = align_dictionaries(&real, &empty).unwrap();
        assert_eq!(degenerate.levels_with_origin(0, LevelOrigin::RealOnly), vec!["A", "B"]);
    }

    #[test]
    fn align_rejects_schema_mismatch() {
        let a = TableData::new(
            schema(&[("c", ColumnKind::Categorical)]),
            vec![Column::Categorical(CategoricalColumn::from_strings(&["A"]))],
        )
        .unwrap();
        let b = TableData::new(
            schema(&[("d", ColumnKind::Categorical)]),
            vec![Column::Categorical(CategoricalColumn::from_strings(&["A"]))],
        )
        .unwrap();
        assert!(matches!(align_dictionaries(&a, &b), Err(DatasetError::SchemaMismatch(_))));
    }
}
