//! CSV ingestion, seeded train/test splits and stratified folds.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::{Error, Matrix, Result};

/// Tokens recorded as missing cells.
const MISSING_TOKENS: [&str; 2] = ["", "?"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Real,
    /// Integer code restricted to `min..=max`.
    Coded { min: i64, max: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    fn real(name: &str) -> Self {
        Column {
            name: name.to_string(),
            kind: ColumnKind::Real,
        }
    }

    fn coded(name: &str, min: i64, max: i64) -> Self {
        Column {
            name: name.to_string(),
            kind: ColumnKind::Coded { min, max },
        }
    }

    /// Checks a parsed value against the column's allowed range.
    pub fn admits(&self, value: f64) -> bool {
        match self.kind {
            ColumnKind::Real => value.is_finite(),
            ColumnKind::Coded { min, max } => {
                value.fract() == 0.0 && value >= min as f64 && value <= max as f64
            }
        }
    }

    fn allowed(&self) -> String {
        match self.kind {
            ColumnKind::Real => "finite real".to_string(),
            ColumnKind::Coded { min, max } => format!("{{{min}..{max}}}"),
        }
    }
}

/// Ordered column layout: predictors followed by the binary target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<Column>,
}

impl FeatureSchema {
    /// The 14-column heart-disease layout.
    pub fn heart() -> Self {
        FeatureSchema {
            columns: vec![
                Column::real("age"),
                Column::coded("sex", 0, 1),
                Column::coded("cp", 0, 3),
                Column::real("trestbps"),
                Column::real("chol"),
                Column::coded("fbs", 0, 1),
                Column::coded("restecg", 0, 2),
                Column::real("thalach"),
                Column::coded("exang", 0, 1),
                Column::real("oldpeak"),
                Column::coded("slope", 0, 2),
                Column::coded("ca", 0, 4),
                Column::real("thal"),
                Column::coded("target", 0, 1),
            ],
        }
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn predictors(&self) -> &[Column] {
        &self.columns[..self.n_features()]
    }

    pub fn target(&self) -> &Column {
        &self.columns[self.n_features()]
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn predictor_names(&self) -> Vec<&str> {
        self.predictors().iter().map(|c| c.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Hex SHA-256 over the ordered column names.
    pub fn fingerprint(&self) -> String {
        fingerprint_columns(&self.names())
    }
}

/// Fingerprint of an ordered list of column names, e.g. a CSV header.
pub fn fingerprint_columns<S: AsRef<str>>(names: &[S]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for name in names {
        hasher.update(name.as_ref().as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(hasher.finalize())
}

/// Labeled rows. Missing predictor cells are stored as NaN until imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub target: Vec<u8>,
    /// Zero-based data-row index in the source file.
    pub row_ids: Vec<usize>,
    pub schema: FeatureSchema,
}

impl Dataset {
    pub fn new(features: Matrix, target: Vec<u8>, schema: FeatureSchema) -> Result<Self> {
        let row_ids = (0..target.len()).collect();
        Self::with_row_ids(features, target, row_ids, schema)
    }

    pub fn with_row_ids(
        features: Matrix,
        target: Vec<u8>,
        row_ids: Vec<usize>,
        schema: FeatureSchema,
    ) -> Result<Self> {
        if features.len() != target.len() || row_ids.len() != target.len() {
            return Err(Error::shape(format!(
                "{} feature rows, {} targets, {} row ids",
                features.len(),
                target.len(),
                row_ids.len()
            )));
        }
        let width = schema.n_features();
        if let Some(bad) = features.iter().position(|r| r.len() != width) {
            return Err(Error::shape(format!(
                "row {bad} has {} values, schema expects {width}",
                features[bad].len()
            )));
        }
        if let Some(&bad) = target.iter().find(|&&t| t > 1) {
            return Err(Error::data(format!("target value {bad} is not binary")));
        }
        Ok(Dataset {
            features,
            target,
            row_ids,
            schema,
        })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    /// Rows at `positions`, in that order, keeping their original ids.
    pub fn select(&self, positions: &[usize]) -> Dataset {
        Dataset {
            features: positions.iter().map(|&i| self.features[i].clone()).collect(),
            target: positions.iter().map(|&i| self.target[i]).collect(),
            row_ids: positions.iter().map(|&i| self.row_ids[i]).collect(),
            schema: self.schema.clone(),
        }
    }

    pub fn missing_count(&self) -> usize {
        self.features
            .iter()
            .flat_map(|r| r.iter())
            .filter(|v| v.is_nan())
            .count()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.features.iter().map(move |r| r[j])
    }
}

/// Parses one cell; `Ok(None)` marks a missing value.
fn parse_cell(raw: &str, column: &Column, line: usize) -> Result<Option<f64>> {
    let token = raw.trim();
    if MISSING_TOKENS.contains(&token) {
        return Ok(None);
    }
    let value: f64 = token.parse().map_err(|_| Error::Parse {
        row: line,
        column: column.name.clone(),
        value: token.to_string(),
    })?;
    if !column.admits(value) {
        return Err(Error::OutOfRange {
            row: line,
            column: column.name.clone(),
            value,
            allowed: column.allowed(),
        });
    }
    Ok(Some(value))
}

/// Parses the predictor cells of one record. `line` is the 1-based line
/// number used in diagnostics.
pub fn parse_predictors(schema: &FeatureSchema, fields: &[&str], line: usize) -> Result<Vec<f64>> {
    let width = schema.n_features();
    if fields.len() < width {
        return Err(Error::FieldCount {
            row: line,
            expected: width,
            found: fields.len(),
        });
    }
    schema
        .predictors()
        .iter()
        .zip(fields)
        .map(|(col, raw)| Ok(parse_cell(raw, col, line)?.unwrap_or(f64::NAN)))
        .collect()
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(open(path)?))
}

fn header_names(record: &csv::StringRecord) -> Vec<String> {
    record
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let h = if i == 0 { h.trim_start_matches('\u{feff}') } else { h };
            h.trim().to_string()
        })
        .collect()
}

/// Reads only the header row of a CSV file.
pub fn read_header(path: &Path) -> Result<Vec<String>> {
    let mut rdr = reader(path)?;
    let mut record = csv::StringRecord::new();
    match rdr.read_record(&mut record) {
        Ok(true) => Ok(header_names(&record)),
        Ok(false) => Err(Error::HeaderMismatch("file is empty".into())),
        Err(e) => Err(Error::Csv(e.to_string())),
    }
}

fn check_header(found: &[String], expected: &[&str]) -> Result<()> {
    if found.len() != expected.len() {
        return Err(Error::HeaderMismatch(format!(
            "expected {} columns ({}), found {} ({})",
            expected.len(),
            expected.join(","),
            found.len(),
            found.join(",")
        )));
    }
    let offending: Vec<String> = found
        .iter()
        .zip(expected)
        .enumerate()
        .filter(|(_, (f, e))| f.as_str() != **e)
        .map(|(i, (f, e))| format!("column {} is {f:?}, expected {e:?}", i + 1))
        .collect();
    if offending.is_empty() {
        Ok(())
    } else {
        Err(Error::HeaderMismatch(offending.join("; ")))
    }
}

/// Loads a labeled CSV whose header must equal the schema, in order.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<Dataset> {
    let mut rdr = reader(path)?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => header_names(&rec.map_err(|e| Error::Csv(e.to_string()))?),
        None => return Err(Error::HeaderMismatch("file is empty".into())),
    };
    check_header(&header, &schema.names())?;

    let width = schema.columns.len();
    let mut features = Vec::new();
    let mut target = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(Error::FieldCount {
                row: line,
                expected: width,
                found: rec.len(),
            });
        }
        let fields: Vec<&str> = rec.iter().collect();
        features.push(parse_predictors(schema, &fields, line)?);
        let label = parse_cell(fields[width - 1], schema.target(), line)?.ok_or_else(|| {
            Error::data(format!("line {line}: target value is missing"))
        })?;
        target.push(label as u8);
    }
    Dataset::new(features, target, schema.clone())
}

/// One record of an unlabeled prediction input.
#[derive(Debug)]
pub struct InputRow {
    pub row_id: usize,
    pub line: usize,
    pub values: Result<Vec<f64>>,
}

/// Loads prediction inputs. The header must start with the predictor
/// columns in schema order; a trailing target column is tolerated and
/// ignored. Row-level problems are reported per row, not as a failure.
pub fn load_inputs(path: &Path, schema: &FeatureSchema) -> Result<Vec<InputRow>> {
    let mut rdr = reader(path)?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => header_names(&rec.map_err(|e| Error::Csv(e.to_string()))?),
        None => return Err(Error::HeaderMismatch("file is empty".into())),
    };
    let predictors = schema.predictor_names();
    if header.len() == schema.columns.len() {
        check_header(&header, &schema.names())?;
    } else {
        check_header(&header, &predictors)?;
    }

    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = rec.iter().collect();
        let values = if fields.len() != header.len() {
            Err(Error::FieldCount {
                row: line,
                expected: header.len(),
                found: fields.len(),
            })
        } else {
            parse_predictors(schema, &fields, line)
        };
        rows.push(InputRow {
            row_id: rows.len(),
            line,
            values,
        });
    }
    Ok(rows)
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "?".to_string()
    } else {
        format!("{v}")
    }
}

/// Writes the dataset in the same layout `load_csv` reads.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(out, "{}", ds.schema.names().join(",")).map_err(io_err)?;
    for (row, label) in ds.features.iter().zip(&ds.target) {
        let mut cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        cells.push(label.to_string());
        writeln!(out, "{}", cells.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// `(count of class 0, count of class 1)`.
pub fn class_counts(target: &[u8]) -> (usize, usize) {
    let ones = target.iter().filter(|&&t| t == 1).count();
    (target.len() - ones, ones)
}

/// True when two rows share identical predictor values but carry
/// different labels.
pub fn has_contradictory_duplicates(ds: &Dataset) -> bool {
    let mut seen: HashMap<Vec<u64>, u8> = HashMap::new();
    for (row, &label) in ds.features.iter().zip(&ds.target) {
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        if let Some(&prev) = seen.get(&key) {
            if prev != label {
                return true;
            }
        } else {
            seen.insert(key, label);
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// `ceil(fraction * n)`, ignoring float noise just above an integer
/// (0.1 * 30 evaluates to 3.0000000000000004).
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    (test_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Shuffles `0..n` with `SplitMix64::new(seed)`; the last
/// `ceil(test_fraction * n)` shuffled positions form the test set. Both
/// lists keep shuffled order.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 rows to split, got {n}")));
    }
    let n_test = test_size(n, test_fraction);
    if n_test == 0 || n_test == n {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} leaves an empty side for n={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let test_rows = order.split_off(n - n_test);
    Ok(SplitIndices {
        train_rows: order,
        test_rows,
        seed,
        test_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold label for every position of the target vector.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// `(training positions, held-out positions)` for `fold`, ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (held, train): (Vec<usize>, Vec<usize>) =
            (0..self.assignments.len()).partition(|&i| self.assignments[i] == fold);
        (train, held)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment.
///
/// One generator seeded with `seed` shuffles the class-0 positions, then
/// the class-1 positions. Positions are dealt round-robin with a single
/// running counter, so class 1 starts at the fold after the last class-0
/// deal; this keeps total fold sizes within one of each other as well as
/// the per-class counts.
pub fn stratified_kfold(target: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count must be >= 2, got {k}")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut assignments = vec![0; target.len()];
    let mut next = 0usize;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..target.len()).filter(|&i| target[i] == class).collect();
        if members.len() < k {
            return Err(Error::invalid(format!(
                "class {class} has {} members, fewer than {k} folds",
                members.len()
            )));
        }
        rng.shuffle(&mut members);
        for pos in members {
            assignments[pos] = next % k;
            next += 1;
        }
    }
    if let Some(&bad) = target.iter().find(|&&t| t > 1) {
        return Err(Error::data(format!("target value {bad} is not binary")));
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}
