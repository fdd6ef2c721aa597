//! Trace ingestion, the design matrix, and preprocessing.
//!
//! A trace is a UTF-8 CSV time series: a header of unique column names
//! followed by one row per sample in time order. Cells are decimal or
//! scientific notation; `""`, `NaN` and `nan` mark a missing reading.
//!
//! Preprocessing runs once over the whole trace: every feature is min-max
//! scaled to `[0, 1]` and features whose scaled population variance falls
//! below a threshold are dropped. Features with any missing reading are
//! dropped as non-numeric.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance floor applied to scaled features by default.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 1e-4;

const MISSING_MARKERS: [&str; 3] = ["", "NaN", "nan"];

/// A feature's stable position in the original (pre-filter) feature list
/// together with its column name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureId {
    pub index: usize,
    pub name: String,
}

impl FeatureId {
    pub fn new(index: usize, name: impl Into<String>) -> Self {
        Self {
            index,
            name: name.into(),
        }
    }
}

/// One reading of every retained feature at a time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub values: Vec<f64>,
    pub target: Option<f64>,
    pub time_index: usize,
}

/// Records which target rows were read through a [`DesignMatrix`].
///
/// Attach one with [`DesignMatrix::audit_targets`] to check that a pipeline
/// never looks at targets it is not entitled to.
#[derive(Debug, Clone, Default)]
pub struct TargetAudit(Arc<Mutex<Vec<usize>>>);

impl TargetAudit {
    fn record(&self, rows: impl IntoIterator<Item = usize>) {
        self.0.lock().expect("audit lock poisoned").extend(rows);
    }

    /// Distinct rows read so far, ascending.
    pub fn rows(&self) -> Vec<usize> {
        let mut rows = self.0.lock().expect("audit lock poisoned").clone();
        rows.sort_unstable();
        rows.dedup();
        rows
    }

    pub fn read_count(&self) -> usize {
        self.0.lock().expect("audit lock poisoned").len()
    }
}

/// Column-major store of `m` samples by `n` features, with optional targets.
///
/// Immutable once built. Target values are only reachable through accessor
/// methods so that reads can be audited.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    columns: Vec<Vec<f64>>,
    feature_ids: Vec<FeatureId>,
    targets: Option<Vec<f64>>,
    audit: Option<TargetAudit>,
}

impl DesignMatrix {
    pub fn new(
        columns: Vec<Vec<f64>>,
        feature_ids: Vec<FeatureId>,
        targets: Option<Vec<f64>>,
    ) -> Result<Self> {
        if columns.len() != feature_ids.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} columns but {} feature ids",
                columns.len(),
                feature_ids.len()
            )));
        }
        let m = columns
            .first()
            .map(Vec::len)
            .or_else(|| targets.as_ref().map(Vec::len))
            .unwrap_or(0);
        if let Some(bad) = columns.iter().position(|c| c.len() != m) {
            return Err(Error::InvalidMatrix(format!(
                "column {bad} has {} rows, expected {m}",
                columns[bad].len()
            )));
        }
        if let Some(t) = &targets {
            if t.len() != m {
                return Err(Error::InvalidMatrix(format!(
                    "{} targets for {m} rows",
                    t.len()
                )));
            }
        }
        let mut indices = HashSet::new();
        let mut names = HashSet::new();
        for id in &feature_ids {
            if !indices.insert(id.index) {
                return Err(Error::InvalidMatrix(format!(
                    "duplicate feature index {}",
                    id.index
                )));
            }
            if !names.insert(id.name.as_str()) {
                return Err(Error::DuplicateColumn(id.name.clone()));
            }
        }
        Ok(Self {
            columns,
            feature_ids,
            targets,
            audit: None,
        })
    }

    /// Builds a matrix from row vectors, naming features `f0`, `f1`, ...
    pub fn from_rows(rows: &[Vec<f64>], targets: Option<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rows[bad].len(),
            });
        }
        let columns = (0..n)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let ids = (0..n).map(|j| FeatureId::new(j, format!("f{j}"))).collect();
        Self::new(columns, ids, targets)
    }

    pub fn n_samples(&self) -> usize {
        self.columns
            .first()
            .map(Vec::len)
            .or_else(|| self.targets.as_ref().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn feature_ids(&self) -> &[FeatureId] {
        &self.feature_ids
    }

    pub fn value(&self, row: usize, j: usize) -> f64 {
        self.columns[j][row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Column position of the feature with original index `index`.
    pub fn position_of(&self, index: usize) -> Option<usize> {
        self.feature_ids.iter().position(|id| id.index == index)
    }

    pub fn has_targets(&self) -> bool {
        self.targets.is_some()
    }

    pub fn target(&self, i: usize) -> Option<f64> {
        let t = self.targets.as_ref()?;
        if let Some(a) = &self.audit {
            a.record([i]);
        }
        Some(t[i])
    }

    /// All targets; counts as a read of every row.
    pub fn targets(&self) -> Option<&[f64]> {
        let t = self.targets.as_deref()?;
        if let Some(a) = &self.audit {
            a.record(0..t.len());
        }
        Some(t)
    }

    /// Row `i` as a stream sample. The target is only read when asked for.
    pub fn sample(&self, i: usize, with_target: bool) -> Sample {
        Sample {
            values: self.row(i),
            target: if with_target { self.target(i) } else { None },
            time_index: i + 1,
        }
    }

    /// Same samples with the target column removed.
    pub fn without_targets(&self) -> Self {
        Self {
            columns: self.columns.clone(),
            feature_ids: self.feature_ids.clone(),
            targets: None,
            audit: None,
        }
    }

    pub fn audit_targets(&mut self) -> TargetAudit {
        let audit = TargetAudit::default();
        self.audit = Some(audit.clone());
        audit
    }

    /// The first `t` rows, same features. The target audit (if any) carries
    /// over since row numbering is unchanged.
    pub fn prefix(&self, t: usize) -> Result<Self> {
        let m = self.n_samples();
        if t == 0 || t > m {
            return Err(Error::OutOfRange {
                what: "prefix length",
                value: t,
                min: 1,
                max: m,
            });
        }
        Ok(Self {
            columns: self.columns.iter().map(|c| c[..t].to_vec()).collect(),
            feature_ids: self.feature_ids.clone(),
            targets: self.targets.as_ref().map(|y| y[..t].to_vec()),
            audit: self.audit.clone(),
        })
    }

    /// Rows `[start, end)` as a fresh matrix. Copied targets count as read.
    pub fn rows(&self, start: usize, end: usize) -> Result<Self> {
        let m = self.n_samples();
        if start >= end || end > m {
            return Err(Error::OutOfRange {
                what: "row range end",
                value: end,
                min: start + 1,
                max: m,
            });
        }
        let idx: Vec<usize> = (start..end).collect();
        Ok(self.select_rows(&idx))
    }

    /// Rows at the given positions as a fresh matrix. Copied targets count
    /// as read; the new matrix carries no audit.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let targets = self.targets.as_ref().map(|y| {
            if let Some(a) = &self.audit {
                a.record(rows.iter().copied());
            }
            rows.iter().map(|&i| y[i]).collect()
        });
        Self {
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            feature_ids: self.feature_ids.clone(),
            targets,
            audit: None,
        }
    }

    /// Restricts to the columns at `positions`, in that order.
    pub fn select_columns(&self, positions: &[usize]) -> Self {
        Self {
            columns: positions.iter().map(|&p| self.columns[p].clone()).collect(),
            feature_ids: positions
                .iter()
                .map(|&p| self.feature_ids[p].clone())
                .collect(),
            targets: self.targets.clone(),
            audit: self.audit.clone(),
        }
    }

    /// Restricts to the features with the given original indices.
    pub fn select_features<'a, I>(&self, ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FeatureId>,
    {
        let positions = ids
            .into_iter()
            .map(|id| self.position_of(id.index).ok_or(Error::UnknownFeature(id.index)))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&positions))
    }

    /// Writes the matrix in trace format; the target column (if any) is
    /// appended as `target_name`. Values carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W, target_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.feature_ids.iter().map(|f| f.name.as_str()).collect();
        if self.targets.is_some() {
            header.push(target_name);
        }
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n_samples() {
            record.clear();
            record.extend(self.columns.iter().map(|c| format_value(c[i])));
            if let Some(y) = &self.targets {
                record.push(format_value(y[i]));
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, target_name: &str) -> Result<()> {
        let file = File::create(path)?;
        self.write_csv(io::BufWriter::new(file), target_name)
    }
}

/// 17 significant digits, enough for any f64 to survive a round trip.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Loads a trace file. The target column, if named, is split off the
/// feature set. Values are returned raw; see [`preprocess`].
pub fn load_trace(path: impl AsRef<Path>, target_column: Option<&str>) -> Result<DesignMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_trace(io::BufReader::new(file), target_column)
}

pub fn read_trace<R: Read>(input: R, target_column: Option<&str>) -> Result<DesignMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for name in &header {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateColumn(name.clone()));
        }
    }
    let target_pos = match target_column {
        Some(t) => Some(
            header
                .iter()
                .position(|h| h == t)
                .ok_or_else(|| Error::UnknownTargetColumn(t.to_string()))?,
        ),
        None => None,
    };

    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != target_pos).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); feature_cols.len()];
    let mut targets = target_pos.map(|_| Vec::new());

    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::MalformedRow {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (slot, &c) in feature_cols.iter().enumerate() {
            let v = parse_cell(&record[c]).ok_or_else(|| Error::NonNumericCell {
                line,
                column: header[c].clone(),
            })?;
            columns[slot].push(v);
        }
        if let (Some(tp), Some(ys)) = (target_pos, targets.as_mut()) {
            match parse_cell(&record[tp]) {
                Some(v) if v.is_nan() => return Err(Error::MissingTargetValue { line }),
                Some(v) => ys.push(v),
                None => {
                    return Err(Error::NonNumericCell {
                        line,
                        column: header[tp].clone(),
                    })
                }
            }
        }
    }

    let ids = feature_cols
        .iter()
        .enumerate()
        .map(|(i, &c)| FeatureId::new(i, header[c].clone()))
        .collect();
    DesignMatrix::new(columns, ids, targets)
}

/// `Some(NaN)` for a missing marker, `None` for anything non-numeric.
fn parse_cell(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if MISSING_MARKERS.contains(&cell) {
        return Some(f64::NAN);
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Bookkeeping for one [`preprocess`] pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub dropped_low_variance: Vec<FeatureId>,
    pub dropped_non_numeric: Vec<FeatureId>,
    /// Per retained feature, aligned with the output matrix columns.
    pub scale_min: Vec<f64>,
    pub scale_max: Vec<f64>,
    pub retained_count: usize,
}

/// Min-max scales every feature to `[0, 1]` and drops features whose scaled
/// population variance is below `variance_threshold`. Constant features
/// scale to all-zeros.
pub fn preprocess(
    matrix: &DesignMatrix,
    variance_threshold: f64,
) -> Result<(DesignMatrix, PreprocessReport)> {
    let m = matrix.n_samples();
    if m < 2 || matrix.n_features() == 0 {
        return Err(Error::EmptyMatrix { min_samples: 2 });
    }
    let mut report = PreprocessReport {
        dropped_low_variance: Vec::new(),
        dropped_non_numeric: Vec::new(),
        scale_min: Vec::new(),
        scale_max: Vec::new(),
        retained_count: 0,
    };
    let mut columns = Vec::new();
    let mut ids = Vec::new();
    for (col, id) in matrix.columns.iter().zip(&matrix.feature_ids) {
        if col.iter().any(|v| v.is_nan()) {
            report.dropped_non_numeric.push(id.clone());
            continue;
        }
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let range = hi - lo;
        let scaled: Vec<f64> = if range > 0.0 {
            col.iter().map(|&v| (v - lo) / range).collect()
        } else {
            vec![0.0; m]
        };
        if population_variance(&scaled) < variance_threshold {
            report.dropped_low_variance.push(id.clone());
            continue;
        }
        report.scale_min.push(lo);
        report.scale_max.push(hi);
        columns.push(scaled);
        ids.push(id.clone());
    }
    report.retained_count = columns.len();
    let out = DesignMatrix {
        columns,
        feature_ids: ids,
        targets: matrix.targets.clone(),
        audit: matrix.audit.clone(),
    };
    Ok((out, report))
}

pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}
