//! Sparse labeled datasets and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureRegime, Task};
use crate::error::FeatureError;
use crate::log_io::format_float;

/// Row-compressed sparse matrix. Zeros are not stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRows {
    pub fn new(n_cols: usize) -> SparseRows {
        SparseRows { n_cols, indptr: vec![0], indices: Vec::new(), values: Vec::new() }
    }

    /// Builds a matrix from dense rows.
    pub fn from_dense<'a>(n_cols: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> SparseRows {
        let mut m = SparseRows::new(n_cols);
        for r in rows {
            m.push_dense(r);
        }
        m
    }

    pub fn push_dense(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n_cols, "row width does not match the matrix");
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                self.indices.push(j as u32);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        let (idx, val) = self.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            out[j as usize] = v;
        }
        out
    }

    pub fn select(&self, rows: &[usize]) -> SparseRows {
        let mut m = SparseRows::new(self.n_cols);
        for &i in rows {
            let (idx, val) = self.row(i);
            m.indices.extend_from_slice(idx);
            m.values.extend_from_slice(val);
            m.indptr.push(m.indices.len());
        }
        m
    }
}

/// Feature rows with one label and one group key (the case id) each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub feature_names: Vec<String>,
    /// The label space, sorted. `y` indexes into it.
    pub labels: Vec<String>,
    pub x: SparseRows,
    pub y: Vec<u32>,
    pub groups: Vec<u32>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn label_of(&self, row: usize) -> &str {
        &self.labels[self.y[row] as usize]
    }

    /// Regime recovered from the feature names.
    pub fn regime(&self) -> FeatureRegime {
        FeatureRegime::from_feature_names(&self.feature_names)
    }

    pub fn task(&self) -> Task {
        Task::from_feature_names(&self.feature_names)
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            feature_names: self.feature_names.clone(),
            labels: self.labels.clone(),
            x: self.x.select(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            groups: rows.iter().map(|&i| self.groups[i]).collect(),
        }
    }

    /// Writes the dense CSV form: feature columns, then `label` and `group_key`.
    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.extend(["label", "group_key"]);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            record.clear();
            record.extend(self.x.dense_row(i).into_iter().map(format_float));
            record.push(self.label_of(i).to_string());
            record.push(self.groups[i].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), FeatureError> {
        let file = std::fs::File::create(path)?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }

    pub fn read_csv_from<R: Read>(input: R) -> Result<LabeledDataset, FeatureError> {
        let mut r = csv::ReaderBuilder::new().from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let n = header.len();
        if n < 2 || header[n - 2] != "label" || header[n - 1] != "group_key" {
            return Err(FeatureError::Format("last two columns must be `label` and `group_key`".into()));
        }
        let feature_names = header[..n - 2].to_vec();
        let labels = Task::from_feature_names(&feature_names).label_space();
        let mut x = SparseRows::new(n - 2);
        let mut y = Vec::new();
        let mut groups = Vec::new();
        let mut row = vec![0.0; n - 2];
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |col: &str, v: &str| FeatureError::Format(format!("row {}, column `{col}`: bad value `{v}`", i + 1));
            for (j, cell) in rec.iter().take(n - 2).enumerate() {
                row[j] = cell.parse().map_err(|_| bad(&feature_names[j], cell))?;
            }
            x.push_dense(&row);
            let label = &rec[n - 2];
            let k = labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| FeatureError::UnknownName { kind: "label", value: label.to_string() })?;
            y.push(k as u32);
            groups.push(rec[n - 1].parse().map_err(|_| bad("group_key", &rec[n - 1]))?);
        }
        Ok(LabeledDataset { feature_names, labels, x, y, groups })
    }

    pub fn read_csv(path: &Path) -> Result<LabeledDataset, FeatureError> {
        Self::read_csv_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
