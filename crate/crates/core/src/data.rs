//! Datasets, CSV ingestion, min-max scaling, stratified splitting and toy data.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Feature matrix (row-major) with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    /// Builds a dataset from a flat row-major feature buffer.
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one feature".into()));
        }
        if class_count == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one class".into()));
        }
        if labels.is_empty() {
            return Err(Error::InvalidArgument("dataset needs at least one row".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                found: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            class_count,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                found: bad.len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let features = rows.iter().flatten().copied().collect();
        Self::new(features, n_features, labels, class_count)
    }

    /// Number of records (T).
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of features (D).
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of classes (C).
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Per-class row counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows at `indices`, in the given order. Class count is preserved.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    self.len()
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(features, self.n_features, labels, self.class_count)
    }

    /// Same rows with labels replaced (used for label-shuffling experiments).
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        Self::new(self.features.clone(), self.n_features, labels, self.class_count)
    }

    pub fn is_unit_scaled(&self) -> bool {
        self.features.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// A dataset together with the CSV column metadata it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub dataset: Dataset,
    /// Full header, in file order.
    pub header: Vec<String>,
    /// Position of the label column within `header`.
    pub label_index: usize,
    /// Class names; label `i` is `class_names[i]`.
    pub class_names: Vec<String>,
}

impl CsvTable {
    pub fn label_column(&self) -> &str {
        &self.header[self.label_index]
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.label_index)
            .map(|(_, h)| h.as_str())
            .collect()
    }
}

/// Reads a CSV file with a header row. Classes are encoded in lexicographic
/// order of their string form.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<CsvTable> {
    read_csv(path.as_ref(), label_column, None)
}

/// Like [`load_csv`] but with a fixed class vocabulary, so that several files
/// share one label encoding. Unknown labels are a schema error.
pub fn load_csv_with_classes(
    path: impl AsRef<Path>,
    label_column: &str,
    class_names: &[String],
) -> Result<CsvTable> {
    read_csv(path.as_ref(), label_column, Some(class_names))
}

fn read_csv(path: &Path, label_column: &str, classes: Option<&[String]>) -> Result<CsvTable> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let label_index = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn {
            path: path.to_path_buf(),
            column: label_column.to_string(),
        })?;
    let n_features = header.len() - 1;

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row,
                found: record.len(),
                expected: header.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            if j == label_index {
                raw_labels.push(field.trim().to_string());
                continue;
            }
            let value: f64 = field.trim().parse().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row,
                column: header[j].clone(),
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumeric {
                    path: path.to_path_buf(),
                    row,
                    column: header[j].clone(),
                    value: field.to_string(),
                });
            }
            features.push(value);
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    if n_features == 0 {
        return Err(Error::Schema(format!(
            "{}: no feature columns besides the label",
            path.display()
        )));
    }

    let class_names: Vec<String> = match classes {
        Some(names) => names.to_vec(),
        None => raw_labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    let labels = raw_labels
        .iter()
        .map(|s| {
            class_names.iter().position(|c| c == s).ok_or_else(|| {
                Error::Schema(format!("{}: unknown class label `{s}`", path.display()))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let dataset = Dataset::new(features, n_features, labels, class_names.len())?;
    Ok(CsvTable {
        dataset,
        header,
        label_index,
        class_names,
    })
}

/// Writes rows in the column layout of `schema` (same header, label in the
/// same position, labels as their class names).
pub fn write_csv(path: impl AsRef<Path>, schema: &CsvTable, data: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv_to(file, schema, data)
}

pub fn write_csv_to<W: std::io::Write>(out: W, schema: &CsvTable, data: &Dataset) -> Result<()> {
    if data.n_features() + 1 != schema.header.len() {
        return Err(Error::DimensionMismatch {
            expected: schema.header.len() - 1,
            found: data.n_features(),
        });
    }
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(&schema.header)?;
    let mut record = Vec::with_capacity(schema.header.len());
    for (row, &label) in data.rows().zip(data.labels()) {
        record.clear();
        let mut values = row.iter();
        for j in 0..schema.header.len() {
            if j == schema.label_index {
                let name = schema.class_names.get(label).ok_or_else(|| {
                    Error::Schema(format!("label {label} has no class name"))
                })?;
                record.push(name.clone());
            } else {
                // Every non-label column consumes one feature; lengths checked above.
                record.push(values.next().copied().unwrap_or_default().to_string());
            }
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-feature min-max bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingParams {
    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    /// Maps one value of feature `j` into `[0, 1]`. Constant features map to 0.5.
    pub fn scale_value(&self, j: usize, x: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range <= 0.0 {
            0.5
        } else {
            ((x - self.min[j]) / range).clamp(0.0, 1.0)
        }
    }

    /// Maps a unit-scaled value back to original units.
    pub fn unscale_value(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range <= 0.0 {
            self.min[j]
        } else {
            self.min[j] + v * range
        }
    }

    pub fn inverse(&self, d: &Dataset) -> Result<Dataset> {
        self.map(d, Self::unscale_value)
    }

    fn map(&self, d: &Dataset, f: impl Fn(&Self, usize, f64) -> f64) -> Result<Dataset> {
        if d.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: d.n_features(),
            });
        }
        let dim = d.n_features();
        let features = d
            .features()
            .iter()
            .enumerate()
            .map(|(k, &x)| f(self, k % dim, x))
            .collect();
        Dataset::new(features, dim, d.labels().to_vec(), d.class_count())
    }
}

/// Column-wise extrema of the features.
pub fn fit_scaler(d: &Dataset) -> ScalingParams {
    let dim = d.n_features();
    let mut min = vec![f64::INFINITY; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    for row in d.rows() {
        for (j, &x) in row.iter().enumerate() {
            min[j] = min[j].min(x);
            max[j] = max[j].max(x);
        }
    }
    ScalingParams { min, max }
}

/// `(x - min) / (max - min)` clamped to `[0, 1]`.
pub fn apply_scaler(d: &Dataset, s: &ScalingParams) -> Result<Dataset> {
    s.map(d, ScalingParams::scale_value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.25,
            seed: 0,
        }
    }
}

/// Train/test row indices, each sorted ascending.
pub fn split_indices(d: &Dataset, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let t = d.len();
    if t < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split a dataset with {t} rows"
        )));
    }
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {} must lie in (0, 1)",
            spec.test_fraction
        )));
    }
    let n_test = ((t as f64 * spec.test_fraction).round() as usize).clamp(1, t - 1);
    let mut rng = rng::seeded(spec.seed);

    let counts = d.class_counts();
    let stratify = counts.iter().all(|&c| c == 0 || c >= 2);
    let mut test = Vec::with_capacity(n_test);
    if stratify {
        let quotas = stratified_quotas(&counts, n_test);
        for (class, &quota) in quotas.iter().enumerate() {
            let mut members: Vec<usize> = (0..t).filter(|&i| d.label(i) == class).collect();
            members.shuffle(&mut rng);
            test.extend_from_slice(&members[..quota]);
        }
    } else {
        let mut all: Vec<usize> = (0..t).collect();
        all.shuffle(&mut rng);
        test.extend_from_slice(&all[..n_test]);
    }
    test.sort_unstable();
    let mut in_test = vec![false; t];
    for &i in &test {
        in_test[i] = true;
    }
    let train = (0..t).filter(|&i| !in_test[i]).collect();
    Ok((train, test))
}

/// Largest-remainder allocation of `n_test` rows across classes, keeping at
/// least one row of every class on the training side.
fn stratified_quotas(counts: &[usize], n_test: usize) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let ideal: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 * n_test as f64 / total as f64)
        .collect();
    let mut quotas: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - ideal[a].floor();
        let rb = ideal[b] - ideal[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let cap = |c: usize| counts[c].saturating_sub(1);
    let mut remaining = n_test - quotas.iter().sum::<usize>();
    for c in 0..quotas.len() {
        let excess = quotas[c].saturating_sub(cap(c));
        quotas[c] -= excess;
        remaining += excess;
    }
    while remaining > 0 {
        let mut progressed = false;
        for &c in &order {
            if remaining > 0 && quotas[c] < cap(c) {
                quotas[c] += 1;
                remaining -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    quotas
}

pub fn split(d: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(d, spec)?;
    Ok((d.subset(&train)?, d.subset(&test)?))
}

/// Parametric 2-D toy datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ToyKind {
    /// Two isotropic Gaussian blobs, one per class.
    Blobs { centers: [[f64; 2]; 2], std: f64 },
    /// Two interleaving half circles.
    Moons { noise: f64 },
    /// Right-skewed modes laid out along a line, alternating classes.
    SkewedMultimodal { modes: usize, skew: f64 },
}

impl ToyKind {
    pub fn name(&self) -> &'static str {
        match self {
            ToyKind::Blobs { .. } => "blobs",
            ToyKind::Moons { .. } => "moons",
            ToyKind::SkewedMultimodal { .. } => "skewed-multimodal",
        }
    }
}

impl fmt::Display for ToyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ToyKind {
    type Err = Error;

    /// Parses a kind name with default parameters.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(ToyKind::Blobs {
                centers: [[0.0, 0.0], [1.0, 1.0]],
                std: 0.1,
            }),
            "moons" => Ok(ToyKind::Moons { noise: 0.1 }),
            "skewed-multimodal" => Ok(ToyKind::SkewedMultimodal { modes: 4, skew: 1.0 }),
            other => Err(Error::InvalidArgument(format!(
                "unknown toy dataset kind `{other}` (expected blobs, moons or skewed-multimodal)"
            ))),
        }
    }
}

/// Generates `n` rows of 2-D toy data. Deterministic given `seed`.
pub fn make_toy(kind: &ToyKind, n: usize, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "toy datasets need at least 4 rows, got {n}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let n0 = n.div_ceil(2);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);

    match *kind {
        ToyKind::Blobs { centers, std } => {
            let noise = normal(std)?;
            for i in 0..n {
                let class = usize::from(i >= n0);
                let [cx, cy] = centers[class];
                features.push(cx + noise.sample(&mut rng));
                features.push(cy + noise.sample(&mut rng));
                labels.push(class);
            }
        }
        ToyKind::Moons { noise } => {
            let noise = normal(noise)?;
            for i in 0..n {
                let class = usize::from(i >= n0);
                let t = rng.random_range(0.0..std::f64::consts::PI);
                let (x, y) = if class == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                features.push(x + noise.sample(&mut rng));
                features.push(y + noise.sample(&mut rng));
                labels.push(class);
            }
        }
        ToyKind::SkewedMultimodal { modes, skew } => {
            if modes < 2 {
                return Err(Error::InvalidArgument("skewed-multimodal needs >= 2 modes".into()));
            }
            if !(skew > 0.0) {
                return Err(Error::InvalidArgument("skew must be positive".into()));
            }
            let tail = Exp::new(1.0 / (0.25 * skew))
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let jitter = normal(0.12)?;
            for (mode, count) in mode_sizes(modes, n).into_iter().enumerate() {
                let cx = mode as f64;
                let cy = if mode % 2 == 0 { 0.0 } else { 0.6 };
                for _ in 0..count {
                    features.push(cx + tail.sample(&mut rng));
                    features.push(cy + jitter.sample(&mut rng));
                    labels.push(mode % 2);
                }
            }
        }
    }
    Dataset::new(features, 2, labels, 2)
}

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(format!("noise std {std}: {e}")))
}

/// Geometrically decaying mode sizes (ratio 0.6), at least one row each.
fn mode_sizes(modes: usize, n: usize) -> Vec<usize> {
    let weights: Vec<f64> = (0..modes).map(|j| 0.6f64.powi(j as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut sizes: Vec<usize> = weights
        .iter()
        .map(|w| ((w / total) * n as f64).floor().max(1.0) as usize)
        .collect();
    while sizes.iter().sum::<usize>() > n {
        let largest = (0..modes).max_by_key(|&j| (sizes[j], usize::MAX - j)).unwrap_or(0);
        sizes[largest] -= 1;
    }
    let mut j = 0;
    while sizes.iter().sum::<usize>() < n {
        sizes[j % modes] += 1;
        j += 1;
    }
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_three_rows() {
        let f = write_tmp("a,b,label\n1,2,x\n3,4,y\n5,6,x\n");
        let t = load_csv(f.path(), "label").unwrap();
        assert_eq!(t.dataset.len(), 3);
        assert_eq!(t.dataset.n_features(), 2);
        assert_eq!(t.dataset.class_count(), 2);
        assert_eq!(t.dataset.labels(), &[0, 1, 0]);
        assert_eq!(t.class_names, vec!["x", "y"]);
        assert_eq!(t.feature_names(), vec!["a", "b"]);
    }

    #[test]
    fn labels_are_lexicographic() {
        let f = write_tmp("label,a\nzeta,1\nalpha,2\nmid,3\n");
        let t = load_csv(f.path(), "label").unwrap();
        assert_eq!(t.class_names, vec!["alpha", "mid", "zeta"]);
        assert_eq!(t.dataset.labels(), &[2, 0, 1]);
        assert_eq!(t.label_index, 0);
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let f = write_tmp("a,b,label\n1,2,x\n3,abc,y\n");
        match load_csv(f.path(), "label") {
            Err(Error::NonNumeric { row, column, value, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_class() {
        let f = write_tmp("a,label\n1,x\n2,x\n");
        let t = load_csv(f.path(), "label").unwrap();
        assert_eq!(t.dataset.class_count(), 1);
    }

    #[test]
    fn csv_error_paths() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "label"),
            Err(Error::MissingFile(_))
        ));
        let f = write_tmp("a,b\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), "label"),
            Err(Error::MissingLabelColumn { .. })
        ));
        let f = write_tmp("");
        assert!(matches!(load_csv(f.path(), "label"), Err(Error::EmptyFile { .. })));
        let f = write_tmp("a,label\n");
        assert!(matches!(load_csv(f.path(), "label"), Err(Error::EmptyFile { .. })));
    }

    #[test]
    fn csv_write_round_trip() {
        let f = write_tmp("a,label,b\n1.5,x,2\n3,y,-4.25\n");
        let t = load_csv(f.path(), "label").unwrap();
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &t, &t.dataset).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,label,b\n1.5,x,2\n3,y,-4.25\n");
    }

    #[test]
    fn scaler_extrema() {
        let d = Dataset::from_rows(&[vec![2.0], vec![4.0], vec![6.0]], vec![0, 0, 0], 1).unwrap();
        let s = fit_scaler(&d);
        assert_eq!(s.min, vec![2.0]);
        assert_eq!(s.max, vec![6.0]);
        assert_eq!(s.scale_value(0, 4.0), 0.5);
        assert_eq!(s.scale_value(0, 8.0), 1.0);
        assert_eq!(s.scale_value(0, 2.0), 0.0);
    }

    #[test]
    fn constant_column_maps_to_half() {
        let d = Dataset::from_rows(&[vec![5.0], vec![5.0], vec![5.0]], vec![0, 0, 0], 1).unwrap();
        let s = fit_scaler(&d);
        assert_eq!((s.min[0], s.max[0]), (5.0, 5.0));
        let scaled = apply_scaler(&d, &s).unwrap();
        assert!(scaled.features().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn scaler_columns_independent() {
        let d = Dataset::from_rows(&[vec![0.0, -1.0], vec![1.0, 1.0]], vec![0, 0], 1).unwrap();
        let s = fit_scaler(&d);
        assert_eq!(s.min, vec![0.0, -1.0]);
        assert_eq!(s.max, vec![1.0, 1.0]);
    }

    #[test]
    fn scaler_dimension_mismatch() {
        let d = Dataset::from_rows(&[vec![0.0, 1.0]], vec![0], 1).unwrap();
        let s = ScalingParams {
            min: vec![0.0],
            max: vec![1.0],
        };
        assert!(matches!(apply_scaler(&d, &s), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn split_sizes() {
        let d = make_toy(&"blobs".parse().unwrap(), 100, 3).unwrap();
        let (train, test) = split(&d, SplitSpec { test_fraction: 0.25, seed: 1 }).unwrap();
        assert_eq!((train.len(), test.len()), (75, 25));
    }

    #[test]
    fn split_stratifies_small_balanced() {
        let d = Dataset::from_rows(
            &[vec![0.0], vec![0.1], vec![0.9], vec![1.0]],
            vec![0, 0, 1, 1],
            2,
        )
        .unwrap();
        for seed in 0..20 {
            let (train, test) = split(&d, SplitSpec { test_fraction: 0.5, seed }).unwrap();
            assert_eq!(train.class_counts(), vec![1, 1]);
            assert_eq!(test.class_counts(), vec![1, 1]);
        }
    }

    #[test]
    fn split_deterministic_and_errors() {
        let d = make_toy(&"moons".parse().unwrap(), 50, 9).unwrap();
        let spec = SplitSpec { test_fraction: 0.3, seed: 42 };
        assert_eq!(split_indices(&d, spec).unwrap(), split_indices(&d, spec).unwrap());
        let one = Dataset::from_rows(&[vec![0.0]], vec![0], 1).unwrap();
        assert!(split(&one, spec).is_err());
        assert!(split(&d, SplitSpec { test_fraction: 1.0, seed: 0 }).is_err());
    }

    #[test]
    fn split_falls_back_when_class_is_singleton() {
        let d = Dataset::from_rows(
            &[vec![0.0], vec![0.1], vec![0.2], vec![1.0]],
            vec![0, 0, 0, 1],
            2,
        )
        .unwrap();
        let (train, test) = split_indices(&d, SplitSpec { test_fraction: 0.5, seed: 5 }).unwrap();
        assert_eq!(train.len() + test.len(), 4);
        assert_eq!(test.len(), 2);
    }

    #[test]
    fn toy_blobs_balanced() {
        let d = make_toy(&"blobs".parse().unwrap(), 4, 0).unwrap();
        assert_eq!(d.class_counts(), vec![2, 2]);
    }

    #[test]
    fn toy_determinism() {
        for kind in ["blobs", "moons", "skewed-multimodal"] {
            let k: ToyKind = kind.parse().unwrap();
            let a = make_toy(&k, 64, 17).unwrap();
            let b = make_toy(&k, 64, 17).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 64);
            let bits_a: Vec<u64> = a.features().iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = b.features().iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
            assert!(a.class_counts().iter().all(|&c| c > 0));
        }
    }

    #[test]
    fn toy_errors() {
        assert!("spirals".parse::<ToyKind>().is_err());
        assert!(make_toy(&"moons".parse().unwrap(), 3, 0).is_err());
    }
}
