//! Datasets: CSV ingestion, train/test splitting, feature standardization,
//! and the two synthetic generators used by the experiment commands.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SaspaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Regression => write!(f, "regression"),
            Task::Classification => write!(f, "classification"),
        }
    }
}

/// N input vectors with scalar outputs. Classification outputs are +1/-1.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Vec<DVector<f64>>,
    pub outputs: Vec<f64>,
    pub task: Task,
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(inputs: Vec<DVector<f64>>, outputs: Vec<f64>, task: Task) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(SaspaError::Data(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        if inputs.is_empty() {
            return Err(SaspaError::Data("dataset is empty".into()));
        }
        let d = inputs[0].len();
        for x in &inputs {
            if x.len() != d {
                return Err(SaspaError::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(SaspaError::Data("nonfinite feature value".into()));
            }
        }
        for &y in &outputs {
            if !y.is_finite() {
                return Err(SaspaError::Data("nonfinite output value".into()));
            }
            if task == Task::Classification && y != 1.0 && y != -1.0 {
                return Err(SaspaError::Data(format!(
                    "classification outputs must be +1/-1, got {y}"
                )));
            }
        }
        Ok(Self {
            inputs,
            outputs,
            task,
            feature_names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    /// Seeded shuffle-and-split into (train, test) with `n_train` points.
    pub fn split(&self, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        if n_train == 0 || n_train >= self.len() {
            return Err(SaspaError::InvalidParameter(format!(
                "train size {n_train} must be in 1..{}",
                self.len()
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let take = |ids: &[usize]| -> Dataset {
            Dataset {
                inputs: ids.iter().map(|&i| self.inputs[i].clone()).collect(),
                outputs: ids.iter().map(|&i| self.outputs[i]).collect(),
                task: self.task,
                feature_names: self.feature_names.clone(),
            }
        };
        Ok((take(&idx[..n_train]), take(&idx[n_train..])))
    }
}

/// Per-feature affine transform to zero mean / unit variance, fit on training
/// data only. Constant features keep scale 1 so the transform stays invertible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Self {
        let d = train.dim();
        let n = train.len() as f64;
        let mut mean = vec![0.0; d];
        for x in &train.inputs {
            for (m, v) in mean.iter_mut().zip(x.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for x in &train.inputs {
            for ((s, v), m) in var.iter_mut().zip(x.iter()).zip(&mean) {
                let r = v - m;
                *s += r * r;
            }
        }
        let scale = var
            .iter()
            .map(|&s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform_point(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| (x[i] - self.mean[i]) / self.scale[i])
    }

    pub fn invert_point(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(z.len(), |i, _| z[i] * self.scale[i] + self.mean[i])
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        Dataset {
            inputs: ds.inputs.iter().map(|x| self.transform_point(x)).collect(),
            outputs: ds.outputs.clone(),
            task: ds.task,
            feature_names: ds.feature_names.clone(),
        }
    }
}

/// CSV loading options.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// Zero-based label column; `None` means the last column.
    pub label_column: Option<usize>,
    /// Cell value mapped to +1 for classification; anything else maps to -1
    /// and must be one single other value.
    pub positive_label: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            label_column: None,
            positive_label: "1".into(),
        }
    }
}

/// Load a dataset from a delimited text file. A non-numeric first row is
/// treated as a header.
pub fn load_csv(path: &std::path::Path, task: Task, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(false)
        .from_path(path)?;

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in reader.records() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(SaspaError::Data(format!("{}: empty file", path.display())));
    }

    let header_present = rows[0]
        .iter()
        .any(|cell| cell.trim().parse::<f64>().is_err());
    let mut feature_names = None;
    let mut start = 0;
    if header_present {
        feature_names = Some(rows[0].iter().map(|s| s.trim().to_string()).collect());
        start = 1;
        if rows.len() == 1 {
            return Err(SaspaError::Data(format!(
                "{}: header but no data rows",
                path.display()
            )));
        }
    }

    let width = rows[start].len();
    if width < 2 {
        return Err(SaspaError::Data(
            "need at least one feature column and one label column".into(),
        ));
    }
    let label_col = options.label_column.unwrap_or(width - 1);
    if label_col >= width {
        return Err(SaspaError::InvalidParameter(format!(
            "label column {label_col} out of range for {width} columns"
        )));
    }

    let mut inputs = Vec::with_capacity(rows.len() - start);
    let mut raw_labels = Vec::with_capacity(rows.len() - start);
    for (ri, row) in rows.iter().enumerate().skip(start) {
        let line = ri + 1;
        if row.len() != width {
            return Err(SaspaError::Data(format!(
                "line {line}: expected {width} fields, found {}",
                row.len()
            )));
        }
        let mut features = Vec::with_capacity(width - 1);
        for (ci, cell) in row.iter().enumerate() {
            if ci == label_col {
                raw_labels.push(cell.trim().to_string());
                continue;
            }
            let value: f64 = cell.trim().parse().map_err(|_| SaspaError::CsvCell {
                line,
                column: ci + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            features.push(value);
        }
        inputs.push(DVector::from_vec(features));
    }

    let outputs = match task {
        Task::Regression => raw_labels
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<f64>().map_err(|_| SaspaError::CsvCell {
                    line: i + 1 + start,
                    column: label_col + 1,
                    message: format!("not a number: {s:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?,
        Task::Classification => {
            let mut negative: Option<String> = None;
            let mut out = Vec::with_capacity(raw_labels.len());
            for s in &raw_labels {
                if *s == options.positive_label {
                    out.push(1.0);
                } else {
                    match &negative {
                        None => negative = Some(s.clone()),
                        Some(n) if n == s => {}
                        Some(n) => {
                            return Err(SaspaError::Data(format!(
                                "non-binary labels: {:?}, {n:?}, {s:?}",
                                options.positive_label
                            )))
                        }
                    }
                    out.push(-1.0);
                }
            }
            out
        }
    };

    let mut ds = Dataset::new(inputs, outputs, task)?;
    ds.feature_names = feature_names;
    Ok(ds)
}

/// Tunable constants of the circle generator. All values are invented
/// defaults; the synthetic task is qualitative.
#[derive(Debug, Clone)]
pub struct CircleParams {
    pub radial_noise: f64,
    pub output_noise: f64,
    pub quadrant_values: [f64; 4],
}

impl Default for CircleParams {
    fn default() -> Self {
        Self {
            radial_noise: 0.1,
            output_noise: 0.1,
            quadrant_values: [-3.0, -1.0, 1.0, 3.0],
        }
    }
}

/// Points near the unit circle whose output is a per-quadrant level plus noise.
pub fn gen_circle_regression(n: usize, seed: u64, params: &CircleParams) -> Result<Dataset> {
    if n < 4 {
        return Err(SaspaError::InvalidParameter(format!(
            "circle generator needs n >= 4, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    for _ in 0..n {
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        inputs.push(DVector::from_vec(vec![
            theta.cos() + params.radial_noise * nx,
            theta.sin() + params.radial_noise * ny,
        ]));
        let quadrant = (theta / std::f64::consts::FRAC_PI_2) as usize % 4;
        let ey: f64 = rng.sample(StandardNormal);
        outputs.push(params.quadrant_values[quadrant] + params.output_noise * ey);
    }
    Dataset::new(inputs, outputs, Task::Regression)
}

/// Two overlapping 2-D Gaussian classes. Covariances differ in shape so the
/// optimal boundary is curved.
#[derive(Debug, Clone)]
pub struct GaussianClassesParams {
    pub mean_neg: [f64; 2],
    pub mean_pos: [f64; 2],
    pub cov_neg: [[f64; 2]; 2],
    pub cov_pos: [[f64; 2]; 2],
}

impl Default for GaussianClassesParams {
    fn default() -> Self {
        Self {
            mean_neg: [-1.0, 0.0],
            mean_pos: [1.0, 0.0],
            cov_neg: [[1.0, 0.0], [0.0, 2.0]],
            cov_pos: [[1.0, 0.5], [0.5, 1.0]],
        }
    }
}

fn chol2(c: &[[f64; 2]; 2]) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(2, 2, &[c[0][0], c[0][1], c[1][0], c[1][1]]);
    nalgebra::Cholesky::new(m)
        .expect("class covariance must be positive definite")
        .l()
        .into()
}

fn sample_classes(
    n: usize,
    rng: &mut ChaCha8Rng,
    params: &GaussianClassesParams,
    l_neg: &DMatrix<f64>,
    l_pos: &DMatrix<f64>,
) -> Result<Dataset> {
    let mut inputs = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    for i in 0..n {
        // alternate labels for exact balance
        let positive = i % 2 == 0;
        let (mean, l) = if positive {
            (&params.mean_pos, l_pos)
        } else {
            (&params.mean_neg, l_neg)
        };
        let z = DVector::from_vec(vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]);
        let x = l * z + DVector::from_column_slice(mean);
        inputs.push(x);
        outputs.push(if positive { 1.0 } else { -1.0 });
    }
    Dataset::new(inputs, outputs, Task::Classification)
}

/// Balanced synthetic classification data; train and test are disjoint draws
/// from one seeded stream.
pub fn gen_gaussian_classes(
    n_train: usize,
    n_test: usize,
    seed: u64,
    params: &GaussianClassesParams,
) -> Result<(Dataset, Dataset)> {
    if n_train < 2 || n_test < 2 {
        return Err(SaspaError::InvalidParameter(
            "class generator needs at least 2 train and 2 test points".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l_neg = chol2(&params.cov_neg);
    let l_pos = chol2(&params.cov_pos);
    let train = sample_classes(n_train, &mut rng, params, &l_neg, &l_pos)?;
    let test = sample_classes(n_test, &mut rng, params, &l_neg, &l_pos)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn circle_has_requested_size_and_bounded_radii() {
        let ds = gen_circle_regression(100, 42, &CircleParams::default()).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.dim(), 2);
        for x in &ds.inputs {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!((0.5..=1.5).contains(&r), "radius {r} outside 5-sigma band");
        }
    }

    #[test]
    fn circle_outputs_cluster_on_four_levels() {
        let params = CircleParams {
            output_noise: 0.0,
            ..CircleParams::default()
        };
        let ds = gen_circle_regression(200, 7, &params).unwrap();
        let mut levels: Vec<f64> = ds.outputs.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert!(levels.len() <= 4);
        for l in levels {
            assert!([-3.0, -1.0, 1.0, 3.0].contains(&l));
        }
    }

    #[test]
    fn circle_is_deterministic_and_seed_sensitive() {
        let p = CircleParams::default();
        let a = gen_circle_regression(50, 1, &p).unwrap();
        let b = gen_circle_regression(50, 1, &p).unwrap();
        let c = gen_circle_regression(50, 2, &p).unwrap();
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.outputs, b.outputs);
        assert_ne!(a.inputs, c.inputs);
    }

    #[test]
    fn gaussian_classes_sizes_and_balance() {
        let (train, test) =
            gen_gaussian_classes(200, 2000, 3, &GaussianClassesParams::default()).unwrap();
        assert_eq!(train.len(), 200);
        assert_eq!(test.len(), 2000);
        let pos = train.outputs.iter().filter(|&&y| y == 1.0).count() as i64;
        assert!((pos - 100).abs() <= 1);
        assert_ne!(train.inputs[0], test.inputs[0]);
    }

    #[test]
    fn load_csv_small_classification() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "0.5,1.0,1").unwrap();
        writeln!(f, "0.1,-0.2,-1").unwrap();
        writeln!(f, "0.9,0.4,1").unwrap();
        let ds = load_csv(f.path(), Task::Classification, &CsvOptions::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.outputs, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn load_csv_detects_header_and_bad_cells() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,label").unwrap();
        writeln!(f, "1.0,2.0,0.5").unwrap();
        writeln!(f, "1.0,oops,0.5").unwrap();
        let err = load_csv(f.path(), Task::Regression, &CsvOptions::default()).unwrap_err();
        match err {
            SaspaError::CsvCell { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 2);
            }
            other => panic!("expected CsvCell, got {other}"),
        }
    }

    #[test]
    fn load_csv_rejects_non_binary_labels() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.0,1").unwrap();
        writeln!(f, "2.0,2").unwrap();
        writeln!(f, "3.0,3").unwrap();
        assert!(matches!(
            load_csv(f.path(), Task::Classification, &CsvOptions::default()),
            Err(SaspaError::Data(_))
        ));
    }

    #[test]
    fn standardizer_round_trips() {
        let ds = gen_circle_regression(40, 9, &CircleParams::default()).unwrap();
        let st = Standardizer::fit(&ds);
        let tr = st.transform(&ds);
        for (orig, z) in ds.inputs.iter().zip(&tr.inputs) {
            let back = st.invert_point(z);
            assert!((orig - &back).amax() < 1e-12);
        }
        // transformed features have mean ~0, sd ~1
        let n = tr.len() as f64;
        for k in 0..tr.dim() {
            let mean: f64 = tr.inputs.iter().map(|x| x[k]).sum::<f64>() / n;
            let var: f64 = tr.inputs.iter().map(|x| x[k] * x[k]).sum::<f64>() / n - mean * mean;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn split_is_disjoint_and_seeded() {
        let ds = gen_circle_regression(30, 11, &CircleParams::default()).unwrap();
        let (a1, b1) = ds.split(20, 5).unwrap();
        let (a2, _) = ds.split(20, 5).unwrap();
        assert_eq!(a1.inputs, a2.inputs);
        assert_eq!(a1.len() + b1.len(), 30);
        assert!(ds.split(0, 1).is_err());
        assert!(ds.split(30, 1).is_err());
    }

    #[test]
    fn classification_labels_validated() {
        let bad = Dataset::new(
            vec![DVector::from_vec(vec![0.0])],
            vec![0.5],
            Task::Classification,
        );
        assert!(bad.is_err());
    }
}
