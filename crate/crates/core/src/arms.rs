//! Arm feature sets and ground-truth reward profiles.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{pca_reduce, rbf_features, rbf_kernel, sigmoid};
use crate::{Error, Result};

/// The K arms a learner chooses between.
///
/// Row `k` of `features` is the feature vector of arm `k`. Sets built by the
/// preprocessing pipeline carry a constant intercept in column 0 and
/// unit-norm raw features in the remaining columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet {
    features: DMatrix<f64>,
    names: Vec<String>,
    has_intercept: bool,
}

impl ArmSet {
    /// Arms with an arbitrary design matrix, used as is.
    pub fn from_design(features: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidArgument("arm set needs at least one arm and one feature".into()));
        }
        if names.len() != features.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} arms",
                names.len(),
                features.nrows()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("arm features must be finite".into()));
        }
        let has_intercept = features.column(0).iter().all(|&v| v == 1.0);
        Ok(Self {
            features,
            names,
            has_intercept,
        })
    }

    /// Prepends the constant intercept column to already preprocessed raw features.
    pub fn with_intercept(raw: &DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (k, m) = raw.shape();
        let mut x = DMatrix::from_element(k, m + 1, 1.0);
        x.view_mut((0, 1), (k, m)).copy_from(raw);
        Self::from_design(x, names)
    }

    /// Design without names; arms are labelled by index.
    pub fn unnamed(features: DMatrix<f64>) -> Result<Self> {
        let names = (0..features.nrows()).map(|i| format!("arm{i}")).collect();
        Self::from_design(features, names)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, k: usize) -> &str {
        &self.names[k]
    }

    /// Number of arms.
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    /// Parameter dimension (M + 1 when an intercept is present).
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn arm(&self, k: usize) -> DVector<f64> {
        self.features.row(k).transpose()
    }

    /// Raw feature part of arm `k` (everything after the intercept).
    pub fn raw(&self, k: usize) -> DVector<f64> {
        let start = usize::from(self.has_intercept);
        DVector::from_iterator(self.dim() - start, self.features.row(k).iter().skip(start).copied())
    }

    /// Linear scores `X·θ`.
    pub fn scores(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.features * theta
    }

    /// `Xᵀ·w` for a weight vector over arms.
    pub fn weighted_features(&self, weights: &DVector<f64>) -> DVector<f64> {
        self.features.tr_mul(weights)
    }

    pub fn subset(&self, indices: &[usize]) -> ArmSet {
        let features = self.features.select_rows(indices);
        ArmSet {
            features,
            names: indices.iter().map(|&i| self.names[i].clone()).collect(),
            has_intercept: self.has_intercept,
        }
    }
}

/// Ground-truth reward profile known to the simulated teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub theta_star: Vec<f64>,
    pub reward_probs: Vec<f64>,
    pub target_index: usize,
}

impl GroundTruth {
    pub fn theta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta_star)
    }

    /// Ground truth from an explicit parameter vector.
    pub fn from_theta(arms: &ArmSet, theta_star: DVector<f64>, target_index: usize) -> Result<Self> {
        if theta_star.len() != arms.dim() {
            return Err(Error::DimensionMismatch(format!(
                "theta has length {} but arms have dimension {}",
                theta_star.len(),
                arms.dim()
            )));
        }
        let reward_probs = arms.scores(&theta_star).iter().map(|&s| sigmoid(s)).collect();
        Ok(Self {
            theta_star: theta_star.iter().copied().collect(),
            reward_probs,
            target_index,
        })
    }
}

/// Ground truth `θ* = [c, d·x̂]` centred on the target arm's raw features.
pub fn make_ground_truth(arms: &ArmSet, target_index: usize, c: f64, d: f64) -> Result<GroundTruth> {
    if !arms.has_intercept() {
        return Err(Error::InvalidArgument("ground truth needs an intercept column".into()));
    }
    if target_index >= arms.len() {
        return Err(Error::InvalidArgument(format!(
            "target {target_index} out of range for {} arms",
            arms.len()
        )));
    }
    let target = arms.raw(target_index);
    let mut theta = DVector::zeros(arms.dim());
    theta[0] = c;
    theta.rows_mut(1, arms.dim() - 1).copy_from(&(target * d));
    GroundTruth::from_theta(arms, theta, target_index)
}

/// Preprocessing options for [`load_arms_csv`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Reduce raw features with PCA to this many dimensions first.
    pub pca_dim: Option<usize>,
    /// Replace the PCA route with an RBF kernel featurization at this length-scale.
    pub rbf_length_scale: Option<f64>,
    /// Keep a uniform random subset of this many rows before preprocessing.
    pub subsample: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

/// Reads a CSV of `name, f1, f2, ...` rows. A header row is detected when
/// its numeric columns fail to parse.
pub fn read_feature_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut names = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut width = None;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: row + 1,
                column: record.len() + 1,
                message: "expected a name followed by at least one feature".into(),
            });
        }
        let parsed: Vec<std::result::Result<f64, _>> =
            record.iter().skip(1).map(|s| s.parse::<f64>()).collect();
        if row == 0 && parsed.iter().any(|p| p.is_err()) {
            continue;
        }
        let n = record.len() - 1;
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: row + 1,
                    column: record.len().min(w + 1) + 1,
                    message: format!("row has {n} features, expected {w}"),
                })
            }
            _ => {}
        }
        for (col, p) in parsed.into_iter().enumerate() {
            match p {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row: row + 1,
                        column: col + 2,
                        message: format!("not a finite number: {:?}", &record[col + 1]),
                    })
                }
            }
        }
        names.push(record[0].to_string());
    }
    let w = width.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        row: 0,
        column: 0,
        message: "no data rows".into(),
    })?;
    let n = names.len();
    Ok((names, DMatrix::from_row_slice(n, w, &values)))
}

/// Loads arms from CSV and runs the preprocessing pipeline:
/// optional PCA, mean-centring, unit-length normalization, intercept.
///
/// With `rbf_length_scale` set, rows are unit-normalized, replaced by their
/// RBF kernel row against all loaded rows, and given an intercept instead.
pub fn load_arms_csv(path: &Path, options: &LoadOptions) -> Result<ArmSet> {
    let (names, raw) = read_feature_csv(path)?;
    prepare_arms(names, raw, options)
}

/// The preprocessing pipeline of [`load_arms_csv`] on in-memory rows.
pub fn prepare_arms(mut names: Vec<String>, mut raw: DMatrix<f64>, options: &LoadOptions) -> Result<ArmSet> {
    if names.len() != raw.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {} rows",
            names.len(),
            raw.nrows()
        )));
    }
    if let Some(n) = options.subsample {
        if n > names.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot subsample {n} rows from {}",
                names.len()
            )));
        }
        let mut rng = crate::rng::stream(options.seed, &[0x5ab5]);
        let mut idx = index::sample(&mut rng, names.len(), n).into_vec();
        idx.sort_unstable();
        raw = raw.select_rows(&idx);
        names = idx.iter().map(|&i| names[i].clone()).collect();
    }
    if names.len() < 2 {
        return Err(Error::InvalidArgument("need at least two arms".into()));
    }
    match options.rbf_length_scale {
        Some(ls) => rbf_arm_set(&raw, names, ls),
        None => {
            let reduced = match options.pca_dim {
                Some(dim) => pca_reduce(&raw, dim)?.projected,
                None => raw,
            };
            ArmSet::with_intercept(&center_and_normalize(&reduced), names)
        }
    }
}

/// Subtracts the column means, then scales each row to unit length.
/// Rows that are exactly zero after centring stay zero.
pub fn center_and_normalize(raw: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = raw.row_mean();
    let mut out = raw.clone();
    for mut row in out.row_iter_mut() {
        row -= &mean;
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
    out
}

/// Kernel featurization: arm `k` gets features `[1, κ(x_k, x_1), …, κ(x_k, x_N)]`
/// over unit-normalized raw vectors.
pub fn rbf_arm_set(raw: &DMatrix<f64>, names: Vec<String>, length_scale: f64) -> Result<ArmSet> {
    if length_scale <= 0.0 {
        return Err(Error::InvalidArgument("RBF length-scale must be positive".into()));
    }
    let mut unit = raw.clone();
    for mut row in unit.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
    let kernel = rbf_kernel(&unit, &unit, length_scale);
    ArmSet::with_intercept(&kernel, names)
}

/// `n` arms evenly spaced on [0, 1] with features `[1, κ(x, c₁), κ(x, c₂), …]`.
pub fn line_rbf_arms(n: usize, centers: &[f64], length_scale: f64) -> Result<ArmSet> {
    let positions: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1).max(1) as f64).collect();
    let features = rbf_features(&positions, centers, length_scale);
    let names = (1..=n).map(|i| format!("arm{i}")).collect();
    ArmSet::with_intercept(&features, names)
}

/// Length-scale at which arm `arm` of [`line_rbf_arms`] has reward
/// probability `target` under `theta_star`, found by bisection on
/// `[1e-3, 10]`. Fails when the target is not bracketed.
pub fn calibrate_line_rbf(
    n: usize,
    centers: &[f64],
    theta_star: &DVector<f64>,
    arm: usize,
    target: f64,
) -> Result<f64> {
    if arm >= n || !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!("cannot calibrate arm {arm} of {n} to {target}")));
    }
    let gap = |ls: f64| -> Result<f64> {
        let arms = line_rbf_arms(n, centers, ls)?;
        Ok(sigmoid(arms.arm(arm).dot(theta_star)) - target)
    };
    let (mut lo, mut hi) = (1e-3, 10.0);
    let (g_lo, g_hi) = (gap(lo)?, gap(hi)?);
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::InvalidArgument(format!(
            "reward probability {target} is not reachable on the length-scale bracket"
        )));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)?.signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One replicate's arm subset and target, both drawn uniformly.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub arms: ArmSet,
    pub target_index: usize,
    /// Indices of the chosen arms in the source set.
    pub source_indices: Vec<usize>,
}

pub fn sample_replicate<R: Rng + ?Sized>(arms: &ArmSet, n_arms: usize, rng: &mut R) -> Result<Replicate> {
    if n_arms == 0 || n_arms > arms.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {n_arms} arms from {}",
            arms.len()
        )));
    }
    let source_indices = index::sample(rng, arms.len(), n_arms).into_vec();
    let target_index = rng.random_range(0..n_arms);
    Ok(Replicate {
        arms: arms.subset(&source_indices),
        target_index,
        source_indices,
    })
}
