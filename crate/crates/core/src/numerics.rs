//! Scalar and multivariate numerical primitives.
//!
//! Everything here is a pure function of its inputs.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Logistic sigmoid, saturating cleanly at both ends.
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x == f64::INFINITY {
        return x;
    }
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log σ(a)`.
pub fn log_sigmoid(a: f64) -> f64 {
    -softplus(-a)
}

/// `log(exp(a) + exp(b))`; either argument may be `-inf`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn normal_cdf(a: f64) -> f64 {
    0.5 * erfc(-a / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(a: f64) -> f64 {
    (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`normal_cdf`] for `p` in the open unit interval.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    let std = Normal::standard();
    let mut x = std.inverse_cdf(p);
    // Newton polish against our own CDF so cdf(quantile(p)) round-trips tightly.
    for _ in 0..3 {
        let density = normal_pdf(x);
        if density < 1e-300 {
            break;
        }
        let step = (normal_cdf(x) - p) / density;
        x -= step;
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// A multivariate normal distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl Gaussian {
    /// Validates symmetry (1e-10) and positive semi-definiteness (eigenvalues ≥ -1e-8).
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {d} but covariance is {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "covariance not symmetric (max deviation {asym:e})"
            )));
        }
        let sym = symmetrize(&covariance);
        if d > 0 {
            let min_eig = sym.clone().symmetric_eigenvalues().min();
            if min_eig < -1e-8 {
                return Err(Error::DegenerateCovariance(format!(
                    "covariance has negative eigenvalue {min_eig:e}"
                )));
            }
        }
        Ok(Self {
            mean,
            covariance: sym,
        })
    }

    pub fn isotropic(dim: usize, variance: f64) -> Self {
        Self {
            mean: DVector::zeros(dim),
            covariance: DMatrix::identity(dim, dim) * variance,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Marginal over the leading `dim` components.
    pub fn leading(&self, dim: usize) -> Gaussian {
        Gaussian {
            mean: self.mean.rows(0, dim).into_owned(),
            covariance: self.covariance.view((0, 0), (dim, dim)).into_owned(),
        }
    }

    /// Lower Cholesky factor, adding the smallest diagonal jitter that works
    /// when the covariance is only semi-definite.
    pub fn sqrt_factor(&self) -> DMatrix<f64> {
        cholesky_with_jitter(&self.covariance)
            .map(|(c, _)| c.l())
            .unwrap_or_else(|| psd_sqrt(&self.covariance))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let l = self.sqrt_factor();
        let eps = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + l * eps
    }

    /// Standard deviations of the marginals.
    pub fn marginal_sds(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| self.covariance[(i, i)].max(0.0).sqrt())
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky factorization, retrying with jitter `10^j · I` for `j = -12..=0`
/// scaled by the mean diagonal. Returns the factor and the jitter used.
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Option<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some((c, 0.0));
    }
    let n = m.nrows();
    let scale = (m.trace() / n.max(1) as f64).abs().max(1e-300);
    for j in -12..=0 {
        let jitter = scale * 10f64.powi(j);
        let shifted = m + DMatrix::identity(n, n) * jitter;
        if let Some(c) = Cholesky::new(shifted) {
            return Some((c, jitter));
        }
    }
    None
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
}

/// Distribution of component `k` of `joint` given the values of all other
/// components (`observed` lists them in index order, skipping `k`).
pub fn conditional_gaussian(joint: &Gaussian, k: usize, observed: &[f64]) -> Result<(f64, f64)> {
    let d = joint.dim();
    if k >= d {
        return Err(Error::InvalidArgument(format!("index {k} out of range for dimension {d}")));
    }
    if observed.len() + 1 != d {
        return Err(Error::DimensionMismatch(format!(
            "expected {} observed values, got {}",
            d - 1,
            observed.len()
        )));
    }
    if d == 1 {
        return Ok((joint.mean[0], joint.covariance[(0, 0)].max(0.0).sqrt()));
    }
    let rest: Vec<usize> = (0..d).filter(|&i| i != k).collect();
    let s_rr = DMatrix::from_fn(d - 1, d - 1, |i, j| joint.covariance[(rest[i], rest[j])]);
    let s_kr = DVector::from_fn(d - 1, |i, _| joint.covariance[(k, rest[i])]);
    let diff = DVector::from_fn(d - 1, |i, _| observed[i] - joint.mean[rest[i]]);
    let chol = Cholesky::new(s_rr).ok_or_else(|| {
        Error::DegenerateCovariance("conditioning block is not positive definite".into())
    })?;
    let weights = chol.solve(&s_kr);
    let mean = joint.mean[k] + weights.dot(&diff);
    let var = joint.covariance[(k, k)] - weights.dot(&s_kr);
    Ok((mean, var.max(0.0).sqrt()))
}

/// Result of [`pca_reduce`].
#[derive(Debug, Clone)]
pub struct Pca {
    /// N × target_dim scores of the centred data.
    pub projected: DMatrix<f64>,
    /// D × target_dim orthonormal principal directions.
    pub basis: DMatrix<f64>,
    /// Variance explained by each retained direction, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Sum of all eigenvalues of the sample covariance.
    pub total_variance: f64,
    pub mean: DVector<f64>,
}

/// Principal component projection of the rows of `data`.
///
/// Columns of the basis are ordered by decreasing explained variance and
/// signed so that each column's largest-magnitude loading is positive.
pub fn pca_reduce(data: &DMatrix<f64>, target_dim: usize) -> Result<Pca> {
    let (n, d) = data.shape();
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least two rows".into()));
    }
    if target_dim == 0 || target_dim > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "target dimension {target_dim} must be in 1..={}",
            n.min(d)
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("PCA input contains non-finite values".into()));
    }
    let mean = data.row_mean().transpose();
    let mut centred = data.clone();
    for mut row in centred.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(symmetrize(&cov));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > 1e-10 * top.max(1e-300))
        .count();
    // Data lying exactly in a subspace still admits that subspace's dimension.
    if target_dim > rank {
        return Err(Error::RankExceeded {
            requested: target_dim,
            rank,
        });
    }

    let mut basis = DMatrix::zeros(d, target_dim);
    for (c, &i) in order.iter().take(target_dim).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if pivot < 0.0 {
            v = -v;
        }
        basis.set_column(c, &v);
    }
    let projected = &centred * &basis;
    let explained_variance = order
        .iter()
        .take(target_dim)
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .collect();
    let total_variance = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    Ok(Pca {
        projected,
        basis,
        explained_variance,
        total_variance,
        mean,
    })
}

/// Gaussian RBF features of scalar positions against scalar centres.
pub fn rbf_features(positions: &[f64], centers: &[f64], length_scale: f64) -> DMatrix<f64> {
    let denom = 2.0 * length_scale * length_scale;
    DMatrix::from_fn(positions.len(), centers.len(), |i, j| {
        let d = positions[i] - centers[j];
        (-d * d / denom).exp()
    })
}

/// Gaussian RBF kernel between the rows of `a` and the rows of `b`.
pub fn rbf_kernel(a: &DMatrix<f64>, b: &DMatrix<f64>, length_scale: f64) -> DMatrix<f64> {
    let denom = 2.0 * length_scale * length_scale;
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let d2 = (a.row(i) - b.row(j)).norm_squared();
        (-d2 / denom).exp()
    })
}
