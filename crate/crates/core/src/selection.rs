//! Query strategies: Thompson sampling, Rao-Blackwellized estimates of the
//! Thompson selection probabilities, and Bayes-UCB.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::arms::ArmSet;
use crate::numerics::{normal_cdf, normal_quantile, Gaussian};
use crate::{Error, Result};

/// Estimated probability of each arm being selected next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionProbs {
    pub probs: Vec<f64>,
    pub n_samples: usize,
}

impl SelectionProbs {
    pub fn one_hot(k: usize, n_arms: usize) -> Self {
        let mut probs = vec![0.0; n_arms];
        probs[k] = 1.0;
        Self { probs, n_samples: 1 }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.probs)
    }
}

/// How the learner picks its next query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Thompson sampling; `n_samples` drives the probability estimates the
    /// planning teacher needs.
    Thompson { n_samples: usize },
    BayesUcb,
}

impl Default for SelectionStrategy {
    fn default() -> Self {
        Self::Thompson { n_samples: 1000 }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_val || (i == 0 && v.is_nan()) {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Draws θ from the belief and returns the arm with the highest `x_kᵀθ`.
pub fn thompson_sample<R: Rng + ?Sized>(belief: &Gaussian, arms: &ArmSet, rng: &mut R) -> usize {
    if arms.len() == 1 {
        return 0;
    }
    let theta = belief.sample(rng);
    argmax(arms.scores(&theta).iter().copied())
}

/// Rao-Blackwellized estimate of the Thompson selection probabilities.
///
/// With `z = Xθ ~ N(Xm, XΣXᵀ)`, each arm's probability is the average over
/// `n_samples` joint draws of `Pr(z_k > max_{j≠k} z_j | z_{-k})`. The
/// conditional is computed in the θ-space factorization `z = Xm + Aε`: given
/// `z_{-k}`, the part of `a_k` in the row space of the other arms is fixed
/// and the orthogonal remainder carries the conditional variance. When the
/// other arms pin `z_k` down exactly (K larger than the rank), the
/// conditional is a point mass and ties split evenly.
pub fn estimate_selection_probs<R: Rng + ?Sized>(
    belief: &Gaussian,
    arms: &ArmSet,
    n_samples: usize,
    rng: &mut R,
) -> Result<SelectionProbs> {
    let k_arms = arms.len();
    if belief.dim() != arms.dim() {
        return Err(Error::DimensionMismatch(format!(
            "belief has dimension {} but arms have {}",
            belief.dim(),
            arms.dim()
        )));
    }
    if k_arms == 1 {
        return Ok(SelectionProbs {
            probs: vec![1.0],
            n_samples: 0,
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one Monte Carlo sample".into()));
    }
    let x = arms.features();
    let d = arms.dim();
    let mu = x * &belief.mean;
    let a = x * belief.sqrt_factor();
    let gram = a.tr_mul(&a);

    let mut cond_rows = DMatrix::zeros(k_arms, d);
    let mut cond_sd = vec![0.0; k_arms];
    for k in 0..k_arms {
        let ak = a.row(k).transpose();
        let others = &gram - &ak * ak.transpose();
        let eig = SymmetricEigen::new(crate::numerics::symmetrize(&others));
        let top = eig.eigenvalues.amax().max(1e-300);
        let mut proj = DVector::zeros(d);
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > 1e-10 * top {
                let v = eig.eigenvectors.column(i);
                proj += v * v.dot(&ak);
            }
        }
        let resid = (&ak - &proj).norm_squared();
        cond_sd[k] = if resid > 1e-14 * ak.norm_squared().max(1e-300) {
            resid.sqrt()
        } else {
            0.0
        };
        cond_rows.set_row(k, &proj.transpose());
    }

    let mut sums = vec![0.0; k_arms];
    let mut eps = DVector::zeros(d);
    for _ in 0..n_samples {
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        let z = &mu + &a * &eps;
        let cond_mean = &mu + &cond_rows * &eps;
        let (first, second) = top_two(&z);
        for k in 0..k_arms {
            let rival = if k == first { z[second] } else { z[first] };
            sums[k] += if cond_sd[k] > 0.0 {
                normal_cdf((cond_mean[k] - rival) / cond_sd[k])
            } else {
                point_mass_share(&z, k, rival)
            };
        }
    }
    let total: f64 = sums.iter().sum();
    let probs = if total > 0.0 {
        sums.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / k_arms as f64; k_arms]
    };
    Ok(SelectionProbs { probs, n_samples })
}

fn top_two(z: &DVector<f64>) -> (usize, usize) {
    let (mut first, mut second) = (0, 1);
    if z[1] > z[0] {
        std::mem::swap(&mut first, &mut second);
    }
    for i in 2..z.len() {
        if z[i] > z[first] {
            second = first;
            first = i;
        } else if z[i] > z[second] {
            second = i;
        }
    }
    (first, second)
}

/// Share of a deterministic `z_k` winning against `rival`, ties split evenly.
fn point_mass_share(z: &DVector<f64>, k: usize, rival: f64) -> f64 {
    let tol = 1e-12 * (1.0 + rival.abs());
    let zk = z[k];
    if zk > rival + tol {
        1.0
    } else if zk >= rival - tol {
        let tied = z
            .iter()
            .enumerate()
            .filter(|&(j, &v)| j != k && (v - rival).abs() <= tol)
            .count();
        1.0 / (1 + tied) as f64
    } else {
        0.0
    }
}

/// Bayes-UCB: the arm with the highest `(1 - 1/(t+1))`-quantile of its
/// Gaussian linear score. Deterministic; ties go to the lowest index.
pub fn bayes_ucb_select(belief: &Gaussian, arms: &ArmSet, t: usize) -> usize {
    let level = 1.0 - 1.0 / (t.max(1) as f64 + 1.0);
    let q = normal_quantile(level).unwrap_or(0.0);
    let x = arms.features();
    let means = x * &belief.mean;
    let xs = x * &belief.covariance;
    argmax((0..arms.len()).map(|k| {
        let var = xs.row(k).dot(&x.row(k));
        means[k] + var.max(0.0).sqrt() * q
    }))
}
