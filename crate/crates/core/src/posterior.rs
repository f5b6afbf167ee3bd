//! Laplace-approximated posterior inference for the learner's weights θ
//! (and the logit of the mixing weight α under the mixture teacher model).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::mdp::TrajectoryCache;
use crate::numerics::{log_add_exp, log_sigmoid, sigmoid, symmetrize, Gaussian};
use crate::{Error, Result};

/// How the mixing weight of the mixture teacher model is treated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum MixingPrior {
    /// No mixing weight in the model.
    #[default]
    Absent,
    /// α ~ Beta(1, 1), inferred on the logit scale.
    Inferred,
    /// α held fixed at `sigmoid(logit)`; may be ±∞.
    Fixed(f64),
}

/// Gaussian prior θ ~ N(0, τ²I), plus the mixing-weight treatment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub tau2: f64,
    pub dim: usize,
    #[serde(default)]
    pub mixing: MixingPrior,
}

impl PriorSpec {
    pub fn new(tau2: f64, dim: usize) -> Result<Self> {
        if !(tau2 > 0.0 && tau2.is_finite()) {
            return Err(Error::InvalidArgument(format!("prior variance must be positive, got {tau2}")));
        }
        Ok(Self {
            tau2,
            dim,
            mixing: MixingPrior::Absent,
        })
    }

    pub fn with_mixing(mut self, mixing: MixingPrior) -> Self {
        self.mixing = mixing;
        self
    }

    /// The same prior over θ alone, as used by the simulated naive learner.
    pub fn theta_only(&self) -> Self {
        Self {
            mixing: MixingPrior::Absent,
            ..*self
        }
    }

    /// Length of the parameter vector (θ, plus logit α when inferred).
    pub fn param_dim(&self) -> usize {
        self.dim + usize::from(self.mixing == MixingPrior::Inferred)
    }
}

/// One observed response and the likelihood the learner explains it with.
#[derive(Debug, Clone)]
pub enum LikelihoodTerm {
    /// Bernoulli reward at feature vector `x`.
    Naive { x: DVector<f64>, y: u8 },
    /// Softmax planning teacher, with the precomputed trajectory cache.
    Planning {
        cache: Arc<TrajectoryCache>,
        y: u8,
        beta: f64,
    },
    /// Mixture of the two above.
    Mixture {
        x: DVector<f64>,
        cache: Arc<TrajectoryCache>,
        y: u8,
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TermKind {
    Naive,
    Planning,
    Mixture,
}

impl LikelihoodTerm {
    fn kind(&self) -> TermKind {
        match self {
            Self::Naive { .. } => TermKind::Naive,
            Self::Planning { .. } => TermKind::Planning,
            Self::Mixture { .. } => TermKind::Mixture,
        }
    }

    pub fn response(&self) -> u8 {
        match self {
            Self::Naive { y, .. } | Self::Planning { y, .. } | Self::Mixture { y, .. } => *y,
        }
    }
}

/// Log density of the prior. With the mixing weight inferred, adds the
/// Beta(1,1) density of α and the logit Jacobian `log α + log(1-α)`.
pub fn log_prior(prior: &PriorSpec, theta: &DVector<f64>, alpha_logit: Option<f64>) -> f64 {
    let d = theta.len() as f64;
    let mut lp = -0.5 * d * (2.0 * std::f64::consts::PI * prior.tau2).ln()
        - theta.norm_squared() / (2.0 * prior.tau2);
    if let Some(a) = alpha_logit {
        lp += log_sigmoid(a) + log_sigmoid(-a);
    }
    lp
}

/// Bernoulli log-likelihood `y log σ(xᵀθ) + (1-y) log(1-σ(xᵀθ))`.
pub fn naive_log_lik(theta: &DVector<f64>, x: &DVector<f64>, y: u8) -> f64 {
    let s = x.dot(theta);
    if y == 1 {
        log_sigmoid(s)
    } else {
        log_sigmoid(-s)
    }
}

fn naive_grad(theta: &DVector<f64>, x: &DVector<f64>, y: u8) -> DVector<f64> {
    x * (f64::from(y) - sigmoid(x.dot(theta)))
}

/// Planning-teacher log-likelihood `log softmax(β Q*(h, ·; θ))[y]`, with Q*
/// taken from the trajectory cache.
pub fn planning_log_lik(theta: &DVector<f64>, cache: &TrajectoryCache, y: u8, beta: f64) -> Result<f64> {
    planning_value_grad(theta, cache, y, beta, false).map(|(v, _)| v)
}

fn planning_value_grad(
    theta: &DVector<f64>,
    cache: &TrajectoryCache,
    y: u8,
    beta: f64,
    want_grad: bool,
) -> Result<(f64, Option<DVector<f64>>)> {
    if cache.feature_dim() != theta.len() {
        return Err(Error::DimensionMismatch(format!(
            "trajectory cache has feature dimension {} but θ has {}",
            cache.feature_dim(),
            theta.len()
        )));
    }
    let q = cache.q_values(theta);
    let (own, other) = if y == 1 { (1, 0) } else { (0, 1) };
    let gap = beta * (q.q[own] - q.q[other]);
    let value = if beta == 0.0 { 0.5f64.ln() } else { log_sigmoid(gap) };
    let grad = want_grad.then(|| {
        let v_own = &cache.weighted_features(own)[q.argmax[own]];
        let v_other = &cache.weighted_features(other)[q.argmax[other]];
        (v_own - v_other) * (beta * sigmoid(-gap))
    });
    Ok((value, grad))
}

/// Mixture log-likelihood `log[(1-α) p_B + α p_M]`, α = σ(alpha_logit).
pub fn mixture_log_lik(
    theta: &DVector<f64>,
    alpha_logit: f64,
    x: &DVector<f64>,
    cache: &TrajectoryCache,
    y: u8,
    beta: f64,
) -> Result<f64> {
    let naive = naive_log_lik(theta, x, y);
    let planning = planning_log_lik(theta, cache, y, beta)?;
    Ok(log_add_exp(log_sigmoid(-alpha_logit) + naive, log_sigmoid(alpha_logit) + planning))
}

/// Value of one term and its gradient in (θ, logit α).
fn term_value_grad(
    term: &LikelihoodTerm,
    theta: &DVector<f64>,
    alpha_logit: Option<f64>,
) -> Result<(f64, DVector<f64>, f64)> {
    match term {
        LikelihoodTerm::Naive { x, y } => Ok((naive_log_lik(theta, x, *y), naive_grad(theta, x, *y), 0.0)),
        LikelihoodTerm::Planning { cache, y, beta } => {
            let (v, g) = planning_value_grad(theta, cache, *y, *beta, true)?;
            Ok((v, g.expect("gradient requested"), 0.0))
        }
        LikelihoodTerm::Mixture { x, cache, y, beta } => {
            let a = alpha_logit.ok_or_else(|| {
                Error::InvalidArgument("mixture terms need a mixing weight in the prior".into())
            })?;
            let (lb, gb) = (naive_log_lik(theta, x, *y), naive_grad(theta, x, *y));
            let (lm, gm) = planning_value_grad(theta, cache, *y, *beta, true)?;
            let gm = gm.expect("gradient requested");
            let ub = log_sigmoid(-a) + lb;
            let um = log_sigmoid(a) + lm;
            let total = log_add_exp(ub, um);
            let wb = (ub - total).exp();
            let wm = (um - total).exp();
            let grad = gb * wb + gm * wm;
            let d_alpha = wm * sigmoid(-a) - wb * sigmoid(a);
            Ok((total, grad, d_alpha))
        }
    }
}

/// Unnormalized log posterior over the packed parameter vector.
pub struct LogPosterior<'a> {
    prior: &'a PriorSpec,
    terms: &'a [LikelihoodTerm],
}

impl<'a> LogPosterior<'a> {
    pub fn new(prior: &'a PriorSpec, terms: &'a [LikelihoodTerm]) -> Result<Self> {
        if let Some(first) = terms.first() {
            let kind = first.kind();
            if terms.iter().any(|t| t.kind() != kind) {
                return Err(Error::InvalidArgument("likelihood terms must all be of one kind".into()));
            }
            if kind == TermKind::Mixture && prior.mixing == MixingPrior::Absent {
                return Err(Error::InvalidArgument(
                    "mixture terms need an inferred or fixed mixing weight".into(),
                ));
            }
        }
        for t in terms {
            let dim = match t {
                LikelihoodTerm::Naive { x, .. } => x.len(),
                LikelihoodTerm::Planning { cache, .. } => cache.feature_dim(),
                LikelihoodTerm::Mixture { x, cache, .. } => {
                    if x.len() != cache.feature_dim() {
                        return Err(Error::DimensionMismatch("mixture term payload size".into()));
                    }
                    x.len()
                }
            };
            if dim != prior.dim {
                return Err(Error::DimensionMismatch(format!(
                    "term has dimension {dim}, prior has {}",
                    prior.dim
                )));
            }
        }
        Ok(Self { prior, terms })
    }

    pub fn dim(&self) -> usize {
        self.prior.param_dim()
    }

    fn split(&self, params: &DVector<f64>) -> (DVector<f64>, Option<f64>) {
        let theta = params.rows(0, self.prior.dim).into_owned();
        let alpha = match self.prior.mixing {
            MixingPrior::Inferred => Some(params[self.prior.dim]),
            MixingPrior::Fixed(a) => Some(a),
            MixingPrior::Absent => None,
        };
        (theta, alpha)
    }

    /// Log posterior and its gradient.
    pub fn value_grad(&self, params: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (theta, alpha) = self.split(params);
        let inferred = self.prior.mixing == MixingPrior::Inferred;
        let mut value = log_prior(self.prior, &theta, if inferred { alpha } else { None });
        let mut grad = DVector::zeros(params.len());
        grad.rows_mut(0, self.prior.dim).copy_from(&(&theta * (-1.0 / self.prior.tau2)));
        if inferred {
            grad[self.prior.dim] = 1.0 - 2.0 * sigmoid(params[self.prior.dim]);
        }
        for term in self.terms {
            let (v, g, ga) = term_value_grad(term, &theta, alpha)?;
            value += v;
            let mut head = grad.rows_mut(0, self.prior.dim);
            head += g;
            if inferred {
                grad[self.prior.dim] += ga;
            }
        }
        Ok((value, grad))
    }

    pub fn value(&self, params: &DVector<f64>) -> Result<f64> {
        self.value_grad(params).map(|(v, _)| v)
    }
}

/// Laplace approximation N(map, (-∇²log p)⁻¹) of the posterior.
#[derive(Debug, Clone)]
pub struct JointBelief {
    /// Gaussian over the packed parameters (θ, then logit α when inferred).
    pub joint: Gaussian,
    pub theta_dim: usize,
    pub map_point: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Diagonal jitter added to the negative Hessian, zero when none was needed.
    pub jitter: f64,
}

impl JointBelief {
    pub fn from_prior(prior: &PriorSpec) -> Self {
        let mut joint = Gaussian::isotropic(prior.param_dim(), prior.tau2);
        if prior.mixing == MixingPrior::Inferred {
            // Logistic density of logit α under Beta(1,1): mode 0, curvature 1/2.
            joint.covariance[(prior.dim, prior.dim)] = 2.0;
        }
        Self {
            map_point: joint.mean.clone(),
            joint,
            theta_dim: prior.dim,
            iterations: 0,
            converged: true,
            jitter: 0.0,
        }
    }

    pub fn theta_belief(&self) -> Gaussian {
        self.joint.leading(self.theta_dim)
    }

    /// (mean, sd) of logit α, when inferred.
    pub fn alpha_logit_belief(&self) -> Option<(f64, f64)> {
        (self.joint.dim() > self.theta_dim).then(|| {
            let i = self.theta_dim;
            (self.joint.mean[i], self.joint.covariance[(i, i)].max(0.0).sqrt())
        })
    }
}

/// Optimizer settings for [`fit_laplace`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iter: 500,
            hessian_step: 1e-4,
        }
    }
}

pub fn fit_laplace(
    prior: &PriorSpec,
    terms: &[LikelihoodTerm],
    warm_start: Option<&DVector<f64>>,
) -> Result<JointBelief> {
    fit_laplace_with(prior, terms, warm_start, FitOptions::default())
}

pub fn fit_laplace_with(
    prior: &PriorSpec,
    terms: &[LikelihoodTerm],
    warm_start: Option<&DVector<f64>>,
    options: FitOptions,
) -> Result<JointBelief> {
    let posterior = LogPosterior::new(prior, terms)?;
    if terms.is_empty() {
        return Ok(JointBelief::from_prior(prior));
    }
    let n = posterior.dim();
    let x0 = match warm_start {
        Some(w) if w.len() == n && w.iter().all(|v| v.is_finite()) => w.clone(),
        Some(w) if w.len() + 1 == n => w.clone().insert_row(w.len(), 0.0),
        _ => DVector::zeros(n),
    };
    let neg = |p: &DVector<f64>| posterior.value_grad(p).map(|(v, g)| (-v, -g));
    let opt = minimize_bfgs(neg, x0, options.grad_tol, options.max_iter)?;

    let h = options.hessian_step;
    let mut hess = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut up = opt.x.clone();
        up[j] += h;
        let mut down = opt.x.clone();
        down[j] -= h;
        let (_, gu) = posterior.value_grad(&up)?;
        let (_, gd) = posterior.value_grad(&down)?;
        hess.set_column(j, &((gu - gd) / (2.0 * h)));
    }
    let precision = symmetrize(&(-hess));
    let (chol, jitter) = jittered_cholesky(&precision).ok_or_else(|| {
        Error::DegenerateCovariance("negative Hessian could not be made positive definite".into())
    })?;
    let covariance = symmetrize(&chol.inverse());
    Ok(JointBelief {
        joint: Gaussian {
            mean: opt.x.clone(),
            covariance,
        },
        theta_dim: prior.dim,
        map_point: opt.x,
        iterations: opt.iterations,
        converged: opt.converged,
        jitter,
    })
}

/// Smallest `10^j · I`, `j = -8, -7, …`, making the matrix positive definite.
fn jittered_cholesky(m: &DMatrix<f64>) -> Option<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    if let Some(c) = nalgebra::Cholesky::new(m.clone()) {
        return Some((c, 0.0));
    }
    let n = m.nrows();
    (-8..=8).find_map(|j| {
        let jitter = 10f64.powi(j);
        nalgebra::Cholesky::new(m + DMatrix::identity(n, n) * jitter).map(|c| (c, jitter))
    })
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// BFGS with Armijo backtracking. Stops when the gradient norm drops to
/// `grad_tol` or after `max_iter` iterations.
pub fn minimize_bfgs<F>(f: F, x0: DVector<f64>, grad_tol: f64, max_iter: usize) -> Result<Minimum>
where
    F: Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective {
            iterations: 0,
            last_valid: x.iter().copied().collect(),
        });
    }
    let mut inv_h = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    for iter in 0..max_iter {
        if g.norm() <= grad_tol {
            return Ok(Minimum {
                x,
                value: fx,
                iterations: iter,
                converged: true,
            });
        }
        let mut dir = -(&inv_h * &g);
        let mut slope = dir.dot(&g);
        if slope >= 0.0 || !slope.is_finite() {
            inv_h = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = dir.dot(&g);
        }
        let mut step = if first { (1.0 / g.norm()).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            match f(&trial) {
                Ok((ft, gt)) if ft.is_finite() && gt.iter().all(|v| v.is_finite()) => {
                    if ft <= fx + 1e-4 * step * slope {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                }
                Ok(_) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // No decrease along the direction: we are at numerical precision.
            let converged = g.norm() <= grad_tol.sqrt();
            if !fx.is_finite() {
                return Err(Error::NonFiniteObjective {
                    iterations: iter,
                    last_valid: x.iter().copied().collect(),
                });
            }
            return Ok(Minimum {
                x,
                value: fx,
                iterations: iter,
                converged,
            });
        };
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if first {
                inv_h *= sy / yv.norm_squared();
            }
            let rho = 1.0 / sy;
            let hy = &inv_h * &yv;
            let yhy = yv.dot(&hy);
            inv_h += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            first = false;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    let converged = g.norm() <= grad_tol;
    Ok(Minimum {
        x,
        value: fx,
        iterations: max_iter,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn prior_reference_values() {
        let prior = PriorSpec::new(1.0, 2).unwrap();
        assert_abs_diff_eq!(
            log_prior(&prior, &v(&[0.0, 0.0]), None),
            -(2.0 * std::f64::consts::PI).ln(),
            epsilon = 1e-14
        );
        let with_alpha = log_prior(&prior, &v(&[0.0, 0.0]), Some(0.0)) - log_prior(&prior, &v(&[0.0, 0.0]), None);
        assert_abs_diff_eq!(with_alpha, 0.25f64.ln(), epsilon = 1e-14);
        assert!(log_prior(&prior, &v(&[0.1, 0.0]), None) < log_prior(&prior, &v(&[0.0, 0.0]), None));
        assert!(PriorSpec::new(0.0, 2).is_err());
    }

    #[test]
    fn naive_reference_values() {
        let x = v(&[1.0, 2.0]);
        assert_abs_diff_eq!(naive_log_lik(&v(&[0.0, 0.0]), &x, 1), 0.5f64.ln());
        assert_abs_diff_eq!(naive_log_lik(&v(&[0.0, 0.0]), &x, 0), 0.5f64.ln());
        assert_abs_diff_eq!(naive_log_lik(&v(&[4.0, 0.0]), &x, 1), -0.01815, epsilon = 1e-5);
        let theta = v(&[0.3, -1.1]);
        let total = naive_log_lik(&theta, &x, 0).exp() + naive_log_lik(&theta, &x, 1).exp();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn planning_one_step_reference_values() {
        let cache = TrajectoryCache::one_step(v(&[0.2, 0.8]), v(&[0.7, 0.3]), v(&[0.2, 0.8]), v(&[0.7, 0.3]));
        let theta = v(&[1.0, -0.5]);
        for y in 0..2 {
            assert_abs_diff_eq!(planning_log_lik(&theta, &cache, y, 0.0).unwrap(), 0.5f64.ln());
        }
        let same = TrajectoryCache::one_step(v(&[0.5, 0.5]), v(&[0.5, 0.5]), v(&[0.5, 0.5]), v(&[0.5, 0.5]));
        assert_abs_diff_eq!(planning_log_lik(&theta, &same, 1, 7.0).unwrap(), 0.5f64.ln());
        let p0 = planning_log_lik(&theta, &cache, 0, 3.0).unwrap().exp();
        let p1 = planning_log_lik(&theta, &cache, 1, 3.0).unwrap().exp();
        assert_abs_diff_eq!(p0 + p1, 1.0, epsilon = 1e-12);
        assert!(planning_log_lik(&v(&[1.0, 0.0, 0.0]), &cache, 1, 1.0).is_err());
    }

    #[test]
    fn step_function_limit_for_independent_arms() {
        // x₁ = [1,0], x₂ = [0,1]; y=1 steers the learner to arm 1, y=0 to arm 2.
        let cache = TrajectoryCache::one_step(v(&[0.0, 1.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 0.0]));
        let theta = v(&[2.0, 1.0]);
        let p = planning_log_lik(&theta, &cache, 1, 1e3).unwrap().exp();
        assert!(p > 1.0 - 1e-12);
        let flipped = planning_log_lik(&v(&[1.0, 2.0]), &cache, 1, 1e3).unwrap().exp();
        assert!(flipped < 1e-12);
    }

    #[test]
    fn mixture_boundaries() {
        let cache = TrajectoryCache::one_step(v(&[0.2, 0.8]), v(&[0.7, 0.3]), v(&[0.2, 0.8]), v(&[0.7, 0.3]));
        let theta = v(&[0.4, -0.3]);
        let x = v(&[1.0, 0.5]);
        let naive = naive_log_lik(&theta, &x, 1);
        let planning = planning_log_lik(&theta, &cache, 1, 2.0).unwrap();
        assert_eq!(mixture_log_lik(&theta, f64::NEG_INFINITY, &x, &cache, 1, 2.0).unwrap(), naive);
        assert_eq!(mixture_log_lik(&theta, f64::INFINITY, &x, &cache, 1, 2.0).unwrap(), planning);
        // α = 0.5, p_B = 0.2, p_M = 0.6 → log 0.4
        let mix = log_add_exp(0.5f64.ln() + 0.2f64.ln(), 0.5f64.ln() + 0.6f64.ln());
        assert_abs_diff_eq!(mix, 0.4f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn empty_fit_is_the_prior() {
        let prior = PriorSpec::new(0.7, 3).unwrap();
        let b = fit_laplace(&prior, &[], None).unwrap();
        assert_eq!(b.joint.mean, DVector::zeros(3));
        assert_eq!(b.joint.covariance, DMatrix::identity(3, 3) * 0.7);
    }

    #[test]
    fn rejects_mixed_term_kinds() {
        let prior = PriorSpec::new(1.0, 2).unwrap();
        let cache = Arc::new(TrajectoryCache::one_step(
            v(&[0.5, 0.5]),
            v(&[0.5, 0.5]),
            v(&[0.5, 0.5]),
            v(&[0.5, 0.5]),
        ));
        let terms = vec![
            LikelihoodTerm::Naive { x: v(&[1.0, 0.0]), y: 1 },
            LikelihoodTerm::Planning { cache, y: 1, beta: 1.0 },
        ];
        assert!(fit_laplace(&prior, &terms, None).is_err());
    }

    #[test]
    fn duplicated_data_shrinks_covariance() {
        let prior = PriorSpec::new(1.0, 2).unwrap();
        let single: Vec<LikelihoodTerm> = [(v(&[1.0, 0.5]), 1), (v(&[1.0, -0.7]), 0), (v(&[1.0, 0.1]), 1)]
            .into_iter()
            .map(|(x, y)| LikelihoodTerm::Naive { x, y })
            .collect();
        let double: Vec<LikelihoodTerm> = single.iter().chain(single.iter()).cloned().collect();
        let a = fit_laplace(&prior, &single, None).unwrap();
        let b = fit_laplace(&prior, &double, None).unwrap();
        let diff = &a.joint.covariance - &b.joint.covariance;
        let min_eig = diff.symmetric_eigenvalues().min();
        assert!(min_eig > -1e-8, "Σ_single - Σ_double has eigenvalue {min_eig}");
        let again = fit_laplace(&prior, &single, None).unwrap();
        assert_eq!(a.map_point, again.map_point);
        assert_eq!(a.joint.covariance, again.joint.covariance);
    }

    #[test]
    fn bfgs_minimizes_quadratic() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let b = v(&[1.0, -1.0]);
        let f = |x: &DVector<f64>| Ok((0.5 * x.dot(&(&a * x)) - b.dot(x), &a * x - &b));
        let m = minimize_bfgs(f, DVector::zeros(2), 1e-10, 100).unwrap();
        let exact = a.clone().try_inverse().unwrap() * &b;
        assert!((m.x - exact).amax() < 1e-8);
        assert!(m.converged);
    }

    #[test]
    fn non_finite_start_is_reported() {
        let f = |_: &DVector<f64>| Ok((f64::NAN, DVector::zeros(1)));
        assert!(matches!(
            minimize_bfgs(f, DVector::zeros(1), 1e-6, 10),
            Err(Error::NonFiniteObjective { .. })
        ));
    }
}
