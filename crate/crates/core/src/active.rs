//! Teaching a pool-based logistic-regression active learner that queries
//! by uncertainty sampling.
//!
//! The teacher sees the learner's labelled data and the true labels of the
//! pool, and answers each query with the label whose consequences (after
//! the learner refits and keeps querying) maximize the pool accuracy at the
//! end of its planning horizon.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::WineTable;
use crate::numerics::{log_sigmoid, sigmoid};
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

/// Largest horizon accepted for multi-step planning.
pub const MAX_PLAN_HORIZON: usize = 10;
/// Largest pool accepted for multi-step planning.
pub const MAX_PLAN_POOL: usize = 100;

pub type Example = (DVector<f64>, u8);

/// Learner data, queryable pool with hidden labels, and held-out test set.
/// Feature vectors carry a leading constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub labeled: Vec<Example>,
    pub unlabeled: Vec<DVector<f64>>,
    pub hidden: Vec<u8>,
    pub test: Vec<Example>,
}

impl Pool {
    /// Every pool point with its true label: the teacher's reward set.
    pub fn reward_set(&self) -> Vec<Example> {
        self.labeled
            .iter()
            .cloned()
            .chain(self.unlabeled.iter().cloned().zip(self.hidden.iter().copied()))
            .collect()
    }
}

/// Prepends the constant feature.
pub fn augment(x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len() + 1, std::iter::once(1.0).chain(x.iter().copied()))
}

/// Minimizes `Σ log(1 + exp(-s_i x_iᵀw)) + λ/2 ‖w‖²` (`s_i = ±1`) by damped
/// Newton iterations to a gradient norm of 1e-8.
pub fn fit_l2_logistic(data: &[Example], lambda: f64) -> Result<DVector<f64>> {
    let first = data
        .first()
        .ok_or_else(|| Error::InvalidArgument("logistic fit needs at least one example".into()))?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
    }
    let d = first.0.len();
    let objective = |w: &DVector<f64>| {
        data.iter()
            .map(|(x, y)| {
                let s = if *y == 1 { 1.0 } else { -1.0 };
                -log_sigmoid(s * x.dot(w))
            })
            .sum::<f64>()
            + 0.5 * lambda * w.norm_squared()
    };
    let mut w = DVector::zeros(d);
    let mut f = objective(&w);
    for _ in 0..200 {
        let mut grad = &w * lambda;
        let mut hess = DMatrix::identity(d, d) * lambda;
        for (x, y) in data {
            let p = sigmoid(x.dot(&w));
            grad += x * (p - f64::from(*y));
            hess += (x * x.transpose()) * (p * (1.0 - p));
        }
        if grad.norm() <= 1e-8 {
            return Ok(w);
        }
        let step = hess
            .cholesky()
            .map(|c| c.solve(&grad))
            .unwrap_or_else(|| &grad / lambda);
        let mut t = 1.0;
        loop {
            let cand = &w - &step * t;
            let fc = objective(&cand);
            if fc <= f - 1e-4 * t * grad.dot(&step) || t < 1e-12 {
                w = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(w)
}

/// Index of the candidate whose predicted label is most uncertain, i.e.
/// with the smallest `|xᵀw|`; ties go to the lowest index.
pub fn uncertainty_query(w: &DVector<f64>, candidates: &[DVector<f64>]) -> Result<usize> {
    uncertainty_query_among(w, candidates, &vec![true; candidates.len()])
}

fn uncertainty_query_among(w: &DVector<f64>, candidates: &[DVector<f64>], available: &[bool]) -> Result<usize> {
    let mut best = None;
    let mut best_margin = f64::INFINITY;
    for (i, x) in candidates.iter().enumerate() {
        if !available[i] {
            continue;
        }
        let m = x.dot(w).abs();
        if m < best_margin {
            best_margin = m;
            best = Some(i);
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no unlabeled candidates left".into()))
}

/// Fraction of examples classified correctly by `xᵀw > 0`.
pub fn accuracy(w: &DVector<f64>, data: &[Example]) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let correct = data.iter().filter(|(x, y)| u8::from(x.dot(w) > 0.0) == *y).count();
    correct as f64 / data.len() as f64
}

/// Label the teacher gives for query `query`, planning `horizon` labels
/// ahead (this one included) by exhaustive search over label sequences.
/// `available` marks the pool points still queryable, `query` excluded or not.
pub fn plan_teaching_labels(
    pool: &Pool,
    labeled: &[Example],
    available: &[bool],
    query: usize,
    horizon: usize,
    lambda: f64,
) -> Result<u8> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("planning horizon must be at least 1".into()));
    }
    if horizon > 1 && (horizon > MAX_PLAN_HORIZON || pool.unlabeled.len() > MAX_PLAN_POOL) {
        return Err(Error::BudgetExceeded(format!(
            "full-horizon planning is limited to horizon ≤ {MAX_PLAN_HORIZON} and pool ≤ {MAX_PLAN_POOL} \
             (got horizon {horizon}, pool {}); use one-step planning",
            pool.unlabeled.len()
        )));
    }
    let reward = pool.reward_set();
    let truth = pool.hidden[query];
    let mut avail = available.to_vec();
    avail[query] = false;
    let x = &pool.unlabeled[query];
    let value = |y: u8| -> Result<f64> {
        let mut data = labeled.to_vec();
        data.push((x.clone(), y));
        let mut avail = avail.clone();
        plan_value(pool, &reward, &mut data, &mut avail, horizon - 1, lambda)
    };
    let (v_truth, v_other) = rayon::join(|| value(truth), || value(1 - truth));
    Ok(if v_other? > v_truth? { 1 - truth } else { truth })
}

fn plan_value(
    pool: &Pool,
    reward: &[Example],
    data: &mut Vec<Example>,
    available: &mut [bool],
    remaining: usize,
    lambda: f64,
) -> Result<f64> {
    let w = fit_l2_logistic(data, lambda)?;
    if remaining == 0 {
        return Ok(accuracy(&w, reward));
    }
    let Ok(q) = uncertainty_query_among(&w, &pool.unlabeled, available) else {
        return Ok(accuracy(&w, reward));
    };
    available[q] = false;
    let mut best = f64::NEG_INFINITY;
    for y in [0u8, 1] {
        data.push((pool.unlabeled[q].clone(), y));
        let v = plan_value(pool, reward, data, available, remaining - 1, lambda);
        data.pop();
        best = best.max(v?);
    }
    available[q] = true;
    Ok(best)
}

/// Constants of the uncertainty-sampling trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub big_cluster_size: usize,
    pub small_cluster_size: usize,
    /// The big clusters sit at `(±big_offset, 0)`.
    pub big_offset: f64,
    pub big_sd: f64,
    /// The small clusters sit at `(∓small_offset.0, ±small_offset.1)`,
    /// labelled against the side of the vertical boundary they fall on.
    pub small_offset: (f64, f64),
    pub small_sd: f64,
    /// Test points drawn per pool point.
    pub test_multiplier: usize,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            big_cluster_size: 30,
            small_cluster_size: 5,
            big_offset: 0.5,
            big_sd: 0.3,
            small_offset: (1.0, 4.0),
            small_sd: 0.3,
            test_multiplier: 3,
        }
    }
}

fn draw_clusters<R: Rng + ?Sized>(config: &TrapConfig, scale: usize, rng: &mut R) -> Vec<Example> {
    let (sx, sy) = config.small_offset;
    let clusters = [
        ((-config.big_offset, 0.0), config.big_sd, config.big_cluster_size, 0u8),
        ((config.big_offset, 0.0), config.big_sd, config.big_cluster_size, 1u8),
        ((-sx, sy), config.small_sd, config.small_cluster_size, 1u8),
        ((sx, -sy), config.small_sd, config.small_cluster_size, 0u8),
    ];
    let mut out = Vec::new();
    for ((cx, cy), sd, n, label) in clusters {
        for _ in 0..n * scale {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            out.push((augment(&[cx + sd * a, cy + sd * b]), label));
        }
    }
    out
}

/// The uncertainty-sampling trap: two big overlapping-boundary clusters and
/// two small far clusters whose labels tilt the true boundary. The learner
/// starts from one point of each big cluster.
pub fn make_failure_synthetic(seed: u64) -> Pool {
    make_failure_synthetic_with(seed, &TrapConfig::default())
}

pub fn make_failure_synthetic_with(seed: u64, config: &TrapConfig) -> Pool {
    let mut rng = stream(seed, &[0xb0]);
    let pool = draw_clusters(config, 1, &mut rng);
    let test = draw_clusters(config, config.test_multiplier, &mut rng);
    let labeled = [0u8, 1]
        .iter()
        .map(|&label| {
            let cx = if label == 1 { config.big_offset } else { -config.big_offset };
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (augment(&[cx + config.big_sd * a, config.big_sd * b]), label)
        })
        .collect();
    let (unlabeled, hidden) = pool.into_iter().unzip();
    Pool {
        labeled,
        unlabeled,
        hidden,
        test,
    }
}

/// Splits a wine-like table into a standardized pool and test set. The
/// learner starts from one random pool point of each class.
pub fn wine_pool(table: &WineTable, cut: u8, pool_size: usize, seed: u64) -> Result<Pool> {
    let n = table.quality.len();
    if pool_size + 2 >= n {
        return Err(Error::InvalidArgument(format!("pool of {pool_size} leaves no test data from {n} rows")));
    }
    let labels = table.labels(cut);
    let mut rng = stream(seed, &[0x3e]);
    let order = index::sample(&mut rng, n, n).into_vec();
    let (train_idx, test_idx) = order.split_at(pool_size + 2);

    let d = table.features.ncols();
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for j in 0..d {
        let col: Vec<f64> = train_idx.iter().map(|&i| table.features[(i, j)]).collect();
        mean[j] = col.iter().sum::<f64>() / col.len() as f64;
        sd[j] = (col.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / col.len() as f64)
            .sqrt()
            .max(1e-12);
    }
    let row = |i: usize| {
        let z: Vec<f64> = (0..d).map(|j| (table.features[(i, j)] - mean[j]) / sd[j]).collect();
        augment(&z)
    };

    let mut seeds = Vec::new();
    for class in [0u8, 1] {
        let candidates: Vec<usize> = train_idx.iter().copied().filter(|&i| labels[i] == class).collect();
        if candidates.is_empty() {
            return Err(Error::InvalidArgument(format!("no class-{class} rows in the training split")));
        }
        seeds.push(candidates[rng.random_range(0..candidates.len())]);
    }
    let labeled = seeds.iter().map(|&i| (row(i), labels[i])).collect();
    let rest: Vec<usize> = train_idx.iter().copied().filter(|i| !seeds.contains(i)).take(pool_size).collect();
    Ok(Pool {
        labeled,
        unlabeled: rest.iter().map(|&i| row(i)).collect(),
        hidden: rest.iter().map(|&i| labels[i]).collect(),
        test: test_idx.iter().map(|&i| (row(i), labels[i])).collect(),
    })
}

/// How labels and queries are produced in an active-learning run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActiveStrategy {
    /// Uncertainty sampling, truthful labels.
    NoTeacher,
    /// Uncertainty sampling, teacher labels planned up to `horizon` steps
    /// ahead (shortened near the end of the run).
    Teacher { horizon: usize },
    /// Uniformly random queries, truthful labels.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveRun {
    /// Test accuracy after the initial fit and after each iteration.
    pub accuracy: Vec<f64>,
    pub queries: Vec<usize>,
    pub labels: Vec<u8>,
    /// Iterations where the given label differs from the true one.
    pub flipped: usize,
}

pub fn run_active(
    pool: &Pool,
    strategy: ActiveStrategy,
    iterations: usize,
    lambda: f64,
    seed: u64,
) -> Result<ActiveRun> {
    if iterations > pool.unlabeled.len() {
        return Err(Error::InvalidArgument(format!(
            "{iterations} iterations exceed the pool of {}",
            pool.unlabeled.len()
        )));
    }
    let mut rng = stream(seed, &[0xac]);
    let mut data = pool.labeled.clone();
    let mut available = vec![true; pool.unlabeled.len()];
    let mut w = fit_l2_logistic(&data, lambda)?;
    let mut run = ActiveRun {
        accuracy: vec![accuracy(&w, &pool.test)],
        queries: Vec::with_capacity(iterations),
        labels: Vec::with_capacity(iterations),
        flipped: 0,
    };
    for i in 0..iterations {
        let q = match strategy {
            ActiveStrategy::Random => {
                let open: Vec<usize> = (0..available.len()).filter(|&k| available[k]).collect();
                open[rng.random_range(0..open.len())]
            }
            _ => uncertainty_query_among(&w, &pool.unlabeled, &available)?,
        };
        let y = match strategy {
            ActiveStrategy::Teacher { horizon } => {
                let h = horizon.min(iterations - i).max(1);
                plan_teaching_labels(pool, &data, &available, q, h, lambda)?
            }
            _ => pool.hidden[q],
        };
        available[q] = false;
        run.flipped += usize::from(y != pool.hidden[q]);
        data.push((pool.unlabeled[q].clone(), y));
        w = fit_l2_logistic(&data, lambda)?;
        run.accuracy.push(accuracy(&w, &pool.test));
        run.queries.push(q);
        run.labels.push(y);
    }
    Ok(run)
}

/// Test accuracy of the model fitted to the whole pool with true labels.
pub fn full_pool_accuracy(pool: &Pool, lambda: f64) -> Result<f64> {
    let w = fit_l2_logistic(&pool.reward_set(), lambda)?;
    Ok(accuracy(&w, &pool.test))
}

/// Per-strategy accuracy curves over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSummary {
    pub strategy: ActiveStrategy,
    /// `runs[s]` is the run for seed index `s`.
    pub runs: Vec<ActiveRun>,
}

impl ActiveSummary {
    pub fn mean_accuracy(&self) -> Vec<f64> {
        let n = self.runs.len() as f64;
        let len = self.runs.iter().map(|r| r.accuracy.len()).min().unwrap_or(0);
        (0..len)
            .map(|t| self.runs.iter().map(|r| r.accuracy[t]).sum::<f64>() / n)
            .collect()
    }
}

/// Runs each strategy over `n_seeds` pools built by `make_pool(seed)`.
/// Returns the summaries and the mean full-pool accuracy.
pub fn compare_strategies<F>(
    make_pool: F,
    strategies: &[ActiveStrategy],
    iterations: usize,
    lambda: f64,
    n_seeds: usize,
    base_seed: u64,
) -> Result<(Vec<ActiveSummary>, f64)>
where
    F: Fn(u64) -> Result<Pool> + Sync,
{
    let pools: Vec<Pool> = (0..n_seeds)
        .into_par_iter()
        .map(|s| make_pool(derive_seed(base_seed, &[s as u64])))
        .collect::<Result<_>>()?;
    let full = pools
        .par_iter()
        .map(|p| full_pool_accuracy(p, lambda))
        .collect::<Result<Vec<f64>>>()?;
    let summaries = strategies
        .iter()
        .map(|&strategy| {
            let runs = pools
                .par_iter()
                .enumerate()
                .map(|(s, p)| run_active(p, strategy, iterations, lambda, derive_seed(base_seed, &[s as u64, 1])))
                .collect::<Result<Vec<_>>>()?;
            Ok(ActiveSummary { strategy, runs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((summaries, full.iter().sum::<f64>() / full.len() as f64))
}
