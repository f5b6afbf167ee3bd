//! The teaching MDP.
//!
//! States are interaction histories ending at a pending query, actions are
//! the teacher's binary responses, and transitions follow the naive
//! learner's update-then-select loop. Multi-step lookahead replaces the
//! K-way branching over next arms by a single virtual arm `x̄ = Xᵀp`, which
//! leaves `2^(T-1)` action suffixes per initial action. For each suffix the
//! discounted sum of next-arm distributions is cached, so that
//! `Q*(h, y; θ)` is a maximum of linear functions of θ.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::arms::ArmSet;
use crate::numerics::{sigmoid, Gaussian};
use crate::posterior::{fit_laplace, LikelihoodTerm, PriorSpec};
use crate::rng::{derive_seed, stream};
use crate::selection::{bayes_ucb_select, estimate_selection_probs, SelectionProbs, SelectionStrategy};
use crate::{Error, Result};

/// Largest horizon the exhaustive suffix enumeration accepts.
pub const MAX_HORIZON: usize = 12;

/// Interaction history `x_1, y_1, …, x_t`: answered queries plus the pending one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeachingState {
    pub history: Vec<(usize, u8)>,
    pub pending: usize,
}

impl TeachingState {
    pub fn new(history: Vec<(usize, u8)>, pending: usize) -> Self {
        Self { history, pending }
    }

    /// 1-based index of the pending query.
    pub fn step(&self) -> usize {
        self.history.len() + 1
    }

    /// The naive learner's data: (feature vector, response) per answered query.
    pub fn naive_data(&self, arms: &ArmSet) -> Vec<(DVector<f64>, u8)> {
        self.history.iter().map(|&(k, y)| (arms.arm(k), y)).collect()
    }
}

/// How per-step next-arm distributions are weighted along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `γ^(t-1)`.
    #[default]
    Discounted,
    /// `1/T` at every step, i.e. the average return over the horizon.
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanningConfig {
    pub horizon: usize,
    pub gamma: f64,
    pub beta: f64,
    #[serde(default)]
    pub weighting: Weighting,
    /// Query strategy of the naive learner being modelled.
    #[serde(default)]
    pub strategy: SelectionStrategy,
}

impl PlanningConfig {
    pub fn one_step(beta: f64) -> Self {
        Self {
            horizon: 1,
            gamma: 1.0,
            beta,
            weighting: Weighting::Average,
            strategy: SelectionStrategy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("planning horizon must be at least 1".into()));
        }
        if self.horizon > MAX_HORIZON {
            return Err(Error::HorizonTooLarge(self.horizon));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("discount must be in (0, 1], got {}", self.gamma)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidArgument(format!("β must be non-negative, got {}", self.beta)));
        }
        Ok(())
    }

    fn step_weight(&self, t: usize) -> f64 {
        match self.weighting {
            Weighting::Discounted => self.gamma.powi(t as i32 - 1),
            Weighting::Average => 1.0 / self.horizon as f64,
        }
    }
}

/// Per initial action, the weighted next-arm distribution sums of every
/// action suffix and their feature-space images `Xᵀw`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCache {
    horizon: usize,
    weights: [Vec<DVector<f64>>; 2],
    features: [Vec<DVector<f64>>; 2],
}

/// `Q*` for both actions, the maximizing trajectory per action, and the gap
/// to the runner-up trajectory (∞ with a single trajectory).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValues {
    pub q: [f64; 2],
    pub argmax: [usize; 2],
    pub margin: [f64; 2],
}

impl TrajectoryCache {
    /// One-step payload: next-arm distributions `p_{h,0}`, `p_{h,1}` and the
    /// virtual arms `x̄_y = Xᵀp_{h,y}`.
    pub fn one_step(p0: DVector<f64>, p1: DVector<f64>, xbar0: DVector<f64>, xbar1: DVector<f64>) -> Self {
        Self {
            horizon: 1,
            weights: [vec![p0], vec![p1]],
            features: [vec![xbar0], vec![xbar1]],
        }
    }

    pub fn from_parts(horizon: usize, weights: [Vec<DVector<f64>>; 2], features: [Vec<DVector<f64>>; 2]) -> Result<Self> {
        let expected = 1usize << (horizon.max(1) - 1);
        for y in 0..2 {
            if weights[y].len() != expected || features[y].len() != expected {
                return Err(Error::DimensionMismatch(format!(
                    "horizon {horizon} needs {expected} trajectories per action"
                )));
            }
        }
        Ok(Self {
            horizon,
            weights,
            features,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0][0].len()
    }

    /// Trajectory weight vectors over arms for initial action `y`.
    pub fn weights(&self, y: usize) -> &[DVector<f64>] {
        &self.weights[y]
    }

    /// `Xᵀw` per trajectory for initial action `y`.
    pub fn weighted_features(&self, y: usize) -> &[DVector<f64>] {
        &self.features[y]
    }

    pub fn q_values(&self, theta: &DVector<f64>) -> QValues {
        let mut out = QValues {
            q: [0.0; 2],
            argmax: [0; 2],
            margin: [f64::INFINITY; 2],
        };
        for y in 0..2 {
            let mut best = f64::NEG_INFINITY;
            let mut second = f64::NEG_INFINITY;
            for (j, v) in self.features[y].iter().enumerate() {
                let q = theta.dot(v);
                if q > best {
                    second = best;
                    best = q;
                    out.argmax[y] = j;
                } else if q > second {
                    second = q;
                }
            }
            out.q[y] = best;
            out.margin[y] = best - second;
        }
        out
    }
}

/// `(Q*(h, 0; θ), Q*(h, 1; θ))` with the maximizing trajectory indices.
pub fn q_values(cache: &TrajectoryCache, theta: &DVector<f64>) -> QValues {
    cache.q_values(theta)
}

/// Probability the softmax teacher answers `y = 1`.
pub fn teacher_policy(cache: &TrajectoryCache, theta: &DVector<f64>, beta: f64) -> f64 {
    if beta == 0.0 {
        return 0.5;
    }
    let q = cache.q_values(theta);
    sigmoid(beta * (q.q[1] - q.q[0]))
}

/// The teacher's per-step reward `xᵀθ*` (no sigmoid).
pub fn teacher_reward(theta_star: &DVector<f64>, x: &DVector<f64>) -> f64 {
    x.dot(theta_star)
}

/// Laplace posterior of the naive learner after appending `(x, y)` to `data`.
pub fn simulate_naive_update(
    data: &[(DVector<f64>, u8)],
    x: &DVector<f64>,
    y: u8,
    prior: &PriorSpec,
) -> Result<Gaussian> {
    let terms: Vec<LikelihoodTerm> = data
        .iter()
        .map(|(x, y)| LikelihoodTerm::Naive { x: x.clone(), y: *y })
        .chain(std::iter::once(LikelihoodTerm::Naive { x: x.clone(), y }))
        .collect();
    Ok(fit_laplace(&prior.theta_only(), &terms, None)?.joint)
}

/// Distribution of the naive learner's next query after it sees `(x, y)`.
///
/// `next_step` is the 1-based index of that next query (Bayes-UCB uses it).
#[allow(clippy::too_many_arguments)]
pub fn next_arm_distribution(
    data: &[(DVector<f64>, u8)],
    x: &DVector<f64>,
    y: u8,
    arms: &ArmSet,
    prior: &PriorSpec,
    strategy: SelectionStrategy,
    next_step: usize,
    seed: u64,
) -> Result<DVector<f64>> {
    let belief = simulate_naive_update(data, x, y, prior)?;
    let probs = match strategy {
        SelectionStrategy::Thompson { n_samples } => {
            estimate_selection_probs(&belief, arms, n_samples, &mut stream(seed, &[]))?
        }
        SelectionStrategy::BayesUcb => SelectionProbs::one_hot(bayes_ucb_select(&belief, arms, next_step), arms.len()),
    };
    Ok(probs.to_vector())
}

/// Seed of the simulation node reached by the action path `y_1, …, y_t`.
pub fn node_seed(base: u64, path: &[u8]) -> u64 {
    // A leading marker bit keeps paths of different lengths distinct.
    let code = path.iter().fold(1u64, |acc, &y| (acc << 1) | u64::from(y));
    derive_seed(base, &[path.len() as u64, code])
}

/// Forward-simulates the naive learner from `state` over every action
/// sequence up to the horizon, using virtual arms after the first step.
///
/// Trajectories for each initial action are indexed by their suffix
/// `y_2 … y_T` read as a binary number, most significant first.
pub fn build_trajectory_cache(
    state: &TeachingState,
    arms: &ArmSet,
    config: &PlanningConfig,
    prior: &PriorSpec,
    seed: u64,
) -> Result<TrajectoryCache> {
    config.validate()?;
    let base = state.naive_data(arms);
    let pending = arms.arm(state.pending);
    let mut weights: [Vec<DVector<f64>>; 2] = [Vec::new(), Vec::new()];
    for y1 in 0..2u8 {
        let path = vec![y1];
        let p1 = next_arm_distribution(
            &base,
            &pending,
            y1,
            arms,
            prior,
            config.strategy,
            state.step() + 1,
            node_seed(seed, &path),
        )?;
        let mut data = base.clone();
        data.push((pending.clone(), y1));
        let acc = &p1 * config.step_weight(1);
        expand(
            arms,
            config,
            prior,
            seed,
            state.step(),
            &mut data,
            p1,
            acc,
            path,
            &mut weights[usize::from(y1)],
        )?;
    }
    let features = [
        weights[0].iter().map(|w| arms.weighted_features(w)).collect(),
        weights[1].iter().map(|w| arms.weighted_features(w)).collect(),
    ];
    Ok(TrajectoryCache {
        horizon: config.horizon,
        weights,
        features,
    })
}

#[allow(clippy::too_many_arguments)]
fn expand(
    arms: &ArmSet,
    config: &PlanningConfig,
    prior: &PriorSpec,
    seed: u64,
    first_step: usize,
    data: &mut Vec<(DVector<f64>, u8)>,
    p: DVector<f64>,
    acc: DVector<f64>,
    path: Vec<u8>,
    out: &mut Vec<DVector<f64>>,
) -> Result<()> {
    let depth = path.len();
    if depth == config.horizon {
        out.push(acc);
        return Ok(());
    }
    let virtual_arm = arms.weighted_features(&p);
    for y in 0..2u8 {
        let mut next_path = path.clone();
        next_path.push(y);
        let p_next = next_arm_distribution(
            data,
            &virtual_arm,
            y,
            arms,
            prior,
            config.strategy,
            first_step + depth + 1,
            node_seed(seed, &next_path),
        )?;
        let acc_next = &acc + &p_next * config.step_weight(depth + 1);
        data.push((virtual_arm.clone(), y));
        let res = expand(arms, config, prior, seed, first_step, data, p_next, acc_next, next_path, out);
        data.pop();
        res?;
    }
    Ok(())
}
