//! Simulated response providers with ground-truth knowledge.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arms::{ArmSet, GroundTruth};
use crate::bandit::Teacher;
use crate::mdp::{build_trajectory_cache, teacher_policy, PlanningConfig, TeachingState, TrajectoryCache, Weighting};
use crate::posterior::PriorSpec;
use crate::rng::StreamRng;
use crate::selection::SelectionStrategy;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherKind {
    Naive,
    Planning,
}

impl TeacherKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Naive => "N",
            Self::Planning => "P",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherSpec {
    pub kind: TeacherKind,
    /// Optimality parameter β̂ of the planning teacher.
    pub beta_hat: f64,
    /// Planning horizon T̂.
    pub horizon: usize,
    #[serde(default)]
    pub weighting: Weighting,
    /// Query strategy the teacher assumes the learner uses.
    pub learner_strategy: SelectionStrategy,
    pub ground_truth: GroundTruth,
}

impl TeacherSpec {
    pub fn naive(ground_truth: GroundTruth) -> Self {
        Self {
            kind: TeacherKind::Naive,
            beta_hat: 0.0,
            horizon: 1,
            weighting: Weighting::Average,
            learner_strategy: SelectionStrategy::default(),
            ground_truth,
        }
    }

    pub fn planning(ground_truth: GroundTruth, beta_hat: f64, horizon: usize) -> Self {
        Self {
            kind: TeacherKind::Planning,
            beta_hat,
            horizon,
            weighting: Weighting::Average,
            learner_strategy: SelectionStrategy::default(),
            ground_truth,
        }
    }

    pub fn planning_config(&self) -> PlanningConfig {
        PlanningConfig {
            horizon: self.horizon,
            gamma: 1.0,
            beta: self.beta_hat,
            weighting: self.weighting,
            strategy: self.learner_strategy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_hat >= 0.0) {
            return Err(Error::InvalidArgument(format!("β̂ must be non-negative, got {}", self.beta_hat)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("teacher horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// Bernoulli draw from the ground-truth reward probability of arm `k`.
pub fn naive_response<R: Rng + ?Sized>(ground_truth: &GroundTruth, k: usize, rng: &mut R) -> u8 {
    u8::from(rng.random::<f64>() < ground_truth.reward_probs[k])
}

/// Samples a response from the softmax teacher policy at `θ̂*` on a prebuilt cache.
pub fn planning_response_with_cache<R: Rng + ?Sized>(
    cache: &TrajectoryCache,
    ground_truth: &GroundTruth,
    beta: f64,
    rng: &mut R,
) -> u8 {
    let p1 = teacher_policy(cache, &ground_truth.theta(), beta);
    u8::from(rng.random::<f64>() < p1)
}

/// Plans over the naive learner's dynamics from the visible history and
/// samples a response. The simulation seed is drawn from `rng`.
pub fn planning_response<R: Rng + ?Sized>(
    state: &TeachingState,
    arms: &ArmSet,
    spec: &TeacherSpec,
    prior: &PriorSpec,
    rng: &mut R,
) -> Result<u8> {
    let seed = rng.random::<u64>();
    let cache = build_trajectory_cache(state, arms, &spec.planning_config(), &prior.theta_only(), seed)?;
    Ok(planning_response_with_cache(&cache, &spec.ground_truth, spec.beta_hat, rng))
}

/// A simulated teacher with its own random stream.
#[derive(Debug, Clone)]
pub struct SimulatedTeacher {
    spec: TeacherSpec,
    prior: PriorSpec,
    rng: StreamRng,
}

impl SimulatedTeacher {
    pub fn new(spec: TeacherSpec, prior: PriorSpec, rng: StreamRng) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, prior, rng })
    }

    pub fn spec(&self) -> &TeacherSpec {
        &self.spec
    }
}

impl Teacher for SimulatedTeacher {
    fn respond(&mut self, state: &TeachingState, arms: &ArmSet) -> Result<u8> {
        if state.pending >= arms.len() {
            return Err(Error::Teacher(format!("query {} is not an arm", state.pending)));
        }
        match self.spec.kind {
            TeacherKind::Naive => Ok(naive_response(&self.spec.ground_truth, state.pending, &mut self.rng)),
            TeacherKind::Planning => planning_response(state, arms, &self.spec, &self.prior, &mut self.rng),
        }
    }
}
