//! The learner's outer loop: select an arm, get the teacher's response,
//! refit the belief under the learner's model of the teacher.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::arms::ArmSet;
use crate::mdp::{build_trajectory_cache, PlanningConfig, TeachingState, TrajectoryCache};
use crate::posterior::{fit_laplace, JointBelief, LikelihoodTerm, MixingPrior, PriorSpec};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::selection::{bayes_ucb_select, thompson_sample, SelectionStrategy};
use crate::{Error, Result};

/// Stream tag of the learner's arm-selection randomness.
pub const SELECTION_STREAM: u64 = 1;
/// Stream tag of the per-step planning payload simulations.
pub const PAYLOAD_STREAM: u64 = 2;

/// Which likelihood the learner uses to explain the teacher's responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TeacherModelSpec {
    Naive,
    Planning {
        planning: PlanningConfig,
    },
    /// Mixture of naive and planning. `alpha_logit` fixes the mixing weight
    /// on the logit scale; absent, it is inferred under a uniform prior.
    Mixture {
        planning: PlanningConfig,
        #[serde(default)]
        alpha_logit: Option<f64>,
    },
}

impl TeacherModelSpec {
    pub fn planning(&self) -> Option<&PlanningConfig> {
        match self {
            Self::Naive => None,
            Self::Planning { planning } | Self::Mixture { planning, .. } => Some(planning),
        }
    }

    pub fn mixing(&self) -> MixingPrior {
        match self {
            Self::Mixture { alpha_logit: None, .. } => MixingPrior::Inferred,
            Self::Mixture {
                alpha_logit: Some(a), ..
            } => MixingPrior::Fixed(*a),
            _ => MixingPrior::Absent,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Naive => "N",
            Self::Planning { .. } => "P",
            Self::Mixture { .. } => "M",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub teacher_model: TeacherModelSpec,
    pub tau2: f64,
    pub selection: SelectionStrategy,
    pub steps: usize,
}

impl LearnerConfig {
    pub fn naive(steps: usize) -> Self {
        Self {
            teacher_model: TeacherModelSpec::Naive,
            tau2: 1.0,
            selection: SelectionStrategy::default(),
            steps,
        }
    }

    pub fn prior(&self, dim: usize) -> Result<PriorSpec> {
        Ok(PriorSpec::new(self.tau2, dim)?.with_mixing(self.teacher_model.mixing()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(planning) = self.teacher_model.planning() {
            planning.validate()?;
            if planning.strategy != self.selection {
                return Err(Error::InvalidArgument(
                    "the modelled naive learner must query with the learner's own strategy".into(),
                ));
            }
        }
        if let SelectionStrategy::Thompson { n_samples: 0 } = self.selection {
            return Err(Error::InvalidArgument("Thompson sample count must be positive".into()));
        }
        Ok(())
    }
}

/// Anything that answers the learner's queries: simulated teachers, human
/// sessions, scripted agents.
pub trait Teacher {
    fn respond(&mut self, state: &TeachingState, arms: &ArmSet) -> Result<u8>;
}

impl<F> Teacher for F
where
    F: FnMut(&TeachingState, &ArmSet) -> Result<u8>,
{
    fn respond(&mut self, state: &TeachingState, arms: &ArmSet) -> Result<u8> {
        self(state, arms)
    }
}

/// Planning payload of the learner's teacher model at `state`. With a
/// one-step horizon this is the virtual-arm pair `x̄_y = Xᵀp_{h,y}`.
pub fn make_planning_payload(
    state: &TeachingState,
    arms: &ArmSet,
    planning: &PlanningConfig,
    prior: &PriorSpec,
    seed: u64,
) -> Result<Arc<TrajectoryCache>> {
    build_trajectory_cache(state, arms, planning, prior, seed).map(Arc::new)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub arm: usize,
    pub response: u8,
    /// Posterior mode of θ after the update.
    pub map_theta: Vec<f64>,
    pub theta_sd: Vec<f64>,
    /// Posterior mean of α on the logit scale, when inferred.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_logit: Option<f64>,
    pub fit_iterations: usize,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Equality ignores the wall time.
impl PartialEq for StepRecord {
    fn eq(&self, other: &Self) -> bool {
        self.step == other.step
            && self.arm == other.arm
            && self.response == other.response
            && self.map_theta == other.map_theta
            && self.theta_sd == other.theta_sd
            && self.alpha_logit == other.alpha_logit
            && self.fit_iterations == other.fit_iterations
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub records: Vec<StepRecord>,
    pub final_belief: JointBelief,
    /// Why the episode stopped early, if it did.
    pub aborted: Option<String>,
}

impl EpisodeTrace {
    pub fn arms(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.arm).collect()
    }

    pub fn responses(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.response).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.aborted.is_none()
    }

    pub fn total_time(&self) -> Duration {
        self.records.iter().map(|r| r.wall_time).sum()
    }

    /// One JSON object per step.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A bandit learner driven one query at a time.
#[derive(Debug, Clone)]
pub struct Learner {
    arms: ArmSet,
    config: LearnerConfig,
    prior: PriorSpec,
    seed: u64,
    history: Vec<(usize, u8)>,
    terms: Vec<LikelihoodTerm>,
    belief: JointBelief,
    selection_rng: StreamRng,
}

impl Learner {
    pub fn new(arms: ArmSet, config: LearnerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let prior = config.prior(arms.dim())?;
        Ok(Self {
            belief: JointBelief::from_prior(&prior),
            selection_rng: stream(seed, &[SELECTION_STREAM]),
            arms,
            config,
            prior,
            seed,
            history: Vec::new(),
            terms: Vec::new(),
        })
    }

    pub fn arms(&self) -> &ArmSet {
        &self.arms
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn history(&self) -> &[(usize, u8)] {
        &self.history
    }

    pub fn belief(&self) -> &JointBelief {
        &self.belief
    }

    pub fn terms(&self) -> &[LikelihoodTerm] {
        &self.terms
    }

    /// 1-based index of the next query.
    pub fn step(&self) -> usize {
        self.history.len() + 1
    }

    /// Posterior-mean linear score per arm.
    pub fn scores(&self) -> DVector<f64> {
        self.arms.scores(&self.belief.theta_belief().mean)
    }

    /// Next query under the learner's selection strategy.
    pub fn select(&mut self) -> usize {
        let theta = self.belief.theta_belief();
        match self.config.selection {
            SelectionStrategy::Thompson { .. } => thompson_sample(&theta, &self.arms, &mut self.selection_rng),
            SelectionStrategy::BayesUcb => bayes_ucb_select(&theta, &self.arms, self.step()),
        }
    }

    /// Records the response `y` to the query `arm` and refits the belief.
    pub fn observe(&mut self, arm: usize, y: u8) -> Result<&JointBelief> {
        if arm >= self.arms.len() {
            return Err(Error::InvalidArgument(format!("arm {arm} out of range")));
        }
        if y > 1 {
            return Err(Error::InvalidArgument(format!("response must be 0 or 1, got {y}")));
        }
        let x = self.arms.arm(arm);
        let term = match self.config.teacher_model {
            TeacherModelSpec::Naive => LikelihoodTerm::Naive { x, y },
            TeacherModelSpec::Planning { planning } => LikelihoodTerm::Planning {
                cache: self.payload(arm, &planning)?,
                y,
                beta: planning.beta,
            },
            TeacherModelSpec::Mixture { planning, .. } => LikelihoodTerm::Mixture {
                cache: self.payload(arm, &planning)?,
                x,
                y,
                beta: planning.beta,
            },
        };
        self.terms.push(term);
        let warm = (!self.history.is_empty()).then(|| self.belief.map_point.clone());
        match fit_laplace(&self.prior, &self.terms, warm.as_ref()) {
            Ok(belief) => {
                self.belief = belief;
                self.history.push((arm, y));
                Ok(&self.belief)
            }
            Err(e) => {
                self.terms.pop();
                Err(e)
            }
        }
    }

    fn payload(&self, arm: usize, planning: &PlanningConfig) -> Result<Arc<TrajectoryCache>> {
        let state = TeachingState::new(self.history.clone(), arm);
        let seed = derive_seed(self.seed, &[PAYLOAD_STREAM, state.step() as u64]);
        make_planning_payload(&state, &self.arms, planning, &self.prior.theta_only(), seed)
    }

    fn record(&self, arm: usize, y: u8, wall_time: Duration) -> StepRecord {
        let theta = self.belief.theta_belief();
        StepRecord {
            step: self.history.len(),
            arm,
            response: y,
            map_theta: theta.mean.iter().copied().collect(),
            theta_sd: theta.marginal_sds().iter().copied().collect(),
            alpha_logit: self.belief.alpha_logit_belief().map(|(m, _)| m),
            fit_iterations: self.belief.iterations,
            wall_time,
        }
    }
}

/// Runs `config.steps` rounds. The first query is `initial_arm`; later ones
/// follow the learner's strategy. Teacher or inference failures stop the
/// episode and are reported in [`EpisodeTrace::aborted`].
pub fn run_episode(
    arms: &ArmSet,
    teacher: &mut dyn Teacher,
    config: &LearnerConfig,
    initial_arm: usize,
    seed: u64,
) -> Result<EpisodeTrace> {
    if initial_arm >= arms.len() {
        return Err(Error::InvalidArgument(format!(
            "initial arm {initial_arm} out of range for {} arms",
            arms.len()
        )));
    }
    let mut learner = Learner::new(arms.clone(), *config, seed)?;
    let mut records = Vec::with_capacity(config.steps);
    let mut aborted = None;
    for t in 1..=config.steps {
        let start = Instant::now();
        let arm = if t == 1 { initial_arm } else { learner.select() };
        let state = TeachingState::new(learner.history().to_vec(), arm);
        let outcome = teacher
            .respond(&state, arms)
            .and_then(|y| learner.observe(arm, y).map(|_| y));
        match outcome {
            Ok(y) => records.push(learner.record(arm, y, start.elapsed())),
            Err(e) => {
                aborted = Some(format!("step {t}: {e}"));
                break;
            }
        }
    }
    Ok(EpisodeTrace {
        records,
        final_belief: learner.belief,
        aborted,
    })
}
