//! Scripted stand-ins for a human teacher, for simulations and tests.

use rand::Rng;

use seqteach::mdp::{build_trajectory_cache, teacher_policy, PlanningConfig, TeachingState, Weighting};
use seqteach::posterior::PriorSpec;
use seqteach::selection::SelectionStrategy;

use crate::dataset::Dataset;
use crate::error::ServiceError;
use crate::session::{SessionView, MIXTURE_BETA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agent {
    /// Answers yes with probability equal to the word's relevance to the target.
    Naive,
    /// Looks one step ahead at how a naive Bayes-UCB learner would react to
    /// each answer and picks softly by the resulting value (β = 20).
    Planner,
}

impl Agent {
    /// Answer to the pending question of `view`.
    pub fn respond<R: Rng>(self, ds: &Dataset, view: &SessionView, rng: &mut R) -> Result<u8, ServiceError> {
        let Some(q) = &view.question else {
            return Err(ServiceError::SessionFinished(view.id.clone()));
        };
        let target = view.target.index;
        match self {
            Self::Naive => Ok(u8::from(rng.random::<f64>() < ds.reward(target, q.index))),
            Self::Planner => {
                let history = view.history.iter().map(|e| (e.question.index, e.y)).collect();
                let state = TeachingState::new(history, q.index);
                let config = PlanningConfig {
                    horizon: 1,
                    gamma: 1.0,
                    beta: MIXTURE_BETA,
                    weighting: Weighting::Average,
                    strategy: SelectionStrategy::BayesUcb,
                };
                let prior = PriorSpec::new(1.0, ds.arms.dim())?;
                let cache = build_trajectory_cache(&state, &ds.arms, &config, &prior, rng.random())?;
                let p1 = teacher_policy(&cache, &ds.theta_star(target), MIXTURE_BETA);
                Ok(u8::from(rng.random::<f64>() < p1))
            }
        }
    }
}
