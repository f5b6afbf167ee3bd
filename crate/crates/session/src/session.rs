//! One teaching session: a Bayes-UCB word learner asking a human about
//! relevance to a hidden target.

use rand::Rng;
use serde::{Deserialize, Serialize};

use seqteach::bandit::{Learner, LearnerConfig, TeacherModelSpec};
use seqteach::mdp::{PlanningConfig, Weighting};
use seqteach::rng::{derive_seed, stream};
use seqteach::selection::SelectionStrategy;

use crate::dataset::Dataset;
use crate::error::ServiceError;

pub const DEFAULT_BUDGET: usize = 15;
/// Optimality parameter of the planning component in the mixture model.
pub const MIXTURE_BETA: f64 = 20.0;

const TARGET_STREAM: u64 = 31;
const FIRST_QUESTION_STREAM: u64 = 32;
const LEARNER_STREAM: u64 = 33;

/// The learner's model of the human teacher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionModel {
    Naive,
    Mixture,
}

impl SessionModel {
    pub fn learner_config(self, budget: usize) -> LearnerConfig {
        let teacher_model = match self {
            Self::Naive => TeacherModelSpec::Naive,
            Self::Mixture => TeacherModelSpec::Mixture {
                planning: PlanningConfig {
                    horizon: 1,
                    gamma: 1.0,
                    beta: MIXTURE_BETA,
                    weighting: Weighting::Average,
                    strategy: SelectionStrategy::BayesUcb,
                },
                alpha_logit: None,
            },
        };
        LearnerConfig {
            teacher_model,
            tau2: 1.0,
            selection: SelectionStrategy::BayesUcb,
            steps: budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateRequest {
    pub dataset: String,
    pub model: SessionModel,
    #[serde(default)]
    pub target: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub budget: Option<usize>,
}

/// Fully resolved session parameters; what the log's first line records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    pub id: String,
    pub dataset: String,
    pub model: SessionModel,
    pub target: usize,
    pub seed: u64,
    pub budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub index: usize,
    pub word: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub step: usize,
    pub question: Word,
    pub y: u8,
    pub reward: f64,
}

/// Client-facing snapshot of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub dataset: String,
    pub model: SessionModel,
    pub target: Word,
    pub seed: u64,
    pub budget: usize,
    pub answered: usize,
    pub status: Status,
    pub question: Option<Word>,
    pub history: Vec<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedWord {
    pub index: usize,
    pub word: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub id: String,
    pub status: Status,
    pub answered: usize,
    pub budget: usize,
    pub target: Word,
    pub history: Vec<Exchange>,
    /// Ground-truth reward of each question asked.
    pub rewards: Vec<f64>,
    pub cumulative_reward: Vec<f64>,
    /// 1-based step at which the target word was first asked about.
    pub target_found_at: Option<usize>,
    /// Words by posterior-mean score, best first.
    pub ranking: Vec<RankedWord>,
}

#[derive(Debug, Clone)]
pub struct Session {
    params: SessionParams,
    dataset: Dataset,
    learner: Learner,
    pending: Option<usize>,
}

impl Session {
    /// Resolves defaults (seed, target, budget) and poses the first question,
    /// drawn uniformly from the seed.
    pub fn create(id: String, dataset: &Dataset, req: &CreateRequest) -> Result<Self, ServiceError> {
        let seed = req.seed.unwrap_or_else(rand::random);
        let target = match req.target {
            Some(t) if t >= dataset.len() => {
                return Err(ServiceError::InvalidRequest(format!(
                    "target {t} out of range for {} words",
                    dataset.len()
                )))
            }
            Some(t) => t,
            None => stream(seed, &[TARGET_STREAM]).random_range(0..dataset.len()),
        };
        let budget = req.budget.unwrap_or(DEFAULT_BUDGET);
        if budget == 0 {
            return Err(ServiceError::InvalidRequest("budget must be at least 1".into()));
        }
        Self::from_params(
            SessionParams {
                id,
                dataset: dataset.id.clone(),
                model: req.model,
                target,
                seed,
                budget,
            },
            dataset,
        )
    }

    pub fn from_params(params: SessionParams, dataset: &Dataset) -> Result<Self, ServiceError> {
        if params.dataset != dataset.id {
            return Err(ServiceError::InvalidRequest(format!(
                "session uses dataset {} but {} was supplied",
                params.dataset, dataset.id
            )));
        }
        let config = params.model.learner_config(params.budget);
        let learner = Learner::new(dataset.arms.clone(), config, derive_seed(params.seed, &[LEARNER_STREAM]))?;
        let first = stream(params.seed, &[FIRST_QUESTION_STREAM]).random_range(0..dataset.len());
        Ok(Self {
            params,
            dataset: dataset.clone(),
            learner,
            pending: Some(first),
        })
    }

    pub fn params(&self) -> &SessionParams {
        &self.params
    }

    pub fn id(&self) -> &str {
        &self.params.id
    }

    pub fn answered(&self) -> usize {
        self.learner.history().len()
    }

    pub fn status(&self) -> Status {
        if self.pending.is_some() {
            Status::Active
        } else {
            Status::Finished
        }
    }

    pub fn question(&self) -> Option<usize> {
        self.pending
    }

    fn word(&self, k: usize) -> Word {
        Word {
            index: k,
            word: self.dataset.words()[k].clone(),
        }
    }

    /// Records the answer to the pending question, refits, and poses the
    /// next question unless the budget is used up.
    pub fn answer(&mut self, y: u8) -> Result<Option<usize>, ServiceError> {
        let Some(arm) = self.pending else {
            return Err(ServiceError::SessionFinished(self.params.id.clone()));
        };
        if y > 1 {
            return Err(ServiceError::InvalidRequest(format!("answer must be 0 or 1, got {y}")));
        }
        self.learner.observe(arm, y)?;
        self.pending = (self.answered() < self.params.budget).then(|| self.learner.select());
        Ok(self.pending)
    }

    pub fn history(&self) -> Vec<Exchange> {
        self.learner
            .history()
            .iter()
            .enumerate()
            .map(|(i, &(k, y))| Exchange {
                step: i + 1,
                question: self.word(k),
                y,
                reward: self.dataset.reward(self.params.target, k),
            })
            .collect()
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.params.id.clone(),
            dataset: self.params.dataset.clone(),
            model: self.params.model,
            target: self.word(self.params.target),
            seed: self.params.seed,
            budget: self.params.budget,
            answered: self.answered(),
            status: self.status(),
            question: self.pending.map(|k| self.word(k)),
            history: self.history(),
        }
    }

    pub fn result(&self) -> SessionResult {
        let history = self.history();
        let rewards: Vec<f64> = history.iter().map(|e| e.reward).collect();
        let cumulative_reward = rewards
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        let scores = self.learner.scores();
        let mut ranking: Vec<RankedWord> = (0..self.dataset.len())
            .map(|k| RankedWord {
                index: k,
                word: self.dataset.words()[k].clone(),
                score: scores[k],
            })
            .collect();
        ranking.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
        SessionResult {
            id: self.params.id.clone(),
            status: self.status(),
            answered: self.answered(),
            budget: self.params.budget,
            target: self.word(self.params.target),
            target_found_at: history
                .iter()
                .find(|e| e.question.index == self.params.target)
                .map(|e| e.step),
            history,
            rewards,
            cumulative_reward,
            ranking,
        }
    }
}
