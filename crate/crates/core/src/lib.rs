//! Machine teaching of active sequential learners.
//!
//! A Bayesian Bernoulli bandit learner with logistic arm dependencies, a
//! planning teacher that solves the teaching MDP over the learner's
//! dynamics, and teacher-aware learners that use the teacher's policy as
//! their observation likelihood.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: sigmoid, Gaussian conditioning, normal CDF/quantile, PCA, RBF features
//! - [`arms`]: arm feature sets, ground-truth reward profiles, CSV loading
//! - [`posterior`]: Laplace-approximated inference under naive, planning and mixture likelihoods
//! - [`selection`]: Thompson sampling, Rao-Blackwellized selection probabilities, Bayes-UCB
//! - [`mdp`]: the teaching MDP, trajectory caches, Q values and the softmax teacher policy
//! - [`bandit`]: the learner's outer loop and the teacher adapter boundary
//! - [`teachers`]: simulated naive and planning teachers
//! - [`experiments`]: replicate grids, metrics, paired tests and result files
//! - [`active`]: teaching a pool-based uncertainty-sampling logistic regression learner
//! - [`datasets`]: deterministic stand-in datasets (word-like embeddings, wine-like table)

pub mod active;
pub mod arms;
pub mod bandit;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod mdp;
pub mod numerics;
pub mod posterior;
pub mod rng;
pub mod selection;
pub mod teachers;

pub use error::{Error, Result};
