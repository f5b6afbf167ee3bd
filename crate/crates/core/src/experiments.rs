//! Replicated simulation studies: teacher/learner pairs, metrics, paired
//! tests and result files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::arms::{load_arms_csv, make_ground_truth, prepare_arms, sample_replicate, ArmSet, GroundTruth, LoadOptions};
use crate::bandit::{run_episode, EpisodeTrace, LearnerConfig, TeacherModelSpec};
use crate::datasets::{word_embeddings, WordSpec};
use crate::mdp::{PlanningConfig, Weighting};
use crate::posterior::PriorSpec;
use crate::rng::{derive_seed, label_hash, stream};
use crate::selection::SelectionStrategy;
use crate::teachers::{SimulatedTeacher, TeacherKind, TeacherSpec};
use crate::{Error, Result};

const REPLICATE_STREAM: u64 = 11;
const LEARNER_STREAM: u64 = 12;
const TEACHER_STREAM: u64 = 13;

/// The learner's model of the teacher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Naive,
    Planning,
    Mixture,
}

impl LearnerKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Naive => "N",
            Self::Planning => "P",
            Self::Mixture => "M",
        }
    }
}

/// A simulated teacher paired with a learner, written `"P-M"` and the like.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Pairing {
    pub teacher: TeacherKind,
    pub learner: LearnerKind,
}

impl Pairing {
    pub const fn new(teacher: TeacherKind, learner: LearnerKind) -> Self {
        Self { teacher, learner }
    }

    fn uses_planning(&self) -> bool {
        self.teacher == TeacherKind::Planning || self.learner != LearnerKind::Naive
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.teacher.label(), self.learner.label())
    }
}

impl FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (t, l) = s
            .split_once('-')
            .ok_or_else(|| Error::InvalidArgument(format!("pairing {s:?} is not of the form T-L")))?;
        let teacher = match t.trim() {
            "N" => TeacherKind::Naive,
            "P" => TeacherKind::Planning,
            other => return Err(Error::InvalidArgument(format!("unknown teacher {other:?}"))),
        };
        let learner = match l.trim() {
            "N" => LearnerKind::Naive,
            "P" => LearnerKind::Planning,
            "M" => LearnerKind::Mixture,
            other => return Err(Error::InvalidArgument(format!("unknown learner {other:?}"))),
        };
        Ok(Self { teacher, learner })
    }
}

impl TryFrom<String> for Pairing {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Pairing> for String {
    fn from(p: Pairing) -> String {
        p.to_string()
    }
}

/// Where the arm features come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// `name, f1, f2, …` rows.
    Csv {
        path: PathBuf,
        #[serde(default)]
        load: LoadOptions,
    },
    /// The built-in word-like embedding generator.
    SyntheticWords {
        #[serde(default)]
        spec: WordSpec,
        #[serde(default)]
        load: LoadOptions,
    },
}

impl DatasetSource {
    /// Word-like embeddings reduced to 10 dimensions.
    pub fn words(n_words: usize, seed: u64) -> Self {
        Self::SyntheticWords {
            spec: WordSpec {
                n_words,
                seed,
                ..WordSpec::default()
            },
            load: LoadOptions {
                pca_dim: Some(10),
                ..LoadOptions::default()
            },
        }
    }

    pub fn load(&self) -> Result<ArmSet> {
        match self {
            Self::Csv { path, load } => load_arms_csv(path, load),
            Self::SyntheticWords { spec, load } => {
                let (names, raw) = word_embeddings(spec)?;
                prepare_arms(names, raw, load)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub n_arms: usize,
    pub n_replicates: usize,
    pub steps: usize,
    pub pairs: Vec<Pairing>,
    /// β̂ of the planning teacher; the learner's teacher model uses the same β.
    pub betas: Vec<f64>,
    pub horizons: Vec<usize>,
    pub c: f64,
    pub d: f64,
    #[serde(default = "default_tau2")]
    pub tau2: f64,
    /// Samples per Rao-Blackwellized selection-probability estimate.
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    /// Share arm subsets, targets and initial arms across cells.
    #[serde(default = "default_true")]
    pub paired: bool,
    pub seed: u64,
}

fn default_tau2() -> f64 {
    1.0
}

fn default_samples() -> usize {
    1000
}

fn default_true() -> bool {
    true
}

/// Named size presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 20 replicates, 50 arms, 20 steps.
    Desk,
    /// 100 replicates, 100 arms, 30 steps.
    Full,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "full" => Ok(Self::Full),
            other => Err(Error::InvalidArgument(format!("unknown profile {other:?}"))),
        }
    }
}

pub const TABLE_PAIRS: [Pairing; 6] = [
    Pairing::new(TeacherKind::Naive, LearnerKind::Naive),
    Pairing::new(TeacherKind::Naive, LearnerKind::Planning),
    Pairing::new(TeacherKind::Naive, LearnerKind::Mixture),
    Pairing::new(TeacherKind::Planning, LearnerKind::Naive),
    Pairing::new(TeacherKind::Planning, LearnerKind::Planning),
    Pairing::new(TeacherKind::Planning, LearnerKind::Mixture),
];

impl ExperimentConfig {
    pub fn profile(profile: Profile, dataset: DatasetSource) -> Self {
        let (n_arms, n_replicates, steps) = match profile {
            Profile::Desk => (50, 20, 20),
            Profile::Full => (100, 100, 30),
        };
        Self {
            dataset,
            n_arms,
            n_replicates,
            steps,
            pairs: TABLE_PAIRS.to_vec(),
            betas: vec![20.0],
            horizons: vec![1],
            c: -4.0,
            d: 8.0,
            tau2: 1.0,
            n_samples: 1000,
            paired: true,
            seed: 2019,
        }
    }

    /// Overrides the size fields with a preset, keeping everything else.
    pub fn with_profile(mut self, profile: Profile) -> Self {
        let p = Self::profile(profile, self.dataset.clone());
        self.n_arms = p.n_arms;
        self.n_replicates = p.n_replicates;
        self.steps = p.steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_arms < 2 || self.n_replicates == 0 || self.steps == 0 || self.n_samples == 0 {
            return Err(Error::InvalidArgument(
                "arm, replicate, step and sample counts must be positive (at least two arms)".into(),
            ));
        }
        if self.pairs.is_empty() {
            return Err(Error::InvalidArgument("no teacher/learner pairs".into()));
        }
        if self.pairs.iter().any(Pairing::uses_planning) && (self.betas.is_empty() || self.horizons.is_empty()) {
            return Err(Error::InvalidArgument("planning cells need β and horizon grids".into()));
        }
        if self.betas.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::InvalidArgument("β values must be non-negative".into()));
        }
        if self.horizons.iter().any(|&t| t == 0 || t > crate::mdp::MAX_HORIZON) {
            return Err(Error::InvalidArgument("horizons must lie in 1..=12".into()));
        }
        Ok(())
    }

    /// The grid cells, deduplicated: cells that plan nothing ignore β and T.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = Vec::new();
        for &pairing in &self.pairs {
            if !pairing.uses_planning() {
                out.push(Cell {
                    pairing,
                    beta: None,
                    horizon: None,
                });
                continue;
            }
            for &beta in &self.betas {
                for &horizon in &self.horizons {
                    out.push(Cell {
                        pairing,
                        beta: Some(beta),
                        horizon: Some(horizon),
                    });
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|c| seen.insert(c.label()));
        out
    }

    fn selection(&self) -> SelectionStrategy {
        SelectionStrategy::Thompson {
            n_samples: self.n_samples,
        }
    }
}

/// One (teacher, learner, β, T) combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub pairing: Pairing,
    pub beta: Option<f64>,
    pub horizon: Option<usize>,
}

impl Cell {
    pub fn label(&self) -> String {
        match (self.beta, self.horizon) {
            (Some(b), Some(t)) => format!("{}_b{b}_T{t}", self.pairing),
            _ => self.pairing.to_string(),
        }
    }

    fn planning(&self, selection: SelectionStrategy) -> PlanningConfig {
        PlanningConfig {
            horizon: self.horizon.unwrap_or(1),
            gamma: 1.0,
            beta: self.beta.unwrap_or(0.0),
            weighting: Weighting::Average,
            strategy: selection,
        }
    }

    pub fn learner_config(&self, config: &ExperimentConfig) -> LearnerConfig {
        let selection = config.selection();
        let planning = self.planning(selection);
        let teacher_model = match self.pairing.learner {
            LearnerKind::Naive => TeacherModelSpec::Naive,
            LearnerKind::Planning => TeacherModelSpec::Planning { planning },
            LearnerKind::Mixture => TeacherModelSpec::Mixture {
                planning,
                alpha_logit: None,
            },
        };
        LearnerConfig {
            teacher_model,
            tau2: config.tau2,
            selection,
            steps: config.steps,
        }
    }

    pub fn teacher_spec(&self, config: &ExperimentConfig, ground_truth: GroundTruth) -> TeacherSpec {
        let planning = self.planning(config.selection());
        TeacherSpec {
            kind: self.pairing.teacher,
            beta_hat: planning.beta,
            horizon: planning.horizon,
            weighting: planning.weighting,
            learner_strategy: planning.strategy,
            ground_truth,
        }
    }
}

/// Partial sums of the ground-truth reward probabilities of the chosen arms.
pub fn expected_cumulative_reward(arms: &[usize], ground_truth: &GroundTruth) -> Vec<f64> {
    arms.iter()
        .scan(0.0, |acc, &k| {
            *acc += ground_truth.reward_probs[k];
            Some(*acc)
        })
        .collect()
}

/// Partial sums of the responses actually received.
pub fn realized_cumulative_reward(responses: &[u8]) -> Vec<f64> {
    responses
        .iter()
        .scan(0.0, |acc, &y| {
            *acc += f64::from(y);
            Some(*acc)
        })
        .collect()
}

/// Fraction of arm pairs ordered the same way by `scores` and `truth`,
/// over pairs with distinct truth; score ties count one half.
pub fn concordance_index(scores: &[f64], truth: &[f64]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} truth values",
            scores.len(),
            truth.len()
        )));
    }
    if scores.len() < 2 {
        return Err(Error::InvalidArgument("concordance needs at least two items".into()));
    }
    let mut concordant = 0.0;
    let mut comparable = 0usize;
    for i in 0..truth.len() {
        for j in (i + 1)..truth.len() {
            if truth[i] == truth[j] {
                continue;
            }
            comparable += 1;
            let (hi, lo) = if truth[i] > truth[j] { (i, j) } else { (j, i) };
            if scores[hi] > scores[lo] {
                concordant += 1.0;
            } else if scores[hi] == scores[lo] {
                concordant += 0.5;
            }
        }
    }
    if comparable == 0 {
        return Err(Error::InvalidArgument("truth is constant; no comparable pairs".into()));
    }
    Ok(concordant / comparable as f64)
}

/// Per-step mean and 95% normal-approximation CI half-width across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub mean: Vec<f64>,
    pub ci: Vec<f64>,
    pub n: usize,
}

impl MetricSeries {
    /// `values[r][t]`: replicate `r`, step `t`.
    pub fn from_replicates(values: &[Vec<f64>]) -> Self {
        let n = values.len();
        let steps = values.iter().map(Vec::len).min().unwrap_or(0);
        let mut mean = Vec::with_capacity(steps);
        let mut ci = Vec::with_capacity(steps);
        for t in 0..steps {
            let col: Vec<f64> = values.iter().map(|v| v[t]).collect();
            let (m, sd) = mean_sd(&col);
            mean.push(m);
            ci.push(if n > 1 { 1.96 * sd / (n as f64).sqrt() } else { f64::NAN });
        }
        Self { mean, ci, n }
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Result of a paired t-test on `a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub t: f64,
    pub p: f64,
    /// 95% CI half-width of the mean difference (Student t).
    pub ci_half_width: f64,
    pub n: usize,
}

impl PairedTest {
    pub fn ci_contains_zero(&self) -> bool {
        self.mean_diff.abs() <= self.ci_half_width
    }
}

/// Two-sided paired t-test. Zero variance gives p = 1 for a zero mean
/// difference and p = 0 otherwise.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} replicates", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least two replicates".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let (m, sd) = mean_sd(&diffs);
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let crit = dist.inverse_cdf(0.975);
    let se = sd / (n as f64).sqrt();
    if se == 0.0 {
        let p = if m == 0.0 { 1.0 } else { 0.0 };
        let t = if m == 0.0 { 0.0 } else { m.signum() * f64::INFINITY };
        return Ok(PairedTest {
            mean_diff: m,
            t,
            p,
            ci_half_width: 0.0,
            n,
        });
    }
    let t = m / se;
    Ok(PairedTest {
        mean_diff: m,
        t,
        p: 2.0 * dist.sf(t.abs()),
        ci_half_width: crit * se,
        n,
    })
}

/// Per-step p-values of paired t-tests; `a[r][t]`, `b[r][t]`.
pub fn paired_t_test(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} replicates", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least two replicates".into()));
    }
    let steps = a.iter().chain(b).map(Vec::len).min().unwrap_or(0);
    (0..steps)
        .map(|t| {
            let x: Vec<f64> = a.iter().map(|v| v[t]).collect();
            let y: Vec<f64> = b.iter().map(|v| v[t]).collect();
            paired_t(&x, &y).map(|r| r.p)
        })
        .collect()
}

/// Shared draw of a replicate: arm subset, target and initial query.
#[derive(Debug, Clone)]
pub struct ReplicateSetup {
    pub arms: ArmSet,
    pub ground_truth: GroundTruth,
    pub source_indices: Vec<usize>,
    pub initial_arm: usize,
}

/// One finished replicate of one cell.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub source_indices: Vec<usize>,
    pub initial_arm: usize,
    pub trace: EpisodeTrace,
    pub expected_reward: Vec<f64>,
    pub realized_reward: Vec<f64>,
    pub concordance: Vec<f64>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub outcomes: Vec<ReplicateOutcome>,
    /// `(replicate, message)` for replicates that did not finish.
    pub failures: Vec<(usize, String)>,
    pub expected_reward: MetricSeries,
    pub concordance: MetricSeries,
    pub realized_reward: MetricSeries,
}

impl CellResult {
    /// Final-step expected cumulative reward per replicate index.
    pub fn final_rewards(&self) -> BTreeMap<usize, f64> {
        self.outcomes
            .iter()
            .filter_map(|o| o.expected_reward.last().map(|&v| (o.replicate, v)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub elapsed: Duration,
}

impl GridResult {
    pub fn cell(&self, label: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.cell.label() == label)
    }

    /// Paired test of final-step expected cumulative reward, `a - b`, over
    /// replicates completed in both cells.
    pub fn compare_final(&self, a: &str, b: &str) -> Result<PairedTest> {
        let ca = self
            .cell(a)
            .ok_or_else(|| Error::InvalidArgument(format!("no cell {a}")))?
            .final_rewards();
        let cb = self
            .cell(b)
            .ok_or_else(|| Error::InvalidArgument(format!("no cell {b}")))?
            .final_rewards();
        let (x, y): (Vec<f64>, Vec<f64>) = ca
            .iter()
            .filter_map(|(r, va)| cb.get(r).map(|vb| (*va, *vb)))
            .unzip();
        paired_t(&x, &y)
    }
}

/// Draws replicate `r`'s arm subset, ground truth and initial arm.
pub fn replicate_setup(config: &ExperimentConfig, arms: &ArmSet, cell: &Cell, r: usize) -> Result<ReplicateSetup> {
    let mut rng = if config.paired {
        stream(config.seed, &[REPLICATE_STREAM, r as u64])
    } else {
        stream(config.seed, &[REPLICATE_STREAM, r as u64, label_hash(&cell.label())])
    };
    let rep = sample_replicate(arms, config.n_arms, &mut rng)?;
    let initial_arm = rng.random_range(0..config.n_arms);
    let ground_truth = make_ground_truth(&rep.arms, rep.target_index, config.c, config.d)?;
    Ok(ReplicateSetup {
        arms: rep.arms,
        ground_truth,
        source_indices: rep.source_indices,
        initial_arm,
    })
}

/// Runs one replicate of one cell.
pub fn run_replicate(config: &ExperimentConfig, arms: &ArmSet, cell: &Cell, r: usize) -> Result<ReplicateOutcome> {
    let start = Instant::now();
    let setup = replicate_setup(config, arms, cell, r)?;
    let cell_tag = label_hash(&cell.label());
    let learner = cell.learner_config(config);
    let spec = cell.teacher_spec(config, setup.ground_truth.clone());
    let prior = PriorSpec::new(config.tau2, setup.arms.dim())?;
    let mut teacher = SimulatedTeacher::new(
        spec,
        prior,
        stream(config.seed, &[TEACHER_STREAM, cell_tag, r as u64]),
    )?;
    let learner_seed = derive_seed(config.seed, &[LEARNER_STREAM, cell_tag, r as u64]);
    let trace = run_episode(&setup.arms, &mut teacher, &learner, setup.initial_arm, learner_seed)?;
    if let Some(msg) = &trace.aborted {
        return Err(Error::Teacher(msg.clone()));
    }
    let truth = &setup.ground_truth.reward_probs;
    let concordance = trace
        .records
        .iter()
        .map(|rec| {
            let theta = nalgebra::DVector::from_column_slice(&rec.map_theta);
            let scores: Vec<f64> = setup.arms.scores(&theta).iter().copied().collect();
            concordance_index(&scores, truth)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ReplicateOutcome {
        replicate: r,
        expected_reward: expected_cumulative_reward(&trace.arms(), &setup.ground_truth),
        realized_reward: realized_cumulative_reward(&trace.responses()),
        concordance,
        source_indices: setup.source_indices,
        initial_arm: setup.initial_arm,
        trace,
        elapsed: start.elapsed(),
    })
}

/// Runs every cell and replicate. Results are ordered by (cell, replicate)
/// whatever the completion order.
pub fn run_grid(config: &ExperimentConfig) -> Result<GridResult> {
    config.validate()?;
    let start = Instant::now();
    let arms = config.dataset.load()?;
    if arms.len() < config.n_arms {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} arms, {} requested",
            arms.len(),
            config.n_arms
        )));
    }
    let cells = config.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.n_replicates).map(move |r| (c, r)))
        .collect();
    let results: Vec<Result<ReplicateOutcome>> = jobs
        .par_iter()
        .map(|&(c, r)| run_replicate(config, &arms, &cells[c], r))
        .collect();

    let mut per_cell: Vec<(Vec<ReplicateOutcome>, Vec<(usize, String)>)> = vec![Default::default(); cells.len()];
    for (&(c, r), res) in jobs.iter().zip(results) {
        match res {
            Ok(o) => per_cell[c].0.push(o),
            Err(e) => per_cell[c].1.push((r, e.to_string())),
        }
    }
    let cells = cells
        .into_iter()
        .zip(per_cell)
        .map(|(cell, (outcomes, failures))| {
            let series = |f: fn(&ReplicateOutcome) -> &Vec<f64>| {
                MetricSeries::from_replicates(&outcomes.iter().map(|o| f(o).clone()).collect::<Vec<_>>())
            };
            CellResult {
                expected_reward: series(|o| &o.expected_reward),
                concordance: series(|o| &o.concordance),
                realized_reward: series(|o| &o.realized_reward),
                cell,
                outcomes,
                failures,
            }
        })
        .collect();
    Ok(GridResult {
        config: config.clone(),
        cells,
        elapsed: start.elapsed(),
    })
}

/// Paired difference series of every multi-step cell against its one-step
/// counterpart: `(label, step means, step CI half-widths)`.
pub fn horizon_gains(result: &GridResult) -> Vec<(String, MetricSeries)> {
    let mut out = Vec::new();
    for cell in &result.cells {
        let Some(t) = cell.cell.horizon else { continue };
        if t == 1 {
            continue;
        }
        let base = Cell {
            horizon: Some(1),
            ..cell.cell
        };
        let Some(base) = result.cell(&base.label()) else { continue };
        let base: BTreeMap<usize, &Vec<f64>> = base.outcomes.iter().map(|o| (o.replicate, &o.expected_reward)).collect();
        let diffs: Vec<Vec<f64>> = cell
            .outcomes
            .iter()
            .filter_map(|o| {
                base.get(&o.replicate)
                    .map(|b| o.expected_reward.iter().zip(b.iter()).map(|(x, y)| x - y).collect())
            })
            .collect();
        out.push((cell.cell.label(), MetricSeries::from_replicates(&diffs)));
    }
    out
}

fn fmt_num(v: f64) -> String {
    format!("{v:.10}")
}

/// Writes `series.csv`, `replicates.csv`, `horizon_gain.csv`,
/// `traces/<cell>_r<replicate>.jsonl` and `manifest.json` under `dir`.
/// Only the manifest holds timings.
pub fn write_results(result: &GridResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("traces"))?;
    let mut series = csv::Writer::from_path(dir.join("series.csv"))?;
    series.write_record(["cell", "step", "metric", "mean", "ci", "n"])?;
    for cell in &result.cells {
        let label = cell.cell.label();
        for (metric, s) in [
            ("expected_cumulative_reward", &cell.expected_reward),
            ("realized_cumulative_reward", &cell.realized_reward),
            ("concordance_index", &cell.concordance),
        ] {
            for (t, (m, ci)) in s.mean.iter().zip(&s.ci).enumerate() {
                series.write_record([
                    label.clone(),
                    (t + 1).to_string(),
                    metric.to_string(),
                    fmt_num(*m),
                    fmt_num(*ci),
                    s.n.to_string(),
                ])?;
            }
        }
    }
    series.flush()?;

    let mut reps = csv::Writer::from_path(dir.join("replicates.csv"))?;
    reps.write_record([
        "cell",
        "replicate",
        "step",
        "arm",
        "response",
        "expected_cumulative_reward",
        "realized_cumulative_reward",
        "concordance_index",
    ])?;
    for cell in &result.cells {
        let label = cell.cell.label();
        for o in &cell.outcomes {
            for (t, rec) in o.trace.records.iter().enumerate() {
                reps.write_record([
                    label.clone(),
                    o.replicate.to_string(),
                    (t + 1).to_string(),
                    rec.arm.to_string(),
                    rec.response.to_string(),
                    fmt_num(o.expected_reward[t]),
                    fmt_num(o.realized_reward[t]),
                    fmt_num(o.concordance[t]),
                ])?;
            }
            let file = fs::File::create(dir.join("traces").join(format!("{label}_r{:03}.jsonl", o.replicate)))?;
            o.trace.write_jsonl(std::io::BufWriter::new(file))?;
        }
    }
    reps.flush()?;

    let mut gains = csv::Writer::from_path(dir.join("horizon_gain.csv"))?;
    gains.write_record(["cell", "step", "mean_difference", "ci", "n"])?;
    for (label, s) in horizon_gains(result) {
        for (t, (m, ci)) in s.mean.iter().zip(&s.ci).enumerate() {
            gains.write_record([label.clone(), (t + 1).to_string(), fmt_num(*m), fmt_num(*ci), s.n.to_string()])?;
        }
    }
    gains.flush()?;

    let manifest = serde_json::json!({
        "crate": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": result.config,
        "elapsed_seconds": result.elapsed.as_secs_f64(),
        "cells": result.cells.iter().map(|c| serde_json::json!({
            "label": c.cell.label(),
            "cell": c.cell,
            "completed": c.outcomes.len(),
            "failures": c.failures,
            "replicate_seconds": c.outcomes.iter().map(|o| o.elapsed.as_secs_f64()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Converts `series.csv` in `dir` into tidy `plot_data.csv` rows with
/// explicit lower and upper CI bounds.
pub fn plot_data(dir: &Path) -> Result<PathBuf> {
    #[derive(Deserialize)]
    struct Row {
        cell: String,
        step: usize,
        metric: String,
        mean: f64,
        ci: f64,
        n: usize,
    }
    let mut reader = csv::Reader::from_path(dir.join("series.csv"))?;
    let out_path = dir.join("plot_data.csv");
    let mut out = csv::Writer::from_path(&out_path)?;
    out.write_record(["cell", "pairing", "beta", "horizon", "step", "metric", "mean", "lower", "upper", "n"])?;
    for row in reader.deserialize::<Row>() {
        let row = row?;
        let mut parts = row.cell.split('_');
        let pairing = parts.next().unwrap_or_default().to_string();
        let mut beta = String::new();
        let mut horizon = String::new();
        for p in parts {
            if let Some(b) = p.strip_prefix('b') {
                beta = b.to_string();
            } else if let Some(t) = p.strip_prefix('T') {
                horizon = t.to_string();
            }
        }
        out.write_record([
            row.cell.clone(),
            pairing,
            beta,
            horizon,
            row.step.to_string(),
            row.metric,
            fmt_num(row.mean),
            fmt_num(row.mean - row.ci),
            fmt_num(row.mean + row.ci),
            row.n.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(out_path)
}
