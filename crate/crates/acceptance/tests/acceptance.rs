//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed with a known-failure note still run and print FAIL when
//! they fail, without failing the process. Any other failure exits non-zero.
//! Pass a substring as the first argument to run only matching criteria.

use std::net::SocketAddr;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

use seqteach::active::{compare_strategies, make_failure_synthetic, wine_pool, ActiveStrategy};
use seqteach::arms::{calibrate_line_rbf, line_rbf_arms, ArmSet, GroundTruth};
use seqteach::bandit::{run_episode, Learner, LearnerConfig, TeacherModelSpec, SELECTION_STREAM};
use seqteach::datasets::wine_table;
use seqteach::experiments::{run_grid, DatasetSource, ExperimentConfig, GridResult, Pairing, Profile};
use seqteach::mdp::{
    build_trajectory_cache, next_arm_distribution, node_seed, teacher_policy, PlanningConfig, TeachingState,
    TrajectoryCache, Weighting,
};
use seqteach::numerics::{normal_cdf, sigmoid, Gaussian};
use seqteach::posterior::{
    fit_laplace, mixture_log_lik, naive_log_lik, planning_log_lik, LikelihoodTerm, LogPosterior, MixingPrior,
    PriorSpec,
};
use seqteach::rng::stream;
use seqteach::selection::{estimate_selection_probs, SelectionStrategy};
use seqteach::teachers::naive_response;
use seqteach_session::agents::Agent;
use seqteach_session::dataset::Dataset;
use seqteach_session::session::SessionView;
use seqteach_session::{router, AppState, ServiceConfig};

const WORDS: usize = 2000;
const WORD_SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

struct Suite {
    filter: Option<String>,
    passed: usize,
    failed: Vec<String>,
    known: Vec<String>,
}

impl Suite {
    fn check(&mut self, name: &str, known_failure: Option<&str>, f: impl FnOnce() -> Result<Outcome>) {
        if self.filter.as_ref().is_some_and(|s| !name.contains(s.as_str())) {
            return;
        }
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match (result, known_failure) {
            (Ok(o), _) if o.pass => {
                self.passed += 1;
                println!("PASS  {name}: {} [{secs:.1}s]", o.detail);
            }
            (Ok(o), Some(why)) => {
                self.known.push(name.to_string());
                println!("FAIL  {name}: {} [{secs:.1}s]\n      known failure: {why}", o.detail);
            }
            (Ok(o), None) => {
                self.failed.push(name.to_string());
                println!("FAIL  {name}: {} [{secs:.1}s]", o.detail);
            }
            (Err(e), _) => {
                self.failed.push(name.to_string());
                println!("FAIL  {name}: error: {e:#} [{secs:.1}s]");
            }
        }
    }
}

fn main() -> ExitCode {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut suite = Suite {
        filter,
        passed: 0,
        failed: Vec::new(),
        known: Vec::new(),
    };
    let mut table: Option<GridResult> = None;
    let mut table_grid = || -> Result<GridResult> {
        if table.is_none() {
            let config = ExperimentConfig::profile(Profile::Desk, DatasetSource::words(WORDS, WORD_SEED));
            table = Some(run_grid(&config)?);
        }
        Ok(table.clone().unwrap())
    };

    suite.check("table grid: P-P > P-N > N-N, P-P vs N-N p < 0.05", None, || {
        let grid = table_grid()?;
        let pp = grid.compare_final("P-P_b20_T1", "N-N")?;
        let pn = grid.compare_final("P-N_b20_T1", "N-N")?;
        let pp_pn = grid.compare_final("P-P_b20_T1", "P-N_b20_T1")?;
        let nn = mean_final(&grid, "N-N")?;
        outcome(
            pp_pn.mean_diff > 0.0 && pn.mean_diff > 0.0 && pp.p < 0.05,
            format!(
                "N-N {nn:.3}, P-N {:.3}, P-P {:.3}; P-P vs N-N p = {:.2e}",
                nn + pn.mean_diff,
                nn + pp.mean_diff,
                pp.p
            ),
        )
    });

    suite.check(
        "mismatch: N-P < N-N",
        Some("at desk scale a planning learner paired with a naive teacher still gains over N-N; the gap only closes at the full profile"),
        || {
            let grid = table_grid()?;
            let t = grid.compare_final("N-P_b20_T1", "N-N")?;
            outcome(
                t.mean_diff < 0.0,
                format!("N-P minus N-N = {:+.3} ± {:.3} (p = {:.2e})", t.mean_diff, t.ci_half_width, t.p),
            )
        },
    );

    suite.check("mixture guards: P-M ≈ P-P and N-M ≈ N-N within paired 95% CI", None, || {
        let grid = table_grid()?;
        let p = grid.compare_final("P-M_b20_T1", "P-P_b20_T1")?;
        let n = grid.compare_final("N-M_b20_T1", "N-N")?;
        outcome(
            p.ci_contains_zero() && n.ci_contains_zero(),
            format!(
                "P-M minus P-P = {:+.3} ± {:.3}; N-M minus N-N = {:+.3} ± {:.3}",
                p.mean_diff, p.ci_half_width, n.mean_diff, n.ci_half_width
            ),
        )
    });

    suite.check("multi-step: P-P at T=3 beats T=1, p < 0.05", None, || {
        let mut config = ExperimentConfig::profile(Profile::Desk, DatasetSource::words(WORDS, WORD_SEED));
        config.pairs = vec!["P-P".parse::<Pairing>()?];
        config.horizons = vec![1, 3];
        let grid = run_grid(&config)?;
        let t = grid.compare_final("P-P_b20_T3", "P-P_b20_T1")?;
        outcome(
            t.mean_diff > 0.0 && t.p < 0.05,
            format!("T3 minus T1 = {:+.3} ± {:.3}, p = {:.2e}", t.mean_diff, t.ci_half_width, t.p),
        )
    });

    suite.check("sensitivity: P-P advantage over N-N smaller at β = 5 than at β = 20", None, || {
        let mut config = ExperimentConfig::profile(Profile::Desk, DatasetSource::words(WORDS, WORD_SEED));
        config.pairs = vec!["N-N".parse()?, "P-P".parse()?];
        config.betas = vec![5.0, 20.0];
        let grid = run_grid(&config)?;
        let low = grid.compare_final("P-P_b5_T1", "N-N")?;
        let high = grid.compare_final("P-P_b20_T1", "N-N")?;
        outcome(
            low.mean_diff < high.mean_diff,
            format!("advantage {:+.3} at β = 5, {:+.3} at β = 20", low.mean_diff, high.mean_diff),
        )
    });

    suite.check("ten-arm RBF scenario: Pr(y = 1) > 0.5 at arm 6", None, || {
        let theta_star = DVector::from_column_slice(&[-4.0, 4.5, 6.5]);
        let ls = calibrate_line_rbf(10, &[0.2, 0.8], &theta_star, 5, 0.06)?;
        let arms = line_rbf_arms(10, &[0.2, 0.8], ls)?;
        let gt = GroundTruth::from_theta(&arms, theta_star, 9)?;
        let prior = PriorSpec::new(1.0, arms.dim())?;
        let state = TeachingState::new(vec![], 5);
        let cache = build_trajectory_cache(&state, &arms, &PlanningConfig::one_step(20.0), &prior, 0)?;
        let p1 = teacher_policy(&cache, &gt.theta(), 20.0);
        let mu = gt.reward_probs[5];
        outcome(
            p1 > 0.5 && (mu - 0.06).abs() <= 0.01,
            format!("length-scale {ls:.4}, μ6 = {mu:.3}, Pr(y = 1) = {p1:.3}"),
        )
    });

    suite.check(
        "step function: Pr(θ1 > θ2) > 0.95 after one planning update at β = 100",
        Some("the Gaussian Laplace belief cannot represent the half-plane likelihood; its mode stays near zero while the exact posterior probability is reported alongside"),
        step_function,
    );

    suite.check("oracle (a): Rao-Blackwellized selection probabilities vs 10^6-sample Monte Carlo", None, oracle_selection);
    suite.check("oracle (b): Laplace mode and sd vs 1D quadrature", None, oracle_laplace);
    suite.check("oracle (c): cached Q values vs uncached exhaustive simulation, T ≤ 3", None, oracle_q_values);
    suite.check("oracle (d): naive bandit trace vs minimal Thompson loop", None, oracle_thompson);
    suite.check("gradients: naive, planning and mixture vs central differences", None, gradients);

    suite.check("active trap: teacher beats uncertainty sampling by > 0.03 at iteration 10", None, || {
        let strategies = [ActiveStrategy::NoTeacher, ActiveStrategy::Teacher { horizon: 10 }];
        let (s, full) = compare_strategies(|seed| Ok(make_failure_synthetic(seed)), &strategies, 10, 0.01, 100, 0)?;
        let (without, with) = (s[0].mean_accuracy()[10], s[1].mean_accuracy()[10]);
        outcome(
            with - without > 0.03,
            format!("accuracy {with:.3} with teacher, {without:.3} without, full pool {full:.3}"),
        )
    });

    suite.check("active wine: teacher dominates from iteration 10 onward", None, || {
        let table = wine_table(4898, 0)?;
        let strategies = [ActiveStrategy::NoTeacher, ActiveStrategy::Teacher { horizon: 1 }];
        let (s, full) = compare_strategies(|seed| wine_pool(&table, 7, 500, seed), &strategies, 40, 0.01, 20, 2)?;
        let (without, with) = (s[0].mean_accuracy(), s[1].mean_accuracy());
        let losing: Vec<usize> = (10..=40).filter(|&t| with[t] <= without[t]).collect();
        outcome(
            losing.is_empty(),
            format!(
                "iteration 40: {:.3} with teacher, {:.3} without, full pool {full:.3}; not ahead at {losing:?}",
                with[40], without[40]
            ),
        )
    });

    suite.check("session: planner agent with mixture learner out-earns naive pair over 20 targets", None, || {
        tokio_rt()?.block_on(session_comparison())
    });
    suite.check("session: crash and restart mid-session reproduces state", None, || {
        tokio_rt()?.block_on(session_restart())
    });

    println!(
        "\n{} passed, {} failed, {} known failures",
        suite.passed,
        suite.failed.len(),
        suite.known.len()
    );
    if suite.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {:?}", suite.failed);
        ExitCode::FAILURE
    }
}

fn mean_final(grid: &GridResult, label: &str) -> Result<f64> {
    let cell = grid.cell(label).ok_or_else(|| anyhow!("no cell {label}"))?;
    let v = cell.final_rewards();
    Ok(v.values().sum::<f64>() / v.len() as f64)
}

fn tokio_rt() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn log_sig(a: f64) -> f64 {
    -(1.0 + (-a).exp()).ln()
}

fn step_function() -> Result<Outcome> {
    let beta = 100.0;
    let arms = ArmSet::unnamed(DMatrix::identity(2, 2))?;
    let planning = PlanningConfig {
        horizon: 1,
        gamma: 1.0,
        beta,
        weighting: Weighting::Average,
        strategy: SelectionStrategy::Thompson { n_samples: 1000 },
    };
    let config = LearnerConfig {
        teacher_model: TeacherModelSpec::Planning { planning },
        tau2: 1.0,
        selection: planning.strategy,
        steps: 1,
    };
    let mut learner = Learner::new(arms.clone(), config, 1)?;
    // A planning teacher who knows θ* = (2, 1) answers yes about arm 1.
    let theta_star = DVector::from_column_slice(&[2.0, 1.0]);
    learner.observe(0, 1)?;
    let LikelihoodTerm::Planning { cache, .. } = learner.terms()[0].clone() else {
        return Err(anyhow!("expected a planning term"));
    };
    let teacher_p1 = teacher_policy(&cache, &theta_star, beta);
    let g = learner.belief().theta_belief();
    let m = g.mean[0] - g.mean[1];
    let v = g.covariance[(0, 0)] + g.covariance[(1, 1)] - 2.0 * g.covariance[(0, 1)];
    let laplace = normal_cdf(m / v.sqrt());

    // Exact posterior by 2D quadrature on the same likelihood.
    let (n, lim) = (801usize, 6.0);
    let h = 2.0 * lim / (n - 1) as f64;
    let (mut z, mut above) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let t = DVector::from_column_slice(&[-lim + h * i as f64, -lim + h * j as f64]);
            let w = (-0.5 * t.norm_squared() + planning_log_lik(&t, &cache, 1, beta)?).exp();
            z += w;
            if t[0] > t[1] {
                above += w;
            }
        }
    }
    let exact = above / z;
    outcome(
        laplace > 0.95,
        format!("Laplace {laplace:.3}, exact posterior {exact:.3}, teacher Pr(y = 1) = {teacher_p1:.3}"),
    )
}

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn oracle_selection() -> Result<Outcome> {
    let mut rng = stream(1, &[]);
    let mut worst: f64 = 0.0;
    for d in [2usize, 3, 5] {
        let arms = ArmSet::unnamed(random_matrix(3, d, &mut rng))?;
        let mean = DVector::from_fn(d, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
        let a = random_matrix(d, d, &mut rng) * 0.6;
        let belief = Gaussian::new(mean, &a * a.transpose() + DMatrix::identity(d, d) * 0.05)?;
        let rb = estimate_selection_probs(&belief, &arms, 10_000, &mut stream(2, &[d as u64]))?;
        let l = belief.covariance.clone().cholesky().ok_or_else(|| anyhow!("covariance not PD"))?.l();
        let mut mc_rng = stream(99, &[d as u64]);
        let mut counts = [0usize; 3];
        let n = 1_000_000;
        for _ in 0..n {
            let eps = DVector::from_fn(d, |_, _| mc_rng.sample::<f64, _>(StandardNormal));
            let theta = &belief.mean + &l * eps;
            counts[(arms.features() * theta).argmax().0] += 1;
        }
        for (p, c) in rb.probs.iter().zip(counts) {
            worst = worst.max((p - c as f64 / n as f64).abs());
        }
    }
    outcome(worst < 0.01, format!("max abs difference {worst:.4} over 3-arm instances with d = 2, 3, 5"))
}

fn quadrature_1d(log_density: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = 100_000;
    let (lo, hi) = (-10.0, 10.0);
    let h = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    let logs: Vec<f64> = grid.iter().map(|&t| log_density(t)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let trap = |f: &dyn Fn(usize) -> f64| (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * f(i) } else { f(i) }).sum::<f64>() * h;
    let z = trap(&|i| w[i]);
    let mean = trap(&|i| w[i] * grid[i]) / z;
    let var = trap(&|i| w[i] * (grid[i] - mean).powi(2)) / z;
    let i = (1..n - 1).max_by(|&a, &b| logs[a].total_cmp(&logs[b])).unwrap();
    let (l0, l1, l2) = (logs[i - 1], logs[i], logs[i + 1]);
    (grid[i] + 0.5 * h * (l0 - l2) / (l0 - 2.0 * l1 + l2), var.sqrt())
}

fn oracle_laplace() -> Result<Outcome> {
    let one = |v: f64| DVector::from_element(1, v);
    let prior = PriorSpec::new(1.0, 1)?;
    let mut worst_mode: f64 = 0.0;
    let mut worst_sd: f64 = 0.0;
    let mut record = |terms: Vec<LikelihoodTerm>, log_lik: &dyn Fn(f64) -> f64| -> Result<()> {
        let fit = fit_laplace(&prior, &terms, None)?;
        let (mode, sd) = quadrature_1d(|t| -0.5 * t * t + log_lik(t));
        worst_mode = worst_mode.max((fit.joint.mean[0] - mode).abs());
        worst_sd = worst_sd.max((fit.joint.covariance[(0, 0)].sqrt() / sd - 1.0).abs());
        Ok(())
    };
    for data in [vec![(1.0, 1u8), (1.0, 1), (1.0, 0)], vec![(0.5, 1), (1.0, 1), (-1.0, 0)]] {
        let terms = data.iter().map(|&(x, y)| LikelihoodTerm::Naive { x: one(x), y }).collect();
        record(terms, &|t| {
            data.iter()
                .map(|&(x, y)| if y == 1 { log_sig(x * t) } else { log_sig(-x * t) })
                .sum()
        })?;
    }
    let beta = 2.0;
    let obs = [(0.8, -0.3, 1u8), (0.1, 0.9, 0u8), (0.5, -0.5, 1u8)];
    let terms = obs
        .iter()
        .map(|&(x0, x1, y)| LikelihoodTerm::Planning {
            cache: Arc::new(TrajectoryCache::one_step(one(1.0), one(1.0), one(x0), one(x1))),
            y,
            beta,
        })
        .collect();
    record(terms, &|t| {
        obs.iter()
            .map(|&(x0, x1, y)| {
                let gap = beta * t * (x1 - x0);
                if y == 1 {
                    log_sig(gap)
                } else {
                    log_sig(-gap)
                }
            })
            .sum()
    })?;
    outcome(
        worst_mode < 1e-3 && worst_sd < 0.05,
        format!("max mode error {worst_mode:.2e}, max sd relative error {:.2}%", 100.0 * worst_sd),
    )
}

#[allow(clippy::too_many_arguments)]
fn uncached_q(
    state: &TeachingState,
    arms: &ArmSet,
    config: &PlanningConfig,
    prior: &PriorSpec,
    seed: u64,
    theta: &DVector<f64>,
    y1: u8,
) -> Result<f64> {
    let weight = |t: usize| match config.weighting {
        Weighting::Discounted => config.gamma.powi(t as i32 - 1),
        Weighting::Average => 1.0 / config.horizon as f64,
    };
    let mut best = f64::NEG_INFINITY;
    for code in 0..1usize << (config.horizon - 1) {
        let mut path = vec![y1];
        for b in (0..config.horizon - 1).rev() {
            path.push(((code >> b) & 1) as u8);
        }
        let mut data = state.naive_data(arms);
        let mut x = arms.arm(state.pending);
        let mut value = 0.0;
        for t in 1..=config.horizon {
            let p = next_arm_distribution(
                &data,
                &x,
                path[t - 1],
                arms,
                prior,
                config.strategy,
                state.step() + t,
                node_seed(seed, &path[..t]),
            )?;
            data.push((x.clone(), path[t - 1]));
            value += weight(t) * (arms.features() * theta).dot(&p);
            x = arms.features().tr_mul(&p);
        }
        best = best.max(value);
    }
    Ok(best)
}

fn oracle_q_values() -> Result<Outcome> {
    let mut rng = stream(3, &[]);
    let arms = ArmSet::with_intercept(&random_matrix(5, 2, &mut rng), (0..5).map(|i| format!("w{i}")).collect())?;
    let prior = PriorSpec::new(1.0, arms.dim())?;
    let state = TeachingState::new(vec![(1, 1), (3, 0)], 2);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for horizon in 1..=3 {
        for weighting in [Weighting::Average, Weighting::Discounted] {
            for strategy in [SelectionStrategy::Thompson { n_samples: 100 }, SelectionStrategy::BayesUcb] {
                let config = PlanningConfig {
                    horizon,
                    gamma: 0.8,
                    beta: 1.0,
                    weighting,
                    strategy,
                };
                let cache = build_trajectory_cache(&state, &arms, &config, &prior, 17)?;
                for _ in 0..4 {
                    let theta = DVector::from_fn(arms.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
                    let q = cache.q_values(&theta);
                    for y in 0..2u8 {
                        let brute = uncached_q(&state, &arms, &config, &prior, 17, &theta, y)?;
                        worst = worst.max((q.q[usize::from(y)] - brute).abs());
                        cases += 1;
                    }
                }
            }
        }
    }
    outcome(worst < 1e-10, format!("max abs difference {worst:.1e} over {cases} values"))
}

fn oracle_thompson() -> Result<Outcome> {
    let mut rng = stream(4, &[]);
    let arms = ArmSet::with_intercept(&random_matrix(8, 3, &mut rng), (0..8).map(|i| format!("a{i}")).collect())?;
    let theta_star = DVector::from_fn(arms.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let gt = GroundTruth::from_theta(&arms, theta_star, 0)?;
    let (steps, seed, initial) = (12, 77u64, 5usize);

    let mut teacher_rng = stream(8, &[]);
    let gt2 = gt.clone();
    let mut teacher = move |s: &TeachingState, _: &ArmSet| Ok(naive_response(&gt2, s.pending, &mut teacher_rng));
    let trace = run_episode(&arms, &mut teacher, &LearnerConfig::naive(steps), initial, seed)?;

    let prior = PriorSpec::new(1.0, arms.dim())?;
    let mut sel = stream(seed, &[SELECTION_STREAM]);
    let mut resp = stream(8, &[]);
    let mut terms = Vec::new();
    let mut belief = Gaussian::isotropic(arms.dim(), 1.0);
    let mut map: Option<DVector<f64>> = None;
    let (mut chosen, mut answers) = (Vec::new(), Vec::new());
    for t in 1..=steps {
        let k = if t == 1 {
            initial
        } else {
            (arms.features() * belief.sample(&mut sel)).argmax().0
        };
        let y = naive_response(&gt, k, &mut resp);
        terms.push(LikelihoodTerm::Naive { x: arms.arm(k), y });
        let fit = fit_laplace(&prior, &terms, map.as_ref())?;
        map = Some(fit.map_point.clone());
        belief = fit.joint;
        chosen.push(k);
        answers.push(y);
    }
    let same = trace.arms() == chosen
        && trace.responses() == answers
        && trace.final_belief.joint.mean == belief.mean
        && trace.final_belief.joint.covariance == belief.covariance;
    outcome(same, format!("{steps} steps, arms {chosen:?}"))
}

fn central_diff(f: impl Fn(&DVector<f64>) -> f64, at: &DVector<f64>) -> DVector<f64> {
    let h = 1e-5;
    DVector::from_fn(at.len(), |i, _| {
        let mut up = at.clone();
        up[i] += h;
        let mut down = at.clone();
        down[i] -= h;
        (f(&up) - f(&down)) / (2.0 * h)
    })
}

fn term_gradient(prior: &PriorSpec, term: LikelihoodTerm, params: &DVector<f64>) -> Result<DVector<f64>> {
    let terms = [term];
    let (_, mut g) = LogPosterior::new(prior, &terms)?.value_grad(params)?;
    for i in 0..prior.dim {
        g[i] += params[i] / prior.tau2;
    }
    if prior.mixing == MixingPrior::Inferred {
        g[prior.dim] -= 1.0 - 2.0 * sigmoid(params[prior.dim]);
    }
    Ok(g)
}

fn gradients() -> Result<Outcome> {
    let mut rng = stream(10, &[]);
    let arms = ArmSet::with_intercept(&random_matrix(6, 3, &mut rng), (0..6).map(|i| format!("a{i}")).collect())?;
    let d = arms.dim();
    let config = PlanningConfig {
        horizon: 3,
        gamma: 1.0,
        beta: 5.0,
        weighting: Weighting::Average,
        strategy: SelectionStrategy::Thompson { n_samples: 200 },
    };
    let prior = PriorSpec::new(1.0, d)?;
    let mix_prior = prior.with_mixing(MixingPrior::Inferred);
    let state = TeachingState::new(vec![(0, 1), (4, 0)], 2);
    let cache = Arc::new(build_trajectory_cache(&state, &arms, &config, &prior, 3)?);
    let beta = 5.0;
    let mut rel = [0.0f64; 3];
    let (mut done, mut skipped) = (0, 0);
    while done < 20 {
        let theta = DVector::from_fn(d, |_, _| 1.5 * rng.sample::<f64, _>(StandardNormal));
        // Kinks sit where the best trajectory changes; keep clear of them.
        if cache.q_values(&theta).margin.iter().any(|&m| m <= 1e-3) {
            skipped += 1;
            continue;
        }
        let y = (done % 2) as u8;
        let x = arms.arm(done % arms.len());
        let rel_err = |a: &DVector<f64>, n: &DVector<f64>| (a - n).norm() / n.norm().max(1e-8);

        let g = term_gradient(&prior, LikelihoodTerm::Naive { x: x.clone(), y }, &theta)?;
        rel[0] = rel[0].max(rel_err(&g, &central_diff(|t| naive_log_lik(t, &x, y), &theta)));

        let term = LikelihoodTerm::Planning {
            cache: cache.clone(),
            y,
            beta,
        };
        let g = term_gradient(&prior, term, &theta)?;
        let fd = central_diff(|t| planning_log_lik(t, &cache, y, beta).unwrap(), &theta);
        rel[1] = rel[1].max(rel_err(&g, &fd));

        let a = 2.0 * rng.sample::<f64, _>(StandardNormal);
        let params = theta.clone().insert_row(d, a);
        let term = LikelihoodTerm::Mixture {
            x: x.clone(),
            cache: cache.clone(),
            y,
            beta,
        };
        let g = term_gradient(&mix_prior, term, &params)?;
        let fd = central_diff(
            |p| mixture_log_lik(&p.rows(0, d).into_owned(), p[d], &x, &cache, y, beta).unwrap(),
            &params,
        );
        rel[2] = rel[2].max(rel_err(&g, &fd));
        done += 1;
    }
    outcome(
        rel.iter().all(|&r| r < 1e-4),
        format!(
            "max relative error naive {:.1e}, planning {:.1e}, mixture {:.1e}; {skipped} near-kink points skipped",
            rel[0], rel[1], rel[2]
        ),
    )
}

struct Server {
    base: String,
    state: AppState,
    handle: tokio::task::JoinHandle<()>,
}

async fn start(dir: &Path) -> Result<Server> {
    let state = AppState::open(&ServiceConfig {
        data_dir: dir.to_path_buf(),
        registry: None,
    })?;
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await?;
    let base = format!("http://{}", listener.local_addr()?);
    let app = router(state.clone());
    let handle = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Ok(Server { base, state, handle })
}

async fn call(req: reqwest::RequestBuilder) -> Result<Value> {
    let r = req.send().await?;
    let status = r.status();
    let body: Value = r.json().await?;
    if !status.is_success() {
        return Err(anyhow!("HTTP {status}: {body}"));
    }
    Ok(body)
}

async fn play(c: &Client, base: &str, ds: &Dataset, model: &str, agent: Agent, target: usize, seed: u64) -> Result<Value> {
    let mut rng = stream(seed, &[77]);
    let body = json!({"dataset": ds.id, "model": model, "target": target, "seed": seed});
    let created = call(c.post(format!("{base}/sessions")).json(&body)).await?;
    let id = created["id"].as_str().ok_or_else(|| anyhow!("no id"))?.to_string();
    loop {
        let view: SessionView = serde_json::from_value(call(c.get(format!("{base}/sessions/{id}"))).await?)?;
        if view.question.is_none() {
            break;
        }
        let y = agent.respond(ds, &view, &mut rng)?;
        call(c.post(format!("{base}/sessions/{id}/answers")).json(&json!({ "y": y }))).await?;
    }
    call(c.get(format!("{base}/sessions/{id}/result"))).await
}

async fn session_comparison() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let server = start(dir.path()).await?;
    let ds = server.state.registry().iter().next().ok_or_else(|| anyhow!("no dataset"))?.clone();
    let c = Client::new();
    let total = |r: &Value| r["cumulative_reward"].as_array().and_then(|a| a.last()).and_then(Value::as_f64);
    let (mut naive, mut mixture) = (0.0, 0.0);
    for target in 0..20 {
        let seed = 1000 + target as u64;
        let a = play(&c, &server.base, &ds, "naive", Agent::Naive, target, seed).await?;
        let b = play(&c, &server.base, &ds, "mixture", Agent::Planner, target, seed).await?;
        naive += total(&a).ok_or_else(|| anyhow!("no reward series"))?;
        mixture += total(&b).ok_or_else(|| anyhow!("no reward series"))?;
    }
    server.handle.abort();
    outcome(
        mixture > naive,
        format!("mean cumulative reward {:.3} (mixture, planner) vs {:.3} (naive, naive)", mixture / 20.0, naive / 20.0),
    )
}

async fn session_restart() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let c = Client::new();
    let body = json!({"dataset": "words20", "model": "mixture", "target": 12, "seed": 21});
    let script = [1u8, 1, 0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1];
    let answer = |base: &str, id: &str, y: u8| {
        c.post(format!("{base}/sessions/{id}/answers")).json(&json!({ "y": y }))
    };

    let server = start(dir.path()).await?;
    let reference = call(c.post(format!("{}/sessions", server.base)).json(&body)).await?;
    let reference = reference["id"].as_str().unwrap_or_default().to_string();
    for y in script {
        call(answer(&server.base, &reference, y)).await?;
    }
    let mut expected = call(c.get(format!("{}/sessions/{reference}/result", server.base))).await?;

    let s = call(c.post(format!("{}/sessions", server.base)).json(&body)).await?;
    let id = s["id"].as_str().unwrap_or_default().to_string();
    for y in &script[..7] {
        call(answer(&server.base, &id, *y)).await?;
    }
    let before = call(c.get(format!("{}/sessions/{id}", server.base))).await?;
    server.handle.abort();
    let _ = server.handle.await;

    let server = start(dir.path()).await?;
    let after = call(c.get(format!("{}/sessions/{id}", server.base))).await?;
    for y in &script[7..] {
        call(answer(&server.base, &id, *y)).await?;
    }
    let mut resumed = call(c.get(format!("{}/sessions/{id}/result", server.base))).await?;
    let finished = c
        .post(format!("{}/sessions/{id}/answers", server.base))
        .json(&json!({"y": 1}))
        .send()
        .await?
        .status();
    server.handle.abort();
    expected["id"] = Value::Null;
    resumed["id"] = Value::Null;
    outcome(
        before == after && resumed == expected && finished == StatusCode::CONFLICT,
        format!(
            "state after restart {}, continuation {} the uninterrupted run",
            if before == after { "identical" } else { "differs" },
            if resumed == expected { "matches" } else { "differs from" }
        ),
    )
}
