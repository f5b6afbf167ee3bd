//! One episode on word-like arms with a planning teacher, run against a
//! naive learner and a mixture learner that infers how much the teacher plans.
//!
//! Usage: `cargo run --release --example bandit_episode`

use seqteach::arms::make_ground_truth;
use seqteach::bandit::{run_episode, LearnerConfig, TeacherModelSpec};
use seqteach::experiments::{expected_cumulative_reward, DatasetSource};
use seqteach::mdp::PlanningConfig;
use seqteach::posterior::PriorSpec;
use seqteach::rng::stream;
use seqteach::selection::SelectionStrategy;
use seqteach::teachers::{SimulatedTeacher, TeacherSpec};

fn main() -> seqteach::Result<()> {
    let pool = DatasetSource::words(500, 3).load()?;
    let arms = pool.subset(&(0..40).collect::<Vec<_>>());
    let gt = make_ground_truth(&arms, 7, -4.0, 8.0)?;
    println!("target {:?}, best reward {:.3}", arms.name(7), gt.reward_probs[7]);

    let planning = PlanningConfig::one_step(20.0);
    let learners = [
        ("naive", TeacherModelSpec::Naive),
        (
            "mixture",
            TeacherModelSpec::Mixture {
                planning,
                alpha_logit: None,
            },
        ),
    ];
    for (name, teacher_model) in learners {
        let config = LearnerConfig {
            teacher_model,
            tau2: 1.0,
            selection: SelectionStrategy::default(),
            steps: 15,
        };
        let prior = PriorSpec::new(1.0, arms.dim())?;
        let mut teacher = SimulatedTeacher::new(TeacherSpec::planning(gt.clone(), 20.0, 1), prior, stream(5, &[]))?;
        let trace = run_episode(&arms, &mut teacher, &config, 0, 11)?;
        let reward = expected_cumulative_reward(&trace.arms(), &gt);
        println!("\n{name} learner");
        for (r, cum) in trace.records.iter().zip(&reward) {
            let alpha = r.alpha_logit.map(|a| format!("  logit α {a:+.2}")).unwrap_or_default();
            println!(
                "step {:>2}: {:<14} y = {}  μ = {:.3}  cumulative {:.2}{alpha}",
                r.step,
                arms.name(r.arm),
                r.response,
                gt.reward_probs[r.arm],
                cum
            );
        }
    }
    Ok(())
}
