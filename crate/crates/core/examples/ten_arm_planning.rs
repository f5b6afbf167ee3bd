//! Ten arms on a line with two RBF bumps. Arm 6 has a low reward, yet a
//! planning teacher answers "yes" to it because that steers the learner
//! toward the high-reward arms on the right.
//!
//! Usage: `cargo run --release --example ten_arm_planning`

use nalgebra::DVector;

use seqteach::arms::{calibrate_line_rbf, line_rbf_arms, GroundTruth};
use seqteach::mdp::{build_trajectory_cache, teacher_policy, PlanningConfig, TeachingState};
use seqteach::posterior::PriorSpec;

fn main() -> seqteach::Result<()> {
    let theta_star = DVector::from_column_slice(&[-4.0, 4.5, 6.5]);
    // Length-scale at which arm 6 has a 6% reward probability.
    let ls = calibrate_line_rbf(10, &[0.2, 0.8], &theta_star, 5, 0.06)?;
    let arms = line_rbf_arms(10, &[0.2, 0.8], ls)?;
    let gt = GroundTruth::from_theta(&arms, theta_star, 9)?;
    println!("length-scale {ls:.4}");
    for (k, mu) in gt.reward_probs.iter().enumerate() {
        println!("arm {:>2}  μ = {mu:.3}", k + 1);
    }

    let prior = PriorSpec::new(1.0, arms.dim())?;
    let state = TeachingState::new(vec![], 5);
    let cache = build_trajectory_cache(&state, &arms, &PlanningConfig::one_step(20.0), &prior, 0)?;
    for y in 0..2usize {
        let p = &cache.weights(y)[0];
        let best = p.argmax();
        println!(
            "after y = {y} at arm 6 the learner's next query is most likely arm {} (p = {:.2})",
            best.0 + 1,
            best.1
        );
    }
    let q = cache.q_values(&gt.theta());
    println!("Q(y=0) = {:.3}, Q(y=1) = {:.3}", q.q[0], q.q[1]);
    for beta in [1.0, 5.0, 20.0, 100.0] {
        println!("β = {beta:>5}: Pr(y = 1) = {:.3}", teacher_policy(&cache, &gt.theta(), beta));
    }
    Ok(())
}
