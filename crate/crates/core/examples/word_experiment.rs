//! Desk-scale teacher/learner grid on word-like embeddings.
//!
//! Usage: `cargo run --release --example word_experiment -- [desk|full] [out_dir]`

use seqteach::experiments::{run_grid, write_results, DatasetSource, ExperimentConfig, Profile};

fn main() -> seqteach::Result<()> {
    let profile: Profile = std::env::args().nth(1).as_deref().unwrap_or("desk").parse()?;
    let out = std::env::args().nth(2);
    let config = ExperimentConfig::profile(profile, DatasetSource::words(2000, 7));
    let result = run_grid(&config)?;
    println!("{:<14} {:>10} {:>8} {:>6}", "cell", "reward", "ci", "n");
    for cell in &result.cells {
        let last = cell.expected_reward.mean.len() - 1;
        println!(
            "{:<14} {:>10.3} {:>8.3} {:>6}",
            cell.cell.label(),
            cell.expected_reward.mean[last],
            cell.expected_reward.ci[last],
            cell.expected_reward.n
        );
    }
    for (a, b) in [("P-P_b20_T1", "N-N"), ("P-N_b20_T1", "N-N"), ("N-P_b20_T1", "N-N")] {
        let t = result.compare_final(a, b)?;
        println!("{a} vs {b}: diff {:+.3} ± {:.3}, p = {:.2e}", t.mean_diff, t.ci_half_width, t.p);
    }
    println!("elapsed {:.1}s", result.elapsed.as_secs_f64());
    if let Some(dir) = out {
        write_results(&result, dir.as_ref())?;
        println!("results written to {dir}");
    }
    Ok(())
}
