//! Uncertainty sampling on a pool built to mislead it, with and without a
//! teacher that plans its labels ten queries ahead.
//!
//! Usage: `cargo run --release --example active_trap -- [seeds]`

use seqteach::active::{compare_strategies, make_failure_synthetic, ActiveStrategy};

fn main() -> seqteach::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let strategies = [
        ActiveStrategy::NoTeacher,
        ActiveStrategy::Teacher { horizon: 10 },
        ActiveStrategy::Random,
    ];
    let (summaries, full) = compare_strategies(|s| Ok(make_failure_synthetic(s)), &strategies, 10, 0.01, seeds, 0)?;
    println!("mean test accuracy over {seeds} pools (full pool {full:.3})");
    print!("{:>4}", "it");
    for s in &summaries {
        print!("{:>14}", format!("{:?}", s.strategy).split_whitespace().next().unwrap_or_default());
    }
    println!();
    let curves: Vec<Vec<f64>> = summaries.iter().map(|s| s.mean_accuracy()).collect();
    for t in 0..curves[0].len() {
        print!("{t:>4}");
        for c in &curves {
            print!("{:>14.3}", c[t]);
        }
        println!();
    }
    let flipped: usize = summaries[1].runs.iter().map(|r| r.flipped).sum();
    println!("the teacher gave {flipped} untruthful labels in total");
    Ok(())
}
