//! Active learning on a wine-quality-like table with a one-step teacher.
//!
//! Usage: `cargo run --release --example wine_active -- [wine.csv]`
//! Without a file a synthetic table of the same shape is generated.

use seqteach::active::{compare_strategies, wine_pool, ActiveStrategy};
use seqteach::datasets::{wine_table, WineTable};

fn main() -> seqteach::Result<()> {
    let table = match std::env::args().nth(1) {
        Some(path) => WineTable::read_csv(path.as_ref())?,
        None => wine_table(4898, 0)?,
    };
    let positives = table.labels(7).iter().filter(|&&y| y == 1).count();
    println!("{} rows, {positives} with quality ≥ 7", table.quality.len());
    let strategies = [ActiveStrategy::NoTeacher, ActiveStrategy::Teacher { horizon: 1 }];
    let (s, full) = compare_strategies(|seed| wine_pool(&table, 7, 500, seed), &strategies, 40, 0.01, 20, 2)?;
    let (without, with) = (s[0].mean_accuracy(), s[1].mean_accuracy());
    println!("{:>4} {:>10} {:>10}", "it", "teacher", "none");
    for t in (0..=40).step_by(5) {
        println!("{t:>4} {:>10.3} {:>10.3}", with[t], without[t]);
    }
    println!("full-pool accuracy {full:.3}");
    Ok(())
}
