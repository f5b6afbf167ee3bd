//! Writes the synthetic inputs used by the experiments: word-like
//! embeddings and a wine-quality-like table.
//!
//! Usage: `cargo run --release --example generate_datasets -- [out_dir]`

use std::path::PathBuf;

use seqteach::datasets::{wine_table, word_embeddings, write_feature_csv, WordSpec};

fn main() -> seqteach::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir)?;

    let spec = WordSpec {
        n_words: 2000,
        seed: 7,
        ..WordSpec::default()
    };
    let (names, features) = word_embeddings(&spec)?;
    write_feature_csv(&dir.join("words.csv"), &names, &features)?;
    println!("words.csv: {} words × {} dims, e.g. {:?}", names.len(), features.ncols(), &names[..5]);

    let wine = wine_table(4898, 0)?;
    wine.write_csv(&dir.join("wine.csv"))?;
    let mut counts = [0usize; 11];
    for &q in &wine.quality {
        counts[q as usize] += 1;
    }
    println!("wine.csv: {} rows, quality histogram {:?}", wine.quality.len(), &counts[3..=9]);
    Ok(())
}
