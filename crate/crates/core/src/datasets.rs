//! Deterministic stand-in datasets.
//!
//! [`word_embeddings`] produces word-like vectors: a few dozen latent topics
//! with a decaying variance spectrum, embedded linearly into a
//! high-dimensional space with a little isotropic noise. [`wine_table`]
//! produces an 11-feature table of correlated physico-chemical style
//! measurements with an ordinal quality score driven by a noisy linear
//! function of the features. Both are pure functions of their seed.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordSpec {
    pub n_words: usize,
    pub dim: usize,
    pub n_topics: usize,
    pub latent_dim: usize,
    pub seed: u64,
}

impl Default for WordSpec {
    fn default() -> Self {
        Self {
            n_words: 10_000,
            dim: 300,
            n_topics: 40,
            latent_dim: 30,
            seed: 0,
        }
    }
}

const ONSETS: &[&str] = &[
    "b", "br", "c", "ch", "d", "dr", "f", "fl", "g", "gr", "h", "j", "k", "l", "m", "n", "p", "pl", "r", "s", "sh",
    "st", "t", "tr", "v", "w", "z",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "oo", "ou"];
const CODAS: &[&str] = &["", "", "n", "r", "s", "t", "l", "m", "nd", "st", "ck"];

fn pseudo_word<R: Rng + ?Sized>(rng: &mut R) -> String {
    let syllables = rng.random_range(1..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
        w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
    }
    w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
    w
}

fn normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Word-like embeddings with unique pseudo-word names.
pub fn word_embeddings(spec: &WordSpec) -> Result<(Vec<String>, DMatrix<f64>)> {
    if spec.n_words == 0 || spec.dim == 0 || spec.n_topics == 0 || spec.latent_dim == 0 {
        return Err(Error::InvalidArgument("word spec counts must be positive".into()));
    }
    let mut rng = stream(spec.seed, &[0x77]);
    let scales = DVector::from_fn(spec.latent_dim, |i, _| (1.0 / (1.0 + i as f64 / 3.0)).sqrt());
    let topics = normal_matrix(spec.n_topics, spec.latent_dim, &mut rng);
    let loading = normal_matrix(spec.latent_dim, spec.dim, &mut rng) / (spec.dim as f64).sqrt();
    let mut latent = DMatrix::zeros(spec.n_words, spec.latent_dim);
    for i in 0..spec.n_words {
        let topic = rng.random_range(0..spec.n_topics);
        for j in 0..spec.latent_dim {
            let z: f64 = rng.sample(StandardNormal);
            latent[(i, j)] = scales[j] * (topics[(topic, j)] + 0.7 * z);
        }
    }
    let noise = normal_matrix(spec.n_words, spec.dim, &mut rng) * (0.05 / (spec.dim as f64).sqrt());
    let vectors = latent * loading + noise;

    let mut seen = HashSet::new();
    let mut names = Vec::with_capacity(spec.n_words);
    while names.len() < spec.n_words {
        let w = pseudo_word(&mut rng);
        let w = if seen.contains(&w) { format!("{w}{}", names.len()) } else { w };
        if seen.insert(w.clone()) {
            names.push(w);
        }
    }
    Ok((names, vectors))
}

/// Writes `name, f1, f2, ...` rows with a header.
pub fn write_feature_csv(path: &Path, names: &[String], features: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["name".to_string()];
    header.extend((1..=features.ncols()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for (name, row) in names.iter().zip(features.row_iter()) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| format!("{v:.17e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A table of continuous features and an ordinal quality score.
#[derive(Debug, Clone, PartialEq)]
pub struct WineTable {
    pub feature_names: Vec<String>,
    pub features: DMatrix<f64>,
    pub quality: Vec<u8>,
}

impl WineTable {
    /// Binary labels `quality ≥ cut`.
    pub fn labels(&self, cut: u8) -> Vec<u8> {
        self.quality.iter().map(|&q| u8::from(q >= cut)).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "{};quality", self.feature_names.join(";"))?;
        for (row, q) in self.features.row_iter().zip(&self.quality) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{};{q}", cells.join(";"))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a delimited table whose last column is an integer quality.
    /// The delimiter (`;` or `,`) is taken from the header row.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let first = text.lines().next().unwrap_or_default();
        let delimiter = if first.contains(';') { b';' } else { b',' };
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim_matches('"').to_string()).collect();
        if header.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: 1,
                column: 1,
                message: "need at least one feature and a quality column".into(),
            });
        }
        let width = header.len() - 1;
        let mut values = Vec::new();
        let mut quality = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row = i + 2;
            if record.len() != header.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: record.len() + 1,
                    message: format!("expected {} columns", header.len()),
                });
            }
            for (col, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: col + 1,
                    message: format!("not a number: {cell:?}"),
                })?;
                if col < width {
                    values.push(v);
                } else {
                    quality.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        if quality.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: 0,
                column: 0,
                message: "no data rows".into(),
            });
        }
        Ok(Self {
            feature_names: header[..width].to_vec(),
            features: DMatrix::from_row_slice(quality.len(), width, &values),
            quality,
        })
    }
}

const WINE_FEATURES: [(&str, f64, f64); 11] = [
    ("fixed acidity", 6.85, 0.84),
    ("volatile acidity", 0.28, 0.10),
    ("citric acid", 0.33, 0.12),
    ("residual sugar", 6.39, 5.07),
    ("chlorides", 0.046, 0.022),
    ("free sulfur dioxide", 35.3, 17.0),
    ("total sulfur dioxide", 138.4, 42.5),
    ("density", 0.994, 0.003),
    ("pH", 3.19, 0.15),
    ("sulphates", 0.49, 0.11),
    ("alcohol", 10.5, 1.23),
];

/// Quality weights on the standardized features.
const WINE_WEIGHTS: [f64; 11] = [-0.1, -0.45, 0.0, 0.35, -0.2, 0.15, -0.1, -0.5, 0.15, 0.1, 0.9];

/// A wine-like table of `n_rows` rows. With the default row count about a
/// fifth of the rows have quality 7 or more.
pub fn wine_table(n_rows: usize, seed: u64) -> Result<WineTable> {
    if n_rows == 0 {
        return Err(Error::InvalidArgument("wine table needs rows".into()));
    }
    let mut rng = stream(seed, &[0x71e]);
    let d = WINE_FEATURES.len();
    let factors = 3;
    let loading = normal_matrix(d, factors, &mut stream(0x71e, &[])) * 0.6;
    let norm = (WINE_WEIGHTS.iter().map(|w| w * w).sum::<f64>()).sqrt();
    let mut features = DMatrix::zeros(n_rows, d);
    let mut quality = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let f = normal_matrix(factors, 1, &mut rng);
        let mut z = &loading * &f;
        for j in 0..d {
            let e: f64 = rng.sample(StandardNormal);
            z[j] = (z[j] + e) / (1.0 + loading.row(j).norm_squared()).sqrt();
        }
        let signal = WINE_WEIGHTS.iter().zip(z.iter()).map(|(w, v)| w * v).sum::<f64>() / norm;
        let e: f64 = rng.sample(StandardNormal);
        let s = 0.8 * signal + 0.6 * e;
        quality.push((5.87 + 0.9 * s).round().clamp(3.0, 9.0) as u8);
        for (j, &(_, mean, sd)) in WINE_FEATURES.iter().enumerate() {
            features[(i, j)] = (mean + sd * z[j]).max(0.0);
        }
    }
    Ok(WineTable {
        feature_names: WINE_FEATURES.iter().map(|(n, _, _)| n.to_string()).collect(),
        features,
        quality,
    })
}
