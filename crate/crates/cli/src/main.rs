use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use seqteach::active::{compare_strategies, make_failure_synthetic, wine_pool, ActiveStrategy};
use seqteach::datasets::{wine_table, word_embeddings, write_feature_csv, WineTable, WordSpec};
use seqteach::experiments::{plot_data, run_grid, write_results, ExperimentConfig, Profile};
use seqteach_session::ServiceConfig;

#[derive(Parser)]
#[command(name = "seqteach", version, about = "Learning from planning teachers: simulations and live sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Teacher/learner simulation grids.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Active learning with a label-planning teacher.
    #[command(subcommand)]
    Alteach(AlteachCmd),
    /// Serve live teaching sessions over HTTP.
    Serve {
        #[arg(long, env = "SEQTEACH_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "SEQTEACH_HOST", default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, env = "SEQTEACH_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        /// JSON dataset registry; the built-in 20-word set when omitted.
        #[arg(long, env = "SEQTEACH_REGISTRY")]
        registry: Option<PathBuf>,
    },
    /// Write synthetic datasets.
    #[command(subcommand)]
    Data(DataCmd),
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Run a grid and write series.csv, traces/ and manifest.json.
    Run {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Size preset overriding the config's arm, replicate and step counts.
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
    },
    /// Turn a results directory's series.csv into plot_data.csv.
    PlotData {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print a default configuration to start from.
    Template {
        #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
        profile: ProfileArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Full,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Full => Profile::Full,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Plan labels `--horizon` steps ahead.
    Full,
    /// Plan one step ahead.
    Greedy,
}

#[derive(Subcommand)]
enum AlteachCmd {
    /// Compare uncertainty sampling with and without the teacher; writes accuracy.csv.
    Run {
        /// `synthetic` for the uncertainty-sampling trap, or a wine-quality CSV.
        #[arg(long, default_value = "synthetic")]
        dataset: String,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        /// Query iterations; defaults to the horizon.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        /// Quality threshold for the positive class (wine only).
        #[arg(long, default_value_t = 7)]
        cut: u8,
        /// Pool size (wine only).
        #[arg(long, default_value_t = 2000)]
        pool: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run random querying.
        #[arg(long)]
        random: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DataCmd {
    /// Word-like embeddings as `name,f1,…` rows.
    Words {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 300)]
        dim: usize,
        #[arg(long, default_value_t = 40)]
        topics: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// A wine-quality-like table (`;`-separated, last column quality).
    Wine {
        #[arg(long, default_value_t = 4898)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    match Cli::parse().command {
        Command::Experiment(cmd) => experiment(cmd),
        Command::Alteach(AlteachCmd::Run {
            dataset,
            horizon,
            mode,
            seeds,
            iterations,
            lambda,
            cut,
            pool,
            seed,
            random,
            out,
        }) => {
            let horizon = if mode == Mode::Greedy { 1 } else { horizon };
            let iterations = iterations.unwrap_or(horizon.max(1));
            let mut strategies = vec![ActiveStrategy::NoTeacher, ActiveStrategy::Teacher { horizon }];
            if random {
                strategies.push(ActiveStrategy::Random);
            }
            let (summaries, full) = if dataset == "synthetic" {
                compare_strategies(|s| Ok(make_failure_synthetic(s)), &strategies, iterations, lambda, seeds, seed)?
            } else {
                let table = WineTable::read_csv(Path::new(&dataset)).with_context(|| format!("reading {dataset}"))?;
                compare_strategies(|s| wine_pool(&table, cut, pool, s), &strategies, iterations, lambda, seeds, seed)?
            };
            fs::create_dir_all(&out)?;
            let path = out.join("accuracy.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["strategy", "iteration", "mean_accuracy", "sd", "n"])?;
            for s in &summaries {
                let label = match s.strategy {
                    ActiveStrategy::NoTeacher => "no_teacher".to_string(),
                    ActiveStrategy::Teacher { horizon } => format!("teacher_h{horizon}"),
                    ActiveStrategy::Random => "random".to_string(),
                };
                let mean = s.mean_accuracy();
                for (t, m) in mean.iter().enumerate() {
                    let n = s.runs.len() as f64;
                    let var = s.runs.iter().map(|r| (r.accuracy[t] - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                    w.write_record([label.clone(), t.to_string(), m.to_string(), var.sqrt().to_string(), s.runs.len().to_string()])?;
                }
                println!("{label:<12} final mean accuracy {:.4}", mean.last().copied().unwrap_or(f64::NAN));
            }
            w.flush()?;
            println!("full-pool accuracy {full:.4}; wrote {}", path.display());
            Ok(())
        }
        Command::Serve {
            port,
            host,
            data_dir,
            registry,
        } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(seqteach_session::serve(
                ServiceConfig { data_dir, registry },
                SocketAddr::new(host, port),
            ))?;
            Ok(())
        }
        Command::Data(DataCmd::Words {
            n,
            dim,
            topics,
            seed,
            out,
        }) => {
            let spec = WordSpec {
                n_words: n,
                dim,
                n_topics: topics,
                seed,
                ..WordSpec::default()
            };
            let (names, features) = word_embeddings(&spec)?;
            write_feature_csv(&out, &names, &features)?;
            println!("wrote {n} words × {dim} to {}", out.display());
            Ok(())
        }
        Command::Data(DataCmd::Wine { rows, seed, out }) => {
            wine_table(rows, seed)?.write_csv(&out)?;
            println!("wrote {rows} rows to {}", out.display());
            Ok(())
        }
    }
}

fn experiment(cmd: ExperimentCmd) -> Result<()> {
    match cmd {
        ExperimentCmd::Run { config, out, profile } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: ExperimentConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            if let Some(p) = profile {
                cfg = cfg.with_profile(p.into());
            }
            cfg.validate()?;
            let result = run_grid(&cfg)?;
            write_results(&result, &out)?;
            for cell in &result.cells {
                let last = cell.expected_reward.mean.len() - 1;
                println!(
                    "{:<16} final reward {:>8.3} ± {:.3}",
                    cell.cell.label(),
                    cell.expected_reward.mean[last],
                    cell.expected_reward.ci[last]
                );
            }
            println!("{:.1}s; results in {}", result.elapsed.as_secs_f64(), out.display());
            Ok(())
        }
        ExperimentCmd::PlotData { dir } => {
            if !dir.join("series.csv").exists() {
                bail!("{} has no series.csv", dir.display());
            }
            println!("{}", plot_data(&dir)?.display());
            Ok(())
        }
        ExperimentCmd::Template { profile } => {
            let cfg = ExperimentConfig::profile(profile.into(), seqteach::experiments::DatasetSource::words(2000, 7));
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    }
}
