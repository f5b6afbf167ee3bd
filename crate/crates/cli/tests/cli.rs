use std::path::Path;
use std::process::Command;

fn seqteach(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_seqteach")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "seqteach {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn experiment_run_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&seqteach(&["experiment", "template"])).unwrap();
    cfg["dataset"]["spec"]["n_words"] = 200.into();
    cfg["n_arms"] = 12.into();
    cfg["n_replicates"] = 3.into();
    cfg["steps"] = 4.into();
    cfg["n_samples"] = 100.into();
    cfg["pairs"] = serde_json::json!(["N-N", "P-P"]);
    let cfg_path = dir.path().join("config.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = dir.path().join("run");
    let stdout = seqteach(&["experiment", "run", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("N-N"), "{stdout}");
    let series = lines(&out.join("series.csv"));
    assert_eq!(series[0], "cell,step,metric,mean,ci,n");
    assert!(out.join("manifest.json").exists());
    assert!(out.join("traces").is_dir());

    seqteach(&["experiment", "plot-data", "--dir", out.to_str().unwrap()]);
    let plot = lines(&out.join("plot_data.csv"));
    assert!(plot[0].starts_with("cell,pairing,beta,horizon,step,metric,mean,lower,upper,n"));
    assert_eq!(plot.len(), series.len());
}

#[test]
fn alteach_writes_accuracy_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("al");
    seqteach(&["alteach", "run", "--dataset", "synthetic", "--horizon", "3", "--seeds", "4", "--out", out.to_str().unwrap()]);
    let rows = lines(&out.join("accuracy.csv"));
    assert_eq!(rows[0], "strategy,iteration,mean_accuracy,sd,n");
    // Two strategies, initial fit plus three iterations each.
    assert_eq!(rows.len(), 1 + 2 * 4);
    assert!(rows.iter().any(|r| r.starts_with("teacher_h3,3,")));
}

#[test]
fn wine_data_feeds_greedy_alteach() {
    let dir = tempfile::tempdir().unwrap();
    let wine = dir.path().join("wine.csv");
    seqteach(&["data", "wine", "--rows", "400", "--seed", "1", "--out", wine.to_str().unwrap()]);
    let out = dir.path().join("al");
    seqteach(&[
        "alteach", "run", "--dataset", wine.to_str().unwrap(), "--mode", "greedy", "--iterations", "5", "--pool", "100",
        "--seeds", "2", "--random", "--out", out.to_str().unwrap(),
    ]);
    let rows = lines(&out.join("accuracy.csv"));
    assert_eq!(rows.len(), 1 + 3 * 6);
    assert!(rows.iter().any(|r| r.starts_with("teacher_h1,5,")));
    assert!(rows.iter().any(|r| r.starts_with("random,0,")));
}

#[test]
fn words_csv_has_one_row_per_word() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("words.csv");
    seqteach(&["data", "words", "--n", "30", "--dim", "8", "--topics", "3", "--out", path.to_str().unwrap()]);
    let rows = lines(&path);
    assert_eq!(rows.len(), 30 + usize::from(rows[0].starts_with("name")));
    assert_eq!(rows.last().unwrap().split(',').count(), 9);
}

#[test]
fn bad_arguments_fail() {
    let out = Command::new(env!("CARGO_BIN_EXE_seqteach"))
        .args(["alteach", "run", "--mode", "sideways", "--out", "x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
