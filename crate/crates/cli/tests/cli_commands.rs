//! End-to-end runs of the `brevity` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use brevity_cli::ExperimentConfig;

const SMALL: &str = r#"
seed = 3

[data]
source_vocab_size = 12
target_vocab_size = 15
min_len = 2
max_len = 8
num_pairs = 150

[model]
kind = "toy"

[sweep]
beams = [1, 3]
modes = ["baseline", "norm", "gnmt:alpha=0.5", "reward"]
training_fractions = [0.5, 1.0]

[tuner]
max_epochs = 6
"#;

fn brevity(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brevity"))
        .current_dir(dir)
        .env_remove("BREVITY_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = brevity(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_project() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    ok(dir.path(), &["--config", "small.toml", "gen-data"]);
    ok(dir.path(), &["--config", "small.toml", "train"]);
    dir
}

#[test]
fn dumped_defaults_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["config", "--dump-defaults"]);
    assert_eq!(
        ExperimentConfig::from_toml(&text).unwrap(),
        ExperimentConfig::default()
    );
}

#[test]
fn unknown_config_key_is_named_in_a_one_line_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[decode]\nbeem_size = 3\n").unwrap();
    let out = brevity(dir.path(), &["--config", "bad.toml", "config"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains("beem_size"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn label_bias_demo_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["demo-label-bias"]);
    assert!(stdout.contains("ok\tgreedy returns \"a helicopter\""));
    assert!(dir.path().join("out/label_bias.txt").exists());
}

#[test]
fn zero_reward_decode_equals_baseline_decode() {
    let dir = small_project();
    let d = dir.path();
    ok(
        d,
        &[
            "decode",
            "--input",
            "data/test.src",
            "--beam",
            "4",
            "--output",
            "out/base.txt",
        ],
    );
    ok(
        d,
        &[
            "decode",
            "--input",
            "data/test.src",
            "--beam",
            "4",
            "--score",
            "reward:gamma=0",
            "--output",
            "out/r0.txt",
        ],
    );
    ok(
        d,
        &[
            "decode",
            "--input",
            "data/test.src",
            "--beam",
            "4",
            "--score",
            "gnmt:alpha=0",
            "--output",
            "out/g0.txt",
        ],
    );
    let base = fs::read(d.join("out/base.txt")).unwrap();
    assert!(!base.is_empty());
    assert_eq!(fs::read(d.join("out/r0.txt")).unwrap(), base);
    assert_eq!(fs::read(d.join("out/g0.txt")).unwrap(), base);
}

#[test]
fn tuned_reward_flows_into_decode_and_evaluate() {
    let dir = small_project();
    let d = dir.path();
    let summary = ok(d, &["--config", "small.toml", "tune", "--beam", "3"]);
    assert!(summary.starts_with("gamma = "), "{summary}");
    let gamma: f64 = fs::read_to_string(d.join("out/tuned_gamma.txt"))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    let report = fs::read_to_string(d.join("out/tune_report.tsv")).unwrap();
    assert!(report.starts_with("epoch\tgamma\t"));
    assert!(report.lines().skip(1).all(|l| l.ends_with("\t-")));

    let via_ref = ok(
        d,
        &[
            "--config",
            "small.toml",
            "decode",
            "--input",
            "data/test.src",
            "--score",
            "reward:gamma=@tuned",
            "--output",
            "out/a.txt",
        ],
    );
    let literal = format!("reward:gamma={gamma}");
    ok(
        d,
        &[
            "--config",
            "small.toml",
            "decode",
            "--input",
            "data/test.src",
            "--score",
            &literal,
            "--output",
            "out/b.txt",
        ],
    );
    assert!(via_ref.contains(&format!("gamma={gamma}")), "{via_ref}");
    assert_eq!(
        fs::read(d.join("out/a.txt")).unwrap(),
        fs::read(d.join("out/b.txt")).unwrap()
    );

    let eval = ok(
        d,
        &[
            "--config",
            "small.toml",
            "evaluate",
            "--hyp",
            "out/a.txt",
            "--ref",
            "data/test.tgt",
        ],
    );
    assert!(eval.starts_with("BLEU "), "{eval}");
    let tsv = fs::read_to_string(d.join("out/eval_report.tsv")).unwrap();
    for block in ["# summary", "# length_histogram", "# cumulative_bleu"] {
        assert!(tsv.contains(block), "{block} missing");
    }
}

#[test]
fn missing_tuned_gamma_is_an_error() {
    let dir = small_project();
    let out = brevity(
        dir.path(),
        &[
            "--config",
            "small.toml",
            "decode",
            "--input",
            "data/test.src",
            "--score",
            "reward:gamma=@tuned",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tuned_gamma.txt"));
}

#[test]
fn decode_trace_has_one_block_per_sentence() {
    let dir = small_project();
    let d = dir.path();
    ok(
        d,
        &[
            "decode",
            "--input",
            "data/dev.src",
            "--beam",
            "2",
            "--trace",
            "out/trace.tsv",
        ],
    );
    let trace = fs::read_to_string(d.join("out/trace.tsv")).unwrap();
    assert!(
        trace.starts_with("sentence\tstep\trank\tcorrected_score\tbase_score\tcomplete\ttokens\n")
    );
    let sentences = fs::read_to_string(d.join("data/dev.src"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count();
    let last: usize = trace
        .lines()
        .last()
        .unwrap()
        .split('\t')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(last, sentences);
}

#[test]
fn beam_sweep_covers_fractions_modes_and_beams() {
    let dir = small_project();
    let d = dir.path();
    let stdout = ok(
        d,
        &["--config", "small.toml", "--workers", "2", "sweep-beam"],
    );
    // 2 fractions x 4 modes x 2 beams
    assert_eq!(stdout.lines().count(), 16);
    let table = fs::read_to_string(d.join("out/sweep_beam.tsv")).unwrap();
    assert!(table.starts_with("fraction\tmode\tmetric\tk=1\tk=3\n"));
    assert!(table.contains("0.50\treward\tgamma\t"));
    assert!(table.contains("1.00\tgnmt:alpha=0.5\tbleu\t"));
    assert!(!table.contains("baseline\tgamma"));
}

#[test]
fn budget_demo_baseline_length_falls_with_every_beam() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["demo-budget"]);
    let rows = fs::read_to_string(d.join("out/baseline_beams.tsv")).unwrap();
    let ratios: Vec<f64> = rows
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 5);
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");

    // short references keep their BLEU at k=100 while the full set collapses
    let curve = fs::read_to_string(d.join("out/bleu_by_length.tsv")).unwrap();
    let header: Vec<&str> = curve.lines().next().unwrap().split('\t').collect();
    let col = header.iter().position(|h| *h == "baseline_k100").unwrap();
    let cell = |prefix: &str| -> f64 {
        let line = curve.lines().find(|l| l.starts_with(prefix)).unwrap();
        line.split('\t').nth(col).unwrap().parse().unwrap()
    };
    assert!(cell("10\t") > cell("inf\t"));

    let ranks = fs::read_to_string(d.join("out/empty_rank.tsv")).unwrap();
    assert!(ranks.starts_with("sentence\tsource_len\tstep\tempty_rank\n"));
}
