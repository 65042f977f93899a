//! Self-contained demonstrations: label bias on the three-word table model
//! and the brevity/beam problem on the budget model.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use brevity::model::{save_model, BudgetModel, TableModel};
use brevity::parallel::map_ordered;
use brevity::search::{
    beam_decode, default_max_len, exhaustive_decode, greedy_decode, DEFAULT_BUDGET_LIMIT,
};
use brevity::tuning::{tune_word_reward, StopReason, TunerState};
use brevity::{AnyModel, ConditionalModel, Scorer, ScoringMode, TokenId};

use crate::commands::{decode_and_evaluate, gamma_file_contents, timing_tsv, write_file, Runner};
use crate::config::DataConfig;
use crate::data;
use crate::report::{curve_table, f6, histogram_table, Evaluation};

const LOG_TOLERANCE: f64 = 1e-12;

/// Outcome of `demo-label-bias`.
#[derive(Debug, Clone)]
pub struct LabelBiasReport {
    pub text: String,
    /// `(description, passed)` for each expected result.
    pub checks: Vec<(String, bool)>,
}

impl LabelBiasReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn check(checks: &mut Vec<(String, bool)>, what: String, ok: bool) {
    checks.push((what, ok));
}

/// Runs exhaustive, greedy and beam-2 search on the three-word table model.
pub fn label_bias() -> LabelBiasReport {
    let model = TableModel::figure1();
    let vocab = model.target_vocab();
    let baseline = Scorer::from(ScoringMode::Baseline);
    let max_len = default_max_len(0);
    let mut text = String::new();
    let mut checks = Vec::new();

    let all = exhaustive_decode(&model, &baseline, &[], max_len, DEFAULT_BUDGET_LIMIT)
        .expect("the table model is small enough to enumerate");
    text.push_str("# exhaustive ranking\nrank\tprobability\tlog_probability\ttranslation\n");
    for (i, h) in all
        .hypotheses
        .iter()
        .filter(|h| h.score.is_finite())
        .enumerate()
    {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}",
            i + 1,
            f6(h.score.exp()),
            f6(h.score),
            vocab.decode(&h.tokens)
        );
    }
    let best = all.best();
    check(
        &mut checks,
        format!(
            "exhaustive best is \"an autogyro\" with p = 0.4 (got \"{}\")",
            vocab.decode(&best.tokens)
        ),
        vocab.decode(&best.tokens) == "an autogyro"
            && (best.score - 0.4f64.ln()).abs() <= LOG_TOLERANCE,
    );

    let greedy = greedy_decode(&model, &baseline, &[], max_len);
    let g = greedy.best();
    let _ = writeln!(
        text,
        "\n# greedy\nprobability\tlog_probability\ttranslation\n{}\t{}\t{}",
        f6(g.score.exp()),
        f6(g.score),
        vocab.decode(&g.tokens)
    );
    check(
        &mut checks,
        format!(
            "greedy returns \"a helicopter\" with p = 0.36 (got \"{}\")",
            vocab.decode(&g.tokens)
        ),
        vocab.decode(&g.tokens) == "a helicopter"
            && (g.score - 0.36f64.ln()).abs() <= LOG_TOLERANCE,
    );

    let beam = beam_decode(&model, &baseline, &[], 2, max_len, true);
    text.push_str("\n# beam-2 trace\n");
    text.push_str(&beam.trace.as_ref().expect("trace requested").to_tsv(vocab));
    let b = beam.best();
    check(
        &mut checks,
        format!(
            "beam-2 returns \"an autogyro\" (got \"{}\")",
            vocab.decode(&b.tokens)
        ),
        vocab.decode(&b.tokens) == "an autogyro" && (b.score - 0.4f64.ln()).abs() <= LOG_TOLERANCE,
    );

    text.push_str("\n# checks\n");
    for (what, ok) in &checks {
        let _ = writeln!(text, "{}\t{what}", if *ok { "ok" } else { "FAILED" });
    }
    LabelBiasReport { text, checks }
}

/// Writes the label-bias report and fails if any expected result differs.
pub fn run_label_bias(runner: &Runner) -> Result<LabelBiasReport> {
    let report = label_bias();
    write_file(&runner.out_dir().join("label_bias.txt"), &report.text)?;
    if !report.passed() {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(w, _)| w.as_str())
            .collect();
        bail!("label-bias demo check failed: {}", failed.join("; "));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub beam: usize,
    pub bleu: f64,
    pub length_ratio: f64,
    pub mean_sentence_ratio: f64,
    pub empty_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardRow {
    pub beam: usize,
    pub gamma: f64,
    pub stop_reason: StopReason,
    pub epochs: usize,
    /// `mean|ê| − mean|e*|` on dev in the last tuning epoch.
    pub final_dev_gap: f64,
    pub bleu: f64,
    pub length_ratio: f64,
    pub empty_fraction: f64,
}

/// Outcome of `demo-budget`.
#[derive(Debug, Clone)]
pub struct BudgetDemo {
    pub baseline: Vec<BaselineRow>,
    pub reward: Vec<RewardRow>,
    pub tuning: Vec<TunerState>,
    /// Test sentences (0-based) whose empty hypothesis moved up the beam.
    pub empty_rank_improved: Vec<usize>,
    pub traced_sentence: Option<usize>,
}

pub const BUDGET_REPORTS: [&str; 6] = [
    "baseline_beams.tsv",
    "reward_beams.tsv",
    "empty_rank.tsv",
    "beam_trace.tsv",
    "length_histogram.tsv",
    "bleu_by_length.tsv",
];

fn baseline_row(beam: usize, eval: &Evaluation) -> BaselineRow {
    BaselineRow {
        beam,
        bleu: crate::report::bleu100(&eval.bleu),
        length_ratio: eval.length.ratio,
        mean_sentence_ratio: eval.length.mean_sentence_ratio,
        empty_fraction: eval.length.empty_fraction,
    }
}

/// Generates the demo corpus and budget model under the output directory,
/// then decodes with the baseline and with a tuned word reward at every
/// configured beam size.
pub fn run_budget(runner: &Runner) -> Result<BudgetDemo> {
    let config = &runner.config;
    let out = runner.out_dir().to_path_buf();
    let mut local = runner.clone();
    local.config.paths.data_dir = out.join("data");
    let data_config = DataConfig::budget_demo();
    let (task, data) = data::generate(&data_config, config.seed)?;
    data::write_dataset(
        local.data_dir(),
        &task,
        &data,
        &data_config.task(config.seed).header(),
    )?;
    let model: AnyModel = BudgetModel::for_task(&task, config.model.budget, config.seed)?.into();
    save_model(&model, &out.join("model.bin"))?;

    let beams = &config.sweep.beams;
    let baseline = Scorer::new(ScoringMode::Baseline, config.decode.correction);
    let mut hist_cols = Vec::new();
    let mut curve_cols = Vec::new();

    let mut baseline_rows = Vec::new();
    for &beam in beams {
        let search = config.decode.search(beam);
        let (_, eval) = decode_and_evaluate(
            &model,
            &baseline,
            &data.test,
            &search,
            config,
            runner.workers,
        )?;
        baseline_rows.push(baseline_row(beam, &eval));
        hist_cols.push((format!("baseline_k{beam}"), eval.length.histogram.clone()));
        curve_cols.push((format!("baseline_k{beam}"), eval.curve.clone()));
    }

    // empty-hypothesis rank at the widest beam
    let widest = *beams.last().context("no beam sizes configured")?;
    let sources: Vec<&[TokenId]> = data.test.sources().collect();
    let traces = map_ordered(&sources, runner.workers, |src| {
        beam_decode(
            &model,
            &baseline,
            src,
            widest,
            config.decode.max_len().for_source(src.len()),
            true,
        )
    });
    let mut rank_tsv = String::from("sentence\tsource_len\tstep\tempty_rank\n");
    let mut improved = Vec::new();
    for (i, r) in traces.iter().enumerate() {
        let trace = r.trace.as_ref().expect("trace requested");
        for (t, rank) in trace.empty_rank.iter().enumerate() {
            let cell = rank.map_or_else(|| "-".to_string(), |r| r.to_string());
            let _ = writeln!(
                rank_tsv,
                "{}\t{}\t{}\t{cell}",
                i + 1,
                sources[i].len(),
                t + 1
            );
        }
        if trace.empty_rank_improves() {
            improved.push(i);
        }
    }
    let traced = improved
        .iter()
        .copied()
        .find(|&i| traces[i].best().is_empty())
        .or(improved.first().copied());
    let trace_tsv = match traced {
        Some(i) => traces[i]
            .trace
            .as_ref()
            .expect("trace requested")
            .to_tsv(&model.vocabularies().target),
        None => String::from("step\trank\tcorrected_score\tbase_score\tcomplete\ttokens\n"),
    };

    let mut reward_rows = Vec::new();
    let mut tuning = Vec::new();
    let mut timing = String::new();
    for &beam in beams {
        let state = tune_word_reward(&model, &data.dev, &config.tuner(Some(beam)), runner.workers)?;
        write_file(&out.join(format!("tune_k{beam}.tsv")), &state.to_tsv(false))?;
        write_file(
            &out.join(format!("tuned_gamma_k{beam}.txt")),
            &gamma_file_contents(state.gamma),
        )?;
        let _ = write!(timing, "# beam {beam}\n{}", timing_tsv(&state));
        let scorer = Scorer::new(
            ScoringMode::WordReward { gamma: state.gamma },
            config.decode.correction,
        );
        let (_, eval) = decode_and_evaluate(
            &model,
            &scorer,
            &data.test,
            &config.decode.search(beam),
            config,
            runner.workers,
        )?;
        let last = state.last().context("tuner ran no epochs")?;
        reward_rows.push(RewardRow {
            beam,
            gamma: state.gamma,
            stop_reason: state.stop_reason.unwrap_or(StopReason::MaxEpochs),
            epochs: state.history.len(),
            final_dev_gap: last.mean_hyp_len - last.mean_ref_len,
            bleu: crate::report::bleu100(&eval.bleu),
            length_ratio: eval.length.ratio,
            empty_fraction: eval.length.empty_fraction,
        });
        hist_cols.push((format!("reward_k{beam}"), eval.length.histogram.clone()));
        curve_cols.push((format!("reward_k{beam}"), eval.curve.clone()));
        tuning.push(state);
    }

    let mut base_tsv =
        String::from("beam\tbleu\tlength_ratio\tmean_sentence_length_ratio\tempty_fraction\n");
    for r in &baseline_rows {
        let _ = writeln!(
            base_tsv,
            "{}\t{}\t{}\t{}\t{}",
            r.beam,
            f6(r.bleu),
            f6(r.length_ratio),
            f6(r.mean_sentence_ratio),
            f6(r.empty_fraction)
        );
    }
    let mut reward_tsv = String::from(
        "beam\tgamma\tstop_reason\tepochs\tfinal_dev_gap\tbleu\tlength_ratio\tempty_fraction\n",
    );
    for r in &reward_rows {
        let _ = writeln!(
            reward_tsv,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.beam,
            f6(r.gamma),
            r.stop_reason.as_str(),
            r.epochs,
            f6(r.final_dev_gap),
            f6(r.bleu),
            f6(r.length_ratio),
            f6(r.empty_fraction)
        );
    }
    let hist_refs: Vec<(&str, &_)> = hist_cols.iter().map(|(n, h)| (n.as_str(), h)).collect();
    let curve_refs: Vec<(&str, &[_])> = curve_cols
        .iter()
        .map(|(n, c)| (n.as_str(), c.as_slice()))
        .collect();
    let files = [
        base_tsv,
        reward_tsv,
        rank_tsv,
        trace_tsv,
        histogram_table(&hist_refs),
        curve_table(&curve_refs),
    ];
    for (name, contents) in BUDGET_REPORTS.iter().zip(&files) {
        write_file(&out.join(name), contents)?;
    }
    write_file(&out.join("tune_timing.tsv"), &timing)?;

    Ok(BudgetDemo {
        baseline: baseline_rows,
        reward: reward_rows,
        tuning,
        empty_rank_improved: improved,
        traced_sentence: traced,
    })
}
