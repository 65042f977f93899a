//! Perceptron-style batch tuning of the word reward γ.
//!
//! With the expectation of the output length approximated by the length of
//! the 1-best output, the gradient of the globally-normalized loss with
//! respect to γ is `|ê| − |e*|`, which gives the update
//! `γ ← γ + η·(|e*| − |ê|)`. Updates here use the batch mean and are
//! clipped to `±clip`.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ParallelCorpus;
use crate::evaluation::{corpus_bleu, length_report};
use crate::model::ConditionalModel;
use crate::scoring::{CorrectionTiming, Scorer, ScoringMode};
use crate::search::{decode_corpus, Hypothesis, MaxLen, SearchConfig};

#[derive(Debug, Error, PartialEq)]
pub enum TuningError {
    #[error("development set is empty")]
    EmptyDev,
    #[error("invalid tuner config: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TunerConfig {
    pub initial_gamma: f64,
    pub learning_rate: f64,
    /// Bound on the magnitude of a single update.
    pub clip: f64,
    /// Stop once `|update| < tolerance`.
    pub tolerance: f64,
    pub max_epochs: usize,
    pub beam: usize,
    #[serde(skip)]
    pub max_len: MaxLen,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            initial_gamma: 0.2,
            learning_rate: 0.2,
            clip: 0.5,
            tolerance: 0.03,
            max_epochs: 25,
            beam: 10,
            max_len: MaxLen::default(),
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<(), TuningError> {
        if !(self.learning_rate > 0.0) {
            return Err(TuningError::BadConfig("learning rate must be positive"));
        }
        if !(self.clip > 0.0) {
            return Err(TuningError::BadConfig("clip must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(TuningError::BadConfig("tolerance must be positive"));
        }
        if self.max_epochs < 1 {
            return Err(TuningError::BadConfig("max epochs must be at least 1"));
        }
        if self.beam < 1 {
            return Err(TuningError::BadConfig("beam must be at least 1"));
        }
        if !self.initial_gamma.is_finite() {
            return Err(TuningError::BadConfig("initial gamma must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    MaxEpochs,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxEpochs => "max-epochs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// γ used to decode this epoch.
    pub gamma: f64,
    pub mean_ref_len: f64,
    pub mean_hyp_len: f64,
    /// `mean(|e*| − |ê|)`.
    pub raw_grad: f64,
    /// `clamp(η·raw_grad, ±clip)`.
    pub update: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerState {
    pub gamma: f64,
    pub history: Vec<EpochRecord>,
    pub stop_reason: Option<StopReason>,
}

impl TunerState {
    pub fn new(config: &TunerConfig) -> Self {
        Self {
            gamma: config.initial_gamma,
            history: Vec::new(),
            stop_reason: None,
        }
    }

    /// Applies one epoch given the summed reference and hypothesis lengths.
    ///
    /// Lengths are summed as integers so the result does not depend on the
    /// order in which sentences were decoded.
    pub fn step(
        &mut self,
        config: &TunerConfig,
        ref_total: usize,
        hyp_total: usize,
        sentences: usize,
        seconds: f64,
    ) -> f64 {
        let n = sentences as f64;
        let raw_grad = (ref_total as f64 - hyp_total as f64) / n;
        let update = (config.learning_rate * raw_grad).clamp(-config.clip, config.clip);
        self.history.push(EpochRecord {
            epoch: self.history.len() + 1,
            gamma: self.gamma,
            mean_ref_len: ref_total as f64 / n,
            mean_hyp_len: hyp_total as f64 / n,
            raw_grad,
            update,
            seconds,
        });
        self.gamma += update;
        if update.abs() < config.tolerance {
            self.stop_reason = Some(StopReason::Converged);
        } else if self.history.len() >= config.max_epochs {
            self.stop_reason = Some(StopReason::MaxEpochs);
        }
        update
    }

    pub fn is_done(&self) -> bool {
        self.stop_reason.is_some()
    }

    /// The last epoch's decode statistics.
    pub fn last(&self) -> Option<&EpochRecord> {
        self.history.last()
    }

    pub fn total_seconds(&self) -> f64 {
        self.history.iter().map(|e| e.seconds).sum()
    }

    /// TSV report: `epoch gamma mean_ref_len mean_hyp_len raw_grad update seconds`.
    ///
    /// With `with_timing = false` the seconds column is written as `-`, so
    /// reports from identical runs compare byte-equal.
    pub fn to_tsv(&self, with_timing: bool) -> String {
        let mut out =
            String::from("epoch\tgamma\tmean_ref_len\tmean_hyp_len\traw_grad\tupdate\tseconds\n");
        for e in &self.history {
            let secs = if with_timing {
                format!("{:.3}", e.seconds)
            } else {
                "-".to_string()
            };
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{:.4}\t{:.4}\t{:.6}\t{:.6}\t{}",
                e.epoch, e.gamma, e.mean_ref_len, e.mean_hyp_len, e.raw_grad, e.update, secs
            );
        }
        out
    }
}

/// Tunes γ on `dev` with the base model held fixed.
pub fn tune_word_reward<M: ConditionalModel + ?Sized>(
    model: &M,
    dev: &ParallelCorpus,
    config: &TunerConfig,
    workers: usize,
) -> Result<TunerState, TuningError> {
    config.validate()?;
    if dev.is_empty() {
        return Err(TuningError::EmptyDev);
    }
    let sources: Vec<&[u32]> = dev.sources().collect();
    let ref_total: usize = dev.targets().map(<[u32]>::len).sum();
    let search = SearchConfig {
        beam: config.beam,
        max_len: config.max_len,
    };
    let mut state = TunerState::new(config);
    while !state.is_done() {
        let start = Instant::now();
        let scorer = Scorer::new(
            ScoringMode::WordReward { gamma: state.gamma },
            CorrectionTiming::DuringSearch,
        );
        let hyps = decode_corpus(model, &scorer, &sources, &search, workers);
        let hyp_total: usize = hyps.iter().map(Hypothesis::len).sum();
        state.step(
            config,
            ref_total,
            hyp_total,
            dev.len(),
            start.elapsed().as_secs_f64(),
        );
    }
    Ok(state)
}

/// One row of a γ-sensitivity sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaPoint {
    pub gamma: f64,
    pub bleu: f64,
    pub length_ratio: f64,
}

/// Decodes `dev` once per γ and reports BLEU and length ratio.
pub fn evaluate_gamma_grid<M: ConditionalModel + ?Sized>(
    model: &M,
    dev: &ParallelCorpus,
    gammas: &[f64],
    search: &SearchConfig,
    workers: usize,
) -> Vec<GammaPoint> {
    let sources: Vec<&[u32]> = dev.sources().collect();
    let refs: Vec<&[u32]> = dev.targets().collect();
    let ref_lens: Vec<usize> = refs.iter().map(|r| r.len()).collect();
    gammas
        .iter()
        .map(|&gamma| {
            let scorer = Scorer::from(ScoringMode::WordReward { gamma });
            let hyps = decode_corpus(model, &scorer, &sources, search, workers);
            let toks: Vec<&[u32]> = hyps.iter().map(|h| h.tokens.as_slice()).collect();
            let lens: Vec<usize> = hyps.iter().map(Hypothesis::len).collect();
            let bleu = corpus_bleu(&toks, &refs, 4).expect("aligned by construction");
            let len = length_report(&lens, &ref_lens, crate::evaluation::DEFAULT_BIN_WIDTH)
                .expect("aligned by construction");
            GammaPoint {
                gamma,
                bleu: bleu.score,
                length_ratio: len.ratio,
            }
        })
        .collect()
}
