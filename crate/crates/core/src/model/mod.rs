//! Locally-normalized conditional models.
//!
//! A [`ConditionalModel`] maps `(source, target prefix)` to a normalized
//! log-distribution over the full target vocabulary, EOS included. Three
//! families are provided: explicit [`TableModel`]s, count-trained
//! [`ToyTransducer`]s and parametric [`BudgetModel`]s with a fixed
//! end-of-sentence budget.

mod budget;
mod persist;
mod table;
mod toy;

use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{TokenId, Vocabularies, Vocabulary, EOS};

pub use budget::{BudgetModel, BudgetParams};
pub use persist::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use table::TableModel;
pub use toy::{ToyParams, ToyTransducer};

/// Tolerance on `logsumexp(dist) = 0`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("prefix contains EOS at position {0}")]
    EosInPrefix(usize),
    #[error("target contains interior EOS at position {0}")]
    InteriorEos(usize),
    #[error("distribution for prefix `{prefix}` sums to {sum}, not 1")]
    NotNormalized { prefix: String, sum: f64 },
    #[error("model spec line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("not a model file")]
    NotAModelFile,
    #[error("unexpected end of model file")]
    UnexpectedEof,
    #[error("unsupported model file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model payload: {0}")]
    Payload(String),
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("smoothing constant must be positive")]
    NonPositiveSmoothing,
    #[error("interpolation weight must lie in [0, 1], got {0}")]
    BadLambda(f64),
    #[error("invalid budget model: {0}")]
    BadBudget(String),
}

/// Natural-log probabilities, one per target id.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDistribution(Vec<f64>);

impl LogDistribution {
    /// Wraps log-probabilities without checking normalization.
    pub fn from_log_probs(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// Takes logs of linear-domain probabilities.
    pub fn from_probs(probs: &[f64]) -> Self {
        Self(probs.iter().map(|p| p.ln()).collect())
    }

    pub fn get(&self, id: TokenId) -> f64 {
        self.0
            .get(id as usize)
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn log_sum_exp(&self) -> f64 {
        log_sum_exp(&self.0)
    }

    /// Checks `logsumexp = 0 ± 1e-6` and that no entry is positive.
    pub fn is_normalized(&self) -> bool {
        (self.log_sum_exp()).abs() <= NORMALIZATION_TOLERANCE
            && self.0.iter().all(|&v| v <= 1e-12 && !v.is_nan())
    }

    /// Id of the most probable entry; ties go to the smaller id.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best as TokenId
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// A model yielding `P(e_i | f, e_{1:i-1})`.
pub trait ConditionalModel: Send + Sync {
    fn vocabularies(&self) -> &Vocabularies;

    /// Next-token distribution. Callers guarantee `prefix` holds no EOS.
    fn log_distribution(&self, source: &[TokenId], prefix: &[TokenId]) -> LogDistribution;

    fn target_vocab(&self) -> &Vocabulary {
        &self.vocabularies().target
    }

    fn source_vocab(&self) -> &Vocabulary {
        &self.vocabularies().source
    }

    /// Checked form of [`log_distribution`](Self::log_distribution).
    fn next_logprobs(
        &self,
        source: &[TokenId],
        prefix: &[TokenId],
    ) -> Result<LogDistribution, ModelError> {
        if let Some(pos) = prefix.iter().position(|&t| t == EOS) {
            return Err(ModelError::EosInPrefix(pos));
        }
        Ok(self.log_distribution(source, prefix))
    }
}

/// `Σ log P(e_i | e_{<i})` plus the terminal EOS factor.
///
/// A single trailing EOS in `target` is accepted and ignored. Returns `-∞`
/// when any required step is impossible.
pub fn sequence_logprob<M: ConditionalModel + ?Sized>(
    model: &M,
    source: &[TokenId],
    target: &[TokenId],
) -> Result<f64, ModelError> {
    let target = target.strip_suffix(&[EOS]).unwrap_or(target);
    if let Some(pos) = target.iter().position(|&t| t == EOS) {
        return Err(ModelError::InteriorEos(pos));
    }
    let mut score = 0.0;
    for i in 0..target.len() {
        score += model.log_distribution(source, &target[..i]).get(target[i]);
    }
    score += model.log_distribution(source, target).get(EOS);
    Ok(score)
}

/// Any of the concrete model families, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyModel {
    Table(TableModel),
    Toy(ToyTransducer),
    Budget(BudgetModel),
}

impl ConditionalModel for AnyModel {
    fn vocabularies(&self) -> &Vocabularies {
        match self {
            Self::Table(m) => m.vocabularies(),
            Self::Toy(m) => m.vocabularies(),
            Self::Budget(m) => m.vocabularies(),
        }
    }

    fn log_distribution(&self, source: &[TokenId], prefix: &[TokenId]) -> LogDistribution {
        match self {
            Self::Table(m) => m.log_distribution(source, prefix),
            Self::Toy(m) => m.log_distribution(source, prefix),
            Self::Budget(m) => m.log_distribution(source, prefix),
        }
    }
}

impl From<TableModel> for AnyModel {
    fn from(m: TableModel) -> Self {
        Self::Table(m)
    }
}

impl From<ToyTransducer> for AnyModel {
    fn from(m: ToyTransducer) -> Self {
        Self::Toy(m)
    }
}

impl From<BudgetModel> for AnyModel {
    fn from(m: BudgetModel) -> Self {
        Self::Budget(m)
    }
}
