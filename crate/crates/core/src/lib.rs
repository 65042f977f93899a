//! Decoding and length-correction toolkit for locally-normalized conditional
//! sequence models.
//!
//! The crate is organized bottom-up:
//!
//! - [`corpus`]: vocabularies, parallel corpora, synthetic task generation.
//! - [`model`]: the [`ConditionalModel`] abstraction and its concrete families.
//! - [`scoring`]: baseline, length-normalized, GNMT and word-reward scores.
//! - [`search`]: greedy, beam and exhaustive decoding.
//! - [`tuning`]: perceptron-style batch tuning of the word reward.
//! - [`evaluation`]: corpus BLEU, length reports, cumulative curves.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod evaluation;
pub mod model;
pub mod parallel;
pub mod scoring;
pub mod search;
pub mod tuning;

pub use corpus::{
    ParallelCorpus, SentencePair, SyntheticTask, SyntheticTaskConfig, TokenId, Vocabularies,
    Vocabulary, BOS, EOS, UNK,
};
pub use evaluation::{BleuScore, LengthReport};
pub use model::{AnyModel, ConditionalModel, LogDistribution, ModelError};
pub use scoring::{CorrectionTiming, Scorer, ScoringMode};
pub use search::{BeamTrace, DecodeResult, Hypothesis};
pub use tuning::{StopReason, TunerConfig, TunerState};
