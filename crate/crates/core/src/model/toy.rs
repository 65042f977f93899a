use serde::{Deserialize, Serialize};

use super::{ConditionalModel, LogDistribution, ModelError};
use crate::corpus::{ParallelCorpus, TokenId, Vocabularies, BOS, EOS};

/// Upper edges (inclusive) of the prefix-length buckets of the EOS model.
const LENGTH_BUCKETS: [usize; 4] = [0, 2, 5, 10];
const COVERAGE_BUCKETS: usize = 3;
/// Weight of the current source position in the coverage window; the next
/// position gets the rest.
const WINDOW_WEIGHT: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyParams {
    /// Weight of the source-coverage component against the target bigram.
    pub lambda: f64,
    /// Add-k smoothing constant.
    pub smoothing: f64,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            lambda: 0.7,
            smoothing: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ToyCounts {
    /// `bigram[prev * T + next]`, with `prev = BOS` at sentence start.
    bigram: Vec<u32>,
    /// `lexical[src * T + tgt]` over diagonal alignment windows.
    lexical: Vec<u32>,
    /// `(eos, total)` per (coverage bucket, length bucket).
    eos: Vec<(u32, u32)>,
    source_tokens: u64,
    target_tokens: u64,
}

/// Count-based toy translation model.
///
/// Word probabilities interpolate a source-coverage lexical component with
/// a target bigram; EOS is predicted from coarse coverage and length
/// buckets only, which is what lets it overestimate early stopping.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "ToyRepr", try_from = "ToyRepr")]
pub struct ToyTransducer {
    vocabs: Vocabularies,
    params: ToyParams,
    counts: ToyCounts,
    /// Mean target/source length ratio of the training data.
    ratio: f64,
    // derived tables, rebuilt on load
    bigram_prob: Vec<f64>,
    lexical_prob: Vec<f64>,
    eos_prob: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ToyRepr {
    vocabs: Vocabularies,
    params: ToyParams,
    counts: ToyCounts,
}

impl From<ToyTransducer> for ToyRepr {
    fn from(m: ToyTransducer) -> Self {
        Self {
            vocabs: m.vocabs,
            params: m.params,
            counts: m.counts,
        }
    }
}

impl TryFrom<ToyRepr> for ToyTransducer {
    type Error = ModelError;

    fn try_from(r: ToyRepr) -> Result<Self, Self::Error> {
        Self::from_counts(r.vocabs, r.params, r.counts)
    }
}

impl PartialEq for ToyTransducer {
    fn eq(&self, other: &Self) -> bool {
        self.vocabs == other.vocabs && self.params == other.params && self.counts == other.counts
    }
}

fn length_bucket(len: usize) -> usize {
    LENGTH_BUCKETS
        .iter()
        .position(|&edge| len <= edge)
        .unwrap_or(LENGTH_BUCKETS.len())
}

fn coverage_bucket(covered: f64) -> usize {
    if covered < 0.5 {
        0
    } else if covered < 1.0 {
        1
    } else {
        2
    }
}

fn eos_slot(covered: f64, len: usize) -> usize {
    coverage_bucket(covered) * (LENGTH_BUCKETS.len() + 1) + length_bucket(len)
}

/// Word ids a model may emit besides EOS.
fn is_word(id: usize) -> bool {
    id != BOS as usize && id != EOS as usize
}

impl ToyTransducer {
    /// Accumulates counts from `corpus`. Deterministic.
    pub fn train(
        corpus: &ParallelCorpus,
        vocabs: &Vocabularies,
        params: ToyParams,
    ) -> Result<Self, ModelError> {
        validate(&params)?;
        if corpus.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        let t = vocabs.target.len();
        let s = vocabs.source.len();
        let mut counts = ToyCounts {
            bigram: vec![0; t * t],
            lexical: vec![0; s * t],
            eos: vec![(0, 0); COVERAGE_BUCKETS * (LENGTH_BUCKETS.len() + 1)],
            source_tokens: 0,
            target_tokens: 0,
        };
        for pair in corpus.pairs() {
            counts.source_tokens += pair.source.len() as u64;
            counts.target_tokens += pair.target.len() as u64;
            let mut prev = BOS as usize;
            for &tok in &pair.target {
                counts.bigram[prev * t + tok as usize] += 1;
                prev = tok as usize;
            }
            // diagonal alignment: source position i covers target span
            // [i·r, (i+1)·r) with r the pair's own length ratio
            let (fs, es) = (pair.source.len(), pair.target.len());
            for (i, &src) in pair.source.iter().enumerate() {
                let lo = i * es / fs;
                let hi = ((i + 1) * es / fs).max(lo + 1).min(es);
                for &tgt in pair.target.get(lo..hi).unwrap_or(&[]) {
                    counts.lexical[src as usize * t + tgt as usize] += 1;
                }
            }
        }
        let ratio = ratio_of(&counts);
        for pair in corpus.pairs() {
            let es = pair.target.len();
            for pos in 0..=es {
                let covered = pos as f64 / (ratio * pair.source.len() as f64);
                let slot = &mut counts.eos[eos_slot(covered, pos)];
                slot.1 += 1;
                if pos == es {
                    slot.0 += 1;
                }
            }
        }
        Self::from_counts(vocabs.clone(), params, counts)
    }

    fn from_counts(
        vocabs: Vocabularies,
        params: ToyParams,
        counts: ToyCounts,
    ) -> Result<Self, ModelError> {
        validate(&params)?;
        let t = vocabs.target.len();
        let s = vocabs.source.len();
        if counts.bigram.len() != t * t
            || counts.lexical.len() != s * t
            || counts.eos.len() != COVERAGE_BUCKETS * (LENGTH_BUCKETS.len() + 1)
        {
            return Err(ModelError::Payload(
                "count tables do not match vocabulary".into(),
            ));
        }
        let k = params.smoothing;
        let words = (0..t).filter(|&i| is_word(i)).count() as f64;
        let smooth_rows = |table: &[u32], rows: usize| {
            let mut out = vec![0.0; rows * t];
            for r in 0..rows {
                let row = &table[r * t..(r + 1) * t];
                let total: f64 = (0..t).filter(|&i| is_word(i)).map(|i| row[i] as f64).sum();
                for i in (0..t).filter(|&i| is_word(i)) {
                    out[r * t + i] = (row[i] as f64 + k) / (total + k * words);
                }
            }
            out
        };
        let bigram_prob = smooth_rows(&counts.bigram, t);
        let lexical_prob = smooth_rows(&counts.lexical, s);
        let eos_prob = counts
            .eos
            .iter()
            .map(|&(e, n)| (e as f64 + k) / (n as f64 + 2.0 * k))
            .collect();
        Ok(Self {
            ratio: ratio_of(&counts),
            vocabs,
            params,
            counts,
            bigram_prob,
            lexical_prob,
            eos_prob,
        })
    }

    pub fn params(&self) -> ToyParams {
        self.params
    }

    /// Mean target/source length ratio seen in training.
    pub fn length_ratio(&self) -> f64 {
        self.ratio
    }
}

fn ratio_of(counts: &ToyCounts) -> f64 {
    if counts.source_tokens == 0 || counts.target_tokens == 0 {
        1.0
    } else {
        counts.target_tokens as f64 / counts.source_tokens as f64
    }
}

fn validate(params: &ToyParams) -> Result<(), ModelError> {
    if !(params.smoothing > 0.0) || !params.smoothing.is_finite() {
        return Err(ModelError::NonPositiveSmoothing);
    }
    if !(0.0..=1.0).contains(&params.lambda) {
        return Err(ModelError::BadLambda(params.lambda));
    }
    Ok(())
}

impl ConditionalModel for ToyTransducer {
    fn vocabularies(&self) -> &Vocabularies {
        &self.vocabs
    }

    fn log_distribution(&self, source: &[TokenId], prefix: &[TokenId]) -> LogDistribution {
        let t = self.vocabs.target.len();
        let s = self.vocabs.source.len();
        let m = prefix.len();
        let (covered, window) = if source.is_empty() {
            (1.0, [None, None])
        } else {
            let n = source.len();
            let pos = ((m as f64 / self.ratio).floor() as usize).min(n - 1);
            let next = (pos + 1 < n).then(|| source[pos + 1]);
            (
                m as f64 / (self.ratio * n as f64),
                [Some(source[pos]), next],
            )
        };
        let prev = prefix.last().copied().unwrap_or(BOS) as usize;
        let prev = if prev < t { prev } else { BOS as usize };
        let bigram = &self.bigram_prob[prev * t..(prev + 1) * t];
        let lex_row = |src: Option<TokenId>| {
            src.map(|x| x as usize)
                .filter(|&x| x < s)
                .map(|x| &self.lexical_prob[x * t..(x + 1) * t])
        };
        let (here, next) = (lex_row(window[0]), lex_row(window[1]));
        let lambda = self.params.lambda;
        let eos = self.eos_prob[eos_slot(covered, m)];

        let mut out = vec![f64::NEG_INFINITY; t];
        let uniform = 1.0 / (0..t).filter(|&i| is_word(i)).count().max(1) as f64;
        for i in (0..t).filter(|&i| is_word(i)) {
            let lexical = match (here, next) {
                (Some(h), Some(n)) => WINDOW_WEIGHT * h[i] + (1.0 - WINDOW_WEIGHT) * n[i],
                (Some(h), None) => h[i],
                _ => uniform,
            };
            let word = lambda * lexical + (1.0 - lambda) * bigram[i];
            out[i] = ((1.0 - eos) * word).ln();
        }
        out[EOS as usize] = eos.ln();
        LogDistribution::from_log_probs(out)
    }
}
