//! Corpus BLEU, length statistics and cumulative length curves.

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{hyps} hypotheses but {refs} references")]
    CountMismatch { hyps: usize, refs: usize },
    #[error("bin width must divide 1 evenly, got {0}")]
    BadBinWidth(f64),
    #[error("thresholds must be ascending")]
    UnsortedThresholds,
}

fn check_counts(h: usize, r: usize) -> Result<(), EvalError> {
    if h != r {
        return Err(EvalError::CountMismatch { hyps: h, refs: r });
    }
    Ok(())
}

/// Corpus-level BLEU with a single reference per sentence, unsmoothed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    /// In `[0, 1]`.
    pub score: f64,
    /// Modified n-gram precisions for orders `1..=max_order`.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub candidate_length: usize,
    pub reference_length: usize,
}

/// Clipped n-gram statistics accumulated over a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NgramStats {
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub candidate_length: usize,
    pub reference_length: usize,
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

impl NgramStats {
    pub fn new(max_order: usize) -> Self {
        Self {
            matches: vec![0; max_order],
            totals: vec![0; max_order],
            ..Default::default()
        }
    }

    pub fn add<T: Eq + Hash>(&mut self, hyp: &[T], reference: &[T]) {
        self.candidate_length += hyp.len();
        self.reference_length += reference.len();
        for n in 1..=self.matches.len() {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            self.totals[n - 1] += hyp.len().saturating_sub(n - 1) as u64;
            self.matches[n - 1] += h
                .iter()
                .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
                .sum::<u64>();
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.candidate_length += other.candidate_length;
        self.reference_length += other.reference_length;
    }

    pub fn bleu(&self) -> BleuScore {
        let precisions: Vec<f64> = self
            .matches
            .iter()
            .zip(&self.totals)
            .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
            .collect();
        let (c, r) = (self.candidate_length, self.reference_length);
        let brevity_penalty = if c == 0 {
            0.0
        } else if c > r {
            1.0
        } else {
            (1.0 - r as f64 / c as f64).exp()
        };
        let score = if precisions.contains(&0.0) {
            0.0
        } else {
            let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / precisions.len() as f64;
            brevity_penalty * mean_log.exp()
        };
        BleuScore {
            score,
            precisions,
            brevity_penalty,
            candidate_length: c,
            reference_length: r,
        }
    }
}

/// Corpus BLEU over aligned hypothesis/reference token sequences.
pub fn corpus_bleu<T, H, R>(
    hypotheses: &[H],
    references: &[R],
    max_order: usize,
) -> Result<BleuScore, EvalError>
where
    T: Eq + Hash,
    H: AsRef<[T]>,
    R: AsRef<[T]>,
{
    check_counts(hypotheses.len(), references.len())?;
    let mut stats = NgramStats::new(max_order);
    for (h, r) in hypotheses.iter().zip(references) {
        stats.add(h.as_ref(), r.as_ref());
    }
    Ok(stats.bleu())
}

/// Length statistics over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthReport {
    /// `Σ|ê| / Σ|e*|`.
    pub ratio: f64,
    /// Mean of per-sentence ratios over sentences with non-empty references.
    pub mean_sentence_ratio: f64,
    pub hypothesis_tokens: usize,
    pub reference_tokens: usize,
    pub sentences: usize,
    /// Fraction of hypotheses with no words.
    pub empty_fraction: f64,
    pub histogram: LengthHistogram,
    /// Sentences with empty references, left out of the histogram.
    pub excluded: usize,
}

/// Per-sentence length-ratio histogram.
///
/// Exact ratios 0 and 1 get their own bins; every other ratio falls in a
/// right-open interval of width `bin_width` on `[0, 2]` (the last interval
/// also holds 2 itself) or in the overflow bin above 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthHistogram {
    pub bin_width: f64,
    pub exact_zero: usize,
    pub exact_one: usize,
    pub intervals: Vec<usize>,
    pub overflow: usize,
}

impl LengthHistogram {
    pub fn total(&self) -> usize {
        self.exact_zero + self.exact_one + self.intervals.iter().sum::<usize>() + self.overflow
    }

    /// `(label, count)` rows, exact bins first.
    pub fn rows(&self) -> Vec<(String, usize)> {
        let mut rows = vec![
            ("=0.00".to_string(), self.exact_zero),
            ("=1.00".to_string(), self.exact_one),
        ];
        for (i, &c) in self.intervals.iter().enumerate() {
            let lo = i as f64 * self.bin_width;
            rows.push((format!("[{:.2},{:.2})", lo, lo + self.bin_width), c));
        }
        rows.push((">2.00".to_string(), self.overflow));
        rows
    }
}

pub const DEFAULT_BIN_WIDTH: f64 = 0.05;
const HISTOGRAM_MAX: usize = 2;

/// Length ratios and histogram for aligned hypothesis/reference lengths.
pub fn length_report(
    hypothesis_lengths: &[usize],
    reference_lengths: &[usize],
    bin_width: f64,
) -> Result<LengthReport, EvalError> {
    check_counts(hypothesis_lengths.len(), reference_lengths.len())?;
    let per_unit = (1.0 / bin_width).round();
    if !(bin_width > 0.0) || per_unit < 1.0 || ((1.0 / bin_width) - per_unit).abs() > 1e-9 {
        return Err(EvalError::BadBinWidth(bin_width));
    }
    let per_unit = per_unit as usize;
    let mut hist = LengthHistogram {
        bin_width,
        exact_zero: 0,
        exact_one: 0,
        intervals: vec![0; HISTOGRAM_MAX * per_unit],
        overflow: 0,
    };
    let mut excluded = 0;
    let mut ratio_sum = 0.0;
    for (&h, &r) in hypothesis_lengths.iter().zip(reference_lengths) {
        if r == 0 {
            excluded += 1;
            continue;
        }
        ratio_sum += h as f64 / r as f64;
        if h == 0 {
            hist.exact_zero += 1;
        } else if h == r {
            hist.exact_one += 1;
        } else if h > HISTOGRAM_MAX * r {
            hist.overflow += 1;
        } else {
            // integer bin index avoids floating-point edge errors
            let bin = (h * per_unit / r).min(hist.intervals.len() - 1);
            hist.intervals[bin] += 1;
        }
    }
    let hyp_total: usize = hypothesis_lengths.iter().sum();
    let ref_total: usize = reference_lengths.iter().sum();
    let n = hypothesis_lengths.len();
    let counted = n - excluded;
    Ok(LengthReport {
        ratio: if ref_total == 0 {
            0.0
        } else {
            hyp_total as f64 / ref_total as f64
        },
        mean_sentence_ratio: if counted == 0 {
            0.0
        } else {
            ratio_sum / counted as f64
        },
        hypothesis_tokens: hyp_total,
        reference_tokens: ref_total,
        sentences: n,
        empty_fraction: if n == 0 {
            0.0
        } else {
            hypothesis_lengths.iter().filter(|&&h| h == 0).count() as f64 / n as f64
        },
        histogram: hist,
        excluded,
    })
}

/// One point of a cumulative BLEU-by-reference-length curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    /// `None` is the unbounded threshold.
    pub max_reference_length: Option<usize>,
    pub sentences: usize,
    /// `None` when no sentence falls under the threshold.
    pub bleu: Option<BleuScore>,
}

/// BLEU over the pairs whose reference length is `<= T`, for each threshold.
pub fn cumulative_bleu_by_length<T, H, R>(
    hypotheses: &[H],
    references: &[R],
    thresholds: &[Option<usize>],
    max_order: usize,
) -> Result<Vec<CurvePoint>, EvalError>
where
    T: Eq + Hash,
    H: AsRef<[T]>,
    R: AsRef<[T]>,
{
    check_counts(hypotheses.len(), references.len())?;
    let key = |t: &Option<usize>| t.unwrap_or(usize::MAX);
    if thresholds.windows(2).any(|w| key(&w[0]) >= key(&w[1])) {
        return Err(EvalError::UnsortedThresholds);
    }
    Ok(thresholds
        .iter()
        .map(|&limit| {
            let mut stats = NgramStats::new(max_order);
            let mut sentences = 0;
            for (h, r) in hypotheses.iter().zip(references) {
                if limit.is_none_or(|l| r.as_ref().len() <= l) {
                    stats.add(h.as_ref(), r.as_ref());
                    sentences += 1;
                }
            }
            CurvePoint {
                max_reference_length: limit,
                sentences,
                bleu: (sentences > 0).then(|| stats.bleu()),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    fn bleu(h: &[&str], r: &[&str], order: usize) -> BleuScore {
        let h: Vec<Vec<&str>> = h.iter().map(|s| toks(s)).collect();
        let r: Vec<Vec<&str>> = r.iter().map(|s| toks(s)).collect();
        corpus_bleu(&h, &r, order).unwrap()
    }

    // Expected values below were computed with sacrebleu 2.x
    // (tokenize='none', smooth_method='none') before this module existed.

    #[test]
    fn cat_sat_example() {
        let b4 = bleu(&["the cat sat"], &["the cat sat down"], 4);
        assert_eq!(b4.score, 0.0);
        assert_eq!(b4.precisions, vec![1.0, 1.0, 1.0, 0.0]);
        let b3 = bleu(&["the cat sat"], &["the cat sat down"], 3);
        assert!((b3.score - 0.7165313105737896).abs() < 1e-9);
        assert!((b3.brevity_penalty - 0.7165313105737893).abs() < 1e-9);
    }

    #[test]
    fn matches_reference_values() {
        let b = bleu(&["a b c d e", "x y z"], &["a b c d e f", "x y w z"], 4);
        assert!((b.score - 0.6924626985290342).abs() < 1e-9);
        let b = bleu(
            &["a b c d e", "x y z w v u"],
            &["a b c d e f", "x y w z"],
            4,
        );
        assert!((b.score - 0.528341994469057).abs() < 1e-9);
        let b = bleu(
            &["the the the the the the the", "a b c d"],
            &["the cat is on the mat", "a b c d e"],
            2,
        );
        assert!((b.score - 0.42640143271122083).abs() < 1e-9);
    }

    #[test]
    fn identical_and_empty() {
        let refs = ["a b c d", "a b c d e f g"];
        assert!((bleu(&refs, &refs, 4).score - 1.0).abs() < 1e-12);
        let b = bleu(&["", ""], &refs, 4);
        assert_eq!(b.score, 0.0);
        assert_eq!(b.brevity_penalty, 0.0);
    }

    #[test]
    fn count_mismatch() {
        let h: Vec<Vec<u32>> = vec![vec![1]];
        let r: Vec<Vec<u32>> = vec![];
        assert!(matches!(
            corpus_bleu(&h, &r, 4),
            Err(EvalError::CountMismatch { hyps: 1, refs: 0 })
        ));
    }

    #[test]
    fn length_report_examples() {
        let r = length_report(&[3, 4], &[3, 4], 0.05).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.histogram.exact_one, 2);
        let r = length_report(&[0, 0], &[3, 4], 0.05).unwrap();
        assert_eq!(r.ratio, 0.0);
        assert_eq!(r.histogram.exact_zero, 2);
        assert_eq!(r.empty_fraction, 1.0);
        let r = length_report(&[3, 9], &[6, 6], 0.05).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.histogram.intervals[10], 1);
        assert_eq!(r.histogram.intervals[30], 1);
        assert_eq!(r.mean_sentence_ratio, 1.0);
    }

    #[test]
    fn histogram_edges_and_exclusions() {
        // 3/20 = 0.15 exactly: must land in [0.15, 0.20)
        let r = length_report(&[3, 40, 41, 5], &[20, 20, 20, 0], 0.05).unwrap();
        assert_eq!(r.histogram.intervals[3], 1);
        assert_eq!(r.histogram.intervals[39], 1);
        assert_eq!(r.histogram.overflow, 1);
        assert_eq!(r.excluded, 1);
        assert_eq!(r.histogram.total() + r.excluded, 4);
        assert_eq!(r.reference_tokens, 60);
        assert!(length_report(&[1], &[1], 0.3).is_err());
    }

    #[test]
    fn cumulative_curve() {
        let h = vec![toks("a b c d e f g h"), toks("x y")];
        let r = vec![toks("a b c d e f g h"), toks("x y")];
        let full = corpus_bleu(&h, &r, 4).unwrap();
        let pts = cumulative_bleu_by_length(&h, &r, &[None], 4).unwrap();
        assert_eq!(pts[0].bleu.as_ref(), Some(&full));

        let h = vec![toks("a b c d e f g h")];
        let r = vec![toks("a b c d e f g i")];
        let pts = cumulative_bleu_by_length(&h, &r, &[Some(5), Some(10)], 4).unwrap();
        assert!(pts[0].bleu.is_none());
        assert_eq!(pts[1].bleu, Some(corpus_bleu(&h, &r, 4).unwrap()));
        assert!(cumulative_bleu_by_length(&h, &r, &[Some(10), Some(5)], 4).is_err());
    }
}
