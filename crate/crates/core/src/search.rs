//! Greedy, beam and exhaustive decoding.
//!
//! Beam search follows the simplest variant: at every step each retained
//! incomplete hypothesis is expanded over the whole target vocabulary,
//! retained complete hypotheses are carried over unchanged, and the union
//! is cut back to the top `k` under the active [`Scorer`]. Complete
//! hypotheses therefore compete with partial ones for beam slots.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{TokenId, Vocabulary, BOS, EOS};
use crate::model::ConditionalModel;
use crate::parallel::map_ordered;
use crate::scoring::{rank_order, Scorer};

/// Default cap on sequences enumerated by [`exhaustive_decode`].
pub const DEFAULT_BUDGET_LIMIT: u64 = 2_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("exhaustive search needs {required} sequences but the budget allows {allowed}")]
    BudgetExceeded { required: u64, allowed: u64 },
    #[error("beam size must be at least 1")]
    ZeroBeam,
    #[error("max_len must be at least 1")]
    ZeroMaxLen,
}

/// A target prefix with its accumulated log-probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Output words, EOS excluded.
    pub tokens: Vec<TokenId>,
    /// Sum of consumed step log-probabilities, including EOS once complete.
    pub score: f64,
    pub complete: bool,
}

impl Hypothesis {
    fn empty() -> Self {
        Self {
            tokens: Vec::new(),
            score: 0.0,
            complete: false,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn corrected(&self, scorer: &Scorer) -> f64 {
        scorer.score(self.score, self.tokens.len(), self.complete)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceItem {
    pub tokens: Vec<TokenId>,
    pub base_score: f64,
    pub corrected_score: f64,
    pub complete: bool,
}

/// Per-step beam snapshots plus the fate of the empty hypothesis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeamTrace {
    /// Retained items after step `t + 1`, in rank order.
    pub steps: Vec<Vec<TraceItem>>,
    /// 1-based rank of the empty hypothesis among all candidates at each
    /// step, while it is still alive.
    pub empty_rank: Vec<Option<usize>>,
    /// Step at which the empty hypothesis was pruned, if it was.
    pub empty_pruned_at: Option<usize>,
}

impl BeamTrace {
    /// TSV with columns `step rank corrected_score base_score complete tokens`.
    pub fn to_tsv(&self, vocab: &Vocabulary) -> String {
        let mut out = String::from("step\trank\tcorrected_score\tbase_score\tcomplete\ttokens\n");
        for (t, items) in self.steps.iter().enumerate() {
            for (r, item) in items.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                    t + 1,
                    r + 1,
                    item.corrected_score,
                    item.base_score,
                    item.complete,
                    vocab.decode(&item.tokens)
                );
            }
        }
        out
    }

    /// Whether the empty hypothesis ever moved to a strictly better rank.
    pub fn empty_rank_improves(&self) -> bool {
        let ranks: Vec<usize> = self.empty_rank.iter().flatten().copied().collect();
        ranks.windows(2).any(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub steps: usize,
    /// Hypotheses expanded (model calls) or, for exhaustive search,
    /// sequences enumerated.
    pub expanded: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Complete hypotheses, best first.
    pub hypotheses: Vec<Hypothesis>,
    pub trace: Option<BeamTrace>,
    pub stats: DecodeStats,
}

impl DecodeResult {
    pub fn best(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }
}

/// `2·|f| + 5`.
pub fn default_max_len(source_len: usize) -> usize {
    2 * source_len + 5
}

fn rank_hyps(scorer: &Scorer, a: &Hypothesis, b: &Hypothesis) -> Ordering {
    rank_order(
        a.corrected(scorer),
        &a.tokens,
        b.corrected(scorer),
        &b.tokens,
    )
}

/// Picks the single best continuation (EOS included) at every step.
pub fn greedy_decode<M: ConditionalModel + ?Sized>(
    model: &M,
    scorer: &Scorer,
    source: &[TokenId],
    max_len: usize,
) -> DecodeResult {
    let mut hyp = Hypothesis::empty();
    let mut stats = DecodeStats::default();
    for t in 1..=max_len.max(1) {
        stats.steps = t;
        stats.expanded += 1;
        let dist = model.log_distribution(source, &hyp.tokens);
        let mut best: Option<(f64, TokenId)> = None;
        let mut scratch = hyp.tokens.clone();
        let mut best_tokens: Vec<TokenId> = Vec::new();
        for (tok, &lp) in dist.as_slice().iter().enumerate() {
            let tok = tok as TokenId;
            if lp == f64::NEG_INFINITY || tok == BOS {
                continue;
            }
            let score = hyp.score + lp;
            let complete = tok == EOS;
            if !complete {
                scratch.push(tok);
            }
            let corrected = scorer.score(score, scratch.len(), complete);
            let better = match best {
                None => true,
                Some((bs, _)) => rank_order(corrected, &scratch, bs, &best_tokens).is_lt(),
            };
            if better {
                best = Some((corrected, tok));
                best_tokens.clone_from(&scratch);
            }
            if !complete {
                scratch.pop();
            }
        }
        let Some((_, tok)) = best else {
            break;
        };
        hyp.score += dist.get(tok);
        if tok == EOS {
            hyp.complete = true;
            break;
        }
        hyp.tokens.push(tok);
    }
    if !hyp.complete {
        stats.expanded += 1;
        hyp.score += model.log_distribution(source, &hyp.tokens).get(EOS);
        hyp.complete = true;
    }
    DecodeResult {
        hypotheses: vec![hyp],
        trace: None,
        stats,
    }
}

/// A beam candidate that has not been materialized yet.
struct Candidate {
    parent: usize,
    /// `None` for a carried-over complete hypothesis.
    token: Option<TokenId>,
    score: f64,
    corrected: f64,
    len: usize,
    complete: bool,
}

fn candidate_tokens<'a>(beam: &'a [Hypothesis], c: &Candidate) -> (&'a [TokenId], Option<TokenId>) {
    let base = beam[c.parent].tokens.as_slice();
    match c.token {
        Some(t) if t != EOS => (base, Some(t)),
        _ => (base, None),
    }
}

/// Lexicographic comparison of `a ++ [x]` against `b ++ [y]`.
fn cmp_extended(a: (&[TokenId], Option<TokenId>), b: (&[TokenId], Option<TokenId>)) -> Ordering {
    let ia = a.0.iter().copied().chain(a.1);
    let ib = b.0.iter().copied().chain(b.1);
    ia.cmp(ib)
}

fn cmp_candidates(beam: &[Hypothesis], a: &Candidate, b: &Candidate) -> Ordering {
    b.corrected
        .total_cmp(&a.corrected)
        .then_with(|| a.len.cmp(&b.len))
        .then_with(|| cmp_extended(candidate_tokens(beam, a), candidate_tokens(beam, b)))
}

/// Beam search of width `k`; see the module docs for the step semantics.
pub fn beam_decode<M: ConditionalModel + ?Sized>(
    model: &M,
    scorer: &Scorer,
    source: &[TokenId],
    k: usize,
    max_len: usize,
    trace: bool,
) -> DecodeResult {
    let k = k.max(1);
    let max_len = max_len.max(1);
    let mut beam = vec![Hypothesis::empty()];
    let mut stats = DecodeStats::default();
    let mut tr = trace.then(BeamTrace::default);
    let mut empty_alive = true;

    for t in 1..=max_len {
        stats.steps = t;
        let mut cands: Vec<Candidate> = Vec::new();
        for (i, h) in beam.iter().enumerate() {
            if h.complete {
                cands.push(Candidate {
                    parent: i,
                    token: None,
                    score: h.score,
                    corrected: h.corrected(scorer),
                    len: h.len(),
                    complete: true,
                });
                continue;
            }
            stats.expanded += 1;
            let dist = model.log_distribution(source, &h.tokens);
            for (tok, &lp) in dist.as_slice().iter().enumerate() {
                let tok = tok as TokenId;
                if lp == f64::NEG_INFINITY || tok == BOS {
                    continue;
                }
                let complete = tok == EOS;
                let len = h.len() + usize::from(!complete);
                let score = h.score + lp;
                cands.push(Candidate {
                    parent: i,
                    token: Some(tok),
                    score,
                    corrected: scorer.score(score, len, complete),
                    len,
                    complete,
                });
            }
        }

        if empty_alive {
            match cands.iter().find(|c| c.complete && c.len == 0) {
                Some(e) => {
                    if let Some(tr) = tr.as_mut() {
                        let rank = 1 + cands
                            .iter()
                            .filter(|c| cmp_candidates(&beam, c, e).is_lt())
                            .count();
                        tr.empty_rank.push(Some(rank));
                    }
                }
                None => empty_alive = false,
            }
        }
        if !empty_alive {
            if let Some(tr) = tr.as_mut() {
                tr.empty_rank.push(None);
            }
        }

        if cands.len() > k {
            cands.select_nth_unstable_by(k - 1, |a, b| cmp_candidates(&beam, a, b));
            cands.truncate(k);
        }
        cands.sort_by(|a, b| cmp_candidates(&beam, a, b));

        let next: Vec<Hypothesis> = cands
            .iter()
            .map(|c| {
                let parent = &beam[c.parent];
                let mut tokens = parent.tokens.clone();
                if let Some(tok) = c.token.filter(|&x| x != EOS) {
                    tokens.push(tok);
                }
                Hypothesis {
                    tokens,
                    score: c.score,
                    complete: c.complete,
                }
            })
            .collect();
        beam = next;

        if empty_alive && !beam.iter().any(|h| h.complete && h.is_empty()) {
            empty_alive = false;
            if let Some(tr) = tr.as_mut() {
                tr.empty_pruned_at = Some(t);
            }
        }

        if t == max_len {
            for h in beam.iter_mut().filter(|h| !h.complete) {
                stats.expanded += 1;
                h.score += model.log_distribution(source, &h.tokens).get(EOS);
                h.complete = true;
            }
            beam.sort_by(|a, b| rank_hyps(scorer, a, b));
        }

        if let Some(tr) = tr.as_mut() {
            tr.steps.push(
                beam.iter()
                    .map(|h| TraceItem {
                        tokens: h.tokens.clone(),
                        base_score: h.score,
                        corrected_score: h.corrected(scorer),
                        complete: h.complete,
                    })
                    .collect(),
            );
        }

        if beam.iter().all(|h| h.complete) {
            break;
        }
    }

    DecodeResult {
        hypotheses: beam,
        trace: tr,
        stats,
    }
}

/// Number of word sequences of length `0..=max_len` over `words` symbols,
/// saturating.
pub fn sequence_count(words: u64, max_len: usize) -> u64 {
    let mut total: u64 = 0;
    let mut level: u64 = 1;
    for _ in 0..=max_len {
        total = total.saturating_add(level);
        level = level.saturating_mul(words);
    }
    total
}

/// Scores every complete sequence of length `<= max_len` and ranks them.
pub fn exhaustive_decode<M: ConditionalModel + ?Sized>(
    model: &M,
    scorer: &Scorer,
    source: &[TokenId],
    max_len: usize,
    budget_limit: u64,
) -> Result<DecodeResult, SearchError> {
    let words: Vec<TokenId> = (0..model.target_vocab().len() as TokenId)
        .filter(|&t| t != BOS && t != EOS)
        .collect();
    let required = sequence_count(words.len() as u64, max_len);
    if required > budget_limit {
        return Err(SearchError::BudgetExceeded {
            required,
            allowed: budget_limit,
        });
    }
    let mut out = Vec::with_capacity(required as usize);
    let mut prefix = Vec::with_capacity(max_len);
    enumerate(model, source, &words, max_len, &mut prefix, 0.0, &mut out);
    out.sort_by(|a, b| rank_hyps(scorer, a, b));
    Ok(DecodeResult {
        stats: DecodeStats {
            steps: max_len,
            expanded: out.len() as u64,
        },
        hypotheses: out,
        trace: None,
    })
}

fn enumerate<M: ConditionalModel + ?Sized>(
    model: &M,
    source: &[TokenId],
    words: &[TokenId],
    max_len: usize,
    prefix: &mut Vec<TokenId>,
    score: f64,
    out: &mut Vec<Hypothesis>,
) {
    if score == f64::NEG_INFINITY {
        // every extension stays impossible; skip the model calls
        push_impossible(words, max_len - prefix.len(), prefix, out);
        return;
    }
    let dist = model.log_distribution(source, prefix);
    out.push(Hypothesis {
        tokens: prefix.clone(),
        score: score + dist.get(EOS),
        complete: true,
    });
    if prefix.len() == max_len {
        return;
    }
    for &w in words {
        prefix.push(w);
        enumerate(
            model,
            source,
            words,
            max_len,
            prefix,
            score + dist.get(w),
            out,
        );
        prefix.pop();
    }
}

fn push_impossible(
    words: &[TokenId],
    remaining: usize,
    prefix: &mut Vec<TokenId>,
    out: &mut Vec<Hypothesis>,
) {
    out.push(Hypothesis {
        tokens: prefix.clone(),
        score: f64::NEG_INFINITY,
        complete: true,
    });
    if remaining == 0 {
        return;
    }
    for &w in words {
        prefix.push(w);
        push_impossible(words, remaining - 1, prefix, out);
        prefix.pop();
    }
}

/// How the maximum output length is chosen per sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxLen {
    Fixed(usize),
    /// `factor·|f| + slack`.
    Relative {
        factor: usize,
        slack: usize,
    },
}

impl Default for MaxLen {
    fn default() -> Self {
        Self::Relative {
            factor: 2,
            slack: 5,
        }
    }
}

impl MaxLen {
    pub fn for_source(self, source_len: usize) -> usize {
        match self {
            Self::Fixed(n) => n.max(1),
            Self::Relative { factor, slack } => (factor * source_len + slack).max(1),
        }
    }
}

/// Beam width and length policy for corpus decoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub beam: usize,
    pub max_len: MaxLen,
}

impl SearchConfig {
    pub fn beam(beam: usize) -> Self {
        Self {
            beam,
            max_len: MaxLen::default(),
        }
    }

    /// Decodes one sentence; beam 1 runs the greedy decoder.
    pub fn decode<M: ConditionalModel + ?Sized>(
        &self,
        model: &M,
        scorer: &Scorer,
        source: &[TokenId],
        trace: bool,
    ) -> DecodeResult {
        let max_len = self.max_len.for_source(source.len());
        if self.beam <= 1 && !trace {
            greedy_decode(model, scorer, source, max_len)
        } else {
            beam_decode(model, scorer, source, self.beam, max_len, trace)
        }
    }
}

/// Decodes every source sentence on `workers` threads and returns the best
/// hypothesis of each, in input order.
pub fn decode_corpus<M, S>(
    model: &M,
    scorer: &Scorer,
    sources: &[S],
    config: &SearchConfig,
    workers: usize,
) -> Vec<Hypothesis>
where
    M: ConditionalModel + ?Sized,
    S: AsRef<[TokenId]> + Sync,
{
    map_ordered(sources, workers, |src| {
        config
            .decode(model, scorer, src.as_ref(), false)
            .hypotheses
            .swap_remove(0)
    })
}
