use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ConditionalModel, LogDistribution, ModelError};
use crate::corpus::{SyntheticTask, TokenId, Vocabularies, BOS, EOS};

/// Parameters of a [`BudgetModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetParams {
    /// Mass on the expected next gloss word(s).
    pub word_mass: f64,
    /// Range of per-type propensities for emitting the optional second gloss token.
    pub second_min: f64,
    pub second_max: f64,
    /// EOS mass at every step while the source is not yet covered (geometric centre).
    pub eos_budget: f64,
    /// Per-sentence spread of the EOS budget, as a factor `exp(±spread)`.
    pub budget_spread: f64,
    /// EOS mass once the source is covered.
    pub eos_covered: f64,
    /// Zipf exponent of the distractor distribution.
    pub zipf: f64,
    /// Fraction of source types whose believed primary gloss is wrong.
    pub error_rate: f64,
}

impl Default for BudgetParams {
    fn default() -> Self {
        Self {
            word_mass: 0.6,
            second_min: 0.15,
            second_max: 0.65,
            eos_budget: 0.002,
            budget_spread: 1.0,
            eos_covered: 0.8,
            zipf: 1.0,
            error_rate: 0.15,
        }
    }
}

impl BudgetParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::BadBudget(m.to_string()));
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.word_mass) || !unit(self.eos_covered) || !unit(self.eos_budget) {
            return bad("masses must lie strictly inside (0, 1)");
        }
        if !(0.0 < self.second_min && self.second_min <= self.second_max && self.second_max < 1.0) {
            return bad("second-token propensities must satisfy 0 < min <= max < 1");
        }
        if !(self.budget_spread >= 0.0) || !self.zipf.is_finite() || self.zipf < 0.0 {
            return bad("spread and zipf exponent must be finite and non-negative");
        }
        if self.word_mass + self.eos_budget * self.budget_spread.exp() >= 1.0 {
            return bad("word mass plus largest EOS budget must stay below 1");
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return bad("error rate must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Position of a prefix relative to the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    /// Next to emit: primary gloss of source position `j`.
    Fresh(usize),
    /// Primary gloss of `j` emitted; optional second token or move on.
    AfterFirst(usize),
    Covered,
}

/// A constructed word-by-word translation model with an EOS budget.
///
/// The model knows a (partly wrong) gloss table for the source language.
/// While source words remain untranslated it assigns the same EOS mass
/// `c_f` at every step, where `c_f` is a per-sentence constant. The empty
/// output therefore always scores `log c_f`, a floor under which no longer
/// hypothesis can fall without losing to it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "BudgetRepr", try_from = "BudgetRepr")]
pub struct BudgetModel {
    vocabs: Vocabularies,
    params: BudgetParams,
    /// Believed gloss per source id (`None` for sentinels).
    beliefs: Vec<Option<[TokenId; 2]>>,
    /// Probability of the optional second gloss token per source id.
    second: Vec<f64>,
    words: Vec<TokenId>,
    zipf_weights: Vec<f64>,
    zipf_prefix: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BudgetRepr {
    vocabs: Vocabularies,
    params: BudgetParams,
    beliefs: Vec<Option<[TokenId; 2]>>,
    second: Vec<f64>,
}

impl From<BudgetModel> for BudgetRepr {
    fn from(m: BudgetModel) -> Self {
        Self {
            vocabs: m.vocabs,
            params: m.params,
            beliefs: m.beliefs,
            second: m.second,
        }
    }
}

impl TryFrom<BudgetRepr> for BudgetModel {
    type Error = ModelError;

    fn try_from(r: BudgetRepr) -> Result<Self, Self::Error> {
        Self::from_parts(r.vocabs, r.params, r.beliefs, r.second)
    }
}

impl PartialEq for BudgetModel {
    fn eq(&self, other: &Self) -> bool {
        self.vocabs == other.vocabs
            && self.params == other.params
            && self.beliefs == other.beliefs
            && self.second == other.second
    }
}

/// FNV-1a over token ids; portable and order-sensitive.
fn fnv(ids: &[TokenId]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &id in ids {
        for b in id.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

impl BudgetModel {
    /// Builds the model's beliefs from the gloss table of a synthetic task.
    pub fn for_task(
        task: &SyntheticTask,
        params: BudgetParams,
        seed: u64,
    ) -> Result<Self, ModelError> {
        Self::from_glosses(task.vocabs.clone(), &task.glosses, params, seed)
    }

    /// Builds the model from a source-id to two-token gloss table.
    pub fn from_glosses(
        vocabs: Vocabularies,
        glosses: &HashMap<TokenId, [TokenId; 2]>,
        params: BudgetParams,
        seed: u64,
    ) -> Result<Self, ModelError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_src = vocabs.source.len();
        let words: Vec<TokenId> = (0..vocabs.target.len() as TokenId)
            .filter(|&i| i != BOS && i != EOS)
            .collect();
        let mut beliefs = vec![None; n_src];
        let mut second = vec![0.0; n_src];
        // propensities are evenly spaced over [min, max] and dealt to the
        // glossed types in a seeded order
        let mut glossed: Vec<TokenId> = (0..n_src as TokenId)
            .filter(|s| glosses.contains_key(s))
            .collect();
        glossed.shuffle(&mut rng);
        let spacing = (params.second_max - params.second_min) / glossed.len().max(1) as f64;
        for (rank, &src) in glossed.iter().enumerate() {
            second[src as usize] = params.second_min + (rank as f64 + 0.5) * spacing;
        }
        for src in 0..n_src as TokenId {
            let Some(&[g1, g2]) = glosses.get(&src) else {
                continue;
            };
            let wrong = rng.gen::<f64>() < params.error_rate;
            let pick = rng.gen_range(0..words.len() as u32) as usize;
            let believed = if wrong && words[pick] != g1 {
                words[pick]
            } else {
                g1
            };
            beliefs[src as usize] = Some([believed, g2]);
        }
        Self::from_parts(vocabs, params, beliefs, second)
    }

    fn from_parts(
        vocabs: Vocabularies,
        params: BudgetParams,
        beliefs: Vec<Option<[TokenId; 2]>>,
        second: Vec<f64>,
    ) -> Result<Self, ModelError> {
        params.validate()?;
        let t = vocabs.target.len() as TokenId;
        if beliefs.len() != vocabs.source.len() || second.len() != beliefs.len() {
            return Err(ModelError::BadBudget(
                "belief table does not match vocabulary".into(),
            ));
        }
        if beliefs
            .iter()
            .flatten()
            .flatten()
            .any(|&g| g >= t || g == BOS || g == EOS)
        {
            return Err(ModelError::BadBudget(
                "gloss outside target vocabulary".into(),
            ));
        }
        if second.iter().any(|&p| !(0.0..1.0).contains(&p)) {
            return Err(ModelError::BadBudget(
                "second-token propensity out of range".into(),
            ));
        }
        let words: Vec<TokenId> = (0..t).filter(|&i| i != BOS && i != EOS).collect();
        if words.len() < 3 {
            return Err(ModelError::BadBudget(
                "need at least three target words".into(),
            ));
        }
        let zipf_weights: Vec<f64> = (0..words.len())
            .map(|r| 1.0 / ((r + 1) as f64).powf(params.zipf))
            .collect();
        let mut zipf_prefix = Vec::with_capacity(words.len() + 1);
        zipf_prefix.push(0.0);
        for w in &zipf_weights {
            zipf_prefix.push(zipf_prefix.last().unwrap() + w);
        }
        Ok(Self {
            vocabs,
            params,
            beliefs,
            second,
            words,
            zipf_weights,
            zipf_prefix,
        })
    }

    pub fn params(&self) -> BudgetParams {
        self.params
    }

    /// The constant EOS mass used for `source` while it is uncovered.
    pub fn eos_budget(&self, source: &[TokenId]) -> f64 {
        let u = (fnv(source) >> 11) as f64 / (1u64 << 53) as f64;
        self.params.eos_budget * (self.params.budget_spread * (2.0 * u - 1.0)).exp()
    }

    fn gloss(&self, src: TokenId) -> [TokenId; 2] {
        self.beliefs
            .get(src as usize)
            .copied()
            .flatten()
            .unwrap_or([crate::corpus::UNK; 2])
    }

    fn propensity(&self, src: TokenId) -> f64 {
        self.second
            .get(src as usize)
            .copied()
            .unwrap_or(self.params.second_min)
    }

    fn state(&self, source: &[TokenId], prefix: &[TokenId]) -> State {
        let n = source.len();
        if n == 0 {
            return State::Covered;
        }
        let mut state = State::Fresh(0);
        for &tok in prefix {
            state = match state {
                State::Fresh(j) => State::AfterFirst(j),
                State::AfterFirst(j) if j + 1 == n => State::Covered,
                State::AfterFirst(j) => {
                    let second = self.gloss(source[j])[1];
                    let next_first = self.gloss(source[j + 1])[0];
                    if tok == second && tok != next_first {
                        State::Fresh(j + 1)
                    } else {
                        State::AfterFirst(j + 1)
                    }
                }
                State::Covered => State::Covered,
            };
        }
        state
    }
}

impl ConditionalModel for BudgetModel {
    fn vocabularies(&self) -> &Vocabularies {
        &self.vocabs
    }

    fn log_distribution(&self, source: &[TokenId], prefix: &[TokenId]) -> LogDistribution {
        let p = &self.params;
        let budget = self.eos_budget(source);
        let mut named: [(TokenId, f64); 2] = [(EOS, 0.0); 2];
        let eos = match self.state(source, prefix) {
            State::Fresh(j) => {
                named[0] = (self.gloss(source[j])[0], p.word_mass);
                budget
            }
            State::AfterFirst(j) => {
                let pi = self.propensity(source[j]);
                named[0] = (self.gloss(source[j])[1], p.word_mass * pi);
                if j + 1 < source.len() {
                    named[1] = (self.gloss(source[j + 1])[0], p.word_mass * (1.0 - pi));
                    budget
                } else {
                    p.word_mass * (1.0 - pi)
                }
            }
            State::Covered => p.eos_covered,
        };
        let named_mass: f64 = named.iter().map(|n| n.1).sum();
        let distractor_mass = 1.0 - named_mass - eos;

        let mut probs = vec![0.0; self.vocabs.target.len()];
        probs[EOS as usize] = eos;
        for &(tok, mass) in &named {
            if tok != EOS {
                probs[tok as usize] += mass;
            }
        }
        // Zipf-ranked distractors over the remaining words, rotated per
        // sentence and position.
        let is_named = |w: TokenId| named.iter().any(|&(tok, m)| tok == w && m > 0.0);
        let free = self.words.iter().filter(|&&w| !is_named(w)).count();
        let norm = self.zipf_prefix[free];
        let offset = (fnv(source) ^ (prefix.len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
            % self.words.len() as u64;
        let mut rank = 0;
        for i in 0..self.words.len() {
            let w = self.words[(i + offset as usize) % self.words.len()];
            if is_named(w) {
                continue;
            }
            probs[w as usize] += distractor_mass * self.zipf_weights[rank] / norm;
            rank += 1;
        }
        LogDistribution::from_probs(&probs)
    }
}
