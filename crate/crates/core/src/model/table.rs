use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ConditionalModel, LogDistribution, ModelError, NORMALIZATION_TOLERANCE};
use crate::corpus::{TokenId, Vocabularies, BOS, EOS, RESERVED};

const FIGURE1_SPEC: &str = include_str!("../../data/figure1.model");

/// One listed distribution: `P(token | source, prefix)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// `None` matches any source.
    pub source: Option<Vec<TokenId>>,
    pub prefix: Vec<TokenId>,
    pub probs: Vec<(TokenId, f64)>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    vocabs: Vocabularies,
    rows: Vec<TableRow>,
}

type RowKey = (Option<Vec<TokenId>>, Vec<TokenId>);

/// Explicit `(source, prefix) → distribution` table.
///
/// Unlisted prefixes emit EOS with probability 1, so every table model is
/// total. A source-specific row takes precedence over a `*` row.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "TableRepr", try_from = "TableRepr")]
pub struct TableModel {
    vocabs: Vocabularies,
    rows: Vec<TableRow>,
    index: HashMap<RowKey, usize>,
    dists: Vec<LogDistribution>,
    default: LogDistribution,
}

impl PartialEq for TableModel {
    fn eq(&self, other: &Self) -> bool {
        self.vocabs == other.vocabs && self.rows == other.rows
    }
}

impl From<TableModel> for TableRepr {
    fn from(m: TableModel) -> Self {
        Self {
            vocabs: m.vocabs,
            rows: m.rows,
        }
    }
}

impl TryFrom<TableRepr> for TableModel {
    type Error = ModelError;

    fn try_from(r: TableRepr) -> Result<Self, Self::Error> {
        Self::new(r.vocabs, r.rows)
    }
}

impl TableModel {
    /// Builds a model from explicit rows, validating each distribution.
    pub fn new(vocabs: Vocabularies, rows: Vec<TableRow>) -> Result<Self, ModelError> {
        let size = vocabs.target.len();
        let mut index = HashMap::with_capacity(rows.len());
        let mut dists = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let prefix_text = vocabs.target.decode(&row.prefix);
            if row.prefix.iter().any(|&t| t == EOS || t == BOS) {
                return Err(ModelError::Payload(format!(
                    "prefix `{prefix_text}` contains a sentinel"
                )));
            }
            let mut probs = vec![0.0; size];
            for &(tok, p) in &row.probs {
                if tok as usize >= size || tok == BOS {
                    return Err(ModelError::Payload(format!(
                        "token id {tok} not emittable under prefix `{prefix_text}`"
                    )));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(ModelError::Payload(format!(
                        "probability {p} out of range under prefix `{prefix_text}`"
                    )));
                }
                probs[tok as usize] += p;
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(ModelError::NotNormalized {
                    prefix: prefix_text,
                    sum,
                });
            }
            if index
                .insert((row.source.clone(), row.prefix.clone()), i)
                .is_some()
            {
                return Err(ModelError::Payload(format!(
                    "prefix `{prefix_text}` listed twice for the same source"
                )));
            }
            dists.push(LogDistribution::from_probs(&probs));
        }
        let mut default = vec![0.0; size];
        default[EOS as usize] = 1.0;
        Ok(Self {
            vocabs,
            rows,
            index,
            dists,
            default: LogDistribution::from_probs(&default),
        })
    }

    /// Parses the line-oriented text format.
    ///
    /// Each non-comment line is `prefix<TAB>token<TAB>prob` (any source) or
    /// `source<TAB>prefix<TAB>token<TAB>prob`, where `source` may be `*`.
    /// Prefixes and sources are space-separated tokens; an empty field is
    /// the empty prefix. `</s>` names EOS.
    pub fn from_spec(spec: &str) -> Result<Self, ModelError> {
        let mut vocabs = Vocabularies::default();
        let mut grouped: Vec<TableRow> = Vec::new();
        let mut slot: HashMap<RowKey, usize> = HashMap::new();
        let mut seen: HashMap<(RowKey, TokenId), usize> = HashMap::new();

        for (n, raw) in spec.lines().enumerate() {
            let line_no = n + 1;
            let err = |message: String| ModelError::Parse {
                line: line_no,
                message,
            };
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            let (source, prefix, token, prob) = match fields.as_slice() {
                [p, t, x] => ("*", *p, *t, *x),
                [s, p, t, x] => (*s, *p, *t, *x),
                _ => {
                    return Err(err(format!(
                        "expected 3 or 4 tab-separated fields, got {}",
                        fields.len()
                    )))
                }
            };
            let prob: f64 = prob
                .trim()
                .parse()
                .map_err(|_| err(format!("bad probability `{}`", prob.trim())))?;
            if !(0.0..=1.0).contains(&prob) {
                return Err(err(format!("probability {prob} outside [0, 1]")));
            }
            let source = match source.trim() {
                "*" => None,
                s => {
                    let mut ids = Vec::new();
                    for tok in s.split_whitespace() {
                        if RESERVED.contains(&tok) {
                            return Err(err(format!("reserved token `{tok}` in source key")));
                        }
                        ids.push(vocabs.source.add(tok));
                    }
                    Some(ids)
                }
            };
            let mut prefix_ids = Vec::new();
            for tok in prefix.split_whitespace() {
                if RESERVED.contains(&tok) {
                    return Err(err(format!("reserved token `{tok}` in prefix")));
                }
                prefix_ids.push(vocabs.target.add(tok));
            }
            let token = token.trim();
            let token_id = match token {
                "</s>" => EOS,
                "<s>" => return Err(err("<s> cannot be emitted".into())),
                "" => return Err(err("missing token".into())),
                t => vocabs.target.add(t),
            };
            let key = (source, prefix_ids);
            if seen.insert((key.clone(), token_id), line_no).is_some() {
                return Err(err(format!("token `{token}` listed twice for this prefix")));
            }
            let idx = *slot.entry(key.clone()).or_insert_with(|| {
                grouped.push(TableRow {
                    source: key.0.clone(),
                    prefix: key.1.clone(),
                    probs: Vec::new(),
                });
                grouped.len() - 1
            });
            grouped[idx].probs.push((token_id, prob));
        }
        Self::new(vocabs, grouped)
    }

    /// The shipped word-by-word translation automaton for "un hélicoptère".
    pub fn figure1() -> Self {
        Self::from_spec(FIGURE1_SPEC).expect("shipped figure1 spec is valid")
    }

    pub fn figure1_spec() -> &'static str {
        FIGURE1_SPEC
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    /// A seeded random model over `words` target words (`w1`, `w2`, ...)
    /// that lists a distribution for every prefix of up to `depth` words.
    ///
    /// All words and EOS get positive probability; `<unk>` gets none. The
    /// source is ignored. Probabilities are skewed (cubed uniforms) so that
    /// greedy and wider searches often disagree.
    pub fn random(words: usize, depth: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vocabs = Vocabularies::default();
        let ids: Vec<TokenId> = (1..=words)
            .map(|i| vocabs.target.add(&format!("w{i}")))
            .collect();
        let mut rows = Vec::new();
        let mut level: Vec<Vec<TokenId>> = vec![Vec::new()];
        for d in 0..=depth {
            for prefix in &level {
                let weights: Vec<f64> = (0..=words)
                    .map(|_| rng.gen_range(0.05f64..1.0).powi(3))
                    .collect();
                let total: f64 = weights.iter().sum();
                let probs = std::iter::once(EOS)
                    .chain(ids.iter().copied())
                    .zip(weights.iter().map(|w| w / total))
                    .collect();
                rows.push(TableRow {
                    source: None,
                    prefix: prefix.clone(),
                    probs,
                });
            }
            if d < depth {
                level = level
                    .iter()
                    .flat_map(|p| {
                        ids.iter().map(move |&w| {
                            let mut q = p.clone();
                            q.push(w);
                            q
                        })
                    })
                    .collect();
            }
        }
        Self::new(vocabs, rows).expect("random rows are normalized")
    }

    fn lookup(&self, source: &[TokenId], prefix: &[TokenId]) -> Option<usize> {
        let exact = self
            .index
            .get(&(Some(source.to_vec()), prefix.to_vec()))
            .copied();
        exact.or_else(|| self.index.get(&(None, prefix.to_vec())).copied())
    }
}

impl ConditionalModel for TableModel {
    fn vocabularies(&self) -> &Vocabularies {
        &self.vocabs
    }

    fn log_distribution(&self, source: &[TokenId], prefix: &[TokenId]) -> LogDistribution {
        match self.lookup(source, prefix) {
            Some(i) => self.dists[i].clone(),
            None => self.default.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sequence_logprob;

    fn ids(m: &TableModel, words: &str) -> Vec<TokenId> {
        m.target_vocab().encode(words)
    }

    #[test]
    fn figure1_first_step() {
        let m = TableModel::figure1();
        let d = m.next_logprobs(&[], &[]).unwrap();
        let v = m.target_vocab();
        assert_eq!(d.get(v.id("a").unwrap()), 0.6f64.ln());
        assert_eq!(d.get(v.id("an").unwrap()), 0.4f64.ln());
        let finite = d.as_slice().iter().filter(|x| x.is_finite()).count();
        assert_eq!(finite, 2);
        let d = m.next_logprobs(&[], &ids(&m, "an")).unwrap();
        assert_eq!(d.get(v.id("autogyro").unwrap()), 0.0);
        assert!(d.is_normalized());
    }

    #[test]
    fn figure1_sequence_scores() {
        let m = TableModel::figure1();
        let s = sequence_logprob(&m, &[], &ids(&m, "a helicopter")).unwrap();
        assert!((s - 0.36f64.ln()).abs() < 1e-12);
        let s = sequence_logprob(&m, &[], &ids(&m, "an autogyro")).unwrap();
        assert!((s - 0.4f64.ln()).abs() < 1e-12);
        // the empty output is impossible under this automaton
        assert_eq!(sequence_logprob(&m, &[], &[]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn unnormalized_row_names_prefix() {
        let err = TableModel::from_spec("\ta\t0.6\n\tan\t0.5\n").unwrap_err();
        assert!(matches!(err, ModelError::NotNormalized { .. }));
        assert!(err.to_string().contains("prefix ``"), "{err}");
        let err = TableModel::from_spec("x\ty\t0.5\nx\t</s>\t0.4\n").unwrap_err();
        assert!(err.to_string().contains("prefix `x`"), "{err}");
    }

    #[test]
    fn constant_eos_budget_table() {
        let spec = "\t</s>\t0.01\n\tw\t0.99\nw\t</s>\t0.01\nw\tw\t0.99\n";
        let m = TableModel::from_spec(spec).unwrap();
        let s = sequence_logprob(&m, &[], &[]).unwrap();
        assert_eq!(s, 0.01f64.ln());
    }

    #[test]
    fn source_specific_rows_take_precedence() {
        let spec = "\tx\t1\nsrc\t\ty\t1\n";
        let m = TableModel::from_spec(spec).unwrap();
        let src = m.source_vocab().encode("src");
        let x = m.target_vocab().id("x").unwrap();
        let y = m.target_vocab().id("y").unwrap();
        assert_eq!(m.log_distribution(&src, &[]).get(y), 0.0);
        assert_eq!(m.log_distribution(&[], &[]).get(x), 0.0);
        // unlisted prefix falls back to the EOS default
        assert_eq!(m.log_distribution(&src, &[x]).get(EOS), 0.0);
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(
            TableModel::from_spec("a\tb\n"),
            Err(ModelError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            TableModel::from_spec("\ta\tnope\n"),
            Err(ModelError::Parse { line: 1, .. })
        ));
        assert!(TableModel::from_spec("a </s>\tb\t1\n").is_err());
        assert!(TableModel::from_spec("\ta\t0.5\n\ta\t0.5\n").is_err());
    }
}
