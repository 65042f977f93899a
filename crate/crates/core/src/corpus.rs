//! Vocabularies, parallel corpora and deterministic synthetic tasks.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer id of a vocabulary entry.
pub type TokenId = u32;

/// Beginning-of-sentence sentinel. Never emitted by a model.
pub const BOS: TokenId = 0;
/// End-of-sentence sentinel.
pub const EOS: TokenId = 1;
/// Out-of-vocabulary sentinel.
pub const UNK: TokenId = 2;

/// Surface forms of the reserved ids, in id order.
pub const RESERVED: [&str; 3] = ["<s>", "</s>", "<unk>"];

/// Name of the random generator recorded in synthetic corpus headers.
pub const GENERATOR_NAME: &str = "chacha8";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: invalid UTF-8 on line {line}")]
    InvalidUtf8 { path: PathBuf, line: usize },
    #[error("line count mismatch {0} vs {1}")]
    LineCountMismatch(usize, usize),
    #[error("empty source sentence at pair {0}")]
    EmptySource(usize),
    #[error("reserved token `{0}` may not appear in corpus text")]
    ReservedToken(String),
    #[error("sentinel id {id} stored in sentence at pair {pair}")]
    SentinelInSentence { id: TokenId, pair: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("fractions must sum to 1")]
    FractionSum,
    #[error("fractions must be positive")]
    FractionSign,
    #[error("corpus of {0} sentences is too small to split (need at least 3)")]
    TooSmallToSplit(usize),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Bijection between surface tokens and dense integer ids.
///
/// Ids `0..3` are always `<s>`, `</s>` and `<unk>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the reserved sentinels.
    pub fn new() -> Self {
        let tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Self { tokens, index }
    }

    /// Builds a vocabulary from its id-ordered token list, sentinels included.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, CorpusError> {
        if tokens.len() < RESERVED.len()
            || tokens.iter().zip(RESERVED).any(|(t, r)| t.as_str() != r)
        {
            return Err(CorpusError::InvalidVocabulary(
                "first three entries must be <s>, </s>, <unk>".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(CorpusError::InvalidVocabulary(format!(
                    "entry {i} is empty or contains whitespace"
                )));
            }
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(CorpusError::InvalidVocabulary(format!(
                    "duplicate token `{t}`"
                )));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Inserts `token` if absent and returns its id.
    pub fn add(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false: the sentinels are present in every vocabulary.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Whitespace-tokenizes and maps to ids, with unknown tokens as [`UNK`].
    pub fn encode(&self, sentence: &str) -> Vec<TokenId> {
        sentence
            .split_whitespace()
            .map(|t| self.id(t).unwrap_or(UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK as usize]))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One token per line; the line number is the id.
    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, CorpusError> {
        let lines = read_lines(path)?;
        Self::from_tokens(lines.into_iter().map(|l| l.trim().to_string()).collect())
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = CorpusError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Self::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Source- and target-side vocabularies of a parallel task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Vocabularies {
    pub source: Vocabulary,
    pub target: Vocabulary,
}

impl Vocabularies {
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(), CorpusError> {
        self.source.write(&dir.join(format!("{stem}.src.vocab")))?;
        self.target.write(&dir.join(format!("{stem}.tgt.vocab")))
    }

    pub fn read(dir: &Path, stem: &str) -> Result<Self, CorpusError> {
        Ok(Self {
            source: Vocabulary::read(&dir.join(format!("{stem}.src.vocab")))?,
            target: Vocabulary::read(&dir.join(format!("{stem}.tgt.vocab")))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentencePair {
    pub source: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

/// Aligned (source, reference) sentences, stored without sentinels.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<SentencePair>) -> Result<Self, CorpusError> {
        for (i, p) in pairs.iter().enumerate() {
            if p.source.is_empty() {
                return Err(CorpusError::EmptySource(i));
            }
            if let Some(&id) = p
                .source
                .iter()
                .chain(&p.target)
                .find(|&&id| id == BOS || id == EOS)
            {
                return Err(CorpusError::SentinelInSentence { id, pair: i });
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &[TokenId]> {
        self.pairs.iter().map(|p| p.source.as_slice())
    }

    pub fn targets(&self) -> impl Iterator<Item = &[TokenId]> {
        self.pairs.iter().map(|p| p.target.as_slice())
    }

    /// The first `n` pairs (or all of them).
    pub fn head(&self, n: usize) -> Self {
        Self {
            pairs: self.pairs[..n.min(self.pairs.len())].to_vec(),
        }
    }

    /// Writes one sentence per line to each side, preceded by `header` if given.
    pub fn write(
        &self,
        vocabs: &Vocabularies,
        source_path: &Path,
        target_path: &Path,
        header: Option<&str>,
    ) -> Result<(), CorpusError> {
        let render = |side: &Vocabulary, sents: &mut dyn Iterator<Item = &[TokenId]>| {
            let mut out = String::new();
            if let Some(h) = header {
                out.push_str(h);
                out.push('\n');
            }
            for s in sents {
                out.push_str(&side.decode(s));
                out.push('\n');
            }
            out
        };
        fs::write(source_path, render(&vocabs.source, &mut self.sources()))
            .map_err(io_err(source_path))?;
        fs::write(target_path, render(&vocabs.target, &mut self.targets()))
            .map_err(io_err(target_path))
    }
}

/// How [`load_parallel`] obtains its vocabularies.
#[derive(Debug, Clone)]
pub enum VocabPolicy {
    /// Build from the files; tokens seen fewer than `min_count` times become UNK.
    Build { min_count: usize },
    /// Encode against existing vocabularies.
    Use(Vocabularies),
}

/// Reads a text file as lines, validating UTF-8 per line.
///
/// A first line of the form `# seed=...` (synthetic corpus header) is skipped.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut lines = Vec::new();
    let mut chunks: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if chunks.last().is_some_and(|c| c.is_empty()) {
        chunks.pop();
    }
    for (i, chunk) in chunks.into_iter().enumerate() {
        let chunk = chunk.strip_suffix(b"\r").unwrap_or(chunk);
        let line = std::str::from_utf8(chunk).map_err(|_| CorpusError::InvalidUtf8 {
            path: path.to_path_buf(),
            line: i + 1,
        })?;
        if i == 0 && line.starts_with("# seed=") {
            continue;
        }
        lines.push(line.to_string());
    }
    Ok(lines)
}

fn build_vocabulary<'a>(
    lines: impl Iterator<Item = &'a String>,
    min_count: usize,
) -> Result<Vocabulary, CorpusError> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for line in lines {
        for tok in line.split_whitespace() {
            let c = counts.entry(tok).or_insert_with(|| {
                order.push(tok);
                0
            });
            *c += 1;
        }
    }
    let mut vocab = Vocabulary::new();
    for tok in order {
        if tok == RESERVED[UNK as usize] {
            continue;
        }
        if RESERVED.contains(&tok) {
            return Err(CorpusError::ReservedToken(tok.to_string()));
        }
        if counts[tok] >= min_count {
            vocab.add(tok);
        }
    }
    Ok(vocab)
}

fn check_reserved(lines: &[String]) -> Result<(), CorpusError> {
    for tok in lines.iter().flat_map(|l| l.split_whitespace()) {
        if tok == RESERVED[BOS as usize] || tok == RESERVED[EOS as usize] {
            return Err(CorpusError::ReservedToken(tok.to_string()));
        }
    }
    Ok(())
}

/// Loads a line-aligned parallel corpus from two whitespace-tokenized files.
pub fn load_parallel(
    source_path: &Path,
    target_path: &Path,
    policy: VocabPolicy,
) -> Result<(ParallelCorpus, Vocabularies), CorpusError> {
    let src = read_lines(source_path)?;
    let tgt = read_lines(target_path)?;
    if src.len() != tgt.len() {
        return Err(CorpusError::LineCountMismatch(src.len(), tgt.len()));
    }
    check_reserved(&src)?;
    check_reserved(&tgt)?;
    let vocabs = match policy {
        VocabPolicy::Build { min_count } => Vocabularies {
            source: build_vocabulary(src.iter(), min_count)?,
            target: build_vocabulary(tgt.iter(), min_count)?,
        },
        VocabPolicy::Use(v) => v,
    };
    let pairs = src
        .iter()
        .zip(&tgt)
        .map(|(s, t)| SentencePair {
            source: vocabs.source.encode(s),
            target: vocabs.target.encode(t),
        })
        .collect();
    Ok((ParallelCorpus::new(pairs)?, vocabs))
}

/// Parameters of the synthetic word-by-word transduction task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTaskConfig {
    /// Number of distinct source word types.
    pub source_vocab_size: usize,
    /// Number of distinct target word types.
    pub target_vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probabilities of emitting 1 or 2 target tokens per source token.
    pub fertility: [f64; 2],
    pub num_pairs: usize,
    pub seed: u64,
}

impl Default for SyntheticTaskConfig {
    fn default() -> Self {
        Self {
            source_vocab_size: 50,
            target_vocab_size: 60,
            min_len: 1,
            max_len: 20,
            fertility: [0.5, 0.5],
            num_pairs: 1000,
            seed: 1,
        }
    }
}

impl SyntheticTaskConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidConfig(m.to_string()));
        if self.min_len < 1 || self.max_len < self.min_len {
            return bad("length range must satisfy 1 <= min_len <= max_len");
        }
        if self.source_vocab_size == 0 || self.target_vocab_size == 0 {
            return bad("vocabulary sizes must be positive");
        }
        if self.fertility.iter().any(|p| !(0.0..=1.0).contains(p))
            || (self.fertility.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("fertility probabilities must lie in [0,1] and sum to 1");
        }
        if self.source_vocab_size > u32::MAX as usize || self.target_vocab_size > u32::MAX as usize
        {
            return bad("vocabulary too large");
        }
        Ok(())
    }

    /// The `# seed=<n> generator=<name>` line written atop synthetic files.
    pub fn header(&self) -> String {
        format!("# seed={} generator={}", self.seed, GENERATOR_NAME)
    }
}

/// A generated task: the corpus, its vocabularies and the gloss table used.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub corpus: ParallelCorpus,
    pub vocabs: Vocabularies,
    /// For each source word id, its two-token target gloss. Fertility 1
    /// emits the first token only.
    pub glosses: HashMap<TokenId, [TokenId; 2]>,
}

fn source_word(i: usize) -> String {
    format!("s{i}")
}

fn target_word(i: usize) -> String {
    format!("t{i}")
}

/// Generates a parallel corpus as a pure function of `config`.
///
/// Only `u32` range draws and `f64` unit draws from ChaCha8 are used, so the
/// output is identical across platforms.
pub fn generate_synthetic(config: &SyntheticTaskConfig) -> Result<SyntheticTask, CorpusError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut vocabs = Vocabularies::default();
    let src_ids: Vec<TokenId> = (0..config.source_vocab_size)
        .map(|i| vocabs.source.add(&source_word(i)))
        .collect();
    let tgt_ids: Vec<TokenId> = (0..config.target_vocab_size)
        .map(|i| vocabs.target.add(&target_word(i)))
        .collect();

    let tv = config.target_vocab_size as u32;
    let glosses: HashMap<TokenId, [TokenId; 2]> = src_ids
        .iter()
        .map(|&s| {
            let a = tgt_ids[rng.gen_range(0..tv) as usize];
            let b = tgt_ids[rng.gen_range(0..tv) as usize];
            (s, [a, b])
        })
        .collect();

    let sv = config.source_vocab_size as u32;
    let (lo, hi) = (config.min_len as u32, config.max_len as u32);
    let mut pairs = Vec::with_capacity(config.num_pairs);
    for _ in 0..config.num_pairs {
        let len = rng.gen_range(lo..=hi) as usize;
        let source: Vec<TokenId> = (0..len)
            .map(|_| src_ids[rng.gen_range(0..sv) as usize])
            .collect();
        let mut target = Vec::with_capacity(2 * len);
        for s in &source {
            let gloss = glosses[s];
            target.push(gloss[0]);
            let u: f64 = rng.gen();
            if u >= config.fertility[0] {
                target.push(gloss[1]);
            }
        }
        pairs.push(SentencePair { source, target });
    }
    Ok(SyntheticTask {
        corpus: ParallelCorpus::new(pairs)?,
        vocabs,
        glosses,
    })
}

/// Shuffles with `seed` and partitions into (train, dev, test).
///
/// Dev and test sizes are floored; the remainder goes to train.
pub fn split(
    corpus: &ParallelCorpus,
    fractions: [f64; 3],
    seed: u64,
) -> Result<(ParallelCorpus, ParallelCorpus, ParallelCorpus), CorpusError> {
    if fractions.iter().any(|&f| f <= 0.0 || !f.is_finite()) {
        return Err(CorpusError::FractionSign);
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CorpusError::FractionSum);
    }
    let n = corpus.len();
    if n < 3 {
        return Err(CorpusError::TooSmallToSplit(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = (n as f64 * fractions[1]).floor() as usize;
    let n_test = (n as f64 * fractions[2]).floor() as usize;
    let n_train = n - n_dev - n_test;
    let take = |idx: &[usize]| ParallelCorpus {
        pairs: idx.iter().map(|&i| corpus.pairs[i].clone()).collect(),
    };
    Ok((
        take(&order[..n_train]),
        take(&order[n_train..n_train + n_dev]),
        take(&order[n_train + n_dev..]),
    ))
}

/// Writes `lines` to `path`, one per line.
pub fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<(), CorpusError> {
    let mut f = io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    for l in lines {
        writeln!(f, "{}", l.as_ref()).map_err(io_err(path))?;
    }
    f.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn write(dir: &Path, name: &str, text: &[u8]) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn pairs_lines() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "a.src", b"x y\nz\nx\n");
        let t = write(dir.path(), "a.tgt", b"p\nq r\n\n");
        let (c, v) = load_parallel(&s, &t, VocabPolicy::Build { min_count: 1 }).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.pairs()[2].target.is_empty());
        assert_eq!(v.source.decode(&c.pairs()[0].source), "x y");
    }

    #[test]
    fn line_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "a.src", b"a\nb\nc\n");
        let t = write(dir.path(), "a.tgt", b"a\nb\nc\nd\n");
        let err = load_parallel(&s, &t, VocabPolicy::Build { min_count: 1 }).unwrap_err();
        assert_eq!(err.to_string(), "line count mismatch 3 vs 4");
    }

    #[test]
    fn rare_tokens_become_unk() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "a.src", b"a b\na\n");
        let t = write(dir.path(), "a.tgt", b"c\nc\n");
        let (c, v) = load_parallel(&s, &t, VocabPolicy::Build { min_count: 2 }).unwrap();
        assert_eq!(c.pairs()[0].source, vec![v.source.id("a").unwrap(), UNK]);
        assert_eq!(UNK, 2);
    }

    #[test]
    fn invalid_utf8_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "a.src", b"a\n\xff\xfe\n");
        let t = write(dir.path(), "a.tgt", b"a\nb\n");
        let err = load_parallel(&s, &t, VocabPolicy::Build { min_count: 1 }).unwrap_err();
        assert!(
            matches!(err, CorpusError::InvalidUtf8 { line: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn empty_source_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "a.src", b"a\n\n");
        let t = write(dir.path(), "a.tgt", b"a\nb\n");
        let err = load_parallel(&s, &t, VocabPolicy::Build { min_count: 1 }).unwrap_err();
        assert!(matches!(err, CorpusError::EmptySource(1)));
    }

    #[test]
    fn reserved_surface_forms_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = write(dir.path(), "a.src", b"a </s>\n");
        let t = write(dir.path(), "a.tgt", b"b\n");
        assert!(matches!(
            load_parallel(&s, &t, VocabPolicy::Build { min_count: 1 }),
            Err(CorpusError::ReservedToken(_))
        ));
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut v = Vocabulary::new();
        v.add("hello");
        v.add("world");
        let p = dir.path().join("v.vocab");
        v.write(&p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("<s>\n</s>\n<unk>\nhello\n"));
        assert_eq!(Vocabulary::read(&p).unwrap(), v);
    }

    #[test]
    fn vocabulary_requires_sentinels() {
        assert!(Vocabulary::from_tokens(vec!["a".into(), "b".into(), "c".into()]).is_err());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let cfg = SyntheticTaskConfig::default();
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.corpus, b.corpus);
        let dir = tempfile::tempdir().unwrap();
        let paths: Vec<PathBuf> = (0..4).map(|i| dir.path().join(format!("{i}"))).collect();
        a.corpus
            .write(&a.vocabs, &paths[0], &paths[1], Some(&cfg.header()))
            .unwrap();
        b.corpus
            .write(&b.vocabs, &paths[2], &paths[3], Some(&cfg.header()))
            .unwrap();
        assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[2]).unwrap());
        assert_eq!(fs::read(&paths[1]).unwrap(), fs::read(&paths[3]).unwrap());
        let first = fs::read_to_string(&paths[0]).unwrap();
        assert!(first.starts_with("# seed=1 generator=chacha8\n"));
        // the header is skipped on load
        let (c, _) =
            load_parallel(&paths[0], &paths[1], VocabPolicy::Use(a.vocabs.clone())).unwrap();
        assert_eq!(c, a.corpus);
    }

    #[test]
    fn fixed_fertility_preserves_length() {
        let cfg = SyntheticTaskConfig {
            fertility: [1.0, 0.0],
            ..Default::default()
        };
        let task = generate_synthetic(&cfg).unwrap();
        assert!(task
            .corpus
            .pairs()
            .iter()
            .all(|p| p.source.len() == p.target.len()));
    }

    #[test]
    fn balanced_fertility_mean_ratio() {
        let cfg = SyntheticTaskConfig {
            max_len: 20,
            num_pairs: 10_000,
            fertility: [0.5, 0.5],
            seed: 7,
            ..Default::default()
        };
        let task = generate_synthetic(&cfg).unwrap();
        let mean: f64 = task
            .corpus
            .pairs()
            .iter()
            .map(|p| p.target.len() as f64 / p.source.len() as f64)
            .sum::<f64>()
            / task.corpus.len() as f64;
        assert!((mean - 1.5).abs() < 0.02, "mean ratio {mean}");
        for p in task.corpus.pairs() {
            assert!(p.target.len() >= p.source.len() && p.target.len() <= 2 * p.source.len());
        }
    }

    #[test]
    fn invalid_synthetic_config() {
        let cfg = SyntheticTaskConfig {
            fertility: [0.5, 0.6],
            ..Default::default()
        };
        assert!(generate_synthetic(&cfg).is_err());
        let cfg = SyntheticTaskConfig {
            min_len: 0,
            ..Default::default()
        };
        assert!(generate_synthetic(&cfg).is_err());
    }

    fn ten_pairs() -> ParallelCorpus {
        ParallelCorpus::new(
            (0..10)
                .map(|i| SentencePair {
                    source: vec![3 + i],
                    target: vec![3 + i, 3],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn split_sizes_and_partition() {
        let c = ten_pairs();
        let (tr, dv, te) = split(&c, [0.8, 0.1, 0.1], 3).unwrap();
        assert_eq!((tr.len(), dv.len(), te.len()), (8, 1, 1));
        let mut all: HashMap<SentencePair, usize> = HashMap::new();
        for p in tr.pairs().iter().chain(dv.pairs()).chain(te.pairs()) {
            *all.entry(p.clone()).or_default() += 1;
        }
        assert_eq!(all.len(), 10);
        assert!(all.values().all(|&n| n == 1));
        let again = split(&c, [0.8, 0.1, 0.1], 3).unwrap();
        assert_eq!(again.0, tr);
    }

    #[test]
    fn split_errors() {
        let c = ten_pairs();
        assert_eq!(
            split(&c, [0.5, 0.5, 0.1], 0).unwrap_err().to_string(),
            "fractions must sum to 1"
        );
        assert!(matches!(
            split(&c.head(2), [0.8, 0.1, 0.1], 0),
            Err(CorpusError::TooSmallToSplit(2))
        ));
    }
}
