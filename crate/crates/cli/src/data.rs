//! On-disk dataset layout shared by the commands.
//!
//! A data directory holds `{train,dev,test}.{src,tgt}`, the vocabularies
//! `vocab.src.vocab` / `vocab.tgt.vocab` and, for synthetic data, the gloss
//! table `glosses.tsv` (`source TAB first TAB second`).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use brevity::corpus::{load_parallel, read_lines, split, write_lines, SyntheticTask, VocabPolicy};
use brevity::{ParallelCorpus, TokenId, Vocabularies};

use crate::config::DataConfig;

pub const VOCAB_STEM: &str = "vocab";
pub const GLOSS_FILE: &str = "glosses.tsv";
pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

pub fn split_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{name}.src")),
        dir.join(format!("{name}.tgt")),
    )
}

/// The three splits of a generated task.
pub struct Dataset {
    pub vocabs: Vocabularies,
    pub train: ParallelCorpus,
    pub dev: ParallelCorpus,
    pub test: ParallelCorpus,
}

/// Generates a synthetic task and splits it, both seeded by `seed`.
pub fn generate(config: &DataConfig, seed: u64) -> Result<(SyntheticTask, Dataset)> {
    let task = brevity::corpus::generate_synthetic(&config.task(seed))?;
    let (train, dev, test) = split(&task.corpus, config.split, seed)?;
    let data = Dataset {
        vocabs: task.vocabs.clone(),
        train,
        dev,
        test,
    };
    Ok((task, data))
}

/// Writes splits, vocabularies and the gloss table into `dir`.
pub fn write_dataset(dir: &Path, task: &SyntheticTask, data: &Dataset, header: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, corpus) in SPLITS.iter().zip([&data.train, &data.dev, &data.test]) {
        let (src, tgt) = split_paths(dir, name);
        corpus.write(&data.vocabs, &src, &tgt, Some(header))?;
    }
    data.vocabs.write(dir, VOCAB_STEM)?;
    let mut sources: Vec<_> = task.glosses.iter().collect();
    sources.sort();
    let mut lines = Vec::with_capacity(sources.len());
    for (&s, &[a, b]) in sources {
        let mut line = String::new();
        let _ = write!(
            line,
            "{}\t{}\t{}",
            data.vocabs.source.decode(&[s]),
            data.vocabs.target.decode(&[a]),
            data.vocabs.target.decode(&[b])
        );
        lines.push(line);
    }
    write_lines(&dir.join(GLOSS_FILE), &lines)?;
    Ok(())
}

pub fn read_vocabs(dir: &Path) -> Result<Vocabularies> {
    Vocabularies::read(dir, VOCAB_STEM)
        .with_context(|| format!("reading vocabularies from {}", dir.display()))
}

/// Reads a parallel split encoded against `vocabs`.
pub fn read_split(dir: &Path, name: &str, vocabs: &Vocabularies) -> Result<ParallelCorpus> {
    let (src, tgt) = split_paths(dir, name);
    read_parallel(&src, &tgt, vocabs)
}

pub fn read_parallel(src: &Path, tgt: &Path, vocabs: &Vocabularies) -> Result<ParallelCorpus> {
    let (corpus, _) = load_parallel(src, tgt, VocabPolicy::Use(vocabs.clone()))?;
    Ok(corpus)
}

pub fn read_glosses(dir: &Path, vocabs: &Vocabularies) -> Result<HashMap<TokenId, [TokenId; 2]>> {
    let path = dir.join(GLOSS_FILE);
    let mut glosses = HashMap::new();
    for (i, line) in read_lines(&path)?.iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let [s, a, b] = fields[..] else {
            bail!(
                "{}:{}: expected three tab-separated fields",
                path.display(),
                i + 1
            );
        };
        let lookup = |id: Option<TokenId>, tok: &str| {
            id.with_context(|| format!("{}:{}: unknown token `{tok}`", path.display(), i + 1))
        };
        glosses.insert(
            lookup(vocabs.source.id(s), s)?,
            [
                lookup(vocabs.target.id(a), a)?,
                lookup(vocabs.target.id(b), b)?,
            ],
        );
    }
    Ok(glosses)
}

/// Source sentences of a plain text file, one per line.
pub fn read_sources(path: &Path, vocabs: &Vocabularies) -> Result<Vec<Vec<TokenId>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|l| vocabs.source.encode(l))
        .collect())
}

/// Whitespace-tokenized lines of a text file.
pub fn read_tokenized(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}
