//! The work behind each subcommand. Every command reads its inputs, writes
//! its outputs under the output directory with fixed file names and returns
//! what it computed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use brevity::model::{load_model, save_model, BudgetModel, ToyTransducer};
use brevity::parallel::map_ordered;
use brevity::search::{decode_corpus, Hypothesis, SearchConfig};
use brevity::tuning::{evaluate_gamma_grid, tune_word_reward, GammaPoint, TunerState};
use brevity::{AnyModel, ConditionalModel, ParallelCorpus, Scorer, ScoringMode, TokenId};

use crate::config::{ExperimentConfig, ModelKind, SweepMode};
use crate::data::{self, Dataset};
use crate::report::{self, f6, Evaluation};

pub const TUNED_GAMMA_FILE: &str = "tuned_gamma.txt";
pub const TUNE_REPORT_FILE: &str = "tune_report.tsv";
pub const TUNE_TIMING_FILE: &str = "tune_timing.tsv";
pub const EVAL_REPORT_FILE: &str = "eval_report.tsv";
pub const SWEEP_BEAM_FILE: &str = "sweep_beam.tsv";
pub const SWEEP_GAMMA_FILE: &str = "sweep_gamma.tsv";

/// Configuration plus the worker count, shared by all commands.
#[derive(Debug, Clone)]
pub struct Runner {
    pub config: ExperimentConfig,
    pub workers: usize,
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Parses a γ file: a single finite number.
pub fn read_gamma(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let gamma: f64 = text
        .trim()
        .parse()
        .with_context(|| format!("{}: not a number", path.display()))?;
    if !gamma.is_finite() {
        bail!("{}: gamma must be finite", path.display());
    }
    Ok(gamma)
}

pub fn gamma_file_contents(gamma: f64) -> String {
    format!("{gamma}\n")
}

fn tokens_of(hyps: &[Hypothesis]) -> Vec<&[TokenId]> {
    hyps.iter().map(|h| h.tokens.as_slice()).collect()
}

/// Decodes the sources of `corpus` and evaluates against its targets.
pub fn decode_and_evaluate<M: ConditionalModel + ?Sized>(
    model: &M,
    scorer: &Scorer,
    corpus: &ParallelCorpus,
    search: &SearchConfig,
    config: &ExperimentConfig,
    workers: usize,
) -> Result<(Vec<Hypothesis>, Evaluation)> {
    let sources: Vec<&[TokenId]> = corpus.sources().collect();
    let refs: Vec<&[TokenId]> = corpus.targets().collect();
    let hyps = decode_corpus(model, scorer, &sources, search, workers);
    let eval = report::evaluate(&tokens_of(&hyps), &refs, &config.evaluation)?;
    Ok((hyps, eval))
}

/// One cell of a beam sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub fraction: f64,
    pub mode: String,
    pub beam: usize,
    /// γ used, for the tuned reward only.
    pub gamma: Option<f64>,
    pub bleu: f64,
    pub length_ratio: f64,
    pub empty_fraction: f64,
}

type CellFormat = Box<dyn Fn(&SweepCell) -> String>;

/// Renders sweep cells in the layout of a results table: one row per
/// (fraction, mode, metric), one column per beam.
pub fn sweep_table(cells: &[SweepCell], beams: &[usize]) -> String {
    let mut out = String::from("fraction\tmode\tmetric");
    for k in beams {
        let _ = write!(out, "\tk={k}");
    }
    out.push('\n');
    let mut groups: Vec<(f64, &str)> = Vec::new();
    for c in cells {
        if !groups.iter().any(|&(f, m)| f == c.fraction && m == c.mode) {
            groups.push((c.fraction, &c.mode));
        }
    }
    for (fraction, mode) in groups {
        let row: Vec<&SweepCell> = cells
            .iter()
            .filter(|c| c.fraction == fraction && c.mode == mode)
            .collect();
        let mut metrics: Vec<(&str, CellFormat)> = vec![
            ("bleu", Box::new(|c| f6(c.bleu))),
            ("length", Box::new(|c| f6(c.length_ratio))),
            ("empty", Box::new(|c| f6(c.empty_fraction))),
        ];
        if row.iter().any(|c| c.gamma.is_some()) {
            metrics.push(("gamma", Box::new(|c| c.gamma.map_or("-".into(), f6))));
        }
        for (name, cell) in metrics {
            let _ = write!(out, "{fraction:.2}\t{mode}\t{name}");
            for c in &row {
                let _ = write!(out, "\t{}", cell(c));
            }
            out.push('\n');
        }
    }
    out
}

/// Result of `tune`.
#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub state: TunerState,
    pub gamma_file: PathBuf,
    pub report_file: PathBuf,
}

impl Runner {
    pub fn new(config: ExperimentConfig, workers: usize) -> Self {
        Self {
            config,
            workers: workers.max(1),
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.paths.out_dir
    }

    pub fn data_dir(&self) -> &Path {
        &self.config.paths.data_dir
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }

    pub fn scorer(&self, mode: ScoringMode) -> Scorer {
        Scorer::new(mode, self.config.decode.correction)
    }

    /// Parses a `--score` value. A parameter written `@tuned` is read from
    /// the tuned-γ file in the output directory, `@<path>` from that file.
    pub fn resolve_score(&self, spec: &str) -> Result<ScoringMode> {
        let spec = spec.trim();
        let Some((head, reference)) = spec.split_once("=@") else {
            return Ok(spec.parse()?);
        };
        let path = match reference {
            "tuned" => self.out(TUNED_GAMMA_FILE),
            other => PathBuf::from(other),
        };
        let value = read_gamma(&path)?;
        Ok(format!("{head}={value}").parse()?)
    }

    /// Generates a synthetic task and writes it to the data directory.
    pub fn gen_data(&self, budget_demo: bool) -> Result<Dataset> {
        let data_config = if budget_demo {
            crate::config::DataConfig::budget_demo()
        } else {
            self.config.data.clone()
        };
        let task_config = data_config.task(self.config.seed);
        let (task, data) = data::generate(&data_config, self.config.seed)?;
        data::write_dataset(self.data_dir(), &task, &data, &task_config.header())?;
        Ok(data)
    }

    /// Builds a model of `kind` from the data directory.
    pub fn build_model(&self, kind: ModelKind, fraction: f64) -> Result<AnyModel> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            bail!("training fraction must lie in (0, 1], got {fraction}");
        }
        let dir = self.data_dir();
        let vocabs = data::read_vocabs(dir)?;
        Ok(match kind {
            ModelKind::Toy => {
                let train = data::read_split(dir, "train", &vocabs)?;
                let n = ((train.len() as f64 * fraction).floor() as usize).max(1);
                ToyTransducer::train(&train.head(n), &vocabs, self.config.model.toy)?.into()
            }
            ModelKind::Budget => {
                let glosses = data::read_glosses(dir, &vocabs)?;
                BudgetModel::from_glosses(
                    vocabs,
                    &glosses,
                    self.config.model.budget,
                    self.config.seed,
                )?
                .into()
            }
        })
    }

    pub fn train(
        &self,
        kind: ModelKind,
        fraction: f64,
        output: Option<PathBuf>,
    ) -> Result<PathBuf> {
        let model = self.build_model(kind, fraction)?;
        let path = output.unwrap_or_else(|| self.config.model_path());
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        save_model(&model, &path)?;
        Ok(path)
    }

    pub fn load_model(&self, path: Option<&Path>) -> Result<AnyModel> {
        let path = path.map_or_else(|| self.config.model_path(), Path::to_path_buf);
        load_model(&path).with_context(|| format!("loading model {}", path.display()))
    }

    /// Decodes a source file; writes one hypothesis per line and, if asked,
    /// the per-sentence beam traces.
    pub fn decode(
        &self,
        model: &AnyModel,
        input: &Path,
        mode: ScoringMode,
        beam: usize,
        output: &Path,
        trace: Option<&Path>,
    ) -> Result<Vec<Hypothesis>> {
        let vocabs = model.vocabularies();
        let sources = data::read_sources(input, vocabs)?;
        let scorer = self.scorer(mode);
        let search = self.config.decode.search(beam);
        let results = map_ordered(&sources, self.workers, |src| {
            search.decode(model, &scorer, src, trace.is_some())
        });
        let mut text = String::new();
        let mut trace_text =
            String::from("sentence\tstep\trank\tcorrected_score\tbase_score\tcomplete\ttokens\n");
        for (i, r) in results.iter().enumerate() {
            text.push_str(&vocabs.target.decode(&r.best().tokens));
            text.push('\n');
            if let Some(t) = &r.trace {
                for line in t.to_tsv(&vocabs.target).lines().skip(1) {
                    let _ = writeln!(trace_text, "{}\t{line}", i + 1);
                }
            }
        }
        write_file(output, &text)?;
        if let Some(path) = trace {
            write_file(path, &trace_text)?;
        }
        Ok(results
            .into_iter()
            .map(|mut r| r.hypotheses.swap_remove(0))
            .collect())
    }

    /// Tunes γ on a dev set and writes the report and the γ file.
    pub fn tune(
        &self,
        model: &AnyModel,
        dev: &ParallelCorpus,
        beam: Option<usize>,
    ) -> Result<TuneOutcome> {
        let state = tune_word_reward(model, dev, &self.config.tuner(beam), self.workers)?;
        let report_file = self.out(TUNE_REPORT_FILE);
        let gamma_file = self.out(TUNED_GAMMA_FILE);
        write_file(&report_file, &state.to_tsv(false))?;
        write_file(&gamma_file, &gamma_file_contents(state.gamma))?;
        write_file(&self.out(TUNE_TIMING_FILE), &timing_tsv(&state))?;
        Ok(TuneOutcome {
            state,
            gamma_file,
            report_file,
        })
    }

    pub fn read_dev(
        &self,
        model: &AnyModel,
        src: Option<&Path>,
        tgt: Option<&Path>,
    ) -> Result<ParallelCorpus> {
        let (def_src, def_tgt) = data::split_paths(self.data_dir(), "dev");
        data::read_parallel(
            src.unwrap_or(&def_src),
            tgt.unwrap_or(&def_tgt),
            model.vocabularies(),
        )
    }

    /// Scores a hypothesis file against a reference file.
    pub fn evaluate(&self, hyp: &Path, reference: &Path) -> Result<Evaluation> {
        let hyps = data::read_tokenized(hyp)?;
        let refs = data::read_tokenized(reference)?;
        let eval = report::evaluate(&hyps, &refs, &self.config.evaluation)
            .with_context(|| format!("{} vs {}", hyp.display(), reference.display()))?;
        write_file(&self.out(EVAL_REPORT_FILE), &eval.to_tsv())?;
        Ok(eval)
    }

    /// Decodes the test split for every (fraction, mode, beam) cell.
    pub fn sweep_beam(&self, model_path: Option<&Path>) -> Result<Vec<SweepCell>> {
        let sweep = &self.config.sweep;
        let modes: Vec<SweepMode> = sweep
            .modes
            .iter()
            .map(|m| SweepMode::parse(m))
            .collect::<Result<_>>()?;
        let fixed_model = model_path.is_some() || self.config.model.kind == ModelKind::Budget;
        if fixed_model && sweep.training_fractions != [1.0] {
            bail!("training fractions need a toy model trained by the sweep itself");
        }
        let vocabs = match model_path {
            Some(p) => self.load_model(Some(p))?.vocabularies().clone(),
            None => data::read_vocabs(self.data_dir())?,
        };
        let dev = data::read_split(self.data_dir(), "dev", &vocabs)?;
        let test = data::read_split(self.data_dir(), "test", &vocabs)?;
        let mut cells = Vec::new();
        for &fraction in &sweep.training_fractions {
            let model = match model_path {
                Some(p) => self.load_model(Some(p))?,
                None => self.build_model(self.config.model.kind, fraction)?,
            };
            for mode in &modes {
                for &beam in &sweep.beams {
                    let (scoring, gamma) = match mode {
                        SweepMode::Fixed(m) => (*m, None),
                        SweepMode::TunedReward => {
                            let state = tune_word_reward(
                                &model,
                                &dev,
                                &self.config.tuner(Some(beam)),
                                self.workers,
                            )?;
                            (
                                ScoringMode::WordReward { gamma: state.gamma },
                                Some(state.gamma),
                            )
                        }
                    };
                    let search = self.config.decode.search(beam);
                    let (_, eval) = decode_and_evaluate(
                        &model,
                        &self.scorer(scoring),
                        &test,
                        &search,
                        &self.config,
                        self.workers,
                    )?;
                    cells.push(SweepCell {
                        fraction,
                        mode: mode.label(),
                        beam,
                        gamma,
                        bleu: report::bleu100(&eval.bleu),
                        length_ratio: eval.length.ratio,
                        empty_fraction: eval.length.empty_fraction,
                    });
                }
            }
        }
        write_file(
            &self.out(SWEEP_BEAM_FILE),
            &sweep_table(&cells, &sweep.beams),
        )?;
        Ok(cells)
    }

    /// BLEU and length ratio on the dev split for each γ of the grid.
    pub fn sweep_gamma(&self, model: &AnyModel) -> Result<Vec<GammaPoint>> {
        let dev = data::read_split(self.data_dir(), "dev", model.vocabularies())?;
        let search = self.config.decode.search(self.config.sweep.gamma_beam);
        let points = evaluate_gamma_grid(
            model,
            &dev,
            &self.config.sweep.gammas,
            &search,
            self.workers,
        );
        let mut out = String::from("gamma\tbleu\tlength_ratio\n");
        for p in &points {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                f6(p.gamma),
                f6(100.0 * p.bleu),
                f6(p.length_ratio)
            );
        }
        write_file(&self.out(SWEEP_GAMMA_FILE), &out)?;
        Ok(points)
    }
}

/// Wall-clock seconds per tuning epoch; kept apart from the reports because
/// it differs between runs.
pub fn timing_tsv(state: &TunerState) -> String {
    let mut out = String::from("epoch\tseconds\n");
    for e in &state.history {
        let _ = writeln!(out, "{}\t{:.3}", e.epoch, e.seconds);
    }
    out
}
