//! Experiment configuration: a sectioned TOML file in which every key is
//! optional and unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use brevity::corpus::SyntheticTaskConfig;
use brevity::model::{BudgetParams, ToyParams};
use brevity::search::{MaxLen, SearchConfig};
use brevity::tuning::TunerConfig;
use brevity::{CorrectionTiming, ScoringMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Seed for corpus generation, splitting and model construction.
    pub seed: u64,
    pub paths: PathsConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub decode: DecodeConfig,
    pub tuner: TunerConfig,
    pub sweep: SweepConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            paths: PathsConfig::default(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            decode: DecodeConfig::default(),
            tuner: TunerConfig::default(),
            sweep: SweepConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Directory holding `{train,dev,test}.{src,tgt}`, vocabularies and glosses.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Model file; `<out_dir>/model.bin` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source_vocab_size: usize,
    pub target_vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probabilities of one and two target tokens per source token.
    pub fertility: [f64; 2],
    pub num_pairs: usize,
    /// Train, dev and test fractions.
    pub split: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        let task = SyntheticTaskConfig::default();
        Self {
            source_vocab_size: task.source_vocab_size,
            target_vocab_size: task.target_vocab_size,
            min_len: task.min_len,
            max_len: task.max_len,
            fertility: task.fertility,
            num_pairs: task.num_pairs,
            split: [0.8, 0.1, 0.1],
        }
    }
}

impl DataConfig {
    /// The corpus used by the budget-model demo.
    pub fn budget_demo() -> Self {
        Self {
            min_len: 2,
            max_len: 20,
            fertility: [0.7, 0.3],
            num_pairs: 2000,
            split: [0.2, 0.2, 0.6],
            ..Self::default()
        }
    }

    pub fn task(&self, seed: u64) -> SyntheticTaskConfig {
        SyntheticTaskConfig {
            source_vocab_size: self.source_vocab_size,
            target_vocab_size: self.target_vocab_size,
            min_len: self.min_len,
            max_len: self.max_len,
            fertility: self.fertility,
            num_pairs: self.num_pairs,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Count-based transducer trained on the train split.
    Toy,
    /// Constructed model with a fixed end-of-sentence budget.
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub toy: ToyParams,
    pub budget: BudgetParams,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Toy,
            toy: ToyParams::default(),
            budget: BudgetParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    /// `baseline`, `norm`, `gnmt:alpha=A`, `reward:gamma=G` or
    /// `reward:gamma=@tuned`.
    pub score: String,
    pub correction: CorrectionTiming,
    pub beam: usize,
    /// Output length cap `max_len_factor·|f| + max_len_slack`.
    pub max_len_factor: usize,
    pub max_len_slack: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            score: "baseline".to_string(),
            correction: CorrectionTiming::default(),
            beam: 10,
            max_len_factor: 2,
            max_len_slack: 5,
        }
    }
}

impl DecodeConfig {
    pub fn max_len(&self) -> MaxLen {
        MaxLen::Relative {
            factor: self.max_len_factor,
            slack: self.max_len_slack,
        }
    }

    pub fn search(&self, beam: usize) -> SearchConfig {
        SearchConfig {
            beam,
            max_len: self.max_len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Beam sizes for `sweep-beam` and `demo-budget`, ascending.
    pub beams: Vec<usize>,
    /// Scoring modes for `sweep-beam`; a bare `reward` is tuned per beam.
    pub modes: Vec<String>,
    /// Fractions of the train split used to train toy models.
    pub training_fractions: Vec<f64>,
    /// γ grid for `sweep-gamma`.
    pub gammas: Vec<f64>,
    pub gamma_beam: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            beams: vec![1, 10, 25, 50, 100],
            modes: vec!["baseline".into(), "norm".into(), "reward".into()],
            training_fractions: vec![1.0],
            gammas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
            gamma_beam: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub bin_width: f64,
    pub max_order: usize,
    /// Reference-length cut-offs of the cumulative BLEU curve; an unbounded
    /// point is always appended.
    pub curve_thresholds: Vec<usize>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            bin_width: brevity::evaluation::DEFAULT_BIN_WIDTH,
            max_order: 4,
            curve_thresholds: vec![5, 10, 15, 20, 25, 30, 40],
        }
    }
}

impl EvaluationConfig {
    pub fn thresholds(&self) -> Vec<Option<usize>> {
        self.curve_thresholds
            .iter()
            .map(|&t| Some(t))
            .chain([None])
            .collect()
    }
}

/// A sweep mode: a fixed scorer, or the word reward tuned per beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    Fixed(ScoringMode),
    TunedReward,
}

impl SweepMode {
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim() == "reward" {
            return Ok(Self::TunedReward);
        }
        Ok(Self::Fixed(s.parse()?))
    }

    pub fn label(&self) -> String {
        match self {
            Self::Fixed(ScoringMode::Baseline) => "baseline".into(),
            Self::Fixed(ScoringMode::LengthNorm) => "norm".into(),
            Self::Fixed(mode) => mode.to_string(),
            Self::TunedReward => "reward".into(),
        }
    }
}

fn ascending_positive(name: &str, values: &[usize]) -> Result<()> {
    if values.is_empty() || values.contains(&0) {
        bail!("{name} must be a non-empty list of positive integers");
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        bail!("{name} must be strictly ascending");
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            match line {
                Some(n) => anyhow::anyhow!("line {n}: {}", e.message().trim()),
                None => anyhow::anyhow!("{}", e.message().trim()),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.task(self.seed).validate()?;
        if self.data.split.iter().any(|&f| !(f > 0.0)) {
            bail!("data.split fractions must be positive");
        }
        if (self.data.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            bail!("data.split fractions must sum to 1");
        }
        self.model.budget.validate()?;
        if self.model.toy.smoothing <= 0.0 || !(0.0..=1.0).contains(&self.model.toy.lambda) {
            bail!("model.toy needs smoothing > 0 and lambda in [0, 1]");
        }
        if self.decode.beam == 0 {
            bail!("decode.beam must be positive");
        }
        if self.decode.max_len_factor == 0 && self.decode.max_len_slack == 0 {
            bail!("decode max length would be zero");
        }
        self.tuner.validate()?;
        ascending_positive("sweep.beams", &self.sweep.beams)?;
        if self.sweep.gamma_beam == 0 {
            bail!("sweep.gamma_beam must be positive");
        }
        if self.sweep.gammas.iter().any(|g| !g.is_finite()) {
            bail!("sweep.gammas must be finite");
        }
        for mode in &self.sweep.modes {
            SweepMode::parse(mode).with_context(|| format!("in sweep.modes: `{mode}`"))?;
        }
        if self
            .sweep
            .training_fractions
            .iter()
            .any(|&f| !(f > 0.0 && f <= 1.0))
        {
            bail!("sweep.training_fractions must lie in (0, 1]");
        }
        if !self.evaluation.curve_thresholds.is_empty() {
            ascending_positive(
                "evaluation.curve_thresholds",
                &self.evaluation.curve_thresholds,
            )?;
        }
        if self.evaluation.max_order == 0 {
            bail!("evaluation.max_order must be positive");
        }
        Ok(())
    }

    pub fn model_path(&self) -> PathBuf {
        self.paths
            .model
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("model.bin"))
    }

    /// Tuner settings with the decode length policy applied.
    pub fn tuner(&self, beam: Option<usize>) -> TunerConfig {
        TunerConfig {
            beam: beam.unwrap_or(self.tuner.beam),
            max_len: self.decode.max_len(),
            ..self.tuner
        }
    }
}
