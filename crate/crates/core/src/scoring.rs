//! Length-corrected hypothesis scores and the total order used by search.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenId;

/// The constant 5 of the GNMT length penalty.
const GNMT_OFFSET: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error(
        "unknown scoring mode `{0}` (expected baseline, norm, gnmt:alpha=A or reward:gamma=G)"
    )]
    UnknownMode(String),
    #[error("invalid parameter in `{0}`")]
    BadParameter(String),
    #[error("alpha must be finite and >= 0, got {0}")]
    BadAlpha(f64),
    #[error("gamma must be finite, got {0}")]
    BadGamma(f64),
}

/// Sentence-level correction applied on top of the summed log-probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScoringMode {
    /// `s`
    Baseline,
    /// `s / m`, with `m` floored at 1.
    LengthNorm,
    /// `s / ((5 + m)^α / 6^α)`
    Gnmt { alpha: f64 },
    /// `s + γ·m`
    WordReward { gamma: f64 },
}

impl ScoringMode {
    pub fn gnmt(alpha: f64) -> Result<Self, ScoringError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(ScoringError::BadAlpha(alpha));
        }
        Ok(Self::Gnmt { alpha })
    }

    pub fn word_reward(gamma: f64) -> Result<Self, ScoringError> {
        if !gamma.is_finite() {
            return Err(ScoringError::BadGamma(gamma));
        }
        Ok(Self::WordReward { gamma })
    }

    /// Corrected score of a hypothesis with base score `base` and `length`
    /// output words (EOS excluded).
    pub fn corrected_score(self, base: f64, length: usize) -> f64 {
        let m = length as f64;
        match self {
            Self::Baseline => base,
            Self::LengthNorm => base / m.max(1.0),
            Self::Gnmt { alpha } => {
                let divisor = ((GNMT_OFFSET + m) / (GNMT_OFFSET + 1.0)).powf(alpha);
                base / divisor
            }
            Self::WordReward { gamma } => base + gamma * m,
        }
    }

    /// Short label used in report rows.
    pub fn label(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::LengthNorm => "norm",
            Self::Gnmt { .. } => "gnmt",
            Self::WordReward { .. } => "reward",
        }
    }
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Baseline => write!(f, "baseline"),
            Self::LengthNorm => write!(f, "norm"),
            Self::Gnmt { alpha } => write!(f, "gnmt:alpha={alpha}"),
            Self::WordReward { gamma } => write!(f, "reward:gamma={gamma}"),
        }
    }
}

fn parse_param(spec: &str, rest: &str, key: &str) -> Result<f64, ScoringError> {
    rest.strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.trim().parse::<f64>().ok())
        .ok_or_else(|| ScoringError::BadParameter(spec.to_string()))
}

impl FromStr for ScoringMode {
    type Err = ScoringError;

    /// Parses `baseline`, `norm`, `gnmt:alpha=A` or `reward:gamma=G`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "baseline" => Ok(Self::Baseline),
            None if s == "norm" => Ok(Self::LengthNorm),
            Some(("gnmt", rest)) => Self::gnmt(parse_param(s, rest, "alpha")?),
            Some(("reward", rest)) => Self::word_reward(parse_param(s, rest, "gamma")?),
            _ => Err(ScoringError::UnknownMode(s.to_string())),
        }
    }
}

/// When the correction is applied during search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionTiming {
    /// Partial hypotheses are ranked by their corrected score at the current length.
    #[default]
    DuringSearch,
    /// Partial hypotheses are ranked by their raw score; only complete ones are corrected.
    CompleteOnly,
}

/// A scoring mode together with its application policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    pub mode: ScoringMode,
    pub timing: CorrectionTiming,
}

impl From<ScoringMode> for Scorer {
    fn from(mode: ScoringMode) -> Self {
        Self {
            mode,
            timing: CorrectionTiming::DuringSearch,
        }
    }
}

impl Scorer {
    pub fn new(mode: ScoringMode, timing: CorrectionTiming) -> Self {
        Self { mode, timing }
    }

    pub fn score(&self, base: f64, length: usize, complete: bool) -> f64 {
        if complete || self.timing == CorrectionTiming::DuringSearch {
            self.mode.corrected_score(base, length)
        } else {
            base
        }
    }

    /// Total order over hypotheses: higher corrected score first, then
    /// shorter, then lexicographically smaller token sequence.
    pub fn compare(&self, a: (f64, &[TokenId], bool), b: (f64, &[TokenId], bool)) -> Ordering {
        let sa = self.score(a.0, a.1.len(), a.2);
        let sb = self.score(b.0, b.1.len(), b.2);
        rank_order(sa, a.1, sb, b.1)
    }
}

/// Orders two already-corrected scores with the standard tie-break.
pub fn rank_order(sa: f64, ta: &[TokenId], sb: f64, tb: &[TokenId]) -> Ordering {
    sb.total_cmp(&sa)
        .then_with(|| ta.len().cmp(&tb.len()))
        .then_with(|| ta.cmp(tb))
}

/// [`rank_order`] for callers that only hold (score, length) pairs.
pub fn compare(a: (f64, usize), b: (f64, usize), mode: ScoringMode) -> Ordering {
    let sa = mode.corrected_score(a.0, a.1);
    let sb = mode.corrected_score(b.0, b.1);
    sb.total_cmp(&sa).then_with(|| a.1.cmp(&b.1))
}
