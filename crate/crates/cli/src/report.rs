//! TSV rendering of evaluation results.
//!
//! Floats are written with six decimals so reports from identical runs are
//! byte-identical; absent values are written as `-`.

use std::fmt::Write as _;
use std::hash::Hash;

use anyhow::Result;
use brevity::evaluation::{
    corpus_bleu, cumulative_bleu_by_length, length_report, CurvePoint, LengthHistogram,
};
use brevity::{BleuScore, LengthReport};

use crate::config::EvaluationConfig;

pub fn f6(x: f64) -> String {
    format!("{x:.6}")
}

/// BLEU on a 0–100 scale, as usually reported.
pub fn bleu100(score: &BleuScore) -> f64 {
    100.0 * score.score
}

/// Everything `evaluate` reports for one system output.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub bleu: BleuScore,
    pub length: LengthReport,
    pub curve: Vec<CurvePoint>,
}

pub fn evaluate<T, H, R>(hyps: &[H], refs: &[R], config: &EvaluationConfig) -> Result<Evaluation>
where
    T: Eq + Hash,
    H: AsRef<[T]>,
    R: AsRef<[T]>,
{
    let bleu = corpus_bleu(hyps, refs, config.max_order)?;
    let hyp_lens: Vec<usize> = hyps.iter().map(|h| h.as_ref().len()).collect();
    let ref_lens: Vec<usize> = refs.iter().map(|r| r.as_ref().len()).collect();
    let length = length_report(&hyp_lens, &ref_lens, config.bin_width)?;
    let curve = cumulative_bleu_by_length(hyps, refs, &config.thresholds(), config.max_order)?;
    Ok(Evaluation {
        bleu,
        length,
        curve,
    })
}

impl Evaluation {
    /// Three blocks separated by blank lines: summary, histogram, curve.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# summary\nmetric\tvalue\n");
        let b = &self.bleu;
        let l = &self.length;
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k}\t{v}");
        };
        row("bleu", f6(bleu100(b)));
        for (i, p) in b.precisions.iter().enumerate() {
            row(&format!("precision_{}", i + 1), f6(*p));
        }
        row("brevity_penalty", f6(b.brevity_penalty));
        row("hypothesis_tokens", l.hypothesis_tokens.to_string());
        row("reference_tokens", l.reference_tokens.to_string());
        row("length_ratio", f6(l.ratio));
        row("mean_sentence_length_ratio", f6(l.mean_sentence_ratio));
        row("empty_fraction", f6(l.empty_fraction));
        row("sentences", l.sentences.to_string());
        row("excluded_empty_references", l.excluded.to_string());
        out.push_str("\n# length_histogram\n");
        out.push_str(&histogram_table(&[("count", &l.histogram)]));
        out.push_str("\n# cumulative_bleu\n");
        out.push_str(&curve_table(&[("bleu", &self.curve)]));
        out
    }
}

/// One row per histogram bin, one column per system.
pub fn histogram_table(columns: &[(&str, &LengthHistogram)]) -> String {
    let mut out = String::from("bin");
    for (name, _) in columns {
        let _ = write!(out, "\t{name}");
    }
    out.push('\n');
    let rows: Vec<Vec<(String, usize)>> = columns.iter().map(|(_, h)| h.rows()).collect();
    if let Some(first) = rows.first() {
        for (i, (label, _)) in first.iter().enumerate() {
            out.push_str(label);
            for r in &rows {
                let _ = write!(out, "\t{}", r[i].1);
            }
            out.push('\n');
        }
    }
    out
}

/// Cumulative BLEU by reference length; one BLEU column per system.
pub fn curve_table(columns: &[(&str, &[CurvePoint])]) -> String {
    let mut out = String::from("max_ref_len\tsentences");
    for (name, _) in columns {
        let _ = write!(out, "\t{name}");
    }
    out.push('\n');
    if let Some((_, first)) = columns.first() {
        for (i, point) in first.iter().enumerate() {
            let limit = point
                .max_reference_length
                .map_or_else(|| "inf".to_string(), |t| t.to_string());
            let _ = write!(out, "{limit}\t{}", point.sentences);
            for (_, curve) in columns {
                let cell = curve[i]
                    .bleu
                    .as_ref()
                    .map_or_else(|| "-".into(), |b| f6(bleu100(b)));
                let _ = write!(out, "\t{cell}");
            }
            out.push('\n');
        }
    }
    out
}
