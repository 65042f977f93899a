//! Command-line surface of the `brevity` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::{Runner, TUNED_GAMMA_FILE};
use crate::config::{ExperimentConfig, ModelKind};
use crate::demo;
use crate::report::{bleu100, f6};

#[derive(Debug, Parser)]
#[command(
    name = "brevity",
    version,
    about = "Beam search, length bias and word-reward tuning experiments"
)]
pub struct Cli {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Overrides the configured data directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    /// Worker threads for decoding. Results do not depend on this.
    #[arg(long, global = true, env = "BREVITY_WORKERS", default_value_t = 1)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the effective configuration as TOML.
    Config {
        /// Ignore --config and print the built-in defaults.
        #[arg(long)]
        dump_defaults: bool,
    },
    /// Generate a synthetic parallel corpus into the data directory.
    GenData {
        /// Use the corpus preset of the budget demo.
        #[arg(long)]
        budget_demo: bool,
    },
    /// Build a model from the data directory and save it.
    Train {
        #[arg(long, value_enum)]
        kind: Option<ModelKind>,
        /// Fraction of the training split to use (toy model only).
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Translate a source file, one sentence per line.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// baseline | norm | gnmt:alpha=A | reward:gamma=G; a value may be
        /// `@tuned` or `@<file>`.
        #[arg(long)]
        score: Option<String>,
        #[arg(long)]
        beam: Option<usize>,
        /// Hypothesis file; `<out-dir>/hyp.txt` when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write per-step beam traces to this TSV file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Tune the word reward on a dev set.
    Tune {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long, requires = "dev_tgt")]
        dev_src: Option<PathBuf>,
        #[arg(long, requires = "dev_src")]
        dev_tgt: Option<PathBuf>,
    },
    /// Score hypotheses against references.
    Evaluate {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// BLEU and length ratio on the test split across beam sizes and modes.
    SweepBeam {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// BLEU and length ratio on the dev split across fixed word rewards.
    SweepGamma {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Greedy, beam and exhaustive search on the three-word example model.
    DemoLabelBias,
    /// Empty translations at large beams and their repair by a tuned reward.
    DemoBudget,
}

/// Loads the configuration and applies command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match (&cli.config, &cli.command) {
        (
            _,
            Command::Config {
                dump_defaults: true,
            },
        )
        | (None, _) => ExperimentConfig::default(),
        (Some(path), _) => ExperimentConfig::load(path)?,
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.paths.out_dir = dir.clone();
    }
    if let Some(dir) = &cli.data_dir {
        config.paths.data_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

/// Parses `args` (program name first) and runs the command, printing a
/// short summary to `out`.
pub fn run_with<I, T>(args: I, out: &mut dyn std::io::Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let config = effective_config(&cli)?;
    let runner = Runner::new(config, cli.workers);
    let cfg = &runner.config;
    match cli.command {
        Command::Config { .. } => write!(out, "{}", cfg.to_toml())?,
        Command::GenData { budget_demo } => {
            let d = runner.gen_data(budget_demo)?;
            writeln!(
                out,
                "wrote {} train / {} dev / {} test pairs to {}",
                d.train.len(),
                d.dev.len(),
                d.test.len(),
                runner.data_dir().display()
            )?;
        }
        Command::Train {
            kind,
            fraction,
            output,
        } => {
            let kind = kind.unwrap_or(cfg.model.kind);
            let path = runner.train(kind, fraction, output)?;
            writeln!(out, "saved {kind:?} model to {}", path.display())?;
        }
        Command::Decode {
            input,
            model,
            score,
            beam,
            output,
            trace,
        } => {
            let model = runner.load_model(model.as_deref())?;
            let mode = runner.resolve_score(score.as_deref().unwrap_or(&cfg.decode.score))?;
            let beam = beam.unwrap_or(cfg.decode.beam);
            let output = output.unwrap_or_else(|| runner.out_dir().join("hyp.txt"));
            let hyps = runner.decode(&model, &input, mode, beam, &output, trace.as_deref())?;
            let empty = hyps.iter().filter(|h| h.tokens.is_empty()).count();
            writeln!(
                out,
                "decoded {} sentences ({mode}, beam {beam}, {empty} empty) to {}",
                hyps.len(),
                output.display()
            )?;
        }
        Command::Tune {
            model,
            beam,
            dev_src,
            dev_tgt,
        } => {
            let model = runner.load_model(model.as_deref())?;
            let dev = runner.read_dev(&model, dev_src.as_deref(), dev_tgt.as_deref())?;
            let t = runner.tune(&model, &dev, beam)?;
            let reason = t.state.stop_reason.map_or("-", |r| r.as_str());
            writeln!(
                out,
                "gamma = {} after {} epochs ({reason}); written to {}",
                f6(t.state.gamma),
                t.state.history.len(),
                t.gamma_file.display()
            )?;
        }
        Command::Evaluate { hyp, reference } => {
            let e = runner.evaluate(&hyp, &reference)?;
            writeln!(
                out,
                "BLEU {} | length ratio {} | empty {}",
                f6(bleu100(&e.bleu)),
                f6(e.length.ratio),
                f6(e.length.empty_fraction)
            )?;
        }
        Command::SweepBeam { model } => {
            let cells = runner.sweep_beam(model.as_deref())?;
            for c in &cells {
                writeln!(
                    out,
                    "{:.2}\t{}\tk={}\tBLEU {}\tratio {}",
                    c.fraction,
                    c.mode,
                    c.beam,
                    f6(c.bleu),
                    f6(c.length_ratio)
                )?;
            }
        }
        Command::SweepGamma { model } => {
            let model = runner.load_model(model.as_deref())?;
            for p in runner.sweep_gamma(&model)? {
                writeln!(
                    out,
                    "gamma {}\tBLEU {}\tratio {}",
                    f6(p.gamma),
                    f6(100.0 * p.bleu),
                    f6(p.length_ratio)
                )?;
            }
        }
        Command::DemoLabelBias => {
            let r = demo::run_label_bias(&runner)?;
            write!(out, "{}", r.text)?;
        }
        Command::DemoBudget => {
            let d = demo::run_budget(&runner)?;
            writeln!(
                out,
                "beam\tbaseline BLEU\tratio\tempty\treward BLEU\tratio\tgamma"
            )?;
            for (b, r) in d.baseline.iter().zip(&d.reward) {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    b.beam,
                    f6(b.bleu),
                    f6(b.length_ratio),
                    f6(b.empty_fraction),
                    f6(r.bleu),
                    f6(r.length_ratio),
                    f6(r.gamma)
                )?;
            }
            writeln!(
                out,
                "reports in {} (tuned gamma per beam in tuned_gamma_k*.txt; `tune` writes {TUNED_GAMMA_FILE})",
                runner.out_dir().display()
            )?;
        }
    }
    Ok(())
}
