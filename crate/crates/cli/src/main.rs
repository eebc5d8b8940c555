mod commands;
mod files;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use orchdyn::synth::{SynthKind, SynthSpec};

use crate::commands::EvalSettings;
use crate::manifest::{Manifest, ValidationReport};

#[derive(Parser)]
#[command(name = "orchdyn", version, about = "Score-based models of orchestral loudness")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode MusicXML scores as fused basis matrices.
    Extract {
        scores: Vec<PathBuf>,
        #[arg(short, long, env = "ORCHDYN_OUT", default_value = ".")]
        out: PathBuf,
        /// Piece id (defaults to the file stem).
        #[arg(long)]
        id: Option<String>,
        /// e.g. `pitch=max,dyn.=mean`
        #[arg(long, default_value = "")]
        policy_overrides: String,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Momentary loudness (400 ms window, 100 ms hop) of a WAV file.
    Loudness {
        wav: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus with a manifest.
    Synth {
        /// linear, interaction or lagged
        kind: SynthKind,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        pieces: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        inputs: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Leave-one-out evaluation of a corpus manifest.
    Evaluate {
        manifest: PathBuf,
        #[arg(short, long, env = "ORCHDYN_OUT", default_value = "report")]
        out: PathBuf,
        /// Extraction cache (defaults to `<out>/cache`).
        #[arg(long, env = "ORCHDYN_CACHE")]
        cache: Option<PathBuf>,
        /// JSON settings file; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        /// lin, ff, rnn, a comma list, or all
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        delta_beats: Option<f64>,
        #[arg(long)]
        validation_pieces: Option<usize>,
        #[arg(long)]
        policy_overrides: Option<String>,
        /// Also report MSE in loudness units.
        #[arg(long)]
        raw: bool,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Extract { scores, out, id, policy_overrides, jobs } => {
            commands::extract(&scores, &out, id.as_deref(), &policy_overrides, jobs)?;
        }
        Command::Loudness { wav, out } => commands::loudness(&wav, &out)?,
        Command::Synth { kind, out, seed, pieces, rows, inputs, noise } => {
            let mut spec = SynthSpec::new(kind, seed);
            spec.pieces = pieces.unwrap_or(spec.pieces);
            spec.rows = rows.unwrap_or(spec.rows);
            spec.inputs = inputs.unwrap_or(spec.inputs);
            spec.noise = noise.unwrap_or(spec.noise);
            let path = commands::synth(&spec, &out)?;
            println!("{}", path.display());
        }
        Command::Evaluate {
            manifest,
            out,
            cache,
            config,
            variant,
            seed,
            hidden,
            delta_beats,
            validation_pieces,
            policy_overrides,
            raw,
            jobs,
        } => {
            let mut s = match &config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<EvalSettings>(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => EvalSettings::default(),
            };
            s.variant = variant.unwrap_or(s.variant);
            s.delta_beats = delta_beats.unwrap_or(s.delta_beats);
            s.policy_overrides = policy_overrides.unwrap_or(s.policy_overrides);
            s.raw |= raw;
            s.train.seed = seed.unwrap_or(s.train.seed);
            s.train.hidden = hidden.unwrap_or(s.train.hidden);
            s.train.validation_pieces = validation_pieces.unwrap_or(s.train.validation_pieces);

            let manifest = Manifest::load(&manifest)?;
            let cache = cache.unwrap_or_else(|| out.join("cache"));
            let run = commands::evaluate(&manifest, &s, &out, &cache, jobs)?;
            print!("{}", run.table);
            let failed: Vec<_> = run.report.folds.iter().filter(|f| !f.is_ok()).collect();
            if !failed.is_empty() {
                for f in &failed {
                    eprintln!("fold {} / {} failed: {:?}", f.piece_id, f.variant, f.status);
                }
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// 1 for bad input, 2 for numerical failure.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<ValidationReport>().is_some() {
            return 1;
        }
        if let Some(err) = cause.downcast_ref::<orchdyn::Error>() {
            return if err.is_numerical() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
