use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use orchdyn::eval::{curve_svg, format_table, run_experiment, CorpusPiece, ExperimentConfig, ExperimentReport};
use orchdyn::fusion::{build_piece_matrix, read_piece_matrix, write_piece_matrix, FusionPolicies, PieceMatrix};
use orchdyn::models::{TrainConfig, Variant};
use orchdyn::score::parse_score;
use orchdyn::synth::{generate, SynthSpec};
use orchdyn::targets::{r128_loudness, read_wav, sample_targets, standardize, Alignment, LoudnessCurve, DEFAULT_DELTA};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::files::{hash_parts, read_text, write_atomic};
use crate::manifest::{Manifest, ManifestPiece};

const MATRIX_CACHE_VERSION: &[u8] = b"matrix-1";
const LOUDNESS_CACHE_VERSION: &[u8] = b"loudness-1";

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn extract_matrix(bytes: &[u8], id: &str, policies: &FusionPolicies) -> Result<PieceMatrix> {
    let parsed = parse_score(bytes, id)?;
    for w in &parsed.warnings {
        log::warn!("{id}: {w}");
    }
    Ok(build_piece_matrix(&parsed.score, policies)?)
}

fn matrix_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.json")))
}

/// Parse, encode and fuse scores, writing `<id>.csv` and `<id>.json` per score.
pub fn extract(scores: &[PathBuf], out: &Path, id: Option<&str>, overrides: &str, jobs: usize) -> Result<()> {
    if id.is_some() && scores.len() != 1 {
        bail!("--id needs exactly one score");
    }
    let policies: FusionPolicies = overrides.parse()?;
    pool(jobs)?.install(|| {
        scores.par_iter().try_for_each(|path| -> Result<()> {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let id = id.map(str::to_string).unwrap_or(stem);
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let m = extract_matrix(&bytes, &id, &policies).with_context(|| format!("extracting {}", path.display()))?;
            let (csv, json) = write_piece_matrix(&m)?;
            let (pc, pj) = matrix_paths(out, &id);
            write_atomic(&pc, &csv)?;
            write_atomic(&pj, &json)?;
            log::info!("{}: {} rows, {} columns", id, m.n_rows(), m.n_cols());
            Ok(())
        })
    })
}

/// Momentary loudness curve of a WAV file.
pub fn loudness(wav: &Path, out: &Path) -> Result<()> {
    let bytes = std::fs::read(wav).with_context(|| format!("reading {}", wav.display()))?;
    let curve = wav_loudness(&bytes).with_context(|| format!("measuring {}", wav.display()))?;
    write_atomic(out, &curve.to_csv())
}

fn wav_loudness(bytes: &[u8]) -> Result<LoudnessCurve> {
    let audio = read_wav(bytes)?;
    Ok(r128_loudness(&audio.channels, audio.rate)?)
}

/// Write a synthetic corpus: piece matrices, a one-second-per-beat alignment,
/// a loudness curve holding each target for a beat, and a manifest.
pub fn synth(spec: &SynthSpec, out: &Path) -> Result<PathBuf> {
    let pieces = generate(spec)?;
    let mut entries = Vec::new();
    for p in &pieces {
        let m = p.to_piece_matrix();
        let (csv, json) = write_piece_matrix(&m)?;
        let (pc, pj) = matrix_paths(out, &p.id);
        write_atomic(&pc, &csv)?;
        write_atomic(&pj, &json)?;

        let rows = p.y.len();
        let align = Alignment::constant(1.0, rows as i64)?;
        let align_path = out.join(format!("{}.align.csv", p.id));
        write_atomic(&align_path, &align.to_csv())?;

        let steps = 10 * rows;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 / 10.0).collect();
        let values = (0..=steps).map(|k| Some(-23.0 + 3.0 * p.y[(k / 10).min(rows - 1)])).collect();
        let curve = LoudnessCurve::new(times, values)?;
        let loud_path = out.join(format!("{}.loudness.csv", p.id));
        write_atomic(&loud_path, &curve.to_csv())?;

        let file = |path: &Path| PathBuf::from(path.file_name().unwrap());
        entries.push(ManifestPiece {
            id: p.id.clone(),
            score: None,
            matrix: Some(file(&pc)),
            alignment: file(&align_path),
            loudness: Some(file(&loud_path)),
            audio: None,
            tags: [("corpus".to_string(), spec.kind.to_string())].into_iter().collect(),
        });
    }
    let manifest = Manifest { pieces: entries, base: out.to_path_buf() };
    let path = out.join("manifest.json");
    write_atomic(&path, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(path)
}

/// Settings of an evaluation run. Loaded from a JSON config file, then
/// overridden by command-line flags; the result is echoed into the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub variant: String,
    pub delta_beats: f64,
    pub policy_overrides: String,
    pub raw: bool,
    pub train: TrainConfig,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            variant: "all".into(),
            delta_beats: DEFAULT_DELTA,
            policy_overrides: String::new(),
            raw: false,
            train: TrainConfig::default(),
        }
    }
}

pub fn parse_variants(s: &str) -> Result<Vec<Variant>> {
    if s == "all" {
        return Ok(Variant::ALL.to_vec());
    }
    let mut out: Vec<Variant> = Vec::new();
    for part in s.split(',').map(str::trim) {
        let v: Variant = part.parse()?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out.sort();
    Ok(out)
}

struct Loaded {
    piece: CorpusPiece,
}

fn load_piece(m: &Manifest, p: &ManifestPiece, s: &EvalSettings, policies: &FusionPolicies, cache: &Path) -> Result<Loaded> {
    let matrix = if let Some(score) = &p.score {
        let path = m.resolve(score);
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let key = hash_parts(&[MATRIX_CACHE_VERSION, p.id.as_bytes(), s.policy_overrides.trim().as_bytes(), &bytes]);
        let (pc, pj) = matrix_paths(cache, &key);
        if pc.is_file() && pj.is_file() {
            log::info!("{}: cache hit for extracted matrix", p.id);
        } else {
            let fresh = extract_matrix(&bytes, &p.id, policies).with_context(|| format!("extracting {}", path.display()))?;
            let (csv, json) = write_piece_matrix(&fresh)?;
            write_atomic(&pc, &csv)?;
            write_atomic(&pj, &json)?;
        }
        read_piece_matrix(&read_text(&pc)?, &read_text(&pj)?)?
    } else {
        let path = m.resolve(p.matrix.as_ref().expect("validated"));
        let mut matrix = read_piece_matrix(&read_text(&path)?, &read_text(&path.with_extension("json"))?)
            .with_context(|| format!("reading {}", path.display()))?;
        matrix.piece_id = p.id.clone();
        matrix
    };

    let align_path = m.resolve(&p.alignment);
    let align = Alignment::from_csv(&read_text(&align_path)?).with_context(|| format!("reading {}", align_path.display()))?;
    let curve_text = if let Some(l) = &p.loudness {
        read_text(&m.resolve(l))?
    } else {
        let path = m.resolve(p.audio.as_ref().expect("validated"));
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let cached = cache.join(format!("{}.loudness.csv", hash_parts(&[LOUDNESS_CACHE_VERSION, &bytes])));
        if cached.is_file() {
            log::info!("{}: cache hit for loudness curve", p.id);
        } else {
            let curve = wav_loudness(&bytes).with_context(|| format!("measuring {}", path.display()))?;
            write_atomic(&cached, &curve.to_csv())?;
        }
        read_text(&cached)?
    };
    let curve = LoudnessCurve::from_csv(&curve_text).with_context(|| format!("piece {}: loudness curve", p.id))?;
    let raw = sample_targets(&align, &curve, &matrix.onsets, s.delta_beats).with_context(|| format!("piece {}: sampling targets", p.id))?;
    let targets = standardize(&raw).with_context(|| format!("piece {}: standardizing targets", p.id))?;
    Ok(Loaded { piece: CorpusPiece { matrix, targets } })
}

pub struct EvalRun {
    pub report: ExperimentReport,
    pub table: String,
}

/// Full leave-one-out run over a manifest; writes the report into `out`.
pub fn evaluate(manifest: &Manifest, s: &EvalSettings, out: &Path, cache: &Path, jobs: usize) -> Result<EvalRun> {
    let variants = parse_variants(&s.variant)?;
    let policies: FusionPolicies = s.policy_overrides.parse()?;
    s.train.validate()?;
    let pool = pool(jobs)?;
    let pieces: Vec<CorpusPiece> = pool.install(|| {
        manifest
            .pieces
            .par_iter()
            .map(|p| load_piece(manifest, p, s, &policies, cache).map(|l| l.piece))
            .collect::<Result<_>>()
    })?;

    let mut config = ExperimentConfig::new(variants, s.train.clone());
    config.jobs = jobs;
    let report = run_experiment(&pieces, &config)?;

    let echo = serde_json::to_string(s)?;
    let mut table = format_table(&report, s.raw);
    table.push_str(&format!("\ndataset {}\nsingular bases: {}\nconfig {echo}\n", report.fingerprint, report.singular.len()));
    write_atomic(&out.join("table.txt"), &table)?;
    write_atomic(&out.join("results.csv"), &report.to_csv())?;
    write_atomic(&out.join("singular.csv"), &report.singular_csv())?;
    let json = serde_json::json!({
        "config": s,
        "dataset": report.fingerprint,
        "folds": report.folds,
        "singular": report.singular,
    });
    write_atomic(&out.join("report.json"), &(serde_json::to_string_pretty(&json)? + "\n"))?;
    for c in &report.curves {
        write_atomic(&out.join("curves").join(format!("{}.csv", c.piece_id)), &c.to_csv())?;
        write_atomic(&out.join("curves").join(format!("{}.svg", c.piece_id)), &curve_svg(c))?;
    }
    Ok(EvalRun { report, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_lists() {
        assert_eq!(parse_variants("all").unwrap(), Variant::ALL.to_vec());
        assert_eq!(parse_variants("lin").unwrap(), vec![Variant::Linear]);
        assert_eq!(parse_variants("lin,rnn").unwrap(), vec![Variant::Recurrent, Variant::Linear]);
        assert!(parse_variants("svm").is_err());
    }

    #[test]
    fn settings_defaults_and_unknown_keys() {
        let s: EvalSettings = serde_json::from_str(r#"{"train": {"hidden": 5}}"#).unwrap();
        assert_eq!(s.train.hidden, 5);
        assert_eq!(s.delta_beats, DEFAULT_DELTA);
        assert!(serde_json::from_str::<EvalSettings>(r#"{"learning": 1}"#).is_err());
    }
}
