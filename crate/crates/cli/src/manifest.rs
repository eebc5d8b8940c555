//! Corpus manifests: one JSON object listing the pieces of an experiment.
//!
//! ```json
//! {"pieces": [{"id": "beethoven-s3-1", "score": "scores/op55-1.mxl",
//!              "alignment": "align/op55-1.csv", "audio": "audio/op55-1.wav",
//!              "tags": {"composer": "Beethoven"}}]}
//! ```
//!
//! Each piece names either a `score` or a pre-extracted `matrix` (the
//! sidecar sits next to it with a `.json` extension), and either a
//! `loudness` CSV or an `audio` WAV. Relative paths resolve against the
//! manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestPiece {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,
    pub alignment: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loudness: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub pieces: Vec<ManifestPiece>,
    #[serde(skip)]
    pub base: PathBuf,
}

/// Every problem found in a manifest.
#[derive(Debug)]
pub struct ValidationReport(pub Vec<String>);

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "manifest validation failed ({} problems):", self.0.len())?;
        for p in &self.0 {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Manifest, ValidationReport> {
        let mut m: Manifest =
            serde_json::from_str(text).map_err(|e| ValidationReport(vec![format!("manifest is not valid: {e}")]))?;
        m.base = base.to_path_buf();
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Manifest, ValidationReport> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ValidationReport(vec![format!("cannot read manifest {}: {e}", path.display())]))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Manifest::parse(&text, &base)?;
        m.validate()?;
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), ValidationReport> {
        let mut problems = Vec::new();
        if self.pieces.is_empty() {
            problems.push("manifest lists no pieces".to_string());
        }
        let mut seen = HashSet::new();
        for p in &self.pieces {
            if p.id.is_empty() || p.id.contains(['/', '\\']) {
                problems.push(format!("piece id {:?} is not a usable file name", p.id));
            }
            if !seen.insert(&p.id) {
                problems.push(format!("piece {}: duplicate id", p.id));
            }
            let mut need = |what: &str, path: &Option<PathBuf>| {
                if let Some(path) = path {
                    let full = self.resolve(path);
                    if !full.is_file() {
                        problems.push(format!("piece {}: {what} file {} not found", p.id, full.display()));
                    }
                }
            };
            need("score", &p.score);
            need("matrix", &p.matrix);
            need("alignment", &Some(p.alignment.clone()));
            need("loudness", &p.loudness);
            need("audio", &p.audio);
            if let Some(m) = &p.matrix {
                let side = self.resolve(m).with_extension("json");
                if self.resolve(m).is_file() && !side.is_file() {
                    problems.push(format!("piece {}: matrix sidecar {} not found", p.id, side.display()));
                }
            }
            match (&p.score, &p.matrix) {
                (None, None) => problems.push(format!("piece {}: needs a score or a matrix", p.id)),
                (Some(_), Some(_)) => problems.push(format!("piece {}: give a score or a matrix, not both", p.id)),
                _ => {}
            }
            match (&p.loudness, &p.audio) {
                (None, None) => problems.push(format!("piece {}: needs a loudness curve or audio", p.id)),
                (Some(_), Some(_)) => problems.push(format!("piece {}: give loudness or audio, not both", p.id)),
                _ => {}
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ValidationReport(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_every_problem() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "").unwrap();
        let text = r#"{"pieces": [
            {"id": "a", "score": "a.xml", "alignment": "a.csv", "loudness": "gone.csv"},
            {"id": "a", "alignment": "a.csv", "audio": "a.csv"}
        ]}"#;
        let m = Manifest::parse(text, dir.path()).unwrap();
        let err = m.validate().unwrap_err().to_string();
        assert!(err.contains("score file"), "{err}");
        assert!(err.contains("gone.csv"), "{err}");
        assert!(err.contains("duplicate id"), "{err}");
        assert!(err.contains("needs a score or a matrix"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(Manifest::parse(r#"{"pieces": [], "extra": 1}"#, Path::new(".")).is_err());
    }
}
