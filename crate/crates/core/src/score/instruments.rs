//! Resolution of notated instrument names to canonical (unabbreviated English)
//! instrument classes.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum normalized edit similarity for a name to resolve.
pub const ACCEPT_THRESHOLD: f64 = 0.6;

const ALIAS_TABLE: &str = include_str!("../../data/instruments.tsv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalInstrument {
    pub class: String,
    pub score: f64,
}

impl CanonicalInstrument {
    /// An exact class name, bypassing the matcher.
    pub fn exact(class: &str) -> CanonicalInstrument {
        CanonicalInstrument { class: class.to_string(), score: 1.0 }
    }
}

struct AliasEntry {
    class: &'static str,
    aliases: Vec<String>,
}

fn table() -> &'static [AliasEntry] {
    static TABLE: OnceLock<Vec<AliasEntry>> = OnceLock::new();
    TABLE.get_or_init(|| {
        ALIAS_TABLE
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|line| {
                let (class, aliases) = line.split_once('\t').expect("alias table row needs a tab");
                let mut aliases: Vec<String> = aliases.split('|').map(normalize).filter(|a| !a.is_empty()).collect();
                aliases.push(normalize(class));
                aliases.sort();
                aliases.dedup();
                AliasEntry { class, aliases }
            })
            .collect()
    })
}

/// All canonical class names, alphabetically.
pub fn canonical_classes() -> &'static [&'static str] {
    static CLASSES: OnceLock<Vec<&'static str>> = OnceLock::new();
    CLASSES.get_or_init(|| {
        let mut v: Vec<&'static str> = table().iter().map(|e| e.class).collect();
        v.sort_unstable();
        v
    })
}

fn fold_char(c: char, out: &mut String) {
    let folded = match c {
        'à' | 'á' | 'â' | 'ã' | 'ä' | 'å' => "a",
        'ç' => "c",
        'è' | 'é' | 'ê' | 'ë' => "e",
        'ì' | 'í' | 'î' | 'ï' => "i",
        'ñ' => "n",
        'ò' | 'ó' | 'ô' | 'õ' | 'ö' | 'ø' => "o",
        'ù' | 'ú' | 'û' | 'ü' => "u",
        'ß' => "ss",
        'œ' => "oe",
        'æ' => "ae",
        '♭' => "b",
        '♯' => "#",
        _ => {
            out.push(c);
            return;
        }
    };
    out.push_str(folded);
}

fn is_instance_token(tok: &str) -> bool {
    let t = tok.trim_matches(|c: char| c == '.' || c == ',' || c == ')' || c == '(');
    if t.is_empty() {
        return true;
    }
    if t.chars().all(|c| c.is_ascii_digit() || c == '.' || c == '/' || c == '-' || c == '+' || c == '&') {
        return true;
    }
    matches!(t, "i" | "ii" | "iii" | "iv" | "i-ii" | "i/ii" | "iii-iv" | "iii/iv")
}

/// Lowercase, fold diacritics, drop a transposition suffix ("in B♭") and
/// trailing instance numbers, and strip punctuation.
pub(crate) fn normalize(raw: &str) -> String {
    let mut folded = String::with_capacity(raw.len());
    for c in raw.trim().to_lowercase().chars() {
        fold_char(c, &mut folded);
    }
    let folded = match folded.find(" in ") {
        Some(idx) if idx > 0 => folded[..idx].to_string(),
        _ => folded,
    };
    let mut tokens: Vec<&str> = folded.split_whitespace().collect();
    while tokens.len() > 1 && tokens.last().is_some_and(|t| is_instance_token(t)) {
        tokens.pop();
    }
    // a glued instance digit, as in "Vln.2" or "Violin1"
    let joined = tokens.join(" ");
    let trimmed = joined.trim_end_matches(|c: char| c.is_ascii_digit());
    let base = if trimmed.trim().is_empty() { joined.as_str() } else { trimmed };
    base.chars()
        .map(|c| if c == '.' || c == '_' { ' ' } else { c })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b)
}

/// Match a notated name against the alias table.
///
/// The best alias similarity per class decides; ties go to the
/// alphabetically first class name.
pub fn resolve_instrument(raw_name: &str) -> Result<CanonicalInstrument> {
    let name = normalize(raw_name);
    if name.is_empty() {
        return Err(Error::UnresolvedInstrument { name: raw_name.to_string(), candidates: Vec::new() });
    }
    let mut scored: Vec<(f64, &'static str)> = table()
        .iter()
        .map(|entry| {
            let best = entry.aliases.iter().map(|a| similarity(&name, a)).fold(0.0, f64::max);
            (best, entry.class)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let (score, class) = scored[0];
    if score < ACCEPT_THRESHOLD {
        return Err(Error::UnresolvedInstrument {
            name: raw_name.to_string(),
            candidates: scored.iter().take(3).map(|(_, c)| c.to_string()).collect(),
        });
    }
    Ok(CanonicalInstrument { class: class.to_string(), score })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn german_and_abbreviated_names() {
        assert_eq!(resolve_instrument("Fagott").unwrap().class, "bassoon");
        assert_eq!(resolve_instrument("Vln. 2").unwrap().class, "violin");
        assert_eq!(resolve_instrument("Cl.").unwrap().class, "clarinet");
        assert_eq!(resolve_instrument("Klarinette in B♭ 1").unwrap().class, "clarinet");
        assert_eq!(resolve_instrument("Violoncello").unwrap().class, "cello");
        assert_eq!(resolve_instrument("Kontrabass").unwrap().class, "double bass");
        assert_eq!(resolve_instrument("Hörner 3/4").unwrap().class, "horn");
        assert_eq!(resolve_instrument("Flûte").unwrap().class, "flute");
        assert_eq!(resolve_instrument("Violin I").unwrap().class, "violin");
        assert_eq!(resolve_instrument("Oboe 2").unwrap().class, "oboe");
        assert_eq!(resolve_instrument("Pauken").unwrap().class, "timpani");
    }

    #[test]
    fn unknown_name_lists_three_candidates() {
        match resolve_instrument("Kazoo") {
            Err(Error::UnresolvedInstrument { name, candidates }) => {
                assert_eq!(name, "Kazoo");
                assert_eq!(candidates.len(), 3);
            }
            other => panic!("expected unresolved, got {other:?}"),
        }
        assert!(resolve_instrument("   ").is_err());
    }

    #[test]
    fn canonical_names_resolve_to_themselves() {
        for class in canonical_classes() {
            let got = resolve_instrument(class).unwrap();
            assert_eq!(&got.class, class);
            assert_eq!(got.score, 1.0);
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("Vln. 2"), "vln");
        assert_eq!(normalize("Clarinet in A"), "clarinet");
        assert_eq!(normalize("Violin1"), "violin");
        assert_eq!(normalize("Flöte II"), "flote");
        assert_eq!(normalize("Horn 1.2"), "horn");
    }
}
