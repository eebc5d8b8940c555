//! Basis functions: numeric descriptors evaluated on every note of a part.
//!
//! Each basis has a textual label drawn from a small grammar (see
//! [`BasisKind::label`] and [`BasisKind::parse`]) so that columns of
//! different pieces can be matched by `(instrument class, label)`.

mod dynamics;
mod note;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beat::Beat;
use crate::error::{Error, Result};
use crate::score::{sounding_pitch, DynamicLevel, ImpulseKind, Part, WedgeKind};

pub use dynamics::{dynamics_bases, ANTICIPATION_LONG, ANTICIPATION_SHORT};
pub use note::{articulation_impulses, duration_and_ioi, metrical_basis, pitch_poly, vertical_neighbors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionPolicy {
    Max,
    Mean,
    Sum,
}

impl FusionPolicy {
    pub fn name(self) -> &'static str {
        match self {
            FusionPolicy::Max => "max",
            FusionPolicy::Mean => "mean",
            FusionPolicy::Sum => "sum",
        }
    }
}

impl FromStr for FusionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "max" => Ok(FusionPolicy::Max),
            "mean" => Ok(FusionPolicy::Mean),
            "sum" => Ok(FusionPolicy::Sum),
            other => Err(Error::Config(format!("unknown fusion policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Anticipation {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricalPosition {
    Beat(u32),
    Offbeat,
}

/// Every basis function the extractor knows about. The derived order is the
/// column order inside a part matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BasisKind {
    Constant,
    Pitch(u8),
    Duration,
    InterOnset,
    VerticalLower,
    VerticalHigher,
    VerticalTotal,
    Metrical { numerator: u32, denominator: u32, position: MetricalPosition },
    DynamicStep(DynamicLevel),
    DynamicAnticipation(DynamicLevel, Anticipation),
    WedgeRamp(WedgeKind),
    Impulse(ImpulseKind),
    Accent,
    Staccato,
    Fermata,
    RepeatSign,
}

impl BasisKind {
    pub fn label(&self) -> String {
        match *self {
            BasisKind::Constant => "const".into(),
            BasisKind::Pitch(1) => "pitch".into(),
            BasisKind::Pitch(k) => format!("pitch^{k}"),
            BasisKind::Duration => "duration".into(),
            BasisKind::InterOnset => "ioi".into(),
            BasisKind::VerticalLower => "vn.lower".into(),
            BasisKind::VerticalHigher => "vn.higher".into(),
            BasisKind::VerticalTotal => "vn.total".into(),
            BasisKind::Metrical { numerator, denominator, position: MetricalPosition::Beat(k) } => {
                format!("metrical.{numerator}/{denominator}.beat{k}")
            }
            BasisKind::Metrical { numerator, denominator, position: MetricalPosition::Offbeat } => {
                format!("metrical.{numerator}/{denominator}.offbeat")
            }
            BasisKind::DynamicStep(level) => format!("dyn.{}.step", level.name()),
            BasisKind::DynamicAnticipation(level, Anticipation::Short) => format!("dyn.{}.anticip-short", level.name()),
            BasisKind::DynamicAnticipation(level, Anticipation::Long) => format!("dyn.{}.anticip-long", level.name()),
            BasisKind::WedgeRamp(kind) => format!("dyn.{}.ramp", kind.name()),
            BasisKind::Impulse(kind) => format!("impulse.{}", kind.name()),
            BasisKind::Accent => "impulse.accent".into(),
            BasisKind::Staccato => "impulse.staccato".into(),
            BasisKind::Fermata => "impulse.fermata".into(),
            BasisKind::RepeatSign => "impulse.repeat-sign".into(),
        }
    }

    /// Inverse of [`BasisKind::label`].
    pub fn parse(label: &str) -> Option<BasisKind> {
        let simple = match label {
            "const" => Some(BasisKind::Constant),
            "pitch" => Some(BasisKind::Pitch(1)),
            "pitch^2" => Some(BasisKind::Pitch(2)),
            "pitch^3" => Some(BasisKind::Pitch(3)),
            "duration" => Some(BasisKind::Duration),
            "ioi" => Some(BasisKind::InterOnset),
            "vn.lower" => Some(BasisKind::VerticalLower),
            "vn.higher" => Some(BasisKind::VerticalHigher),
            "vn.total" => Some(BasisKind::VerticalTotal),
            "dyn.crescendo.ramp" => Some(BasisKind::WedgeRamp(WedgeKind::Crescendo)),
            "dyn.diminuendo.ramp" => Some(BasisKind::WedgeRamp(WedgeKind::Diminuendo)),
            "impulse.sfz" => Some(BasisKind::Impulse(ImpulseKind::Sfz)),
            "impulse.fp" => Some(BasisKind::Impulse(ImpulseKind::Fp)),
            "impulse.marcato" => Some(BasisKind::Impulse(ImpulseKind::Marcato)),
            "impulse.accent" => Some(BasisKind::Accent),
            "impulse.staccato" => Some(BasisKind::Staccato),
            "impulse.fermata" => Some(BasisKind::Fermata),
            "impulse.repeat-sign" => Some(BasisKind::RepeatSign),
            _ => None,
        };
        if simple.is_some() {
            return simple;
        }
        if let Some(rest) = label.strip_prefix("dyn.") {
            let (level, suffix) = rest.split_once('.')?;
            let level = DynamicLevel::from_name(level)?;
            return match suffix {
                "step" => Some(BasisKind::DynamicStep(level)),
                "anticip-short" => Some(BasisKind::DynamicAnticipation(level, Anticipation::Short)),
                "anticip-long" => Some(BasisKind::DynamicAnticipation(level, Anticipation::Long)),
                _ => None,
            };
        }
        if let Some(rest) = label.strip_prefix("metrical.") {
            let (sig, pos) = rest.split_once('.')?;
            let (num, den) = sig.split_once('/')?;
            let numerator = parse_canonical_u32(num)?;
            let denominator = parse_canonical_u32(den)?;
            let position = match pos {
                "offbeat" => MetricalPosition::Offbeat,
                _ => MetricalPosition::Beat(parse_canonical_u32(pos.strip_prefix("beat")?)?),
            };
            return Some(BasisKind::Metrical { numerator, denominator, position });
        }
        None
    }

    /// Reduction applied when several notes of a class share an onset.
    pub fn default_policy(&self) -> FusionPolicy {
        match self {
            BasisKind::Pitch(_) | BasisKind::Duration | BasisKind::InterOnset => FusionPolicy::Mean,
            BasisKind::VerticalLower | BasisKind::VerticalHigher | BasisKind::VerticalTotal => FusionPolicy::Sum,
            _ => FusionPolicy::Max,
        }
    }
}

fn parse_canonical_u32(s: &str) -> Option<u32> {
    if s.is_empty() || (s.len() > 1 && s.starts_with('0')) || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A column identity: which instrument class it belongs to, what it encodes
/// and how simultaneous values are fused.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub class: String,
    pub label: String,
    pub policy: FusionPolicy,
}

impl BasisDescriptor {
    pub fn new(class: &str, kind: BasisKind) -> BasisDescriptor {
        BasisDescriptor { class: class.to_string(), label: kind.label(), policy: kind.default_policy() }
    }

    pub fn kind(&self) -> Option<BasisKind> {
        BasisKind::parse(&self.label)
    }

    pub fn key(&self) -> (String, String) {
        (self.class.clone(), self.label.clone())
    }
}

/// Sparse row: `(column, value)` pairs sorted by column, zeros omitted.
pub type SparseRow = Vec<(usize, f64)>;

/// Value of `col` in a sparse row.
pub fn sparse_get(row: &[(usize, f64)], col: usize) -> f64 {
    row.binary_search_by_key(&col, |&(c, _)| c).map(|i| row[i].1).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoteRow {
    pub onset: Beat,
    /// Sounding pitch; kept for the class-level neighbour count.
    pub pitch: u8,
    pub values: SparseRow,
}

/// One row per note, notes with equal onsets on consecutive rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PartBasisMatrix {
    pub class: String,
    pub rows: Vec<NoteRow>,
    pub columns: Vec<BasisDescriptor>,
}

impl PartBasisMatrix {
    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.label == label)
    }

    pub fn value(&self, row: usize, label: &str) -> f64 {
        self.column_index(label).map(|c| sparse_get(&self.rows[row].values, c)).unwrap_or(0.0)
    }

    /// Sparse CSV dump: a header of labels, then `onset_num,onset_den,index=value,...`.
    pub fn to_sparse_csv(&self) -> String {
        let mut out = String::new();
        let labels: Vec<&str> = self.columns.iter().map(|c| c.label.as_str()).collect();
        out.push_str(&labels.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{},{}", row.onset.numer(), row.onset.denom()));
            for &(c, v) in &row.values {
                out.push_str(&format!(",{c}={v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Bases that exist for every note regardless of markings.
pub const CORE_KINDS: [BasisKind; 8] = [
    BasisKind::Pitch(1),
    BasisKind::Pitch(2),
    BasisKind::Pitch(3),
    BasisKind::Duration,
    BasisKind::InterOnset,
    BasisKind::VerticalLower,
    BasisKind::VerticalHigher,
    BasisKind::VerticalTotal,
];

/// Evaluate the whole catalogue on one part.
///
/// Continuous note descriptors (pitch terms, duration, inter-onset interval,
/// neighbour counts) are always present; marking, articulation and metrical
/// columns appear only when the part triggers them.
pub fn extract_part_bases(part: &Part) -> Result<PartBasisMatrix> {
    let notes = &part.notes;
    let mut per_note: Vec<Vec<(BasisKind, f64)>> = vec![Vec::new(); notes.len()];
    let mut pitches = Vec::with_capacity(notes.len());

    for (i, n) in notes.iter().enumerate() {
        let p = sounding_pitch(n, part.transposition as i32)?;
        pitches.push(p);
        let [q1, q2, q3] = pitch_poly(p);
        let (dur, ioi) = duration_and_ioi(notes, i);
        per_note[i].extend([
            (BasisKind::Pitch(1), q1),
            (BasisKind::Pitch(2), q2),
            (BasisKind::Pitch(3), q3),
            (BasisKind::Duration, dur),
            (BasisKind::InterOnset, ioi),
        ]);
        per_note[i].push((metrical_basis(n.onset, part.signature_at(n.onset)), 1.0));
        for kind in articulation_impulses(n, &part.repeat_signs) {
            per_note[i].push((kind, 1.0));
        }
    }

    // vertical neighbours inside runs of equal onsets
    let mut start = 0;
    while start < notes.len() {
        let end = start + notes[start..].iter().take_while(|n| n.onset == notes[start].onset).count();
        let chord = &pitches[start..end];
        for k in 0..chord.len() {
            let (lo, hi, total) = vertical_neighbors(chord, k);
            per_note[start + k].extend([
                (BasisKind::VerticalLower, lo as f64),
                (BasisKind::VerticalHigher, hi as f64),
                (BasisKind::VerticalTotal, total as f64),
            ]);
        }
        start = end;
    }

    for (kind, column) in dynamics_bases(part) {
        for (i, v) in column.into_iter().enumerate() {
            if v != 0.0 {
                per_note[i].push((kind, v));
            }
        }
    }

    let mut kinds: Vec<BasisKind> = CORE_KINDS.to_vec();
    for entries in &per_note {
        for &(k, v) in entries {
            if v != 0.0 {
                kinds.push(k);
            }
        }
    }
    kinds.sort();
    kinds.dedup();

    let class = part.instrument.class.as_str();
    let columns: Vec<BasisDescriptor> = kinds.iter().map(|&k| BasisDescriptor::new(class, k)).collect();
    let rows = notes
        .iter()
        .zip(per_note)
        .zip(&pitches)
        .map(|((n, entries), &pitch)| {
            let mut values: SparseRow = entries
                .into_iter()
                .filter(|&(_, v)| v != 0.0)
                .map(|(k, v)| (kinds.binary_search(&k).expect("kind collected above"), v))
                .collect();
            values.sort_by_key(|&(c, _)| c);
            NoteRow { onset: n.onset, pitch, values }
        })
        .collect();
    Ok(PartBasisMatrix { class: class.to_string(), rows, columns })
}
