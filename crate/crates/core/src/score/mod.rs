//! Internal score representation: parts, notes, markings and the measure
//! timeline they hang off.

mod instruments;
mod musicxml;
mod repeats;

use serde::{Deserialize, Serialize};

use crate::beat::Beat;
use crate::error::{Error, Result};

pub use instruments::{canonical_classes, resolve_instrument, CanonicalInstrument, ACCEPT_THRESHOLD};
pub use musicxml::{parse_mxl, parse_score, parse_score_file, ParseWarning, ParsedScore};
pub use repeats::{playback_order, unfold_repeats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicLevel {
    Ppp,
    Pp,
    P,
    Mp,
    Mf,
    F,
    Ff,
    Fff,
}

impl DynamicLevel {
    pub const ALL: [DynamicLevel; 8] = [
        DynamicLevel::Ppp,
        DynamicLevel::Pp,
        DynamicLevel::P,
        DynamicLevel::Mp,
        DynamicLevel::Mf,
        DynamicLevel::F,
        DynamicLevel::Ff,
        DynamicLevel::Fff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DynamicLevel::Ppp => "ppp",
            DynamicLevel::Pp => "pp",
            DynamicLevel::P => "p",
            DynamicLevel::Mp => "mp",
            DynamicLevel::Mf => "mf",
            DynamicLevel::F => "f",
            DynamicLevel::Ff => "ff",
            DynamicLevel::Fff => "fff",
        }
    }

    pub fn from_name(name: &str) -> Option<DynamicLevel> {
        DynamicLevel::ALL.into_iter().find(|d| d.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WedgeKind {
    Crescendo,
    Diminuendo,
}

impl WedgeKind {
    pub fn name(self) -> &'static str {
        match self {
            WedgeKind::Crescendo => "crescendo",
            WedgeKind::Diminuendo => "diminuendo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpulseKind {
    Sfz,
    Fp,
    Marcato,
}

impl ImpulseKind {
    pub fn name(self) -> &'static str {
        match self {
            ImpulseKind::Sfz => "sfz",
            ImpulseKind::Fp => "fp",
            ImpulseKind::Marcato => "marcato",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "kebab-case")]
pub enum MarkingKind {
    ConstantDynamic(DynamicLevel),
    Wedge(WedgeKind),
    Impulse(ImpulseKind),
}

/// A dynamics annotation. Wedges always carry `end`; the other kinds are
/// point events and leave it open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marking {
    pub kind: MarkingKind,
    pub onset: Beat,
    pub end: Option<Beat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSignature {
    pub onset: Beat,
    pub numerator: u32,
    pub denominator: u32,
}

impl TimeSignature {
    pub fn new(onset: Beat, numerator: u32, denominator: u32) -> TimeSignature {
        TimeSignature { onset, numerator, denominator }
    }

    /// Bar length in quarter notes.
    pub fn bar_length(&self) -> Beat {
        Beat::new(4 * self.numerator as i64, self.denominator as i64)
    }

    /// Length of one counted beat (one `1/denominator` note) in quarter notes.
    pub fn beat_unit(&self) -> Beat {
        Beat::new(4, self.denominator as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub onset: Beat,
    pub duration: Beat,
    /// Written MIDI pitch.
    pub pitch: u8,
    pub accent: bool,
    pub staccato: bool,
    pub fermata: bool,
}

impl NoteEvent {
    pub fn new(onset: Beat, duration: Beat, pitch: u8) -> NoteEvent {
        NoteEvent { onset, duration, pitch, accent: false, staccato: false, fermata: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    /// Source part id, suffixed with the voice when a staff held several voices.
    pub id: String,
    pub instrument: CanonicalInstrument,
    pub raw_name: String,
    pub notes: Vec<NoteEvent>,
    pub markings: Vec<Marking>,
    pub time_signatures: Vec<TimeSignature>,
    /// Semitones from written to sounding pitch.
    pub transposition: i8,
    /// Onsets of repeat barlines on this part's timeline.
    pub repeat_signs: Vec<Beat>,
}

impl Part {
    /// Time signature in force at `onset`.
    pub fn signature_at(&self, onset: Beat) -> &TimeSignature {
        let idx = self.time_signatures.partition_point(|ts| ts.onset <= onset);
        &self.time_signatures[idx.saturating_sub(1)]
    }

    pub fn end(&self) -> Beat {
        self.notes.iter().map(|n| n.onset + n.duration).max().unwrap_or(Beat::ZERO)
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.notes.is_empty() {
            return Err(Error::Contract(format!("part {} has no notes", self.id)));
        }
        if self.time_signatures.is_empty() {
            return Err(Error::Contract(format!("part {} has no time signature", self.id)));
        }
        if !self.notes.windows(2).all(|w| w[0].onset <= w[1].onset) {
            return Err(Error::Contract(format!("part {} notes are not sorted", self.id)));
        }
        if !(-24..=24).contains(&self.transposition) {
            return Err(Error::Contract(format!("part {} transposition out of range", self.id)));
        }
        for n in &self.notes {
            if n.onset < Beat::ZERO || n.duration <= Beat::ZERO || n.pitch > 127 {
                return Err(Error::Contract(format!("part {} has an invalid note {n:?}", self.id)));
            }
        }
        for m in &self.markings {
            if let (MarkingKind::Wedge(_), Some(end)) = (m.kind, m.end) {
                if end <= m.onset {
                    return Err(Error::Contract(format!("part {} has an empty wedge", self.id)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ending {
    pub numbers: Vec<u32>,
}

/// One bar of the shared measure timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub number: String,
    pub start: Beat,
    pub duration: Beat,
    pub repeat_forward: bool,
    /// Total number of passes for a backward repeat barline (usually 2).
    pub repeat_backward: Option<u32>,
    pub ending: Option<Ending>,
}

impl Measure {
    pub fn end(&self) -> Beat {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub id: String,
    /// Divisions per quarter note declared by the first part.
    pub divisions: u32,
    pub parts: Vec<Part>,
    pub measures: Vec<Measure>,
}

impl Score {
    /// Canonical JSON dump with a stable key order.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn note_count(&self) -> usize {
        self.parts.iter().map(|p| p.notes.len()).sum()
    }
}

/// Concert pitch of a note for an instrument transposing by `transposition` semitones.
pub fn sounding_pitch(note: &NoteEvent, transposition: i32) -> Result<u8> {
    let pitch = note.pitch as i32 + transposition;
    if !(0..=127).contains(&pitch) {
        return Err(Error::PitchRange(pitch));
    }
    Ok(pitch as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(pitch: u8) -> NoteEvent {
        NoteEvent::new(Beat::ZERO, Beat::from_integer(1), pitch)
    }

    #[test]
    fn sounding_pitch_cases() {
        assert_eq!(sounding_pitch(&note(60), 0).unwrap(), 60);
        assert_eq!(sounding_pitch(&note(60), -2).unwrap(), 58);
        assert!(matches!(sounding_pitch(&note(0), -2), Err(Error::PitchRange(-2))));
        assert!(matches!(sounding_pitch(&note(127), 1), Err(Error::PitchRange(128))));
    }

    #[test]
    fn bar_length_in_quarters() {
        assert_eq!(TimeSignature::new(Beat::ZERO, 3, 4).bar_length(), Beat::from_integer(3));
        assert_eq!(TimeSignature::new(Beat::ZERO, 6, 8).bar_length(), Beat::from_integer(3));
        assert_eq!(TimeSignature::new(Beat::ZERO, 2, 2).beat_unit(), Beat::from_integer(2));
    }
}
