//! MusicXML (partwise) reader for the subset needed by the basis extractor:
//! part list, notes, dynamics directions, wedges, articulations, time
//! signatures, transposition and repeat barlines.

use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::Path;

use num_rational::Rational64;
use roxmltree::{Document, Node};

use super::{
    resolve_instrument, DynamicLevel, Ending, ImpulseKind, Marking, MarkingKind, Measure, NoteEvent, Part, Score,
    TimeSignature, WedgeKind,
};
use crate::beat::Beat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub part: String,
    pub measure: String,
    pub message: String,
}

impl std::fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "part {}, measure {}: {}", self.part, self.measure, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct ParsedScore {
    pub score: Score,
    pub warnings: Vec<ParseWarning>,
}

/// Read a `.xml` or `.mxl` file; the piece id is the file stem.
pub fn parse_score_file(path: &Path) -> Result<ParsedScore> {
    let bytes = std::fs::read(path)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_score(&bytes, &id)
}

/// Parse a MusicXML document. Compressed `.mxl` containers are detected by
/// their ZIP signature.
pub fn parse_score(bytes: &[u8], piece_id: &str) -> Result<ParsedScore> {
    if bytes.starts_with(b"PK\x03\x04") {
        return parse_mxl(bytes, piece_id);
    }
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Xml {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() as u32,
        column: 0,
        message: "document is not valid UTF-8".into(),
    })?;
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        Error::Xml { line: pos.row, column: pos.col, message: e.to_string() }
    })?;
    ScoreReader::new(piece_id).read(&doc)
}

/// Parse a compressed MusicXML container.
pub fn parse_mxl(bytes: &[u8], piece_id: &str) -> Result<ParsedScore> {
    let mut archive =
        zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| Error::Format(format!("bad .mxl container: {e}")))?;
    let mut rootfile = None;
    if let Ok(mut container) = archive.by_name("META-INF/container.xml") {
        let mut s = String::new();
        container.read_to_string(&mut s)?;
        if let Ok(doc) = Document::parse(&s) {
            rootfile = doc
                .descendants()
                .find(|n| n.has_tag_name("rootfile"))
                .and_then(|n| n.attribute("full-path"))
                .map(str::to_string);
        }
    }
    let name = match rootfile {
        Some(name) => name,
        None => archive
            .file_names()
            .filter(|n| !n.starts_with("META-INF") && (n.ends_with(".xml") || n.ends_with(".musicxml")))
            .min()
            .map(str::to_string)
            .ok_or_else(|| Error::Format("no score document inside .mxl container".into()))?,
    };
    let mut inner = Vec::new();
    archive
        .by_name(&name)
        .map_err(|e| Error::Format(format!("missing {name} in .mxl container: {e}")))?
        .read_to_end(&mut inner)?;
    parse_score(&inner, piece_id)
}

fn child<'a, 'input>(node: Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn child_text<'a>(node: Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text()).map(str::trim)
}

fn elements<'a, 'input>(node: Node<'a, 'input>) -> impl Iterator<Item = Node<'a, 'input>> {
    node.children().filter(Node::is_element)
}

fn parse_number(text: &str) -> Option<Rational64> {
    let text = text.trim();
    if let Ok(i) = text.parse::<i64>() {
        return Some(Rational64::from_integer(i));
    }
    // decimal durations/offsets occasionally appear; keep them exact to 1/1000
    let f: f64 = text.parse().ok()?;
    f.is_finite().then(|| Rational64::new((f * 1000.0).round() as i64, 1000))
}

fn step_semitone(step: &str) -> Option<i32> {
    Some(match step {
        "C" => 0,
        "D" => 2,
        "E" => 4,
        "F" => 5,
        "G" => 7,
        "A" => 9,
        "B" => 11,
        _ => return None,
    })
}

/// Measure children that carry only layout or playback data.
const SILENT_SKIP: &[&str] = &["print", "sound", "bookmark", "link", "grouping", "listening", "figured-bass", "harmony"];

#[derive(Debug, Clone)]
struct RawNote {
    voice: String,
    measure: usize,
    offset: Rational64,
    duration: Rational64,
    pitch: u8,
    accent: bool,
    staccato: bool,
    fermata: bool,
    tie_start: bool,
    tie_stop: bool,
}

#[derive(Debug, Clone)]
enum RawMarking {
    Point { kind: MarkingKind, measure: usize, offset: Rational64 },
    Wedge { kind: WedgeKind, start: (usize, Rational64), end: (usize, Rational64) },
    /// Textual "cresc."/"dim.", closed later at the next constant marking.
    OpenText { kind: WedgeKind, measure: usize, offset: Rational64 },
}

#[derive(Debug, Default, Clone)]
struct MeasureInfo {
    number: String,
    extent: Rational64,
    bar_length: Option<Rational64>,
    repeat_forward: bool,
    repeat_backward: Option<u32>,
    ending_numbers: Option<Vec<u32>>,
    ending_stop: bool,
}

struct RawPart {
    id: String,
    name: String,
    abbreviation: Option<String>,
    instrument_name: Option<String>,
    notes: Vec<RawNote>,
    markings: Vec<RawMarking>,
    signatures: Vec<(usize, Rational64, u32, u32)>,
    transposition: i32,
    measures: Vec<MeasureInfo>,
}

struct ScoreReader {
    piece_id: String,
    warnings: Vec<ParseWarning>,
}

impl ScoreReader {
    fn new(piece_id: &str) -> ScoreReader {
        ScoreReader { piece_id: piece_id.to_string(), warnings: Vec::new() }
    }

    fn warn(&mut self, part: &str, measure: &str, message: impl Into<String>) {
        let w = ParseWarning { part: part.to_string(), measure: measure.to_string(), message: message.into() };
        log::warn!("{}: {w}", self.piece_id);
        self.warnings.push(w);
    }

    fn read(mut self, doc: &Document) -> Result<ParsedScore> {
        let root = doc.root_element();
        if root.has_tag_name("score-timewise") {
            return Err(Error::Format("score-timewise documents are not supported".into()));
        }
        if !root.has_tag_name("score-partwise") {
            return Err(Error::Format(format!("unexpected root element <{}>", root.tag_name().name())));
        }

        let mut names: BTreeMap<String, (String, Option<String>, Option<String>)> = BTreeMap::new();
        let mut order = Vec::new();
        if let Some(list) = child(root, "part-list") {
            for sp in list.children().filter(|n| n.has_tag_name("score-part")) {
                let id = sp.attribute("id").unwrap_or_default().to_string();
                let name = child_text(sp, "part-name").unwrap_or_default().to_string();
                let abbr = child_text(sp, "part-abbreviation").map(str::to_string);
                let instr = child(sp, "score-instrument").and_then(|si| child_text(si, "instrument-name")).map(str::to_string);
                order.push(id.clone());
                names.insert(id, (name, abbr, instr));
            }
        }

        let mut raw_parts = Vec::new();
        let mut divisions_meta = None;
        for part in root.children().filter(|n| n.has_tag_name("part")) {
            let id = part.attribute("id").unwrap_or_default().to_string();
            let (name, abbreviation, instrument_name) = names.get(&id).cloned().unwrap_or_default();
            let mut raw = RawPart {
                id,
                name,
                abbreviation,
                instrument_name,
                notes: Vec::new(),
                markings: Vec::new(),
                signatures: Vec::new(),
                transposition: 0,
                measures: Vec::new(),
            };
            let first_div = self.read_part(part, &mut raw)?;
            divisions_meta = divisions_meta.or(first_div);
            raw_parts.push(raw);
        }
        raw_parts.sort_by_key(|p| order.iter().position(|o| *o == p.id).unwrap_or(usize::MAX));
        if raw_parts.is_empty() {
            return Err(Error::Format("score has no parts".into()));
        }

        let measures = shared_timeline(&raw_parts);
        let starts: Vec<Beat> = measures.iter().map(|m| m.start).collect();
        let at = |measure: usize, offset: Rational64| Beat(starts[measure].0 + offset);
        let end_of_score = measures.last().map(Measure::end).unwrap_or(Beat::ZERO);

        let mut repeat_signs: Vec<Beat> = Vec::new();
        for m in &measures {
            if m.repeat_forward {
                repeat_signs.push(m.start);
            }
            if m.repeat_backward.is_some() {
                repeat_signs.push(m.end());
            }
        }
        repeat_signs.sort();
        repeat_signs.dedup();

        let mut parts = Vec::new();
        for raw in raw_parts {
            let instrument = self.resolve(&raw)?;
            if !(-24..=24).contains(&raw.transposition) {
                return Err(Error::structural(&raw.id, "1", format!("transposition {} out of range", raw.transposition)));
            }

            let mut signatures: Vec<TimeSignature> = Vec::new();
            for &(m, off, num, den) in &raw.signatures {
                let ts = TimeSignature::new(at(m, off), num, den);
                match signatures.last_mut() {
                    Some(last) if last.onset == ts.onset => *last = ts,
                    Some(last) if last.numerator == num && last.denominator == den => {}
                    _ => signatures.push(ts),
                }
            }
            if signatures.first().is_none_or(|ts| ts.onset > Beat::ZERO) {
                self.warn(&raw.id, "1", "no time signature at the start, assuming 4/4");
                signatures.insert(0, TimeSignature::new(Beat::ZERO, 4, 4));
            }

            // per-voice note lists, with tied continuations folded into their heads
            let mut voices: BTreeMap<String, Vec<NoteEvent>> = BTreeMap::new();
            let mut open_ties: BTreeMap<(String, u8), usize> = BTreeMap::new();
            for n in &raw.notes {
                let onset = at(n.measure, n.offset);
                let list = voices.entry(n.voice.clone()).or_default();
                let key = (n.voice.clone(), n.pitch);
                if n.tie_stop {
                    if let Some(&idx) = open_ties.get(&key) {
                        if list[idx].onset + list[idx].duration == onset {
                            list[idx].duration += Beat(n.duration);
                            if !n.tie_start {
                                open_ties.remove(&key);
                            }
                            continue;
                        }
                    }
                }
                list.push(NoteEvent {
                    onset,
                    duration: Beat(n.duration),
                    pitch: n.pitch,
                    accent: n.accent,
                    staccato: n.staccato,
                    fermata: n.fermata,
                });
                if n.tie_start {
                    open_ties.insert(key, list.len() - 1);
                } else {
                    open_ties.remove(&key);
                }
            }

            let markings = self.close_markings(&raw, &at, end_of_score);

            if voices.is_empty() {
                self.warn(&raw.id, "-", "part has no notes and is dropped");
                continue;
            }
            let multi = voices.len() > 1;
            for (voice, mut notes) in voices {
                notes.sort_by_key(|n| n.onset);
                parts.push(Part {
                    id: if multi { format!("{}.v{voice}", raw.id) } else { raw.id.clone() },
                    instrument: instrument.clone(),
                    raw_name: raw.name.clone(),
                    notes,
                    markings: markings.clone(),
                    time_signatures: signatures.clone(),
                    transposition: raw.transposition as i8,
                    repeat_signs: repeat_signs.clone(),
                });
            }
        }
        if parts.is_empty() {
            return Err(Error::Format("score contains no notes".into()));
        }

        let score = Score {
            id: self.piece_id.clone(),
            divisions: divisions_meta.unwrap_or(1),
            parts,
            measures,
        };
        Ok(ParsedScore { score, warnings: self.warnings })
    }

    fn resolve(&mut self, raw: &RawPart) -> Result<super::CanonicalInstrument> {
        let candidates = [Some(&raw.name), raw.instrument_name.as_ref(), raw.abbreviation.as_ref()];
        let mut first_err = None;
        for name in candidates.into_iter().flatten().filter(|n| !n.trim().is_empty()) {
            match resolve_instrument(name) {
                Ok(ci) => return Ok(ci),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        Err(first_err.unwrap_or_else(|| Error::UnresolvedInstrument { name: raw.id.clone(), candidates: Vec::new() }))
    }

    fn close_markings(
        &mut self,
        raw: &RawPart,
        at: &impl Fn(usize, Rational64) -> Beat,
        end_of_score: Beat,
    ) -> Vec<Marking> {
        let mut out: Vec<Marking> = Vec::new();
        let mut constants: Vec<Beat> = Vec::new();
        for m in &raw.markings {
            if let RawMarking::Point { kind: MarkingKind::ConstantDynamic(_), measure, offset } = m {
                constants.push(at(*measure, *offset));
            }
        }
        constants.sort();
        for m in &raw.markings {
            match m {
                RawMarking::Point { kind, measure, offset } => {
                    out.push(Marking { kind: *kind, onset: at(*measure, *offset), end: None });
                }
                RawMarking::Wedge { kind, start, end } => {
                    let (s, e) = (at(start.0, start.1), at(end.0, end.1));
                    if e > s {
                        out.push(Marking { kind: MarkingKind::Wedge(*kind), onset: s, end: Some(e) });
                    } else {
                        let number = raw.measures.get(start.0).map(|mi| mi.number.clone()).unwrap_or_default();
                        self.warn(&raw.id, &number, "zero-length wedge skipped");
                    }
                }
                RawMarking::OpenText { kind, measure, offset } => {
                    let s = at(*measure, *offset);
                    let e = constants.iter().copied().find(|&c| c > s).unwrap_or(end_of_score);
                    if e > s {
                        out.push(Marking { kind: MarkingKind::Wedge(*kind), onset: s, end: Some(e) });
                    } else {
                        let number = raw.measures.get(*measure).map(|mi| mi.number.clone()).unwrap_or_default();
                        self.warn(&raw.id, &number, "textual hairpin with no extent skipped");
                    }
                }
            }
        }
        out.sort_by_key(|m| m.onset);
        out
    }

    /// Returns the first declared divisions value.
    fn read_part(&mut self, part: Node, raw: &mut RawPart) -> Result<Option<u32>> {
        let mut divisions = Rational64::from_integer(1);
        let mut first_divisions = None;
        let mut open_wedges: BTreeMap<String, (WedgeKind, usize, Rational64)> = BTreeMap::new();
        let mut in_ending: Option<Vec<u32>> = None;
        let mut transpose_seen = false;

        for (midx, measure) in part.children().filter(|n| n.has_tag_name("measure")).enumerate() {
            let number = measure.attribute("number").unwrap_or("").to_string();
            let mut info = MeasureInfo { number: number.clone(), ..Default::default() };
            if let Some(nums) = &in_ending {
                info.ending_numbers = Some(nums.clone());
            }
            let mut cursor = Rational64::from_integer(0);
            let mut extent = cursor;
            let mut last_onset = cursor;

            for el in elements(measure) {
                match el.tag_name().name() {
                    "attributes" => {
                        for a in elements(el) {
                            match a.tag_name().name() {
                                "divisions" => {
                                    let d = a.text().and_then(|t| t.trim().parse::<i64>().ok()).filter(|&d| d > 0);
                                    match d {
                                        Some(d) => {
                                            divisions = Rational64::from_integer(d);
                                            first_divisions.get_or_insert(d as u32);
                                        }
                                        None => self.warn(&raw.id, &number, "invalid divisions value ignored"),
                                    }
                                }
                                "time" => {
                                    let beats = child_text(a, "beats").and_then(|t| {
                                        // compound meters like "3+2" add up
                                        t.split('+').map(|x| x.trim().parse::<u32>().ok()).sum::<Option<u32>>()
                                    });
                                    let beat_type = child_text(a, "beat-type").and_then(|t| t.parse::<u32>().ok());
                                    match (beats, beat_type) {
                                        (Some(n), Some(d)) if n > 0 && d > 0 => {
                                            raw.signatures.push((midx, cursor, n, d));
                                            info.bar_length = Some(Rational64::new(4 * n as i64, d as i64));
                                        }
                                        _ => self.warn(&raw.id, &number, "unreadable time signature skipped"),
                                    }
                                }
                                "transpose" => {
                                    let chromatic = child_text(a, "chromatic").and_then(|t| t.parse::<f64>().ok());
                                    let octave = child_text(a, "octave-change").and_then(|t| t.parse::<i32>().ok());
                                    let value = chromatic.unwrap_or(0.0).round() as i32 + 12 * octave.unwrap_or(0);
                                    if transpose_seen && value != raw.transposition {
                                        self.warn(&raw.id, &number, "transposition change ignored");
                                    } else {
                                        raw.transposition = value;
                                        transpose_seen = true;
                                    }
                                }
                                "key" | "clef" | "staves" | "staff-details" | "measure-style" | "instruments"
                                | "part-symbol" | "footnote" | "level" | "directive" => {}
                                other => self.warn(&raw.id, &number, format!("unsupported <{other}> in attributes skipped")),
                            }
                        }
                    }
                    "note" => {
                        if child(el, "grace").is_some() {
                            self.warn(&raw.id, &number, "grace note skipped");
                            continue;
                        }
                        if child(el, "cue").is_some() {
                            self.warn(&raw.id, &number, "cue note skipped");
                            continue;
                        }
                        let dur = match child_text(el, "duration").and_then(parse_number) {
                            Some(d) => d / divisions,
                            None => return Err(Error::structural(&raw.id, &number, "note without duration")),
                        };
                        let is_chord = child(el, "chord").is_some();
                        let onset = if is_chord { last_onset } else { cursor };
                        if !is_chord {
                            last_onset = cursor;
                            cursor += dur;
                            extent = extent.max(cursor);
                        }
                        if child(el, "rest").is_some() {
                            continue;
                        }
                        if dur <= Rational64::from_integer(0) {
                            self.warn(&raw.id, &number, "zero-length note skipped");
                            continue;
                        }
                        let pitch = self.note_pitch(el, &raw.id, &number)?;
                        let Some(pitch) = pitch else { continue };
                        let voice = child_text(el, "voice").unwrap_or("1").to_string();
                        let mut note = RawNote {
                            voice,
                            measure: midx,
                            offset: onset,
                            duration: dur,
                            pitch,
                            accent: false,
                            staccato: false,
                            fermata: false,
                            tie_start: false,
                            tie_stop: false,
                        };
                        for tie in el.children().filter(|c| c.has_tag_name("tie")) {
                            match tie.attribute("type") {
                                Some("start") => note.tie_start = true,
                                Some("stop") => note.tie_stop = true,
                                _ => {}
                            }
                        }
                        for notations in el.children().filter(|c| c.has_tag_name("notations")) {
                            self.read_notations(notations, &mut note, raw, &number)?;
                        }
                        raw.notes.push(note);
                    }
                    "backup" => {
                        let d = child_text(el, "duration").and_then(parse_number).unwrap_or_default();
                        cursor -= d / divisions;
                        if cursor < Rational64::from_integer(0) {
                            self.warn(&raw.id, &number, "backup past the start of the measure clamped");
                            cursor = Rational64::from_integer(0);
                        }
                    }
                    "forward" => {
                        let d = child_text(el, "duration").and_then(parse_number).unwrap_or_default();
                        cursor += d / divisions;
                        extent = extent.max(cursor);
                    }
                    "direction" => {
                        let offset = child_text(el, "offset").and_then(parse_number).unwrap_or_default() / divisions;
                        let at = (cursor + offset).max(Rational64::from_integer(0));
                        for dt in el.children().filter(|c| c.has_tag_name("direction-type")) {
                            for d in elements(dt) {
                                match d.tag_name().name() {
                                    "dynamics" => {
                                        for kind in self.dynamics(d, &raw.id, &number) {
                                            raw.markings.push(RawMarking::Point { kind, measure: midx, offset: at });
                                        }
                                    }
                                    "wedge" => {
                                        let key = d.attribute("number").unwrap_or("1").to_string();
                                        match d.attribute("type") {
                                            Some("crescendo") => {
                                                open_wedges.insert(key, (WedgeKind::Crescendo, midx, at));
                                            }
                                            Some("diminuendo") => {
                                                open_wedges.insert(key, (WedgeKind::Diminuendo, midx, at));
                                            }
                                            Some("stop") => match open_wedges.remove(&key) {
                                                Some((kind, sm, so)) => raw.markings.push(RawMarking::Wedge {
                                                    kind,
                                                    start: (sm, so),
                                                    end: (midx, at),
                                                }),
                                                None => self.warn(&raw.id, &number, "wedge stop without start ignored"),
                                            },
                                            _ => {}
                                        }
                                    }
                                    "words" => {
                                        let text = d.text().unwrap_or_default().trim().to_lowercase();
                                        if let Some(kind) = textual_hairpin(&text) {
                                            raw.markings.push(RawMarking::OpenText { kind, measure: midx, offset: at });
                                        }
                                    }
                                    "metronome" | "rehearsal" | "segno" | "coda" | "pedal" | "octave-shift"
                                    | "dashes" | "bracket" | "other-direction" => {}
                                    other => {
                                        self.warn(&raw.id, &number, format!("unsupported direction <{other}> skipped"))
                                    }
                                }
                            }
                        }
                    }
                    "barline" => {
                        if let Some(rep) = child(el, "repeat") {
                            match rep.attribute("direction") {
                                Some("forward") => info.repeat_forward = true,
                                Some("backward") => {
                                    let times = rep.attribute("times").and_then(|t| t.parse::<u32>().ok()).unwrap_or(2);
                                    info.repeat_backward = Some(times.max(1));
                                }
                                _ => {}
                            }
                        }
                        if let Some(ending) = child(el, "ending") {
                            let numbers: Vec<u32> = ending
                                .attribute("number")
                                .unwrap_or("1")
                                .split([',', ' '])
                                .filter_map(|s| s.trim().parse().ok())
                                .collect();
                            match ending.attribute("type") {
                                Some("start") => {
                                    info.ending_numbers = Some(numbers.clone());
                                    in_ending = Some(numbers);
                                }
                                Some("stop") | Some("discontinue") => {
                                    info.ending_stop = true;
                                    in_ending = None;
                                }
                                _ => {}
                            }
                        }
                    }
                    name if SILENT_SKIP.contains(&name) => {}
                    other => self.warn(&raw.id, &number, format!("unsupported element <{other}> skipped")),
                }
            }
            info.extent = extent;
            raw.measures.push(info);
        }

        if let Some((_, (_, midx, _))) = open_wedges.into_iter().next() {
            let number = raw.measures.get(midx).map(|m| m.number.clone()).unwrap_or_default();
            return Err(Error::structural(&raw.id, &number, "wedge is never closed"));
        }
        Ok(first_divisions)
    }

    fn note_pitch(&mut self, el: Node, part: &str, measure: &str) -> Result<Option<u8>> {
        let (step, octave, alter) = if let Some(p) = child(el, "pitch") {
            (child_text(p, "step"), child_text(p, "octave"), child_text(p, "alter"))
        } else if let Some(u) = child(el, "unpitched") {
            (child_text(u, "display-step"), child_text(u, "display-octave"), None)
        } else {
            self.warn(part, measure, "note without pitch skipped");
            return Ok(None);
        };
        let step = step.and_then(step_semitone);
        let octave = octave.and_then(|o| o.parse::<i32>().ok());
        let (Some(step), Some(octave)) = (step, octave) else {
            return Err(Error::structural(part, measure, "unreadable pitch"));
        };
        let alter = alter.and_then(|a| a.parse::<f64>().ok()).unwrap_or(0.0).round() as i32;
        let midi = 12 * (octave + 1) + step + alter;
        if !(0..=127).contains(&midi) {
            return Err(Error::PitchRange(midi));
        }
        Ok(Some(midi as u8))
    }

    fn read_notations(&mut self, notations: Node, note: &mut RawNote, raw: &mut RawPart, number: &str) -> Result<()> {
        for n in elements(notations) {
            match n.tag_name().name() {
                "articulations" => {
                    for a in elements(n) {
                        match a.tag_name().name() {
                            "accent" => note.accent = true,
                            "strong-accent" => {
                                note.accent = true;
                                raw.markings.push(RawMarking::Point {
                                    kind: MarkingKind::Impulse(ImpulseKind::Marcato),
                                    measure: note.measure,
                                    offset: note.offset,
                                });
                            }
                            "staccato" | "staccatissimo" | "spiccato" => note.staccato = true,
                            _ => {}
                        }
                    }
                }
                "fermata" => note.fermata = true,
                "dynamics" => {
                    for kind in self.dynamics(n, &raw.id, number) {
                        raw.markings.push(RawMarking::Point { kind, measure: note.measure, offset: note.offset });
                    }
                }
                "ornaments" => {
                    if elements(n).any(|o| matches!(o.tag_name().name(), "trill-mark" | "wavy-line")) {
                        self.warn(&raw.id, number, "trill ignored, principal note kept");
                    }
                }
                "tied" | "slur" | "tuplet" | "technical" | "arpeggiate" | "non-arpeggiate" | "glissando"
                | "slide" | "accidental-mark" | "other-notation" | "footnote" | "level" => {}
                other => self.warn(&raw.id, number, format!("unsupported notation <{other}> skipped")),
            }
        }
        Ok(())
    }

    fn dynamics(&mut self, node: Node, part: &str, measure: &str) -> Vec<MarkingKind> {
        let mut out = Vec::new();
        for d in elements(node) {
            let name = d.tag_name().name();
            if let Some(level) = DynamicLevel::from_name(name) {
                out.push(MarkingKind::ConstantDynamic(level));
                continue;
            }
            match name {
                "sfz" | "sf" | "sffz" | "fz" | "rfz" | "rf" | "sfzp" => out.push(MarkingKind::Impulse(ImpulseKind::Sfz)),
                "fp" | "sfp" | "sfpp" | "pf" => out.push(MarkingKind::Impulse(ImpulseKind::Fp)),
                other => self.warn(part, measure, format!("dynamics <{other}> outside the supported vocabulary skipped")),
            }
        }
        out
    }
}

fn textual_hairpin(text: &str) -> Option<WedgeKind> {
    let t = text.trim_start_matches(|c: char| !c.is_alphabetic());
    let t = t.strip_prefix("poco a poco ").unwrap_or(t).strip_prefix("sempre ").unwrap_or(t);
    if t.starts_with("cresc") {
        Some(WedgeKind::Crescendo)
    } else if t.starts_with("dim") || t.starts_with("decresc") {
        Some(WedgeKind::Diminuendo)
    } else {
        None
    }
}

/// Measure starts shared by all parts: each measure is as long as the
/// longest part content in it, or its bar length when empty.
fn shared_timeline(parts: &[RawPart]) -> Vec<Measure> {
    let count = parts.iter().map(|p| p.measures.len()).max().unwrap_or(0);
    let mut out = Vec::with_capacity(count);
    let mut start = Beat::ZERO;
    let mut bar = Rational64::from_integer(4);
    for i in 0..count {
        let infos: Vec<&MeasureInfo> = parts.iter().filter_map(|p| p.measures.get(i)).collect();
        if let Some(b) = infos.iter().find_map(|m| m.bar_length) {
            bar = b;
        }
        let extent = infos.iter().map(|m| m.extent).max().unwrap_or_default();
        let duration = if extent > Rational64::from_integer(0) { extent } else { bar };
        let ending = infos.iter().find_map(|m| m.ending_numbers.clone()).map(|numbers| Ending { numbers });
        out.push(Measure {
            number: infos.first().map(|m| m.number.clone()).unwrap_or_else(|| (i + 1).to_string()),
            start,
            duration: Beat(duration),
            repeat_forward: infos.iter().any(|m| m.repeat_forward),
            repeat_backward: infos.iter().find_map(|m| m.repeat_backward),
            ending,
        });
        start += Beat(duration);
    }
    out
}
