//! Per-note descriptors: pitch polynomial, neighbours, metre, duration,
//! articulations.

use super::{BasisKind, MetricalPosition};
use crate::beat::Beat;
use crate::score::{NoteEvent, TimeSignature};

/// `(q, q², q³)` with `q = pitch / 127`.
pub fn pitch_poly(pitch: u8) -> [f64; 3] {
    let q = pitch as f64 / 127.0;
    [q, q * q, q * q * q]
}

/// `(lower, higher, total)` counts among simultaneous pitches, excluding the
/// queried note itself. Equal pitches count towards the total only.
pub fn vertical_neighbors(simultaneous: &[u8], index: usize) -> (usize, usize, usize) {
    let me = simultaneous[index];
    let mut lower = 0;
    let mut higher = 0;
    let mut equal = 0;
    for (j, &p) in simultaneous.iter().enumerate() {
        if j == index {
            continue;
        }
        match p.cmp(&me) {
            std::cmp::Ordering::Less => lower += 1,
            std::cmp::Ordering::Greater => higher += 1,
            std::cmp::Ordering::Equal => equal += 1,
        }
    }
    (lower, higher, lower + higher + equal)
}

/// One-hot metrical position of an onset under the active signature.
pub fn metrical_basis(onset: Beat, sig: &TimeSignature) -> BasisKind {
    let within = (onset - sig.onset).rem_euclid(sig.bar_length());
    let pos = Beat(within.0 / sig.beat_unit().0);
    let position = if pos.is_integer() { MetricalPosition::Beat(pos.floor() as u32) } else { MetricalPosition::Offbeat };
    BasisKind::Metrical { numerator: sig.numerator, denominator: sig.denominator, position }
}

/// Duration of note `i` and the distance to the next distinct onset in the
/// part; the last onset uses its own duration.
pub fn duration_and_ioi(notes: &[NoteEvent], i: usize) -> (f64, f64) {
    let n = &notes[i];
    let next = notes[i + 1..].iter().map(|m| m.onset).find(|&o| o > n.onset);
    let ioi = match next {
        Some(o) => o - n.onset,
        None => n.duration,
    };
    (n.duration.to_f64(), ioi.to_f64())
}

/// Articulation impulses triggered by a note.
pub fn articulation_impulses(note: &NoteEvent, repeat_signs: &[Beat]) -> Vec<BasisKind> {
    let mut out = Vec::new();
    if note.accent {
        out.push(BasisKind::Accent);
    }
    if note.staccato {
        out.push(BasisKind::Staccato);
    }
    if note.fermata {
        out.push(BasisKind::Fermata);
    }
    if repeat_signs.binary_search(&note.onset).is_ok() {
        out.push(BasisKind::RepeatSign);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(n: i64) -> Beat {
        Beat::from_integer(n)
    }

    #[test]
    fn pitch_polynomial() {
        assert_eq!(pitch_poly(0), [0.0, 0.0, 0.0]);
        assert_eq!(pitch_poly(127), [1.0, 1.0, 1.0]);
        let [a, b2, c] = pitch_poly(60);
        assert!((a - 0.472441).abs() < 1e-6);
        assert!((b2 - 0.223200).abs() < 1e-6);
        assert!((c - 0.105449).abs() < 1e-6);
    }

    #[test]
    fn neighbours() {
        assert_eq!(vertical_neighbors(&[60], 0), (0, 0, 0));
        assert_eq!(vertical_neighbors(&[60, 64, 67], 1), (1, 1, 2));
        assert_eq!(vertical_neighbors(&[60, 60], 0), (0, 0, 1));
    }

    #[test]
    fn metrical_positions() {
        let four = TimeSignature::new(Beat::ZERO, 4, 4);
        let three = TimeSignature::new(Beat::ZERO, 3, 4);
        let beat = |k| BasisKind::Metrical { numerator: 4, denominator: 4, position: MetricalPosition::Beat(k) };
        assert_eq!(metrical_basis(b(4), &four), beat(0));
        assert_eq!(
            metrical_basis(Beat::new(9, 2), &four),
            BasisKind::Metrical { numerator: 4, denominator: 4, position: MetricalPosition::Offbeat }
        );
        assert_eq!(
            metrical_basis(b(5), &three),
            BasisKind::Metrical { numerator: 3, denominator: 4, position: MetricalPosition::Beat(2) }
        );
        // 6/8 counts eighths: onset 1.5 quarters is the fourth eighth
        let six = TimeSignature::new(Beat::ZERO, 6, 8);
        assert_eq!(
            metrical_basis(Beat::new(3, 2), &six),
            BasisKind::Metrical { numerator: 6, denominator: 8, position: MetricalPosition::Beat(3) }
        );
        // a signature change at beat 2 restarts the bar count
        let late = TimeSignature::new(b(2), 3, 4);
        assert_eq!(metrical_basis(b(5), &late).label(), "metrical.3/4.beat0");
    }

    #[test]
    fn duration_and_inter_onset() {
        let notes = vec![NoteEvent::new(b(0), b(1), 60), NoteEvent::new(b(1), b(1), 60)];
        assert_eq!(duration_and_ioi(&notes, 0), (1.0, 1.0));
        let notes = vec![NoteEvent::new(b(0), b(2), 60), NoteEvent::new(b(1), b(1), 60)];
        assert_eq!(duration_and_ioi(&notes, 0), (2.0, 1.0));
        let notes = vec![NoteEvent::new(b(0), b(2), 60)];
        assert_eq!(duration_and_ioi(&notes, 0), (2.0, 2.0));
        // chord members share the distance to the next onset
        let notes = vec![NoteEvent::new(b(0), b(1), 60), NoteEvent::new(b(0), b(1), 64), NoteEvent::new(b(3), b(1), 60)];
        assert_eq!(duration_and_ioi(&notes, 0), (1.0, 3.0));
    }

    #[test]
    fn articulations() {
        let mut n = NoteEvent::new(b(3), b(1), 60);
        assert!(articulation_impulses(&n, &[]).is_empty());
        n.accent = true;
        assert_eq!(articulation_impulses(&n, &[]), vec![BasisKind::Accent]);
        n.accent = false;
        n.fermata = true;
        assert_eq!(articulation_impulses(&n, &[b(3)]), vec![BasisKind::Fermata, BasisKind::RepeatSign]);
    }
}
