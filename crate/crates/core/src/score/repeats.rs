//! Expansion of repeat barlines and volta endings into the performed
//! (unfolded) measure order.

use super::{Marking, Measure, NoteEvent, Part, Score, TimeSignature};
use crate::beat::Beat;
use crate::error::{Error, Result};

struct Frame {
    start: usize,
    pass: u32,
    explicit: bool,
}

/// Measure indices in playback order.
///
/// Repeats may nest; a backward barline without a forward partner repeats
/// from the start of the piece (or from just after the previous completed
/// repeat). Volta brackets are skipped on passes they are not numbered for.
pub fn playback_order(measures: &[Measure]) -> Result<Vec<usize>> {
    let mut order = Vec::new();
    let mut stack = vec![Frame { start: 0, pass: 1, explicit: false }];
    let limit = 64 * measures.len().max(1);
    let mut i = 0;
    while i < measures.len() {
        if order.len() > limit {
            return Err(Error::structural("*", &measures[i].number, "repeat structure does not terminate"));
        }
        let m = &measures[i];
        let bracket_start = m.ending.is_some() && (i == 0 || measures[i - 1].ending != m.ending);
        if let Some(ending) = m.ending.as_ref().filter(|_| bracket_start) {
            let top = stack.last().expect("implicit frame is never popped");
            if !ending.numbers.contains(&top.pass) {
                let mut j = i;
                while j < measures.len() && measures[j].ending == m.ending {
                    j += 1;
                }
                i = j;
                continue;
            }
        }
        if bracket_start {
            let bracket_end = (i..measures.len()).find(|&j| measures[j].ending != m.ending).unwrap_or(measures.len());
            // a final ending (no backward barline of its own) closes its repeat
            let mut inner = 0usize;
            let mut returns = false;
            for x in &measures[i..bracket_end] {
                if x.repeat_forward {
                    inner += 1;
                }
                if x.repeat_backward.is_some() {
                    if inner > 0 {
                        inner -= 1;
                    } else {
                        returns = true;
                    }
                }
            }
            if !returns {
                if stack.len() > 1 {
                    stack.pop();
                } else {
                    stack[0] = Frame { start: i, pass: 1, explicit: false };
                }
            }
        }
        if m.repeat_forward {
            let top = stack.last_mut().expect("frame");
            if top.start != i {
                stack.push(Frame { start: i, pass: 1, explicit: true });
            } else {
                top.explicit = true;
            }
        }
        order.push(i);
        if let Some(times) = m.repeat_backward {
            let top = stack.last_mut().expect("frame");
            if top.pass < times {
                top.pass += 1;
                i = top.start;
                continue;
            }
            if stack.len() > 1 {
                stack.pop();
            } else {
                stack[0] = Frame { start: i + 1, pass: 1, explicit: false };
            }
        }
        i += 1;
    }
    if let Some(open) = stack.iter().find(|f| f.explicit && stack.len() > 1) {
        return Err(Error::structural("*", &measures[open.start].number, "forward repeat is never closed"));
    }
    Ok(order)
}

fn measure_of(measures: &[Measure], onset: Beat) -> Option<usize> {
    let idx = measures.partition_point(|m| m.start <= onset);
    idx.checked_sub(1).filter(|&i| onset < measures[i].end())
}

/// Measure holding an exclusive end point.
fn measure_of_end(measures: &[Measure], end: Beat) -> Option<usize> {
    let idx = measures.partition_point(|m| m.start < end);
    idx.checked_sub(1).filter(|&i| end <= measures[i].end())
}

/// Rewrite the score on its performed timeline. Notes and markings of
/// repeated measures are duplicated with shifted onsets, and repeat barline
/// positions are carried over as impulse locations.
pub fn unfold_repeats(score: &Score) -> Result<Score> {
    let order = playback_order(&score.measures)?;
    if order.iter().copied().eq(0..score.measures.len()) {
        return Ok(score.clone());
    }

    let mut new_starts = Vec::with_capacity(order.len());
    let mut measures = Vec::with_capacity(order.len());
    let mut cursor = Beat::ZERO;
    for &mi in &order {
        let m = &score.measures[mi];
        new_starts.push(cursor);
        measures.push(Measure {
            number: m.number.clone(),
            start: cursor,
            duration: m.duration,
            repeat_forward: false,
            repeat_backward: None,
            ending: None,
        });
        cursor += m.duration;
    }

    let mut repeat_signs = Vec::new();
    for (j, &mi) in order.iter().enumerate() {
        let m = &score.measures[mi];
        if m.repeat_forward {
            repeat_signs.push(new_starts[j]);
        }
        if m.repeat_backward.is_some() {
            repeat_signs.push(new_starts[j] + m.duration);
        }
    }
    repeat_signs.sort();
    repeat_signs.dedup();

    let shift = |j: usize| new_starts[j] - score.measures[order[j]].start;

    let mut parts = Vec::with_capacity(score.parts.len());
    for part in &score.parts {
        let mut by_measure: Vec<Vec<&NoteEvent>> = vec![Vec::new(); score.measures.len()];
        for n in &part.notes {
            if let Some(mi) = measure_of(&score.measures, n.onset) {
                by_measure[mi].push(n);
            }
        }
        let mut notes = Vec::new();
        for (j, &mi) in order.iter().enumerate() {
            let d = shift(j);
            notes.extend(by_measure[mi].iter().map(|n| NoteEvent { onset: n.onset + d, ..(*n).clone() }));
        }
        notes.sort_by_key(|n| n.onset);

        let mut markings = Vec::new();
        for mk in &part.markings {
            let Some(ms) = measure_of(&score.measures, mk.onset) else { continue };
            for (j, _) in order.iter().enumerate().filter(|(_, &mi)| mi == ms) {
                let onset = mk.onset + shift(j);
                let end = match mk.end {
                    None => None,
                    Some(e) => {
                        let Some(me) = measure_of_end(&score.measures, e) else { continue };
                        match (j..order.len()).find(|&k| order[k] == me) {
                            Some(k) => Some(e + shift(k)),
                            None => continue,
                        }
                    }
                };
                if end.is_some_and(|e| e <= onset) {
                    continue;
                }
                markings.push(Marking { kind: mk.kind, onset, end });
            }
        }
        markings.sort_by_key(|m| m.onset);

        let mut time_signatures: Vec<TimeSignature> = Vec::new();
        for (j, &mi) in order.iter().enumerate() {
            let ts = part.signature_at(score.measures[mi].start);
            if time_signatures
                .last()
                .is_none_or(|last| (last.numerator, last.denominator) != (ts.numerator, ts.denominator))
            {
                time_signatures.push(TimeSignature::new(new_starts[j], ts.numerator, ts.denominator));
            }
        }

        parts.push(Part {
            notes,
            markings,
            time_signatures,
            repeat_signs: repeat_signs.clone(),
            ..part.clone()
        });
    }

    Ok(Score { id: score.id.clone(), divisions: score.divisions, parts, measures })
}

#[cfg(test)]
mod tests {
    use super::super::{CanonicalInstrument, Ending, MarkingKind, WedgeKind};
    use super::*;

    fn measures(spec: &[(bool, Option<u32>, Option<Vec<u32>>)]) -> Vec<Measure> {
        spec.iter()
            .enumerate()
            .map(|(i, (fwd, back, ending))| Measure {
                number: (i + 1).to_string(),
                start: Beat::from_integer(4 * i as i64),
                duration: Beat::from_integer(4),
                repeat_forward: *fwd,
                repeat_backward: *back,
                ending: ending.clone().map(|numbers| Ending { numbers }),
            })
            .collect()
    }

    fn part_with_one_note_per_measure(ms: &[Measure]) -> Part {
        Part {
            id: "P1".into(),
            instrument: CanonicalInstrument::exact("violin"),
            raw_name: "Violin".into(),
            notes: ms
                .iter()
                .enumerate()
                .map(|(i, m)| NoteEvent::new(m.start, Beat::from_integer(1 + (i as i64 % 3)), 60 + i as u8))
                .collect(),
            markings: vec![],
            time_signatures: vec![TimeSignature::new(Beat::ZERO, 4, 4)],
            transposition: 0,
            repeat_signs: vec![],
        }
    }

    #[test]
    fn no_repeats_is_identity() {
        let ms = measures(&[(false, None, None), (false, None, None)]);
        let score = Score { id: "x".into(), divisions: 1, parts: vec![part_with_one_note_per_measure(&ms)], measures: ms };
        assert_eq!(unfold_repeats(&score).unwrap(), score);
    }

    #[test]
    fn single_repeat_doubles_length() {
        let ms = measures(&[(true, Some(2), None)]);
        let score = Score { id: "x".into(), divisions: 1, parts: vec![part_with_one_note_per_measure(&ms)], measures: ms };
        let out = unfold_repeats(&score).unwrap();
        assert_eq!(out.measures.last().unwrap().end(), Beat::from_integer(8));
        assert_eq!(out.note_count(), 2);
        assert_eq!(out.parts[0].repeat_signs, vec![Beat::ZERO, Beat::from_integer(4), Beat::from_integer(8)]);
    }

    #[test]
    fn volta_endings() {
        // 1 |: 2 | [1. 3 :| [2. 4
        let ms = measures(&[(false, None, None), (true, None, None), (false, Some(2), Some(vec![1])), (false, None, Some(vec![2]))]);
        assert_eq!(playback_order(&ms).unwrap(), vec![0, 1, 2, 1, 3]);
    }

    #[test]
    fn backward_repeat_without_forward_goes_to_start() {
        let ms = measures(&[(false, None, None), (false, Some(2), None), (false, None, None)]);
        assert_eq!(playback_order(&ms).unwrap(), vec![0, 1, 0, 1, 2]);
    }

    #[test]
    fn unclosed_forward_repeat_is_an_error() {
        let ms = measures(&[(false, None, None), (true, None, None), (true, None, None), (false, Some(2), None)]);
        assert!(matches!(playback_order(&ms), Err(Error::Structural { .. })));
    }

    #[test]
    fn wedges_map_through_the_same_pass() {
        let ms = measures(&[(true, None, None), (false, Some(2), None)]);
        let mut part = part_with_one_note_per_measure(&ms);
        part.markings.push(Marking {
            kind: MarkingKind::Wedge(WedgeKind::Crescendo),
            onset: Beat::from_integer(2),
            end: Some(Beat::from_integer(6)),
        });
        let score = Score { id: "x".into(), divisions: 1, parts: vec![part], measures: ms };
        let out = unfold_repeats(&score).unwrap();
        let spans: Vec<(Beat, Option<Beat>)> = out.parts[0].markings.iter().map(|m| (m.onset, m.end)).collect();
        assert_eq!(
            spans,
            vec![
                (Beat::from_integer(2), Some(Beat::from_integer(6))),
                (Beat::from_integer(10), Some(Beat::from_integer(14)))
            ]
        );
    }
}
