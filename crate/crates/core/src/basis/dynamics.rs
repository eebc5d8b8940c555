//! Dynamics markings as step, anticipation, ramp and impulse functions.

use std::collections::BTreeMap;

use super::{Anticipation, BasisKind};
use crate::beat::Beat;
use crate::score::{DynamicLevel, MarkingKind, Part};

/// Anticipation ramp lengths in beats.
pub const ANTICIPATION_SHORT: i64 = 1;
pub const ANTICIPATION_LONG: i64 = 8;

/// Constant markings in onset order, keeping the last of any that share an
/// onset.
fn constant_markings(part: &Part) -> Vec<(Beat, DynamicLevel)> {
    let mut out: Vec<(Beat, DynamicLevel)> = Vec::new();
    for m in &part.markings {
        if let MarkingKind::ConstantDynamic(level) = m.kind {
            match out.last_mut() {
                Some(last) if last.0 == m.onset => {
                    log::warn!(
                        "part {}: constant dynamics {} and {} at onset {}, keeping {}",
                        part.id,
                        last.1.name(),
                        level.name(),
                        m.onset,
                        level.name()
                    );
                    last.1 = level;
                }
                _ => out.push((m.onset, level)),
            }
        }
    }
    out
}

fn ratio(num: Beat, den: Beat) -> f64 {
    (num.0 / den.0).into_f64()
}

trait IntoF64 {
    fn into_f64(self) -> f64;
}

impl IntoF64 for num_rational::Rational64 {
    fn into_f64(self) -> f64 {
        Beat(self).to_f64()
    }
}

/// Dynamics columns over `part.notes`, in catalogue order, all-zero columns
/// omitted.
///
/// * A constant marking at `t` is a step: 1 on `[t, next constant)`.
/// * Each constant marking also gets a short and a long anticipation ramp
///   rising 0 → 1 over `[t - L, t]`, clipped at the previous constant.
/// * A wedge `(s, e)` ramps 0 → 1 over `[s, e]` and holds 1 until the next
///   constant marking at or after `e`.
/// * Impulse markings are 1 on notes starting exactly at the marking.
pub fn dynamics_bases(part: &Part) -> Vec<(BasisKind, Vec<f64>)> {
    let notes = &part.notes;
    let mut columns: BTreeMap<BasisKind, Vec<f64>> = BTreeMap::new();
    let mut set_max = |kind: BasisKind, i: usize, v: f64| {
        let col = columns.entry(kind).or_insert_with(|| vec![0.0; notes.len()]);
        if v > col[i] {
            col[i] = v;
        }
    };

    let constants = constant_markings(part);
    for (idx, &(t, level)) in constants.iter().enumerate() {
        let next = constants.get(idx + 1).map(|c| c.0);
        let prev = idx.checked_sub(1).map(|p| constants[p].0);
        for (i, n) in notes.iter().enumerate() {
            if n.onset >= t && next.is_none_or(|nx| n.onset < nx) {
                set_max(BasisKind::DynamicStep(level), i, 1.0);
            }
        }
        for (len, which) in [(ANTICIPATION_SHORT, Anticipation::Short), (ANTICIPATION_LONG, Anticipation::Long)] {
            let mut start = t - Beat::from_integer(len);
            if let Some(p) = prev {
                start = start.max(p);
            }
            if start >= t {
                continue;
            }
            for (i, n) in notes.iter().enumerate() {
                if n.onset >= start && n.onset <= t {
                    set_max(BasisKind::DynamicAnticipation(level, which), i, ratio(n.onset - start, t - start));
                }
            }
        }
    }

    for m in &part.markings {
        match (m.kind, m.end) {
            (MarkingKind::Wedge(kind), Some(end)) if end > m.onset => {
                let hold_until = constants.iter().map(|c| c.0).find(|&c| c >= end);
                for (i, n) in notes.iter().enumerate() {
                    let x = n.onset;
                    let v = if x >= m.onset && x <= end {
                        ratio(x - m.onset, end - m.onset)
                    } else if x > end && hold_until.is_none_or(|h| x < h) {
                        1.0
                    } else {
                        0.0
                    };
                    if v > 0.0 {
                        set_max(BasisKind::WedgeRamp(kind), i, v);
                    }
                }
            }
            (MarkingKind::Impulse(kind), _) => {
                for (i, n) in notes.iter().enumerate() {
                    if n.onset == m.onset {
                        set_max(BasisKind::Impulse(kind), i, 1.0);
                    }
                }
            }
            _ => {}
        }
    }

    columns.into_iter().filter(|(_, col)| col.iter().any(|&v| v != 0.0)).collect()
}
