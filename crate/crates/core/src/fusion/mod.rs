//! Merging and fusion of part matrices into one row per onset, aggregation
//! of instrument classes into piece matrices, and stacking of pieces into a
//! dataset.

mod dataset;
mod io;

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;

use crate::basis::{
    extract_part_bases, vertical_neighbors, BasisDescriptor, BasisKind, FusionPolicy, NoteRow, PartBasisMatrix,
    SparseRow,
};
use crate::beat::Beat;
use crate::error::{Error, Result};
use crate::score::Score;

pub use dataset::{DatasetMatrix, PieceBlock, SingularBasis};
pub use io::{read_piece_matrix, write_piece_matrix, PieceSidecar};

/// Per-label overrides of the default fusion policies, matched by label
/// prefix; the longest matching prefix wins.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FusionPolicies {
    overrides: Vec<(String, FusionPolicy)>,
}

impl FusionPolicies {
    pub fn new(overrides: Vec<(String, FusionPolicy)>) -> FusionPolicies {
        FusionPolicies { overrides }
    }

    pub fn policy_for(&self, kind: &BasisKind) -> FusionPolicy {
        let label = kind.label();
        self.overrides
            .iter()
            .filter(|(prefix, _)| label.starts_with(prefix.as_str()))
            .max_by_key(|(prefix, _)| prefix.len())
            .map(|&(_, p)| p)
            .unwrap_or_else(|| kind.default_policy())
    }

    pub fn is_empty(&self) -> bool {
        self.overrides.is_empty()
    }
}

/// `prefix=policy` pairs separated by commas, e.g. `pitch=max,vn.=mean`.
impl FromStr for FusionPolicies {
    type Err = Error;

    fn from_str(s: &str) -> Result<FusionPolicies> {
        let mut overrides = Vec::new();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (prefix, policy) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("policy override {item:?} is not prefix=policy")))?;
            overrides.push((prefix.trim().to_string(), policy.trim().parse()?));
        }
        Ok(FusionPolicies { overrides })
    }
}

/// Rows of all parts of one class stacked in onset order.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedMatrix {
    pub class: String,
    pub rows: Vec<NoteRow>,
    pub columns: Vec<BasisDescriptor>,
}

/// One row per distinct onset of an instrument class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBasisMatrix {
    pub class: String,
    pub onsets: Vec<Beat>,
    pub rows: Vec<SparseRow>,
    pub columns: Vec<BasisDescriptor>,
}

/// Φ_P: rows are the union of onsets over all classes, columns the
/// concatenated class blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceMatrix {
    pub piece_id: String,
    pub onsets: Vec<Beat>,
    pub rows: Vec<SparseRow>,
    pub columns: Vec<BasisDescriptor>,
}

impl PieceMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        crate::basis::sparse_get(&self.rows[row], col)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0.0; self.columns.len()];
                for &(c, v) in r {
                    d[c] = v;
                }
                d
            })
            .collect()
    }
}

fn kind_of(desc: &BasisDescriptor) -> Result<BasisKind> {
    desc.kind().ok_or_else(|| Error::Contract(format!("unknown basis label {:?}", desc.label)))
}

const NEIGHBOUR_KINDS: [BasisKind; 3] = [BasisKind::VerticalLower, BasisKind::VerticalHigher, BasisKind::VerticalTotal];

/// Stack the parts of one instrument class.
///
/// Columns are the union of the parts' columns by label; rows are ordered by
/// onset, ties by part order then row order. Neighbour counts are recomputed
/// over the whole class, since simultaneity is defined within the class.
pub fn merge(parts: &[PartBasisMatrix]) -> Result<MergedMatrix> {
    let first = parts.first().ok_or_else(|| Error::Contract("merge needs at least one part".into()))?;
    let class = first.class.clone();
    if let Some(other) = parts.iter().find(|p| p.class != class) {
        return Err(Error::Contract(format!("cannot merge classes {:?} and {:?}", class, other.class)));
    }

    let mut kinds: Vec<BasisKind> = Vec::new();
    for p in parts {
        for c in &p.columns {
            kinds.push(kind_of(c)?);
        }
    }
    kinds.sort();
    kinds.dedup();
    let columns: Vec<BasisDescriptor> = kinds.iter().map(|&k| BasisDescriptor::new(&class, k)).collect();
    let neighbour_cols: Vec<Option<usize>> = NEIGHBOUR_KINDS.iter().map(|k| kinds.binary_search(k).ok()).collect();

    let mut tagged: Vec<(Beat, usize, usize, NoteRow)> = Vec::new();
    for (pi, p) in parts.iter().enumerate() {
        let remap: Vec<usize> = p
            .columns
            .iter()
            .map(|c| kinds.binary_search(&kind_of(c).expect("checked above")).expect("kind in union"))
            .collect();
        for (ri, row) in p.rows.iter().enumerate() {
            let mut values: SparseRow = row.values.iter().map(|&(c, v)| (remap[c], v)).collect();
            values.sort_by_key(|&(c, _)| c);
            tagged.push((row.onset, pi, ri, NoteRow { onset: row.onset, pitch: row.pitch, values }));
        }
    }
    tagged.sort_by_key(|t| (t.0, t.1, t.2));
    let mut rows: Vec<NoteRow> = tagged.into_iter().map(|t| t.3).collect();

    if parts.len() > 1 {
        let mut start = 0;
        while start < rows.len() {
            let onset = rows[start].onset;
            let end = start + rows[start..].iter().take_while(|r| r.onset == onset).count();
            let pitches: Vec<u8> = rows[start..end].iter().map(|r| r.pitch).collect();
            for k in 0..pitches.len() {
                let (lo, hi, total) = vertical_neighbors(&pitches, k);
                let row = &mut rows[start + k];
                row.values.retain(|(c, _)| !neighbour_cols.contains(&Some(*c)));
                for (col, v) in neighbour_cols.iter().zip([lo, hi, total]) {
                    if let (Some(c), true) = (col, v > 0) {
                        row.values.push((*c, v as f64));
                    }
                }
                row.values.sort_by_key(|&(c, _)| c);
            }
            start = end;
        }
    }
    Ok(MergedMatrix { class, rows, columns })
}

/// Reduce a group of values under one policy. Values are summed in sorted
/// order so that the result does not depend on row order.
pub fn reduce(policy: FusionPolicy, values: &mut [f64], group_size: usize) -> f64 {
    match policy {
        FusionPolicy::Max => values.iter().copied().fold(0.0, f64::max),
        FusionPolicy::Sum | FusionPolicy::Mean => {
            values.sort_by(f64::total_cmp);
            let s: f64 = values.iter().sum();
            if policy == FusionPolicy::Mean {
                s / group_size as f64
            } else {
                s
            }
        }
    }
}

/// One row per distinct onset; each column reduced by its policy over the
/// rows sharing that onset (absent entries count as 0).
pub fn fuse(merged: &MergedMatrix, policies: &FusionPolicies) -> Result<ClassBasisMatrix> {
    let mut columns = merged.columns.clone();
    for c in &mut columns {
        c.policy = policies.policy_for(&kind_of(c)?);
    }
    let mut onsets = Vec::new();
    let mut rows = Vec::new();
    let mut start = 0;
    while start < merged.rows.len() {
        let onset = merged.rows[start].onset;
        let end = start + merged.rows[start..].iter().take_while(|r| r.onset == onset).count();
        if let Some(prev) = onsets.last() {
            if *prev > onset {
                return Err(Error::Contract("merged rows are not sorted by onset".into()));
            }
        }
        let mut by_col: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in &merged.rows[start..end] {
            for &(c, v) in &r.values {
                by_col.entry(c).or_default().push(v);
            }
        }
        let row: SparseRow = by_col
            .into_iter()
            .map(|(c, mut vals)| (c, reduce(columns[c].policy, &mut vals, end - start)))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        onsets.push(onset);
        rows.push(row);
        start = end;
    }
    Ok(ClassBasisMatrix { class: merged.class.clone(), onsets, rows, columns })
}

/// Lay class matrices side by side over the union of their onsets. Classes
/// are ordered by name.
pub fn aggregate_piece(piece_id: &str, classes: &[ClassBasisMatrix]) -> Result<PieceMatrix> {
    if classes.is_empty() {
        return Err(Error::Contract(format!("piece {piece_id} has no instrument classes")));
    }
    let mut order: Vec<&ClassBasisMatrix> = classes.iter().collect();
    order.sort_by(|a, b| a.class.cmp(&b.class));
    if let Some(w) = order.windows(2).find(|w| w[0].class == w[1].class) {
        return Err(Error::Contract(format!("instrument class {:?} appears twice in piece {piece_id}", w[0].class)));
    }

    let mut onsets: Vec<Beat> = order.iter().flat_map(|c| c.onsets.iter().copied()).collect();
    onsets.sort();
    onsets.dedup();

    let mut rows: Vec<SparseRow> = vec![Vec::new(); onsets.len()];
    let mut columns = Vec::new();
    for class in order {
        let offset = columns.len();
        columns.extend(class.columns.iter().cloned());
        for (onset, row) in class.onsets.iter().zip(&class.rows) {
            let r = onsets.binary_search(onset).expect("onset in union");
            rows[r].extend(row.iter().map(|&(c, v)| (c + offset, v)));
        }
    }
    Ok(PieceMatrix { piece_id: piece_id.to_string(), onsets, rows, columns })
}

/// Score to Φ_P: unfold repeats, extract every part, merge and fuse per
/// class, aggregate.
pub fn build_piece_matrix(score: &Score, policies: &FusionPolicies) -> Result<PieceMatrix> {
    let score = crate::score::unfold_repeats(score)?;
    let mut by_class: BTreeMap<&str, Vec<&crate::score::Part>> = BTreeMap::new();
    for p in &score.parts {
        by_class.entry(p.instrument.class.as_str()).or_default().push(p);
    }
    let classes: Vec<ClassBasisMatrix> = by_class
        .into_par_iter()
        .map(|(_, parts)| {
            let matrices = parts.into_iter().map(extract_part_bases).collect::<Result<Vec<_>>>()?;
            fuse(&merge(&matrices)?, policies)
        })
        .collect::<Result<_>>()?;
    aggregate_piece(&score.id, &classes)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::basis::sparse_get;
    use crate::score::{CanonicalInstrument, NoteEvent, Part, TimeSignature};

    pub(crate) fn b(n: i64, d: i64) -> Beat {
        Beat::new(n, d)
    }

    pub(crate) fn part(id: &str, class: &str, notes: &[(i64, i64, u8)]) -> Part {
        Part {
            id: id.into(),
            instrument: CanonicalInstrument::exact(class),
            raw_name: class.into(),
            notes: notes.iter().map(|&(on2, dur2, p)| NoteEvent::new(b(on2, 2), b(dur2, 2), p)).collect(),
            markings: vec![],
            time_signatures: vec![TimeSignature::new(Beat::ZERO, 4, 4)],
            transposition: 0,
            repeat_signs: vec![],
        }
    }

    /// Two oboes: onsets 0, 1 and 1, 1.5 (half-beat units below).
    pub(crate) fn two_oboes() -> Vec<PartBasisMatrix> {
        let o1 = part("P1", "oboe", &[(0, 2, 67), (2, 2, 70)]);
        let o2 = part("P2", "oboe", &[(2, 1, 62), (3, 1, 64)]);
        vec![extract_part_bases(&o1).unwrap(), extract_part_bases(&o2).unwrap()]
    }

    fn col(m: &ClassBasisMatrix, label: &str) -> usize {
        m.columns.iter().position(|c| c.label == label).unwrap()
    }

    #[test]
    fn two_oboes_merge_and_fuse() {
        let merged = merge(&two_oboes()).unwrap();
        assert_eq!(merged.rows.len(), 4);
        let onsets: Vec<Beat> = merged.rows.iter().map(|r| r.onset).collect();
        assert_eq!(onsets, vec![b(0, 1), b(1, 1), b(1, 1), b(3, 2)]);
        let labels: Vec<&str> = merged.columns.iter().map(|c| c.label.as_str()).collect();
        let mut dedup = labels.clone();
        dedup.dedup();
        assert_eq!(labels, dedup);
        assert!(labels.contains(&"metrical.4/4.offbeat"));

        let fused = fuse(&merged, &FusionPolicies::default()).unwrap();
        assert_eq!(fused.onsets, vec![b(0, 1), b(1, 1), b(3, 2)]);
        let pitch = col(&fused, "pitch");
        assert!((sparse_get(&fused.rows[1], pitch) - 66.0 / 127.0).abs() < 1e-15);
        assert!((sparse_get(&fused.rows[1], pitch) - 0.519685).abs() < 1e-6);
        // 70 over 62 at beat 1: one lower, one higher across the desks
        assert_eq!(sparse_get(&fused.rows[1], col(&fused, "vn.total")), 2.0);
        assert_eq!(sparse_get(&fused.rows[1], col(&fused, "vn.lower")), 1.0);
        assert_eq!(sparse_get(&fused.rows[0], col(&fused, "vn.total")), 0.0);
        assert_eq!(sparse_get(&fused.rows[1], col(&fused, "metrical.4/4.beat1")), 1.0);
    }

    #[test]
    fn single_part_merge_is_identity() {
        let p = two_oboes().remove(0);
        let merged = merge(std::slice::from_ref(&p)).unwrap();
        assert_eq!(merged.rows, p.rows);
        assert_eq!(merged.columns, p.columns);
    }

    #[test]
    fn mixed_classes_are_rejected() {
        let a = extract_part_bases(&part("P1", "oboe", &[(0, 2, 60)])).unwrap();
        let b_ = extract_part_bases(&part("P2", "flute", &[(0, 2, 60)])).unwrap();
        assert!(matches!(merge(&[a, b_]), Err(Error::Contract(_))));
    }

    #[test]
    fn max_is_idempotent() {
        assert_eq!(reduce(FusionPolicy::Max, &mut [1.0, 1.0], 2), 1.0);
        assert_eq!(reduce(FusionPolicy::Mean, &mut [1.0], 2), 0.5);
        assert_eq!(reduce(FusionPolicy::Sum, &mut [1.0, 2.0], 2), 3.0);
    }

    #[test]
    fn policy_overrides() {
        let p: FusionPolicies = "pitch=max, vn.=mean".parse().unwrap();
        assert_eq!(p.policy_for(&BasisKind::Pitch(2)), FusionPolicy::Max);
        assert_eq!(p.policy_for(&BasisKind::VerticalTotal), FusionPolicy::Mean);
        assert_eq!(p.policy_for(&BasisKind::Duration), FusionPolicy::Mean);
        assert!(matches!("pitch=median".parse::<FusionPolicies>(), Err(Error::Config(_))));
        assert!(matches!("pitch".parse::<FusionPolicies>(), Err(Error::Config(_))));

        let merged = merge(&two_oboes()).unwrap();
        let fused = fuse(&merged, &p).unwrap();
        let pitch = col(&fused, "pitch");
        assert_eq!(fused.columns[pitch].policy, FusionPolicy::Max);
        assert_eq!(sparse_get(&fused.rows[1], pitch), 70.0 / 127.0);
    }

    #[test]
    fn interleaved_classes_zero_fill() {
        let a = fuse(&merge(&[extract_part_bases(&part("P1", "oboe", &[(0, 2, 60), (4, 2, 62)])).unwrap()]).unwrap(), &FusionPolicies::default()).unwrap();
        let c = fuse(&merge(&[extract_part_bases(&part("P2", "cello", &[(2, 2, 40), (4, 2, 43)])).unwrap()]).unwrap(), &FusionPolicies::default()).unwrap();
        let piece = aggregate_piece("x", &[a.clone(), c.clone()]).unwrap();
        assert_eq!(piece.onsets, vec![b(0, 1), b(1, 1), b(2, 1)]);
        assert_eq!(piece.n_cols(), a.columns.len() + c.columns.len());
        // cello block first (alphabetical), oboe block after it
        let oboe_offset = c.columns.len();
        for k in 0..a.columns.len() {
            assert_eq!(piece.value(1, oboe_offset + k), 0.0);
        }
        assert!(piece.value(1, 0) > 0.0);
        assert!(matches!(aggregate_piece("x", &[a.clone(), a]), Err(Error::Contract(_))));
        assert!(matches!(aggregate_piece("x", &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn one_class_piece_keeps_rows() {
        let fused = fuse(&merge(&two_oboes()).unwrap(), &FusionPolicies::default()).unwrap();
        let piece = aggregate_piece("p", std::slice::from_ref(&fused)).unwrap();
        assert_eq!(piece.rows, fused.rows);
        assert_eq!(piece.onsets, fused.onsets);
    }
}
