//! Φ_S: pieces stacked over a global descriptor index.

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::PieceMatrix;
use crate::basis::{BasisDescriptor, BasisKind, SparseRow};
use crate::beat::Beat;
use crate::error::{Error, Result};

/// Class name used for descriptors that do not belong to an instrument.
pub const GLOBAL_CLASS: &str = "*";

#[derive(Debug, Clone, PartialEq)]
pub struct PieceBlock {
    pub piece_id: String,
    pub onsets: Vec<Beat>,
    /// Sparse rows in global column indices.
    pub rows: Vec<SparseRow>,
}

/// A descriptor that is non-zero in exactly one piece.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularBasis {
    pub class: String,
    pub label: String,
    pub piece_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    index: IndexMap<(String, String), BasisDescriptor>,
    pub pieces: Vec<PieceBlock>,
}

impl DatasetMatrix {
    /// Pieces are taken in id order and descriptors indexed in first-seen
    /// order, so the layout does not depend on input order.
    pub fn assemble(pieces: &[PieceMatrix]) -> Result<DatasetMatrix> {
        if pieces.is_empty() {
            return Err(Error::Contract("a dataset needs at least one piece".into()));
        }
        let mut sorted: Vec<&PieceMatrix> = pieces.iter().collect();
        sorted.sort_by(|a, b| a.piece_id.cmp(&b.piece_id));
        if let Some(w) = sorted.windows(2).find(|w| w[0].piece_id == w[1].piece_id) {
            return Err(Error::Contract(format!("duplicate piece id {:?}", w[0].piece_id)));
        }
        let mut index: IndexMap<(String, String), BasisDescriptor> = IndexMap::new();
        let mut blocks = Vec::with_capacity(sorted.len());
        for p in sorted {
            let map: Vec<usize> = p
                .columns
                .iter()
                .map(|d| match index.get_index_of(&d.key()) {
                    Some(i) => i,
                    None => index.insert_full(d.key(), d.clone()).0,
                })
                .collect();
            if map.len() != map.iter().collect::<std::collections::HashSet<_>>().len() {
                return Err(Error::Contract(format!("piece {} repeats a (class, label) pair", p.piece_id)));
            }
            let rows = p
                .rows
                .iter()
                .map(|r| {
                    let mut g: SparseRow = r.iter().map(|&(c, v)| (map[c], v)).collect();
                    g.sort_by_key(|&(c, _)| c);
                    g
                })
                .collect();
            blocks.push(PieceBlock { piece_id: p.piece_id.clone(), onsets: p.onsets.clone(), rows });
        }
        Ok(DatasetMatrix { index, pieces: blocks })
    }

    pub fn n_rows(&self) -> usize {
        self.pieces.iter().map(|p| p.rows.len()).sum()
    }

    pub fn n_cols(&self) -> usize {
        self.index.len()
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &BasisDescriptor> {
        self.index.values()
    }

    pub fn column_of(&self, class: &str, label: &str) -> Option<usize> {
        self.index.get_index_of(&(class.to_string(), label.to_string()))
    }

    pub fn piece_index(&self, id: &str) -> Option<usize> {
        self.pieces.iter().position(|p| p.piece_id == id)
    }

    /// Dense N_P × K_S block of one piece.
    pub fn dense(&self, piece: usize) -> DMatrix<f64> {
        let block = &self.pieces[piece];
        let mut m = DMatrix::zeros(block.rows.len(), self.n_cols());
        for (i, row) in block.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(i, c)] = v;
            }
        }
        m
    }

    /// Add an all-ones column, used as the intercept of the linear model.
    pub fn append_constant_column(&mut self) {
        let desc = BasisDescriptor::new(GLOBAL_CLASS, BasisKind::Constant);
        if self.index.contains_key(&desc.key()) {
            return;
        }
        let (c, _) = self.index.insert_full(desc.key(), desc);
        for p in &mut self.pieces {
            for row in &mut p.rows {
                row.push((c, 1.0));
            }
        }
    }

    /// Descriptors with non-zero values in exactly one piece.
    pub fn singular_bases(&self) -> Vec<SingularBasis> {
        let mut owners: Vec<Vec<usize>> = vec![Vec::new(); self.n_cols()];
        for (pi, p) in self.pieces.iter().enumerate() {
            for row in &p.rows {
                for &(c, v) in row {
                    if v != 0.0 && owners[c].last() != Some(&pi) {
                        owners[c].push(pi);
                    }
                }
            }
        }
        self.index
            .values()
            .zip(owners)
            .filter(|(_, o)| o.len() == 1)
            .map(|(d, o)| SingularBasis {
                class: d.class.clone(),
                label: d.label.clone(),
                piece_id: self.pieces[o[0]].piece_id.clone(),
            })
            .collect()
    }

    /// Hex SHA-256 of the ordered descriptor index.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for d in self.index.values() {
            h.update(d.class.as_bytes());
            h.update([0]);
            h.update(d.label.as_bytes());
            h.update([0]);
            h.update(d.policy.name().as_bytes());
            h.update([0xff]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::extract_part_bases;
    use crate::fusion::tests::part;
    use crate::fusion::{aggregate_piece, fuse, merge, FusionPolicies};

    fn piece(id: &str, classes: &[(&str, &[(i64, i64, u8)])]) -> PieceMatrix {
        let fused: Vec<_> = classes
            .iter()
            .map(|(c, notes)| {
                let m = extract_part_bases(&part("P", c, notes)).unwrap();
                fuse(&merge(&[m]).unwrap(), &FusionPolicies::default()).unwrap()
            })
            .collect();
        aggregate_piece(id, &fused).unwrap()
    }

    #[test]
    fn one_piece() {
        let p = piece("a", &[("oboe", &[(0, 2, 60), (2, 2, 62)])]);
        let d = DatasetMatrix::assemble(std::slice::from_ref(&p)).unwrap();
        assert_eq!(d.n_cols(), p.n_cols());
        assert_eq!(d.n_rows(), p.n_rows());
        assert_eq!(d.dense(0)[(1, 0)], p.value(1, 0));
    }

    #[test]
    fn shared_and_disjoint_labels() {
        let a = piece("a", &[("oboe", &[(0, 2, 60)])]);
        let b = piece("b", &[("oboe", &[(0, 2, 64)])]);
        let d = DatasetMatrix::assemble(&[a.clone(), b]).unwrap();
        assert_eq!(d.n_cols(), a.n_cols());
        assert!(d.singular_bases().is_empty());

        let c = piece("c", &[("flute", &[(0, 2, 80)])]);
        let d = DatasetMatrix::assemble(&[c.clone(), a.clone()]).unwrap();
        assert_eq!(d.n_cols(), a.n_cols() + c.n_cols());
        assert_eq!(d.n_rows(), 2);
        // sorted by id: a first
        assert_eq!(d.pieces[0].piece_id, "a");
        assert_eq!(d.descriptors().next().unwrap().class, "oboe");
        let singular = d.singular_bases();
        // neighbour counts are zero for lone notes, so only 6 columns per piece are active
        assert_eq!(singular.len(), 12);
        assert_eq!(d.dense(1).row(0).iter().take(a.n_cols()).filter(|v| **v != 0.0).count(), 0);
    }

    #[test]
    fn order_independent_and_fingerprinted() {
        let a = piece("a", &[("oboe", &[(0, 2, 60)])]);
        let c = piece("c", &[("flute", &[(1, 2, 80)])]);
        let d1 = DatasetMatrix::assemble(&[a.clone(), c.clone()]).unwrap();
        let d2 = DatasetMatrix::assemble(&[c, a]).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.fingerprint(), d2.fingerprint());
        assert_eq!(d1.fingerprint().len(), 64);
        let mut d3 = d1.clone();
        d3.append_constant_column();
        assert_ne!(d3.fingerprint(), d1.fingerprint());
        assert_eq!(d3.n_cols(), d1.n_cols() + 1);
        assert!(d3.dense(0).column(d3.n_cols() - 1).iter().all(|&v| v == 1.0));
        assert!(DatasetMatrix::assemble(&[]).is_err());
    }
}
