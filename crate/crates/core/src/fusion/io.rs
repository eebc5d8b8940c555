//! Piece matrix files: `row,col,value` triplets plus a JSON sidecar holding
//! the onsets and the descriptor index.

use serde::{Deserialize, Serialize};

use super::PieceMatrix;
use crate::basis::{BasisDescriptor, SparseRow};
use crate::beat::Beat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceSidecar {
    pub piece_id: String,
    pub onsets: Vec<Beat>,
    pub descriptors: Vec<BasisDescriptor>,
}

/// Serialize to `(triplets_csv, sidecar_json)`. Floats use the shortest
/// representation that round-trips, so output is byte-stable.
pub fn write_piece_matrix(m: &PieceMatrix) -> Result<(String, String)> {
    let mut csv = String::from("row,col,value\n");
    for (r, row) in m.rows.iter().enumerate() {
        for &(c, v) in row {
            csv.push_str(&format!("{r},{c},{v:?}\n"));
        }
    }
    let sidecar = PieceSidecar { piece_id: m.piece_id.clone(), onsets: m.onsets.clone(), descriptors: m.columns.clone() };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    Ok((csv, json))
}

pub fn read_piece_matrix(csv: &str, sidecar_json: &str) -> Result<PieceMatrix> {
    let sidecar: PieceSidecar = serde_json::from_str(sidecar_json)?;
    let mut rows: Vec<SparseRow> = vec![Vec::new(); sidecar.onsets.len()];
    for (i, line) in csv.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("row")) {
            continue;
        }
        let bad = || Error::Format(format!("matrix line {}: expected row,col,value, got {line:?}", i + 1));
        let mut it = line.split(',');
        let (r, c, v) = match (it.next(), it.next(), it.next(), it.next()) {
            (Some(r), Some(c), Some(v), None) => (r, c, v),
            _ => return Err(bad()),
        };
        let r: usize = r.trim().parse().map_err(|_| bad())?;
        let c: usize = c.trim().parse().map_err(|_| bad())?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        if r >= rows.len() || c >= sidecar.descriptors.len() || !v.is_finite() {
            return Err(Error::Format(format!("matrix line {}: entry ({r}, {c}) = {v} out of range", i + 1)));
        }
        rows[r].push((c, v));
    }
    for row in &mut rows {
        row.sort_by_key(|&(c, _)| c);
        if row.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Format("matrix file repeats an entry".into()));
        }
    }
    Ok(PieceMatrix { piece_id: sidecar.piece_id, onsets: sidecar.onsets, rows, columns: sidecar.descriptors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::tests::two_oboes;
    use crate::fusion::{aggregate_piece, fuse, merge, FusionPolicies};

    #[test]
    fn round_trip_is_exact() {
        let fused = fuse(&merge(&two_oboes()).unwrap(), &FusionPolicies::default()).unwrap();
        let piece = aggregate_piece("fig2", &[fused]).unwrap();
        let (csv, json) = write_piece_matrix(&piece).unwrap();
        assert!(csv.starts_with("row,col,value\n"));
        assert!(json.contains("\"3/2\""));
        let back = read_piece_matrix(&csv, &json).unwrap();
        assert_eq!(back, piece);
        assert_eq!(write_piece_matrix(&back).unwrap(), (csv, json));
    }

    #[test]
    fn bad_lines_are_format_errors() {
        let json = r#"{"piece_id":"x","onsets":["0"],"descriptors":[{"class":"oboe","label":"pitch","policy":"mean"}]}"#;
        assert!(read_piece_matrix("row,col,value\n0,0,0.5\n", json).is_ok());
        for bad in ["0,0\n", "0,1,0.5\n", "1,0,0.5\n", "0,0,x\n", "0,0,NaN\n", "0,0,1\n0,0,2\n"] {
            assert!(matches!(read_piece_matrix(bad, json), Err(Error::Format(_))), "{bad}");
        }
    }
}
