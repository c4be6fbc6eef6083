//! Tensor interchange JSON: `{"dim": n, "entries": [[i, j, k, l, value], ...]}`.
//!
//! Indices are 0-based and one representative per symmetry orbit suffices.
//! The loader fills each orbit, rejects conflicting assignments, projects
//! onto the Bianchi subspace and reports the size of that projection.

use serde::{Deserialize, Serialize};

use crate::error::{CurvError, Result};
use crate::tensor::{pair_basis, CurvTensor, Tensor4};

/// Largest Bianchi projection residual accepted without `force`, relative to the norm.
pub const MAX_PROJECTION_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorFile {
    pub dim: usize,
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

impl From<&CurvTensor> for TensorFile {
    fn from(r: &CurvTensor) -> Self {
        let pairs = pair_basis(r.dim());
        let mut entries = Vec::new();
        for (p, &(i, j)) in pairs.iter().enumerate() {
            for &(k, l) in &pairs[p..] {
                let v = r.get(i, j, k, l);
                if v != 0.0 {
                    entries.push((i, j, k, l, v));
                }
            }
        }
        Self {
            dim: r.dim(),
            entries,
        }
    }
}

impl Serialize for CurvTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorFile::from(self).serialize(s)
    }
}

#[derive(Debug, Clone)]
pub struct LoadedTensor {
    pub tensor: CurvTensor,
    /// `|T - b(T)|` for the symmetrized input `T`.
    pub projection_residual: f64,
}

fn entry_error(index: usize, message: String) -> CurvError {
    CurvError::Parse {
        location: format!("entry {index}"),
        message,
    }
}

impl TensorFile {
    /// Expands the entry list to a full tensor.
    pub fn into_tensor(self, force: bool) -> Result<LoadedTensor> {
        let n = self.dim;
        if n < 2 {
            return Err(CurvError::Parse {
                location: "field `dim`".into(),
                message: format!("dimension must be >= 2, got {n}"),
            });
        }
        let mut t = Tensor4::zeros(n);
        let mut assigned = vec![false; n.pow(4)];
        let slot = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
        for (idx, &(i, j, k, l, v)) in self.entries.iter().enumerate() {
            if [i, j, k, l].iter().any(|&a| a >= n) {
                return Err(entry_error(idx, format!("index out of range for dim {n}")));
            }
            if !v.is_finite() {
                return Err(entry_error(idx, "non-finite value".into()));
            }
            let orbit = [
                (i, j, k, l, v),
                (j, i, k, l, -v),
                (i, j, l, k, -v),
                (j, i, l, k, v),
                (k, l, i, j, v),
                (l, k, i, j, -v),
                (k, l, j, i, -v),
                (l, k, j, i, v),
            ];
            for (a, b, c, d, w) in orbit {
                let s = slot(a, b, c, d);
                if assigned[s] && t.get(a, b, c, d) != w {
                    return Err(entry_error(
                        idx,
                        format!(
                            "conflicting value for component ({a},{b},{c},{d}): {} vs {w}",
                            t.get(a, b, c, d)
                        ),
                    ));
                }
                assigned[s] = true;
                t.set(a, b, c, d, w);
            }
        }
        let tensor = CurvTensor::from_fn(n, |i, j, k, l| t.get(i, j, k, l));
        let projection_residual = {
            let mut d = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            d += (t.get(i, j, k, l) - tensor.get(i, j, k, l)).powi(2);
                        }
                    }
                }
            }
            d.sqrt()
        };
        let limit = MAX_PROJECTION_RESIDUAL * t.norm();
        if projection_residual > limit && !force {
            return Err(CurvError::ProjectionResidual {
                residual: projection_residual,
                limit,
            });
        }
        Ok(LoadedTensor {
            tensor,
            projection_residual,
        })
    }
}

pub fn parse_tensor(text: &str, force: bool) -> Result<LoadedTensor> {
    let file: TensorFile = serde_json::from_str(text).map_err(|e| CurvError::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    file.into_tensor(force)
}

pub fn serialize_tensor(r: &CurvTensor) -> String {
    serde_json::to_string(&TensorFile::from(r)).expect("tensor serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::identity_tensor;

    #[test]
    fn sparse_entries_expand_to_orbits() {
        let text = r#"{"dim": 4, "entries": [[1,0,0,1,-1.0],[2,3,2,3,1]]}"#;
        let loaded = parse_tensor(text, false).unwrap();
        let r = loaded.tensor;
        assert_eq!(r.get(0, 1, 0, 1), 1.0);
        assert_eq!(r.get(1, 0, 1, 0), 1.0);
        assert_eq!(r.get(3, 2, 2, 3), -1.0);
        assert_eq!(loaded.projection_residual, 0.0);
    }

    #[test]
    fn conflicting_duplicates_rejected() {
        let text = r#"{"dim": 4, "entries": [[0,1,0,1,1.0],[1,0,1,0,2.0]]}"#;
        let err = parse_tensor(text, false).unwrap_err();
        assert!(matches!(err, CurvError::Parse { ref location, .. } if location == "entry 1"));
        // consistent duplicates are fine
        let text = r#"{"dim": 4, "entries": [[0,1,0,1,1.0],[1,0,0,1,-1.0]]}"#;
        assert!(parse_tensor(text, false).is_ok());
    }

    #[test]
    fn diagonal_index_pairs_must_vanish() {
        let text = r#"{"dim": 4, "entries": [[0,0,1,2,1.0]]}"#;
        assert!(matches!(parse_tensor(text, false), Err(CurvError::Parse { .. })));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_tensor("{\"dim\": 4,\n \"entries\": [[0,1,0,1,]]}", false).unwrap_err();
        match err {
            CurvError::Parse { location, .. } => assert!(location.starts_with("line 2"), "{location}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_bianchi_input_needs_force() {
        // R_0123 alone is half a volume form
        let text = r#"{"dim": 4, "entries": [[0,1,2,3,1.0]]}"#;
        assert!(matches!(
            parse_tensor(text, false),
            Err(CurvError::ProjectionResidual { .. })
        ));
        let loaded = parse_tensor(text, true).unwrap();
        assert!(loaded.projection_residual > 0.1);
        assert!(loaded.tensor.symmetry_defect() < 1e-15);
    }

    #[test]
    fn identity_round_trip() {
        let i = identity_tensor(5).unwrap();
        let back = parse_tensor(&serialize_tensor(&i), false).unwrap().tensor;
        assert_eq!(back, i);
    }
}
