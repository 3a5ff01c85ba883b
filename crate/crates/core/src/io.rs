//! JSON file formats for chains, partitions, and edge tensors.
//!
//! * Chain: `{ "n": int, "K": [[row-major floats]], "pi": optional [floats] }`
//!   — when `pi` is absent the invariant measure is computed and certified.
//! * Partition: `{ "n": int, "assignment": [int] }` with 0-based clusters.
//! * Edge tensor: `{ "n": int, "entries": [[...]], "role": "primal"|"dual" }`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coarse::ClusterMap;
use crate::error::{Error, Result};
use crate::markov::{MarkovMatrix, ProbVector};
use crate::tensor::{EdgeTensor, TensorRole};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainFile {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
}

impl ChainFile {
    pub fn from_chain(k: &MarkovMatrix, pi: Option<&ProbVector>) -> Self {
        Self {
            n: k.nrows(),
            k: matrix_rows(k.as_matrix()),
            pi: pi.map(|p| p.as_vector().iter().copied().collect()),
        }
    }

    /// Validates the matrix and resolves the measure: the stored one when
    /// present, the certified invariant measure otherwise.
    pub fn into_chain(
        self,
        structural_tol: f64,
        spectral_tol: f64,
    ) -> Result<(MarkovMatrix, ProbVector)> {
        let k = MarkovMatrix::validate(rows_to_matrix(self.n, &self.k)?, structural_tol)?;
        let pi = match self.pi {
            Some(entries) => {
                if entries.len() != self.n {
                    return Err(Error::DimensionMismatch {
                        expected: self.n,
                        got: entries.len(),
                    });
                }
                ProbVector::new(DVector::from_row_slice(&entries), structural_tol)?
            }
            None => k.invariant_measure(spectral_tol)?,
        };
        Ok((k, pi))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionFile {
    pub n: usize,
    pub assignment: Vec<usize>,
}

impl PartitionFile {
    pub fn from_map(map: &ClusterMap) -> Self {
        Self {
            n: map.n(),
            assignment: map.assignment().to_vec(),
        }
    }

    pub fn into_map(self) -> Result<ClusterMap> {
        if self.assignment.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: self.assignment.len(),
            });
        }
        ClusterMap::from_assignment(self.assignment)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorFile {
    pub n: usize,
    pub entries: Vec<Vec<f64>>,
    pub role: TensorRole,
}

impl TensorFile {
    pub fn from_tensor(t: &EdgeTensor) -> Self {
        Self {
            n: t.n(),
            entries: matrix_rows(t.as_matrix()),
            role: t.role(),
        }
    }

    pub fn into_tensor(self) -> Result<EdgeTensor> {
        EdgeTensor::new(rows_to_matrix(self.n, &self.entries)?, self.role)
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn rows_to_matrix(n: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rows.len(),
        });
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.len(),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{SPECTRAL_TOL, STRUCTURAL_TOL};
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chain_round_trip_with_explicit_measure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (k, pi) = sample::reversible_chain(4, &mut rng);
        let file = ChainFile::from_chain(&k, Some(&pi));
        let json = serde_json::to_string(&file).unwrap();
        let parsed: ChainFile = serde_json::from_str(&json).unwrap();
        let (k2, pi2) = parsed.into_chain(STRUCTURAL_TOL, SPECTRAL_TOL).unwrap();
        assert!((k.as_matrix() - k2.as_matrix()).amax() < 1e-15);
        assert!((pi.as_vector() - pi2.as_vector()).amax() < 1e-15);
    }

    #[test]
    fn missing_measure_is_computed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (k, pi) = sample::reversible_chain(4, &mut rng);
        let file = ChainFile::from_chain(&k, None);
        let (_, resolved) = file.into_chain(STRUCTURAL_TOL, SPECTRAL_TOL).unwrap();
        assert!((pi.as_vector() - resolved.as_vector()).amax() < 1e-10);
    }

    #[test]
    fn partition_round_trip() {
        let file = PartitionFile {
            n: 5,
            assignment: vec![0, 1, 1, 2, 0],
        };
        let map = file.clone().into_map().unwrap();
        assert_eq!(map.n_clusters(), 3);
        assert_eq!(PartitionFile::from_map(&map).assignment, file.assignment);
    }

    #[test]
    fn tensor_round_trip_preserves_role() {
        let t = EdgeTensor::dual(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let json = serde_json::to_string(&TensorFile::from_tensor(&t)).unwrap();
        assert!(json.contains("\"dual\""));
        let parsed: TensorFile = serde_json::from_str(&json).unwrap();
        let back = parsed.into_tensor().unwrap();
        assert_eq!(back.role(), TensorRole::Dual);
        assert_eq!(back.as_matrix(), t.as_matrix());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let file = ChainFile {
            n: 2,
            k: vec![vec![0.5, 0.5], vec![1.0]],
            pi: None,
        };
        assert!(matches!(
            file.into_chain(STRUCTURAL_TOL, SPECTRAL_TOL),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
