//! Edge-level coarse-graining on tensor spaces.
//!
//! Functions on edges are `n × n` matrices. The lift `M̃ b̂ = M b̂ M*`
//! copies a coarse edge value onto every fine edge between the two blocks;
//! its adjoint `M̃* b = M* b M` sums fine edge values blockwise. Fixing
//! edge weights `m` (typically `m = Q_π K`) with block sums `m̂`, the
//! weighted reconstruction
//!
//! ```text
//! Ñ = Q_m̂⁻¹ M̃* Q_m,      Ñ* = Q_m M̃ Q_m̂⁻¹,
//! ```
//!
//! averages with weights `m / m̂` and maps `m̂` back to `m`. The incidence
//! operator of the complete graph acts as `(Dx)_{ij} = x_i − x_j` and is
//! never materialized; `Ñ D M` reproduces the canonical incidence operator
//! on the quotient, independently of the weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coarse::ClusterMap;
use crate::error::{Error, Result};
use crate::markov::{invariance_residual, MarkovMatrix, ProbVector};

/// Which space an edge tensor lives in: functions on edges (`X ⊗ X`) or
/// measures/weights on edges (`X* ⊗ X*`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorRole {
    Primal,
    Dual,
}

/// An `n × n` matrix viewed as a function or measure on directed edges.
///
/// Diagonal entries are carried along (the lift and restriction act on
/// them too) but the incidence adjoint ignores them.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTensor {
    entries: DMatrix<f64>,
    role: TensorRole,
}

impl EdgeTensor {
    pub fn new(entries: DMatrix<f64>, role: TensorRole) -> Result<Self> {
        for i in 0..entries.nrows() {
            for j in 0..entries.ncols() {
                if !entries[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self { entries, role })
    }

    pub fn primal(entries: DMatrix<f64>) -> Result<Self> {
        Self::new(entries, TensorRole::Primal)
    }

    pub fn dual(entries: DMatrix<f64>) -> Result<Self> {
        Self::new(entries, TensorRole::Dual)
    }

    /// A dual tensor intended as edge weights: entrywise nonnegative.
    pub fn weights(entries: DMatrix<f64>) -> Result<Self> {
        for i in 0..entries.nrows() {
            for j in 0..entries.ncols() {
                let v = entries[(i, j)];
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Self::new(entries, TensorRole::Dual)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn role(&self) -> TensorRole {
        self.role
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
}

/// The duality pairing `⟨⟨A, B⟩⟩ = Tr(A* B) = Σ_ij A_ij B_ij`.
pub fn tensor_pairing(a: &EdgeTensor, b: &EdgeTensor) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: b.n(),
        });
    }
    Ok(pairing_raw(a.as_matrix(), b.as_matrix()))
}

pub(crate) fn pairing_raw(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// The edge weights `m = Q_π K`, i.e. `m_ij = π_i K_ij`.
///
/// Requires `π` invariant for `K`; then the row sums of `m` equal `π` and
/// the column sums do as well, and `m` is symmetric exactly when `K`
/// satisfies detailed balance.
pub fn edge_weight(k: &MarkovMatrix, pi: &ProbVector, tol: f64) -> Result<EdgeTensor> {
    if k.nrows() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            got: pi.len(),
        });
    }
    let residual = invariance_residual(k, pi);
    if residual > tol {
        return Err(Error::InvariantMismatch { residual, tol });
    }
    let n = k.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| pi.get(i) * k.get(i, j));
    EdgeTensor::weights(m)
}

/// The lift `M̃ b̂ = M b̂ M*`: `(M̃ b̂)_{ij} = b̂_{φ(i) φ(j)}`.
pub fn lift(map: &ClusterMap, b_hat: &EdgeTensor) -> Result<EdgeTensor> {
    if b_hat.n() != map.n_clusters() {
        return Err(Error::DimensionMismatch {
            expected: map.n_clusters(),
            got: b_hat.n(),
        });
    }
    let n = map.n();
    let entries = DMatrix::from_fn(n, n, |i, j| b_hat.get(map.cluster_of(i), map.cluster_of(j)));
    EdgeTensor::new(entries, b_hat.role())
}

/// The restriction `M̃* b = M* b M`: blockwise sums
/// `(M̃* b)_{kl} = Σ_{i ∈ φ⁻¹(k)} Σ_{j ∈ φ⁻¹(l)} b_ij`.
pub fn restrict(map: &ClusterMap, b: &EdgeTensor) -> Result<EdgeTensor> {
    if b.n() != map.n() {
        return Err(Error::DimensionMismatch {
            expected: map.n(),
            got: b.n(),
        });
    }
    let nh = map.n_clusters();
    let mut entries = DMatrix::zeros(nh, nh);
    for i in 0..map.n() {
        let ci = map.cluster_of(i);
        for j in 0..map.n() {
            entries[(ci, map.cluster_of(j))] += b.get(i, j);
        }
    }
    EdgeTensor::new(entries, b.role())
}

/// The weighted edge reconstruction pair `(Ñ, Ñ*)` for fixed weights `m`
/// and their block sums `m̂`.
///
/// Block pairs with `m̂_{kl} = 0` are inert: every fine weight there
/// vanishes too, so `0/0` is taken as `0`.
#[derive(Debug, Clone)]
pub struct EdgeReconstruction {
    map: ClusterMap,
    m: EdgeTensor,
    m_hat: EdgeTensor,
}

impl EdgeReconstruction {
    /// Builds from the fine weights alone; `m̂ = M̃* m`.
    pub fn new(map: ClusterMap, m: EdgeTensor) -> Result<Self> {
        let m_hat = restrict(&map, &m)?;
        Ok(Self { map, m, m_hat })
    }

    /// Builds from both weight levels, rejecting inconsistent `m̂`.
    pub fn with_coarse(map: ClusterMap, m: EdgeTensor, m_hat: EdgeTensor) -> Result<Self> {
        let expected = restrict(&map, &m)?;
        let residual = (expected.as_matrix() - m_hat.as_matrix()).amax();
        if residual > 1e-12 {
            return Err(Error::WeightMismatch { residual });
        }
        Ok(Self { map, m, m_hat })
    }

    pub fn map(&self) -> &ClusterMap {
        &self.map
    }

    pub fn weights(&self) -> &EdgeTensor {
        &self.m
    }

    pub fn coarse_weights(&self) -> &EdgeTensor {
        &self.m_hat
    }

    /// `Ñ b`: the `m`-weighted block average
    /// `(Ñ b)_{kl} = Σ_{block kl} m_ij b_ij / m̂_{kl}`.
    pub fn apply(&self, b: &EdgeTensor) -> Result<EdgeTensor> {
        if b.n() != self.map.n() {
            return Err(Error::DimensionMismatch {
                expected: self.map.n(),
                got: b.n(),
            });
        }
        let nh = self.map.n_clusters();
        let mut num = DMatrix::<f64>::zeros(nh, nh);
        for i in 0..self.map.n() {
            let ci = self.map.cluster_of(i);
            for j in 0..self.map.n() {
                num[(ci, self.map.cluster_of(j))] += self.m.get(i, j) * b.get(i, j);
            }
        }
        let mut entries = DMatrix::zeros(nh, nh);
        for k in 0..nh {
            for l in 0..nh {
                let w = self.m_hat.get(k, l);
                if w > 1e-14 {
                    entries[(k, l)] = num[(k, l)] / w;
                } else if num[(k, l)].abs() > 1e-12 {
                    return Err(Error::WeightDegenerate {
                        row: k,
                        col: l,
                        numerator: num[(k, l)],
                    });
                }
            }
        }
        EdgeTensor::new(entries, b.role())
    }

    /// `Ñ* b̂`: the weighted spreading
    /// `(Ñ* b̂)_{ij} = m_ij b̂_{φ(i) φ(j)} / m̂_{φ(i) φ(j)}`.
    pub fn apply_adjoint(&self, b_hat: &EdgeTensor) -> Result<EdgeTensor> {
        if b_hat.n() != self.map.n_clusters() {
            return Err(Error::DimensionMismatch {
                expected: self.map.n_clusters(),
                got: b_hat.n(),
            });
        }
        let n = self.map.n();
        let mut entries = DMatrix::zeros(n, n);
        for i in 0..n {
            let ci = self.map.cluster_of(i);
            for j in 0..n {
                let cj = self.map.cluster_of(j);
                let w = self.m_hat.get(ci, cj);
                let mij = self.m.get(i, j);
                if w > 1e-14 {
                    entries[(i, j)] = mij * b_hat.get(ci, cj) / w;
                } else if mij.abs() > 1e-12 {
                    return Err(Error::WeightDegenerate {
                        row: ci,
                        col: cj,
                        numerator: mij,
                    });
                }
            }
        }
        EdgeTensor::new(entries, b_hat.role())
    }
}

/// The incidence operator of the complete directed graph on `n` states,
/// acting functionally: `(Dx)_{ij} = x_i − x_j`, counting both
/// orientations of every edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncidenceOperator {
    n: usize,
}

impl IncidenceOperator {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `D x` as a primal edge tensor; constants map to zero.
    pub fn apply(&self, x: &DVector<f64>) -> Result<EdgeTensor> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let entries = DMatrix::from_fn(self.n, self.n, |i, j| x[i] - x[j]);
        EdgeTensor::primal(entries)
    }

    /// `D* b`: `(D* b)_l = Σ_j (b_lj − b_jl)`. Diagonal entries cancel and
    /// are effectively ignored.
    pub fn adjoint(&self, b: &EdgeTensor) -> Result<DVector<f64>> {
        if b.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.n(),
            });
        }
        Ok(DVector::from_fn(self.n, |l, _| {
            (0..self.n).map(|j| b.get(l, j) - b.get(j, l)).sum()
        }))
    }
}

/// The coarse incidence operator obtained as `Ñ D M`, certified entrywise
/// against the canonical incidence operator on the quotient space.
///
/// Returns the operator together with the largest deviation of `Ñ D M`
/// from the canonical form; the theorem makes the deviation vanish for any
/// weights whose block sums are positive off the diagonal.
pub fn coarse_incidence(map: &ClusterMap, m: &EdgeTensor) -> Result<(IncidenceOperator, f64)> {
    let recon = EdgeReconstruction::new(map.clone(), m.clone())?;
    let fine = IncidenceOperator::new(map.n());
    let nh = map.n_clusters();
    let mut deviation: f64 = 0.0;
    for k in 0..nh {
        let basis = DVector::from_fn(nh, |i, _| if i == k { 1.0 } else { 0.0 });
        let image = recon.apply(&fine.apply(&map.lift(&basis))?)?;
        for r in 0..nh {
            for c in 0..nh {
                let canonical = if r == k && c != k {
                    1.0
                } else if c == k && r != k {
                    -1.0
                } else {
                    0.0
                };
                deviation = deviation.max((image.get(r, c) - canonical).abs());
            }
        }
    }
    Ok((IncidenceOperator::new(nh), deviation))
}

/// Directed quotient graph: one vertex per block, an edge `(k, l)` with
/// `k ≠ l` whenever some fine transition crosses from block `k` to block
/// `l`. Intra-block edges vanish by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientGraph {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl QuotientGraph {
    pub fn new(k: &MarkovMatrix, map: &ClusterMap) -> Result<Self> {
        if k.nrows() != map.n() {
            return Err(Error::DimensionMismatch {
                expected: map.n(),
                got: k.nrows(),
            });
        }
        let nh = map.n_clusters();
        let mut present = vec![false; nh * nh];
        for i in 0..map.n() {
            let ci = map.cluster_of(i);
            for j in 0..map.n() {
                let cj = map.cluster_of(j);
                if ci != cj && k.get(i, j) > 0.0 {
                    present[ci * nh + cj] = true;
                }
            }
        }
        let edges = (0..nh)
            .flat_map(|a| (0..nh).map(move |b| (a, b)))
            .filter(|&(a, b)| present[a * nh + b])
            .collect();
        Ok(Self {
            n_vertices: nh,
            edges,
        })
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Undirected view: each unordered pair listed once.
    pub fn symmetrized(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::CoarseGrainPair;
    use crate::markov::STRUCTURAL_TOL;
    use crate::sample;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_map() -> ClusterMap {
        ClusterMap::new(vec![0, 1, 1], 2).unwrap()
    }

    fn random_tensor<R: Rng>(n: usize, role: TensorRole, rng: &mut R) -> EdgeTensor {
        EdgeTensor::new(
            DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5),
            role,
        )
        .unwrap()
    }

    fn positive_tensor<R: Rng>(n: usize, rng: &mut R) -> EdgeTensor {
        EdgeTensor::weights(DMatrix::from_fn(n, n, |_, _| 0.05 + rng.random::<f64>())).unwrap()
    }

    #[test]
    fn pairing_of_unit_tensors_is_kronecker() {
        let mut e01 = DMatrix::zeros(2, 2);
        e01[(0, 1)] = 1.0;
        let a = EdgeTensor::dual(e01.clone()).unwrap();
        let b = EdgeTensor::primal(e01).unwrap();
        assert_eq!(tensor_pairing(&a, &b).unwrap(), 1.0);
        let c = EdgeTensor::primal(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(tensor_pairing(&a, &c).unwrap(), 0.0);
    }

    #[test]
    fn edge_weights_sum_to_one_against_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (k, pi) = sample::reversible_chain(5, &mut rng);
        let m = edge_weight(&k, &pi, 1e-9).unwrap();
        let ones = EdgeTensor::primal(DMatrix::from_element(5, 5, 1.0)).unwrap();
        assert!((tensor_pairing(&m, &ones).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_multiplication_is_symmetric_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = positive_tensor(4, &mut rng);
        let b = random_tensor(4, TensorRole::Primal, &mut rng);
        let c = random_tensor(4, TensorRole::Primal, &mut rng);
        let qm_b = EdgeTensor::dual(m.as_matrix().component_mul(b.as_matrix())).unwrap();
        let qm_c = EdgeTensor::dual(m.as_matrix().component_mul(c.as_matrix())).unwrap();
        let lhs = tensor_pairing(&qm_b, &c).unwrap();
        let rhs = tensor_pairing(&qm_c, &b).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn edge_weight_of_identity_is_diagonal() {
        let k = MarkovMatrix::validate(DMatrix::identity(3, 3), STRUCTURAL_TOL).unwrap();
        let pi = ProbVector::uniform(3);
        let m = edge_weight(&k, &pi, 1e-9).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert_eq!(m.get(i, j), expected);
            }
        }
    }

    #[test]
    fn edge_weight_symmetric_iff_reversible() {
        let (gen, pi) = sample::counterexample_generator(1.0);
        let k = gen.to_markov(1.0 / 16.0).unwrap();
        let m = edge_weight(&k, &pi, 1e-9).unwrap();
        assert!((m.as_matrix() - m.as_matrix().transpose()).amax() < 1e-15);
    }

    #[test]
    fn lift_of_coarse_ones_is_fine_ones() {
        let map = example_map();
        let ones = EdgeTensor::primal(DMatrix::from_element(2, 2, 1.0)).unwrap();
        let lifted = lift(&map, &ones).unwrap();
        assert_eq!(lifted.as_matrix(), &DMatrix::from_element(3, 3, 1.0));
    }

    #[test]
    fn lift_under_identity_map_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_tensor(4, TensorRole::Primal, &mut rng);
        let lifted = lift(&ClusterMap::identity(4), &b).unwrap();
        assert_eq!(lifted.as_matrix(), b.as_matrix());
    }

    #[test]
    fn lift_reads_block_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let map = sample::random_partition(7, 3, &mut rng);
        let b_hat = random_tensor(3, TensorRole::Primal, &mut rng);
        let b = lift(&map, &b_hat).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(b.get(i, j), b_hat.get(map.cluster_of(i), map.cluster_of(j)));
            }
        }
    }

    #[test]
    fn restrict_of_edge_weights_is_coarse_edge_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (k, pi) = sample::reversible_chain(6, &mut rng);
        let map = sample::random_partition(6, 3, &mut rng);
        let pair = CoarseGrainPair::new(map.clone(), pi.clone()).unwrap();
        let k_hat = pair.coarse_markov(&k, 1e-9).unwrap();

        let m = edge_weight(&k, &pi, 1e-9).unwrap();
        let m_hat = restrict(&map, &m).unwrap();
        let expected = edge_weight(&k_hat, pair.pi_hat(), 1e-9).unwrap();
        assert!((m_hat.as_matrix() - expected.as_matrix()).amax() < 1e-13);
    }

    #[test]
    fn restrict_of_edge_weights_holds_without_reversibility() {
        // The blockwise identity only needs π invariant, not reversible.
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let k = sample::random_chain(6, &mut rng);
        let pi = k.invariant_measure(1e-9).unwrap();
        let map = sample::random_partition(6, 3, &mut rng);
        let pair = CoarseGrainPair::new(map.clone(), pi.clone()).unwrap();
        let k_hat = pair.coarse_markov(&k, 1e-9).unwrap();

        let m = edge_weight(&k, &pi, 1e-9).unwrap();
        let m_hat = restrict(&map, &m).unwrap();
        let expected = edge_weight(&k_hat, pair.pi_hat(), 1e-9).unwrap();
        assert!((m_hat.as_matrix() - expected.as_matrix()).amax() < 1e-13);
    }

    #[test]
    fn lift_and_restrict_are_adjoint_in_the_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let map = sample::random_partition(6, 3, &mut rng);
        for _ in 0..50 {
            let b_hat = random_tensor(3, TensorRole::Primal, &mut rng);
            let c = random_tensor(6, TensorRole::Dual, &mut rng);
            let lhs = tensor_pairing(&c, &lift(&map, &b_hat).unwrap()).unwrap();
            let rhs = tensor_pairing(&restrict(&map, &c).unwrap(), &b_hat).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn restrict_after_lift_scales_by_block_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let map = sample::random_partition(7, 3, &mut rng);
        let b_hat = random_tensor(3, TensorRole::Primal, &mut rng);
        let round = restrict(&map, &lift(&map, &b_hat).unwrap()).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                let scale = (map.block(k).len() * map.block(l).len()) as f64;
                assert!((round.get(k, l) - scale * b_hat.get(k, l)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weighted_reconstruction_inverts_lift() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let map = sample::random_partition(6, 3, &mut rng);
        let m = positive_tensor(6, &mut rng);
        let recon = EdgeReconstruction::new(map.clone(), m).unwrap();
        let b_hat = random_tensor(3, TensorRole::Primal, &mut rng);
        let round = recon.apply(&lift(&map, &b_hat).unwrap()).unwrap();
        assert!((round.as_matrix() - b_hat.as_matrix()).amax() < 1e-12);
    }

    #[test]
    fn weighted_reconstruction_maps_ones_to_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let map = sample::random_partition(5, 2, &mut rng);
        let m = positive_tensor(5, &mut rng);
        let recon = EdgeReconstruction::new(map, m).unwrap();
        let ones = EdgeTensor::primal(DMatrix::from_element(5, 5, 1.0)).unwrap();
        let image = recon.apply(&ones).unwrap();
        assert!((image.as_matrix() - DMatrix::from_element(2, 2, 1.0)).amax() < 1e-13);
    }

    #[test]
    fn adjoint_reconstruction_recovers_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (k, pi) = sample::reversible_chain(6, &mut rng);
        let map = sample::random_partition(6, 3, &mut rng);
        let m = edge_weight(&k, &pi, 1e-9).unwrap();
        let recon = EdgeReconstruction::new(map, m.clone()).unwrap();
        let back = recon.apply_adjoint(recon.coarse_weights()).unwrap();
        assert!((back.as_matrix() - m.as_matrix()).amax() < 1e-13);
    }

    #[test]
    fn reconstruction_under_identity_map_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = positive_tensor(4, &mut rng);
        let recon = EdgeReconstruction::new(ClusterMap::identity(4), m).unwrap();
        let b = random_tensor(4, TensorRole::Primal, &mut rng);
        let image = recon.apply(&b).unwrap();
        assert!((image.as_matrix() - b.as_matrix()).amax() < 1e-13);
    }

    #[test]
    fn inconsistent_coarse_weights_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let map = sample::random_partition(5, 2, &mut rng);
        let m = positive_tensor(5, &mut rng);
        let wrong = positive_tensor(2, &mut rng);
        assert!(matches!(
            EdgeReconstruction::with_coarse(map, m, wrong),
            Err(Error::WeightMismatch { .. })
        ));
    }

    #[test]
    fn zero_weight_blocks_are_inert() {
        // Weights vanish on the whole (0, 1) block pair, so the averaged
        // value there is defined as zero on both the forward and adjoint
        // path.
        let map = ClusterMap::new(vec![0, 0, 1], 2).unwrap();
        let mut w = DMatrix::from_element(3, 3, 1.0);
        w[(0, 2)] = 0.0;
        w[(1, 2)] = 0.0;
        let recon = EdgeReconstruction::new(map, EdgeTensor::weights(w).unwrap()).unwrap();
        assert_eq!(recon.coarse_weights().get(0, 1), 0.0);

        let b = EdgeTensor::primal(DMatrix::from_element(3, 3, 2.0)).unwrap();
        let image = recon.apply(&b).unwrap();
        assert_eq!(image.get(0, 1), 0.0);
        assert!((image.get(1, 0) - 2.0).abs() < 1e-15);

        let b_hat = EdgeTensor::dual(DMatrix::from_element(2, 2, 3.0)).unwrap();
        let spread = recon.apply_adjoint(&b_hat).unwrap();
        assert_eq!(spread.get(0, 2), 0.0);
        assert_eq!(spread.get(1, 2), 0.0);
    }

    #[test]
    fn tensors_reject_non_finite_entries() {
        let mut bad = DMatrix::from_element(2, 2, 1.0);
        bad[(0, 1)] = f64::INFINITY;
        assert!(matches!(
            EdgeTensor::primal(bad),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        let mut negative = DMatrix::from_element(2, 2, 1.0);
        negative[(1, 0)] = -0.5;
        assert!(matches!(
            EdgeTensor::weights(negative),
            Err(Error::NegativeEntry { row: 1, col: 0, .. })
        ));
    }

    #[test]
    fn symmetric_weights_reconstruct_symmetric_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (k, pi) = sample::reversible_chain(6, &mut rng);
        let m = edge_weight(&k, &pi, 1e-9).unwrap();
        let map = sample::random_partition(6, 3, &mut rng);
        let recon = EdgeReconstruction::new(map, m).unwrap();
        let raw = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
        let sym = EdgeTensor::primal(&raw + raw.transpose()).unwrap();
        let image = recon.apply(&sym).unwrap();
        assert!((image.as_matrix() - image.as_matrix().transpose()).amax() < 1e-13);
    }

    #[test]
    fn incidence_kills_constants() {
        let d = IncidenceOperator::new(4);
        let image = d.apply(&DVector::from_element(4, 1.0)).unwrap();
        assert_eq!(image.as_matrix().amax(), 0.0);
    }

    #[test]
    fn incidence_on_basis_vector() {
        let d = IncidenceOperator::new(2);
        let image = d.apply(&DVector::from_row_slice(&[1.0, 0.0])).unwrap();
        assert_eq!(
            image.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
        );
    }

    #[test]
    fn incidence_images_are_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let d = IncidenceOperator::new(6);
        let x = DVector::from_fn(6, |_, _| rng.random::<f64>() - 0.5);
        let image = d.apply(&x).unwrap();
        assert!((image.as_matrix() + image.as_matrix().transpose()).amax() < 1e-15);
    }

    #[test]
    fn incidence_adjoint_kills_symmetric_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let d = IncidenceOperator::new(5);
        let raw = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>());
        let sym = EdgeTensor::dual(&raw + raw.transpose()).unwrap();
        assert!(d.adjoint(&sym).unwrap().amax() < 1e-14);
    }

    #[test]
    fn incidence_adjoint_on_unit_tensor() {
        let d = IncidenceOperator::new(3);
        let mut e12 = DMatrix::zeros(3, 3);
        e12[(0, 1)] = 1.0;
        let image = d.adjoint(&EdgeTensor::dual(e12).unwrap()).unwrap();
        assert_eq!(image, DVector::from_row_slice(&[1.0, -1.0, 0.0]));
    }

    #[test]
    fn incidence_adjoint_matches_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let d = IncidenceOperator::new(5);
        for _ in 0..50 {
            let x = DVector::from_fn(5, |_, _| rng.random::<f64>() - 0.5);
            let b = random_tensor(5, TensorRole::Dual, &mut rng);
            let lhs = tensor_pairing(&b, &d.apply(&x).unwrap()).unwrap();
            let rhs = d.adjoint(&b).unwrap().dot(&x);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn incidence_laplacian_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 6;
        let d = IncidenceOperator::new(n);
        let x = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        let image = d.adjoint(&d.apply(&x).unwrap()).unwrap();
        let total: f64 = x.sum();
        for l in 0..n {
            let expected = 2.0 * (n as f64 * x[l] - total);
            assert!((image[l] - expected).abs() < 1e-12);
        }
    }

    /// Dense n² × n materialization of the incidence operator, kept in
    /// test code as an independent oracle for the functional paths.
    fn dense_incidence(n: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(n * n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let row = i * n + j;
                d[(row, i)] += 1.0;
                d[(row, j)] -= 1.0;
            }
        }
        d
    }

    #[test]
    fn functional_incidence_matches_dense_materialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let n = 5;
        let d = IncidenceOperator::new(n);
        let dense = dense_incidence(n);
        for _ in 0..20 {
            let x = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            let flat = &dense * &x;
            let image = d.apply(&x).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!((image.get(i, j) - flat[i * n + j]).abs() < 1e-15);
                }
            }

            let b = random_tensor(n, TensorRole::Dual, &mut rng);
            let b_flat = DVector::from_fn(n * n, |e, _| b.get(e / n, e % n));
            let via_dense = dense.transpose() * b_flat;
            let via_functional = d.adjoint(&b).unwrap();
            assert!((via_dense - via_functional).amax() < 1e-13);
        }
    }

    #[test]
    fn coarse_incidence_is_canonical_for_positive_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..20 {
            let map = sample::random_partition(6, 3, &mut rng);
            let m = positive_tensor(6, &mut rng);
            let (op, deviation) = coarse_incidence(&map, &m).unwrap();
            assert_eq!(op.n(), 3);
            assert!(deviation < 1e-12, "deviation {deviation}");
        }
    }

    #[test]
    fn coarse_incidence_on_three_to_two_example() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let map = example_map();
        let m = positive_tensor(3, &mut rng);
        let recon = EdgeReconstruction::new(map.clone(), m).unwrap();
        let fine = IncidenceOperator::new(3);
        let basis = DVector::from_row_slice(&[1.0, 0.0]);
        let image = recon
            .apply(&fine.apply(&map.lift(&basis)).unwrap())
            .unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((image.as_matrix() - expected).amax() < 1e-13);
    }

    #[test]
    fn coarse_incidence_under_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let m = positive_tensor(4, &mut rng);
        let (op, deviation) = coarse_incidence(&ClusterMap::identity(4), &m).unwrap();
        assert_eq!(op.n(), 4);
        assert!(deviation < 1e-13);
    }

    #[test]
    fn lifted_coarse_incidence_factors_through_fine() {
        // M̃ D̂ x̂ = D M x̂ for random coarse functions.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let map = sample::random_partition(7, 3, &mut rng);
        let m = positive_tensor(7, &mut rng);
        let (d_hat, _) = coarse_incidence(&map, &m).unwrap();
        let d = IncidenceOperator::new(7);
        for _ in 0..100 {
            let x_hat = DVector::from_fn(3, |_, _| rng.random::<f64>() - 0.5);
            let lhs = lift(&map, &d_hat.apply(&x_hat).unwrap()).unwrap();
            let rhs = d.apply(&map.lift(&x_hat)).unwrap();
            assert!((lhs.as_matrix() - rhs.as_matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn quotient_graph_of_dense_chain_is_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (k, _) = sample::reversible_chain(6, &mut rng);
        let map = sample::random_partition(6, 3, &mut rng);
        let g = QuotientGraph::new(&k, &map).unwrap();
        assert_eq!(g.edges.len(), 6); // 3 · 2 directed pairs, no self-loops
    }

    #[test]
    fn quotient_graph_of_counterexample_family() {
        let (gen, _) = sample::counterexample_generator(1.0);
        let k = gen.to_markov(1.0 / 16.0).unwrap();
        let g = QuotientGraph::new(&k, &example_map()).unwrap();
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn block_diagonal_chain_has_empty_quotient() {
        let k = MarkovMatrix::validate(
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.5, 0.5, 0.0, 0.0, //
                    0.5, 0.5, 0.0, 0.0, //
                    0.0, 0.0, 0.5, 0.5, //
                    0.0, 0.0, 0.5, 0.5,
                ],
            ),
            STRUCTURAL_TOL,
        )
        .unwrap();
        let map = ClusterMap::new(vec![0, 0, 1, 1], 2).unwrap();
        let g = QuotientGraph::new(&k, &map).unwrap();
        assert!(g.edges.is_empty());
    }

    #[test]
    fn symmetrized_view_folds_orientations() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (k, _) = sample::reversible_chain(6, &mut rng);
        let map = sample::random_partition(6, 3, &mut rng);
        let g = QuotientGraph::new(&k, &map).unwrap();
        assert_eq!(g.symmetrized().len(), 3);
    }
}
