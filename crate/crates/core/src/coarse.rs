//! State-space coarse-graining: the lift `M`, the measure-weighted
//! reconstruction `N`, the projection `P = MN`, and coarse-grained chains
//! and generators.
//!
//! For a surjective cluster map `φ: {0..n-1} → {0..n̂-1}` the lift acts by
//! `(M x̂)_i = x̂_{φ(i)}`, a deterministic Markov matrix. Fixing a positive
//! measure `π`, the reconstruction
//!
//! ```text
//! N = Q_π̂⁻¹ M* Q_π,        π̂ = M* π,
//! ```
//!
//! is the adjoint of `M` in the `π`-weighted inner product and a
//! measure-weighted Moore-Penrose inverse of `M`: `NM = id`, `MNM = M`,
//! `NMN = N`. Products with `M`, `M*`, `N`, `N*` are implemented by
//! gather/scatter over the assignment vector in O(n); the dense matrices
//! are available for inspection and as test oracles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::markov::{
    invariance_residual, Generator, MarkovMatrix, ProbVector, POSITIVITY_FLOOR, STRUCTURAL_TOL,
};

/// A surjective assignment of `n` states onto `n̂` clusters.
///
/// Cluster indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMap {
    assignment: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl ClusterMap {
    pub fn new(assignment: Vec<usize>, n_clusters: usize) -> Result<Self> {
        let mut blocks = vec![Vec::new(); n_clusters];
        for (i, &c) in assignment.iter().enumerate() {
            if c >= n_clusters {
                return Err(Error::ClusterOutOfRange {
                    index: i,
                    value: c,
                    clusters: n_clusters,
                });
            }
            blocks[c].push(i);
        }
        for (c, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::NotSurjective { cluster: c });
            }
        }
        Ok(Self { assignment, blocks })
    }

    /// Infers the cluster count as `max(assignment) + 1`.
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self> {
        let n_clusters = assignment.iter().max().map_or(0, |m| m + 1);
        Self::new(assignment, n_clusters)
    }

    /// The identity partition on `n` states.
    pub fn identity(n: usize) -> Self {
        Self::new((0..n).collect(), n).expect("identity map is surjective")
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.blocks.len()
    }

    pub fn cluster_of(&self, state: usize) -> usize {
        self.assignment[state]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// States belonging to cluster `k`, in increasing order.
    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    /// The dense lift matrix `M` (n × n̂, one 1 per row).
    pub fn lift_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n(), self.n_clusters());
        for (i, &c) in self.assignment.iter().enumerate() {
            m[(i, c)] = 1.0;
        }
        m
    }

    /// `M` wrapped as a (deterministic, rectangular) Markov matrix.
    pub fn lift_markov(&self) -> MarkovMatrix {
        MarkovMatrix::from_normalized(self.lift_matrix())
    }

    /// `M x̂` by gathering: `(M x̂)_i = x̂_{φ(i)}`.
    pub fn lift(&self, x_hat: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| x_hat[self.assignment[i]])
    }

    /// `M* p` by scattering: block sums of `p`.
    pub fn aggregate(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_clusters());
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c] += p[i];
        }
        out
    }

    /// The coarse measure `π̂ = M* π`, positive whenever `π` is.
    pub fn coarse_measure(&self, pi: &ProbVector) -> Result<ProbVector> {
        if pi.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: pi.len(),
            });
        }
        ProbVector::new(self.aggregate(pi.as_vector()), STRUCTURAL_TOL)
    }
}

/// The `π`-weighted inner product `(x, y)_π = Σ_i x_i y_i π_i`.
pub fn weighted_inner(x: &DVector<f64>, y: &DVector<f64>, pi: &ProbVector) -> Result<f64> {
    if x.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            got: x.len(),
        });
    }
    if y.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            got: y.len(),
        });
    }
    Ok((0..x.len()).map(|i| x[i] * y[i] * pi.get(i)).sum())
}

/// A cluster map together with the measures and operators of its reduction:
/// `M`, `N = Q_π̂⁻¹ M* Q_π`, `P = MN`, `π`, and `π̂ = M* π`.
#[derive(Debug, Clone)]
pub struct CoarseGrainPair {
    map: ClusterMap,
    pi: ProbVector,
    pi_hat: ProbVector,
}

impl CoarseGrainPair {
    /// Requires `π` positive so that `Q_π̂` is invertible.
    pub fn new(map: ClusterMap, pi: ProbVector) -> Result<Self> {
        if pi.len() != map.n() {
            return Err(Error::DimensionMismatch {
                expected: map.n(),
                got: pi.len(),
            });
        }
        pi.require_positive(POSITIVITY_FLOOR)?;
        let pi_hat = map.coarse_measure(&pi)?;
        Ok(Self { map, pi, pi_hat })
    }

    pub fn map(&self) -> &ClusterMap {
        &self.map
    }

    pub fn pi(&self) -> &ProbVector {
        &self.pi
    }

    pub fn pi_hat(&self) -> &ProbVector {
        &self.pi_hat
    }

    pub fn n(&self) -> usize {
        self.map.n()
    }

    pub fn n_clusters(&self) -> usize {
        self.map.n_clusters()
    }

    /// `N x` in O(n): `(Nx)_k = Σ_{i ∈ φ⁻¹(k)} π_i x_i / π̂_k`.
    pub fn reconstruct(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_clusters());
        for (i, &c) in self.map.assignment.iter().enumerate() {
            out[c] += self.pi.get(i) * x[i];
        }
        for k in 0..self.n_clusters() {
            out[k] /= self.pi_hat.get(k);
        }
        out
    }

    /// `N* p̂` in O(n): `(N* p̂)_i = π_i p̂_{φ(i)} / π̂_{φ(i)}`.
    pub fn reconstruct_adjoint(&self, p_hat: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| {
            let c = self.map.assignment[i];
            self.pi.get(i) * p_hat[c] / self.pi_hat.get(c)
        })
    }

    /// The dense reconstruction matrix `N` (n̂ × n), a Markov matrix with
    /// `N_{k,i} = π_i / π̂_k` on block `k` and zero elsewhere.
    pub fn reconstruct_matrix(&self) -> DMatrix<f64> {
        let mut n_mat = DMatrix::zeros(self.n_clusters(), self.n());
        for (i, &c) in self.map.assignment.iter().enumerate() {
            n_mat[(c, i)] = self.pi.get(i) / self.pi_hat.get(c);
        }
        n_mat
    }

    pub fn reconstruct_markov(&self) -> MarkovMatrix {
        MarkovMatrix::from_normalized(self.reconstruct_matrix())
    }

    /// `P x = M N x`.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        self.map.lift(&self.reconstruct(x))
    }

    /// `P* p = N* M* p`.
    pub fn project_adjoint(&self, p: &DVector<f64>) -> DVector<f64> {
        self.reconstruct_adjoint(&self.map.aggregate(p))
    }

    /// The dense Markov projection `P = MN`, reversible with respect to `π`.
    pub fn projection_matrix(&self) -> DMatrix<f64> {
        self.map.lift_matrix() * self.reconstruct_matrix()
    }

    /// The coarse-grained chain `K̂ = NKM`.
    ///
    /// `π` must be invariant for `K` (checked against `tol`, not
    /// recomputed); the result is then a Markov matrix with invariant
    /// measure `π̂`, reversible whenever `K` is.
    pub fn coarse_markov(&self, k: &MarkovMatrix, tol: f64) -> Result<MarkovMatrix> {
        if k.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: k.nrows(),
            });
        }
        let residual = invariance_residual(k, &self.pi);
        if residual > tol {
            return Err(Error::InvariantMismatch { residual, tol });
        }
        Ok(MarkovMatrix::from_normalized(self.sandwich(k.as_matrix())))
    }

    /// The coarse-grained generator `Â = NAM`; rows sum to zero and
    /// off-diagonal entries stay nonnegative.
    pub fn coarse_generator(&self, a: &Generator, tol: f64) -> Result<Generator> {
        if a.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: a.n(),
            });
        }
        // A* π = 0 is the generator form of invariance.
        let residual = (a.as_matrix().transpose() * self.pi.as_vector()).amax();
        if residual > tol {
            return Err(Error::InvariantMismatch { residual, tol });
        }
        Ok(Generator::from_normalized(self.sandwich(a.as_matrix())))
    }

    /// `N B M` for a square matrix `B` on the fine space, computed
    /// blockwise without materializing `M` or `N`.
    fn sandwich(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let nh = self.n_clusters();
        let mut out = DMatrix::zeros(nh, nh);
        for (i, &ci) in self.map.assignment.iter().enumerate() {
            let w = self.pi.get(i) / self.pi_hat.get(ci);
            for (j, &cj) in self.map.assignment.iter().enumerate() {
                out[(ci, cj)] += w * b[(i, j)];
            }
        }
        out
    }

    /// One step of the projected chain `p ↦ P* K* P* p`.
    ///
    /// This is what a coarse step `K̂*` actually propagates when read back
    /// on the fine space: for `p = N* p̂` it returns `N* K̂* p̂`, and the
    /// gap to the true step `K* p` is the information lost by `P`.
    pub fn projected_step(&self, k: &MarkovMatrix, p: &DVector<f64>) -> Result<DVector<f64>> {
        if p.len() != self.n() || k.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: p.len().max(k.nrows()),
            });
        }
        let inner = k.as_matrix().transpose() * self.project_adjoint(p);
        Ok(self.project_adjoint(&inner))
    }

    /// Largest entry of `KM − MK̂`: zero exactly when the chain is lumpable
    /// under this partition. A diagnostic, not a spectral quantity.
    pub fn lumpability_defect(&self, k: &MarkovMatrix) -> Result<f64> {
        let k_hat = self.coarse_markov(k, crate::markov::SPECTRAL_TOL)?;
        let km = k.as_matrix() * self.map.lift_matrix();
        let mk = self.map.lift_matrix() * k_hat.as_matrix();
        Ok((km - mk).amax())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_map() -> ClusterMap {
        ClusterMap::new(vec![0, 1, 1], 2).unwrap()
    }

    fn prob(entries: &[f64]) -> ProbVector {
        ProbVector::new(DVector::from_row_slice(entries), STRUCTURAL_TOL).unwrap()
    }

    #[test]
    fn lift_matrix_of_three_to_two() {
        let m = example_map().lift_matrix();
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(m, expected);
    }

    #[test]
    fn lift_matrix_of_identity_map() {
        let m = ClusterMap::identity(4).lift_matrix();
        assert_eq!(m, DMatrix::identity(4, 4));
    }

    #[test]
    fn lift_matrix_of_single_cluster() {
        let map = ClusterMap::new(vec![0, 0, 0], 1).unwrap();
        assert_eq!(map.lift_matrix(), DMatrix::from_element(3, 1, 1.0));
    }

    #[test]
    fn missing_cluster_is_rejected() {
        let err = ClusterMap::new(vec![0, 0, 2], 3).unwrap_err();
        assert!(matches!(err, Error::NotSurjective { cluster: 1 }));
    }

    #[test]
    fn out_of_range_cluster_is_rejected() {
        let err = ClusterMap::new(vec![0, 5, 1], 2).unwrap_err();
        assert!(matches!(
            err,
            Error::ClusterOutOfRange {
                index: 1,
                value: 5,
                clusters: 2
            }
        ));
    }

    #[test]
    fn weighted_inner_checks_lengths() {
        let pi = prob(&[0.5, 0.5]);
        let x = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        let y = DVector::from_row_slice(&[1.0, 2.0]);
        assert!(matches!(
            weighted_inner(&x, &y, &pi),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pair_requires_positive_measure() {
        let pi = prob(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            CoarseGrainPair::new(example_map(), pi),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn lift_preserves_pointwise_products() {
        let map = example_map();
        let x = DVector::from_row_slice(&[2.0, -1.0]);
        let y = DVector::from_row_slice(&[0.5, 3.0]);
        let lhs = map.lift(&x.component_mul(&y));
        let rhs = map.lift(&x).component_mul(&map.lift(&y));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn coarse_measure_merges_blocks() {
        let pi_hat = example_map()
            .coarse_measure(&prob(&[0.2, 0.3, 0.5]))
            .unwrap();
        assert!((pi_hat.get(0) - 0.2).abs() < 1e-15);
        assert!((pi_hat.get(1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn coarse_measure_under_identity_map() {
        let pi = prob(&[0.2, 0.3, 0.5]);
        let pi_hat = ClusterMap::identity(3).coarse_measure(&pi).unwrap();
        assert_eq!(pi_hat, pi);
    }

    #[test]
    fn reconstruction_closed_form() {
        let pair = CoarseGrainPair::new(example_map(), prob(&[0.2, 0.3, 0.5])).unwrap();
        let n = pair.reconstruct_matrix();
        let expected = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.375, 0.625]);
        assert!((n - expected).amax() < 1e-15);
    }

    #[test]
    fn reconstruction_under_identity_map() {
        let pair = CoarseGrainPair::new(ClusterMap::identity(3), prob(&[0.2, 0.3, 0.5])).unwrap();
        assert!((pair.reconstruct_matrix() - DMatrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn reconstruction_is_markov_and_inverts_measure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pi = sample::random_prob(6, &mut rng);
        let map = sample::random_partition(6, 3, &mut rng);
        let pair = CoarseGrainPair::new(map, pi.clone()).unwrap();
        let n_mat = pair.reconstruct_matrix();
        for k in 0..3 {
            assert!((n_mat.row(k).sum() - 1.0).abs() < 1e-12);
        }
        // N* π̂ = π.
        let back = pair.reconstruct_adjoint(pair.pi_hat().as_vector());
        assert!((back - pi.as_vector()).amax() < 1e-14);
    }

    #[test]
    fn projection_matches_example_and_is_idempotent() {
        let pi = prob(&[0.2, 0.3, 0.5]);
        let pair = CoarseGrainPair::new(example_map(), pi).unwrap();
        let p = pair.projection_matrix();
        let s = 0.8;
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0,
                0.0,
                0.0, //
                0.0,
                0.3 / s,
                0.5 / s, //
                0.0,
                0.3 / s,
                0.5 / s,
            ],
        );
        assert!((&p - expected).amax() < 1e-15);
        assert!((&p * &p - &p).amax() < 1e-15);
    }

    #[test]
    fn projection_of_identity_map_is_identity() {
        let pair = CoarseGrainPair::new(ClusterMap::identity(3), prob(&[0.2, 0.3, 0.5])).unwrap();
        assert!((pair.projection_matrix() - DMatrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn projection_idempotent_for_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let pi = sample::random_prob(7, &mut rng);
            let map = sample::random_partition(7, 3, &mut rng);
            let pair = CoarseGrainPair::new(map, pi).unwrap();
            let p = pair.projection_matrix();
            assert!((&p * &p - &p).amax() < 1e-12);
        }
    }

    #[test]
    fn weighted_inner_of_ones_is_mass() {
        let pi = prob(&[0.1, 0.4, 0.5]);
        let one = DVector::from_element(3, 1.0);
        assert!((weighted_inner(&one, &one, &pi).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_inner_direct_sum() {
        let pi = prob(&[0.5, 0.5]);
        let x = DVector::from_row_slice(&[2.0, 0.0]);
        let y = DVector::from_row_slice(&[3.0, 5.0]);
        assert!((weighted_inner(&x, &y, &pi).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn lift_and_reconstruct_are_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let pi = sample::random_prob(8, &mut rng);
            let map = sample::random_partition(8, 3, &mut rng);
            let pair = CoarseGrainPair::new(map.clone(), pi.clone()).unwrap();
            let x_hat = DVector::from_fn(3, |_, _| rng.random::<f64>() - 0.5);
            let y = DVector::from_fn(8, |_, _| rng.random::<f64>() - 0.5);
            let lhs = weighted_inner(&map.lift(&x_hat), &y, &pi).unwrap();
            let rhs = weighted_inner(&x_hat, &pair.reconstruct(&y), pair.pi_hat()).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_chain_of_identity_is_identity() {
        let pi = prob(&[0.2, 0.3, 0.5]);
        let pair = CoarseGrainPair::new(example_map(), pi).unwrap();
        let k = MarkovMatrix::validate(DMatrix::identity(3, 3), STRUCTURAL_TOL).unwrap();
        let k_hat = pair.coarse_markov(&k, 1e-9).unwrap();
        assert!((k_hat.as_matrix() - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn coarse_chain_of_counterexample_at_one() {
        let (gen, pi) = sample::counterexample_generator(1.0);
        let k = gen.to_markov(1.0 / 16.0).unwrap();
        let pair = CoarseGrainPair::new(example_map(), pi).unwrap();
        let k_hat = pair.coarse_markov(&k, 1e-9).unwrap();
        for i in 0..2 {
            assert!((k_hat.as_matrix().row(i).sum() - 1.0).abs() < 1e-12);
        }
        let forward = k_hat.as_matrix().transpose() * pair.pi_hat().as_vector();
        assert!((forward - pair.pi_hat().as_vector()).amax() < 1e-13);
    }

    #[test]
    fn single_cluster_reduces_to_trivial_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (k, pi) = sample::reversible_chain(4, &mut rng);
        let map = ClusterMap::new(vec![0; 4], 1).unwrap();
        let pair = CoarseGrainPair::new(map, pi).unwrap();
        let k_hat = pair.coarse_markov(&k, 1e-9).unwrap();
        assert!((k_hat.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_markov_rejects_wrong_measure() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (k, _) = sample::reversible_chain(4, &mut rng);
        let wrong = sample::random_prob(4, &mut rng);
        let map = sample::random_partition(4, 2, &mut rng);
        let pair = CoarseGrainPair::new(map, wrong).unwrap();
        assert!(matches!(
            pair.coarse_markov(&k, 1e-9),
            Err(Error::InvariantMismatch { .. })
        ));
    }

    #[test]
    fn coarse_generator_of_zero_is_zero() {
        let pi = prob(&[0.2, 0.3, 0.5]);
        let pair = CoarseGrainPair::new(example_map(), pi).unwrap();
        let a = Generator::validate(DMatrix::zeros(3, 3), STRUCTURAL_TOL).unwrap();
        let a_hat = pair.coarse_generator(&a, 1e-9).unwrap();
        assert_eq!(a_hat.as_matrix().amax(), 0.0);
    }

    #[test]
    fn coarse_generator_annihilates_coarse_measure() {
        let (gen, pi) = sample::counterexample_generator(1.0);
        let pair = CoarseGrainPair::new(example_map(), pi).unwrap();
        let a_hat = pair.coarse_generator(&gen, 1e-9).unwrap();
        for i in 0..2 {
            assert!(a_hat.as_matrix().row(i).sum().abs() < 1e-12);
        }
        let hit = a_hat.as_matrix().transpose() * pair.pi_hat().as_vector();
        assert!(hit.amax() < 1e-13);
    }

    #[test]
    fn coarse_generator_commutes_with_markov_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (k, pi) = sample::reversible_chain(6, &mut rng);
        let map = sample::random_partition(6, 3, &mut rng);
        let pair = CoarseGrainPair::new(map, pi).unwrap();
        let lhs = pair.coarse_generator(&k.generator(), 1e-9).unwrap();
        let rhs = pair.coarse_markov(&k, 1e-9).unwrap().generator();
        assert!((lhs.as_matrix() - rhs.as_matrix()).amax() < 1e-12);
    }

    #[test]
    fn lumpability_defect_vanishes_for_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let (k, pi) = sample::reversible_chain(5, &mut rng);
        let pair = CoarseGrainPair::new(ClusterMap::identity(5), pi).unwrap();
        assert!(pair.lumpability_defect(&k).unwrap() < 1e-14);
    }

    #[test]
    fn lumpability_defect_vanishes_for_lumpable_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let map = sample::random_partition(6, 2, &mut rng);
        let k = sample::lumpable_chain(&map, &mut rng);
        let pi = k.invariant_measure(1e-9).unwrap();
        let pair = CoarseGrainPair::new(map, pi).unwrap();
        assert!(pair.lumpability_defect(&k).unwrap() < 1e-12);
    }

    #[test]
    fn lumpability_defect_positive_for_generic_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let k = sample::random_chain(6, &mut rng);
        let pi = k.invariant_measure(1e-9).unwrap();
        let map = sample::random_partition(6, 2, &mut rng);
        let pair = CoarseGrainPair::new(map, pi).unwrap();
        assert!(pair.lumpability_defect(&k).unwrap() > 1e-6);
    }

    #[test]
    fn one_step_reduction_matches_on_reconstructed_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let map = sample::random_partition(6, 3, &mut rng);
        let k = sample::lumpable_chain(&map, &mut rng);
        let pi = k.invariant_measure(1e-9).unwrap();
        let pair = CoarseGrainPair::new(map.clone(), pi).unwrap();
        let k_hat = pair.coarse_markov(&k, 1e-9).unwrap();

        let p_hat = sample::random_prob(3, &mut rng);
        let p0 = pair.reconstruct_adjoint(p_hat.as_vector());
        // M* K* p0 = K̂* M* p0 for p0 in the range of N*.
        let lhs = map.aggregate(&(k.as_matrix().transpose() * &p0));
        let rhs = k_hat.as_matrix().transpose() * map.aggregate(&p0);
        assert!((lhs - rhs).amax() < 1e-13);
    }

    #[test]
    fn projected_chain_propagates_coarse_steps() {
        // For p = N* p̂ the projected step equals N* K̂* p̂, on any chain.
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let k = sample::random_chain(6, &mut rng);
        let pi = k.invariant_measure(1e-9).unwrap();
        let map = sample::random_partition(6, 3, &mut rng);
        let pair = CoarseGrainPair::new(map, pi).unwrap();
        let k_hat = pair.coarse_markov(&k, 1e-9).unwrap();
        let p_hat = sample::random_prob(3, &mut rng);

        let p = pair.reconstruct_adjoint(p_hat.as_vector());
        let projected = pair.projected_step(&k, &p).unwrap();
        let coarse_step =
            pair.reconstruct_adjoint(&(k_hat.as_matrix().transpose() * p_hat.as_vector()));
        assert!((projected - coarse_step).amax() < 1e-13);
    }

    #[test]
    fn equilibrated_densities_are_lifted_coarse_densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let pi = sample::random_prob(6, &mut rng);
        let map = sample::random_partition(6, 3, &mut rng);
        let pair = CoarseGrainPair::new(map.clone(), pi.clone()).unwrap();
        let p_hat = sample::random_prob(3, &mut rng);
        let p =
            ProbVector::new(pair.reconstruct_adjoint(p_hat.as_vector()), STRUCTURAL_TOL).unwrap();
        let rho = p.relative_density(&pi).unwrap();
        let rho_hat = p_hat.relative_density(pair.pi_hat()).unwrap();
        let lifted = map.lift(rho_hat.as_vector());
        assert!((rho.as_vector() - lifted).amax() < 1e-12);
    }
}
