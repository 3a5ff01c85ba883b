//! Deterministic generators for chains, measures, and partitions.
//!
//! Everything here is seeded explicitly so verification runs are
//! reproducible.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::coarse::ClusterMap;
use crate::markov::{Generator, MarkovMatrix, ProbVector, STRUCTURAL_TOL};

/// A strictly positive probability vector with entries bounded away from 0.
pub fn random_prob<R: Rng>(n: usize, rng: &mut R) -> ProbVector {
    let raw = DVector::from_fn(n, |_, _| 0.05 + rng.random::<f64>());
    let sum = raw.sum();
    ProbVector::new(raw / sum, STRUCTURAL_TOL).expect("normalized positive vector")
}

/// A dense row-stochastic matrix with strictly positive entries, hence
/// irreducible with a unique positive invariant measure.
pub fn random_chain<R: Rng>(n: usize, rng: &mut R) -> MarkovMatrix {
    let mut k = DMatrix::from_fn(n, n, |_, _| 0.05 + rng.random::<f64>());
    for i in 0..n {
        let sum: f64 = k.row(i).sum();
        for j in 0..n {
            k[(i, j)] /= sum;
        }
    }
    MarkovMatrix::validate(k, STRUCTURAL_TOL).expect("rows normalized")
}

/// A reversible chain built from symmetric positive edge weights.
///
/// With `w_ij = w_ji > 0`, the chain `K_ij = w_ij / Σ_j w_ij` satisfies
/// detailed balance with respect to `π_i = Σ_j w_ij / Σ_kl w_kl`, and both
/// come out exactly consistent, which makes this the workhorse generator
/// for verification suites.
pub fn reversible_chain<R: Rng>(n: usize, rng: &mut R) -> (MarkovMatrix, ProbVector) {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.05 + rng.random::<f64>();
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let total: f64 = w.sum();
    let mut k = DMatrix::zeros(n, n);
    let mut pi = DVector::zeros(n);
    for i in 0..n {
        let row_sum: f64 = w.row(i).sum();
        pi[i] = row_sum / total;
        for j in 0..n {
            k[(i, j)] = w[(i, j)] / row_sum;
        }
    }
    (
        MarkovMatrix::validate(k, STRUCTURAL_TOL).expect("rows normalized"),
        ProbVector::new(pi, STRUCTURAL_TOL).expect("normalized"),
    )
}

/// A surjective cluster assignment of `n` states onto `n_clusters` blocks.
pub fn random_partition<R: Rng>(n: usize, n_clusters: usize, rng: &mut R) -> ClusterMap {
    assert!(n_clusters >= 1 && n_clusters <= n);
    let mut assignment: Vec<usize> = (0..n)
        .map(|i| {
            if i < n_clusters {
                i
            } else {
                rng.random_range(0..n_clusters)
            }
        })
        .collect();
    // Shuffle so the forced representatives are not always the first states.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        assignment.swap(i, j);
    }
    ClusterMap::new(assignment, n_clusters).expect("surjective by construction")
}

/// An exactly lumpable chain for a given partition: every state of a block
/// sends the same total mass to each block, distributed uniformly inside
/// the target block.
pub fn lumpable_chain<R: Rng>(map: &ClusterMap, rng: &mut R) -> MarkovMatrix {
    let n = map.n();
    let nh = map.n_clusters();
    let mut block_mass = DMatrix::from_fn(nh, nh, |_, _| 0.05 + rng.random::<f64>());
    for k in 0..nh {
        let sum: f64 = block_mass.row(k).sum();
        for l in 0..nh {
            block_mass[(k, l)] /= sum;
        }
    }
    let mut k_mat = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let target = map.cluster_of(j);
            k_mat[(i, j)] =
                block_mass[(map.cluster_of(i), target)] / map.block(target).len() as f64;
        }
    }
    MarkovMatrix::validate(k_mat, STRUCTURAL_TOL).expect("block rows sum to one")
}

/// The three-state generator family of the Dirichlet-form counterexample,
/// together with its stationary measure `(a, 4a, 4) / (5a + 4)`.
///
/// The measure is positive only for `a > 0`; at `a = 0` the last state
/// absorbs all mass.
pub fn counterexample_generator(a: f64) -> (Generator, ProbVector) {
    let entries = DMatrix::from_row_slice(3, 3, &[-8.0, 4.0, 4.0, 1.0, -2.0, 1.0, a, a, -2.0 * a]);
    let gen = Generator::validate(entries, STRUCTURAL_TOL).expect("valid generator for a >= 0");
    let z = 5.0 * a + 4.0;
    let pi = ProbVector::new(
        DVector::from_row_slice(&[a / z, 4.0 * a / z, 4.0 / z]),
        STRUCTURAL_TOL,
    )
    .expect("normalized measure");
    (gen, pi)
}
