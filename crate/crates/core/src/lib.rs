//! Structure-preserving coarse-graining and reconstruction for finite-state
//! Markov matrices.
//!
//! Given a chain `K` with positive invariant measure `π` and a clustering
//! of its states, this crate builds the operator pair `(M, N)` — the
//! deterministic lift and its measure-weighted Moore-Penrose inverse — and
//! everything that follows from it: coarse-grained chains `K̂ = NKM` and
//! generators `Â = NAM`, edge-level (tensor-space) coarse-graining with
//! quotient-graph incidence operators, gradient-flow flux decompositions
//! with reconstruction from coarse data, and discrete functional
//! inequalities (Poincaré-type and log-Sobolev constants) together with
//! their monotonicity under reduction.
//!
//! The reduction preserves positivity and mass throughout: no orthogonal
//! projections, no homogeneous Euclidean structure — all weighting happens
//! in `L²(π)`.
//!
//! ```
//! use markov_cg::{ClusterMap, CoarseGrainPair, MarkovMatrix, STRUCTURAL_TOL, SPECTRAL_TOL};
//! use nalgebra::DMatrix;
//!
//! // A reversible three-state chain, reduced by merging states 1 and 2.
//! let k = MarkovMatrix::validate(
//!     DMatrix::from_row_slice(3, 3, &[
//!         0.5, 0.25, 0.25,
//!         0.0625, 0.875, 0.0625,
//!         0.0625, 0.0625, 0.875,
//!     ]),
//!     STRUCTURAL_TOL,
//! )?;
//! let pi = k.invariant_measure(SPECTRAL_TOL)?;
//! let map = ClusterMap::new(vec![0, 1, 1], 2)?;
//! let pair = CoarseGrainPair::new(map, pi)?;
//!
//! let k_hat = pair.coarse_markov(&k, SPECTRAL_TOL)?;
//! assert_eq!(k_hat.nrows(), 2);
//! // The coarse measure is invariant for the coarse chain, and the
//! // reduction preserved detailed balance.
//! assert!(k_hat.is_detailed_balance(pair.pi_hat(), 1e-12));
//! # Ok::<(), markov_cg::Error>(())
//! ```

#![forbid(unsafe_code)]

pub mod coarse;
pub mod error;
pub mod flux;
pub mod functionals;
pub mod io;
pub mod markov;
pub mod sample;
pub mod selftest;
pub mod spectral;
pub mod tensor;

pub use coarse::{weighted_inner, ClusterMap, CoarseGrainPair};
pub use error::{Error, Result};
pub use flux::{
    coarse_evolution_step, evolve, flux_of, gradient_flow_rhs, reconstruct_flux, ContinuityState,
    FluxReconstruction, Scheme,
};
pub use functionals::{
    coarse_dirichlet_pullback, dirichlet, dirichlet_generator, energy, entropy, expectation,
    ConvexProfile, DirichletPullback,
};
pub use markov::{
    DensityVector, Generator, MarkovMatrix, ProbVector, POSITIVITY_FLOOR, SPECTRAL_TOL,
    STRUCTURAL_TOL,
};
pub use spectral::{
    counterexample_crossover, counterexample_point, log_sobolev_constant, log_sobolev_report,
    poincare_constant, spectral_gap, spectral_report, ConstantEstimate, CounterexamplePoint,
    Method, SpectralOpts, SpectralReport,
};
pub use tensor::{
    coarse_incidence, edge_weight, lift, restrict, tensor_pairing, EdgeReconstruction, EdgeTensor,
    IncidenceOperator, QuotientGraph, TensorRole,
};
