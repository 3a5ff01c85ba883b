//! Gradient-flow form of reversible dynamics and flux reconstruction.
//!
//! For a reversible chain the evolution `ċ = A* c` factors through the
//! continuity equation
//!
//! ```text
//! ċ = −D* b,      b = ½ Q_m D ρ,      ρ = Q_π⁻¹ c,
//! ```
//!
//! with edge weights `m = Q_π K`. The same decomposition holds verbatim on
//! the coarse level, and for equilibrated concentrations `c = N* ĉ` the
//! fine flux is exactly the weighted spreading `Ñ* b̂` of the coarse flux.
//! Going the other way, a coarse flux is reconstructed as `b = b₁ + b₂`
//! where `b₁ = Ñ* b̂` and the correction `b₂` solves `D* b₂ = x*` for a
//! source term orthogonal to constants; we pick the minimum-norm solution
//! so the reconstruction is deterministic and linear in `b̂`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::coarse::CoarseGrainPair;
use crate::error::{Error, Result};
use crate::markov::{detailed_balance_residual, MarkovMatrix, ProbVector};
use crate::tensor::{edge_weight, EdgeReconstruction, EdgeTensor, IncidenceOperator};

/// Detailed-balance tolerance for the gradient-flow operations.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

/// Hard failure threshold for the Fredholm certificate and the
/// least-squares residual.
pub const SOLVER_TOL: f64 = 1e-8;

fn require_reversible(k: &MarkovMatrix, pi: &ProbVector, tol: f64) -> Result<()> {
    let residual = detailed_balance_residual(k, pi);
    if residual > tol {
        return Err(Error::NotReversible { residual, tol });
    }
    Ok(())
}

fn density_of(c: &DVector<f64>, pi: &ProbVector) -> DVector<f64> {
    DVector::from_fn(c.len(), |i, _| c[i] / pi.get(i))
}

/// `A* c` evaluated through the gradient-flow factorization
/// `−½ D* Q_m D Q_π⁻¹ c`; agrees with `(K* − I) c` for reversible chains.
pub fn gradient_flow_rhs(
    c: &DVector<f64>,
    k: &MarkovMatrix,
    pi: &ProbVector,
) -> Result<DVector<f64>> {
    if c.len() != k.nrows() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            got: c.len(),
        });
    }
    require_reversible(k, pi, REVERSIBILITY_TOL)?;
    let b = flux_of(c, k, pi)?;
    let d = IncidenceOperator::new(k.nrows());
    Ok(-d.adjoint(&b)?)
}

/// The constitutive flux `b = ½ Q_m D ρ`, i.e.
/// `b_ij = ½ m_ij (ρ_i − ρ_j)`; antisymmetric whenever `m` is symmetric.
pub fn flux_of(c: &DVector<f64>, k: &MarkovMatrix, pi: &ProbVector) -> Result<EdgeTensor> {
    if c.len() != k.nrows() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            got: c.len(),
        });
    }
    require_reversible(k, pi, REVERSIBILITY_TOL)?;
    let m = edge_weight(k, pi, REVERSIBILITY_TOL)?;
    let rho = density_of(c, pi);
    let n = k.nrows();
    let entries = DMatrix::from_fn(n, n, |i, j| 0.5 * m.get(i, j) * (rho[i] - rho[j]));
    EdgeTensor::dual(entries)
}

/// One evaluation of the coarse continuity equation: returns
/// `(ĉ̇, b̂)` with `b̂ = ½ Q_m̂ D̂ ρ̂` and `ĉ̇ = −D̂* b̂`.
pub fn coarse_evolution_step(
    c_hat: &DVector<f64>,
    k_hat: &MarkovMatrix,
    pi_hat: &ProbVector,
) -> Result<(DVector<f64>, EdgeTensor)> {
    let b_hat = flux_of(c_hat, k_hat, pi_hat)?;
    let d_hat = IncidenceOperator::new(k_hat.nrows());
    Ok((-d_hat.adjoint(&b_hat)?, b_hat))
}

/// A reconstructed fine flux together with its certificates.
#[derive(Debug, Clone)]
pub struct FluxReconstruction {
    /// The weighted spreading `Ñ* b̂` of the coarse flux.
    pub b1: EdgeTensor,
    /// Minimum-norm correction solving `D* b₂ = x*`.
    pub b2: EdgeTensor,
    /// `|⟨1, x*⟩|` — solvability certificate against `Ker(D)`.
    pub fredholm: f64,
    /// Residual of the least-squares solve, `‖D* b₂ − x*‖∞`.
    pub residual: f64,
    /// `‖D̂* M̃* b₂‖∞` — the correction carries no coarse divergence.
    pub kernel_residual: f64,
}

/// Dense matrix of `D*` with rows indexed by states and columns by ordered
/// edge pairs `(i, j) ↦ i·n + j`; diagonal pairs contribute nothing.
fn incidence_adjoint_matrix(n: usize) -> DMatrix<f64> {
    let mut d_star = DMatrix::zeros(n, n * n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let col = i * n + j;
            d_star[(i, col)] += 1.0;
            d_star[(j, col)] -= 1.0;
        }
    }
    d_star
}

/// Reconstructs a fine flux from a coarse flux `b̂`.
///
/// Solves `D* b₂ = (N* D̂* − D* Ñ*) b̂ =: x*` in the minimum-norm
/// least-squares sense after certifying `x* ⊥ Ker(D)`, and returns
/// `b = b₁ + b₂` componentwise; then `−D*(b₁ + b₂) = −N* D̂* b̂` closes
/// the continuity equation for `c = N* ĉ`.
pub fn reconstruct_flux(
    b_hat: &EdgeTensor,
    pair: &CoarseGrainPair,
    m: &EdgeTensor,
) -> Result<FluxReconstruction> {
    let n = pair.n();
    let nh = pair.n_clusters();
    if b_hat.n() != nh {
        return Err(Error::DimensionMismatch {
            expected: nh,
            got: b_hat.n(),
        });
    }
    if m.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.n(),
        });
    }
    let recon = EdgeReconstruction::new(pair.map().clone(), m.clone())?;
    let d = IncidenceOperator::new(n);
    let d_hat = IncidenceOperator::new(nh);

    let b1 = recon.apply_adjoint(b_hat)?;
    let coarse_divergence = d_hat.adjoint(b_hat)?;
    let x_star = pair.reconstruct_adjoint(&coarse_divergence) - d.adjoint(&b1)?;

    let fredholm = x_star.sum().abs();
    if fredholm > SOLVER_TOL {
        return Err(Error::FredholmViolation { value: fredholm });
    }

    let d_star = incidence_adjoint_matrix(n);
    let svd = d_star.clone().svd(true, true);
    let b2_flat = svd
        .solve(&x_star, 1e-12)
        .map_err(|_| Error::SolverFailure {
            residual: f64::INFINITY,
            tol: SOLVER_TOL,
        })?;
    let residual = (&d_star * &b2_flat - &x_star).amax();
    if residual > SOLVER_TOL {
        return Err(Error::SolverFailure {
            residual,
            tol: SOLVER_TOL,
        });
    }
    let b2 = EdgeTensor::dual(DMatrix::from_fn(n, n, |i, j| b2_flat[i * n + j]))?;

    let restricted = crate::tensor::restrict(pair.map(), &b2)?;
    let kernel_residual = d_hat.adjoint(&restricted)?.amax();

    Ok(FluxReconstruction {
        b1,
        b2,
        fredholm,
        residual,
        kernel_residual,
    })
}

/// Time-stepping scheme for [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Explicit Euler with a positivity-preserving step-size guard.
    Euler,
    /// Exact exponential through the symmetrized spectral decomposition;
    /// reversible chains only, intended for validation.
    Exponential,
}

/// One snapshot of the continuity-equation state.
#[derive(Debug, Clone)]
pub struct ContinuityState {
    pub t: f64,
    pub c: DVector<f64>,
    pub rho: DVector<f64>,
    pub b: EdgeTensor,
}

/// Trajectory record for line-oriented JSON export.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub c: Vec<f64>,
    pub b_norm: f64,
}

impl ContinuityState {
    pub fn record(&self) -> TrajectoryRecord {
        TrajectoryRecord {
            t: self.t,
            c: self.c.iter().copied().collect(),
            b_norm: self.b.as_matrix().amax(),
        }
    }
}

/// Integrates `ċ = A* c` from `c0` up to `t_end`, emitting the state at
/// every multiple of `dt` (including both endpoints).
pub fn evolve(
    c0: &ProbVector,
    k: &MarkovMatrix,
    pi: &ProbVector,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<Vec<ContinuityState>> {
    require_reversible(k, pi, REVERSIBILITY_TOL)?;
    let n = k.nrows();
    if c0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c0.len(),
        });
    }
    let a = k.generator();
    let max_rate = a
        .as_matrix()
        .diagonal()
        .iter()
        .fold(0.0f64, |acc, &d| acc.max(d.abs()));
    let bound = if max_rate > 0.0 {
        1.0 / max_rate
    } else {
        f64::INFINITY
    };
    if scheme == Scheme::Euler && dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }

    let steps = (t_end / dt).ceil() as usize;
    let mut states = Vec::with_capacity(steps + 1);
    let mut c = c0.as_vector().clone();
    let snapshot = |t: f64, c: &DVector<f64>| -> Result<ContinuityState> {
        Ok(ContinuityState {
            t,
            c: c.clone(),
            rho: density_of(c, pi),
            b: flux_of(c, k, pi)?,
        })
    };
    states.push(snapshot(0.0, &c)?);

    match scheme {
        Scheme::Euler => {
            let a_t = a.as_matrix().transpose();
            for step in 1..=steps {
                let mass_before = c.sum();
                c += &a_t * &c * dt;
                let drift = (c.sum() - mass_before).abs();
                debug_assert!(drift <= 1e-12, "mass drift {drift} in one step");
                states.push(snapshot(step as f64 * dt, &c)?);
            }
        }
        Scheme::Exponential => {
            // Reversibility makes S = Q_π^½ A Q_π^-½ symmetric, so the
            // propagator e^{tA*} = Q_π^½ e^{tS} Q_π^-½ diagonalizes exactly.
            let sqrt_pi = DVector::from_fn(n, |i, _| pi.get(i).sqrt());
            let s = DMatrix::from_fn(n, n, |i, j| sqrt_pi[i] * a.get(i, j) / sqrt_pi[j]);
            let eig = nalgebra::SymmetricEigen::new(s);
            let u = &eig.eigenvectors;
            let w0 = u.transpose() * DVector::from_fn(n, |i, _| c0.as_vector()[i] / sqrt_pi[i]);
            for step in 1..=steps {
                let t = step as f64 * dt;
                let decayed = DVector::from_fn(n, |i, _| (eig.eigenvalues[i] * t).exp() * w0[i]);
                let w = u * decayed;
                c = DVector::from_fn(n, |i, _| sqrt_pi[i] * w[i]);
                states.push(snapshot(t, &c)?);
            }
        }
    }
    Ok(states)
}
