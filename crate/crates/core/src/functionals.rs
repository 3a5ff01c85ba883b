//! Energy and entropy functionals and discrete Dirichlet forms.
//!
//! For a strictly convex nonnegative profile `Φ` the energy is the Jensen
//! gap `E_Φ(x) = E_π Φ(x) − Φ(E_π x)`: nonnegative, zero exactly on
//! constants, and invariant under affine shifts of `Φ`. The quadratic
//! profile gives half the variance, the Boltzmann profile
//! `r log r − r + 1` gives the relative entropy `Ent_π`.
//!
//! The Dirichlet form `D_K(x) = ½ Σ π_i K_ij (x_i − x_j)²` measures the
//! dissipation of the chain and pulls back exactly along the lift:
//! `D_K(M x̂) = D_K̂(x̂)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::coarse::CoarseGrainPair;
use crate::error::{Error, Result};
use crate::markov::{invariance_residual, Generator, MarkovMatrix, ProbVector};

/// A scalar profile `Φ` together with its domain restriction, certified
/// strictly convex on a sample grid at construction.
#[derive(Clone)]
pub struct ConvexProfile {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    domain_min: Option<f64>,
    quadratic: bool,
}

impl fmt::Debug for ConvexProfile {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt.debug_struct("ConvexProfile")
            .field("name", &self.name)
            .field("domain_min", &self.domain_min)
            .finish()
    }
}

impl ConvexProfile {
    /// `Φ(r) = ½ r²`: the quadratic energy (half the variance).
    pub fn quadratic() -> Self {
        Self {
            name: "quadratic".into(),
            f: Arc::new(|r| 0.5 * r * r),
            domain_min: None,
            quadratic: true,
        }
    }

    /// `Φ(r) = r log r − r + 1` on `r ≥ 0` with `0 log 0 = 0`: the
    /// Boltzmann free energy, whose Jensen gap is `Ent_π`.
    pub fn boltzmann() -> Self {
        Self {
            name: "boltzmann".into(),
            f: Arc::new(|r| if r == 0.0 { 1.0 } else { r * r.ln() - r + 1.0 }),
            domain_min: Some(0.0),
            quadratic: false,
        }
    }

    /// `g(r) = r²`: the default profile inside log-Sobolev denominators.
    pub fn square() -> Self {
        Self {
            name: "square".into(),
            f: Arc::new(|r| r * r),
            domain_min: None,
            quadratic: false,
        }
    }

    /// `g(r) = r⁴`.
    pub fn fourth_power() -> Self {
        Self {
            name: "fourth_power".into(),
            f: Arc::new(|r| r * r * r * r),
            domain_min: None,
            quadratic: false,
        }
    }

    /// A smooth convex stand-in for `|r|^{3/2}`:
    /// `(r² + δ²)^{3/4} − δ^{3/2}` with `δ = 10⁻³`; vanishes at zero and
    /// is positive elsewhere.
    pub fn smoothed_three_halves() -> Self {
        const DELTA: f64 = 1e-3;
        Self {
            name: "smoothed_three_halves".into(),
            f: Arc::new(|r| (r * r + DELTA * DELTA).powf(0.75) - DELTA.powf(1.5)),
            domain_min: None,
            quadratic: false,
        }
    }

    /// A user-supplied profile, accepted only if it passes a sampled
    /// strict-convexity check on its declared domain. The check is a
    /// guardrail on a finite grid, not a proof.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain_min: Option<f64>,
    ) -> Result<Self> {
        let profile = Self {
            name: name.into(),
            f: Arc::new(f),
            domain_min,
            quadratic: false,
        };
        profile.certify_convex()?;
        Ok(profile)
    }

    fn certify_convex(&self) -> Result<()> {
        let lo = self.domain_min.unwrap_or(-10.0);
        let hi = 10.0;
        let grid = 33;
        for a in 0..grid {
            let r = lo + (hi - lo) * a as f64 / (grid - 1) as f64;
            for b in (a + 1)..grid {
                let s = lo + (hi - lo) * b as f64 / (grid - 1) as f64;
                if (r - s).abs() < 1e-3 {
                    continue;
                }
                let mid = self.eval(0.5 * (r + s));
                let avg = 0.5 * (self.eval(r) + self.eval(s));
                if mid >= avg {
                    return Err(Error::NotConvex {
                        profile: self.name.clone(),
                        at: 0.5 * (r + s),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Whether this is the built-in `½ r²` profile, for which spectral
    /// constants are computed by eigen-solve instead of minimization.
    pub fn is_quadratic(&self) -> bool {
        self.quadratic
    }

    pub fn domain_min(&self) -> Option<f64> {
        self.domain_min
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    /// Errors if any entry of `x` violates the domain restriction.
    pub fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        if let Some(lo) = self.domain_min {
            for (i, &v) in x.iter().enumerate() {
                if v < lo {
                    return Err(Error::DomainViolation {
                        profile: self.name.clone(),
                        index: i,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    /// A profile by built-in name, for configuration surfaces.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "quadratic" => Some(Self::quadratic()),
            "boltzmann" => Some(Self::boltzmann()),
            "square" => Some(Self::square()),
            "fourth_power" => Some(Self::fourth_power()),
            "smoothed_three_halves" => Some(Self::smoothed_three_halves()),
            _ => None,
        }
    }
}

/// `E_π(x) = Σ_i π_i x_i`.
pub fn expectation(x: &DVector<f64>, pi: &ProbVector) -> Result<f64> {
    if x.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            got: x.len(),
        });
    }
    Ok(x.dot(pi.as_vector()))
}

/// The Jensen gap `E_Φ(x) = E_π Φ(x) − Φ(E_π x)`.
pub fn energy(x: &DVector<f64>, pi: &ProbVector, profile: &ConvexProfile) -> Result<f64> {
    profile.check_domain(x)?;
    let mean = expectation(x, pi)?;
    let lifted: f64 = (0..x.len()).map(|i| pi.get(i) * profile.eval(x[i])).sum();
    Ok(lifted - profile.eval(mean))
}

/// The Boltzmann entropy `Ent_π(x)`, i.e. the energy of the
/// `r log r − r + 1` profile. Requires `x ≥ 0`.
pub fn entropy(x: &DVector<f64>, pi: &ProbVector) -> Result<f64> {
    energy(x, pi, &ConvexProfile::boltzmann())
}

/// The Dirichlet form `D_K(x) = ½ Σ_ij π_i K_ij (x_i − x_j)²`.
///
/// Only the symmetric part of the edge weights contributes, so `π` is
/// merely required to be invariant, not reversible.
pub fn dirichlet(x: &DVector<f64>, k: &MarkovMatrix, pi: &ProbVector, tol: f64) -> Result<f64> {
    if x.len() != k.nrows() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            got: x.len(),
        });
    }
    let residual = invariance_residual(k, pi);
    if residual > tol {
        return Err(Error::InvariantMismatch { residual, tol });
    }
    let n = k.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = x[i] - x[j];
            acc += pi.get(i) * k.get(i, j) * d * d;
        }
    }
    Ok(0.5 * acc)
}

/// The Dirichlet form expressed through a generator:
/// `−⟨x · Ax, π⟩`, which agrees with [`dirichlet`] for `K = I + τA`
/// up to the factor `τ`.
pub fn dirichlet_generator(x: &DVector<f64>, a: &Generator, pi: &ProbVector) -> Result<f64> {
    if x.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: x.len(),
        });
    }
    let ax = a.as_matrix() * x;
    Ok(-(0..x.len()).map(|i| x[i] * ax[i] * pi.get(i)).sum::<f64>())
}

/// Both sides of the exact Dirichlet pullback `D_K(M x̂) = D_K̂(x̂)`.
#[derive(Debug, Clone, Copy)]
pub struct DirichletPullback {
    pub fine: f64,
    pub coarse: f64,
}

impl DirichletPullback {
    pub fn gap(&self) -> f64 {
        (self.fine - self.coarse).abs()
    }
}

/// Evaluates `D_K(M x̂)` and `D_K̂(x̂)` for the reduction in `pair`.
pub fn coarse_dirichlet_pullback(
    x_hat: &DVector<f64>,
    k: &MarkovMatrix,
    pair: &CoarseGrainPair,
    tol: f64,
) -> Result<DirichletPullback> {
    let k_hat = pair.coarse_markov(k, tol)?;
    let fine = dirichlet(&pair.map().lift(x_hat), k, pair.pi(), tol)?;
    let coarse = dirichlet(x_hat, &k_hat, pair.pi_hat(), tol)?;
    Ok(DirichletPullback { fine, coarse })
}
