//! Finite-state Markov matrices, generators, and invariant measures.
//!
//! Conventions used throughout the crate:
//!
//! * A Markov matrix `K` is row-stochastic: `K[(i, j)]` is the transition
//!   weight from state `i` to state `j`, so `K · 1 = 1`. `K` acts on
//!   functions; its transpose `K*` acts on probability vectors.
//! * A probability vector `p` evolves by `p ↦ K* p`.
//! * The invariant measure `π` satisfies `K* π = π` and is assumed unique
//!   and positive; [`MarkovMatrix::invariant_measure`] certifies both and
//!   errors out otherwise instead of silently averaging components.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance for structural validation (row sums, probability mass).
pub const STRUCTURAL_TOL: f64 = 1e-12;

/// Tolerance for spectral and null-space decisions.
pub const SPECTRAL_TOL: f64 = 1e-9;

/// Floor below which a measure entry counts as non-positive.
pub const POSITIVITY_FLOOR: f64 = 1e-14;

/// A probability vector: nonnegative entries of total mass one.
///
/// Elements of the dual space, i.e. statistical states and invariant
/// measures.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    entries: DVector<f64>,
}

impl ProbVector {
    /// Validates nonnegativity and unit mass within `tol`, then renormalizes
    /// the residual mass error away.
    pub fn new(entries: DVector<f64>, tol: f64) -> Result<Self> {
        for (i, &v) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: 0,
                    value: v,
                });
            }
        }
        let sum: f64 = entries.sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::MassViolation { sum, tol });
        }
        Ok(Self {
            entries: entries / sum,
        })
    }

    /// Like [`ProbVector::new`] but additionally requires every entry to
    /// clear the positivity floor.
    pub fn positive(entries: DVector<f64>, tol: f64, floor: f64) -> Result<Self> {
        let p = Self::new(entries, tol)?;
        p.require_positive(floor)?;
        Ok(p)
    }

    /// The uniform distribution on `n` states.
    pub fn uniform(n: usize) -> Self {
        Self {
            entries: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    pub(crate) fn from_normalized(entries: DVector<f64>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries[i]
    }

    /// Errors unless every entry exceeds `floor`.
    pub fn require_positive(&self, floor: f64) -> Result<()> {
        for (i, &v) in self.entries.iter().enumerate() {
            if v < floor {
                return Err(Error::NotPositive {
                    index: i,
                    value: v,
                    floor,
                });
            }
        }
        Ok(())
    }

    /// The relative density `ρ = p / π` of `self` with respect to `π`,
    /// the discrete Radon-Nikodym derivative.
    pub fn relative_density(&self, pi: &ProbVector) -> Result<DensityVector> {
        if self.len() != pi.len() {
            return Err(Error::DimensionMismatch {
                expected: pi.len(),
                got: self.len(),
            });
        }
        pi.require_positive(POSITIVITY_FLOOR)?;
        let entries = DVector::from_fn(self.len(), |i, _| self.entries[i] / pi.entries[i]);
        Ok(DensityVector { entries })
    }
}

/// A relative density `ρ = p / π` (dimensionless).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    entries: DVector<f64>,
}

impl DensityVector {
    pub fn new(entries: DVector<f64>) -> Self {
        Self { entries }
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Recovers the measure `Q_π ρ`, i.e. entrywise `ρ_i π_i`.
    pub fn to_measure(&self, pi: &ProbVector) -> DVector<f64> {
        DVector::from_fn(self.len(), |i, _| self.entries[i] * pi.get(i))
    }
}

/// A row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovMatrix {
    entries: DMatrix<f64>,
}

impl MarkovMatrix {
    /// Validates nonnegativity and row sums within `tol`; rows are
    /// renormalized only when already within `tol` of one, otherwise the
    /// matrix is rejected.
    pub fn validate(entries: DMatrix<f64>, tol: f64) -> Result<Self> {
        let (rows, cols) = entries.shape();
        for i in 0..rows {
            for j in 0..cols {
                let v = entries[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        let mut entries = entries;
        for i in 0..rows {
            let sum: f64 = entries.row(i).sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::RowSumViolation { row: i, sum, tol });
            }
            for j in 0..cols {
                entries[(i, j)] /= sum;
            }
        }
        Ok(Self { entries })
    }

    pub(crate) fn from_normalized(entries: DMatrix<f64>) -> Self {
        Self { entries }
    }

    /// Number of states (rows). Rectangular deterministic matrices report
    /// their row count.
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// One step of the dual chain: `p ↦ K* p`.
    pub fn step(&self, p: &ProbVector) -> Result<ProbVector> {
        if p.len() != self.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.nrows(),
                got: p.len(),
            });
        }
        let next = self.entries.transpose() * p.as_vector();
        Ok(ProbVector::from_normalized(next))
    }

    /// The invariant measure of `K*`, computed as the normalized null vector
    /// of `K* − I` via SVD.
    ///
    /// Uniqueness is certified by the singular-value gap: if the
    /// second-smallest singular value falls below `tol` the null space is
    /// numerically at least two-dimensional and the chain is rejected.
    pub fn invariant_measure(&self, tol: f64) -> Result<ProbVector> {
        self.invariant_measure_with(tol, POSITIVITY_FLOOR)
    }

    /// [`MarkovMatrix::invariant_measure`] with an explicit positivity floor.
    pub fn invariant_measure_with(&self, tol: f64, floor: f64) -> Result<ProbVector> {
        let n = self.nrows();
        let shifted = self.entries.transpose() - DMatrix::<f64>::identity(n, n);
        let svd = shifted.svd(false, true);
        // Singular values come back in descending order.
        let sigma = &svd.singular_values;
        if n > 1 {
            let second_smallest = sigma[n - 2];
            if second_smallest < tol {
                return Err(Error::NonUniqueInvariant {
                    sigma: second_smallest,
                    tol,
                });
            }
        }
        let v_t = svd.v_t.expect("requested V^T");
        let null = v_t.row(n - 1).transpose();
        let mass: f64 = null.sum();
        if mass.abs() < floor {
            return Err(Error::NonPositiveInvariant {
                index: 0,
                value: mass,
            });
        }
        let pi = null / mass;
        for (i, &v) in pi.iter().enumerate() {
            if v <= floor {
                return Err(Error::NonPositiveInvariant { index: i, value: v });
            }
        }
        let pi = ProbVector::from_normalized(pi);
        let residual = invariance_residual(self, &pi);
        if residual > tol {
            return Err(Error::InvariantMismatch { residual, tol });
        }
        Ok(pi)
    }

    /// Whether `K` is reversible with respect to `π`: `π_i K_ij = π_j K_ji`
    /// for all pairs within `tol` (equivalently `K* Q_π = Q_π K`).
    pub fn is_detailed_balance(&self, pi: &ProbVector, tol: f64) -> bool {
        detailed_balance_residual(self, pi) <= tol
    }

    /// The associated generator `A = K − I`.
    pub fn generator(&self) -> Generator {
        let n = self.nrows();
        let mut a = self.entries.clone();
        for i in 0..n {
            a[(i, i)] -= 1.0;
        }
        Generator { entries: a }
    }
}

/// Largest violation of `K* π = π`.
pub fn invariance_residual(k: &MarkovMatrix, pi: &ProbVector) -> f64 {
    let diff = k.entries.transpose() * pi.as_vector() - pi.as_vector();
    diff.amax()
}

/// Largest violation of the symmetry `π_i K_ij = π_j K_ji`.
pub fn detailed_balance_residual(k: &MarkovMatrix, pi: &ProbVector) -> f64 {
    let n = k.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (pi.get(i) * k.get(i, j) - pi.get(j) * k.get(j, i)).abs();
            worst = worst.max(d);
        }
    }
    worst
}

/// A Markov generator: nonnegative off-diagonal, zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    entries: DMatrix<f64>,
}

impl Generator {
    pub fn validate(entries: DMatrix<f64>, tol: f64) -> Result<Self> {
        let n = entries.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = entries[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if i != j && v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
            let sum: f64 = entries.row(i).sum();
            if sum.abs() > tol {
                return Err(Error::GeneratorRowSum { row: i, sum, tol });
            }
        }
        Ok(Self { entries })
    }

    pub(crate) fn from_normalized(entries: DMatrix<f64>) -> Self {
        Self { entries }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// The Markov matrix `I + τ A`, valid whenever `τ` keeps the diagonal
    /// nonnegative.
    pub fn to_markov(&self, tau: f64) -> Result<MarkovMatrix> {
        let n = self.n();
        let mut k = &self.entries * tau;
        for i in 0..n {
            k[(i, i)] += 1.0;
        }
        MarkovMatrix::validate(k, STRUCTURAL_TOL)
    }

    /// Stationary measure of `A*`, i.e. the normalized null vector of `A*`.
    pub fn invariant_measure(&self, tol: f64) -> Result<ProbVector> {
        // A = K − I for K = I + A, so the null spaces of A* and K* − I agree;
        // reuse the certified solver on I + τA with τ chosen for stability.
        let scale = self
            .entries
            .diagonal()
            .iter()
            .fold(0.0f64, |m, &d| m.max(d.abs()));
        let tau = if scale > 0.0 { 0.5 / scale } else { 1.0 };
        let k = self.to_markov(tau)?;
        k.invariant_measure(tol)
    }
}
