//! Poincaré-type and log-Sobolev constants, and their behavior under
//! coarse-graining.
//!
//! The quadratic constant is the spectral gap in `L²(π)`: the
//! second-smallest eigenvalue of the generalized problem
//! `−(Q_π A)_sym v = λ Q_π v`, equal to `inf D_K(x) / Var_π(x)`. For other
//! profiles no eigenproblem is available and the constant is estimated by
//! seeded multi-start projected descent; the result is a certified upper
//! bound (the certificate vector realizes the reported ratio).
//!
//! Both constants are monotone non-decreasing under coarse-graining. When
//! a report covers a fine chain and a reduction, the fine minimization is
//! additionally warm-started from the lifted coarse minimizer, which makes
//! the reported values honor the monotone ordering whenever the
//! minimization itself does not escape that starting basin downward.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coarse::{ClusterMap, CoarseGrainPair};
use crate::error::{Error, Result};
use crate::functionals::{energy, entropy, ConvexProfile};
use crate::markov::{
    detailed_balance_residual, invariance_residual, MarkovMatrix, ProbVector, SPECTRAL_TOL,
};
use crate::sample::counterexample_generator;

/// Options for the variational estimators.
#[derive(Debug, Clone)]
pub struct SpectralOpts {
    /// Number of random starts for the projected descent.
    pub starts: usize,
    /// Iteration cap per start.
    pub max_iter: usize,
    /// Seed for the start sampler.
    pub seed: u64,
    /// Relative-change stopping threshold.
    pub rel_tol: f64,
    /// Central-difference step for numerical gradients.
    pub grad_step: f64,
}

impl Default for SpectralOpts {
    fn default() -> Self {
        Self {
            starts: 20,
            max_iter: 2000,
            seed: 42,
            rel_tol: 1e-10,
            grad_step: 1e-6,
        }
    }
}

/// How a constant was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Eigen,
    Minimize,
}

/// A variational constant with its certificate.
#[derive(Debug, Clone)]
pub struct ConstantEstimate {
    pub value: f64,
    /// Vector realizing `value` as a ratio (empty when the constant is
    /// trivial, e.g. single-state spaces).
    pub certificate: DVector<f64>,
    pub method: Method,
    pub iterations: usize,
}

/// Fine/coarse spectral summary.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub profile: String,
    pub method: Method,
    pub lambda: f64,
    pub lambda_hat: Option<f64>,
    /// `λ ≤ λ̂ + 1e-9` when a reduction is present.
    pub monotone: Option<bool>,
    pub minimizer: Vec<f64>,
    pub coarse_minimizer: Option<Vec<f64>>,
    pub iterations: usize,
}

const MONOTONE_TOL: f64 = 1e-9;
const ENERGY_FLOOR: f64 = 1e-12;

fn require_reversible_invariant(k: &MarkovMatrix, pi: &ProbVector) -> Result<()> {
    let inv = invariance_residual(k, pi);
    if inv > SPECTRAL_TOL {
        return Err(Error::InvariantMismatch {
            residual: inv,
            tol: SPECTRAL_TOL,
        });
    }
    let db = detailed_balance_residual(k, pi);
    if db > 1e-10 {
        return Err(Error::NotReversible {
            residual: db,
            tol: 1e-10,
        });
    }
    Ok(())
}

/// The spectral gap of `K` in `L²(π)`: the second-smallest eigenvalue of
/// `−(Q_π A)_sym v = λ Q_π v`, equal to `inf D_K(x)/Var_π(x)`.
///
/// Errors with [`Error::Reducible`] when the gap closes; a single-state
/// space reports an infinite gap with an empty certificate.
pub fn spectral_gap(k: &MarkovMatrix, pi: &ProbVector) -> Result<ConstantEstimate> {
    let inv = invariance_residual(k, pi);
    if inv > SPECTRAL_TOL {
        return Err(Error::InvariantMismatch {
            residual: inv,
            tol: SPECTRAL_TOL,
        });
    }
    let n = k.nrows();
    if n == 1 {
        return Ok(ConstantEstimate {
            value: f64::INFINITY,
            certificate: DVector::zeros(0),
            method: Method::Eigen,
            iterations: 0,
        });
    }
    let a = k.generator();
    // B = −sym(Q_π A); reversibility is not required because the Dirichlet
    // form only sees the symmetric part.
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (pi.get(i) * a.get(i, j) + pi.get(j) * a.get(j, i));
        }
    }
    let sqrt_pi = DVector::from_fn(n, |i, _| pi.get(i).sqrt());
    let s = DMatrix::from_fn(n, n, |i, j| b[(i, j)] / (sqrt_pi[i] * sqrt_pi[j]));
    let eig = nalgebra::SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let gap = eig.eigenvalues[order[1]];
    if gap < SPECTRAL_TOL {
        return Err(Error::Reducible {
            gap,
            tol: SPECTRAL_TOL,
        });
    }
    let u = eig.eigenvectors.column(order[1]);
    let certificate = DVector::from_fn(n, |i, _| u[i] / sqrt_pi[i]);
    Ok(ConstantEstimate {
        value: gap,
        certificate,
        method: Method::Eigen,
        iterations: 0,
    })
}

/// How iterates are renormalized between descent steps.
enum Normalization {
    /// Fix `E_π(x)` and the π-norm of the fluctuation around it.
    MeanAndScale { mean: f64, scale: f64 },
    /// Fix the π-norm; used when the ratio is scale-invariant.
    Sphere,
}

type Numerator<'p> = Box<dyn Fn(&DVector<f64>) -> f64 + 'p>;
type Denominator<'p> = Box<dyn Fn(&DVector<f64>) -> Option<f64> + 'p>;

struct RatioProblem<'p> {
    pi: &'p ProbVector,
    numerator: Numerator<'p>,
    denominator: Denominator<'p>,
    domain_min: Option<f64>,
    normalization: Normalization,
}

impl RatioProblem<'_> {
    fn ratio(&self, x: &DVector<f64>) -> f64 {
        match (self.denominator)(x) {
            Some(den) if den > ENERGY_FLOOR * x.norm_squared().max(1.0) => {
                (self.numerator)(x) / den
            }
            _ => f64::INFINITY,
        }
    }

    fn pi_norm(&self, x: &DVector<f64>) -> f64 {
        (0..x.len())
            .map(|i| x[i] * x[i] * self.pi.get(i))
            .sum::<f64>()
            .sqrt()
    }

    fn mean(&self, x: &DVector<f64>) -> f64 {
        (0..x.len()).map(|i| x[i] * self.pi.get(i)).sum()
    }

    fn project(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let projected = match self.normalization {
            Normalization::Sphere => {
                let norm = self.pi_norm(x);
                if norm < 1e-300 {
                    return None;
                }
                x / norm
            }
            Normalization::MeanAndScale { mean, scale } => {
                let current_mean = self.mean(x);
                let centered = x.add_scalar(mean - current_mean);
                let fluctuation = centered.add_scalar(-mean);
                let norm = self.pi_norm(&fluctuation);
                if norm < 1e-300 {
                    return None;
                }
                let rescaled = fluctuation * (scale / norm);
                rescaled.add_scalar(mean)
            }
        };
        if let Some(lo) = self.domain_min {
            if projected.iter().any(|&v| v < lo) {
                // Pull back toward the feasible constant vector at the mean.
                let anchor = match self.normalization {
                    Normalization::MeanAndScale { mean, .. } => mean,
                    Normalization::Sphere => self.mean(&projected),
                };
                if anchor <= lo {
                    return None;
                }
                let mut theta = 1.0f64;
                for &v in projected.iter() {
                    if v < lo {
                        theta = theta.min((anchor - lo) / (anchor - v));
                    }
                }
                let pulled = DVector::from_fn(projected.len(), |i, _| {
                    anchor + 0.95 * theta * (projected[i] - anchor)
                });
                return Some(pulled);
            }
        }
        Some(projected)
    }
}

fn minimize_ratio(
    problem: &RatioProblem<'_>,
    n: usize,
    opts: &SpectralOpts,
    warm_starts: &[DVector<f64>],
) -> Result<(f64, DVector<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut total_iterations = 0;

    let lo = problem.domain_min;
    let n_random = opts.starts.max(1);
    let mut starts: Vec<DVector<f64>> = warm_starts.to_vec();
    for _ in 0..n_random {
        let x = DVector::from_fn(n, |_, _| match lo {
            // Keep starts safely inside one-sided domains.
            Some(_) => 0.1 + 2.0 * rng.random::<f64>(),
            None => 2.0 * rng.random::<f64>() - 1.0,
        });
        starts.push(x);
    }

    for start in starts {
        let Some(mut x) = problem.project(&start) else {
            continue;
        };
        let mut value = problem.ratio(&x);
        if !value.is_finite() {
            continue;
        }
        for _ in 0..opts.max_iter {
            total_iterations += 1;
            let h = opts.grad_step;
            let mut grad = DVector::zeros(n);
            for i in 0..n {
                let mut plus = x.clone();
                plus[i] += h;
                let mut minus = x.clone();
                minus[i] -= h;
                grad[i] = (problem.ratio(&plus) - problem.ratio(&minus)) / (2.0 * h);
            }
            let gnorm = grad.norm();
            if gnorm < 1e-14 {
                break;
            }
            let mut step = 1.0 / gnorm.max(1.0);
            let mut improved = false;
            for _ in 0..40 {
                let candidate = &x - &grad * step;
                if let Some(projected) = problem.project(&candidate) {
                    let candidate_value = problem.ratio(&projected);
                    if candidate_value.is_finite() && candidate_value < value {
                        let rel = (value - candidate_value) / value.abs().max(1e-300);
                        x = projected;
                        value = candidate_value;
                        improved = true;
                        if rel < opts.rel_tol {
                            improved = false; // converged
                        }
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        match &best {
            Some((best_value, _)) if *best_value <= value => {}
            _ => best = Some((value, x)),
        }
    }

    match best {
        Some((value, x)) if value.is_finite() => Ok((value, x, total_iterations)),
        _ => Err(Error::MinimizerDiverged {
            reason: "no start produced a finite ratio".into(),
        }),
    }
}

fn dirichlet_closure<'p>(
    k: &MarkovMatrix,
    pi: &'p ProbVector,
) -> impl Fn(&DVector<f64>) -> f64 + 'p {
    let n = k.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| pi.get(i) * k.get(i, j));
    move |x: &DVector<f64>| {
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = x[i] - x[j];
                acc += (m[(i, j)] + m[(j, i)]) * d * d;
            }
        }
        0.5 * acc
    }
}

/// The Poincaré-type constant `λ(K, Φ)`.
///
/// For the built-in quadratic profile this is the spectral gap computed by
/// eigen-solve (the `inf D/Var` normalization). For any other profile the
/// infimum of `D_K(x)/E_Φ(x)` is estimated by seeded multi-start descent
/// over the slice of fixed `E_π(x)` and fluctuation scale, and the value
/// is an upper bound certified by the returned minimizer.
pub fn poincare_constant(
    k: &MarkovMatrix,
    pi: &ProbVector,
    profile: &ConvexProfile,
    opts: &SpectralOpts,
) -> Result<ConstantEstimate> {
    poincare_constant_seeded(k, pi, profile, opts, &[])
}

fn poincare_constant_seeded(
    k: &MarkovMatrix,
    pi: &ProbVector,
    profile: &ConvexProfile,
    opts: &SpectralOpts,
    warm_starts: &[DVector<f64>],
) -> Result<ConstantEstimate> {
    require_reversible_invariant(k, pi)?;
    if k.nrows() == 1 {
        return Ok(ConstantEstimate {
            value: f64::INFINITY,
            certificate: DVector::zeros(0),
            method: Method::Eigen,
            iterations: 0,
        });
    }
    // Certifies irreducibility for every profile.
    let gap = spectral_gap(k, pi)?;
    if profile.is_quadratic() {
        return Ok(gap);
    }

    let n = k.nrows();
    let dirichlet = dirichlet_closure(k, pi);
    let (mean, scale) = match profile.domain_min() {
        Some(_) => (1.1, 0.5),
        None => (0.0, 1.0),
    };
    let problem = RatioProblem {
        pi,
        numerator: Box::new(dirichlet),
        denominator: Box::new(move |x| energy(x, pi, profile).ok()),
        domain_min: profile.domain_min(),
        normalization: Normalization::MeanAndScale { mean, scale },
    };
    let (value, certificate, iterations) = minimize_ratio(&problem, n, opts, warm_starts)?;
    Ok(ConstantEstimate {
        value,
        certificate,
        method: Method::Minimize,
        iterations,
    })
}

/// The log-Sobolev constant `λ_{g,LS} = inf D_K(x) / Ent_π(g(x))`.
///
/// `g` must be convex, nonnegative, vanish only at zero; the default
/// choice is `g(r) = r²`. The ratio is scale-invariant for homogeneous
/// `g`, so iterates live on the π-unit sphere.
pub fn log_sobolev_constant(
    k: &MarkovMatrix,
    pi: &ProbVector,
    g: &ConvexProfile,
    opts: &SpectralOpts,
) -> Result<ConstantEstimate> {
    log_sobolev_constant_seeded(k, pi, g, opts, &[])
}

fn log_sobolev_constant_seeded(
    k: &MarkovMatrix,
    pi: &ProbVector,
    g: &ConvexProfile,
    opts: &SpectralOpts,
    warm_starts: &[DVector<f64>],
) -> Result<ConstantEstimate> {
    require_reversible_invariant(k, pi)?;
    if g.eval(0.0).abs() > 1e-12 || g.eval(1.0) <= 0.0 || g.eval(-1.0) <= 0.0 {
        return Err(Error::MinimizerDiverged {
            reason: format!(
                "profile `{}` must vanish at zero and be positive elsewhere",
                g.name()
            ),
        });
    }
    if k.nrows() == 1 {
        return Ok(ConstantEstimate {
            value: f64::INFINITY,
            certificate: DVector::zeros(0),
            method: Method::Minimize,
            iterations: 0,
        });
    }
    spectral_gap(k, pi)?; // irreducibility gate

    let n = k.nrows();
    let dirichlet = dirichlet_closure(k, pi);
    let problem = RatioProblem {
        pi,
        numerator: Box::new(dirichlet),
        denominator: Box::new(move |x| {
            let gx = DVector::from_fn(x.len(), |i, _| g.eval(x[i]));
            entropy(&gx, pi).ok()
        }),
        domain_min: None,
        normalization: Normalization::Sphere,
    };
    let (value, certificate, iterations) = minimize_ratio(&problem, n, opts, warm_starts)?;
    Ok(ConstantEstimate {
        value,
        certificate,
        method: Method::Minimize,
        iterations,
    })
}

/// Computes fine and coarse Poincaré constants for a reduction and checks
/// the monotone ordering `λ ≤ λ̂`.
///
/// The coarse constant is computed first and its lifted minimizer seeds
/// the fine run.
pub fn spectral_report(
    k: &MarkovMatrix,
    pi: &ProbVector,
    map: Option<&ClusterMap>,
    profile: &ConvexProfile,
    opts: &SpectralOpts,
) -> Result<SpectralReport> {
    let (coarse, lifted) = match map {
        Some(map) => {
            let pair = CoarseGrainPair::new(map.clone(), pi.clone())?;
            let k_hat = pair.coarse_markov(k, SPECTRAL_TOL)?;
            let est = poincare_constant(&k_hat, pair.pi_hat(), profile, opts)?;
            let lifted = if est.certificate.len() == map.n_clusters() {
                vec![map.lift(&est.certificate)]
            } else {
                Vec::new()
            };
            (Some(est), lifted)
        }
        None => (None, Vec::new()),
    };
    let fine = poincare_constant_seeded(k, pi, profile, opts, &lifted)?;
    Ok(assemble_report(profile.name(), fine, coarse))
}

/// Log-Sobolev analogue of [`spectral_report`].
pub fn log_sobolev_report(
    k: &MarkovMatrix,
    pi: &ProbVector,
    map: Option<&ClusterMap>,
    g: &ConvexProfile,
    opts: &SpectralOpts,
) -> Result<SpectralReport> {
    let (coarse, lifted) = match map {
        Some(map) => {
            let pair = CoarseGrainPair::new(map.clone(), pi.clone())?;
            let k_hat = pair.coarse_markov(k, SPECTRAL_TOL)?;
            let est = log_sobolev_constant(&k_hat, pair.pi_hat(), g, opts)?;
            let lifted = if est.certificate.len() == map.n_clusters() {
                vec![map.lift(&est.certificate)]
            } else {
                Vec::new()
            };
            (Some(est), lifted)
        }
        None => (None, Vec::new()),
    };
    let fine = log_sobolev_constant_seeded(k, pi, g, opts, &lifted)?;
    Ok(assemble_report(
        &format!("log_sobolev[{}]", g.name()),
        fine,
        coarse,
    ))
}

fn assemble_report(
    profile: &str,
    fine: ConstantEstimate,
    coarse: Option<ConstantEstimate>,
) -> SpectralReport {
    let lambda_hat = coarse.as_ref().map(|c| c.value);
    let monotone = lambda_hat.map(|lh| fine.value <= lh + MONOTONE_TOL);
    SpectralReport {
        profile: profile.to_string(),
        method: fine.method,
        lambda: fine.value,
        lambda_hat,
        monotone,
        minimizer: fine.certificate.iter().copied().collect(),
        coarse_minimizer: coarse.map(|c| c.certificate.iter().copied().collect()),
        iterations: fine.iterations,
    }
}

/// One row of the counterexample sweep: Dirichlet values of the
/// three-state generator family at `x = (3, 1, 2)`, computed through the
/// operator pipeline and as the closed rational forms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CounterexamplePoint {
    pub a: f64,
    /// `D(x)` from the operator pipeline.
    pub dirichlet_fine: f64,
    /// `D̂(N x)` from the operator pipeline.
    pub dirichlet_coarse: f64,
    /// `24a / (5a + 4)`.
    pub closed_fine: f64,
    /// `8a (1 + 2a)² / ((a + 1)² (5a + 4))`.
    pub closed_coarse: f64,
}

impl CounterexamplePoint {
    /// Sign of the fine-minus-coarse difference, pipeline values.
    pub fn difference(&self) -> f64 {
        self.dirichlet_fine - self.dirichlet_coarse
    }
}

/// Evaluates the counterexample family at parameter `a ≥ 0` with the
/// partition `{0}, {1, 2}` and the probe vector `x = (3, 1, 2)`.
pub fn counterexample_point(a: f64) -> Result<CounterexamplePoint> {
    assert!(a >= 0.0, "family parameter must be nonnegative");
    let x = DVector::from_row_slice(&[3.0, 1.0, 2.0]);
    let map = ClusterMap::new(vec![0, 1, 1], 2)?;
    let (gen, pi) = counterexample_generator(a);

    let (fine, coarse) = if a > 0.0 {
        let pair = CoarseGrainPair::new(map, pi.clone())?;
        let fine = crate::functionals::dirichlet_generator(&x, &gen, &pi)?;
        let a_hat = pair.coarse_generator(&gen, SPECTRAL_TOL)?;
        let coarse =
            crate::functionals::dirichlet_generator(&pair.reconstruct(&x), &a_hat, pair.pi_hat())?;
        (fine, coarse)
    } else {
        // The invariant measure degenerates at a = 0; use the a → 0 limit
        // of the reconstruction, N = [[1, 0, 0], [0, 0, 1]], explicitly.
        let n_mat = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let m_mat = map.lift_matrix();
        let pi_hat = DVector::from_row_slice(&[0.0, 1.0]);
        let fine = -(0..3)
            .map(|i| x[i] * (gen.as_matrix() * &x)[i] * pi.get(i))
            .sum::<f64>();
        let a_hat = &n_mat * gen.as_matrix() * &m_mat;
        let x_hat = &n_mat * &x;
        let coarse = -(0..2)
            .map(|i| x_hat[i] * (&a_hat * &x_hat)[i] * pi_hat[i])
            .sum::<f64>();
        (fine, coarse)
    };

    let z = 5.0 * a + 4.0;
    Ok(CounterexamplePoint {
        a,
        dirichlet_fine: fine + 0.0, // normalizes -0.0 at the degenerate endpoint
        dirichlet_coarse: coarse + 0.0,
        closed_fine: 24.0 * a / z,
        closed_coarse: 8.0 * a * (1.0 + 2.0 * a).powi(2) / ((a + 1.0).powi(2) * z),
    })
}

/// Locates the sign change of the pipeline-computed difference
/// `D(x) − D̂(Nx)` on `[lo, hi]` by bisection, to absolute tolerance `tol`.
pub fn counterexample_crossover(lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let f = |a: f64| -> Result<f64> { Ok(counterexample_point(a)?.difference()) };
    let (mut lo, mut hi) = (lo, hi);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::MinimizerDiverged {
            reason: format!("no sign change of the Dirichlet gap on [{lo}, {hi}]"),
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)?.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
