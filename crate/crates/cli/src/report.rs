//! Report assembly: every run embeds its tolerance set, seed, and input
//! digests so identical inputs reproduce identical reports.

use std::path::Path;

use serde::Serialize;

/// Tolerances in force for a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ToleranceSet {
    pub structural: f64,
    pub spectral: f64,
    pub solver: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self {
            structural: markov_cg::STRUCTURAL_TOL,
            spectral: markov_cg::SPECTRAL_TOL,
            solver: 1e-8,
        }
    }
}

/// A named input with a content digest.
#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub digest: String,
}

impl InputDigest {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            digest: format!("fnv1a64:{:016x}", fnv1a64(bytes)),
        }
    }
}

/// 64-bit FNV-1a over the raw input bytes; stable and dependency-free.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Common header of every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunHeader {
    pub command: &'static str,
    pub seed: u64,
    pub tolerances: ToleranceSet,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Serialize)]
pub struct ReduceReport {
    #[serde(flatten)]
    pub header: RunHeader,
    pub n: usize,
    pub n_clusters: usize,
    pub assignment: Vec<usize>,
    pub pi: Vec<f64>,
    pub pi_hat: Vec<f64>,
    pub reconstruction: Vec<Vec<f64>>,
    pub coarse_chain: Vec<Vec<f64>>,
    pub coarse_generator: Vec<Vec<f64>>,
    pub quotient_graph: markov_cg::QuotientGraph,
    pub lumpability_defect: f64,
    pub residuals: IdentityResiduals,
}

/// Residuals of the defining operator identities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityResiduals {
    /// `‖NM − I‖`
    pub left_inverse: f64,
    /// `‖Q_π̂ − M* Q_π M‖`
    pub weight_compatibility: f64,
    /// `‖Q_π P − P* Q_π‖`
    pub projection_balance: f64,
    /// `‖N* π̂ − π‖`
    pub measure_reconstruction: f64,
}

#[derive(Debug, Serialize)]
pub struct FluxReport {
    #[serde(flatten)]
    pub header: RunHeader,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub init: String,
    pub coarse_flux_max: f64,
    pub coarse_flux_final: f64,
    pub max_fredholm: f64,
    pub max_solver_residual: f64,
    pub max_kernel_residual: f64,
    pub max_equilibration_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct SpectralRunReport {
    #[serde(flatten)]
    pub header: RunHeader,
    pub poincare: markov_cg::SpectralReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_sobolev: Option<markov_cg::SpectralReport>,
}

#[derive(Debug, Serialize)]
pub struct CounterexampleReport {
    #[serde(flatten)]
    pub header: RunHeader,
    pub rows: Vec<markov_cg::CounterexamplePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossover: Option<f64>,
    pub crossover_expected: f64,
}

#[derive(Debug, Serialize)]
pub struct SelftestReport {
    #[serde(flatten)]
    pub header: RunHeader,
    pub outcomes: Vec<markov_cg::selftest::CriterionOutcome>,
    pub all_passed: bool,
}
