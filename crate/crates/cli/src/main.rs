//! Command-line front end for coarse-graining analyses of finite-state
//! Markov chains.
//!
//! Exit codes: 0 on success, 1 on domain or validation failures, 2 on
//! usage and I/O failures.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use markov_cg::io::{ChainFile, PartitionFile};
use markov_cg::selftest;
use markov_cg::{
    ClusterMap, CoarseGrainPair, ConvexProfile, EdgeReconstruction, MarkovMatrix, ProbVector,
    SpectralOpts,
};
use report::{
    CounterexampleReport, FluxReport, IdentityResiduals, InputDigest, ReduceReport, RunHeader,
    SelftestReport, SpectralRunReport, ToleranceSet,
};

#[derive(Parser)]
#[command(
    name = "markov-cg",
    version,
    about = "Coarse-graining and reconstruction for finite-state Markov matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Chain file: { "n": int, "K": [[...]], "pi": optional [...] }.
    #[arg(long)]
    chain: PathBuf,

    /// Partition file: { "n": int, "assignment": [int] }.
    #[arg(long)]
    partition: PathBuf,

    /// Structural validation tolerance.
    #[arg(long, default_value_t = markov_cg::STRUCTURAL_TOL)]
    tol: f64,

    /// Spectral / null-space tolerance.
    #[arg(long, default_value_t = markov_cg::SPECTRAL_TOL)]
    spectral_tol: f64,

    /// Seed for randomized verification.
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Report output path (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a chain: operators, coarse chain and generator, residuals.
    Reduce(CommonOpts),

    /// Coarse flux evolution and fine-flux reconstruction.
    Flux {
        #[command(flatten)]
        common: CommonOpts,

        /// Integration horizon.
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,

        /// Euler step size.
        #[arg(long, default_value_t = 0.05)]
        dt: f64,

        /// Initial coarse concentrations: uniform | stationary | cluster=<k>.
        #[arg(long, default_value = "uniform")]
        init: String,

        /// Optional JSON-lines trajectory output.
        #[arg(long)]
        trajectory_out: Option<PathBuf>,
    },

    /// Poincaré-type (and optionally log-Sobolev) constants with the
    /// coarse-graining verdict.
    Spectral {
        #[command(flatten)]
        common: CommonOpts,

        /// Energy profile: quadratic | boltzmann.
        #[arg(long, default_value = "quadratic")]
        profile: String,

        /// Also estimate the log-Sobolev constant with g(r) = r².
        #[arg(long)]
        log_sobolev: bool,

        /// Multi-start count for the variational estimator.
        #[arg(long, default_value_t = 20)]
        starts: usize,
    },

    /// Sweep the three-state Dirichlet-form counterexample family and
    /// locate the sign crossover.
    Counterexample {
        #[arg(long, default_value_t = 0.0)]
        a_min: f64,

        #[arg(long, default_value_t = 5.0)]
        a_max: f64,

        #[arg(long, default_value_t = 11)]
        steps: usize,

        /// Verify the crossover against 1 + √3 and fail otherwise.
        #[arg(long)]
        selftest: bool,

        #[arg(long, default_value_t = 42)]
        seed: u64,

        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Run the full acceptance suite headlessly.
    Selftest {
        #[arg(long, default_value_t = 42)]
        seed: u64,

        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Domain(markov_cg::Error),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    Usage(String),
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) | CliError::Failed(_) => 1,
            CliError::Io { .. } | CliError::Json { .. } | CliError::Usage(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Domain(e) => format!("validation error: {e}"),
            CliError::Io { path, source } => {
                format!("i/o error on {}: {source}", path.display())
            }
            CliError::Json { path, source } => format!(
                "parse error in {} at line {}, column {}: {source}",
                path.display(),
                source.line(),
                source.column()
            ),
            CliError::Usage(msg) => format!("usage error: {msg}"),
            CliError::Failed(msg) => msg.clone(),
        }
    }
}

impl From<markov_cg::Error> for CliError {
    fn from(e: markov_cg::Error) -> Self {
        CliError::Domain(e)
    }
}

fn log_level() -> u8 {
    match std::env::var("MARKOV_CG_LOG").as_deref() {
        Ok("error") => 0,
        Ok("info") => 2,
        Ok("debug") => 3,
        _ => 1, // warn
    }
}

fn info(msg: &str) {
    if log_level() >= 2 {
        eprintln!("[info] {msg}");
    }
}

fn debug(msg: &str) {
    if log_level() >= 3 {
        eprintln!("[debug] {msg}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_chain(
    path: &Path,
    tol: f64,
    spectral_tol: f64,
) -> Result<(MarkovMatrix, ProbVector, InputDigest), CliError> {
    let bytes = read_file(path)?;
    let digest = InputDigest::new(path, &bytes);
    let file: ChainFile = serde_json::from_slice(&bytes).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let (k, pi) = file.into_chain(tol, spectral_tol)?;
    info(&format!(
        "loaded chain with {} states from {}",
        k.nrows(),
        path.display()
    ));
    Ok((k, pi, digest))
}

fn load_partition(path: &Path, n: usize) -> Result<(ClusterMap, InputDigest), CliError> {
    let bytes = read_file(path)?;
    let digest = InputDigest::new(path, &bytes);
    let file: PartitionFile = serde_json::from_slice(&bytes).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let map = file.into_map()?;
    if map.n() != n {
        return Err(CliError::Domain(markov_cg::Error::DimensionMismatch {
            expected: n,
            got: map.n(),
        }));
    }
    info(&format!(
        "loaded partition of {} states into {} clusters",
        map.n(),
        map.n_clusters()
    ));
    Ok((map, digest))
}

fn write_report<T: Serialize>(out: &Path, report: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report).expect("report serialization");
    std::fs::write(out, json).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    println!("report written to {}", out.display());
    Ok(())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Reduce(common) => cmd_reduce(common),
        Command::Flux {
            common,
            t_end,
            dt,
            init,
            trajectory_out,
        } => cmd_flux(common, t_end, dt, &init, trajectory_out.as_deref()),
        Command::Spectral {
            common,
            profile,
            log_sobolev,
            starts,
        } => cmd_spectral(common, &profile, log_sobolev, starts),
        Command::Counterexample {
            a_min,
            a_max,
            steps,
            selftest,
            seed,
            out,
        } => cmd_counterexample(a_min, a_max, steps, selftest, seed, out.as_deref()),
        Command::Selftest { seed, out } => cmd_selftest(seed, out.as_deref()),
    }
}

fn require_positive_tolerances(common: &CommonOpts) -> Result<(), CliError> {
    if common.tol <= 0.0 || common.spectral_tol <= 0.0 {
        return Err(CliError::Usage("tolerances must be positive".into()));
    }
    Ok(())
}

fn cmd_reduce(common: CommonOpts) -> Result<(), CliError> {
    require_positive_tolerances(&common)?;
    let (k, pi, chain_digest) = load_chain(&common.chain, common.tol, common.spectral_tol)?;
    let (map, partition_digest) = load_partition(&common.partition, k.nrows())?;
    let pair = CoarseGrainPair::new(map.clone(), pi.clone())?;
    let k_hat = pair.coarse_markov(&k, common.spectral_tol)?;
    let a_hat = pair.coarse_generator(&k.generator(), common.spectral_tol)?;
    let quotient_graph = markov_cg::QuotientGraph::new(&k, &map)?;
    let defect = pair.lumpability_defect(&k)?;

    let m = map.lift_matrix();
    let n_mat = pair.reconstruct_matrix();
    let p = pair.projection_matrix();
    let q_pi = DMatrix::from_diagonal(pi.as_vector());
    let nh = map.n_clusters();
    let residuals = IdentityResiduals {
        left_inverse: (&n_mat * &m - DMatrix::<f64>::identity(nh, nh)).amax(),
        weight_compatibility: (m.transpose() * &q_pi * &m
            - DMatrix::from_diagonal(pair.pi_hat().as_vector()))
        .amax(),
        projection_balance: (&q_pi * &p - p.transpose() * &q_pi).amax(),
        measure_reconstruction: (n_mat.transpose() * pair.pi_hat().as_vector() - pi.as_vector())
            .amax(),
    };
    debug(&format!("identity residuals: {residuals:?}"));

    let report = ReduceReport {
        header: RunHeader {
            command: "reduce",
            seed: common.seed,
            tolerances: ToleranceSet {
                structural: common.tol,
                spectral: common.spectral_tol,
                solver: 1e-8,
            },
            inputs: vec![chain_digest, partition_digest],
        },
        n: k.nrows(),
        n_clusters: nh,
        assignment: map.assignment().to_vec(),
        pi: pi.as_vector().iter().copied().collect(),
        pi_hat: pair.pi_hat().as_vector().iter().copied().collect(),
        reconstruction: rows(&n_mat),
        coarse_chain: rows(k_hat.as_matrix()),
        coarse_generator: rows(a_hat.as_matrix()),
        quotient_graph,
        lumpability_defect: defect,
        residuals,
    };

    println!(
        "reduced {} states to {} clusters; lumpability defect {defect:.3e}",
        k.nrows(),
        nh
    );
    println!(
        "identity residuals: NM−I {:.2e}, weights {:.2e}, projection balance {:.2e}, measure {:.2e}",
        report.residuals.left_inverse,
        report.residuals.weight_compatibility,
        report.residuals.projection_balance,
        report.residuals.measure_reconstruction
    );
    let out = common
        .out
        .unwrap_or_else(|| PathBuf::from("reduce-report.json"));
    write_report(&out, &report)
}

fn parse_init(init: &str, pair: &CoarseGrainPair) -> Result<DVector<f64>, CliError> {
    let nh = pair.n_clusters();
    match init {
        "uniform" => Ok(DVector::from_element(nh, 1.0 / nh as f64)),
        "stationary" => Ok(pair.pi_hat().as_vector().clone()),
        other => {
            if let Some(k) = other.strip_prefix("cluster=") {
                let k: usize = k
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad cluster index in --init {other}")))?;
                if k >= nh {
                    return Err(CliError::Usage(format!(
                        "cluster {k} out of range for {nh} clusters"
                    )));
                }
                Ok(DVector::from_fn(nh, |i, _| if i == k { 1.0 } else { 0.0 }))
            } else {
                Err(CliError::Usage(format!(
                    "unknown --init value `{other}` (expected uniform | stationary | cluster=<k>)"
                )))
            }
        }
    }
}

fn cmd_flux(
    common: CommonOpts,
    t_end: f64,
    dt: f64,
    init: &str,
    trajectory_out: Option<&Path>,
) -> Result<(), CliError> {
    require_positive_tolerances(&common)?;
    if dt <= 0.0 || t_end < 0.0 {
        return Err(CliError::Usage("t-end and dt must be positive".into()));
    }
    let (k, pi, chain_digest) = load_chain(&common.chain, common.tol, common.spectral_tol)?;
    let (map, partition_digest) = load_partition(&common.partition, k.nrows())?;
    let pair = CoarseGrainPair::new(map.clone(), pi.clone())?;
    let k_hat = pair.coarse_markov(&k, common.spectral_tol)?;
    let m = markov_cg::edge_weight(&k, &pi, common.spectral_tol)?;
    let recon = EdgeReconstruction::new(map, m.clone())?;

    let a_hat = k_hat.generator();
    let max_rate = a_hat
        .as_matrix()
        .diagonal()
        .iter()
        .fold(0.0f64, |acc, &d| acc.max(d.abs()));
    if max_rate > 0.0 && dt > 1.0 / max_rate {
        return Err(CliError::Domain(markov_cg::Error::StepTooLarge {
            dt,
            bound: 1.0 / max_rate,
        }));
    }

    let mut c_hat = parse_init(init, &pair)?;
    let steps = (t_end / dt).ceil() as usize;
    let mut coarse_flux_max: f64 = 0.0;
    let mut coarse_flux_final: f64 = 0.0;
    let mut max_fredholm: f64 = 0.0;
    let mut max_solver: f64 = 0.0;
    let mut max_kernel: f64 = 0.0;
    let mut max_equilibration: f64 = 0.0;
    let mut trajectory_lines = Vec::new();

    for step in 0..=steps {
        let t = step as f64 * dt;
        let (_, b_hat) = markov_cg::coarse_evolution_step(&c_hat, &k_hat, pair.pi_hat())?;
        let b_norm = b_hat.as_matrix().amax();
        coarse_flux_max = coarse_flux_max.max(b_norm);
        coarse_flux_final = b_norm;

        let reconstruction = markov_cg::reconstruct_flux(&b_hat, &pair, &m)?;
        max_fredholm = max_fredholm.max(reconstruction.fredholm);
        max_solver = max_solver.max(reconstruction.residual);
        max_kernel = max_kernel.max(reconstruction.kernel_residual);

        // Equilibrated fine state: the fine flux must be the weighted
        // spreading of the coarse flux.
        let c = pair.reconstruct_adjoint(&c_hat);
        let fine_flux = markov_cg::flux_of(&c, &k, &pi)?;
        let spread = recon.apply_adjoint(&b_hat)?;
        max_equilibration =
            max_equilibration.max((fine_flux.as_matrix() - spread.as_matrix()).amax());

        if trajectory_out.is_some() {
            let record = markov_cg::flux::TrajectoryRecord {
                t,
                c: c_hat.iter().copied().collect(),
                b_norm,
            };
            trajectory_lines.push(serde_json::to_string(&record).expect("record"));
        }
        if step < steps {
            c_hat += a_hat.as_matrix().transpose() * &c_hat * dt;
        }
    }

    if let Some(path) = trajectory_out {
        std::fs::write(path, trajectory_lines.join("\n") + "\n").map_err(|source| {
            CliError::Io {
                path: path.to_path_buf(),
                source,
            }
        })?;
        println!("trajectory written to {}", path.display());
    }

    let report = FluxReport {
        header: RunHeader {
            command: "flux",
            seed: common.seed,
            tolerances: ToleranceSet {
                structural: common.tol,
                spectral: common.spectral_tol,
                solver: 1e-8,
            },
            inputs: vec![chain_digest, partition_digest],
        },
        t_end,
        dt,
        steps,
        init: init.to_string(),
        coarse_flux_max,
        coarse_flux_final,
        max_fredholm,
        max_solver_residual: max_solver,
        max_kernel_residual: max_kernel,
        max_equilibration_residual: max_equilibration,
    };
    println!(
        "flux run over {steps} steps: max coarse flux {coarse_flux_max:.3e}, final {coarse_flux_final:.3e}"
    );
    println!(
        "certificates: fredholm {max_fredholm:.2e}, solver {max_solver:.2e}, kernel {max_kernel:.2e}, equilibration {max_equilibration:.2e}"
    );
    let out = common
        .out
        .unwrap_or_else(|| PathBuf::from("flux-report.json"));
    write_report(&out, &report)
}

fn cmd_spectral(
    common: CommonOpts,
    profile_name: &str,
    log_sobolev: bool,
    starts: usize,
) -> Result<(), CliError> {
    require_positive_tolerances(&common)?;
    let profile = ConvexProfile::by_name(profile_name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown profile `{profile_name}` (expected quadratic | boltzmann | square | fourth_power | smoothed_three_halves)"
        ))
    })?;
    let (k, pi, chain_digest) = load_chain(&common.chain, common.tol, common.spectral_tol)?;
    let (map, partition_digest) = load_partition(&common.partition, k.nrows())?;
    let opts = SpectralOpts {
        starts,
        seed: common.seed,
        ..Default::default()
    };
    let poincare = markov_cg::spectral_report(&k, &pi, Some(&map), &profile, &opts)?;
    println!(
        "poincare[{}]: λ = {:.6e}, λ̂ = {:.6e}, monotone: {}",
        poincare.profile,
        poincare.lambda,
        poincare.lambda_hat.unwrap_or(f64::NAN),
        poincare.monotone.unwrap_or(false)
    );
    let ls = if log_sobolev {
        let r =
            markov_cg::log_sobolev_report(&k, &pi, Some(&map), &ConvexProfile::square(), &opts)?;
        println!(
            "log-sobolev[square]: λ = {:.6e}, λ̂ = {:.6e}, monotone: {}",
            r.lambda,
            r.lambda_hat.unwrap_or(f64::NAN),
            r.monotone.unwrap_or(false)
        );
        Some(r)
    } else {
        None
    };
    let report = SpectralRunReport {
        header: RunHeader {
            command: "spectral",
            seed: common.seed,
            tolerances: ToleranceSet {
                structural: common.tol,
                spectral: common.spectral_tol,
                solver: 1e-8,
            },
            inputs: vec![chain_digest, partition_digest],
        },
        poincare,
        log_sobolev: ls,
    };
    let out = common
        .out
        .unwrap_or_else(|| PathBuf::from("spectral-report.json"));
    write_report(&out, &report)
}

fn cmd_counterexample(
    a_min: f64,
    a_max: f64,
    steps: usize,
    selftest: bool,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if !(a_min >= 0.0 && a_min < a_max && steps >= 2) {
        return Err(CliError::Usage(
            "need 0 ≤ a-min < a-max and at least two steps".into(),
        ));
    }
    let mut rows = Vec::with_capacity(steps);
    println!("{:>8}  {:>12}  {:>12}  sign", "a", "D(x)", "D̂(Nx)");
    for i in 0..steps {
        let a = a_min + (a_max - a_min) * i as f64 / (steps - 1) as f64;
        let point = markov_cg::counterexample_point(a)?;
        let sign = match point.difference() {
            d if d > 0.0 => "+",
            d if d < 0.0 => "−",
            _ => "0",
        };
        println!(
            "{:>8.4}  {:>12.6}  {:>12.6}  {sign}",
            point.a, point.dirichlet_fine, point.dirichlet_coarse
        );
        rows.push(point);
    }

    // Bracket the sign change on the sampled grid, then bisect.
    let mut crossover = None;
    for pair in rows.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        if lo.difference() > 0.0 && hi.difference() < 0.0 {
            crossover = Some(markov_cg::counterexample_crossover(lo.a, hi.a, 1e-8)?);
            break;
        }
    }
    let expected = 1.0 + 3.0f64.sqrt();
    match crossover {
        Some(a_star) => println!("crossover a* = {a_star:.7} (1 + √3 = {expected:.7})"),
        None => println!("no sign change inside [{a_min}, {a_max}]"),
    }

    let report = CounterexampleReport {
        header: RunHeader {
            command: "counterexample",
            seed,
            tolerances: ToleranceSet::default(),
            inputs: Vec::new(),
        },
        rows,
        crossover,
        crossover_expected: expected,
    };
    if let Some(path) = out {
        write_report(path, &report)?;
    }

    if selftest {
        match crossover {
            Some(a_star) if (a_star - expected).abs() <= 1e-6 => {
                println!("selftest: crossover matches 1 + √3 within 1e-6");
            }
            Some(a_star) => {
                return Err(CliError::Failed(format!(
                    "selftest failed: crossover {a_star} differs from {expected} by more than 1e-6"
                )));
            }
            None => {
                return Err(CliError::Failed(
                    "selftest failed: no crossover found in range".into(),
                ));
            }
        }
    }
    Ok(())
}

fn cmd_selftest(seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let outcomes = selftest::run_all(seed);
    for outcome in &outcomes {
        println!("{}", outcome.line());
    }
    let all_passed = selftest::all_passed(&outcomes);
    let report = SelftestReport {
        header: RunHeader {
            command: "selftest",
            seed,
            tolerances: ToleranceSet::default(),
            inputs: Vec::new(),
        },
        outcomes,
        all_passed,
    };
    if let Some(path) = out {
        write_report(path, &report)?;
    }
    if all_passed {
        println!("all acceptance criteria passed");
        Ok(())
    } else {
        Err(CliError::Failed("acceptance criteria failed".into()))
    }
}
