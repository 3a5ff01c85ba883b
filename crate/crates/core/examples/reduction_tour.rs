//! A tour of the reduction pipeline on a random reversible chain:
//! operators, coarse chain, edge-level weights, fluxes, and the spectral
//! verdict.
//!
//! Run with `cargo run --example reduction_tour`.

use markov_cg::{
    coarse_evolution_step, edge_weight, flux_of, reconstruct_flux, restrict, sample, spectral_gap,
    ClusterMap, CoarseGrainPair, SPECTRAL_TOL,
};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> markov_cg::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 6;
    let (k, pi) = sample::reversible_chain(n, &mut rng);
    let map = ClusterMap::new(vec![0, 0, 1, 1, 2, 2], 3)?;
    let pair = CoarseGrainPair::new(map.clone(), pi.clone())?;

    println!(
        "fine chain: {n} states, coarse chain: {} blocks",
        pair.n_clusters()
    );
    println!("pi_hat = {:?}", pair.pi_hat().as_vector().as_slice());

    let k_hat = pair.coarse_markov(&k, SPECTRAL_TOL)?;
    println!(
        "coarse chain reversible: {}",
        k_hat.is_detailed_balance(pair.pi_hat(), 1e-12)
    );
    println!("lumpability defect: {:.3e}", pair.lumpability_defect(&k)?);

    // Edge weights aggregate blockwise onto the coarse edge weights.
    let m = edge_weight(&k, &pi, SPECTRAL_TOL)?;
    let m_hat = restrict(&map, &m)?;
    let coarse_weights = edge_weight(&k_hat, pair.pi_hat(), SPECTRAL_TOL)?;
    println!(
        "blockwise weight residual: {:.3e}",
        (m_hat.as_matrix() - coarse_weights.as_matrix()).amax()
    );

    // Push a coarse flux back to the fine space.
    let c_hat = DVector::from_row_slice(&[0.6, 0.3, 0.1]);
    let (_, b_hat) = coarse_evolution_step(&c_hat, &k_hat, pair.pi_hat())?;
    let reconstruction = reconstruct_flux(&b_hat, &pair, &m)?;
    println!(
        "flux reconstruction: fredholm {:.2e}, solve residual {:.2e}, kernel {:.2e}",
        reconstruction.fredholm, reconstruction.residual, reconstruction.kernel_residual
    );

    // Equilibrated concentrations equilibrate fluxes.
    let c = pair.reconstruct_adjoint(&c_hat);
    let fine_flux = flux_of(&c, &k, &pi)?;
    let b1 = reconstruction.b1;
    println!(
        "flux equilibration residual: {:.3e}",
        (fine_flux.as_matrix() - b1.as_matrix()).amax()
    );

    // Coarse-graining can only widen the spectral gap.
    let fine_gap = spectral_gap(&k, &pi)?.value;
    let coarse_gap = spectral_gap(&k_hat, pair.pi_hat())?.value;
    println!(
        "spectral gap: {fine_gap:.6} -> {coarse_gap:.6} (monotone: {})",
        fine_gap <= coarse_gap + 1e-9
    );
    Ok(())
}
