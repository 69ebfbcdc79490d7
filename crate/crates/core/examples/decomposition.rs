//! Split the squared permuted statistic into a weighted U-statistic and a
//! remainder, and check the identity against the streamed statistics.
//!
//! ```bash
//! cargo run --example decomposition
//! ```

use nystrom_mmd::data::{sample_correlated_gaussians, SyntheticSpec};
use nystrom_mmd::features::{build_nystrom, DEFAULT_RANK_TOLERANCE};
use nystrom_mmd::kernel::GaussianKernel;
use nystrom_mmd::landmarks::{sample_landmarks, SamplingWeights};
use nystrom_mmd::statistics::{permutation_labels, permuted_statistics, ustat_decomposition, PooledData};

fn main() -> nystrom_mmd::Result<()> {
    let x = sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(2, 0.0, 40, 1))?;
    let y = sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(2, 0.6, 30, 2))?;
    let pooled = PooledData::new(&x, &y)?;
    let lm = sample_landmarks(pooled.pooled(), SamplingWeights::Uniform, 10, 0)?;
    let map = build_nystrom(lm, GaussianKernel::new(1.0)?, DEFAULT_RANK_TOLERANCE)?;

    let seed = 9;
    let stats = permuted_statistics(&pooled, &map, 5, seed)?;
    println!("{:>3} {:>12} {:>12} {:>12} {:>10}", "p", "U", "R", "c·U + R", "Ψ²");
    for (p, s) in stats.iter().enumerate() {
        // rebuild the rearrangement the stream used: X slots first, then Y slots
        let labels = permutation_labels(pooled.n_x(), pooled.n(), seed, p);
        let mut sigma: Vec<usize> = (0..pooled.n()).filter(|&i| labels[i]).collect();
        sigma.extend((0..pooled.n()).filter(|&i| !labels[i]));
        let d = ustat_decomposition(&pooled, &sigma, &map)?;
        println!("{p:>3} {:>12.3e} {:>12.3e} {:>12.6e} {:>10.6e}", d.u, d.r, d.squared_statistic(), s * s);
    }
    Ok(())
}
