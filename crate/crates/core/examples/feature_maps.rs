//! How well Nyström and random Fourier feature maps reproduce the Gaussian
//! kernel as the number of features grows.
//!
//! ```bash
//! cargo run --example feature_maps
//! ```

use nystrom_mmd::data::{sample_correlated_gaussians, SyntheticSpec};
use nystrom_mmd::features::{build_nystrom, build_rff, FeatureMap, DEFAULT_RANK_TOLERANCE};
use nystrom_mmd::kernel::{median_heuristic, Dataset, GaussianKernel};
use nystrom_mmd::landmarks::{sample_landmarks, SamplingWeights};

fn max_kernel_error(map: &dyn FeatureMap, k: &GaussianKernel, probe: &Dataset) -> f64 {
    let f: Vec<Vec<f64>> = probe.rows().map(|r| map.apply(r).unwrap()).collect();
    let mut worst = 0.0f64;
    for i in 0..probe.n() {
        for j in 0..probe.n() {
            let approx: f64 = f[i].iter().zip(&f[j]).map(|(a, b)| a * b).sum();
            worst = worst.max((approx - k.value(probe.row(i), probe.row(j))).abs());
        }
    }
    worst
}

fn main() -> nystrom_mmd::Result<()> {
    let w = sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(3, 0.5, 2000, 1))?;
    let probe = sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(3, 0.5, 200, 2))?;
    let k = GaussianKernel::new(median_heuristic(&w, 2000, 0)?)?;

    println!("{:>6} {:>14} {:>10} {:>14}", "ell", "nystrom error", "rank", "rff error");
    for ell in [8, 32, 128, 512] {
        let nys = build_nystrom(
            sample_landmarks(&w, SamplingWeights::Uniform, ell, 5)?,
            k,
            DEFAULT_RANK_TOLERANCE,
        )?;
        let rff = build_rff(3, ell, &k, 5)?;
        println!(
            "{:>6} {:>14.2e} {:>10} {:>14.2e}",
            ell,
            max_kernel_error(&nys, &k, &probe),
            nys.rank(),
            max_kernel_error(&rff, &k, &probe)
        );
    }
    Ok(())
}
