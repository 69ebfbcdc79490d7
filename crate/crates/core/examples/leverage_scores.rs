//! Exact and approximate kernel ridge leverage scores, and landmark sampling
//! proportional to them.
//!
//! ```bash
//! cargo run --example leverage_scores
//! ```

use nystrom_mmd::data::{sample_correlated_gaussians, SyntheticSpec};
use nystrom_mmd::kernel::{gram, median_heuristic, GaussianKernel, DEFAULT_MEDIAN_SUBSET};
use nystrom_mmd::landmarks::{
    approx_krls, default_lambda, effective_dimension, exact_krls, sample_landmarks, AkrlsConfig,
    SamplingWeights, DEFAULT_DELTA,
};

fn main() -> nystrom_mmd::Result<()> {
    let n = 1200;
    let w = sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(3, 0.5, n, 7))?;
    let k = GaussianKernel::new(median_heuristic(&w, DEFAULT_MEDIAN_SUBSET, 0)?)?;
    let lambda = default_lambda(n, DEFAULT_DELTA);

    let g = gram(&k, &w, &w)?;
    let exact = exact_krls(&g, lambda)?;
    let approx = approx_krls(&w, &k, lambda, 3, &AkrlsConfig::default())?;
    println!("bandwidth {:.4}, lambda {:.3e}", k.bandwidth(), lambda);
    println!("effective dimension {:.3}", effective_dimension(&g, lambda)?);
    println!("sum of exact scores {:.3}, approximate {:.3}", exact.sum(), approx.sum());

    let ratios: Vec<f64> = exact.scores.iter().zip(&approx.scores).map(|(e, a)| a / e).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    println!("approximate / exact ratio range [{lo:.3}, {hi:.3}]");

    let lm = sample_landmarks(&w, SamplingWeights::Scores(&approx), 35, 11)?;
    let mut picked = lm.indices.clone();
    picked.sort_unstable();
    picked.dedup();
    println!("drew {} landmarks, {} distinct", lm.len(), picked.len());
    Ok(())
}
