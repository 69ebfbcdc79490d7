//! Kernel ridge leverage scores and Nyström landmark sampling.
//!
//! Leverage scores are `τᵢ = (K (K + λnI)⁻¹)ᵢᵢ`. The exact route diagonalizes
//! `K` once; the approximate route uses recursive half-sampling so that only
//! small `s × s` systems are ever solved.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{gram, Dataset, GaussianKernel};
use crate::linalg::{check_symmetric, sym_eigen};
use crate::rng::rng_from;

/// Smallest accepted intermediate sample size for [`approx_krls`].
pub const MIN_AKRLS_BUDGET: usize = 16;

/// Failure probability used in the default regularization.
pub const DEFAULT_DELTA: f64 = 0.05;

/// Default leverage-score regularization `16·log(4/δ)/n` for a kernel bounded
/// by one.
pub fn default_lambda(n: usize, delta: f64) -> f64 {
    16.0 * (4.0 / delta).ln() / n as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScoreKind {
    Exact,
    Approximate { z: f64, lambda0: f64, delta: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeverageScores {
    pub scores: Vec<f64>,
    pub lambda: f64,
    pub kind: ScoreKind,
}

impl LeverageScores {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }

    /// Sampling probabilities `p(i) = sᵢ / Σ s`.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let total = self.sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("all leverage scores are zero".into()));
        }
        Ok(self.scores.iter().map(|s| s / total).collect())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Exact kernel ridge leverage scores of the Gram matrix `k`.
pub fn exact_krls(k: &DMatrix<f64>, lambda: f64) -> Result<LeverageScores> {
    check_lambda(lambda)?;
    check_symmetric(k)?;
    let n = k.nrows();
    let mu = lambda * n as f64;
    let (vals, vecs) = sym_eigen(k);
    let shrink: Vec<f64> = vals
        .iter()
        .map(|&l| {
            let l = l.max(0.0);
            l / (l + mu)
        })
        .collect();
    let scores = (0..n)
        .map(|i| {
            shrink
                .iter()
                .enumerate()
                .map(|(c, s)| vecs[(i, c)] * vecs[(i, c)] * s)
                .sum::<f64>()
        })
        .collect();
    Ok(LeverageScores {
        scores,
        lambda,
        kind: ScoreKind::Exact,
    })
}

/// Empirical effective dimension `Tr(K (K + λnI)⁻¹)`.
pub fn effective_dimension(k: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_symmetric(k)?;
    let mu = lambda * k.nrows() as f64;
    let (vals, _) = sym_eigen(k);
    Ok(vals
        .iter()
        .map(|&l| {
            let l = l.max(0.0);
            l / (l + mu)
        })
        .sum())
}

/// Settings for the recursive approximate leverage-score scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AkrlsConfig {
    /// Target size of each intermediate Nyström sample.
    pub budget: usize,
    /// Datasets with at most this many points get exact scores.
    pub fallback_threshold: usize,
    /// Nominal multiplicative accuracy reported in [`ScoreKind`].
    pub z: f64,
    pub delta: f64,
}

impl Default for AkrlsConfig {
    fn default() -> Self {
        Self {
            budget: 256,
            fallback_threshold: 256,
            z: 4.0,
            delta: DEFAULT_DELTA,
        }
    }
}

/// Approximate kernel ridge leverage scores via recursive uniform halving.
///
/// At each level half of the points are kept at random, a weighted Nyström
/// sample of the half is obtained recursively, and that sample is used to
/// estimate ridge leverage scores for the whole level:
///
/// `τ̃ᵢ = (κ(xᵢ,xᵢ) − k_{iS} (K_SS + λn·diag(p_S))⁻¹ k_{Si}) / (λn)`
///
/// where `p_S` are the inclusion probabilities of the sampled points. A new
/// sample of expected size `budget` is then drawn proportionally to `τ̃`.
/// Scores are clamped to `[0, 1]`.
pub fn approx_krls(
    w: &Dataset,
    k: &GaussianKernel,
    lambda: f64,
    seed: u64,
    cfg: &AkrlsConfig,
) -> Result<LeverageScores> {
    check_lambda(lambda)?;
    if cfg.budget < MIN_AKRLS_BUDGET {
        return Err(invalid(format!(
            "leverage-score budget {} is below the minimum {MIN_AKRLS_BUDGET}",
            cfg.budget
        )));
    }
    let n = w.n();
    if n <= cfg.fallback_threshold {
        return exact_krls(&gram(k, w, w)?, lambda);
    }
    let mu = lambda * n as f64;
    let mut rng = rng_from(seed, &[]);
    let all: Vec<usize> = (0..n).collect();
    let (sample, probs) = recursive_sample(w, k, mu, &all, cfg.budget, &mut rng)?;
    let scores = estimate_scores(w, k, mu, &all, &sample, &probs)?;
    Ok(LeverageScores {
        scores,
        lambda,
        kind: ScoreKind::Approximate {
            z: cfg.z,
            lambda0: lambda,
            delta: cfg.delta,
        },
    })
}

fn recursive_sample<R: Rng>(
    w: &Dataset,
    k: &GaussianKernel,
    mu: f64,
    idx: &[usize],
    budget: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<f64>)> {
    if idx.len() <= budget {
        return Ok((idx.to_vec(), vec![1.0; idx.len()]));
    }
    let mut half: Vec<usize> = idx.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    if half.is_empty() {
        half.push(idx[0]);
    }
    let (sub, mut sub_p) = recursive_sample(w, k, mu, &half, budget, rng)?;
    sub_p.iter_mut().for_each(|p| *p *= 0.5);

    let est = estimate_scores(w, k, mu, idx, &sub, &sub_p)?;
    let total: f64 = est.iter().sum();
    let mut sample = Vec::new();
    let mut probs = Vec::new();
    for (pos, &i) in idx.iter().enumerate() {
        let p = if total > 0.0 {
            (budget as f64 * est[pos] / total).min(1.0)
        } else {
            budget as f64 / idx.len() as f64
        };
        if p > 0.0 && rng.random::<f64>() < p {
            sample.push(i);
            probs.push(p);
        }
    }
    if sample.is_empty() {
        let best = (0..idx.len())
            .max_by(|&a, &b| est[a].total_cmp(&est[b]))
            .unwrap_or(0);
        sample.push(idx[best]);
        probs.push(1.0);
    }
    Ok((sample, probs))
}

fn estimate_scores(
    w: &Dataset,
    k: &GaussianKernel,
    mu: f64,
    idx: &[usize],
    sample: &[usize],
    probs: &[f64],
) -> Result<Vec<f64>> {
    let ws = w.select(sample)?;
    let wi = w.select(idx)?;
    let mut a = gram(k, &ws, &ws)?;
    for (j, p) in probs.iter().enumerate() {
        a[(j, j)] += mu * p;
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Degenerate("regularized landmark Gram is not positive definite".into()))?;
    let kis = gram(k, &ws, &wi)?; // s × m
    let b = chol
        .l_dirty()
        .solve_lower_triangular(&kis)
        .ok_or_else(|| Error::Degenerate("triangular solve failed".into()))?;
    Ok(b
        .column_iter()
        .map(|col| ((1.0 - col.norm_squared()) / mu).clamp(0.0, 1.0))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Uniform,
    Akrls,
    ExactKrls,
}

/// Landmark draw distribution.
#[derive(Clone, Copy, Debug)]
pub enum SamplingWeights<'a> {
    Uniform,
    Scores(&'a LeverageScores),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSet {
    /// Row indices into the source dataset, drawn with replacement.
    pub indices: Vec<usize>,
    pub points: Dataset,
    pub sampler: Sampler,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Landmarks taken verbatim from `points` (every row, in order).
    pub fn from_points(points: Dataset) -> Self {
        Self {
            indices: (0..points.n()).collect(),
            points,
            sampler: Sampler::Uniform,
        }
    }
}

/// Draw `ell` landmark indices i.i.d. with replacement from `w`.
pub fn sample_landmarks(
    w: &Dataset,
    weights: SamplingWeights<'_>,
    ell: usize,
    seed: u64,
) -> Result<LandmarkSet> {
    if ell == 0 {
        return Err(invalid("number of landmarks must be at least 1"));
    }
    let n = w.n();
    let mut rng = rng_from(seed, &[]);
    let (indices, sampler) = match weights {
        SamplingWeights::Uniform => (
            (0..ell).map(|_| rng.random_range(0..n)).collect::<Vec<_>>(),
            Sampler::Uniform,
        ),
        SamplingWeights::Scores(s) => {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: s.len(),
                });
            }
            if s.scores.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(invalid("leverage scores must be finite and nonnegative"));
            }
            if !(s.sum() > 0.0) {
                return Err(Error::Degenerate("all leverage scores are zero".into()));
            }
            let dist = WeightedIndex::new(&s.scores)
                .map_err(|e| Error::Degenerate(format!("invalid sampling weights: {e}")))?;
            let sampler = match s.kind {
                ScoreKind::Exact => Sampler::ExactKrls,
                ScoreKind::Approximate { .. } => Sampler::Akrls,
            };
            ((0..ell).map(|_| dist.sample(&mut rng)).collect(), sampler)
        }
    };
    Ok(LandmarkSet {
        points: w.select(&indices)?,
        indices,
        sampler,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from(seed, &[1]);
        let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = &a * a.transpose() / n as f64;
        // exact symmetry
        DMatrix::from_fn(n, n, |i, j| if i <= j { m[(i, j)] } else { m[(j, i)] })
    }

    fn solve_oracle(k: &DMatrix<f64>, lambda: f64) -> Vec<f64> {
        let n = k.nrows();
        let a = k + DMatrix::identity(n, n) * (lambda * n as f64);
        let lu = a.lu();
        (0..n)
            .map(|i| {
                let v = lu.solve(&k.column(i).into_owned()).unwrap();
                v[i]
            })
            .collect()
    }

    #[test]
    fn identity_scores() {
        let k = DMatrix::identity(5, 5);
        let s = exact_krls(&k, 0.2).unwrap();
        for v in &s.scores {
            assert!((v - 1.0 / (1.0 + 0.2 * 5.0)).abs() < 1e-15);
        }
        let d = effective_dimension(&k, 0.2).unwrap();
        assert!((d - 5.0 / 2.0).abs() < 1e-14);
    }

    #[test]
    fn large_lambda_kills_scores() {
        let k = random_psd(6, 2);
        let s = exact_krls(&k, 1e12 / 6.0).unwrap();
        assert!(s.scores.iter().all(|&v| v <= 1e-11));
    }

    #[test]
    fn exact_matches_dense_solve() {
        let k = random_psd(6, 3);
        let s = exact_krls(&k, 0.1).unwrap();
        let oracle = solve_oracle(&k, 0.1);
        for (a, b) in s.scores.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn effective_dimension_is_score_sum() {
        let k = random_psd(8, 4);
        let s = exact_krls(&k, 0.05).unwrap();
        let d = effective_dimension(&k, 0.05).unwrap();
        assert!((s.sum() - d).abs() < 1e-10);
    }

    #[test]
    fn effective_dimension_small_lambda_approaches_rank() {
        let k = random_psd(8, 5) + DMatrix::identity(8, 8) * 0.5;
        let d = effective_dimension(&k, 1e-12).unwrap();
        assert!((d - 8.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut k = DMatrix::identity(3, 3);
        assert!(exact_krls(&k, 0.0).is_err());
        assert!(exact_krls(&k, f64::NAN).is_err());
        k[(0, 1)] = 0.3;
        assert!(matches!(exact_krls(&k, 0.1), Err(Error::NotSymmetric(_))));
        k[(0, 1)] = f64::INFINITY;
        assert!(exact_krls(&k, 0.1).is_err());
        assert!(effective_dimension(&k, 0.1).is_err());
    }

    #[test]
    fn monotone_in_lambda() {
        for seed in 0..10 {
            let k = random_psd(7, 10 + seed);
            let mut prev = exact_krls(&k, 0.01).unwrap();
            let mut prev_d = effective_dimension(&k, 0.01).unwrap();
            for lam in [0.03, 0.1, 0.3, 1.0, 3.0] {
                let cur = exact_krls(&k, lam).unwrap();
                for (a, b) in cur.scores.iter().zip(&prev.scores) {
                    assert!(*a <= b + 1e-10);
                }
                let d = effective_dimension(&k, lam).unwrap();
                assert!(d <= prev_d + 1e-10);
                prev = cur;
                prev_d = d;
            }
        }
    }

    #[test]
    fn sample_single_point_and_one_hot() {
        let w1 = Dataset::from_rows(&[[2.0, 1.0]]).unwrap();
        let l = sample_landmarks(&w1, SamplingWeights::Uniform, 7, 3).unwrap();
        assert!(l.indices.iter().all(|&i| i == 0));

        let w = Dataset::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]).unwrap();
        let s = LeverageScores {
            scores: vec![0.0, 0.0, 0.0, 0.7, 0.0],
            lambda: 1.0,
            kind: ScoreKind::Exact,
        };
        let l = sample_landmarks(&w, SamplingWeights::Scores(&s), 50, 9).unwrap();
        assert!(l.indices.iter().all(|&i| i == 3));
        assert_eq!(l.points.row(10), &[3.0]);
        assert_eq!(l.sampler, Sampler::ExactKrls);
    }

    #[test]
    fn sample_errors() {
        let w = Dataset::from_rows(&[[0.0], [1.0]]).unwrap();
        let zero = LeverageScores {
            scores: vec![0.0, 0.0],
            lambda: 1.0,
            kind: ScoreKind::Exact,
        };
        assert!(matches!(
            sample_landmarks(&w, SamplingWeights::Scores(&zero), 3, 0),
            Err(Error::Degenerate(_))
        ));
        assert!(sample_landmarks(&w, SamplingWeights::Uniform, 0, 0).is_err());
        let short = LeverageScores {
            scores: vec![1.0],
            lambda: 1.0,
            kind: ScoreKind::Exact,
        };
        assert!(sample_landmarks(&w, SamplingWeights::Scores(&short), 3, 0).is_err());
    }

    #[test]
    fn uniform_frequencies_concentrate() {
        let rows: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        let w = Dataset::from_rows(&rows).unwrap();
        let ell = 100_000;
        let l = sample_landmarks(&w, SamplingWeights::Uniform, ell, 17).unwrap();
        let mut counts = [0usize; 10];
        for &i in &l.indices {
            counts[i] += 1;
        }
        let sigma = (0.1 * 0.9 / ell as f64).sqrt();
        for c in counts {
            assert!((c as f64 / ell as f64 - 0.1).abs() <= 3.0 * sigma);
        }
    }

    #[test]
    fn scaled_scores_give_same_draws() {
        let rows: Vec<[f64; 1]> = (0..6).map(|i| [i as f64]).collect();
        let w = Dataset::from_rows(&rows).unwrap();
        let s = LeverageScores {
            scores: vec![0.1, 0.4, 0.2, 0.05, 0.15, 0.1],
            lambda: 1.0,
            kind: ScoreKind::Exact,
        };
        let mut s2 = s.clone();
        s2.scores.iter_mut().for_each(|v| *v *= 4.0);
        let p1 = s.probabilities().unwrap();
        let p2 = s2.probabilities().unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-15);
        }
        let a = sample_landmarks(&w, SamplingWeights::Scores(&s), 200, 4).unwrap();
        let b = sample_landmarks(&w, SamplingWeights::Scores(&s2), 200, 4).unwrap();
        assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn approx_falls_back_to_exact_for_small_n() {
        let mut rng = rng_from(5, &[]);
        let data: Vec<f64> = (0..120).map(|_| rng.sample(StandardNormal)).collect();
        let w = Dataset::from_flat(data, 40, 3).unwrap();
        let k = GaussianKernel::new(1.0).unwrap();
        let cfg = AkrlsConfig::default();
        let a = approx_krls(&w, &k, 0.01, 1, &cfg).unwrap();
        let e = exact_krls(&gram(&k, &w, &w).unwrap(), 0.01).unwrap();
        assert_eq!(a.scores, e.scores);
    }

    #[test]
    fn approx_budget_floor() {
        let w = Dataset::from_rows(&[[0.0], [1.0]]).unwrap();
        let k = GaussianKernel::new(1.0).unwrap();
        let cfg = AkrlsConfig {
            budget: MIN_AKRLS_BUDGET - 1,
            ..AkrlsConfig::default()
        };
        assert!(approx_krls(&w, &k, 0.1, 0, &cfg).is_err());
    }

    #[test]
    fn approx_is_deterministic_and_bounded() {
        let mut rng = rng_from(6, &[]);
        let data: Vec<f64> = (0..600 * 2).map(|_| rng.sample(StandardNormal)).collect();
        let w = Dataset::from_flat(data, 600, 2).unwrap();
        let k = GaussianKernel::new(1.0).unwrap();
        let cfg = AkrlsConfig {
            budget: 64,
            fallback_threshold: 100,
            ..AkrlsConfig::default()
        };
        let a = approx_krls(&w, &k, 1.0 / 600.0, 3, &cfg).unwrap();
        let b = approx_krls(&w, &k, 1.0 / 600.0, 3, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.scores.iter().all(|&s| (0.0..=cfg.z).contains(&s)));
        assert!(matches!(a.kind, ScoreKind::Approximate { .. }));
    }
}
