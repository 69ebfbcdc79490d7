//! MMD statistics: the quadratic-time plug-in estimator, the feature-space
//! statistic, the single-pass permuted accumulator, and the U-statistic /
//! remainder split of a permuted squared statistic.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::features::{dot, FeatureMap};
use crate::kernel::{check_dims, gram, Dataset, GaussianKernel};
use crate::rng::{rng_from, Rng as StreamRng};

/// Rows processed per feature block in the streaming pass.
const CHUNK_ROWS: usize = 256;

/// Two samples stacked as `W = [X; Y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledData {
    w: Dataset,
    n_x: usize,
}

impl PooledData {
    pub fn new(x: &Dataset, y: &Dataset) -> Result<Self> {
        Ok(Self {
            w: x.stack(y)?,
            n_x: x.n(),
        })
    }

    /// Split an existing pooled dataset after its first `n_x` rows.
    pub fn from_pooled(w: Dataset, n_x: usize) -> Result<Self> {
        if n_x == 0 || n_x >= w.n() {
            return Err(invalid(format!(
                "both samples must be nonempty (n_x = {n_x}, n = {})",
                w.n()
            )));
        }
        Ok(Self { w, n_x })
    }

    pub fn pooled(&self) -> &Dataset {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.w.n() - self.n_x
    }

    pub fn x(&self) -> Dataset {
        let idx: Vec<usize> = (0..self.n_x).collect();
        self.w.select(&idx).expect("indices in range")
    }

    pub fn y(&self) -> Dataset {
        let idx: Vec<usize> = (self.n_x..self.n()).collect();
        self.w.select(&idx).expect("indices in range")
    }

    /// The weight `1/n_X` or `−1/n_Y` for a point assigned to X or Y.
    fn weight(&self, in_x: bool) -> f64 {
        if in_x {
            1.0 / self.n_x as f64
        } else {
            -1.0 / self.n_y() as f64
        }
    }
}

/// Plug-in MMD `√(mean K_XX − 2 mean K_XY + mean K_YY)`, radicand clamped at 0.
pub fn exact_mmd(x: &Dataset, y: &Dataset, k: &GaussianKernel) -> Result<f64> {
    check_dims(x.d(), y.d())?;
    let mean = |a: &Dataset, b: &Dataset| -> Result<f64> {
        let g = gram(k, a, b)?;
        Ok(g.sum() / (a.n() * b.n()) as f64)
    };
    let sq = mean(x, x)? - 2.0 * mean(x, y)? + mean(y, y)?;
    Ok(sq.max(0.0).sqrt())
}

fn check_map(map: &dyn FeatureMap, d: usize) -> Result<()> {
    check_dims(map.input_dim(), d)
}

fn accumulate_mean(map: &dyn FeatureMap, data: &Dataset, acc: &mut [f64]) {
    let (d, l) = (data.d(), map.dim());
    let mut feats = vec![0.0; CHUNK_ROWS * l];
    for block in data.as_slice().chunks(CHUNK_ROWS * d) {
        let rows = block.len() / d;
        map.apply_batch(block, &mut feats[..rows * l]);
        for f in feats[..rows * l].chunks_exact(l) {
            acc.iter_mut().zip(f).for_each(|(a, v)| *a += v);
        }
    }
    let inv = 1.0 / data.n() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
}

/// `‖(1/n_X) Σ φ(xᵢ) − (1/n_Y) Σ φ(y_j)‖`, computed in one pass per sample.
pub fn feature_mmd(x: &Dataset, y: &Dataset, map: &dyn FeatureMap) -> Result<f64> {
    check_map(map, x.d())?;
    check_map(map, y.d())?;
    let l = map.dim();
    let mut mx = vec![0.0; l];
    let mut my = vec![0.0; l];
    accumulate_mean(map, x, &mut mx);
    accumulate_mean(map, y, &mut my);
    Ok(mx
        .iter()
        .zip(&my)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Sequential generator of a uniformly random split of `n` slots into `n_x`
/// X-slots and `n − n_x` Y-slots.
///
/// Slot `i` goes to X with probability (X-slots left)/(slots left), which
/// yields every one of the `C(n, n_X)` labelings with equal probability, the
/// same law as shuffling the weight vector. Only O(1) state is kept, so the
/// permutations never need to be stored.
#[derive(Clone, Debug)]
pub struct LabelStream {
    rng: Option<StreamRng>,
    x_left: usize,
    left: usize,
}

impl LabelStream {
    /// Stream for permutation index `p`; `p = 0` is the identity labeling.
    pub fn new(n_x: usize, n: usize, seed: u64, p: usize) -> Self {
        Self {
            rng: (p > 0).then(|| rng_from(seed, &[p as u64])),
            x_left: n_x,
            left: n,
        }
    }

    /// Whether the next slot belongs to X.
    #[inline]
    pub fn next_in_x(&mut self) -> bool {
        debug_assert!(self.left > 0);
        let in_x = match &mut self.rng {
            None => self.x_left > 0,
            Some(rng) => rng.random_range(0..self.left) < self.x_left,
        };
        self.left -= 1;
        if in_x {
            self.x_left -= 1;
        }
        in_x
    }
}

/// The full X/Y assignment of permutation `p`; `true` marks X.
pub fn permutation_labels(n_x: usize, n: usize, seed: u64, p: usize) -> Vec<bool> {
    let mut s = LabelStream::new(n_x, n, seed, p);
    (0..n).map(|_| s.next_in_x()).collect()
}

struct Accumulator {
    labels: LabelStream,
    v: Vec<f64>,
}

/// Statistics `Ψ⁽⁰⁾, …, Ψ⁽ᴾ⁾` for the identity and `P` random relabelings of
/// the pooled data.
///
/// The data are visited once: each block of rows is mapped to features, and
/// every permutation adds its signed weights times those features to its own
/// `ℓ`-vector. Memory is `O((P + 1) ℓ)` plus one feature block, independent of
/// `n`. Each permutation owns its random stream, so results do not depend on
/// the thread count.
pub fn permuted_statistics(
    pooled: &PooledData,
    map: &dyn FeatureMap,
    permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if permutations == 0 {
        return Err(invalid("number of permutations must be at least 1"));
    }
    let w = pooled.pooled();
    check_map(map, w.d())?;
    let (n, d, l) = (w.n(), w.d(), map.dim());
    let wx = pooled.weight(true);
    let wy = pooled.weight(false);

    let mut accs: Vec<Accumulator> = (0..=permutations)
        .map(|p| Accumulator {
            labels: LabelStream::new(pooled.n_x(), n, seed, p),
            v: vec![0.0; l],
        })
        .collect();

    let mut feats = vec![0.0; CHUNK_ROWS * l];
    for block in w.as_slice().chunks(CHUNK_ROWS * d) {
        let rows = block.len() / d;
        let feats = &mut feats[..rows * l];
        map.apply_batch(block, feats);
        let feats = &*feats;
        accs.par_iter_mut().with_min_len(8).for_each(|acc| {
            for f in feats.chunks_exact(l) {
                let c = if acc.labels.next_in_x() { wx } else { wy };
                acc.v.iter_mut().zip(f).for_each(|(a, v)| *a += c * v);
            }
        });
    }
    Ok(accs.iter().map(|a| dot(&a.v, &a.v).sqrt()).collect())
}

/// Quadratic-time counterpart of [`permuted_statistics`] using the exact
/// kernel: `Ψ⁽ᵖ⁾ = √(wᵀ K w)` for each permuted weight vector, with the
/// pooled Gram matrix computed once.
pub fn exact_permuted_statistics(
    pooled: &PooledData,
    k: &GaussianKernel,
    permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if permutations == 0 {
        return Err(invalid("number of permutations must be at least 1"));
    }
    let w = pooled.pooled();
    let g = gram(k, w, w)?;
    let n = w.n();
    let stats = (0..=permutations)
        .into_par_iter()
        .map(|p| {
            let weights: Vec<f64> = permutation_labels(pooled.n_x(), n, seed, p)
                .into_iter()
                .map(|in_x| pooled.weight(in_x))
                .collect();
            let wv = nalgebra::DVector::from_vec(weights);
            let q = wv.dot(&(&g * &wv));
            q.max(0.0).sqrt()
        })
        .collect();
    Ok(stats)
}

/// Squared permuted statistic split as `Ψ_σ² = c·U + R` with
/// `c = (n_X − 1)(n_Y − 1)/(n_X n_Y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UstatDecomposition {
    pub u: f64,
    pub r: f64,
    pub weight: f64,
}

impl UstatDecomposition {
    pub fn squared_statistic(&self) -> f64 {
        self.weight * self.u + self.r
    }
}

/// U-statistic and remainder of the statistic computed on the pooled data
/// rearranged by `sigma` (position `i` receives `W[sigma[i]]`; the first `n_X`
/// positions form the X sample).
///
/// The kernel is `k̃(a, b) = φ(a)·φ(b)`. Sums over distinct index pairs are
/// expanded through the feature sums, so the cost is `O(nℓ)` after the
/// features are computed.
pub fn ustat_decomposition(
    pooled: &PooledData,
    sigma: &[usize],
    map: &dyn FeatureMap,
) -> Result<UstatDecomposition> {
    let (n, n_x, n_y) = (pooled.n(), pooled.n_x(), pooled.n_y());
    if n_x < 2 || n_y < 2 {
        return Err(invalid(format!(
            "U-statistic needs at least two points per sample (n_x = {n_x}, n_y = {n_y})"
        )));
    }
    if sigma.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sigma.len(),
        });
    }
    let mut seen = vec![false; n];
    for &s in sigma {
        if s >= n || std::mem::replace(&mut seen[s], true) {
            return Err(invalid("sigma is not a permutation of 0..n"));
        }
    }
    check_map(map, pooled.pooled().d())?;
    let l = map.dim();
    let w = pooled.pooled();

    let mut sum_a = vec![0.0; l];
    let mut sum_b = vec![0.0; l];
    let (mut sq_a, mut sq_b) = (0.0, 0.0);
    let mut f = vec![0.0; l];
    for (pos, &src) in sigma.iter().enumerate() {
        map.apply_into(w.row(src), &mut f);
        let (sum, sq) = if pos < n_x {
            (&mut sum_a, &mut sq_a)
        } else {
            (&mut sum_b, &mut sq_b)
        };
        sum.iter_mut().zip(&f).for_each(|(s, v)| *s += v);
        *sq += dot(&f, &f);
    }
    let (nx, ny) = (n_x as f64, n_y as f64);
    let aa = dot(&sum_a, &sum_a);
    let bb = dot(&sum_b, &sum_b);
    let ab = dot(&sum_a, &sum_b);
    let aa_off = aa - sq_a;
    let bb_off = bb - sq_b;

    // i ≠ i', j ≠ j'
    let u_sum = aa_off * ny * (ny - 1.0) - 2.0 * ab * (nx - 1.0) * (ny - 1.0)
        + bb_off * nx * (nx - 1.0);
    let u = u_sum / (nx * (nx - 1.0) * ny * (ny - 1.0));
    // i = i', j ≠ j'
    let r1 = ny * (ny - 1.0) * sq_a - 2.0 * (ny - 1.0) * ab + nx * bb_off;
    // i ≠ i', j = j'
    let r2 = ny * aa_off - 2.0 * (nx - 1.0) * ab + nx * (nx - 1.0) * sq_b;
    // i = i', j = j'
    let r3 = ny * sq_a - 2.0 * ab + nx * sq_b;
    let r = (r1 + r2 + r3) / (nx * nx * ny * ny);
    Ok(UstatDecomposition {
        u,
        r,
        weight: (nx - 1.0) * (ny - 1.0) / (nx * ny),
    })
}
