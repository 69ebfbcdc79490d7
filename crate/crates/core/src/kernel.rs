//! Datasets, the Gaussian kernel, Gram matrices and the median-heuristic
//! bandwidth.

use nalgebra::DMatrix;
use rand::seq::index;

use crate::error::{invalid, Error, Result};
use crate::rng::rng_from;

/// Default number of points used to estimate the median inter-point distance.
pub const DEFAULT_MEDIAN_SUBSET: usize = 2000;

/// An `n × d` matrix of finite observations, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    /// Build from a flat row-major buffer.
    pub fn from_flat(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("dataset has no rows"));
        }
        if d == 0 {
            return Err(Error::Empty("dataset has no columns"));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("dataset has no rows"))?;
        let d = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(data, rows.len(), d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows at `indices`, in that order (duplicates allowed).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(invalid(format!("row index {i} out of range 0..{}", self.n)));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::from_flat(data, indices.len(), self.d)
    }

    /// `self` stacked above `other`.
    pub fn stack(&self, other: &Self) -> Result<Self> {
        check_dims(self.d, other.d)?;
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            data,
            n: self.n + other.n,
            d: self.d,
        })
    }

    pub(crate) fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.data)
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Gaussian kernel `κ(x, y) = exp(−‖x − y‖² / (2h²))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianKernel {
    bandwidth: f64,
    neg_inv_two_h2: f64,
}

impl GaussianKernel {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(invalid(format!("bandwidth must be positive and finite, got {bandwidth}")));
        }
        Ok(Self {
            bandwidth,
            neg_inv_two_h2: -1.0 / (2.0 * bandwidth * bandwidth),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Checked evaluation.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dims(x.len(), y.len())?;
        for (col, v) in x.iter().chain(y).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: col / x.len(),
                    col: col % x.len(),
                });
            }
        }
        Ok(self.value(x, y))
    }

    /// Unchecked evaluation for validated inputs.
    #[inline]
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.of_sq_dist(sq_dist(x, y))
    }

    #[inline]
    pub(crate) fn of_sq_dist(&self, d2: f64) -> f64 {
        (d2 * self.neg_inv_two_h2).exp()
    }
}

/// Kernel matrix `K[i][j] = κ(a_i, b_j)`.
///
/// Squared distances use `‖x‖² + ‖y‖² − 2x·y` (clamped at zero) so the work is
/// dominated by one matrix product. When `a` and `b` are the same dataset the
/// result is exactly symmetric with a unit diagonal.
pub fn gram(k: &GaussianKernel, a: &Dataset, b: &Dataset) -> Result<DMatrix<f64>> {
    check_dims(a.d(), b.d())?;
    if std::ptr::eq(a, b) || a == b {
        return Ok(gram_self(k, a));
    }
    let am = a.to_matrix();
    let bm = b.to_matrix();
    let cross = &am * bm.transpose();
    let na: Vec<f64> = a.rows().map(|r| r.iter().map(|v| v * v).sum()).collect();
    let nb: Vec<f64> = b.rows().map(|r| r.iter().map(|v| v * v).sum()).collect();
    Ok(DMatrix::from_fn(a.n(), b.n(), |i, j| {
        k.of_sq_dist((na[i] + nb[j] - 2.0 * cross[(i, j)]).max(0.0))
    }))
}

fn gram_self(k: &GaussianKernel, a: &Dataset) -> DMatrix<f64> {
    let am = a.to_matrix();
    let inner = &am * am.transpose();
    let n = a.n();
    let mut out = DMatrix::from_element(n, n, 1.0);
    for j in 0..n {
        for i in 0..j {
            let d2 = (inner[(i, i)] + inner[(j, j)] - 2.0 * inner[(i, j)]).max(0.0);
            let v = k.of_sq_dist(d2);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Median of the pairwise Euclidean distances among at most `subset_size`
/// points drawn without replacement from `w`.
///
/// When `subset_size >= n` every point is used and no randomness is consumed.
/// Even pair counts return the midpoint of the two central order statistics.
pub fn median_heuristic(w: &Dataset, subset_size: usize, seed: u64) -> Result<f64> {
    if w.n() < 2 {
        return Err(Error::Degenerate(
            "median heuristic needs at least two points".into(),
        ));
    }
    if subset_size < 2 {
        return Err(invalid("median heuristic subset size must be at least 2"));
    }
    let idx: Vec<usize> = if subset_size >= w.n() {
        (0..w.n()).collect()
    } else {
        let mut rng = rng_from(seed, &[]);
        index::sample(&mut rng, w.n(), subset_size).into_vec()
    };
    let m = idx.len();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            dists.push(sq_dist(w.row(i), w.row(j)).sqrt());
        }
    }
    let h = median_in_place(&mut dists);
    if !(h > 0.0) {
        if dists.iter().all(|&v| v == 0.0) {
            return Err(Error::Degenerate(
                "all pairwise distances are zero; cannot choose a bandwidth".into(),
            ));
        }
        return Err(Error::Degenerate(
            "median pairwise distance is zero (more than half the points coincide)".into(),
        ));
    }
    Ok(h)
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let len = v.len();
    let mid = len / 2;
    let (left, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if len % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}
