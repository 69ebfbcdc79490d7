//! Finite-dimensional feature maps: the Nyström projection and random
//! Fourier features.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::kernel::{check_dims, gram, GaussianKernel};
use crate::landmarks::LandmarkSet;
use crate::rng::rng_from;

/// Default relative eigenvalue cutoff for the pseudo-inverse.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// A map from `d`-dimensional points to `ℓ`-dimensional features.
pub trait FeatureMap: Send + Sync {
    /// Output dimension `ℓ`.
    fn dim(&self) -> usize;

    /// Expected input dimension `d`.
    fn input_dim(&self) -> usize;

    /// Write the features of `x` into `out` (`x.len() == input_dim()`,
    /// `out.len() == dim()`).
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// Features of a block of row-major points; `out` is row-major with `dim()`
    /// columns.
    fn apply_batch(&self, rows: &[f64], out: &mut [f64]) {
        let (d, l) = (self.input_dim(), self.dim());
        for (x, o) in rows.chunks_exact(d).zip(out.chunks_exact_mut(l)) {
            self.apply_into(x, o);
        }
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.input_dim(), x.len())?;
        if let Some(col) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col });
        }
        let mut out = vec![0.0; self.dim()];
        self.apply_into(x, &mut out);
        Ok(out)
    }
}

/// `φ̃(x) = (K_ℓ^†)^{1/2} [κ(z₁,x), …, κ(z_ℓ,x)]`.
#[derive(Clone, Debug)]
pub struct NystromMap {
    landmarks: LandmarkSet,
    kernel: GaussianKernel,
    transform: DMatrix<f64>,
    rank: usize,
    rank_tolerance: f64,
}

impl NystromMap {
    pub fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }

    pub fn kernel(&self) -> &GaussianKernel {
        &self.kernel
    }

    /// The symmetric PSD matrix `(K_ℓ^†)^{1/2}`.
    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    /// Numerical rank of the landmark Gram matrix.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    fn kernel_column(&self, x: &[f64], out: &mut [f64]) {
        for (o, z) in out.iter_mut().zip(self.landmarks.points.rows()) {
            *o = self.kernel.value(z, x);
        }
    }
}

/// Factorize the landmark Gram matrix and build the Nyström feature map.
pub fn build_nystrom(
    landmarks: LandmarkSet,
    kernel: GaussianKernel,
    rank_tolerance: f64,
) -> Result<NystromMap> {
    if landmarks.is_empty() {
        return Err(invalid("Nyström map needs at least one landmark"));
    }
    if !(rank_tolerance.is_finite() && rank_tolerance >= 0.0) {
        return Err(invalid(format!("rank tolerance must be nonnegative, got {rank_tolerance}")));
    }
    let kl = gram(&kernel, &landmarks.points, &landmarks.points)?;
    if let Some(pos) = kl.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos % kl.nrows(),
            col: pos / kl.nrows(),
        });
    }
    let (transform, rank) = crate::linalg::pinv_sqrt(&kl, rank_tolerance);
    Ok(NystromMap {
        landmarks,
        kernel,
        transform,
        rank,
        rank_tolerance,
    })
}

impl FeatureMap for NystromMap {
    fn dim(&self) -> usize {
        self.landmarks.len()
    }

    fn input_dim(&self) -> usize {
        self.landmarks.points.d()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut kz = vec![0.0; self.dim()];
        self.kernel_column(x, &mut kz);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.transform.row(i).iter().zip(&kz).map(|(t, k)| t * k).sum();
        }
    }

    fn apply_batch(&self, rows: &[f64], out: &mut [f64]) {
        let (d, l) = (self.input_dim(), self.dim());
        let count = rows.len() / d;
        // Column c of `kz` is k_Z(x_c); T·kz stored column-major is the
        // row-major feature block.
        let mut kz = DMatrix::<f64>::zeros(l, count);
        for (c, x) in rows.chunks_exact(d).enumerate() {
            self.kernel_column(x, kz.column_mut(c).as_mut_slice());
        }
        let feats = &self.transform * kz;
        out[..l * count].copy_from_slice(feats.as_slice());
    }
}

/// Random Fourier features with paired cosine/sine components:
/// `φ(x) = √(2/ℓ) [cos(ω₁ᵀx), sin(ω₁ᵀx), …]`, `ω ~ N(0, h⁻² I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RffMap {
    frequencies: Vec<f64>,
    d: usize,
    ell: usize,
    scale: f64,
}

impl RffMap {
    /// Frequencies as an `(ℓ/2) × d` row-major buffer.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

pub fn build_rff(d: usize, ell: usize, kernel: &GaussianKernel, seed: u64) -> Result<RffMap> {
    if ell < 2 || !ell.is_multiple_of(2) {
        return Err(invalid(format!(
            "random Fourier features need an even feature count >= 2, got {ell}"
        )));
    }
    if d == 0 {
        return Err(invalid("input dimension must be at least 1"));
    }
    let mut rng = rng_from(seed, &[]);
    let inv_h = 1.0 / kernel.bandwidth();
    let frequencies = (0..(ell / 2) * d)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * inv_h)
        .collect();
    Ok(RffMap {
        frequencies,
        d,
        ell,
        scale: (2.0 / ell as f64).sqrt(),
    })
}

impl FeatureMap for RffMap {
    fn dim(&self) -> usize {
        self.ell
    }

    fn input_dim(&self) -> usize {
        self.d
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (omega, pair) in self.frequencies.chunks_exact(self.d).zip(out.chunks_exact_mut(2)) {
            let t: f64 = omega.iter().zip(x).map(|(a, b)| a * b).sum();
            let (s, c) = t.sin_cos();
            pair[0] = self.scale * c;
            pair[1] = self.scale * s;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
