//! CSV ingestion and seeded synthetic generators.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{file_error, invalid, Error, Result};
use crate::kernel::{check_dims, Dataset};
use crate::rng::rng_from;

/// Read a comma-separated numeric file, one observation per row.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(file_error(path))?;
    parse_csv(&text, has_header).map_err(|e| match e {
        Error::Csv { line, message, .. } => Error::Csv {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other,
    })
}

/// Parse CSV text; errors carry an empty path.
pub fn parse_csv(text: &str, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let err = |line: usize, message: String| Error::Csv {
        path: Default::default(),
        line,
        message,
    };
    let mut data = Vec::new();
    let mut d = None;
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(n + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match d {
            None => d = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(err(
                    line,
                    format!("expected {d} columns, found {}", record.len()),
                ))
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| err(line, format!("column {}: cannot parse '{cell}' as a number", col + 1)))?;
            if !v.is_finite() {
                return Err(err(line, format!("column {}: non-finite value '{cell}'", col + 1)));
            }
            data.push(v);
        }
        n += 1;
    }
    let d = d.ok_or(Error::Empty("CSV file has no data rows"))?;
    Dataset::from_flat(data, n, d)
}

/// Write a dataset as CSV, optionally with a header row.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset, header: Option<&[String]>) -> Result<()> {
    let path = path.as_ref();
    let text = to_csv_string(data, header)?;
    File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(file_error(path))
}

pub fn to_csv_string(data: &Dataset, header: Option<&[String]>) -> Result<String> {
    let mut out = String::new();
    if let Some(h) = header {
        check_dims(data.d(), h.len())?;
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in data.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Generator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SyntheticFamily {
    /// `N_d(0, Σ(ρ))` with unit diagonal and constant off-diagonal `ρ`.
    CorrelatedGaussian { d: usize, rho: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub family: SyntheticFamily,
    pub n: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn correlated_gaussian(d: usize, rho: f64, n: usize, seed: u64) -> Self {
        Self {
            family: SyntheticFamily::CorrelatedGaussian { d, rho },
            n,
            seed,
        }
    }
}

fn check_equicorrelation(d: usize, rho: f64) -> Result<()> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let lower = if d > 1 { -1.0 / (d as f64 - 1.0) } else { -1.0 };
    if !(rho > lower && rho < 1.0) {
        return Err(invalid(format!(
            "rho = {rho} makes the {d}-dimensional equicorrelation matrix singular or indefinite \
             (need {lower} < rho < 1)"
        )));
    }
    Ok(())
}

/// Draw `n` i.i.d. points from `N_d(0, Σ(ρ))`.
///
/// `Σ(ρ) = (1 − ρ)I + ρ11ᵀ` has eigenvalue `1 + (d − 1)ρ` on `1` and `1 − ρ`
/// on its complement, so `Σ^{1/2} z = √(1 − ρ) z + (√(1 + (d − 1)ρ) − √(1 − ρ)) z̄ 1`.
pub fn sample_correlated_gaussians(spec: &SyntheticSpec) -> Result<Dataset> {
    let SyntheticFamily::CorrelatedGaussian { d, rho } = spec.family;
    check_equicorrelation(d, rho)?;
    if spec.n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let a = (1.0 - rho).sqrt();
    let b = (1.0 + (d as f64 - 1.0) * rho).sqrt() - a;
    let mut rng = rng_from(spec.seed, &[]);
    let mut data = Vec::with_capacity(spec.n * d);
    let mut z = vec![0.0; d];
    for _ in 0..spec.n {
        z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let mean = z.iter().sum::<f64>() / d as f64;
        data.extend(z.iter().map(|v| a * v + b * mean));
    }
    Dataset::from_flat(data, spec.n, d)
}

/// Draw `n` rows from the mixture `(1 − α)·background + α·signal`.
///
/// Each row picks the signal pool with probability `alpha_mix`; rows are then
/// taken without replacement from a seeded shuffle of the chosen pool.
pub fn sample_mixture(
    background: &Dataset,
    signal: &Dataset,
    alpha_mix: f64,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    check_dims(background.d(), signal.d())?;
    if !(0.0..=1.0).contains(&alpha_mix) {
        return Err(invalid(format!("alpha_mix must lie in [0, 1], got {alpha_mix}")));
    }
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let mut rng = rng_from(seed, &[]);
    let from_signal: Vec<bool> = (0..n).map(|_| rng.random_bool(alpha_mix)).collect();
    let n_sig = from_signal.iter().filter(|&&s| s).count();
    let n_bg = n - n_sig;
    if n_sig > signal.n() || n_bg > background.n() {
        return Err(invalid(format!(
            "mixture needs {n_bg} background and {n_sig} signal rows without replacement, \
             but the pools hold {} and {}",
            background.n(),
            signal.n()
        )));
    }
    let mut bg_order: Vec<usize> = (0..background.n()).collect();
    let mut sig_order: Vec<usize> = (0..signal.n()).collect();
    bg_order.partial_shuffle(&mut rng, n_bg);
    sig_order.partial_shuffle(&mut rng, n_sig);
    let (mut bi, mut si) = (0, 0);
    let mut data = Vec::with_capacity(n * background.d());
    for s in from_signal {
        if s {
            data.extend_from_slice(signal.row(sig_order[si]));
            si += 1;
        } else {
            data.extend_from_slice(background.row(bg_order[bi]));
            bi += 1;
        }
    }
    Dataset::from_flat(data, n, background.d())
}
