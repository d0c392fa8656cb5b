//! Error functionals and spectral diagnostics.
//!
//! The unsupervised errors depend on an estimate only through `U U^T`; the
//! supervised errors depend on `U` itself.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Dataset, GroundTruthModel, sample_test_set};
use crate::spectral::{eig_symmetric, SpectralDecomposition};

/// How an out-of-sample value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorSource {
    AnalyticTrace,
    SpectralFormula,
    MonteCarlo,
}

impl ErrorSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorSource::AnalyticTrace => "analytic-trace",
            ErrorSource::SpectralFormula => "spectral-formula",
            ErrorSource::MonteCarlo => "monte-carlo",
        }
    }
}

impl fmt::Display for ErrorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic-trace" => Ok(ErrorSource::AnalyticTrace),
            "spectral-formula" => Ok(ErrorSource::SpectralFormula),
            "monte-carlo" => Ok(ErrorSource::MonteCarlo),
            other => Err(Error::Schema(format!("unknown e_out_source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub e_in: f64,
    pub e_in_s: Option<f64>,
    pub e_out: f64,
    pub e_out_source: ErrorSource,
}

/// `(1/n) ||(I - U U^T) X||_F^2`, which equals
/// `tr((I - UU^T) C_hat (I - UU^T)^T)` with `C_hat = XX^T/n`.
pub fn unsup_in_sample(u: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let n = x.ncols().max(1) as f64;
    (x - u * (u.transpose() * x)).norm_squared() / n
}

/// Same functional on the restricted coordinates.
pub fn unsup_in_sample_s(u_s: &DMatrix<f64>, x_s: &DMatrix<f64>) -> f64 {
    unsup_in_sample(u_s, x_s)
}

/// `tr((I - U U^T) C (I - U U^T)^T)`.
pub fn unsup_out_of_sample_trace(u: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let d = c.nrows();
    let resid = DMatrix::<f64>::identity(d, d) - u * u.transpose();
    (&resid * c * resid.transpose()).trace()
}

/// Empirical counterpart of the trace formula over test columns.
pub fn unsup_out_of_sample_mc(u: &DMatrix<f64>, x_test: &DMatrix<f64>) -> f64 {
    unsup_in_sample(u, x_test)
}

/// Out-of-sample error of the top-`k` sample-eigenvector estimate written in
/// eigen-coordinates:
/// `sum_i lambda_i - sum_{i < k} sum_j lambda_S^(j) <psi_S^(j), psi_hat^(i)>^2`.
///
/// `true_spectrum` is the full spectrum of `C_x`, `true_restricted` the
/// decomposition of `C_{x,S}` and `sample` that of the restricted sample
/// covariance.
pub fn unsup_out_of_sample_spectral(
    true_spectrum: &DVector<f64>,
    true_restricted: &SpectralDecomposition,
    sample: &SpectralDecomposition,
    k: usize,
) -> Result<f64> {
    let p = true_restricted.dim();
    if sample.dim() != p {
        return Err(Error::Parameter(format!(
            "true restricted decomposition is {p}-dimensional, sample is {}",
            sample.dim()
        )));
    }
    if k > p {
        return Err(Error::Parameter(format!("k={k} exceeds p={p}")));
    }
    let captured: f64 = alignment_coefficients(true_restricted, sample, k)?
        .iter()
        .zip(true_restricted.eigenvalues.iter())
        .map(|(a, l)| a * l)
        .sum();
    Ok(true_spectrum.sum() - captured)
}

/// `(1/n) sum ||z - U^T x||^2` over every sample of `data`.
pub fn sup_in_sample(u: &DMatrix<f64>, data: &Dataset) -> Result<f64> {
    let z = data.targets()?;
    Ok(sup_error_on(u, &data.x, z))
}

/// Mean of `||z - U^T x||^2` over paired columns.
pub fn sup_error_on(u: &DMatrix<f64>, x: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    let n = x.ncols().max(1) as f64;
    (z - u.transpose() * x).norm_squared() / n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupEval {
    /// `m - 2 tr(U^T U_m) + tr(U^T C_x U)`.
    Analytic,
    MonteCarlo { n_test: usize, seed: u64 },
}

pub fn sup_out_of_sample(u: &DMatrix<f64>, model: &GroundTruthModel, mode: SupEval) -> f64 {
    match mode {
        SupEval::Analytic => {
            let m = model.latent_dim() as f64;
            let cross = (u.transpose() * model.basis()).trace();
            let quad = (u.transpose() * model.true_covariance() * u).trace();
            m - 2.0 * cross + quad
        }
        SupEval::MonteCarlo { n_test, seed } => {
            let (x, z) = sample_test_set(model, n_test, seed);
            sup_error_on(u, &x, &z)
        }
    }
}

/// Absolute tolerance under which a step counts as "kept".
pub const MONOTONE_TIE_TOL: f64 = 1e-12;

/// Fraction of consecutive steps that did not increase the error.
pub fn monotonicity_metric(errors: &[f64]) -> Result<f64> {
    if errors.len() < 2 {
        return Err(Error::Parameter("monotonicity needs at least two values".into()));
    }
    let steps = errors.len() - 1;
    let kept = errors
        .windows(2)
        .filter(|w| w[1] - w[0] <= MONOTONE_TIE_TOL)
        .count();
    Ok(kept as f64 / steps as f64)
}

pub const INTERLACING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interlacing {
    pub holds: bool,
    /// Largest violation of any interlacing inequality; non-positive when all hold.
    pub worst_violation: f64,
    /// Index of the row/column deleted from the larger matrix.
    pub removed: usize,
}

fn find_removed_index(large: &DMatrix<f64>, small: &DMatrix<f64>) -> Option<usize> {
    let p = small.nrows();
    let scale = large.amax().max(1.0);
    (0..=p).find(|&r| {
        let keep: Vec<usize> = (0..=p).filter(|&i| i != r).collect();
        let sub = large.select_rows(keep.iter()).select_columns(keep.iter());
        (sub - small).amax() <= 1e-12 * scale
    })
}

/// Check `mu_{j+1} <= lambda_j <= mu_j` between the sorted eigenvalues `mu`
/// of a symmetric `(p+1)×(p+1)` matrix and `lambda` of its principal p×p
/// submatrix.
pub fn interlacing_check(large: &DMatrix<f64>, small: &DMatrix<f64>) -> Result<Interlacing> {
    if !small.is_square() || !large.is_square() || large.nrows() != small.nrows() + 1 {
        return Err(Error::NotPrincipalSubmatrix);
    }
    let removed = find_removed_index(large, small).ok_or(Error::NotPrincipalSubmatrix)?;
    let mu = eig_symmetric(large)?.eigenvalues;
    let lambda = eig_symmetric(small)?.eigenvalues;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..lambda.len() {
        worst = worst.max(mu[j + 1] - lambda[j]);
        worst = worst.max(lambda[j] - mu[j]);
    }
    if lambda.is_empty() {
        worst = 0.0;
    }
    Ok(Interlacing {
        holds: worst <= INTERLACING_TOL,
        worst_violation: worst,
        removed,
    })
}

/// `alpha^(j) = sum_{i < k} <psi^(j), psi_hat^(i)>^2` for each true eigenvector.
pub fn alignment_coefficients(
    true_decomp: &SpectralDecomposition,
    sample_decomp: &SpectralDecomposition,
    k: usize,
) -> Result<DVector<f64>> {
    let p = true_decomp.dim();
    if sample_decomp.dim() != p || k > p {
        return Err(Error::Parameter(format!(
            "inconsistent dimensions: true {p}, sample {}, k {k}",
            sample_decomp.dim()
        )));
    }
    let inner = true_decomp.eigenvectors.transpose() * sample_decomp.leading(k);
    Ok(DVector::from_fn(p, |j, _| inner.row(j).norm_squared()))
}
