//! Dense spectral kernels and the orthonormality projections shared by every
//! estimator.
//!
//! Matrices are nalgebra types; the SVD and symmetric eigensolver are faer's
//! (nalgebra 0.33's SVD loses accuracy on clustered singular values). On top
//! of the raw routines this module fixes ordering (descending) and a sign
//! convention so that repeated calls, and therefore whole PGD trajectories,
//! are reproducible.

use faer::{Mat, MatRef, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance deciding the numerical rank of a PSD matrix.
pub const RANK_TOL: f64 = 1e-10;

/// Singular values below `PINV_TOL * sigma_max` are treated as zero.
pub const PINV_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-9;

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Columns aligned with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// Count of eigenvalues above `RANK_TOL * max(lambda_1, 1)`.
    pub rank: usize,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// First `k` eigenvectors, i.e. those with the `k` largest eigenvalues.
    pub fn leading(&self, k: usize) -> DMatrix<f64> {
        self.eigenvectors.columns(0, k).into_owned()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        v * DMatrix::from_diagonal(&self.eigenvalues) * v.transpose()
    }
}

/// Thin SVD `W = left * diag(values) * right^T` with `values` descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// p×m, orthonormal columns.
    pub left: DMatrix<f64>,
    pub values: DVector<f64>,
    /// m×m orthogonal.
    pub right: DMatrix<f64>,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.with_values(&self.values)
    }

    pub fn with_values(&self, values: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.left.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= values[j];
        }
        scaled * self.right.transpose()
    }
}

/// Softness of the orthonormality constraint `|sigma_i^2 - 1| <= alpha`.
///
/// `alpha = 0` is the hard constraint, `alpha = +inf` removes it. With
/// `floor_mode` the lower threshold never drops below `1e-8`, which keeps
/// the iterate full rank in the unsupervised descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintLevel {
    pub alpha: f64,
    pub floor_mode: bool,
}

impl ConstraintLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_nan() || alpha < 0.0 {
            return Err(Error::Parameter(format!(
                "softness alpha must be >= 0, got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            floor_mode: false,
        })
    }

    pub fn hard() -> Self {
        Self {
            alpha: 0.0,
            floor_mode: false,
        }
    }

    pub fn unconstrained() -> Self {
        Self {
            alpha: f64::INFINITY,
            floor_mode: false,
        }
    }

    pub fn with_floor(self) -> Self {
        Self {
            floor_mode: true,
            ..self
        }
    }

    pub fn is_hard(&self) -> bool {
        self.alpha == 0.0
    }

    pub fn is_unconstrained(&self) -> bool {
        self.alpha.is_infinite() && !self.floor_mode
    }

    pub fn tau_low(&self) -> f64 {
        let floor = if self.floor_mode { 1e-16 } else { 0.0 };
        (1.0 - self.alpha).max(floor).sqrt()
    }

    pub fn tau_high(&self) -> f64 {
        (1.0 + self.alpha).sqrt()
    }

    /// Whether every singular value of `w` satisfies the constraint up to `tol`.
    pub fn is_feasible(&self, w: &DMatrix<f64>, tol: f64) -> bool {
        let s = singular_values(w);
        let (lo, hi) = (self.tau_low(), self.tau_high());
        s.iter()
            .all(|&v| v >= lo - tol && (hi.is_infinite() || v <= hi + tol))
    }
}

fn check_symmetric(c: &DMatrix<f64>) -> Result<()> {
    if !c.is_square() {
        return Err(Error::Contract(format!(
            "expected a square matrix, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    let asym = (c - c.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Contract(format!(
            "matrix is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}

/// Flip each column so its largest-magnitude entry is non-negative.
/// Returns the applied signs.
fn canonical_signs(m: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.ncols());
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = if v < 0.0 { -1.0 } else { 1.0 };
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
        signs.push(sign);
    }
    signs
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn not_converged(what: &str, m: &DMatrix<f64>) -> Error {
    Error::Contract(format!(
        "{what} did not converge on a {}x{} matrix (non-finite entries?)",
        m.nrows(),
        m.ncols()
    ))
}

/// Unsorted symmetric eigenpairs of the symmetrized input.
fn raw_eigh(c: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = c.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let sym = to_faer(&((c + c.transpose()) * 0.5));
    let eig = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| not_converged("symmetric eigensolver", c))?;
    let values = (0..n).map(|i| eig.S().column_vector()[i]).collect();
    Ok((values, from_faer(eig.U())))
}

pub fn eig_symmetric(c: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    check_symmetric(c)?;
    let (raw_values, raw_vectors) = raw_eigh(c)?;
    let order = descending_order(&raw_values);
    let n = order.len();
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| raw_values[i]));
    let mut eigenvectors = DMatrix::from_fn(n, n, |r, j| raw_vectors[(r, order[j])]);
    canonical_signs(&mut eigenvectors);
    let top = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cutoff = RANK_TOL * top.max(1.0);
    let rank = eigenvalues.iter().filter(|&&l| l > cutoff).count();
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        rank,
    })
}

/// Sorted, sign-fixed SVD of an arbitrary matrix, thin in the smaller side.
fn svd_sorted(w: &DMatrix<f64>) -> Result<ThinSvd> {
    let (rows, cols) = w.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Ok(ThinSvd {
            left: DMatrix::zeros(rows, 0),
            values: DVector::zeros(0),
            right: DMatrix::zeros(cols, 0),
        });
    }
    let svd = to_faer(w).thin_svd().map_err(|_| not_converged("SVD", w))?;
    let raw: Vec<f64> = (0..r).map(|i| svd.S().column_vector()[i]).collect();
    let (u, v) = (svd.U(), svd.V());
    let order = descending_order(&raw);
    let values = DVector::from_iterator(r, order.iter().map(|&i| raw[i]));
    let mut left = DMatrix::from_fn(rows, r, |i, j| u[(i, order[j])]);
    let mut right = DMatrix::from_fn(cols, r, |i, j| v[(i, order[j])]);
    let signs = canonical_signs(&mut left);
    for (j, s) in signs.into_iter().enumerate() {
        if s < 0.0 {
            right.column_mut(j).neg_mut();
        }
    }
    Ok(ThinSvd {
        left,
        values,
        right,
    })
}

pub fn thin_svd(w: &DMatrix<f64>) -> Result<ThinSvd> {
    if w.nrows() < w.ncols() {
        return Err(Error::Contract(format!(
            "thin SVD needs a tall matrix, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    svd_sorted(w)
}

/// Singular values, descending. Non-finite input yields NaNs.
pub fn singular_values(w: &DMatrix<f64>) -> DVector<f64> {
    let r = w.nrows().min(w.ncols());
    if r == 0 {
        return DVector::zeros(0);
    }
    match to_faer(w).singular_values() {
        Ok(mut s) => {
            s.sort_by(|a, b| b.total_cmp(a));
            DVector::from_vec(s)
        }
        Err(_) => DVector::from_element(r, f64::NAN),
    }
}

pub fn pseudoinverse(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, n) = x.shape();
    if p == 0 || n == 0 {
        return DMatrix::zeros(n, p);
    }
    let Ok(svd) = svd_sorted(x) else {
        return DMatrix::from_element(n, p, f64::NAN);
    };
    let smax = svd.values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(n, p);
    }
    let cutoff = PINV_TOL * smax;
    let mut v_scaled = svd.right.clone();
    for (j, mut col) in v_scaled.column_iter_mut().enumerate() {
        let s = svd.values[j];
        if s > cutoff {
            col /= s;
        } else {
            col.fill(0.0);
        }
    }
    v_scaled * svd.left.transpose()
}

fn require_tall(w: &DMatrix<f64>) -> Result<()> {
    if w.nrows() < w.ncols() {
        return Err(Error::Contract(format!(
            "projection needs p >= m, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

/// Frobenius-nearest matrix with orthonormal columns: all singular values set to one.
pub fn project_hard(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_tall(w)?;
    let svd = svd_sorted(w)?;
    Ok(&svd.left * svd.right.transpose())
}

/// Frobenius-nearest matrix whose singular values lie in `[tau_low, tau_high]`.
pub fn project_soft(w: &DMatrix<f64>, level: ConstraintLevel) -> Result<DMatrix<f64>> {
    require_tall(w)?;
    if level.is_unconstrained() {
        return Ok(w.clone());
    }
    let (lo, hi) = (level.tau_low(), level.tau_high());
    if level.alpha > 0.0 && strictly_inside(w, lo, hi) {
        return Ok(w.clone());
    }
    let svd = svd_sorted(w)?;
    let clamped = svd.values.map(|s| s.clamp(lo, hi));
    Ok(svd.with_values(&clamped))
}

/// Cheap test through the m×m Gram matrix: all singular values sit inside the
/// box with a relative margin, so the projection is the identity.
fn strictly_inside(w: &DMatrix<f64>, lo: f64, hi: f64) -> bool {
    const MARGIN: f64 = 1e-6;
    let Ok((eig, _)) = raw_eigh(&(w.transpose() * w)) else {
        return false;
    };
    eig.iter().all(|&s2| {
        s2 >= lo * lo * (1.0 + MARGIN) + MARGIN * f64::EPSILON.sqrt()
            && (hi.is_infinite() || s2 <= hi * hi * (1.0 - MARGIN))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, stream};
    use approx::assert_abs_diff_eq;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        gaussian_matrix(&mut stream(seed, 0), rows, cols, 1.0)
    }

    #[test]
    fn eig_identity_and_rank_one() {
        let d = eig_symmetric(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(d.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(d.rank, 3);

        let v = DVector::from_vec(vec![2.0, 0.0, 0.0, 0.0]);
        let d = eig_symmetric(&(&v * v.transpose())).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 4.0, epsilon = 1e-12);
        assert!(d.eigenvalues.iter().skip(1).all(|l| l.abs() < 1e-12));
        assert_eq!(d.rank, 1);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eig_symmetric(&c), Err(Error::Contract(_))));
    }

    #[test]
    fn eig_rank_of_wide_sample_covariance() {
        let mut x = random(10, 6, 3);
        let mean = x.column_mean();
        for mut c in x.column_iter_mut() {
            c -= &mean;
        }
        let c = &x * x.transpose() / 6.0;
        let d = eig_symmetric(&c).unwrap();
        assert!(d.rank <= 5);
        assert_eq!(d.rank, 5);
        assert!((d.reconstruct() - &c).norm() <= 1e-8 * c.norm());
        let trace: f64 = d.eigenvalues.iter().sum();
        assert!((trace - c.trace()).abs() <= 1e-8 * c.trace());
    }

    #[test]
    fn svd_shapes_and_cases() {
        let q = project_hard(&random(6, 3, 1)).unwrap();
        let s = thin_svd(&q).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let z = thin_svd(&DMatrix::zeros(4, 2)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));

        let mut w = DMatrix::zeros(4, 2);
        w[(0, 0)] = 2.0;
        w[(1, 1)] = 3.0;
        let s = thin_svd(&w).unwrap();
        assert_abs_diff_eq!(s.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.values[1], 2.0, epsilon = 1e-14);

        assert!(thin_svd(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn svd_sign_convention() {
        let s = thin_svd(&random(7, 3, 11)).unwrap();
        for col in s.left.column_iter() {
            let (i, _) = col.iamax_full();
            assert!(col[(i, 0)] >= 0.0);
        }
    }

    #[test]
    fn pinv_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let inv = a.clone().try_inverse().unwrap();
        assert!((pseudoinverse(&a) - inv).amax() < 1e-8);

        let z = pseudoinverse(&DMatrix::zeros(3, 5));
        assert_eq!(z.shape(), (5, 3));
        assert_eq!(z.amax(), 0.0);

        let x = random(6, 10, 5);
        let right = &x * pseudoinverse(&x);
        assert!((right - DMatrix::<f64>::identity(6, 6)).amax() < 1e-8);
    }

    #[test]
    fn hard_projection_cases() {
        let q = project_hard(&random(5, 2, 9)).unwrap();
        assert!((project_hard(&q).unwrap() - &q).amax() < 1e-10);
        assert!((project_hard(&(&q * 2.0)).unwrap() - &q).amax() < 1e-10);
        assert!(project_hard(&DMatrix::zeros(2, 3)).is_err());
        // degenerate zero input still yields orthonormal columns
        let z = project_hard(&DMatrix::zeros(4, 2)).unwrap();
        assert!((z.transpose() * &z - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn soft_projection_thresholds() {
        let level = ConstraintLevel::new(0.21).unwrap();
        assert_abs_diff_eq!(level.tau_high(), 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(level.tau_low(), 0.79f64.sqrt(), epsilon = 1e-15);

        let floored = ConstraintLevel::unconstrained().with_floor();
        assert_abs_diff_eq!(floored.tau_low(), 1e-8, epsilon = 1e-20);
        assert!(!floored.is_unconstrained());
        assert!(ConstraintLevel::new(-1.0).is_err());
    }

    #[test]
    fn soft_projection_clamps_singular_values() {
        // W = Q diag(1.5, 0.5) R^T with known factors
        let q = project_hard(&random(5, 2, 21)).unwrap();
        let r = project_hard(&random(2, 2, 22)).unwrap();
        let w = &q * DMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 0.5])) * r.transpose();
        let out = project_soft(&w, ConstraintLevel::new(0.21).unwrap()).unwrap();
        let s = singular_values(&out);
        assert_abs_diff_eq!(s[0], 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.888_819_441_731_558_9, epsilon = 1e-12);
    }

    #[test]
    fn soft_projection_limits() {
        let w = random(6, 3, 4);
        let hard = project_hard(&w).unwrap();
        let soft0 = project_soft(&w, ConstraintLevel::hard()).unwrap();
        assert!((hard - soft0).amax() < 1e-10);
        let id = project_soft(&w, ConstraintLevel::unconstrained()).unwrap();
        assert_eq!(id, w);
    }

    #[test]
    fn svd_is_accurate_on_clustered_values() {
        for seed in 0..20 {
            let q = project_hard(&random(6, 3, 100 + seed)).unwrap();
            let r = project_hard(&random(3, 3, 200 + seed)).unwrap();
            let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.5f64.sqrt(), 1.5f64.sqrt() - 4e-16, 0.72]));
            let w = &q * s * r.transpose();
            let svd = thin_svd(&w).unwrap();
            assert!((svd.reconstruct() - &w).amax() < 1e-12);
            let level = ConstraintLevel::new(0.5).unwrap();
            let once = project_soft(&w, level).unwrap();
            assert!((project_soft(&once, level).unwrap() - &once).amax() < 1e-12);
        }
    }
}
