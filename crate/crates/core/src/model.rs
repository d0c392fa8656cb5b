//! Ground-truth subspaces, synthetic datasets from the noisy linear model
//! `x = U z + eps`, and coordinate subsets.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, gaussian_matrix, Rng};
use crate::spectral::thin_svd;

/// The generative model: orthonormal `basis` (d×m) and isotropic noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthModel {
    basis: DMatrix<f64>,
    noise_std: f64,
}

impl GroundTruthModel {
    pub fn new(basis: DMatrix<f64>, noise_std: f64) -> Result<Self> {
        let (d, m) = basis.shape();
        if m == 0 || m >= d {
            return Err(Error::Parameter(format!("need 0 < m < d, got d={d}, m={m}")));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::Parameter(format!("noise std must be >= 0, got {noise_std}")));
        }
        let gram_err = (basis.transpose() * &basis - DMatrix::<f64>::identity(m, m)).amax();
        if gram_err > 1e-10 {
            return Err(Error::Parameter(format!(
                "basis columns are not orthonormal (max Gram error {gram_err:.3e})"
            )));
        }
        Ok(Self { basis, noise_std })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// `C_x = U U^T + sigma^2 I`.
    pub fn true_covariance(&self) -> DMatrix<f64> {
        let d = self.ambient_dim();
        &self.basis * self.basis.transpose()
            + DMatrix::<f64>::identity(d, d) * self.noise_std.powi(2)
    }

    /// Eigenvalues of `C_x` in descending order: `1 + sigma^2` (m times) then `sigma^2`.
    pub fn true_spectrum(&self) -> DVector<f64> {
        let (d, m) = (self.ambient_dim(), self.latent_dim());
        let s2 = self.noise_std.powi(2);
        DVector::from_fn(d, |i, _| if i < m { 1.0 + s2 } else { s2 })
    }

    /// Raw `(x, z)` draws from the population; columns are samples, nothing is centered.
    pub fn draw(&self, n: usize, rng: &mut Rng) -> (DMatrix<f64>, DMatrix<f64>) {
        let z = gaussian_matrix(rng, self.latent_dim(), n, 1.0);
        let eps = gaussian_matrix(rng, self.ambient_dim(), n, self.noise_std);
        (&self.basis * &z + eps, z)
    }
}

fn check_dims(d: usize, m: usize) -> Result<()> {
    if m == 0 || m >= d {
        return Err(Error::Parameter(format!("need 1 <= m < d, got d={d}, m={m}")));
    }
    Ok(())
}

/// First `m` columns of the order-`d` Sylvester Hadamard matrix, scaled by `1/sqrt(d)`.
pub fn make_hadamard_basis(d: usize, m: usize) -> Result<DMatrix<f64>> {
    if !d.is_power_of_two() {
        return Err(Error::Construction(format!(
            "Sylvester Hadamard construction needs d a power of two, got {d}"
        )));
    }
    check_dims(d, m)?;
    let scale = 1.0 / (d as f64).sqrt();
    // H[i][j] = (-1)^{popcount(i & j)} for the Sylvester recursion
    Ok(DMatrix::from_fn(d, m, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            scale
        } else {
            -scale
        }
    }))
}

/// `m` leading left singular vectors of a seeded d×d standard Gaussian matrix.
pub fn make_random_basis(d: usize, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_dims(d, m)?;
    let mut rng = rng::stream(seed, rng::BASIS_STREAM);
    let g = gaussian_matrix(&mut rng, d, d, 1.0);
    let svd = thin_svd(&g)?;
    Ok(svd.left.columns(0, m).into_owned())
}

/// Centered training samples with paired latent targets.
///
/// The first `n_sup` columns form the supervised split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// d×n, columns sum to zero.
    pub x: DMatrix<f64>,
    /// m×n, centered by its own sample mean when present.
    pub z: Option<DMatrix<f64>>,
    pub n_sup: usize,
    pub sample_mean: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, z: Option<DMatrix<f64>>, n_sup: usize) -> Result<Self> {
        let n = x.ncols();
        if n_sup > n {
            return Err(Error::Parameter(format!("n_sup={n_sup} exceeds n={n}")));
        }
        if let Some(z) = &z {
            if z.ncols() != n {
                return Err(Error::Parameter(format!(
                    "z has {} columns, x has {n}",
                    z.ncols()
                )));
            }
        } else if n_sup > 0 {
            return Err(Error::MissingTargets);
        }
        let (x, sample_mean) = center(x);
        Ok(Self {
            x,
            z,
            n_sup,
            sample_mean,
        })
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn ambient_dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn targets(&self) -> Result<&DMatrix<f64>> {
        self.z.as_ref().ok_or(Error::MissingTargets)
    }

    pub fn x_sup(&self) -> DMatrix<f64> {
        self.x.columns(0, self.n_sup).into_owned()
    }

    pub fn x_unsup(&self) -> DMatrix<f64> {
        self.x.columns(self.n_sup, self.len() - self.n_sup).into_owned()
    }

    pub fn z_sup(&self) -> Result<DMatrix<f64>> {
        Ok(self.targets()?.columns(0, self.n_sup).into_owned())
    }

    /// Same samples with a different supervision split.
    pub fn with_split(&self, n_sup: usize) -> Result<Self> {
        if n_sup > self.len() {
            return Err(Error::Parameter(format!(
                "n_sup={n_sup} exceeds n={}",
                self.len()
            )));
        }
        if n_sup > 0 && self.z.is_none() {
            return Err(Error::MissingTargets);
        }
        Ok(Self {
            n_sup,
            ..self.clone()
        })
    }
}

/// Subtract the column mean; returns the centered matrix and the mean.
pub fn center(mut x: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mean = if x.ncols() == 0 {
        DVector::zeros(x.nrows())
    } else {
        x.column_mean()
    };
    for mut col in x.column_iter_mut() {
        col -= &mean;
    }
    (x, mean)
}

/// Draw `n` pairs from `model`, center both x and z, and mark the first
/// `n_sup` pairs as supervised.
pub fn sample_dataset(model: &GroundTruthModel, n: usize, n_sup: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Sampling(format!("need n >= 2 samples to center, got {n}")));
    }
    if n_sup > n {
        return Err(Error::Parameter(format!("n_sup={n_sup} exceeds n={n}")));
    }
    let mut rng = rng::stream(seed, rng::DATA_STREAM);
    let (x, z) = model.draw(n, &mut rng);
    let (z, _) = center(z);
    Dataset::new(x, Some(z), n_sup)
}

/// Uncentered population draws used as a test set.
pub fn sample_test_set(model: &GroundTruthModel, n_test: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = rng::stream(seed, rng::TEST_STREAM);
    model.draw(n_test, &mut rng)
}

/// Ordered subset of coordinates (0-based, strictly increasing).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSet {
    indices: Vec<usize>,
    ambient_dim: usize,
}

impl FeatureSet {
    pub fn new(mut indices: Vec<usize>, ambient_dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Parameter("feature set must be non-empty".into()));
        }
        indices.sort_unstable();
        if let Some(&bad) = indices.iter().find(|&&i| i >= ambient_dim) {
            return Err(Error::IndexOutOfBounds {
                index: bad,
                dim: ambient_dim,
            });
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("feature indices must be distinct".into()));
        }
        Ok(Self {
            indices,
            ambient_dim,
        })
    }

    pub fn all(d: usize) -> Self {
        Self {
            indices: (0..d).collect(),
            ambient_dim: d,
        }
    }

    /// `S_p`: the first `p` entries of a coordinate order, sorted.
    pub fn from_prefix(order: &[usize], p: usize, ambient_dim: usize) -> Result<Self> {
        if p > order.len() {
            return Err(Error::Parameter(format!(
                "prefix length {p} exceeds order length {}",
                order.len()
            )));
        }
        Self::new(order[..p].to_vec(), ambient_dim)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn complement(&self) -> Vec<usize> {
        let mut in_set = vec![false; self.ambient_dim];
        for &i in &self.indices {
            in_set[i] = true;
        }
        (0..self.ambient_dim).filter(|&i| !in_set[i]).collect()
    }

    /// Positions of this set's coordinates inside `outer`, as a feature set
    /// over `outer`'s local index space.
    pub fn relative_to(&self, outer: &FeatureSet) -> Result<FeatureSet> {
        let local = self
            .indices
            .iter()
            .map(|i| {
                outer
                    .indices
                    .binary_search(i)
                    .map_err(|_| Error::Parameter(format!("coordinate {i} not in outer set")))
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureSet::new(local, outer.len())
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.ambient_dim {
            return Err(Error::Parameter(format!(
                "matrix has {rows} rows, feature set is over {} coordinates",
                self.ambient_dim
            )));
        }
        Ok(())
    }

    /// Row selection `X_S` (p×n).
    pub fn restrict_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(x.nrows())?;
        Ok(x.select_rows(self.indices.iter()))
    }

    /// Principal submatrix `C_S` (p×p).
    pub fn restrict_principal(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(c.nrows())?;
        if !c.is_square() {
            return Err(Error::Parameter("principal restriction needs a square matrix".into()));
        }
        Ok(c.select_rows(self.indices.iter()).select_columns(self.indices.iter()))
    }

    /// Rows of the excluded coordinates `X_{S_c}`.
    pub fn restrict_complement(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(x.nrows())?;
        Ok(x.select_rows(self.complement().iter()))
    }
}

/// `num_orders` independent uniform permutations of `0..d`.
pub fn grow_feature_orders(d: usize, num_orders: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if num_orders == 0 {
        return Err(Error::Parameter("num_orders must be >= 1".into()));
    }
    let mut rng = rng::stream(seed, rng::ORDER_STREAM);
    Ok((0..num_orders)
        .map(|_| {
            let mut perm: Vec<usize> = (0..d).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gram_error(b: &DMatrix<f64>) -> f64 {
        (b.transpose() * b - DMatrix::<f64>::identity(b.ncols(), b.ncols())).amax()
    }

    #[test]
    fn hadamard_small_orders() {
        let b = make_hadamard_basis(2, 1).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_eq!(b.as_slice(), &[h, h]);

        let b = make_hadamard_basis(4, 2).unwrap();
        assert_eq!(b.transpose() * &b, DMatrix::<f64>::identity(2, 2));
        // second column of the 4x4 Sylvester matrix is (1,-1,1,-1)/2
        assert_eq!(b.column(1).as_slice(), &[0.5, -0.5, 0.5, -0.5]);

        let b = make_hadamard_basis(128, 40).unwrap();
        assert_eq!(b.shape(), (128, 40));
        assert!(gram_error(&b) <= 1e-12);
    }

    #[test]
    fn hadamard_rejects_non_power_of_two() {
        assert!(matches!(make_hadamard_basis(12, 3), Err(Error::Construction(_))));
        assert!(make_hadamard_basis(8, 8).is_err());
    }

    #[test]
    fn random_basis_orthonormal_and_deterministic() {
        let a = make_random_basis(16, 4, 7).unwrap();
        assert!(gram_error(&a) <= 1e-10);
        let b = make_random_basis(16, 4, 7).unwrap();
        assert_eq!(a, b);
        assert!(make_random_basis(8, 8, 1).is_err());
    }

    #[test]
    fn true_covariance_trace() {
        let model = GroundTruthModel::new(make_hadamard_basis(128, 40).unwrap(), 0.1).unwrap();
        let c = model.true_covariance();
        assert_abs_diff_eq!(c.trace(), 41.28, epsilon = 1e-10);
        assert_abs_diff_eq!(model.true_spectrum().sum(), 41.28, epsilon = 1e-10);
        assert_eq!(c, c.transpose());

        let noiseless = GroundTruthModel::new(make_random_basis(10, 3, 2).unwrap(), 0.0).unwrap();
        let p = noiseless.true_covariance();
        assert_abs_diff_eq!(p.trace(), 3.0, epsilon = 1e-12);
        assert!((&p * &p - &p).amax() < 1e-12);
    }

    #[test]
    fn sampled_data_is_centered() {
        let model = GroundTruthModel::new(make_random_basis(12, 3, 1).unwrap(), 0.3).unwrap();
        let data = sample_dataset(&model, 100, 40, 5).unwrap();
        assert!(data.x.column_sum().norm() < 1e-9);
        assert_eq!(data.targets().unwrap().shape(), (3, 100));
        assert_eq!(data.x_sup().ncols(), 40);
        assert_eq!(data.x_unsup().ncols(), 60);
        // centering again is a no-op
        let (again, mean) = center(data.x.clone());
        assert!((again - &data.x).amax() < 1e-12);
        assert!(mean.amax() < 1e-12);
    }

    #[test]
    fn noiseless_rank() {
        let model = GroundTruthModel::new(make_random_basis(20, 5, 1).unwrap(), 0.0).unwrap();
        let data = sample_dataset(&model, 50, 0, 3).unwrap();
        assert_eq!(data.x.rank(1e-9), 5);
    }

    #[test]
    fn sampling_errors() {
        let model = GroundTruthModel::new(make_hadamard_basis(8, 2).unwrap(), 0.1).unwrap();
        assert!(matches!(sample_dataset(&model, 1, 0, 0), Err(Error::Sampling(_))));
        assert!(sample_dataset(&model, 5, 6, 0).is_err());
    }

    #[test]
    fn model_validation() {
        let not_ortho = DMatrix::from_element(4, 2, 1.0);
        assert!(GroundTruthModel::new(not_ortho, 0.1).is_err());
        assert!(GroundTruthModel::new(make_hadamard_basis(4, 2).unwrap(), -0.1).is_err());
    }

    #[test]
    fn restriction_cases() {
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 5.0, 7.0]));
        let all = FeatureSet::all(3);
        assert_eq!(all.restrict_principal(&diag).unwrap(), diag);
        let first = FeatureSet::new(vec![0], 3).unwrap();
        assert_eq!(first.restrict_principal(&diag).unwrap()[(0, 0)], 3.0);
        assert_eq!(first.complement(), vec![1, 2]);
        assert!(matches!(
            FeatureSet::new(vec![0, 3], 3),
            Err(Error::IndexOutOfBounds { index: 3, dim: 3 })
        ));
        assert!(FeatureSet::new(vec![1, 1], 3).is_err());
        assert!(FeatureSet::new(vec![], 3).is_err());
    }

    #[test]
    fn nested_restriction() {
        let model = GroundTruthModel::new(make_random_basis(10, 3, 4).unwrap(), 0.2).unwrap();
        let c = model.true_covariance();
        let order = &grow_feature_orders(10, 1, 9).unwrap()[0];
        for p in 1..10 {
            let small = FeatureSet::from_prefix(order, p, 10).unwrap();
            let big = FeatureSet::from_prefix(order, p + 1, 10).unwrap();
            let via_big = small
                .relative_to(&big)
                .unwrap()
                .restrict_principal(&big.restrict_principal(&c).unwrap())
                .unwrap();
            assert_eq!(via_big, small.restrict_principal(&c).unwrap());
        }
    }

    #[test]
    fn orders_are_permutations() {
        let a = grow_feature_orders(20, 3, 42).unwrap();
        assert_eq!(a, grow_feature_orders(20, 3, 42).unwrap());
        for perm in &a {
            let mut s = perm.clone();
            s.sort_unstable();
            assert_eq!(s, (0..20).collect::<Vec<_>>());
        }
        assert_ne!(a[0], a[1]);
        for p in 1..20 {
            let small = FeatureSet::from_prefix(&a[0], p, 20).unwrap();
            let big = FeatureSet::from_prefix(&a[0], p + 1, 20).unwrap();
            assert!(small.indices().iter().all(|i| big.indices().contains(i)));
        }
        assert!(grow_feature_orders(5, 0, 1).is_err());
    }
}
