//! Estimators spanning the supervision-orthonormality plane.
//!
//! | supervision | constraint | routine |
//! |---|---|---|
//! | none | hard | [`fit_unsupervised_pca`] |
//! | none | soft | [`fit_unsupervised_pgd`] |
//! | partial | any | [`fit_semisupervised_pgd`] |
//! | full | hard/soft | [`fit_supervised_pgd`] |
//! | full | none | [`fit_regression`] |

mod pgd;

pub use pgd::{
    default_step, line_search_step, Cost, PgdOptions, SemisupervisedCost, SupervisedCost,
    UnsupervisedCost,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::FeatureSet;
use crate::rng::{self, gaussian_matrix};
use crate::spectral::{eig_symmetric, project_soft, pseudoinverse, ConstraintLevel};

/// A p×k estimator matrix learned on the coordinates in `features`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceEstimate {
    pub matrix: DMatrix<f64>,
    pub features: FeatureSet,
}

impl SubspaceEstimate {
    pub fn new(matrix: DMatrix<f64>, features: FeatureSet) -> Result<Self> {
        if matrix.nrows() != features.len() {
            return Err(Error::Parameter(format!(
                "estimate has {} rows but the feature set has {} coordinates",
                matrix.nrows(),
                features.len()
            )));
        }
        Ok(Self { matrix, features })
    }

    pub fn ambient_dim(&self) -> usize {
        self.features.ambient_dim()
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// d×k matrix with the learned rows at `features` and zeros elsewhere.
    pub fn embed(&self) -> DMatrix<f64> {
        let mut full = DMatrix::zeros(self.ambient_dim(), self.target_dim());
        for (j, &s) in self.features.indices().iter().enumerate() {
            full.row_mut(s).copy_from(&self.matrix.row(j));
        }
        full
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub estimate: SubspaceEstimate,
    pub iterations: usize,
    pub final_objective: f64,
    pub objective_trace: Vec<f64>,
}

fn check_rows(features: &FeatureSet, x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != features.len() {
        return Err(Error::Parameter(format!(
            "restricted data has {} rows, feature set has {}",
            x.nrows(),
            features.len()
        )));
    }
    Ok(())
}

fn check_target_dim(p: usize, m: usize) -> Result<()> {
    if m == 0 || p < m {
        return Err(Error::Parameter(format!(
            "constrained fit needs 1 <= m <= p, got p={p}, m={m}"
        )));
    }
    Ok(())
}

/// Top-`k` eigenvectors of `(1/n) X_S X_S^T`.
///
/// When `k` exceeds the sample rank the extra columns are null-space
/// eigenvectors in the decomposition's fixed order.
pub fn fit_unsupervised_pca(
    features: &FeatureSet,
    x_s: &DMatrix<f64>,
    k: usize,
) -> Result<SubspaceEstimate> {
    check_rows(features, x_s)?;
    let p = x_s.nrows();
    if k == 0 || k > p {
        return Err(Error::Parameter(format!("PCA needs 1 <= k <= p, got k={k}, p={p}")));
    }
    let n = x_s.ncols().max(1) as f64;
    let cov = x_s * x_s.transpose() / n;
    let decomp = eig_symmetric(&cov)?;
    SubspaceEstimate::new(decomp.leading(k), features.clone())
}

/// Minimum-norm least squares `(Z X_S^+)^T`.
pub fn fit_regression(
    features: &FeatureSet,
    x_s: &DMatrix<f64>,
    z: &DMatrix<f64>,
) -> Result<SubspaceEstimate> {
    check_rows(features, x_s)?;
    if x_s.ncols() != z.ncols() {
        return Err(Error::Parameter(format!(
            "X_S has {} samples, Z has {}",
            x_s.ncols(),
            z.ncols()
        )));
    }
    let w = (z * pseudoinverse(x_s)).transpose();
    SubspaceEstimate::new(w, features.clone())
}

fn report(
    features: &FeatureSet,
    traj: pgd::Trajectory,
) -> Result<FitReport> {
    let final_objective = *traj.trace.last().expect("trace starts with the initial objective");
    Ok(FitReport {
        estimate: SubspaceEstimate::new(traj.w, features.clone())?,
        iterations: traj.iterations,
        final_objective,
        objective_trace: traj.trace,
    })
}

/// Supervised fit under `|sigma_i^2 - 1| <= alpha`, started from the projected
/// regression solution. The reported objective carries the `1/n` factor.
pub fn fit_supervised_pgd(
    features: &FeatureSet,
    x_s: &DMatrix<f64>,
    z: &DMatrix<f64>,
    level: ConstraintLevel,
    opts: &PgdOptions,
) -> Result<FitReport> {
    check_rows(features, x_s)?;
    check_target_dim(x_s.nrows(), z.nrows())?;
    let cost = SupervisedCost::new(x_s, z)?;
    let init = fit_regression(features, x_s, z)?.matrix;
    let traj = pgd::descend(&cost, init, level, opts, opts.step_for(x_s))?;
    report(features, traj)
}

fn random_init(p: usize, m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::stream(seed, 0);
    gaussian_matrix(&mut rng, p, m, 1.0 / (p as f64).sqrt())
}

/// Blended cost over a supervised block and an unsupervised block, started
/// from a projected N(0, 1/p) matrix drawn from `opts.seed`.
pub fn fit_semisupervised_pgd(
    features: &FeatureSet,
    x_sup: &DMatrix<f64>,
    z_sup: &DMatrix<f64>,
    x_unsup: &DMatrix<f64>,
    level: ConstraintLevel,
    opts: &PgdOptions,
) -> Result<FitReport> {
    check_rows(features, x_sup)?;
    check_rows(features, x_unsup)?;
    let (p, m) = (x_sup.nrows(), z_sup.nrows());
    check_target_dim(p, m)?;
    if x_sup.ncols() + x_unsup.ncols() < 2 {
        return Err(Error::Parameter("semi-supervised fit needs at least 2 samples".into()));
    }
    let cost = SemisupervisedCost::new(x_sup, z_sup, x_unsup)?;
    let all = DMatrix::from_columns(
        &x_sup
            .column_iter()
            .chain(x_unsup.column_iter())
            .collect::<Vec<_>>(),
    );
    let init = project_soft(&random_init(p, m, opts.seed), level)?;
    let traj = pgd::descend(&cost, init, level, opts, opts.step_for(&all))?;
    report(features, traj)
}

/// Unsupervised fit with `m` columns under the floored soft constraint.
pub fn fit_unsupervised_pgd(
    features: &FeatureSet,
    x_s: &DMatrix<f64>,
    m: usize,
    level: ConstraintLevel,
    opts: &PgdOptions,
) -> Result<FitReport> {
    check_rows(features, x_s)?;
    check_target_dim(x_s.nrows(), m)?;
    let level = level.with_floor();
    let cost = UnsupervisedCost::new(x_s);
    let init = project_soft(&random_init(x_s.nrows(), m, opts.seed), level)?;
    let traj = pgd::descend(&cost, init, level, opts, opts.step_for(x_s))?;
    report(features, traj)
}

#[cfg(test)]
mod tests;
