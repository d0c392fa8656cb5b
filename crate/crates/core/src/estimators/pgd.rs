//! Projected gradient descent machinery: cost functions with the descent
//! directions used by the fitting algorithms, the multiplicative line search,
//! and the shared iteration loop.
//!
//! The descent directions are the ones the algorithms step along. For the
//! squared-Frobenius costs they equal half of the true gradient; the step
//! size absorbs the factor.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{project_soft, ConstraintLevel};

/// Cost over the p×m estimator matrix plus its descent direction.
pub trait Cost {
    fn value(&self, w: &DMatrix<f64>) -> f64;

    /// Half the gradient of `value` with respect to `w`.
    fn direction(&self, w: &DMatrix<f64>) -> DMatrix<f64>;
}

/// `(1/n) ||Z - W^T X||_F^2`.
pub struct SupervisedCost<'a> {
    x: &'a DMatrix<f64>,
    z: &'a DMatrix<f64>,
}

impl<'a> SupervisedCost<'a> {
    pub fn new(x: &'a DMatrix<f64>, z: &'a DMatrix<f64>) -> Result<Self> {
        if x.ncols() != z.ncols() {
            return Err(Error::Parameter(format!(
                "X has {} samples, Z has {}",
                x.ncols(),
                z.ncols()
            )));
        }
        Ok(Self { x, z })
    }
}

impl Cost for SupervisedCost<'_> {
    fn value(&self, w: &DMatrix<f64>) -> f64 {
        let n = self.x.ncols().max(1) as f64;
        (self.z - w.transpose() * self.x).norm_squared() / n
    }

    /// `X (W^T X - Z)^T`, without the `1/n` of the cost.
    fn direction(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        self.x * (w.transpose() * self.x - self.z).transpose()
    }
}

/// `||(I - W W^T) X||_F^2` with `A = X X^T` cached.
pub struct UnsupervisedCost<'a> {
    x: &'a DMatrix<f64>,
    scatter: DMatrix<f64>,
}

impl<'a> UnsupervisedCost<'a> {
    pub fn new(x: &'a DMatrix<f64>) -> Self {
        Self {
            x,
            scatter: x * x.transpose(),
        }
    }
}

impl Cost for UnsupervisedCost<'_> {
    fn value(&self, w: &DMatrix<f64>) -> f64 {
        (self.x - w * (w.transpose() * self.x)).norm_squared()
    }

    /// `-2 A W + A W W^T W + W W^T A W`.
    fn direction(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let aw = &self.scatter * w;
        let wtw = w.transpose() * w;
        let wt_aw = w.transpose() * &aw;
        &aw * &wtw + w * wt_aw - aw * 2.0
    }
}

/// `||Z_sup - W^T X_sup||_F^2 + ||(I - W W^T) X_unsup||_F^2`.
pub struct SemisupervisedCost<'a> {
    x_sup: &'a DMatrix<f64>,
    z_sup: &'a DMatrix<f64>,
    unsup: UnsupervisedCost<'a>,
}

impl<'a> SemisupervisedCost<'a> {
    pub fn new(
        x_sup: &'a DMatrix<f64>,
        z_sup: &'a DMatrix<f64>,
        x_unsup: &'a DMatrix<f64>,
    ) -> Result<Self> {
        if x_sup.ncols() != z_sup.ncols() {
            return Err(Error::Parameter(format!(
                "X_sup has {} samples, Z_sup has {}",
                x_sup.ncols(),
                z_sup.ncols()
            )));
        }
        if x_sup.nrows() != x_unsup.nrows() {
            return Err(Error::Parameter(
                "supervised and unsupervised blocks differ in feature count".into(),
            ));
        }
        Ok(Self {
            x_sup,
            z_sup,
            unsup: UnsupervisedCost::new(x_unsup),
        })
    }
}

impl Cost for SemisupervisedCost<'_> {
    fn value(&self, w: &DMatrix<f64>) -> f64 {
        (self.z_sup - w.transpose() * self.x_sup).norm_squared() + self.unsup.value(w)
    }

    fn direction(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        self.x_sup * (w.transpose() * self.x_sup - self.z_sup).transpose() + self.unsup.direction(w)
    }
}

/// Stopping and step-size settings for the descent loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PgdOptions {
    pub max_iters: usize,
    /// Stop once `(obj_prev - obj) / max(obj_0, 1e-12)` drops below this.
    pub rel_tol: f64,
    /// `None` uses `1 / (2 sigma_max(X)^2)`.
    pub initial_step: Option<f64>,
    pub line_search_factors: Vec<f64>,
    /// Seed for the random initialization of the semi- and unsupervised fits.
    pub seed: u64,
}

impl Default for PgdOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            rel_tol: 1e-8,
            initial_step: None,
            line_search_factors: vec![0.5, 1.0, 2.0],
            seed: 0,
        }
    }
}

impl PgdOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be >= 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::Parameter("rel_tol must be > 0".into()));
        }
        if let Some(mu) = self.initial_step {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::Parameter("initial_step must be positive".into()));
            }
        }
        if self.line_search_factors.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::Parameter("line search factors must be positive".into()));
        }
        if !self.line_search_factors.contains(&1.0) {
            return Err(Error::Parameter("line search factors must include 1.0".into()));
        }
        Ok(())
    }

    pub(crate) fn step_for(&self, x: &DMatrix<f64>) -> f64 {
        self.initial_step.unwrap_or_else(|| default_step(x))
    }
}

/// `1 / (2 sigma_max(X)^2)`, or 1 for an all-zero X.
pub fn default_step(x: &DMatrix<f64>) -> f64 {
    let smax = if x.is_empty() {
        0.0
    } else {
        crate::spectral::singular_values(x)[0]
    };
    if smax * smax > f64::MIN_POSITIVE {
        1.0 / (2.0 * smax * smax)
    } else {
        1.0
    }
}

/// Try `current_mu * f` for each factor and return the step with the lowest
/// objective together with that objective. Ties go to the largest factor;
/// non-finite objectives never win against finite ones.
pub fn line_search_step(
    current_mu: f64,
    mut objective_at: impl FnMut(f64) -> f64,
    factors: &[f64],
) -> (f64, f64) {
    let mut ordered: Vec<f64> = factors.to_vec();
    ordered.sort_by(|a, b| b.total_cmp(a));
    let mut best_mu = current_mu;
    let mut best = f64::INFINITY;
    let mut found = false;
    for f in ordered {
        let mu = current_mu * f;
        let v = objective_at(mu);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if !found || v < best {
            best = v;
            best_mu = mu;
            found = true;
        }
    }
    (best_mu, best)
}

pub(crate) struct Trajectory {
    pub w: DMatrix<f64>,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// How many times the step may shrink when no candidate decreases the cost.
const MAX_BACKTRACKS: usize = 30;

/// Projected gradient descent from `w_init` (projected first).
pub(crate) fn descend(
    cost: &dyn Cost,
    w_init: DMatrix<f64>,
    level: ConstraintLevel,
    opts: &PgdOptions,
    mu0: f64,
) -> Result<Trajectory> {
    opts.validate()?;
    if w_init.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { iterations: 0 });
    }
    let mut w = project_soft(&w_init, level)?;
    let mut obj = cost.value(&w);
    if !obj.is_finite() {
        return Err(Error::Divergence { iterations: 0 });
    }
    let obj0 = obj;
    let scale = obj0.max(1e-12);
    let shrink = opts
        .line_search_factors
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .min(0.5);
    let mut trace = vec![obj];
    let mut mu = mu0;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let g = cost.direction(&w);
        let mut accepted = None;
        let mut trial_mu = mu;
        let mut retried_divergence = false;
        for _ in 0..=MAX_BACKTRACKS {
            let mut candidates: Vec<(f64, DMatrix<f64>)> = Vec::new();
            let mut proj_err = None;
            let (best_mu, best) = line_search_step(
                trial_mu,
                |step| {
                    let raw = &w - &g * step;
                    if raw.iter().any(|v| !v.is_finite()) {
                        return f64::INFINITY;
                    }
                    match project_soft(&raw, level) {
                        Ok(cand) => {
                            let v = cost.value(&cand);
                            candidates.push((step, cand));
                            v
                        }
                        Err(e) => {
                            proj_err = Some(e);
                            f64::INFINITY
                        }
                    }
                },
                &opts.line_search_factors,
            );
            if let Some(e) = proj_err {
                return Err(e);
            }
            if !best.is_finite() {
                if retried_divergence {
                    return Err(Error::Divergence { iterations });
                }
                retried_divergence = true;
                trial_mu *= 0.5;
                continue;
            }
            if best < obj {
                let cand = candidates
                    .into_iter()
                    .find(|(s, _)| *s == best_mu)
                    .map(|(_, c)| c)
                    .expect("best step was evaluated");
                accepted = Some((best_mu, best, cand));
                break;
            }
            trial_mu = best_mu * shrink;
        }
        let Some((step, value, cand)) = accepted else {
            break;
        };
        let decrease = obj - value;
        w = cand;
        obj = value;
        mu = step;
        iterations += 1;
        trace.push(obj);
        if decrease / scale < opts.rel_tol {
            break;
        }
    }
    Ok(Trajectory {
        w,
        iterations,
        trace,
    })
}
