//! Experiment orchestration: plane trajectories, seeded sweeps over `p`,
//! trial averaging, CSV persistence and SVG plots.

mod config;
mod csv_io;
mod plot;

pub use config::{
    trajectory_presets, BasisKind, ModelSpec, OutOfSampleMode, PlanePoint, PlotMode, SweepConfig,
    ALPHA_GRID,
};
pub use csv_io::{read_csv, read_csv_from, write_csv, write_csv_to, CSV_HEADER};
pub use plot::{curves_svg, heatmap_svg, plot_curves};

use nalgebra::DMatrix;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    fit_regression, fit_semisupervised_pgd, fit_supervised_pgd, fit_unsupervised_pca,
    fit_unsupervised_pgd, PgdOptions, SubspaceEstimate,
};
use crate::metrics::{
    sup_error_on, sup_in_sample, sup_out_of_sample, unsup_in_sample, unsup_in_sample_s,
    unsup_out_of_sample_mc, unsup_out_of_sample_spectral, unsup_out_of_sample_trace, ErrorSource,
    SupEval,
};
use crate::model::{
    grow_feature_orders, sample_dataset, sample_test_set, Dataset, FeatureSet, GroundTruthModel,
};
use crate::rng::init_seed;
use crate::spectral::{eig_symmetric, ConstraintLevel};

/// Which estimator a plane coordinate selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Regression,
    SupervisedPgd,
    SemisupervisedPgd,
    Pca,
    UnsupervisedPgd,
}

impl Method {
    pub fn select(point: PlanePoint, n: usize) -> Self {
        match point.n_sup {
            0 if point.alpha == 0.0 => Method::Pca,
            0 => Method::UnsupervisedPgd,
            s if s == n && point.alpha.is_infinite() => Method::Regression,
            s if s == n => Method::SupervisedPgd,
            _ => Method::SemisupervisedPgd,
        }
    }

    /// Unsupervised methods are scored with the reconstruction errors and
    /// sweep over `k`; the rest predict `z` with `k = m`.
    pub fn is_unsupervised(self) -> bool {
        matches!(self, Method::Pca | Method::UnsupervisedPgd)
    }
}

fn level_for(alpha: f64) -> Result<ConstraintLevel> {
    if alpha.is_infinite() {
        Ok(ConstraintLevel::unconstrained())
    } else {
        ConstraintLevel::new(alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub method: Method,
    pub estimate: SubspaceEstimate,
    pub iterations: usize,
}

/// Fit the estimator chosen by `point` on the coordinates `features`.
/// `data` must carry targets unless `n_sup == 0`; `k` is ignored by the
/// supervised methods.
pub fn fit_at(
    point: PlanePoint,
    data: &Dataset,
    features: &FeatureSet,
    k: usize,
    opts: &PgdOptions,
) -> Result<Fit> {
    let data = data.with_split(point.n_sup)?;
    let method = Method::select(point, data.len());
    let level = level_for(point.alpha)?;
    let x_s = features.restrict_rows(&data.x)?;
    let (estimate, iterations) = match method {
        Method::Pca => (fit_unsupervised_pca(features, &x_s, k)?, 0),
        Method::Regression => (fit_regression(features, &x_s, data.targets()?)?, 0),
        Method::UnsupervisedPgd => {
            let r = fit_unsupervised_pgd(features, &x_s, k, level, opts)?;
            (r.estimate, r.iterations)
        }
        Method::SupervisedPgd => {
            let r = fit_supervised_pgd(features, &x_s, data.targets()?, level, opts)?;
            (r.estimate, r.iterations)
        }
        Method::SemisupervisedPgd => {
            let x_sup = features.restrict_rows(&data.x_sup())?;
            let x_unsup = features.restrict_rows(&data.x_unsup())?;
            let r = fit_semisupervised_pgd(features, &x_sup, &data.z_sup()?, &x_unsup, level, opts)?;
            (r.estimate, r.iterations)
        }
    };
    Ok(Fit { method, estimate, iterations })
}

/// One row of a sweep. Error fields are `None` where they do not apply or
/// where the cell is undefined (`k > p`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub point: PlanePoint,
    pub trial: usize,
    pub p: usize,
    pub k: usize,
    pub e_in: Option<f64>,
    pub e_in_s: Option<f64>,
    pub e_out: Option<f64>,
    pub e_out_source: Option<ErrorSource>,
    pub iterations: Option<usize>,
}

impl SweepRecord {
    fn missing(point: PlanePoint, trial: usize, p: usize, k: usize) -> Self {
        Self {
            point,
            trial,
            p,
            k,
            e_in: None,
            e_in_s: None,
            e_out: None,
            e_out_source: None,
            iterations: None,
        }
    }
}

/// Trial mean at one `(point, p, k)` cell; a value is missing if any trial
/// lacks it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedRecord {
    pub point: PlanePoint,
    pub p: usize,
    pub k: usize,
    pub trials: usize,
    pub e_in: Option<f64>,
    pub e_in_s: Option<f64>,
    pub e_out: Option<f64>,
    pub iterations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    pub averaged: Vec<AveragedRecord>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v?;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

fn same_point(a: PlanePoint, b: PlanePoint) -> bool {
    a.n_sup == b.n_sup && (a.alpha == b.alpha || (a.alpha.is_nan() && b.alpha.is_nan()))
}

impl SweepResult {
    /// Builds the averaged table; cells keep first-appearance order of points
    /// and ascending `(p, k)` within each point.
    pub fn from_records(records: Vec<SweepRecord>) -> Self {
        let points = distinct_points(&records);
        let mut averaged = Vec::new();
        for &pt in &points {
            let mut cells: Vec<(usize, usize)> = records
                .iter()
                .filter(|r| same_point(r.point, pt))
                .map(|r| (r.p, r.k))
                .collect();
            cells.sort_unstable();
            cells.dedup();
            for (p, k) in cells {
                let group: Vec<&SweepRecord> = records
                    .iter()
                    .filter(|r| same_point(r.point, pt) && r.p == p && r.k == k)
                    .collect();
                averaged.push(AveragedRecord {
                    point: pt,
                    p,
                    k,
                    trials: group.len(),
                    e_in: mean_of(group.iter().map(|r| r.e_in)),
                    e_in_s: mean_of(group.iter().map(|r| r.e_in_s)),
                    e_out: mean_of(group.iter().map(|r| r.e_out)),
                    iterations: mean_of(group.iter().map(|r| r.iterations.map(|i| i as f64))),
                });
            }
        }
        Self { records, averaged }
    }

    pub fn points(&self) -> Vec<PlanePoint> {
        distinct_points(&self.records)
    }

    /// Averaged `(p, e_out)` pairs at `point` and `k`, skipping missing cells.
    pub fn curve(&self, point: PlanePoint, k: usize) -> Vec<(usize, f64)> {
        self.averaged
            .iter()
            .filter(|a| same_point(a.point, point) && a.k == k)
            .filter_map(|a| a.e_out.map(|e| (a.p, e)))
            .collect()
    }
}

fn distinct_points(records: &[SweepRecord]) -> Vec<PlanePoint> {
    let mut points: Vec<PlanePoint> = Vec::new();
    for r in records {
        if !points.iter().any(|&q| same_point(q, r.point)) {
            points.push(r.point);
        }
    }
    points
}

/// Shared, read-only inputs of every sweep job.
struct Context {
    model: GroundTruthModel,
    data: Dataset,
    cov: DMatrix<f64>,
    test: Option<(DMatrix<f64>, DMatrix<f64>)>,
    orders: Vec<Vec<usize>>,
}

fn score(
    cfg: &SweepConfig,
    ctx: &Context,
    fit: &Fit,
    x_s: &DMatrix<f64>,
    k: usize,
) -> Result<(f64, Option<f64>, f64, ErrorSource)> {
    let u = fit.estimate.embed();
    if fit.method.is_unsupervised() {
        let e_in = unsup_in_sample(&u, &ctx.data.x);
        let e_in_s = unsup_in_sample_s(&fit.estimate.matrix, x_s);
        let (e_out, src) = match cfg.e_out {
            OutOfSampleMode::MonteCarlo => {
                let (x_test, _) = ctx.test.as_ref().expect("test set drawn for monte-carlo mode");
                (unsup_out_of_sample_mc(&u, x_test), ErrorSource::MonteCarlo)
            }
            OutOfSampleMode::Spectral if fit.method == Method::Pca => {
                let features = &fit.estimate.features;
                let true_s = eig_symmetric(&features.restrict_principal(&ctx.cov)?)?;
                let sample = eig_symmetric(&(x_s * x_s.transpose() / x_s.ncols() as f64))?;
                let e = unsup_out_of_sample_spectral(&ctx.model.true_spectrum(), &true_s, &sample, k)?;
                (e, ErrorSource::SpectralFormula)
            }
            _ => (unsup_out_of_sample_trace(&u, &ctx.cov), ErrorSource::AnalyticTrace),
        };
        Ok((e_in, Some(e_in_s), e_out, src))
    } else {
        let e_in = sup_in_sample(&u, &ctx.data)?;
        let (e_out, src) = match cfg.e_out {
            OutOfSampleMode::MonteCarlo => {
                let (x_test, z_test) = ctx.test.as_ref().expect("test set drawn for monte-carlo mode");
                (sup_error_on(&u, x_test, z_test), ErrorSource::MonteCarlo)
            }
            _ => (sup_out_of_sample(&u, &ctx.model, SupEval::Analytic), ErrorSource::AnalyticTrace),
        };
        Ok((e_in, None, e_out, src))
    }
}

fn run_job(cfg: &SweepConfig, ctx: &Context, point_idx: usize, trial: usize) -> Result<Vec<SweepRecord>> {
    let point = cfg.trajectory[point_idx];
    let method = Method::select(point, cfg.n);
    let ks: Vec<usize> = if method.is_unsupervised() {
        cfg.k_values.clone()
    } else {
        vec![cfg.model.m]
    };
    let mut out = Vec::new();
    for p in cfg.p_values() {
        let wrap = |e: Error| Error::Sweep {
            alpha: point.alpha,
            n_sup: point.n_sup,
            trial,
            p,
            source: Box::new(e),
        };
        let features = FeatureSet::from_prefix(&ctx.orders[trial], p, cfg.model.d).map_err(wrap)?;
        let x_s = features.restrict_rows(&ctx.data.x).map_err(wrap)?;
        for &k in &ks {
            if method.is_unsupervised() && k > p {
                out.push(SweepRecord::missing(point, trial, p, k));
                continue;
            }
            let mut opts = cfg.pgd.clone();
            opts.seed = init_seed(cfg.model.seed, point_idx, trial, p);
            let fit = fit_at(point, &ctx.data, &features, k, &opts).map_err(wrap)?;
            let (e_in, e_in_s, e_out, src) = score(cfg, ctx, &fit, &x_s, k).map_err(wrap)?;
            out.push(SweepRecord {
                point,
                trial,
                p,
                k,
                e_in: Some(e_in),
                e_in_s,
                e_out: Some(e_out),
                e_out_source: Some(src),
                iterations: Some(fit.iterations),
            });
        }
    }
    Ok(out)
}

/// Run every `(trajectory point, trial, p, k)` cell of `cfg`.
///
/// One dataset (and, for Monte Carlo scoring, one test set) is drawn per
/// sweep; trials differ only in their feature order. Records come back sorted
/// by trajectory position, trial, `p`, `k` regardless of scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let model = cfg.model.build().map_err(|e| Error::Config(e.to_string()))?;
    let data = sample_dataset(&model, cfg.n, cfg.n, cfg.model.seed)?;
    let test = (cfg.e_out == OutOfSampleMode::MonteCarlo)
        .then(|| sample_test_set(&model, cfg.n_test, cfg.model.seed));
    let orders = grow_feature_orders(cfg.model.d, cfg.num_orders, cfg.model.seed)?;
    let ctx = Context {
        cov: model.true_covariance(),
        model,
        data,
        test,
        orders,
    };

    let jobs: Vec<(usize, usize)> = (0..cfg.trajectory.len())
        .flat_map(|i| (0..cfg.num_orders).map(move |t| (i, t)))
        .collect();
    #[cfg(feature = "parallel")]
    let iter = jobs.par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = jobs.iter();
    let chunks: Vec<Vec<SweepRecord>> = iter
        .map(|&(i, t)| run_job(cfg, &ctx, i, t))
        .collect::<Result<_>>()?;
    // jobs are generated in (point, trial) order and collect preserves it
    Ok(SweepResult::from_records(chunks.into_iter().flatten().collect()))
}
