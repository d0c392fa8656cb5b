//! Invariant and oracle suite on small seeded random instances, run by the
//! `check` subcommand.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::estimators::{
    fit_regression, fit_unsupervised_pca, Cost, SemisupervisedCost, UnsupervisedCost,
};
use crate::harness::{read_csv_from, run_sweep, write_csv_to, PlanePoint, SweepConfig};
use crate::matrix_io::{format_matrix, parse_matrix};
use crate::metrics::{
    interlacing_check, sup_in_sample, unsup_in_sample, unsup_in_sample_s,
    unsup_out_of_sample_spectral, unsup_out_of_sample_trace,
};
use crate::model::{grow_feature_orders, make_random_basis, sample_dataset, FeatureSet, GroundTruthModel};
use crate::rng::{gaussian_matrix, stream, Rng};
use crate::spectral::{eig_symmetric, project_hard, project_soft, singular_values, ConstraintLevel};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&mut Rng) -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("hard projection is orthonormal", hard_projection),
    ("soft projection is feasible and idempotent", soft_projection),
    ("soft projection beats feasible candidates", projection_optimality),
    ("descent directions match finite differences", gradients),
    ("nested covariances interlace", interlacing),
    ("in-sample error splits over S and its complement", decomposition),
    ("spectral and trace out-of-sample errors agree", spectral_formula),
    ("PCA out-of-sample error is non-increasing in k", monotone_in_k),
    ("regression interpolates for p >= n-1", regression_interpolation),
    ("rank-overparameterized PCA interpolates", pca_interpolation),
    ("matrix text format round-trips", matrix_round_trip),
    ("sweep CSV round-trips", csv_round_trip),
];

pub fn run_checks(seed: u64) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, &(name, check))| {
            let mut rng = stream(seed, 0x5000 + i as u64);
            let (passed, detail) = check(&mut rng).unwrap_or_else(|e| (false, format!("error: {e}")));
            CheckOutcome { name, passed, detail }
        })
        .collect()
}

fn gauss(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, rows, cols, 1.0)
}

fn random_model(rng: &mut Rng, d: usize, m: usize, sigma: f64) -> Result<GroundTruthModel> {
    let seed = rand::Rng::random(rng);
    GroundTruthModel::new(make_random_basis(d, m, seed)?, sigma)
}

fn random_features(rng: &mut Rng, d: usize, p: usize) -> Result<FeatureSet> {
    let order = grow_feature_orders(d, 1, rand::Rng::random(rng))?.remove(0);
    FeatureSet::from_prefix(&order, p, d)
}

fn hard_projection(rng: &mut Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let t = project_hard(&gauss(rng, 6, 3))?;
        worst = worst.max(singular_values(&t).iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max));
    }
    Ok((worst <= 1e-10, format!("max |sigma - 1| = {worst:.2e}")))
}

fn soft_projection(rng: &mut Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for &alpha in &[0.0, 0.1, 0.5, 2.0] {
        let level = ConstraintLevel::new(alpha)?;
        for _ in 0..10 {
            let w = gauss(rng, 6, 3) * 0.8;
            let once = project_soft(&w, level)?;
            let twice = project_soft(&once, level)?;
            if !level.is_feasible(&once, 1e-9) {
                return Ok((false, format!("infeasible output at alpha={alpha}")));
            }
            worst = worst.max((&twice - &once).amax());
            if alpha == 0.0 {
                worst = worst.max((&once - project_hard(&w)?).amax());
            }
        }
    }
    Ok((worst <= 1e-10, format!("max idempotence/hard mismatch = {worst:.2e}")))
}

fn projection_optimality(rng: &mut Rng) -> Result<(bool, String)> {
    let level = ConstraintLevel::new(0.3)?;
    let w = gauss(rng, 4, 2);
    let best = (&w - project_soft(&w, level)?).norm();
    for _ in 0..200 {
        let cand = project_soft(&gauss(rng, 4, 2), level)?;
        if (&w - &cand).norm() < best - 1e-12 {
            return Ok((false, "a feasible candidate is closer than the projection".into()));
        }
    }
    Ok((true, format!("projection distance {best:.4}, 200 candidates")))
}

fn relative_fd_error(cost: &dyn Cost, w: &DMatrix<f64>) -> f64 {
    let h = 1e-5;
    let mut fd = DMatrix::zeros(w.nrows(), w.ncols());
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            let (mut a, mut b) = (w.clone(), w.clone());
            a[(i, j)] += h;
            b[(i, j)] -= h;
            fd[(i, j)] = (cost.value(&a) - cost.value(&b)) / (2.0 * h);
        }
    }
    // the directions are half gradients
    let g = cost.direction(w) * 2.0;
    (&fd - &g).norm() / g.norm().max(1e-300)
}

fn gradients(rng: &mut Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (xs, zs, xu, w) = (gauss(rng, 5, 3), gauss(rng, 2, 3), gauss(rng, 5, 4), gauss(rng, 5, 2));
        worst = worst.max(relative_fd_error(&SemisupervisedCost::new(&xs, &zs, &xu)?, &w));
        worst = worst.max(relative_fd_error(&UnsupervisedCost::new(&xu), &w));
    }
    Ok((worst <= 1e-5, format!("max relative error = {worst:.2e}")))
}

fn interlacing(rng: &mut Rng) -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let g = gauss(rng, 7, 5);
        let c = &g * g.transpose();
        let drop = rand::Rng::random_range(rng, 0..7);
        let keep: Vec<usize> = (0..7).filter(|&i| i != drop).collect();
        let small = c.select_rows(keep.iter()).select_columns(keep.iter());
        worst = worst.max(interlacing_check(&c, &small)?.worst_violation);
    }
    Ok((worst <= 1e-8, format!("worst violation = {worst:.2e}")))
}

fn decomposition(rng: &mut Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let model = random_model(rng, 12, 3, 0.2)?;
        let data = sample_dataset(&model, 8, 0, rand::Rng::random(rng))?;
        let fs = random_features(rng, 12, 7)?;
        let x_s = fs.restrict_rows(&data.x)?;
        let est = fit_unsupervised_pca(&fs, &x_s, 3)?;
        let full = unsup_in_sample(&est.embed(), &data.x);
        let rest = fs.restrict_complement(&data.x)?.norm_squared() / 8.0;
        let part = unsup_in_sample_s(&est.matrix, &x_s);
        worst = worst.max((full - part - rest).abs() / full.max(1e-300));
    }
    Ok((worst <= 1e-8, format!("max relative gap = {worst:.2e}")))
}

fn spectral_formula(rng: &mut Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let model = random_model(rng, 10, 3, 0.3)?;
        let data = sample_dataset(&model, 6, 0, rand::Rng::random(rng))?;
        let fs = random_features(rng, 10, 7)?;
        let x_s = fs.restrict_rows(&data.x)?;
        let c = model.true_covariance();
        let true_s = eig_symmetric(&fs.restrict_principal(&c)?)?;
        let sample = eig_symmetric(&(&x_s * x_s.transpose() / 6.0))?;
        for k in 1..=7 {
            let a = unsup_out_of_sample_spectral(&model.true_spectrum(), &true_s, &sample, k)?;
            let b = unsup_out_of_sample_trace(&fit_unsupervised_pca(&fs, &x_s, k)?.embed(), &c);
            worst = worst.max((a - b).abs() / b);
        }
    }
    Ok((worst <= 1e-8, format!("max relative gap = {worst:.2e}")))
}

fn monotone_in_k(rng: &mut Rng) -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let model = random_model(rng, 10, 3, 0.3)?;
        let data = sample_dataset(&model, 6, 0, rand::Rng::random(rng))?;
        let fs = random_features(rng, 10, 8)?;
        let x_s = fs.restrict_rows(&data.x)?;
        let c = model.true_covariance();
        let errs: Vec<f64> = (1..=8)
            .map(|k| Ok(unsup_out_of_sample_trace(&fit_unsupervised_pca(&fs, &x_s, k)?.embed(), &c)))
            .collect::<Result<_>>()?;
        worst = errs.windows(2).map(|w| w[1] - w[0]).fold(worst, f64::max);
    }
    Ok((worst <= 1e-9, format!("largest increase = {worst:.2e}")))
}

fn regression_interpolation(rng: &mut Rng) -> Result<(bool, String)> {
    let model = random_model(rng, 16, 3, 0.3)?;
    let n = 8;
    let data = sample_dataset(&model, n, n, rand::Rng::random(rng))?;
    let order = grow_feature_orders(16, 1, rand::Rng::random(rng))?.remove(0);
    let mut worst: f64 = 0.0;
    for p in n - 1..=16 {
        let fs = FeatureSet::from_prefix(&order, p, 16)?;
        let est = fit_regression(&fs, &fs.restrict_rows(&data.x)?, data.targets()?)?;
        worst = worst.max(sup_in_sample(&est.embed(), &data)?);
    }
    Ok((worst <= 1e-8, format!("max in-sample error = {worst:.2e}")))
}

fn pca_interpolation(rng: &mut Rng) -> Result<(bool, String)> {
    let model = random_model(rng, 16, 3, 0.1)?;
    let n = 6;
    let data = sample_dataset(&model, n, 0, rand::Rng::random(rng))?;
    let order = grow_feature_orders(16, 1, rand::Rng::random(rng))?.remove(0);
    let mut worst: f64 = 0.0;
    for p in n + 1..=16 {
        let fs = FeatureSet::from_prefix(&order, p, 16)?;
        let x_s = fs.restrict_rows(&data.x)?;
        let scale = x_s.norm_squared() / n as f64;
        for k in n..=p {
            let est = fit_unsupervised_pca(&fs, &x_s, k)?;
            worst = worst.max(unsup_in_sample_s(&est.matrix, &x_s) / scale);
        }
    }
    Ok((worst <= 1e-8, format!("max relative in-sample error = {worst:.2e}")))
}

fn matrix_round_trip(rng: &mut Rng) -> Result<(bool, String)> {
    let a = gauss(rng, 4, 3) * 1e-3 + DMatrix::from_element(4, 3, 1.0 / 3.0);
    let back = parse_matrix(&format_matrix(&a))?;
    Ok((back == a, "4×3 matrix".into()))
}

fn csv_round_trip(rng: &mut Rng) -> Result<(bool, String)> {
    let mut cfg = SweepConfig::fully_supervised(16, 3, 6, 0.2);
    cfg.model.seed = rand::Rng::random(rng);
    cfg.trajectory = vec![PlanePoint::new(0.0, 0), PlanePoint::new(f64::INFINITY, 6)];
    cfg.k_values = vec![2, 5];
    cfg.p_min = 3;
    cfg.p_max = 8;
    cfg.num_orders = 2;
    let result = run_sweep(&cfg)?;
    let mut buf = Vec::new();
    write_csv_to(&result, &mut buf)?;
    let back = read_csv_from(buf.as_slice())?;
    Ok((back == result, format!("{} records", result.records.len())))
}
