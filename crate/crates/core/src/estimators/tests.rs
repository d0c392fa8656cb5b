use super::*;
use crate::model::{center, make_hadamard_basis, sample_dataset, GroundTruthModel};
use crate::rng::stream;
use crate::spectral::{project_hard, singular_values};

fn gauss(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    gaussian_matrix(&mut stream(seed, 77), rows, cols, 1.0)
}

fn centered(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    center(gauss(rows, cols, seed)).0
}

fn in_sample_s(w: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    UnsupervisedCost::new(x).value(w) / x.ncols() as f64
}

#[test]
fn pca_of_repeated_column() {
    let v = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 2.0]);
    let x = DMatrix::from_fn(3, 5, |i, _| v[(i, 0)]);
    let est = fit_unsupervised_pca(&FeatureSet::all(3), &x, 1).unwrap();
    let unit = &v / 3.0;
    let col = est.matrix.column(0).into_owned();
    let err = (&col - &unit).amax().min((&col + &unit).amax());
    assert!(err < 1e-12);
}

#[test]
fn pca_rank_overparameterized_interpolates() {
    let x = centered(13, 12, 1);
    let fs = FeatureSet::all(13);
    let est = fit_unsupervised_pca(&fs, &x, 12).unwrap();
    let scale = x.norm_squared() / 12.0;
    assert!(in_sample_s(&est.matrix, &x) <= 1e-9 * scale);
    let full = fit_unsupervised_pca(&fs, &x, 13).unwrap();
    assert!(in_sample_s(&full.matrix, &x) <= 1e-9 * scale);
    let gram = est.matrix.transpose() * &est.matrix;
    assert!((gram - DMatrix::<f64>::identity(12, 12)).amax() < 1e-9);
}

#[test]
fn pca_parameter_errors() {
    let x = gauss(4, 6, 2);
    let fs = FeatureSet::all(4);
    assert!(matches!(fit_unsupervised_pca(&fs, &x, 5), Err(Error::Parameter(_))));
    assert!(fit_unsupervised_pca(&fs, &x, 0).is_err());
    assert!(fit_unsupervised_pca(&FeatureSet::all(5), &x, 2).is_err());
}

#[test]
fn pca_maximizes_captured_variance() {
    let x = centered(6, 20, 3);
    let cov = &x * x.transpose() / 20.0;
    let est = fit_unsupervised_pca(&FeatureSet::all(6), &x, 2).unwrap();
    let best = (est.matrix.transpose() * &cov * &est.matrix).trace();
    for s in 0..100 {
        let q = project_hard(&gauss(6, 2, 1000 + s)).unwrap();
        assert!((q.transpose() * &cov * &q).trace() <= best + 1e-12);
    }
}

#[test]
fn regression_identity_design() {
    let z = gauss(2, 4, 4);
    let est = fit_regression(&FeatureSet::all(4), &DMatrix::identity(4, 4), &z).unwrap();
    assert!((est.matrix - z.transpose()).amax() < 1e-12);
}

#[test]
fn regression_matches_normal_equations() {
    let x = gauss(3, 5, 5);
    let z = gauss(2, 5, 6);
    let est = fit_regression(&FeatureSet::all(3), &x, &z).unwrap();
    let normal = (&x * x.transpose()).try_inverse().unwrap() * &x * z.transpose();
    assert!((est.matrix - normal).amax() < 1e-8);
}

#[test]
fn regression_interpolates_when_overparameterized() {
    let n = 10;
    let z = centered(3, n, 7);
    for p in [n - 1, n, n + 5] {
        let x = centered(p, n, 8 + p as u64);
        let est = fit_regression(&FeatureSet::all(p), &x, &z).unwrap();
        let cost = SupervisedCost::new(&x, &z).unwrap();
        assert!(cost.value(&est.matrix) <= 1e-10, "p={p}");
    }
}

#[test]
fn regression_is_minimum_norm() {
    // rank-deficient: p > n, so X^T has a null space
    let x = gauss(8, 5, 9);
    let z = gauss(2, 5, 10);
    let est = fit_regression(&FeatureSet::all(8), &x, &z).unwrap();
    let cost = SupervisedCost::new(&x, &z).unwrap();
    let base = cost.value(&est.matrix);
    // projector onto the null space of X^T
    let proj = DMatrix::<f64>::identity(8, 8) - &x * pseudoinverse(&x);
    for s in 0..20 {
        let w = &est.matrix + &proj * gauss(8, 2, 100 + s);
        assert!((cost.value(&w) - base).abs() < 1e-8);
        assert!(w.norm() >= est.matrix.norm() - 1e-12);
    }
}

fn fig3_like(p: usize, seed: u64) -> (FeatureSet, DMatrix<f64>, DMatrix<f64>) {
    let model = GroundTruthModel::new(make_hadamard_basis(16, 3).unwrap(), 0.3).unwrap();
    let data = sample_dataset(&model, 12, 12, seed).unwrap();
    let fs = FeatureSet::new((0..p).collect(), 16).unwrap();
    let x = fs.restrict_rows(&data.x).unwrap();
    (fs, x, data.z.unwrap())
}

#[test]
fn supervised_unconstrained_equals_regression() {
    let (fs, x, z) = fig3_like(8, 1);
    let rep = fit_supervised_pgd(&fs, &x, &z, ConstraintLevel::unconstrained(), &PgdOptions::default())
        .unwrap();
    let reg = fit_regression(&fs, &x, &z).unwrap();
    let target = SupervisedCost::new(&x, &z).unwrap().value(&reg.matrix);
    assert!((rep.final_objective - target).abs() <= 1e-6 * target.max(1e-12));
}

#[test]
fn supervised_hard_is_feasible() {
    let (fs, x, z) = fig3_like(10, 2);
    let rep = fit_supervised_pgd(&fs, &x, &z, ConstraintLevel::hard(), &PgdOptions::default()).unwrap();
    let s = singular_values(&rep.estimate.matrix);
    assert!(s.iter().all(|v| (v - 1.0).abs() <= 1e-6));
    assert!(rep.final_objective <= rep.objective_trace[0]);
    assert_eq!(rep.final_objective, *rep.objective_trace.last().unwrap());
}

#[test]
fn supervised_soft_feasible_for_all_levels() {
    let (fs, x, z) = fig3_like(12, 3);
    for alpha in [0.0, 0.05, 0.3, 1.0, 3.0] {
        let level = ConstraintLevel::new(alpha).unwrap();
        let rep = fit_supervised_pgd(&fs, &x, &z, level, &PgdOptions::default()).unwrap();
        for s in singular_values(&rep.estimate.matrix).iter() {
            assert!((s * s - 1.0).abs() <= alpha + 1e-9, "alpha={alpha} s={s}");
        }
        assert!(rep.final_objective <= rep.objective_trace[0]);
    }
}

#[test]
fn supervised_noiseless_procrustes() {
    let p = 4;
    let q = project_hard(&gauss(p, p, 11)).unwrap();
    let z = gauss(p, 30, 12);
    let x = &q * &z;
    let fs = FeatureSet::all(p);
    let rep = fit_supervised_pgd(&fs, &x, &z, ConstraintLevel::hard(), &PgdOptions::default()).unwrap();
    assert!(rep.final_objective < 1e-12);
    assert!((rep.estimate.matrix - q).amax() < 1e-6);
}

#[test]
fn supervised_rejects_p_below_m() {
    let x = gauss(2, 6, 1);
    let z = gauss(3, 6, 2);
    let r = fit_supervised_pgd(&FeatureSet::all(2), &x, &z, ConstraintLevel::hard(), &PgdOptions::default());
    assert!(matches!(r, Err(Error::Parameter(_))));
}

#[test]
fn semisupervised_without_unlabeled_matches_regression() {
    let x = centered(4, 20, 13);
    let z = centered(2, 20, 14);
    let empty = DMatrix::zeros(4, 0);
    let fs = FeatureSet::all(4);
    let opts = PgdOptions {
        rel_tol: 1e-14,
        max_iters: 20_000,
        ..Default::default()
    };
    let rep = fit_semisupervised_pgd(&fs, &x, &z, &empty, ConstraintLevel::unconstrained(), &opts).unwrap();
    let reg = fit_regression(&fs, &x, &z).unwrap();
    // semi-supervised cost has no 1/n factor
    let target = SupervisedCost::new(&x, &z).unwrap().value(&reg.matrix) * 20.0;
    assert!((rep.final_objective - target).abs() <= 1e-4 * target);
}

#[test]
fn semisupervised_without_labels_is_unsupervised_cost() {
    let x = centered(6, 15, 15);
    let w = gauss(6, 2, 16);
    let no_x = DMatrix::zeros(6, 0);
    let no_z = DMatrix::zeros(2, 0);
    let semi = SemisupervisedCost::new(&no_x, &no_z, &x).unwrap();
    let unsup = UnsupervisedCost::new(&x);
    assert!((semi.value(&w) - unsup.value(&w)).abs() < 1e-12);
    assert!((semi.direction(&w) - unsup.direction(&w)).amax() < 1e-12);
}

#[test]
fn semisupervised_is_feasible_and_deterministic() {
    let model = GroundTruthModel::new(make_hadamard_basis(16, 3).unwrap(), 0.3).unwrap();
    let data = sample_dataset(&model, 14, 6, 3).unwrap();
    let fs = FeatureSet::new((0..10).collect(), 16).unwrap();
    let xs = fs.restrict_rows(&data.x_sup()).unwrap();
    let xu = fs.restrict_rows(&data.x_unsup()).unwrap();
    let zs = data.z_sup().unwrap();
    let opts = PgdOptions {
        seed: 99,
        ..Default::default()
    };
    let level = ConstraintLevel::new(0.3).unwrap();
    let a = fit_semisupervised_pgd(&fs, &xs, &zs, &xu, level, &opts).unwrap();
    let b = fit_semisupervised_pgd(&fs, &xs, &zs, &xu, level, &opts).unwrap();
    assert_eq!(a, b);
    assert!(level.is_feasible(&a.estimate.matrix, 1e-9));
    assert!(a.final_objective <= a.objective_trace[0]);
}

/// Central differences of `cost.value`; compared against twice the direction.
pub(crate) fn finite_difference(cost: &dyn Cost, w: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(w.nrows(), w.ncols());
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            let mut plus = w.clone();
            plus[(i, j)] += h;
            let mut minus = w.clone();
            minus[(i, j)] -= h;
            g[(i, j)] = (cost.value(&plus) - cost.value(&minus)) / (2.0 * h);
        }
    }
    g
}

#[test]
fn semisupervised_direction_matches_finite_differences() {
    for s in 0..5 {
        let xs = gauss(6, 4, 200 + s);
        let zs = gauss(3, 4, 300 + s);
        let xu = gauss(6, 5, 400 + s);
        let w = gauss(6, 3, 500 + s);
        let cost = SemisupervisedCost::new(&xs, &zs, &xu).unwrap();
        let fd = finite_difference(&cost, &w, 1e-5);
        let analytic = cost.direction(&w) * 2.0;
        assert!((&fd - &analytic).norm() <= 1e-5 * analytic.norm());
    }
}

#[test]
fn unsupervised_direction_matches_finite_differences() {
    for s in 0..5 {
        let x = gauss(5, 7, 600 + s);
        let w = gauss(5, 2, 700 + s);
        let cost = UnsupervisedCost::new(&x);
        let fd = finite_difference(&cost, &w, 1e-5);
        let analytic = cost.direction(&w) * 2.0;
        assert!((&fd - &analytic).norm() <= 1e-5 * analytic.norm());
    }
}

#[test]
fn unsupervised_pgd_noiseless_subspace() {
    // samples live in the span of the first two coordinates
    let mut x = DMatrix::zeros(6, 20);
    let src = centered(2, 20, 17);
    x.rows_mut(0, 2).copy_from(&src);
    let fs = FeatureSet::all(6);
    let opts = PgdOptions {
        seed: 3,
        rel_tol: 1e-14,
        ..Default::default()
    };
    let rep = fit_unsupervised_pgd(&fs, &x, 2, ConstraintLevel::hard(), &opts).unwrap();
    assert!(rep.final_objective <= 1e-8, "{}", rep.final_objective);
}

#[test]
fn unsupervised_pgd_follows_pca() {
    let model = GroundTruthModel::new(make_hadamard_basis(16, 3).unwrap(), 0.1).unwrap();
    let data = sample_dataset(&model, 30, 0, 8).unwrap();
    let fs = FeatureSet::all(16);
    let pca = fit_unsupervised_pca(&fs, &data.x, 3).unwrap().matrix;
    let target = &pca * pca.transpose();
    for alpha in [0.0, 0.5, f64::INFINITY] {
        let opts = PgdOptions {
            seed: 5,
            ..Default::default()
        };
        let level = ConstraintLevel { alpha, floor_mode: true };
        let rep = fit_unsupervised_pgd(&fs, &data.x, 3, level, &opts).unwrap();
        let w = &rep.estimate.matrix;
        let dist = (w * w.transpose() - &target).norm();
        assert!(dist <= 0.05 * 3f64.sqrt(), "alpha={alpha} dist={dist}");
        assert!(level.is_feasible(w, 1e-9));
    }
}

#[test]
fn embed_cases() {
    let q = project_hard(&gauss(3, 2, 18)).unwrap();
    let fs = FeatureSet::new(vec![1, 4, 6], 8).unwrap();
    let est = SubspaceEstimate::new(q.clone(), fs.clone()).unwrap();
    let full = est.embed();
    assert_eq!(full.shape(), (8, 2));
    for r in fs.complement() {
        assert!(full.row(r).iter().all(|&v| v == 0.0));
    }
    assert!((full.transpose() * &full - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    assert_eq!(fs.restrict_rows(&full).unwrap(), q);

    let all = SubspaceEstimate::new(q.clone(), FeatureSet::all(3)).unwrap();
    assert_eq!(all.embed(), q);
    assert!(SubspaceEstimate::new(q, FeatureSet::all(4)).is_err());
}
