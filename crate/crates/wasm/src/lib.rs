//! Browser bindings: three small interactive operations over the core crate.
//! Each returns either an SVG document or plain numbers for the page to show.

use wasm_bindgen::prelude::*;

use subplane_core::harness::{
    curves_svg, heatmap_svg, run_sweep, BasisKind, PlanePoint, SweepConfig,
};
use subplane_core::rng::{gaussian_matrix, stream};
use subplane_core::spectral::{project_hard, project_soft, singular_values, ConstraintLevel};

fn parse_alphas(list: &str) -> Result<Vec<f64>, String> {
    list.split(',')
        .map(|s| match s.trim() {
            "inf" => Ok(f64::INFINITY),
            t => t
                .parse::<f64>()
                .ok()
                .filter(|a| *a >= 0.0)
                .ok_or_else(|| format!("bad alpha {t:?}")),
        })
        .collect()
}

/// Fully supervised error curves over p, one per softness in `alphas`.
pub fn double_descent(
    n: usize,
    sigma: f64,
    alphas: &str,
    orders: usize,
    seed: u64,
) -> Result<String, String> {
    let mut cfg = SweepConfig::fully_supervised(64, 20, n, sigma);
    cfg.model.seed = seed;
    cfg.num_orders = orders;
    cfg.trajectory = parse_alphas(alphas)?
        .into_iter()
        .map(|a| PlanePoint::new(a, n))
        .collect();
    cfg.pgd.max_iters = 300;
    run_sweep(&cfg).map(|r| curves_svg(&r)).map_err(|e| e.to_string())
}

/// Singular values after the soft projection of a random matrix whose
/// singular values are `values`.
pub fn soft_projection(values: &[f64], alpha: f64, seed: u64) -> Result<Vec<f64>, String> {
    let m = values.len();
    if m == 0 || values.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err("need at least one non-negative singular value".into());
    }
    let level = if alpha.is_infinite() {
        ConstraintLevel::unconstrained()
    } else {
        ConstraintLevel::new(alpha).map_err(|e| e.to_string())?
    };
    let mut rng = stream(seed, 0);
    let err = |e: subplane_core::Error| e.to_string();
    let left = project_hard(&gaussian_matrix(&mut rng, m + 2, m, 1.0)).map_err(err)?;
    let right = project_hard(&gaussian_matrix(&mut rng, m, m, 1.0)).map_err(err)?;
    let diag = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values));
    let w = left * diag * right.transpose();
    let projected = project_soft(&w, level).map_err(err)?;
    Ok(singular_values(&projected).iter().copied().collect())
}

/// Averaged PCA out-of-sample error over the p×k grid.
pub fn pca_heatmap(d: usize, m: usize, n: usize, sigma: f64, orders: usize, seed: u64) -> Result<String, String> {
    let mut cfg = SweepConfig::fully_supervised(d, m, n, sigma);
    cfg.model.basis = BasisKind::Hadamard;
    cfg.model.seed = seed;
    cfg.num_orders = orders;
    cfg.trajectory = vec![PlanePoint::new(0.0, 0)];
    cfg.k_values = (1..=d).collect();
    cfg.p_min = 1;
    cfg.p_max = d;
    run_sweep(&cfg).map(|r| heatmap_svg(&r)).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = doubleDescent)]
pub fn double_descent_js(n: usize, sigma: f64, alphas: &str, orders: usize, seed: u32) -> Result<String, JsError> {
    double_descent(n, sigma, alphas, orders, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = softProjection)]
pub fn soft_projection_js(values: Vec<f64>, alpha: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    soft_projection(&values, alpha, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = pcaHeatmap)]
pub fn pca_heatmap_js(d: usize, m: usize, n: usize, sigma: f64, orders: usize, seed: u32) -> Result<String, JsError> {
    pca_heatmap(d, m, n, sigma, orders, seed.into()).map_err(|e| JsError::new(&e))
}
