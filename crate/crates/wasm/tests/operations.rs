use subplane_wasm::{double_descent, pca_heatmap, soft_projection};

#[test]
fn soft_projection_clamps_into_the_box() {
    let out = soft_projection(&[2.0, 1.0, 0.1], 0.21, 3).unwrap();
    let expect = [1.21f64.sqrt(), 1.0, 0.79f64.sqrt()];
    for (a, b) in out.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "{out:?}");
    }
    let hard = soft_projection(&[3.0, 0.5], 0.0, 1).unwrap();
    assert!(hard.iter().all(|s| (s - 1.0).abs() < 1e-12));
    let free = soft_projection(&[3.0, 0.5], f64::INFINITY, 1).unwrap();
    assert!((free[0] - 3.0).abs() < 1e-12 && (free[1] - 0.5).abs() < 1e-12);
    assert!(soft_projection(&[], 0.5, 0).is_err());
    assert!(soft_projection(&[1.0], -1.0, 0).is_err());
}

#[test]
fn double_descent_draws_one_curve_per_alpha() {
    let svg = double_descent(32, 0.5, "0.1, inf", 2, 0).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(double_descent(32, 0.5, "soft", 2, 0).is_err());
}

#[test]
fn heatmap_has_defined_cells_only() {
    let svg = pca_heatmap(8, 2, 5, 0.2, 2, 0).unwrap();
    assert_eq!(svg.matches("class=\"cell\"").count(), 8 * 9 / 2);
}
