use mpp_core::ModelSpec;
use mpp_wasm::{equilibrium_rows, meanfield_rows, ssa_rows};

#[test]
fn meanfield_rows_are_normalised_and_row_major() {
    let model = ModelSpec::default_logistic();
    let (points, m) = (11, 40);
    let rows = meanfield_rows(&model, 2.0, points, m).unwrap();
    assert_eq!(rows.len(), points * (m + 1));
    assert_eq!(&rows[..6], &[0.2, 0.0, 0.3, 0.0, 0.0, 0.5]);
    for row in rows.chunks(m + 1) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn simulated_rows_match_layout_and_are_reproducible() {
    let model = ModelSpec::default_logistic();
    let (points, m) = (21, 40);
    let a = ssa_rows(&model, 200, 1.0, points, m, 7).unwrap();
    assert_eq!(a.len(), points * (m + 1));
    assert_eq!(a, ssa_rows(&model, 200, 1.0, points, m, 7).unwrap());
    // densities are multiples of 1/N
    assert!(a.iter().all(|v| (v * 200.0 - (v * 200.0).round()).abs() < 1e-9));
}

#[test]
fn equilibrium_band_has_positive_variances() {
    let model = ModelSpec::default_logistic();
    let m = 60;
    let rows = equilibrium_rows(&model, m).unwrap();
    let (x, var) = rows.split_at(m + 1);
    assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    assert!(var.iter().all(|v| *v >= -1e-12));
    assert!(var[0] > 0.0 && var[1] > 0.0);
}
