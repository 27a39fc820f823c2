use fracdiff::mittag_leffler::{ml, ml_deriv, MlQuery};
use proptest::prelude::*;

fn reference_rows() -> Vec<(f64, f64, f64, f64)> {
    include_str!("data/ml_reference.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|t| t.parse().unwrap()).collect();
            (v[0], v[1], v[2], v[3])
        })
        .collect()
}

#[test]
fn matches_high_precision_reference() {
    let mut worst = (0.0, (0.0, 0.0, 0.0));
    for (beta, nu, z, expected) in reference_rows() {
        let got = ml(MlQuery::new(beta, nu, z).unwrap()).unwrap();
        let err = (got - expected).abs();
        if err > worst.0 {
            worst = (err, (beta, nu, z));
        }
    }
    println!("worst abs error {:e} at {:?}", worst.0, worst.1);
    assert!(worst.0 <= 1e-12);
}

#[test]
fn derivative_fd_oracle_at_fixed_point() {
    let (beta, z, h) = (0.6, -2.0, 1e-6);
    let f = |z: f64| ml(MlQuery::new(beta, 1.0, z).unwrap()).unwrap();
    let fd = (f(z + h) - f(z - h)) / (2.0 * h);
    let d = ml_deriv(MlQuery::new(beta, 1.0, z).unwrap()).unwrap();
    assert!((fd - d).abs() <= 1e-7, "fd {fd} vs {d}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn derivative_matches_central_difference(beta in 0.05f64..0.95, z in -100.0f64..0.0) {
        let h = 1e-6;
        let f = |z: f64| ml(MlQuery::new(beta, 1.0, z).unwrap()).unwrap();
        let fd = (f(z + h) - f(z - h)) / (2.0 * h);
        let d = ml_deriv(MlQuery::new(beta, 1.0, z).unwrap()).unwrap();
        prop_assert!((fd - d).abs() <= 1e-7, "beta={} z={} fd={} d={}", beta, z, fd, d);
    }
}
