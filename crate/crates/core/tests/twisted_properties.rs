use ftwist_core::finsler::{FinslerPoint, MetricEvaluator, NumericPlan};
use ftwist_core::real::reals;
use ftwist_core::twisted::Slot;
use ftwist_core::{catalog, catalog_entry, Real};
use proptest::prelude::*;

#[test]
fn every_catalog_entry_builds_and_validates() {
    for spec in catalog() {
        let t = spec.instantiate().unwrap();
        let (n1, n2) = spec.dims();
        assert_eq!(t.dim(), n1 + n2, "{}", spec.id);
    }
}

#[test]
fn riemannian_components_give_zero_mixed_vertical_blocks() {
    let spec = catalog_entry("twisted").unwrap();
    let t = spec.instantiate().unwrap();
    let p = t.point(&reals(&[1.3, 0.2, 0.1, -0.4]), &reals(&[0.4, 0.9, -0.6, 0.3]), &NumericPlan::default()).unwrap();
    let v = p.vertical_coefficients().unwrap();
    assert_eq!(v.block_max(&[Slot::M2, Slot::M1, Slot::M1]), 0.0);
    let summary = v.block_summary();
    assert_eq!(summary.len(), 8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn product_norm_and_spray_agree_with_oracle(
        x in prop::array::uniform4(-0.6f64..0.6),
        y in prop::array::uniform4(-1.5f64..1.5),
        lambda in 0.3f64..3.0,
    ) {
        prop_assume!(y[0].hypot(y[1]) > 0.2 && y[2].hypot(y[3]) > 0.2);
        let spec = catalog_entry("randers-randers").unwrap();
        let t = spec.instantiate().unwrap();
        let plan = NumericPlan::default();
        let (xr, yr) = (reals(&x), reals(&y));
        let p = t.point(&xr, &yr, &plan).unwrap();
        let (a, b) = p.component_norms_sq();
        let f = p.twist();
        prop_assert!(((p.norm() * p.norm() - a - f * f * b) / (p.norm() * p.norm())).abs().to_f64() < 1e-28);
        let ly: Vec<Real> = yr.iter().map(|v| *v * lambda).collect();
        let fl = t.norm(&xr, &ly).unwrap();
        prop_assert!(((fl - p.norm() * lambda) / fl).abs().to_f64() < 1e-25);

        let oracle = FinslerPoint::new(&t, &xr, &yr, &plan).unwrap();
        let closed = p.spray().unwrap().tensor;
        let scale = oracle.spray().unwrap().iter().map(|v| v.abs().to_f64()).fold(1.0, f64::max);
        let diff = closed
            .data()
            .iter()
            .zip(oracle.spray().unwrap())
            .map(|(u, v)| (*u - v).abs().to_f64())
            .fold(0.0, f64::max);
        prop_assert!(diff / scale < 1e-5);

        let g = p.block_metric().unwrap().tensor;
        prop_assert!(g.scaled_diff(&oracle.fundamental_tensor().unwrap()) < 1e-6);
        let q = t.point(&xr, &ly, &plan).unwrap();
        let scaled = p.spray().unwrap().tensor.map(|v| v * (lambda * lambda));
        prop_assert!(q.spray().unwrap().tensor.scaled_diff(&scaled) < 1e-12);
    }
}
