use std::sync::Arc;

use ftwist_core::finsler::{geodesic, FinslerPoint, MetricEvaluator, NumericPlan};
use ftwist_core::metrics::{CovectorField, MatrixField, Randers, Riemannian};
use ftwist_core::real::reals;
use ftwist_core::Real;
use proptest::prelude::*;

fn sphere() -> Riemannian {
    Riemannian {
        field: MatrixField::Sphere { dim: 2 },
    }
}

fn polar() -> Riemannian {
    Riemannian { field: MatrixField::Polar }
}

fn randers(b: [f64; 3]) -> Randers {
    Randers {
        alpha: MatrixField::Constant {
            matrix: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        },
        beta: CovectorField {
            constant: b.to_vec(),
            linear: None,
        },
    }
}

struct Quartic;

impl MetricEvaluator for Quartic {
    fn dim(&self) -> usize {
        3
    }

    fn eval_raw(&self, _x: &[Real], y: &[Real]) -> Real {
        let s2: Real = y.iter().map(|v| *v * *v).sum();
        let s4: Real = y.iter().map(|v| v.powi(4)).sum();
        (s4 + s2 * s2 * 0.5).sqrt().sqrt()
    }
}

#[test]
fn round_sphere_has_unit_flag_curvature() {
    let plan = NumericPlan::default();
    let m = sphere();
    for (x, y) in [([0.2, -0.4], [1.0, 0.3]), ([0.7, 0.1], [-0.2, 0.9]), ([-0.5, 0.5], [0.4, 0.4])] {
        let p = FinslerPoint::new(&m, &reals(&x), &reals(&y), &plan).unwrap();
        let u = reals(&[y[1], -y[0]]);
        let k = p.flag_curvature(&u).unwrap().to_f64();
        assert!((k - 1.0).abs() < 1e-4, "{k}");
        let shifted: Vec<Real> = u.iter().zip(&reals(&y)).map(|(a, b)| *a + *b * 3.0).collect();
        let k2 = p.flag_curvature(&shifted).unwrap().to_f64();
        assert!((k - k2).abs() < 1e-6);
    }
}

#[test]
fn riemann_curvature_is_two_homogeneous() {
    let plan = NumericPlan::default();
    let m = randers([0.3, -0.1, 0.2]);
    let p = FinslerPoint::new(&m, &reals(&[0.1, 0.2, 0.3]), &reals(&[0.5, -0.7, 0.2]), &plan).unwrap();
    let q = FinslerPoint::new(&m, &reals(&[0.1, 0.2, 0.3]), &reals(&[1.0, -1.4, 0.4]), &plan).unwrap();
    let r1 = p.riemann_curvature().unwrap().map(|v| v * 4.0);
    let r2 = q.riemann_curvature().unwrap();
    assert!(r2.scaled_diff(&r1) < 1e-6);
    let s = sphere();
    let p = FinslerPoint::new(&s, &reals(&[0.2, 0.3]), &reals(&[0.5, -0.7]), &plan).unwrap();
    let q = FinslerPoint::new(&s, &reals(&[0.2, 0.3]), &reals(&[1.0, -1.4]), &plan).unwrap();
    assert!(q.riemann_curvature().unwrap().scaled_diff(&p.riemann_curvature().unwrap().map(|v| v * 4.0)) < 1e-6);
}

#[test]
fn quartic_norm_has_nonzero_matsumoto_torsion() {
    let plan = NumericPlan::default();
    let p = FinslerPoint::new(&Quartic, &reals(&[0.0; 3]), &reals(&[1.0, 0.4, -0.3]), &plan).unwrap();
    assert!(p.matsumoto_torsion().unwrap().max_abs() > 1e-3);
}

#[test]
fn conformal_flat_dual_flatness_residual() {
    let plan = NumericPlan::default();
    let m = Riemannian {
        field: MatrixField::LinearConformal {
            base: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            slope: vec![1.0, 0.0],
        },
    };
    let y = [0.6, -1.3];
    let p = FinslerPoint::new(&m, &reals(&[0.2, 0.5]), &reals(&y), &plan).unwrap();
    let r = p.ldf_residual().unwrap();
    let norm_sq = y[0] * y[0] + y[1] * y[1];
    let expect = [2.0 * y[0] * y[0] - 2.0 * norm_sq, 2.0 * y[0] * y[1]];
    for l in 0..2 {
        assert!((r[l].to_f64() - expect[l]).abs() < 1e-12, "{l}: {} vs {}", r[l], expect[l]);
    }
    let pm = polar();
    let q = FinslerPoint::new(&pm, &reals(&[1.5, 0.0]), &reals(&y), &plan).unwrap();
    assert!(q.ldf_residual().unwrap().iter().any(|v| v.abs().to_f64() > 1e-3));
}

/// RK4 on the Christoffel form of the polar geodesic equations.
fn christoffel_polar(x0: [f64; 2], v0: [f64; 2], t_end: f64, dt: f64) -> [f64; 2] {
    let rhs = |s: [f64; 4]| [s[2], s[3], s[0] * s[3] * s[3], -2.0 * s[2] * s[3] / s[0]];
    let mut s = [x0[0], x0[1], v0[0], v0[1]];
    let add = |a: [f64; 4], k: [f64; 4], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2], a[3] + h * k[3]];
    for _ in 0..(t_end / dt).round() as usize {
        let k1 = rhs(s);
        let k2 = rhs(add(s, k1, dt / 2.0));
        let k3 = rhs(add(s, k2, dt / 2.0));
        let k4 = rhs(add(s, k3, dt));
        for i in 0..4 {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    [s[0], s[1]]
}

#[test]
fn polar_geodesic_matches_christoffel_integrator() {
    let plan = NumericPlan::default();
    let traj = geodesic(&polar(), &reals(&[1.5, 0.1]), &reals(&[-0.3, 0.4]), 1.0, 1e-2, &plan).unwrap();
    assert!(!traj.truncated());
    let want = christoffel_polar([1.5, 0.1], [-0.3, 0.4], 1.0, 1e-2);
    let got = &traj.last().x;
    for i in 0..2 {
        assert!((got[i].to_f64() - want[i]).abs() < 1e-6);
    }
    assert!(traj.speed_drift() < 1e-6);
}

#[test]
fn evaluators_can_be_shared_across_threads() {
    let m: Arc<dyn MetricEvaluator> = Arc::new(sphere());
    let handles: Vec<_> = (0..2)
        .map(|k| {
            let m = Arc::clone(&m);
            std::thread::spawn(move || {
                let plan = NumericPlan::default();
                let p = FinslerPoint::new(m.as_ref(), &reals(&[0.1 * k as f64, 0.2]), &reals(&[1.0, 0.0]), &plan).unwrap();
                p.spray().unwrap()
            })
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap().len(), 2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn randers_invariants(
        b in prop::array::uniform3(-0.3f64..0.3),
        y in prop::array::uniform3(-2.0f64..2.0),
        lambda in 0.2f64..5.0,
    ) {
        prop_assume!(y.iter().map(|v| v * v).sum::<f64>() > 0.04);
        let plan = NumericPlan::default();
        let m = randers(b);
        let x = reals(&[0.1, -0.2, 0.3]);
        let yr = reals(&y);
        let ly: Vec<Real> = yr.iter().map(|v| *v * lambda).collect();
        let f = m.norm(&x, &yr).unwrap();
        let fl = m.norm(&x, &ly).unwrap();
        prop_assert!(((fl - f * lambda) / fl).abs().to_f64() < 1e-8);
        let p = FinslerPoint::new(&m, &x, &yr, &plan).unwrap();
        prop_assert!(p.fundamental_tensor().unwrap().symmetric_eigenvalues().iter().all(|e| *e > 0.0));
        let cy = p.cartan_tensor().unwrap().contract_last(&yr);
        prop_assert!(cy.max_abs() < 1e-7);
        let hy = p.angular_metric().unwrap().matvec(&yr);
        prop_assert!(hy.iter().all(|v| v.abs().to_f64() < 1e-7));
        prop_assert!(p.matsumoto_torsion().unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn sphere_spray_is_quadratic(x in prop::array::uniform2(-0.8f64..0.8), y in prop::array::uniform2(0.3f64..1.5)) {
        let plan = NumericPlan::default();
        let m = sphere();
        let p = FinslerPoint::new(&m, &reals(&x), &reals(&y), &plan).unwrap();
        let q = FinslerPoint::new(&m, &reals(&x), &reals(&[2.0 * y[0], 2.0 * y[1]]), &plan).unwrap();
        let (g1, g2) = (p.spray().unwrap(), q.spray().unwrap());
        for i in 0..2 {
            prop_assert!((g2[i] - g1[i] * 4.0).abs().to_f64() < 1e-7 * (1.0 + g2[i].abs().to_f64()));
        }
        prop_assert!(p.berwald_curvature().unwrap().max_abs() < 1e-5);
    }
}
