//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::Instant;

use ftwist_core::classify::{classify_all, ClassificationReport, ClassifyOptions, Verdict};
use ftwist_core::finsler::{geodesic, FinslerPoint, NumericPlan};
use ftwist_core::metrics::{catalog, DEFAULT_BATTERY};
use ftwist_core::real::reals;
use ftwist_core::verify::{battery, verify, warped_curvature_residuals, VerificationReport};
use ftwist_core::{catalog_entry, Real, VerifyOptions};

struct Outcome {
    pass: bool,
    summary: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: String) -> Self {
        Outcome {
            pass,
            summary,
            notes: Vec::new(),
        }
    }

    fn note(mut self, s: String) -> Self {
        self.notes.push(s);
        self
    }
}

/// Largest residual of `identity` over the listed entries (all when empty),
/// with the entry attaining it.
fn worst(report: &VerificationReport, identity: &str, only: &[&str]) -> (f64, String) {
    report
        .entries
        .iter()
        .filter(|e| only.is_empty() || only.contains(&e.id.as_str()))
        .filter_map(|e| e.row(identity).map(|r| (r.max_residual, e.id.clone())))
        .fold((0.0, String::from("-")), |a, b| if b.0 > a.0 { b } else { a })
}

fn below(report: &VerificationReport, identity: &str, only: &[&str], tol: f64) -> (bool, String) {
    let (r, at) = worst(report, identity, only);
    (r < tol, format!("{identity}: {r:.2e} at {at} (tol {tol:.0e})"))
}

fn combine(parts: Vec<(bool, String)>) -> Outcome {
    let pass = parts.iter().all(|p| p.0);
    let summary = parts.iter().map(|p| p.1.clone()).collect::<Vec<_>>().join("; ");
    Outcome::new(pass, summary)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let plan = NumericPlan::default();
    let mut worst_res = 0.0f64;
    let mut count = 0;
    let battery_specs: Vec<_> = catalog().into_iter().take(DEFAULT_BATTERY).collect();
    for spec in &battery_specs {
        let t = spec.instantiate().unwrap();
        for s in battery(spec, &t, 100, 42).unwrap() {
            let closed = t.point(&s.x, &s.y, &plan).unwrap().block_metric().unwrap().tensor;
            let oracle = FinslerPoint::at(&t, &s, &plan).unwrap().fundamental_tensor().unwrap();
            worst_res = worst_res.max(closed.scaled_diff(&oracle));
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst_res < 1e-6 && secs < 30.0 && battery_specs.len() >= 6,
        format!("block metric over {} entries x 100 = {count} samples: max rel {worst_res:.2e} (tol 1e-6), {secs:.1} s (limit 30 s)", battery_specs.len()),
    )
}

fn criterion_5(report: &VerificationReport) -> Outcome {
    let randers = ["randers-sphere", "polar-randers", "randers-randers"];
    let (ok, text) = below(report, "matsumoto contraction", &randers, 1e-5);
    // the identity is only informative where the right-hand side is nonzero
    let spec = catalog_entry("randers-randers").unwrap();
    let t = spec.instantiate().unwrap();
    let s = &battery(&spec, &t, 1, 42).unwrap()[0];
    let (ra, ri) = t.point(&s.x, &s.y, &NumericPlan::default()).unwrap().matsumoto_contraction_rhs().unwrap();
    let size = ra.iter().chain(&ri).map(|v| v.abs().to_f64()).fold(0.0, f64::max);
    Outcome::new(ok && size > 1e-4, text).note(format!("right-hand side magnitude on randers-randers: {size:.2e}"))
}

fn criterion_7(report: &VerificationReport) -> Outcome {
    let stated = below(report, "mean berwald (coefficient f on I_{;α;β})", &[], 1e-4);
    let trace = below(report, "mean berwald is half the berwald trace", &[], 1e-10);
    let corrected = below(report, "mean berwald", &[], 1e-4);
    let failing: Vec<String> = report
        .entries
        .iter()
        .filter(|e| e.row("mean berwald (coefficient f on I_{;α;β})").is_some_and(|r| !r.pass))
        .map(|e| e.id.clone())
        .collect();
    combine(vec![stated, trace])
        .note(format!("entries where coefficient f fails: {failing:?}"))
        .note(format!("with coefficient 1/f on the I_{{;α;β}} term: {}", corrected.1))
}

fn criterion_8() -> Outcome {
    let spec = catalog_entry("warped").unwrap();
    let t = spec.instantiate().unwrap();
    let plan = NumericPlan::default();
    let (mut plus, mut minus, mut grad) = (0.0f64, 0.0f64, 0.0f64);
    for s in battery(&spec, &t, 3, 42).unwrap() {
        let p = t.point(&s.x, &s.y, &plan).unwrap();
        let (m, pl) = warped_curvature_residuals(&p).unwrap();
        plus = plus.max(pl);
        minus = minus.max(m);
        let want = (s.x[0] * 2.0).exp();
        grad = grad.max(((p.grad_twist_norm_sq().unwrap() - want) / want).abs().to_f64());
    }
    Outcome::new(
        plus < 1e-4 && grad < 1e-12,
        format!("R^γ_αβλ = R + |grad f|^2 (δ^γ_λ g_αβ - δ^γ_β g_αλ) on warped: max {plus:.2e} (tol 1e-4); |grad f|^2 = e^(2x^1): rel {grad:.1e}"),
    )
    .note(format!("with the opposite sign, R - |grad f|^2 (δ^γ_λ g_αβ - δ^γ_β g_αλ): max {minus:.2e}"))
}

fn criterion_10() -> Outcome {
    let spec = catalog_entry("trivial").unwrap();
    let t = spec.instantiate().unwrap();
    let plan = NumericPlan::default();
    let mut worst_res = 0.0f64;
    for s in battery(&spec, &t, 5, 42).unwrap() {
        let p = t.point(&s.x, &s.y, &plan).unwrap();
        let o = FinslerPoint::at(&t, &s, &plan).unwrap();
        for m in [
            p.nonlinear_curvature().unwrap().tensor.max_abs(),
            p.berwald_connection_curvature().unwrap().tensor.max_abs(),
            p.berwald_blocks().unwrap().tensor.max_abs(),
            p.mean_berwald_blocks().unwrap().tensor.max_abs(),
            o.riemann_curvature().unwrap().max_abs(),
            o.nonlinear_curvature().unwrap().max_abs(),
            o.berwald_curvature().unwrap().max_abs(),
            o.mean_berwald().unwrap().max_abs(),
        ] {
            worst_res = worst_res.max(m);
        }
    }
    Outcome::new(worst_res < 1e-6, format!("every curvature object on trivial: max {worst_res:.2e} (tol 1e-6)"))
}

struct Classified {
    id: String,
    reports: Vec<ClassificationReport>,
}

impl Classified {
    fn get(&self, predicate: &str) -> &ClassificationReport {
        self.reports.iter().find(|r| r.predicate == predicate).unwrap()
    }

    fn check(&self, predicate: &str, check: &str) -> (f64, bool) {
        let c = self.get(predicate).checks.iter().find(|c| c.name == check).unwrap();
        (c.max_residual, c.holds)
    }
}

fn criterion_11() -> Outcome {
    let plan = NumericPlan::default();
    let opts = ClassifyOptions::default();
    let all: Vec<Classified> = catalog()
        .into_iter()
        .map(|spec| {
            let t = spec.instantiate().unwrap();
            let samples = battery(&spec, &t, 5, 42).unwrap();
            Classified {
                id: spec.id.clone(),
                reports: classify_all(&t, &samples, &opts).unwrap(),
            }
        })
        .collect();
    let by = |id: &str| all.iter().find(|c| c.id == id).unwrap();
    let verdict = |id: &str, pred: &str| by(id).get(pred).verdict;
    let mut parts: Vec<(bool, String)> = Vec::new();
    let mut expect = |ok: bool, what: &str| parts.push((ok, what.to_string()));

    expect(verdict("trivial", "riemannian") == Verdict::Holds && verdict("euclid-expu", "riemannian") == Verdict::Holds, "euclidean products riemannian");
    expect(verdict("randers-euclid", "riemannian") == Verdict::Fails, "randers x euclidean not riemannian");
    expect(verdict("twisted", "riemannian") == Verdict::Holds, "polar x sphere riemannian");

    let cr = by("randers-randers-const").get("c-reducible");
    expect(cr.residuals.iter().all(|m| *m > 1e-3), "randers x randers, f = 1.2: Matsumoto torsion nonzero at every sample");
    let contraction = all.iter().all(|c| {
        c.check("c-reducible", "contraction y^j y^k M_ajk").1 && c.check("c-reducible", "contraction v^b v^l M_ibl").1
    });
    expect(contraction, "Matsumoto contraction identities below 1e-5 on every entry");
    expect(by("twisted").get("c-reducible").verdict == Verdict::Holds, "riemannian product has vanishing Matsumoto torsion");

    expect(by("twisted").get("semi-c-reducible").fits.is_empty(), "semi-C fit skipped on the riemannian product");
    let (p_max, p_ok) = by("randers-randers").check("semi-c-reducible", "fitted p where the ansatz applies");
    expect(p_ok, &format!("randers x randers semi-C fit p = {p_max:.1e} where the ansatz applies"));

    expect(verdict("trivial", "berwald") == Verdict::Holds, "flat product berwald");
    expect(
        verdict("randers-euclid", "berwald") == Verdict::Fails && !by("randers-euclid").check("berwald", "M1 Berwald").1,
        "randers x euclidean, f = 1: M1 Berwald block nonzero",
    );
    expect(
        verdict("euclid-randers", "berwald") == Verdict::Fails
            && !by("euclid-randers").check("berwald", "M2 Riemannian (f varies on M1)").1,
        "euclidean x randers, f = 1 + 0.1x^1: M2 Riemannian condition violated",
    );

    let iso_block = all.iter().map(|c| c.check("isotropic-berwald", "fitted c from the B^γ_jkl block").0).fold(0.0, f64::max);
    expect(iso_block < 1e-6, &format!("isotropic c fitted from the B^γ_jkl block: {iso_block:.1e} (tol 1e-6)"));
    let iso_fit = all.iter().map(|c| c.check("isotropic-berwald", "fitted c where the ansatz applies").0).fold(0.0, f64::max);
    expect(iso_fit < 1e-6, &format!("isotropic c where the ansatz applies: {iso_fit:.1e} (tol 1e-6)"));

    expect(verdict("trivial", "weakly-berwald") == Verdict::Holds, "flat product weakly berwald");
    expect(
        verdict("randers-euclid-affine", "weakly-berwald") == Verdict::Fails && !by("randers-euclid-affine").check("weakly-berwald", "I^h f_h = 0").1,
        "randers x euclidean, f = 1 + 0.1x^1: E_iβ nonzero",
    );
    let mean_fit = all.iter().map(|c| c.check("weakly-berwald", "isotropic mean fit c where the ansatz applies").0).fold(0.0, f64::max);
    expect(mean_fit < 1e-6, &format!("isotropic mean c where the ansatz applies: {mean_fit:.1e} (tol 1e-6)"));

    expect(by("trivial").get("locally-dually-flat").max_residual < 1e-12, "flat product: dual flatness residuals zero");
    expect(
        !by("euclid-expu").check("locally-dually-flat", "f_α v^α v_β = f_β F2^2").1,
        "f = e^(u^1): second Im6 condition fails",
    );
    let inconsistent: Vec<String> = all
        .iter()
        .flat_map(|c| c.reports.iter().filter(|r| !r.theorem_consistent).map(move |r| format!("{}/{}", c.id, r.predicate)))
        .collect();
    expect(inconsistent.is_empty(), &format!("theorem-consistent on all {} entries", all.len()));

    // Im1 against the oracle for euclidean components: 4 f f_l F2^2
    let mut im1 = 0.0f64;
    for id in ["warped", "trivial"] {
        let spec = catalog_entry(id).unwrap();
        let t = spec.instantiate().unwrap();
        for s in battery(&spec, &t, 20, 42).unwrap() {
            let p = t.point(&s.x, &s.y, &plan).unwrap();
            let o = FinslerPoint::at(&t, &s, &plan).unwrap();
            let r = o.ldf_residual().unwrap();
            let f2sq = p.component_norms_sq().1;
            for (l, fl) in p.twist_grad_x().iter().enumerate() {
                let expect4 = p.twist() * *fl * f2sq * 4.0;
                im1 = im1.max((-r[l] - expect4).abs().to_f64());
            }
        }
    }
    let (warped_m1, _) = by("warped").check("locally-dually-flat", "M1 condition");
    expect(im1 < 1e-7 && warped_m1 > 1e-3, &format!("Im1 residual = 4 f f_l F2^2: {im1:.1e} (tol 1e-7), nonzero on warped ({warped_m1:.2})"));

    let failed: Vec<String> = parts.iter().filter(|p| !p.0).map(|p| p.1.clone()).collect();
    let total = parts.len();
    let o = Outcome::new(failed.is_empty(), format!("{} of {total} verdict patterns as stated on 12 entries x 5 samples", total - failed.len()));
    failed.into_iter().fold(o, |o, f| o.note(format!("not met: {f}")))
}

fn endpoint(id: &str, x0: &[f64], y0: &[f64], dt: f64) -> (Vec<Real>, f64, bool) {
    let spec = catalog_entry(id).unwrap();
    let t = spec.instantiate().unwrap();
    let traj = geodesic(&t, &reals(x0), &reals(y0), 1.0, dt, &NumericPlan::default()).unwrap();
    let last = traj.last();
    let state = last.x.iter().chain(&last.xdot).copied().collect();
    (state, traj.speed_drift(), traj.truncated())
}

fn criterion_12() -> Outcome {
    let runs: [(&str, &[f64], &[f64]); 3] = [
        ("warped", &[0.0, 0.0, 0.0], &[0.5, 0.3, -0.2]),
        ("twisted", &[1.5, 0.0, 0.0, 0.0], &[0.2, 0.3, 0.4, -0.3]),
        ("randers-randers", &[0.0, 0.0, 0.0, 0.0], &[0.3, -0.2, 0.25, 0.1]),
    ];
    let mut drift = 0.0f64;
    let mut truncated = false;
    for (id, x0, y0) in runs {
        let (_, d, tr) = endpoint(id, x0, y0, 1e-3);
        drift = drift.max(d);
        truncated |= tr;
    }
    let dist = |a: &[Real], b: &[Real]| a.iter().zip(b).map(|(p, q)| (*p - *q).abs().to_f64()).fold(0.0, f64::max);
    let (x0, y0) = (&[0.0, 0.0, 0.0][..], &[0.6, 0.9, 1.2][..]);
    let a = endpoint("warped", x0, y0, 0.1).0;
    let b = endpoint("warped", x0, y0, 0.05).0;
    let c = endpoint("warped", x0, y0, 0.025).0;
    let factor = dist(&a, &b) / dist(&b, &c);
    Outcome::new(
        drift < 1e-6 && !truncated && (12.0..=20.0).contains(&factor),
        format!("F drift over t = 1 at dt = 1e-3 on 3 entries: {drift:.1e} (tol 1e-6); RK4 halving factor on warped {factor:.2} (in [12, 20])"),
    )
}

fn criterion_13() -> Outcome {
    let specs = vec![catalog_entry("randers-sphere").unwrap(), catalog_entry("warped").unwrap()];
    let opts = VerifyOptions {
        samples: 5,
        third_order_samples: 1,
        curvature_samples: 1,
        ..VerifyOptions::default()
    };
    let run = || serde_json::to_string_pretty(&verify(&specs, &opts).unwrap()).unwrap();
    let classify_run = || {
        let spec = catalog_entry("randers-randers").unwrap();
        let t = spec.instantiate().unwrap();
        let samples = battery(&spec, &t, 2, 42).unwrap();
        serde_json::to_string(&classify_all(&t, &samples, &ClassifyOptions::default()).unwrap()).unwrap()
    };
    let (a, b) = (run(), run());
    let (c, d) = (classify_run(), classify_run());
    Outcome::new(
        a.as_bytes() == b.as_bytes() && c.as_bytes() == d.as_bytes(),
        format!("verify ({} bytes) and classify ({} bytes) reports byte-identical across runs", a.len(), c.len()),
    )
}

fn main() {
    let start = Instant::now();
    let mut lines: Vec<(u8, &str, Outcome)> = Vec::new();
    lines.push((1, "block metric", criterion_1()));
    let battery_specs: Vec<_> = catalog().into_iter().take(DEFAULT_BATTERY).collect();
    let report = verify(&battery_specs, &VerifyOptions::default()).expect("verification runs");
    lines.push((2, "spray", combine(vec![below(&report, "spray", &[], 1e-5)])));
    lines.push((
        3,
        "connection ladder",
        combine(vec![
            below(&report, "connection contracts to twice the spray", &[], 1e-5),
            below(&report, "connection homogeneity", &[], 1e-5),
            below(&report, "horizontal contracts to connection", &[], 1e-5),
        ]),
    ));
    lines.push((
        4,
        "cartan sparsity",
        combine(vec![
            below(&report, "oracle mixed cartan blocks vanish", &[], 1e-6),
            below(&report, "cartan blocks", &[], 1e-6),
        ]),
    ));
    lines.push((5, "matsumoto contraction", criterion_5(&report)));
    lines.push((
        6,
        "berwald blocks",
        combine(vec![
            below(&report, "berwald blocks", &[], 1e-4),
            below(&report, "berwald zero families", &[], 1e-6),
        ]),
    ));
    lines.push((7, "mean berwald", criterion_7(&report)));
    lines.push((8, "warped curvature", criterion_8()));
    lines.push((
        9,
        "curvature contraction",
        combine(vec![below(&report, "curvature contracts to nonlinear curvature", &[], 1e-4)]),
    ));
    lines.push((10, "trivial flatness", criterion_10()));
    lines.push((11, "theorem witnesses", criterion_11()));
    lines.push((12, "geodesics", criterion_12()));
    lines.push((13, "determinism", criterion_13()));

    println!();
    for (n, name, o) in &lines {
        println!("criterion {n:>2} {:<4} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.summary);
        for note in &o.notes {
            println!("               {note}");
        }
    }
    let failed: Vec<u8> = lines.iter().filter(|l| !l.2.pass).map(|l| l.0).collect();
    println!(
        "\n{} of {} criteria pass ({:.0} s)",
        lines.len() - failed.len(),
        lines.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
