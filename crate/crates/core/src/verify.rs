//! Closed form versus oracle: every twisted-product identity evaluated over
//! a seeded battery, summarised in a versioned, deterministic report.
//!
//! Rows of kind `check` decide the overall pass flag. Rows of kind
//! `reading` record alternative readings of a formula; they never fail a run but
//! are flagged as errata candidates when they disagree with the oracle
//! consistently.

use serde::Serialize;

use crate::classify::matsumoto_contraction_lhs;
use crate::error::Result;
use crate::finsler::{fiber_jacobian, FinslerPoint, MetricEvaluator, NumericPlan, TangentSample, DEFAULT_Y_MIN};
use crate::metrics::{MetricKind, ProductSpec, Property};
use crate::real::Real;
use crate::sampling::sample_tangent;
use crate::tensor::{multi_indices, Tensor};
use crate::twisted::{TwistedPoint, TwistedProduct};

pub const SCHEMA_VERSION: &str = "1.0";

/// Tolerance for identities involving at most second derivatives of `F^2`.
pub const TOL_SECOND: f64 = 1e-5;
/// Tolerance for third-derivative and curvature identities.
pub const TOL_THIRD: f64 = 1e-4;
/// Exact block sparsity and algebraic identities.
pub const TOL_SPARSE: f64 = 1e-6;
pub const TOL_METRIC: f64 = 1e-6;
pub const TOL_TRACE: f64 = 1e-10;
pub const TOL_FRAME: f64 = 1e-12;
/// Factor over tolerance beyond which a consistent disagreement is flagged.
pub const ERRATA_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Check,
    Reading,
}

/// Which identities are evaluated and how many samples each tier uses.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Samples for metric, spray, connection and Cartan identities.
    pub samples: usize,
    /// Samples for Berwald, mean Berwald and horizontal identities.
    pub third_order_samples: usize,
    /// Samples for curvature identities.
    pub curvature_samples: usize,
    /// Replaces every default tolerance when set.
    pub tol: Option<f64>,
    /// Names an identity whose closed form is perturbed before comparison.
    pub corrupt: Option<String>,
    pub plan: NumericPlan,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 42,
            samples: 100,
            third_order_samples: 10,
            curvature_samples: 3,
            tol: None,
            corrupt: None,
            plan: NumericPlan::default(),
        }
    }
}

/// One identity on one catalog entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityRow {
    pub identity: String,
    pub kind: RowKind,
    pub tolerance: f64,
    pub samples: usize,
    pub max_residual: f64,
    pub pass: bool,
    pub errata_candidate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntryReport {
    pub id: String,
    pub dims: (usize, usize),
    pub rows: Vec<IdentityRow>,
}

impl EntryReport {
    pub fn row(&self, identity: &str) -> Option<&IdentityRow> {
        self.rows.iter().find(|r| r.identity == identity)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub schema_version: String,
    pub seed: u64,
    pub entries: Vec<EntryReport>,
    /// `entry/identity` labels of rows flagged as errata candidates.
    pub errata_candidates: Vec<String>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn entry(&self, id: &str) -> Option<&EntryReport> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Largest residual of a given identity over all entries that evaluate it.
    pub fn max_residual(&self, identity: &str) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.row(identity))
            .map(|r| r.max_residual)
            .reduce(f64::max)
    }

    pub fn failures(&self) -> Vec<String> {
        self.entries
            .iter()
            .flat_map(|e| {
                e.rows
                    .iter()
                    .filter(|r| r.kind == RowKind::Check && !r.pass)
                    .map(move |r| format!("{}/{}", e.id, r.identity))
            })
            .collect()
    }
}

struct Collector<'o> {
    opts: &'o VerifyOptions,
    rows: Vec<IdentityRow>,
}

impl Collector<'_> {
    fn tolerance(&self, default: f64) -> f64 {
        self.opts.tol.unwrap_or(default)
    }

    fn push(&mut self, identity: &str, kind: RowKind, default_tol: f64, residuals: &[f64]) {
        let tolerance = self.tolerance(default_tol);
        let max_residual = residuals.iter().copied().fold(0.0, f64::max);
        let consistent = !residuals.is_empty() && residuals.iter().all(|r| *r > ERRATA_FACTOR * tolerance);
        self.rows.push(IdentityRow {
            identity: identity.into(),
            kind,
            tolerance,
            samples: residuals.len(),
            max_residual,
            pass: max_residual < tolerance,
            errata_candidate: consistent,
        });
    }

    fn check(&mut self, identity: &str, tol: f64, residuals: &[f64]) {
        self.push(identity, RowKind::Check, tol, residuals);
    }

    fn reading(&mut self, identity: &str, tol: f64, residuals: &[f64]) {
        self.push(identity, RowKind::Reading, tol, residuals);
    }

    fn corrupt(&self, identity: &str, t: Tensor) -> Tensor {
        if self.opts.corrupt.as_deref() == Some(identity) {
            t.map(|v| v * 1.01 + 1e-3)
        } else {
            t
        }
    }
}

/// Per-sample residuals, keyed by identity name in insertion order.
#[derive(Default)]
struct Series(Vec<(&'static str, Vec<f64>)>);

impl Series {
    fn add(&mut self, name: &'static str, r: f64) {
        match self.0.iter_mut().find(|(n, _)| *n == name) {
            Some((_, v)) => v.push(r),
            None => self.0.push((name, vec![r])),
        }
    }

    fn get(&self, name: &str) -> &[f64] {
        self.0.iter().find(|(n, _)| *n == name).map_or(&[], |(_, v)| v.as_slice())
    }
}

/// Whether the warped-curvature identity applies: both components
/// Riemannian and the twist independent of the `M2` coordinates.
pub fn warped_theorem_applies(spec: &ProductSpec) -> bool {
    use crate::metrics::TwistKind::*;
    let riemannian = |m: &crate::metrics::MetricSpec| {
        m.declared.contains(&Property::Riemannian) || matches!(m.kind, MetricKind::Euclidean { .. })
    };
    riemannian(&spec.m1) && riemannian(&spec.m2) && matches!(spec.twist.kind, Const { .. } | ExpX { .. } | AffineX { .. })
}

/// The battery used for one catalog entry.
pub fn battery(spec: &ProductSpec, t: &TwistedProduct, count: usize, seed: u64) -> Result<Vec<TangentSample>> {
    let (n1, n2) = spec.dims();
    sample_tangent(&spec.chart(), &[n1, n2], count, seed, DEFAULT_Y_MIN, |s| t.in_domain(&s.x, &s.y))
}

/// `‖grad f‖^2 (δ^γ_λ g_αβ − δ^γ_β g_αλ)` on the all-M2 block, `[γ][α][β][λ]`.
pub fn warped_curvature_term(p: &TwistedPoint<'_>) -> Result<Tensor> {
    let g2 = p.g2()?;
    let k = p.grad_twist_norm_sq()?;
    let n2 = g2.dim();
    let d = |a: usize, b: usize| if a == b { Real::ONE } else { Real::ZERO };
    Ok(Tensor::from_fn(n2, 4, |i| {
        let (g, a, b, l) = (i[0], i[1], i[2], i[3]);
        k * (d(g, l) * g2[[a, b]] - d(g, b) * g2[[a, l]])
    }))
}

fn m2_block4(t: &Tensor, n1: usize) -> Tensor {
    let n2 = t.dim() - n1;
    Tensor::from_fn(n2, 4, |i| t[[n1 + i[0], n1 + i[1], n1 + i[2], n1 + i[3]]])
}

/// Distances of the all-M2 curvature block from `R2 - term` and from
/// `R2 + term`, where `term` is [`warped_curvature_term`].
pub fn warped_curvature_residuals(p: &TwistedPoint<'_>) -> Result<(f64, f64)> {
    let block = m2_block4(&p.berwald_connection_curvature()?.tensor, p.n1());
    let r2 = p.p2.berwald_connection_curvature()?;
    let term = warped_curvature_term(p)?;
    let minus = r2.zip_with(&term, |a, b| a - b);
    let plus = r2.zip_with(&term, |a, b| a + b);
    Ok((block.max_abs_diff(&minus), block.max_abs_diff(&plus)))
}

fn frame_residual(p: &TwistedPoint<'_>) -> Result<f64> {
    let fr = p.adapted_frame()?;
    let (v, h, j) = (&fr.vertical, &fr.horizontal, &fr.almost_tangent);
    let n = p.dim();
    let id = Tensor::identity(2 * n);
    let mut worst = 0.0f64;
    worst = worst.max(v.matmul(v).max_abs_diff(v));
    worst = worst.max(h.matmul(h).max_abs_diff(h));
    worst = worst.max(v.matmul(h).max_abs());
    worst = worst.max(h.zip_with(v, |a, b| a + b).max_abs_diff(&id));
    worst = worst.max(j.matmul(j).max_abs());
    // image of J is vertical, vertical vectors are killed by J
    worst = worst.max(v.matmul(j).max_abs_diff(j));
    worst = worst.max(j.matmul(v).max_abs());
    // J maps the adapted horizontal basis onto the vertical coordinate basis
    let jh = j.matmul(&fr.horizontal_basis());
    let target = Tensor::from_fn(2 * n, 2, |rc| {
        if rc[1] < n && rc[0] == rc[1] + n {
            Real::ONE
        } else {
            Real::ZERO
        }
    });
    worst = worst.max(jh.max_abs_diff(&target));
    let ranks_ok = v.rank_numeric(1e-9) == n && j.rank_numeric(1e-9) == n;
    Ok(if ranks_ok { worst } else { f64::INFINITY })
}

/// Evaluates every identity on one catalog entry.
pub fn verify_entry(spec: &ProductSpec, opts: &VerifyOptions) -> Result<EntryReport> {
    let t = spec.instantiate()?;
    let (n1, n2) = spec.dims();
    let n = n1 + n2;
    let count = opts.samples.max(opts.third_order_samples).max(opts.curvature_samples);
    let samples = battery(spec, &t, count, opts.seed)?;
    let plan = &opts.plan;
    let mut col = Collector { opts, rows: Vec::new() };
    let mut s = Series::default();

    for (k, smp) in samples.iter().enumerate() {
        let tp = t.point(&smp.x, &smp.y, plan)?;
        let o = FinslerPoint::at(&t, smp, plan)?;
        let w = &smp.y;
        if k < opts.samples {
            let g = col.corrupt("block metric", tp.block_metric()?.tensor);
            s.add("block metric", g.scaled_diff(&o.fundamental_tensor()?));
            let f_closed = tp.norm();
            s.add("metric norm", ((f_closed * f_closed - o.norm() * o.norm()).abs()).to_f64());
            let sp = col.corrupt("spray", tp.spray()?.tensor);
            s.add("spray", sp.scaled_diff(&Tensor::vector(&o.spray()?)));
            let conn_block = tp.connection_blocks()?;
            let conn = col.corrupt("connection", conn_block.tensor.clone());
            let oc = o.nonlinear_connection()?;
            s.add("connection", conn.scaled_diff(&oc));
            s.add("connection (1/f on Cartan term only)", tp.connection_blocks_alternative()?.tensor.scaled_diff(&oc));
            // G^a_b w^b = 2 G^a
            let gw = conn_block.tensor.matvec(w);
            let spray = tp.spray()?.tensor;
            s.add(
                "connection contracts to twice the spray",
                gw.iter().zip(spray.data()).map(|(a, b)| (*a - *b * 2.0).abs().to_f64()).fold(0.0, f64::max),
            );
            let vert = col.corrupt("vertical coefficients", tp.vertical_coefficients()?.tensor);
            s.add("vertical coefficients", vert.scaled_diff(&o.vertical_coefficients()?));
            s.add(
                "vertical coefficients symmetric",
                multi_indices(n, 3)
                    .map(|i| (vert[[i[0], i[1], i[2]]] - vert[[i[0], i[2], i[1]]]).abs().to_f64())
                    .fold(0.0, f64::max),
            );
            let cart = col.corrupt("cartan blocks", tp.cartan_blocks()?.tensor);
            let oc3 = o.cartan_tensor()?;
            s.add("cartan blocks", cart.max_abs_diff(&oc3));
            s.add(
                "oracle mixed cartan blocks vanish",
                oc3.max_abs_where(|i| !(i.iter().all(|&a| a < n1) || i.iter().all(|&a| a >= n1))),
            );
            s.add("frame algebra", frame_residual(&tp)?);
        }
        if k < opts.third_order_samples {
            // Euler identity for the connection, through fiber derivatives of the closed form
            let field = |z: &[Real], ww: &[Real]| Ok(t.point(z, ww, plan)?.connection_blocks()?.tensor.data().to_vec());
            let jac = fiber_jacobian(&field, &smp.x, w, &plan.nested)?;
            let conn = tp.connection_blocks()?.tensor;
            let mut euler = 0.0f64;
            for idx in 0..n * n {
                let d: Real = (0..n).map(|c| jac[c][idx] * w[c]).sum();
                euler = euler.max((d - conn.data()[idx]).abs().to_f64());
            }
            s.add("connection homogeneity", euler);
            let hor = col.corrupt("horizontal coefficients", tp.horizontal_coeffs()?.tensor);
            s.add("horizontal coefficients", hor.scaled_diff(&o.horizontal_coefficients()?));
            // y^c F^a_bc = G^a_b
            let ladder = hor.contract_last(w);
            s.add("horizontal contracts to connection", ladder.max_abs_diff(&conn));
            let (la, li) = matsumoto_contraction_lhs(&o, n1, t.n_factor())?;
            let (ra, ri) = tp.matsumoto_contraction_rhs()?;
            let diff = |a: &[Real], b: &[Real]| a.iter().zip(b).map(|(x, y)| (*x - *y).abs().to_f64()).fold(0.0, f64::max);
            let ra = col.corrupt("matsumoto contraction", Tensor::vector(&ra));
            s.add("matsumoto contraction", diff(&la, ra.data()).max(diff(&li, &ri)));
            let b = col.corrupt("berwald blocks", tp.berwald_blocks()?.tensor);
            let ob = o.berwald_curvature()?;
            s.add("berwald blocks", b.max_abs_diff(&ob));
            s.add(
                "berwald zero families",
                b.max_abs_where(|i| i[0] >= n1 && i[1..].iter().any(|&a| a < n1))
                    .max(ob.max_abs_where(|i| i[0] >= n1 && i[1..].iter().any(|&a| a < n1))),
            );
            let e = col.corrupt("mean berwald", tp.mean_berwald_blocks()?.tensor);
            let oe = o.mean_berwald()?;
            s.add("mean berwald", e.max_abs_diff(&oe));
            s.add("mean berwald (coefficient f on I_{;α;β})", tp.mean_berwald_literal()?.tensor.max_abs_diff(&oe));
            s.add("mean berwald is half the berwald trace", e.max_abs_diff(&crate::finsler::mean_of_berwald(&b)));
        }
        if k < opts.curvature_samples {
            let rn = col.corrupt("nonlinear curvature", tp.nonlinear_curvature()?.tensor);
            s.add("nonlinear curvature", rn.max_abs_diff(&o.nonlinear_curvature()?));
            s.add(
                "nonlinear curvature antisymmetric",
                multi_indices(n, 3)
                    .map(|i| (rn[[i[0], i[1], i[2]]] + rn[[i[0], i[2], i[1]]]).abs().to_f64())
                    .fold(0.0, f64::max),
            );
            let rc = tp.berwald_connection_curvature()?.tensor;
            let contracted = Tensor::from_fn(n, 3, |i| (0..n).map(|b| w[b] * rc[[i[0], b, i[1], i[2]]]).sum());
            s.add("curvature contracts to nonlinear curvature", contracted.max_abs_diff(&rn));
            s.add(
                "curvature antisymmetric",
                multi_indices(n, 4)
                    .map(|i| (rc[[i[0], i[1], i[2], i[3]]] + rc[[i[0], i[1], i[3], i[2]]]).abs().to_f64())
                    .fold(0.0, f64::max),
            );
            if warped_theorem_applies(spec) {
                let (minus, plus) = warped_curvature_residuals(&tp)?;
                s.add("warped curvature", minus);
                s.add("warped curvature (+ sign)", plus);
            }
        }
    }

    col.check("block metric", TOL_METRIC, s.get("block metric"));
    col.check("metric norm", 1e-12, s.get("metric norm"));
    col.check("spray", TOL_SECOND, s.get("spray"));
    col.check("connection", TOL_SECOND, s.get("connection"));
    col.reading("connection (1/f on Cartan term only)", TOL_SECOND, s.get("connection (1/f on Cartan term only)"));
    col.check("connection contracts to twice the spray", TOL_SECOND, s.get("connection contracts to twice the spray"));
    col.check("connection homogeneity", TOL_SECOND, s.get("connection homogeneity"));
    col.check("vertical coefficients", TOL_SECOND, s.get("vertical coefficients"));
    col.check("vertical coefficients symmetric", TOL_SPARSE, s.get("vertical coefficients symmetric"));
    col.check("horizontal coefficients", TOL_SECOND, s.get("horizontal coefficients"));
    col.check("horizontal contracts to connection", TOL_SECOND, s.get("horizontal contracts to connection"));
    col.check("cartan blocks", TOL_SPARSE, s.get("cartan blocks"));
    col.check("oracle mixed cartan blocks vanish", TOL_SPARSE, s.get("oracle mixed cartan blocks vanish"));
    col.check("matsumoto contraction", TOL_SECOND, s.get("matsumoto contraction"));
    col.check("frame algebra", TOL_FRAME, s.get("frame algebra"));
    col.check("berwald blocks", TOL_THIRD, s.get("berwald blocks"));
    col.check("berwald zero families", TOL_SPARSE, s.get("berwald zero families"));
    col.check("mean berwald", TOL_THIRD, s.get("mean berwald"));
    col.reading("mean berwald (coefficient f on I_{;α;β})", TOL_THIRD, s.get("mean berwald (coefficient f on I_{;α;β})"));
    col.check("mean berwald is half the berwald trace", TOL_TRACE, s.get("mean berwald is half the berwald trace"));
    col.check("nonlinear curvature", TOL_THIRD, s.get("nonlinear curvature"));
    col.check("nonlinear curvature antisymmetric", TOL_SPARSE, s.get("nonlinear curvature antisymmetric"));
    col.check("curvature contracts to nonlinear curvature", TOL_THIRD, s.get("curvature contracts to nonlinear curvature"));
    col.check("curvature antisymmetric", TOL_SPARSE, s.get("curvature antisymmetric"));
    if warped_theorem_applies(spec) {
        col.check("warped curvature", TOL_THIRD, s.get("warped curvature"));
        col.reading("warped curvature (+ sign)", TOL_THIRD, s.get("warped curvature (+ sign)"));
    }
    Ok(EntryReport {
        id: spec.id.clone(),
        dims: (n1, n2),
        rows: col.rows,
    })
}

/// Runs [`verify_entry`] on every spec and aggregates the result.
pub fn verify(specs: &[ProductSpec], opts: &VerifyOptions) -> Result<VerificationReport> {
    let entries = specs.iter().map(|s| verify_entry(s, opts)).collect::<Result<Vec<_>>>()?;
    let errata_candidates = entries
        .iter()
        .flat_map(|e| {
            e.rows
                .iter()
                .filter(|r| r.errata_candidate)
                .map(move |r| format!("{}/{}", e.id, r.identity))
        })
        .collect();
    let passed = entries
        .iter()
        .all(|e| e.rows.iter().all(|r| r.kind == RowKind::Reading || r.pass));
    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION.into(),
        seed: opts.seed,
        entries,
        errata_candidates,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::catalog_entry;

    fn light() -> VerifyOptions {
        VerifyOptions {
            samples: 3,
            third_order_samples: 1,
            curvature_samples: 1,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn trivial_entry_passes_every_check() {
        let r = verify_entry(&catalog_entry("trivial").unwrap(), &light()).unwrap();
        for row in &r.rows {
            if row.kind == RowKind::Check {
                assert!(row.pass, "{}: {}", row.identity, row.max_residual);
            }
        }
        assert!(r.row("warped curvature").is_some());
    }

    #[test]
    fn corrupted_formula_is_flagged() {
        let opts = VerifyOptions {
            corrupt: Some("spray".into()),
            ..light()
        };
        let report = verify(&[catalog_entry("trivial").unwrap()], &opts).unwrap();
        assert!(!report.passed);
        assert_eq!(report.failures(), vec!["trivial/spray".to_string()]);
        assert!(report.errata_candidates.contains(&"trivial/spray".to_string()));
    }

    #[test]
    fn reports_are_deterministic() {
        let spec = catalog_entry("randers-sphere").unwrap();
        let opts = VerifyOptions {
            samples: 2,
            third_order_samples: 0,
            curvature_samples: 0,
            ..VerifyOptions::default()
        };
        let a = serde_json::to_string(&verify(std::slice::from_ref(&spec), &opts).unwrap()).unwrap();
        let b = serde_json::to_string(&verify(std::slice::from_ref(&spec), &opts).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"schema_version\":\"1.0\""));
    }

    #[test]
    fn warped_theorem_scope() {
        assert!(warped_theorem_applies(&catalog_entry("warped").unwrap()));
        assert!(!warped_theorem_applies(&catalog_entry("twisted").unwrap()));
        assert!(!warped_theorem_applies(&catalog_entry("randers-sphere").unwrap()));
    }
}
