//! Component metrics, twist functions and the standard catalog of
//! combinations used by the verification and acceptance suites.
//!
//! Everything here is described by serializable specs so the same objects
//! can be written inline in a CLI config or referenced by catalog id.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finsler::{FinslerPoint, MetricEvaluator, NumericPlan, DEFAULT_Y_MIN};
use crate::real::{dot, Real};
use crate::sampling::{sample_tangent, ChartBox};
use crate::tensor::{spd_inverse, Tensor};
use crate::twisted::{TwistFunction, TwistedProduct};

/// Properties a component metric may declare about itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Riemannian,
    Berwald,
    WeaklyBerwald,
    DuallyFlat,
}

/// A position-dependent symmetric positive-definite matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MatrixField {
    Constant { matrix: Vec<Vec<f64>> },
    /// `diag(1, (x^1)^2)` on `x^1 > 0`.
    Polar,
    /// Round unit sphere in stereographic coordinates, `4 I / (1 + |x|^2)^2`.
    Sphere { dim: usize },
    /// `(1 + s . x) A`.
    LinearConformal { base: Vec<Vec<f64>>, slope: Vec<f64> },
}

impl MatrixField {
    pub fn dim(&self) -> usize {
        match self {
            MatrixField::Constant { matrix } => matrix.len(),
            MatrixField::Polar => 2,
            MatrixField::Sphere { dim } => *dim,
            MatrixField::LinearConformal { base, .. } => base.len(),
        }
    }

    pub fn at(&self, x: &[Real]) -> Tensor {
        let n = self.dim();
        match self {
            MatrixField::Constant { matrix } => Tensor::from_fn(n, 2, |i| Real::new(matrix[i[0]][i[1]])),
            MatrixField::Polar => Tensor::from_fn(2, 2, |i| match (i[0], i[1]) {
                (0, 0) => Real::ONE,
                (1, 1) => x[0] * x[0],
                _ => Real::ZERO,
            }),
            MatrixField::Sphere { .. } => {
                let r2 = dot(x, x);
                let c = Real::new(4.0) / ((r2 + 1.0) * (r2 + 1.0));
                Tensor::from_fn(n, 2, |i| if i[0] == i[1] { c } else { Real::ZERO })
            }
            MatrixField::LinearConformal { base, slope } => {
                let s: Real = slope.iter().zip(x).map(|(a, b)| *b * *a).sum::<Real>() + 1.0;
                Tensor::from_fn(n, 2, |i| s * base[i[0]][i[1]])
            }
        }
    }

    /// Whether the field is positive definite (and defined) at `x`.
    pub fn valid_at(&self, x: &[Real]) -> bool {
        match self {
            MatrixField::Polar if x[0].to_f64() <= 0.0 => false,
            _ => spd_inverse(&self.at(x)).is_ok(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, MatrixField::Constant { .. })
    }

    fn validate_shape(&self) -> Result<()> {
        let square = |m: &Vec<Vec<f64>>| m.iter().all(|r| r.len() == m.len()) && !m.is_empty();
        match self {
            MatrixField::Constant { matrix } if !square(matrix) => {
                Err(Error::InvalidSpec("constant matrix field must be square and non-empty".into()))
            }
            MatrixField::LinearConformal { base, slope } if !square(base) || slope.len() != base.len() => Err(
                Error::InvalidSpec("linear-conformal field needs a square base and a slope of matching length".into()),
            ),
            MatrixField::Sphere { dim: 0 } => Err(Error::InvalidSpec("sphere dimension must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// `b(x) = c + L x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovectorField {
    pub constant: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<Vec<Vec<f64>>>,
}

impl CovectorField {
    pub fn at(&self, x: &[Real]) -> Vec<Real> {
        (0..self.constant.len())
            .map(|i| {
                let mut b = Real::new(self.constant[i]);
                if let Some(l) = &self.linear {
                    for (j, xj) in x.iter().enumerate() {
                        b += *xj * l[i][j];
                    }
                }
                b
            })
            .collect()
    }
}

/// The three supported metric families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricKind {
    Euclidean { dim: usize },
    RiemannianMatrix { field: MatrixField },
    Randers { alpha: MatrixField, beta: CovectorField },
}

/// A named component metric on a chart box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: MetricKind,
    pub chart: ChartBox,
    #[serde(default)]
    pub declared: BTreeSet<Property>,
}

/// Grid resolution used for the Randers bound and twist positivity checks.
pub const GRID_PER_AXIS: usize = 9;

impl MetricSpec {
    pub fn dim(&self) -> usize {
        match &self.kind {
            MetricKind::Euclidean { dim } => *dim,
            MetricKind::RiemannianMatrix { field } => field.dim(),
            MetricKind::Randers { alpha, .. } => alpha.dim(),
        }
    }

    /// Checks shapes, the chart, positivity and the Randers bound `|beta|_alpha < 1`.
    pub fn validate(&self) -> Result<()> {
        self.chart.validate()?;
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidSpec(format!("metric '{}' has dimension 0", self.id)));
        }
        if self.chart.dim() != n {
            return Err(Error::InvalidSpec(format!(
                "metric '{}' has dimension {n} but its chart box has dimension {}",
                self.id,
                self.chart.dim()
            )));
        }
        let field = match &self.kind {
            MetricKind::Euclidean { .. } => return Ok(()),
            MetricKind::RiemannianMatrix { field } => field,
            MetricKind::Randers { alpha, beta } => {
                let ok_shape = beta.constant.len() == n
                    && beta.linear.as_ref().is_none_or(|l| l.len() == n && l.iter().all(|r| r.len() == n));
                if !ok_shape {
                    return Err(Error::InvalidSpec(format!("beta of '{}' does not have dimension {n}", self.id)));
                }
                alpha
            }
        };
        field.validate_shape()?;
        for p in self.chart.grid(GRID_PER_AXIS) {
            let x: Vec<Real> = p.iter().copied().map(Real::new).collect();
            if !field.valid_at(&x) {
                return Err(Error::InvalidSpec(format!(
                    "metric '{}' is not positive definite at {p:?}",
                    self.id
                )));
            }
            if let MetricKind::Randers { alpha, beta } = &self.kind {
                let bn = randers_bound(alpha, beta, &x)?;
                if bn >= 1.0 {
                    return Err(Error::InvalidSpec(format!(
                        "Randers bound |beta|_alpha < 1 violated for '{}' at {p:?}: {bn:.6}",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn instantiate(&self) -> Result<Arc<dyn MetricEvaluator>> {
        self.validate()?;
        Ok(match &self.kind {
            MetricKind::Euclidean { dim } => Arc::new(Euclidean { dim: *dim }),
            MetricKind::RiemannianMatrix { field } => Arc::new(Riemannian { field: field.clone() }),
            MetricKind::Randers { alpha, beta } => Arc::new(Randers {
                alpha: alpha.clone(),
                beta: beta.clone(),
            }),
        })
    }

    /// Confirms each declared property on a small battery and returns the
    /// largest residual per property.
    pub fn verify_declared(&self, samples: usize, seed: u64, tol: f64) -> Result<Vec<(Property, f64)>> {
        let m = self.instantiate()?;
        let plan = NumericPlan::default();
        let battery = sample_tangent(&self.chart, &[self.dim()], samples, seed, DEFAULT_Y_MIN, |s| {
            m.in_domain(&s.x, &s.y)
        })?;
        let mut out = Vec::new();
        for &prop in &self.declared {
            let mut worst: f64 = 0.0;
            for s in &battery {
                let p = FinslerPoint::at(m.as_ref(), s, &plan)?;
                let r = match prop {
                    Property::Riemannian => p.cartan_tensor()?.max_abs(),
                    Property::Berwald => p.berwald_curvature()?.max_abs(),
                    Property::WeaklyBerwald => p.mean_berwald()?.max_abs(),
                    Property::DuallyFlat => p.ldf_residual()?.iter().map(|v| v.abs().to_f64()).fold(0.0, f64::max),
                };
                worst = worst.max(r);
            }
            if worst >= tol {
                return Err(Error::InvalidSpec(format!(
                    "metric '{}' declares {prop:?} but the residual reaches {worst:.3e}",
                    self.id
                )));
            }
            out.push((prop, worst));
        }
        Ok(out)
    }
}

fn randers_bound(alpha: &MatrixField, beta: &CovectorField, x: &[Real]) -> Result<f64> {
    let inv = spd_inverse(&alpha.at(x))?.inverse;
    let b = beta.at(x);
    Ok(inv.quad_form(&b, &b).to_f64().max(0.0).sqrt())
}

#[derive(Clone, Debug)]
pub struct Euclidean {
    pub dim: usize,
}

impl MetricEvaluator for Euclidean {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_raw(&self, _x: &[Real], y: &[Real]) -> Real {
        dot(y, y).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct Riemannian {
    pub field: MatrixField,
}

impl MetricEvaluator for Riemannian {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn eval_raw(&self, x: &[Real], y: &[Real]) -> Real {
        self.field.at(x).quad_form(y, y).sqrt()
    }

    fn in_domain(&self, x: &[Real], y: &[Real]) -> bool {
        y.iter().any(|v| v.to_f64() != 0.0) && self.field.valid_at(x)
    }
}

/// `F = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i`.
#[derive(Clone, Debug)]
pub struct Randers {
    pub alpha: MatrixField,
    pub beta: CovectorField,
}

impl MetricEvaluator for Randers {
    fn dim(&self) -> usize {
        self.alpha.dim()
    }

    fn eval_raw(&self, x: &[Real], y: &[Real]) -> Real {
        self.alpha.at(x).quad_form(y, y).sqrt() + dot(&self.beta.at(x), y)
    }

    fn in_domain(&self, x: &[Real], y: &[Real]) -> bool {
        y.iter().any(|v| v.to_f64() != 0.0)
            && self.alpha.valid_at(x)
            && randers_bound(&self.alpha, &self.beta, x).is_ok_and(|b| b < 1.0)
    }
}

/// Twist families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TwistKind {
    Const { c: f64 },
    /// `exp(a . x)`.
    ExpX { a: Vec<f64> },
    /// `exp(b . u)`.
    ExpU { b: Vec<f64> },
    /// `c0 + eps sin(x^1) cos(u^1)`.
    TrigMixed { c0: f64, eps: f64 },
    /// `c0 + a . x`.
    AffineX { c0: f64, a: Vec<f64> },
}

/// Largest amplitude accepted for the mixed trigonometric twist.
pub const TRIG_EPS_MAX: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwistSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: TwistKind,
}

impl TwistSpec {
    pub fn instantiate(&self, n1: usize, n2: usize) -> Result<Arc<dyn TwistFunction>> {
        let bad = |m: String| Err(Error::InvalidSpec(format!("twist '{}': {m}", self.id)));
        match &self.kind {
            TwistKind::Const { c } if !(*c > 0.0) => return bad(format!("constant {c} is not positive")),
            TwistKind::ExpX { a } | TwistKind::AffineX { a, .. } if a.len() != n1 => {
                return bad(format!("coefficient vector has length {}, expected {n1}", a.len()))
            }
            TwistKind::ExpU { b } if b.len() != n2 => {
                return bad(format!("coefficient vector has length {}, expected {n2}", b.len()))
            }
            TwistKind::TrigMixed { eps, .. } if eps.abs() > TRIG_EPS_MAX => {
                return bad(format!("|eps| = {} exceeds {TRIG_EPS_MAX}", eps.abs()))
            }
            _ => {}
        }
        Ok(Arc::new(Twist(self.kind.clone())))
    }
}

#[derive(Clone, Debug)]
struct Twist(TwistKind);

fn lin(a: &[f64], x: &[Real]) -> Real {
    a.iter().zip(x).map(|(c, v)| *v * *c).sum()
}

impl TwistFunction for Twist {
    fn value(&self, x: &[Real], u: &[Real]) -> Real {
        match &self.0 {
            TwistKind::Const { c } => Real::new(*c),
            TwistKind::ExpX { a } => lin(a, x).exp(),
            TwistKind::ExpU { b } => lin(b, u).exp(),
            TwistKind::TrigMixed { c0, eps } => x[0].sin() * u[0].cos() * *eps + *c0,
            TwistKind::AffineX { c0, a } => lin(a, x) + *c0,
        }
    }

    fn grad_x(&self, x: &[Real], u: &[Real]) -> Vec<Real> {
        let n = x.len();
        match &self.0 {
            TwistKind::ExpX { a } => {
                let e = lin(a, x).exp();
                a.iter().map(|c| e * *c).collect()
            }
            TwistKind::TrigMixed { eps, .. } => {
                let mut g = vec![Real::ZERO; n];
                g[0] = x[0].cos() * u[0].cos() * *eps;
                g
            }
            TwistKind::AffineX { a, .. } => a.iter().copied().map(Real::new).collect(),
            _ => vec![Real::ZERO; n],
        }
    }

    fn grad_u(&self, x: &[Real], u: &[Real]) -> Vec<Real> {
        let n = u.len();
        match &self.0 {
            TwistKind::ExpU { b } => {
                let e = lin(b, u).exp();
                b.iter().map(|c| e * *c).collect()
            }
            TwistKind::TrigMixed { eps, .. } => {
                let mut g = vec![Real::ZERO; n];
                g[0] = -(x[0].sin() * u[0].sin() * *eps);
                g
            }
            _ => vec![Real::ZERO; n],
        }
    }
}

/// A component metric given either by catalog id or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricRef {
    Id(String),
    Inline(MetricSpec),
}

impl MetricRef {
    pub fn resolve(&self) -> Result<MetricSpec> {
        match self {
            MetricRef::Inline(s) => Ok(s.clone()),
            MetricRef::Id(id) => component_catalog()
                .into_iter()
                .find(|m| &m.id == id)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown metric id '{id}'"))),
        }
    }
}

/// A complete twisted-product description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    pub id: String,
    pub m1: MetricSpec,
    pub m2: MetricSpec,
    pub twist: TwistSpec,
    /// Overrides `n = n1 + n2` in the `(n+1)` factors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_override: Option<usize>,
}

impl ProductSpec {
    pub fn chart(&self) -> ChartBox {
        self.m1.chart.product(&self.m2.chart)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m1.dim(), self.m2.dim())
    }

    /// Builds the product and validates the twist on the chart.
    pub fn instantiate(&self) -> Result<TwistedProduct> {
        let (n1, n2) = self.dims();
        let mut t = TwistedProduct::new(self.m1.instantiate()?, self.m2.instantiate()?, self.twist.instantiate(n1, n2)?);
        t.n_override = self.n_override;
        t.validate_twist(&self.chart(), 3, &NumericPlan::default())?;
        for p in self.chart().grid(GRID_PER_AXIS.min(5)) {
            let z: Vec<Real> = p.iter().copied().map(Real::new).collect();
            let (x, u) = z.split_at(n1);
            if !(t.twist.value(x, u).to_f64() > 0.0) {
                return Err(Error::InvalidSpec(format!("twist '{}' is not positive at {p:?}", self.twist.id)));
            }
        }
        Ok(t)
    }
}

fn props(p: &[Property]) -> BTreeSet<Property> {
    p.iter().copied().collect()
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Component metrics with known properties.
pub fn component_catalog() -> Vec<MetricSpec> {
    use Property::*;
    vec![
        MetricSpec {
            id: "euclid1".into(),
            kind: MetricKind::Euclidean { dim: 1 },
            chart: ChartBox::symmetric(1),
            declared: props(&[Riemannian, Berwald, WeaklyBerwald, DuallyFlat]),
        },
        MetricSpec {
            id: "euclid2".into(),
            kind: MetricKind::Euclidean { dim: 2 },
            chart: ChartBox::symmetric(2),
            declared: props(&[Riemannian, Berwald, WeaklyBerwald, DuallyFlat]),
        },
        MetricSpec {
            id: "polar".into(),
            kind: MetricKind::RiemannianMatrix { field: MatrixField::Polar },
            chart: ChartBox {
                lo: vec![1.0, -1.0],
                hi: vec![2.0, 1.0],
            },
            declared: props(&[Riemannian, Berwald, WeaklyBerwald]),
        },
        MetricSpec {
            id: "sphere2".into(),
            kind: MetricKind::RiemannianMatrix {
                field: MatrixField::Sphere { dim: 2 },
            },
            chart: ChartBox::symmetric(2),
            declared: props(&[Riemannian, Berwald, WeaklyBerwald]),
        },
        MetricSpec {
            id: "randers-minkowski".into(),
            kind: MetricKind::Randers {
                alpha: MatrixField::Constant { matrix: identity(2) },
                beta: CovectorField {
                    constant: vec![0.3, 0.0],
                    linear: None,
                },
            },
            chart: ChartBox::symmetric(2),
            declared: props(&[Berwald, WeaklyBerwald, DuallyFlat]),
        },
        MetricSpec {
            id: "randers2".into(),
            kind: MetricKind::Randers {
                alpha: MatrixField::Constant { matrix: identity(2) },
                beta: CovectorField {
                    constant: vec![0.2, 0.1],
                    linear: Some(vec![vec![0.1, 0.05], vec![0.05, -0.1]]),
                },
            },
            chart: ChartBox::symmetric(2),
            declared: BTreeSet::new(),
        },
    ]
}

fn component(id: &str) -> MetricSpec {
    component_catalog()
        .into_iter()
        .find(|m| m.id == id)
        .expect("catalog component ids are fixed")
}

fn twist(id: &str, kind: TwistKind) -> TwistSpec {
    TwistSpec { id: id.into(), kind }
}

fn product(id: &str, m1: &str, m2: &str, t: TwistSpec) -> ProductSpec {
    ProductSpec {
        id: id.into(),
        m1: component(m1),
        m2: component(m2),
        twist: t,
        n_override: None,
    }
}

/// Standard combinations. The first six form the default battery.
pub fn catalog() -> Vec<ProductSpec> {
    let one = || twist("one", TwistKind::Const { c: 1.0 });
    let affine = || twist("affine-x", TwistKind::AffineX { c0: 1.0, a: vec![0.1, 0.0] });
    let trig = || twist("trig-mixed", TwistKind::TrigMixed { c0: 1.0, eps: 0.2 });
    vec![
        product("trivial", "euclid2", "euclid2", one()),
        product("warped", "euclid1", "euclid2", twist("exp-x", TwistKind::ExpX { a: vec![1.0] })),
        product("twisted", "polar", "sphere2", trig()),
        product("randers-sphere", "randers2", "sphere2", affine()),
        product("polar-randers", "polar", "randers2", twist("exp-u", TwistKind::ExpU { b: vec![0.3, 0.2] })),
        product("randers-randers", "randers2", "randers2", trig()),
        product("randers-randers-const", "randers2", "randers2", twist("const", TwistKind::Const { c: 1.2 })),
        product("euclid-randers", "euclid2", "randers2", affine()),
        product("randers-euclid", "randers2", "euclid2", one()),
        product("randers-euclid-affine", "randers2", "euclid2", affine()),
        product("euclid-expu", "euclid2", "euclid2", twist("exp-u", TwistKind::ExpU { b: vec![1.0, 0.0] })),
        product("euclid-minkowski", "euclid2", "randers-minkowski", twist("const", TwistKind::Const { c: 1.5 })),
    ]
}

/// Number of leading catalog entries forming the default battery.
pub const DEFAULT_BATTERY: usize = 6;

pub fn catalog_entry(id: &str) -> Result<ProductSpec> {
    catalog()
        .into_iter()
        .find(|p| p.id == id)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown catalog entry '{id}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::reals;

    #[test]
    fn spec_examples() {
        let e = component("euclid2").instantiate().unwrap();
        assert_eq!(e.norm(&reals(&[0.0, 0.0]), &reals(&[3.0, 4.0])).unwrap().to_f64(), 5.0);
        let r = MetricSpec {
            id: "r".into(),
            kind: MetricKind::Randers {
                alpha: MatrixField::Constant { matrix: identity(2) },
                beta: CovectorField {
                    constant: vec![0.5, 0.0],
                    linear: None,
                },
            },
            chart: ChartBox::symmetric(2),
            declared: BTreeSet::new(),
        }
        .instantiate()
        .unwrap();
        assert_eq!(r.norm(&reals(&[0.0, 0.0]), &reals(&[1.0, 0.0])).unwrap().to_f64(), 1.5);
        let p = component("polar").instantiate().unwrap();
        assert_eq!(p.norm(&reals(&[2.0, 0.3]), &reals(&[0.0, 1.0])).unwrap().to_f64(), 2.0);
    }

    #[test]
    fn randers_bound_is_enforced() {
        let bad = MetricSpec {
            id: "bad".into(),
            kind: MetricKind::Randers {
                alpha: MatrixField::Constant { matrix: identity(2) },
                beta: CovectorField {
                    constant: vec![0.5, 0.0],
                    linear: Some(vec![vec![0.6, 0.0], vec![0.0, 0.0]]),
                },
            },
            chart: ChartBox::symmetric(2),
            declared: BTreeSet::new(),
        };
        let err = bad.instantiate().err().unwrap();
        assert!(err.to_string().contains("|beta|_alpha < 1"), "{err}");
    }

    #[test]
    fn polar_chart_must_avoid_the_axis() {
        let mut p = component("polar");
        p.chart.lo[0] = -1.0;
        assert!(p.instantiate().is_err());
    }

    #[test]
    fn twist_validation() {
        let t = twist("t", TwistKind::TrigMixed { c0: 1.0, eps: 0.5 });
        assert!(t.instantiate(2, 2).is_err());
        let c = twist("c", TwistKind::Const { c: -1.0 });
        assert!(c.instantiate(1, 1).is_err());
        let mut spec = catalog_entry("euclid-randers").unwrap();
        spec.twist = twist("neg", TwistKind::AffineX { c0: 0.05, a: vec![0.1, 0.0] });
        assert!(spec.instantiate().is_err());
    }

    #[test]
    fn catalog_builds_and_covers_required_shapes() {
        let cat = catalog();
        assert!(cat.len() >= 6);
        for p in &cat {
            p.instantiate().unwrap_or_else(|e| panic!("{}: {e}", p.id));
        }
        let trivial = &cat[0];
        assert_eq!((trivial.m1.id.as_str(), trivial.m2.id.as_str()), ("euclid2", "euclid2"));
        let warped = catalog_entry("warped").unwrap();
        assert_eq!(warped.dims(), (1, 2));
    }

    #[test]
    fn declared_properties_hold() {
        for m in component_catalog() {
            m.verify_declared(4, 7, 1e-6).unwrap_or_else(|e| panic!("{}: {e}", m.id));
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        for p in catalog() {
            let s = serde_json::to_string(&p).unwrap();
            let back: ProductSpec = serde_json::from_str(&s).unwrap();
            assert_eq!(back, p);
        }
        let r: MetricRef = serde_json::from_str("\"sphere2\"").unwrap();
        assert_eq!(r.resolve().unwrap().id, "sphere2");
    }
}
