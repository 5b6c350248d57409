//! General Finsler engine: every fiberwise and horizontal quantity of an
//! arbitrary metric evaluator, computed by finite differences of `F^2`.
//!
//! [`FinslerPoint`] bundles a metric with a tangent sample and caches the
//! quantities it has already computed. Derivatives of derived fields (the
//! spray, the fundamental tensor, connection coefficients) are taken by
//! re-instantiating points at shifted coordinates, so every quantity here
//! is independent of any closed-form expression.

use std::cell::OnceCell;

use serde::{Deserialize, Serialize};

use crate::diffkit::{self, DiffConfig, MultiIndex};
use crate::error::{Error, Result};
use crate::real::{dot, Real};
use crate::tensor::{spd_inverse, Tensor, CONDITION_WARN};

/// Smallest tangent-vector norm accepted by the samplers.
pub const DEFAULT_Y_MIN: f64 = 0.1;

/// A smooth, positively 1-homogeneous norm on each tangent space of a chart.
pub trait MetricEvaluator: Send + Sync {
    fn dim(&self) -> usize;

    /// Evaluates `F(x, y)` without any domain check.
    fn eval_raw(&self, x: &[Real], y: &[Real]) -> Real;

    /// Smoothness predicate. Implementations must reject `y = 0`.
    fn in_domain(&self, x: &[Real], y: &[Real]) -> bool {
        let _ = x;
        y.iter().any(|v| v.to_f64() != 0.0)
    }

    fn norm(&self, x: &[Real], y: &[Real]) -> Result<Real> {
        let n = self.dim();
        if x.len() != n || y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len().max(y.len()),
            });
        }
        if !self.in_domain(x, y) {
            return Err(Error::Domain(format!(
                "(x, y) = ({:?}, {:?}) outside the smooth domain",
                x, y
            )));
        }
        let v = self.eval_raw(x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }

    fn norm_sq(&self, x: &[Real], y: &[Real]) -> Result<Real> {
        let f = self.norm(x, y)?;
        Ok(f * f)
    }
}

/// A base point and a tangent vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentSample {
    pub x: Vec<Real>,
    pub y: Vec<Real>,
}

impl TangentSample {
    pub fn new(x: Vec<Real>, y: Vec<Real>) -> Self {
        TangentSample { x, y }
    }

    pub fn from_f64(x: &[f64], y: &[f64]) -> Self {
        TangentSample::new(crate::real::reals(x), crate::real::reals(y))
    }

    /// The same base point with `y` scaled by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        TangentSample::new(self.x.clone(), self.y.iter().map(|v| *v * lambda).collect())
    }
}

/// The plane spanned by a flagpole `y` and a transverse vector `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlagPlane {
    pub y: Vec<Real>,
    pub u: Vec<Real>,
}

/// Difference settings for the three nesting depths of the engine.
///
/// `direct` differentiates closed-form evaluators (F, F^2, f). `nested`
/// differentiates fields that are one finite-difference layer deep (spray,
/// fundamental tensor, Cartan tensor). `nested2` differentiates fields two
/// layers deep (connection and horizontal coefficients).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericPlan {
    pub direct: DiffConfig,
    pub nested: DiffConfig,
    pub nested2: DiffConfig,
}

impl Default for NumericPlan {
    fn default() -> Self {
        let base = DiffConfig::default();
        NumericPlan {
            direct: base,
            nested: base.with_noise(1e-18),
            nested2: base.with_noise(1e-14),
        }
    }
}

impl NumericPlan {
    pub fn validate(&self) -> Result<()> {
        self.direct.validate()?;
        self.nested.validate()?;
        self.nested2.validate()
    }
}

pub(crate) fn cached<T>(cell: &OnceCell<T>, init: impl FnOnce() -> Result<T>) -> Result<&T> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = init()?;
    Ok(cell.get_or_init(|| v))
}

/// Splits a concatenated `(x, y)` coordinate vector.
pub(crate) fn split(z: &[Real], n: usize) -> (&[Real], &[Real]) {
    (&z[..n], &z[n..])
}

pub(crate) fn concat(x: &[Real], y: &[Real]) -> Vec<Real> {
    let mut z = x.to_vec();
    z.extend_from_slice(y);
    z
}

fn unit_shift(y: &[Real], l: usize, s: Real) -> Vec<Real> {
    let mut out = y.to_vec();
    out[l] += s;
    out
}

/// Fiber derivatives of a vector field `T(x, .)` at `y`: `out[a][comp]`.
pub fn fiber_jacobian<T>(field: &T, x: &[Real], y: &[Real], cfg: &DiffConfig) -> Result<Vec<Vec<Real>>>
where
    T: Fn(&[Real], &[Real]) -> Result<Vec<Real>> + ?Sized,
{
    diffkit::jacobian_vec(&|yy: &[Real]| field(x, yy), y, cfg)
}

/// Horizontal derivatives `delta T / delta x^b = d_b T - G^d_b d_{y^d} T`
/// of a vector field, with the nonlinear connection `conn[d][b] = G^d_b`
/// taken at `(x, y)`. Returns `out[b][comp]`.
pub fn horizontal_derivative<T>(
    field: &T,
    x: &[Real],
    y: &[Real],
    conn: &Tensor,
    cfg: &DiffConfig,
) -> Result<Vec<Vec<Real>>>
where
    T: Fn(&[Real], &[Real]) -> Result<Vec<Real>> + ?Sized,
{
    let n = x.len();
    let z = concat(x, y);
    let jac = diffkit::jacobian_vec(
        &|zz: &[Real]| {
            let (xx, yy) = split(zz, n);
            field(xx, yy)
        },
        &z,
        cfg,
    )?;
    let len = jac[0].len();
    Ok((0..n)
        .map(|b| {
            (0..len)
                .map(|c| {
                    let mut v = jac[b][c];
                    for d in 0..n {
                        v -= conn[[d, b]] * jac[n + d][c];
                    }
                    v
                })
                .collect()
        })
        .collect())
}

/// `R^c_ab = delta G^c_a / delta x^b - delta G^c_b / delta x^a` for a
/// connection field returning `G^c_a` flattened as `[c][a]`.
pub fn nonlinear_curvature_of<T>(
    conn_field: &T,
    x: &[Real],
    y: &[Real],
    conn: &Tensor,
    cfg: &DiffConfig,
) -> Result<Tensor>
where
    T: Fn(&[Real], &[Real]) -> Result<Vec<Real>> + ?Sized,
{
    let n = x.len();
    let d = horizontal_derivative(conn_field, x, y, conn, cfg)?;
    Ok(Tensor::from_fn(n, 3, |i| {
        let (c, a, b) = (i[0], i[1], i[2]);
        d[b][c * n + a] - d[a][c * n + b]
    }))
}

/// Curvature of a horizontal-coefficient field `F^a_bc` (flattened as
/// `[a][b][c]`):
/// `R_b^a_cd = dF^a_bc/dx^d - dF^a_bd/dx^c + F^a_de F^e_bc - F^a_ce F^e_bd`
/// with horizontal derivatives. Stored as `[a][b][c][d]`.
pub fn curvature_of<T>(
    hor_field: &T,
    x: &[Real],
    y: &[Real],
    hor: &Tensor,
    conn: &Tensor,
    cfg: &DiffConfig,
) -> Result<Tensor>
where
    T: Fn(&[Real], &[Real]) -> Result<Vec<Real>> + ?Sized,
{
    let n = x.len();
    let d = horizontal_derivative(hor_field, x, y, conn, cfg)?;
    let flat = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    Ok(Tensor::from_fn(n, 4, |i| {
        let (a, b, c, dd) = (i[0], i[1], i[2], i[3]);
        let mut v = d[dd][flat(a, b, c)] - d[c][flat(a, b, dd)];
        for e in 0..n {
            v += hor[[a, dd, e]] * hor[[e, b, c]] - hor[[a, c, e]] * hor[[e, b, dd]];
        }
        v
    }))
}

fn vec_to_tensor(d: &[Vec<Real>]) -> Tensor {
    // d[a][c] is d(comp c)/d(var a); tensor layout is [c][a]
    let n = d.len();
    Tensor::from_fn(n, 2, |i| d[i[1]][i[0]])
}

/// Quantities of one metric at one tangent sample, computed on demand.
pub struct FinslerPoint<'m> {
    metric: &'m dyn MetricEvaluator,
    x: Vec<Real>,
    y: Vec<Real>,
    plan: NumericPlan,
    norm: OnceCell<Real>,
    g: OnceCell<(Tensor, Tensor, f64)>,
    cartan: OnceCell<Tensor>,
    mean_cartan: OnceCell<Vec<Real>>,
    angular: OnceCell<Tensor>,
    spray_terms: OnceCell<(Vec<Real>, Vec<Real>)>,
    spray: OnceCell<Vec<Real>>,
    connection: OnceCell<Tensor>,
    vertical: OnceCell<Tensor>,
    berwald: OnceCell<Tensor>,
    horizontal: OnceCell<Tensor>,
}

impl<'m> FinslerPoint<'m> {
    pub fn new(metric: &'m dyn MetricEvaluator, x: &[Real], y: &[Real], plan: &NumericPlan) -> Result<Self> {
        let p = FinslerPoint {
            metric,
            x: x.to_vec(),
            y: y.to_vec(),
            plan: *plan,
            norm: OnceCell::new(),
            g: OnceCell::new(),
            cartan: OnceCell::new(),
            mean_cartan: OnceCell::new(),
            angular: OnceCell::new(),
            spray_terms: OnceCell::new(),
            spray: OnceCell::new(),
            connection: OnceCell::new(),
            vertical: OnceCell::new(),
            berwald: OnceCell::new(),
            horizontal: OnceCell::new(),
        };
        let f = metric.norm(x, y)?;
        let _ = p.norm.set(f);
        Ok(p)
    }

    pub fn at(metric: &'m dyn MetricEvaluator, s: &TangentSample, plan: &NumericPlan) -> Result<Self> {
        FinslerPoint::new(metric, &s.x, &s.y, plan)
    }

    fn sibling(&self, x: &[Real], y: &[Real]) -> Result<FinslerPoint<'m>> {
        FinslerPoint::new(self.metric, x, y, &self.plan)
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn x(&self) -> &[Real] {
        &self.x
    }

    pub fn y(&self) -> &[Real] {
        &self.y
    }

    pub fn plan(&self) -> &NumericPlan {
        &self.plan
    }

    pub fn norm(&self) -> Real {
        *self.norm.get().expect("norm set at construction")
    }

    fn g_parts(&self) -> Result<&(Tensor, Tensor, f64)> {
        cached(&self.g, || {
            let x = &self.x;
            let h = diffkit::hessian(&|yy: &[Real]| self.metric.norm_sq(x, yy), &self.y, &self.plan.direct)?;
            let g = h.map(|v| v * 0.5);
            let inv = spd_inverse(&g)?;
            Ok((g, inv.inverse, inv.condition))
        })
    }

    /// `g_ij = 1/2 d^2 F^2 / dy^i dy^j`.
    pub fn fundamental_tensor(&self) -> Result<Tensor> {
        Ok(self.g_parts()?.0.clone())
    }

    pub fn inverse_metric(&self) -> Result<Tensor> {
        Ok(self.g_parts()?.1.clone())
    }

    pub fn condition(&self) -> Result<f64> {
        Ok(self.g_parts()?.2)
    }

    /// Conditioning warnings attached to this point, if any.
    pub fn warnings(&self) -> Vec<String> {
        match self.g_parts() {
            Ok((_, _, c)) if *c > CONDITION_WARN => {
                vec![format!("fundamental tensor condition number {c:.3e} exceeds {CONDITION_WARN:e}")]
            }
            _ => Vec::new(),
        }
    }

    /// Lowered Cartan tensor `C_ijk = 1/4 d^3 F^2 / dy^i dy^j dy^k`.
    pub fn cartan_tensor(&self) -> Result<Tensor> {
        cached(&self.cartan, || {
            let x = &self.x;
            let t = diffkit::third(&|yy: &[Real]| self.metric.norm_sq(x, yy), &self.y, &self.plan.direct)?;
            Ok(t.map(|v| v * 0.25))
        })
        .cloned()
    }

    /// `I_i = g^{jk} C_ijk`.
    pub fn mean_cartan(&self) -> Result<Vec<Real>> {
        cached(&self.mean_cartan, || {
            let c = self.cartan_tensor()?;
            let ginv = &self.g_parts()?.1;
            let n = self.dim();
            Ok((0..n)
                .map(|i| {
                    let mut s = Real::ZERO;
                    for j in 0..n {
                        for k in 0..n {
                            s += ginv[[j, k]] * c[[i, j, k]];
                        }
                    }
                    s
                })
                .collect())
        })
        .cloned()
    }

    /// `C^2 = I^i I_i`.
    pub fn mean_cartan_norm_sq(&self) -> Result<Real> {
        let i = self.mean_cartan()?;
        let ginv = &self.g_parts()?.1;
        Ok(ginv.quad_form(&i, &i))
    }

    /// Angular metric `h_ij = F F_{y^i y^j}`.
    pub fn angular_metric(&self) -> Result<Tensor> {
        cached(&self.angular, || {
            let x = &self.x;
            let h = diffkit::hessian(&|yy: &[Real]| self.metric.norm(x, yy), &self.y, &self.plan.direct)?;
            let f = self.norm();
            Ok(h.map(|v| v * f))
        })
        .cloned()
    }

    /// Matsumoto torsion with `(n+1)` replaced by `n_factor + 1`.
    pub fn matsumoto_torsion_with(&self, n_factor: usize) -> Result<Tensor> {
        let c = self.cartan_tensor()?;
        let i = self.mean_cartan()?;
        let h = self.angular_metric()?;
        let w = 1.0 / (n_factor as f64 + 1.0);
        Ok(Tensor::from_fn(self.dim(), 3, |ix| {
            let (a, b, d) = (ix[0], ix[1], ix[2]);
            c[[a, b, d]] - (i[a] * h[[b, d]] + i[b] * h[[a, d]] + i[d] * h[[a, b]]) * w
        }))
    }

    /// `M_ijk = C_ijk - (I_i h_jk + I_j h_ik + I_k h_ij)/(n+1)`.
    pub fn matsumoto_torsion(&self) -> Result<Tensor> {
        self.matsumoto_torsion_with(self.dim())
    }

    /// `((F^2)_{x^k y^l} y^k, (F^2)_{x^l})`.
    fn spray_terms(&self) -> Result<&(Vec<Real>, Vec<Real>)> {
        cached(&self.spray_terms, || {
            let n = self.dim();
            let (x, y) = (&self.x, &self.y);
            let mut mixed = Vec::with_capacity(n);
            for l in 0..n {
                let phi = |st: &[Real]| {
                    let xs: Vec<Real> = x.iter().zip(y).map(|(a, b)| *a + st[1] * *b).collect();
                    self.metric.norm_sq(&xs, &unit_shift(y, l, st[0]))
                };
                mixed.push(diffkit::partial(
                    &phi,
                    &[Real::ZERO, Real::ZERO],
                    &MultiIndex::new(vec![1, 1]),
                    &self.plan.direct,
                )?);
            }
            let grad = diffkit::gradient(&|xx: &[Real]| self.metric.norm_sq(xx, y), x, &self.plan.direct)?;
            Ok((mixed, grad))
        })
    }

    /// `G^i = 1/4 g^{il} [(F^2)_{x^k y^l} y^k - (F^2)_{x^l}]`.
    pub fn spray(&self) -> Result<Vec<Real>> {
        cached(&self.spray, || {
            let (mixed, grad) = self.spray_terms()?;
            let w: Vec<Real> = mixed.iter().zip(grad).map(|(a, b)| *a - *b).collect();
            let ginv = &self.g_parts()?.1;
            Ok(ginv.matvec(&w).into_iter().map(|v| v * 0.25).collect())
        })
        .cloned()
    }

    /// `(F^2)_{x^k y^l} y^k - 2 (F^2)_{x^l}`; vanishes iff locally dually flat in this chart.
    pub fn ldf_residual(&self) -> Result<Vec<Real>> {
        let (mixed, grad) = self.spray_terms()?;
        Ok(mixed.iter().zip(grad).map(|(a, b)| *a - *b * 2.0).collect())
    }

    fn spray_field(&self) -> impl Fn(&[Real], &[Real]) -> Result<Vec<Real>> + '_ {
        move |x, y| self.sibling(x, y)?.spray()
    }

    /// Nonlinear connection `G^i_j = dG^i/dy^j`, stored `[i][j]`.
    pub fn nonlinear_connection(&self) -> Result<Tensor> {
        cached(&self.connection, || {
            let d = fiber_jacobian(&self.spray_field(), &self.x, &self.y, &self.plan.nested)?;
            Ok(vec_to_tensor(&d))
        })
        .cloned()
    }

    /// `G^i_jk = d^2 G^i / dy^j dy^k`, stored `[i][j][k]`.
    pub fn vertical_coefficients(&self) -> Result<Tensor> {
        cached(&self.vertical, || {
            let x = &self.x;
            let field = self.spray_field();
            let h = diffkit::hessian_vec(&|yy: &[Real]| field(x, yy), &self.y, &self.plan.nested)?;
            Ok(Tensor::from_fn(self.dim(), 3, |i| h[i[1]][i[2]][i[0]]))
        })
        .cloned()
    }

    /// Berwald curvature `B^i_jkl = d^3 G^i / dy^j dy^k dy^l`, stored `[i][j][k][l]`.
    pub fn berwald_curvature(&self) -> Result<Tensor> {
        cached(&self.berwald, || {
            let x = &self.x;
            let field = self.spray_field();
            let t = diffkit::third_vec(&|yy: &[Real]| field(x, yy), &self.y, &self.plan.nested)?;
            Ok(Tensor::from_fn(self.dim(), 4, |i| t[i[1]][i[2]][i[3]][i[0]]))
        })
        .cloned()
    }

    /// `E_jk = 1/2 B^m_jkm`.
    pub fn mean_berwald(&self) -> Result<Tensor> {
        Ok(mean_of_berwald(&self.berwald_curvature()?))
    }

    /// `R^i_k = 2 dG^i/dx^k - y^j d^2G^i/dx^j dy^k + 2 G^j d^2G^i/dy^j dy^k - G^i_j G^j_k`.
    pub fn riemann_curvature(&self) -> Result<Tensor> {
        let n = self.dim();
        let (x, y) = (&self.x, &self.y);
        let field = self.spray_field();
        let cfg = &self.plan.nested;
        let dx = diffkit::jacobian_vec(&|xx: &[Real]| field(xx, y), x, cfg)?;
        let mut mixed = Vec::with_capacity(n);
        for k in 0..n {
            let phi = |st: &[Real]| {
                let xs: Vec<Real> = x.iter().zip(y.iter()).map(|(a, b)| *a + st[1] * *b).collect();
                field(&xs, &unit_shift(y, k, st[0]))
            };
            mixed.push(diffkit::partial_vec(
                &phi,
                &[Real::ZERO, Real::ZERO],
                &MultiIndex::new(vec![1, 1]),
                cfg,
            )?);
        }
        let g = self.spray()?;
        let conn = self.nonlinear_connection()?;
        let vert = self.vertical_coefficients()?;
        Ok(Tensor::from_fn(n, 2, |ik| {
            let (i, k) = (ik[0], ik[1]);
            let mut r = dx[k][i] * 2.0 - mixed[k][i];
            for j in 0..n {
                r += g[j] * vert[[i, j, k]] * 2.0 - conn[[i, j]] * conn[[j, k]];
            }
            r
        }))
    }

    /// `K = g_y(u, R_y u) / (g_y(y,y) g_y(u,u) - g_y(y,u)^2)`.
    pub fn flag_curvature(&self, u: &[Real]) -> Result<Real> {
        let g = self.fundamental_tensor()?.symmetrize_matrix();
        let y = &self.y;
        let gram = g.quad_form(y, y) * g.quad_form(u, u) - g.quad_form(y, u).powi(2);
        let scale = g.quad_form(y, y) * g.quad_form(u, u);
        if !(gram.to_f64() > 1e-12 * scale.to_f64()) {
            return Err(Error::DegenerateFlag { gram: gram.to_f64() });
        }
        let r = self.riemann_curvature()?;
        let ru = r.matvec(u);
        Ok(g.quad_form(u, &ru) / gram)
    }

    /// Horizontal coefficients
    /// `F^c_ab = 1/2 g^{ce} (dg_ea/dx^b + dg_eb/dx^a - dg_ab/dx^e)` with
    /// horizontal derivatives, stored `[c][a][b]`.
    pub fn horizontal_coefficients(&self) -> Result<Tensor> {
        cached(&self.horizontal, || {
            let n = self.dim();
            let conn = self.nonlinear_connection()?;
            let g_field = |x: &[Real], y: &[Real]| Ok(self.sibling(x, y)?.g_parts()?.0.data().to_vec());
            let d = horizontal_derivative(&g_field, &self.x, &self.y, &conn, &self.plan.nested)?;
            let dg = |e: usize, a: usize, b: usize| d[b][e * n + a];
            let ginv = &self.g_parts()?.1;
            Ok(Tensor::from_fn(n, 3, |i| {
                let (c, a, b) = (i[0], i[1], i[2]);
                let mut s = Real::ZERO;
                for e in 0..n {
                    s += ginv[[c, e]] * (dg(e, a, b) + dg(e, b, a) - dg(a, b, e));
                }
                s * 0.5
            }))
        })
        .cloned()
    }

    /// `R^c_ab` from numerically differentiated connection coefficients.
    pub fn nonlinear_curvature(&self) -> Result<Tensor> {
        let field = |x: &[Real], y: &[Real]| Ok(self.sibling(x, y)?.nonlinear_connection()?.data().to_vec());
        nonlinear_curvature_of(&field, &self.x, &self.y, &self.nonlinear_connection()?, &self.plan.nested2)
    }

    /// `R_b^a_cd` from numerically differentiated horizontal coefficients, stored `[a][b][c][d]`.
    pub fn berwald_connection_curvature(&self) -> Result<Tensor> {
        let field = |x: &[Real], y: &[Real]| Ok(self.sibling(x, y)?.horizontal_coefficients()?.data().to_vec());
        curvature_of(
            &field,
            &self.x,
            &self.y,
            &self.horizontal_coefficients()?,
            &self.nonlinear_connection()?,
            &self.plan.nested2,
        )
    }
}

/// `E_jk = 1/2 B^m_jkm`.
pub fn mean_of_berwald(b: &Tensor) -> Tensor {
    let n = b.dim();
    Tensor::from_fn(n, 2, |jk| (0..n).map(|m| b[[m, jk[0], jk[1], m]]).sum::<Real>() * 0.5)
}

/// One state along an integrated geodesic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicState {
    pub t: f64,
    pub x: Vec<Real>,
    pub xdot: Vec<Real>,
    pub speed: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub states: Vec<GeodesicState>,
    /// Reason integration stopped early, if it did.
    pub exit: Option<String>,
}

impl Trajectory {
    pub fn truncated(&self) -> bool {
        self.exit.is_some()
    }

    /// `max |F(c'(t)) - F(c'(0))|`.
    pub fn speed_drift(&self) -> f64 {
        let f0 = self.states[0].speed;
        self.states
            .iter()
            .map(|s| (s.speed - f0).abs().to_f64())
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> &GeodesicState {
        self.states.last().expect("trajectory holds its initial state")
    }
}

/// Integrates `c'' + 2 G(c, c') = 0` with classical RK4.
///
/// Leaving the smooth domain stops the integration and returns the
/// trajectory computed so far with the exit reason recorded.
pub fn geodesic(
    metric: &dyn MetricEvaluator,
    x0: &[Real],
    y0: &[Real],
    t_end: f64,
    dt: f64,
    plan: &NumericPlan,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidConfig(format!("need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}")));
    }
    let n = metric.dim();
    let speed0 = metric.norm(x0, y0)?;
    let accel = |x: &[Real], v: &[Real]| -> Result<Vec<Real>> {
        let g = FinslerPoint::new(metric, x, v, plan)?.spray()?;
        Ok(g.into_iter().map(|c| -(c * 2.0)).collect())
    };
    let axpy = |a: &[Real], h: f64, b: &[Real]| -> Vec<Real> { a.iter().zip(b).map(|(p, q)| *p + *q * h).collect() };
    let steps = (t_end / dt).round() as usize;
    let mut states = vec![GeodesicState {
        t: 0.0,
        x: x0.to_vec(),
        xdot: y0.to_vec(),
        speed: speed0,
    }];
    let (mut x, mut v) = (x0.to_vec(), y0.to_vec());
    for step in 1..=steps {
        let result = (|| -> Result<(Vec<Real>, Vec<Real>)> {
            let k1x = v.clone();
            let k1v = accel(&x, &v)?;
            let (x2, v2) = (axpy(&x, dt / 2.0, &k1x), axpy(&v, dt / 2.0, &k1v));
            let k2v = accel(&x2, &v2)?;
            let (x3, v3) = (axpy(&x, dt / 2.0, &v2), axpy(&v, dt / 2.0, &k2v));
            let k3v = accel(&x3, &v3)?;
            let (x4, v4) = (axpy(&x, dt, &v3), axpy(&v, dt, &k3v));
            let k4v = accel(&x4, &v4)?;
            let nx = (0..n)
                .map(|i| x[i] + (k1x[i] + (v2[i] + v3[i]) * 2.0 + v4[i]) * (dt / 6.0))
                .collect();
            let nv = (0..n)
                .map(|i| v[i] + (k1v[i] + (k2v[i] + k3v[i]) * 2.0 + k4v[i]) * (dt / 6.0))
                .collect();
            Ok((nx, nv))
        })();
        let outcome = result.and_then(|(nx, nv)| metric.norm(&nx, &nv).map(|s| (nx, nv, s)));
        match outcome {
            Ok((nx, nv, speed)) => {
                x = nx;
                v = nv;
                states.push(GeodesicState {
                    t: step as f64 * dt,
                    x: x.clone(),
                    xdot: v.clone(),
                    speed,
                });
            }
            Err(Error::Domain(msg)) | Err(Error::InvalidSpec(msg)) => {
                return Ok(Trajectory {
                    states,
                    exit: Some(format!("left the smooth domain at t = {}: {msg}", step as f64 * dt)),
                });
            }
            Err(Error::NonFinite) => {
                return Ok(Trajectory {
                    states,
                    exit: Some(format!("non-finite state at t = {}", step as f64 * dt)),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory { states, exit: None })
}

/// Euclidean inner product helper for tests and samplers.
pub fn euclidean_norm(v: &[Real]) -> Real {
    dot(v, v).sqrt()
}
