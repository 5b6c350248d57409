//! Twisted products `F = sqrt(F1^2(x,y) + f(x,u)^2 F2^2(u,v))` and the
//! closed-form expressions of their spray, connection, Cartan, Berwald,
//! mean Berwald and horizontal coefficients in terms of component
//! quantities and the first derivatives of the twist.
//!
//! Product indices run over `0..n1+n2`; an index `a < n1` is an `M1`
//! index, otherwise it is the `M2` index `a - n1`. Component quantities
//! are computed with [`FinslerPoint`] on each factor, so the only thing
//! the closed forms contribute is the assembly; the product metric itself
//! (see [`TwistedProduct`] as a [`MetricEvaluator`]) feeds the oracle.

use std::cell::OnceCell;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::diffkit;
use crate::error::{Error, Result};
use crate::finsler::{cached, curvature_of, nonlinear_curvature_of, FinslerPoint, MetricEvaluator, NumericPlan};
use crate::real::{dot, Real};
use crate::sampling::ChartBox;
use crate::tensor::{multi_indices, Tensor};

/// A positive twist function with analytic first partials.
pub trait TwistFunction: Send + Sync {
    fn value(&self, x: &[Real], u: &[Real]) -> Real;
    /// `f_i = df/dx^i`.
    fn grad_x(&self, x: &[Real], u: &[Real]) -> Vec<Real>;
    /// `f_alpha = df/du^alpha`.
    fn grad_u(&self, x: &[Real], u: &[Real]) -> Vec<Real>;
}

/// Which factor a product index belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Slot {
    M1,
    M2,
}

/// A product tensor together with its `(n1, n2)` split.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockTensor {
    pub n1: usize,
    pub n2: usize,
    pub tensor: Tensor,
}

const LATIN: [&str; 6] = ["i", "j", "k", "l", "h", "r"];
const GREEK: [&str; 6] = ["α", "β", "γ", "λ", "μ", "ν"];

impl BlockTensor {
    pub fn new(n1: usize, n2: usize, tensor: Tensor) -> Self {
        assert_eq!(tensor.dim(), n1 + n2, "block split does not match tensor dimension");
        BlockTensor { n1, n2, tensor }
    }

    pub fn rank(&self) -> usize {
        self.tensor.rank()
    }

    pub fn slot(&self, a: usize) -> Slot {
        if a < self.n1 {
            Slot::M1
        } else {
            Slot::M2
        }
    }

    pub fn pattern(&self, idx: &[usize]) -> Vec<Slot> {
        idx.iter().map(|&a| self.slot(a)).collect()
    }

    /// Largest entry in the block with the given slot pattern.
    pub fn block_max(&self, pattern: &[Slot]) -> f64 {
        self.tensor.max_abs_where(|i| self.pattern(i) == pattern)
    }

    /// Every slot pattern of this rank, in lexicographic order (M1 first).
    pub fn patterns(&self) -> Vec<Vec<Slot>> {
        multi_indices(2, self.rank())
            .map(|bits| bits.iter().map(|&b| if b == 0 { Slot::M1 } else { Slot::M2 }).collect())
            .collect()
    }

    /// Human label such as `k|iβ` for a pattern: upper slot, then lower slots.
    pub fn label(pattern: &[Slot]) -> String {
        let mut latin = LATIN.iter().cycle();
        let mut greek = GREEK.iter().cycle();
        let mut out = String::new();
        for (pos, s) in pattern.iter().enumerate() {
            if pos == 1 {
                out.push('|');
            }
            out.push_str(match s {
                Slot::M1 => latin.next().copied().unwrap_or("i"),
                Slot::M2 => greek.next().copied().unwrap_or("α"),
            });
        }
        out
    }

    /// `(label, max |entry|)` for every block.
    pub fn block_summary(&self) -> Vec<(String, f64)> {
        self.patterns()
            .into_iter()
            .map(|p| (BlockTensor::label(&p), self.block_max(&p)))
            .collect()
    }

    /// Largest asymmetry under swapping slots `s` and `t`.
    pub fn asymmetry(&self, s: usize, t: usize) -> f64 {
        multi_indices(self.tensor.dim(), self.rank())
            .map(|i| {
                let mut j = i.clone();
                j.swap(s, t);
                (self.tensor.get(&i) - self.tensor.get(&j)).abs().to_f64()
            })
            .fold(0.0, f64::max)
    }
}

/// Two component metrics glued by a twist function.
#[derive(Clone)]
pub struct TwistedProduct {
    pub m1: Arc<dyn MetricEvaluator>,
    pub m2: Arc<dyn MetricEvaluator>,
    pub twist: Arc<dyn TwistFunction>,
    /// Replaces `n = n1 + n2` in the `(n+1)` factors when set.
    pub n_override: Option<usize>,
}

impl fmt::Debug for TwistedProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwistedProduct")
            .field("n1", &self.n1())
            .field("n2", &self.n2())
            .field("n_override", &self.n_override)
            .finish()
    }
}

impl TwistedProduct {
    pub fn new(m1: Arc<dyn MetricEvaluator>, m2: Arc<dyn MetricEvaluator>, twist: Arc<dyn TwistFunction>) -> Self {
        TwistedProduct {
            m1,
            m2,
            twist,
            n_override: None,
        }
    }

    pub fn n1(&self) -> usize {
        self.m1.dim()
    }

    pub fn n2(&self) -> usize {
        self.m2.dim()
    }

    /// Dimension used in the `(n+1)` factors.
    pub fn n_factor(&self) -> usize {
        self.n_override.unwrap_or(self.n1() + self.n2())
    }

    /// Splits a product coordinate vector into its `M1` and `M2` parts.
    pub fn split<'a>(&self, z: &'a [Real]) -> (&'a [Real], &'a [Real]) {
        z.split_at(self.n1())
    }

    /// Checks positivity of the twist and its analytic partials against
    /// finite differences on a grid of the product chart.
    pub fn validate_twist(&self, chart: &ChartBox, per_axis: usize, plan: &NumericPlan) -> Result<()> {
        let n1 = self.n1();
        for p in chart.grid(per_axis) {
            let z: Vec<Real> = p.iter().copied().map(Real::new).collect();
            let (x, u) = self.split(&z);
            let f = self.twist.value(x, u);
            if !(f.to_f64() > 0.0) {
                return Err(Error::InvalidSpec(format!("twist is not positive at {p:?}: f = {f}")));
            }
            let numeric = diffkit::gradient(
                &|zz: &[Real]| {
                    let (xx, uu) = zz.split_at(n1);
                    Ok(self.twist.value(xx, uu))
                },
                &z,
                &plan.direct,
            )?;
            let analytic: Vec<Real> = self.twist.grad_x(x, u).into_iter().chain(self.twist.grad_u(x, u)).collect();
            let scale = analytic.iter().map(|v| v.abs().to_f64()).fold(1.0, f64::max);
            for (a, (an, nu)) in analytic.iter().zip(&numeric).enumerate() {
                let err = (*an - *nu).abs().to_f64() / scale;
                if err > 1e-7 {
                    return Err(Error::InvalidSpec(format!(
                        "twist partial {a} disagrees with finite differences at {p:?}: analytic {an}, numeric {nu}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn point<'t>(&'t self, z: &[Real], w: &[Real], plan: &NumericPlan) -> Result<TwistedPoint<'t>> {
        TwistedPoint::new(self, z, w, plan)
    }
}

impl MetricEvaluator for TwistedProduct {
    fn dim(&self) -> usize {
        self.n1() + self.n2()
    }

    fn eval_raw(&self, z: &[Real], w: &[Real]) -> Real {
        let (x, u) = self.split(z);
        let (y, v) = self.split(w);
        let f = self.twist.value(x, u);
        let f1 = self.m1.eval_raw(x, y);
        let f2 = self.m2.eval_raw(u, v);
        (f1 * f1 + f * f * f2 * f2).sqrt()
    }

    fn in_domain(&self, z: &[Real], w: &[Real]) -> bool {
        let (x, u) = self.split(z);
        let (y, v) = self.split(w);
        self.m1.in_domain(x, y) && self.m2.in_domain(u, v) && self.twist.value(x, u).to_f64() > 0.0
    }
}

/// Component quantities of one factor needed by the closed forms.
struct Component {
    g: Tensor,
    ginv: Tensor,
    norm_sq: Real,
    /// `g_ab w^b` for the factor's own fiber vector.
    w_low: Vec<Real>,
    c_low: Tensor,
    /// `C^a_bc = g^{ad} C_dbc`.
    c_mixed: Tensor,
    /// `C^{ab}_c = g^{ad} g^{be} C_dec`, stored `[a][b][c]`.
    c_raised: Tensor,
    i_low: Vec<Real>,
    /// Raised twist gradient `g^{ab} f_b` for this factor's partials.
    f_up: Vec<Real>,
}

fn raised_cartan_field(p: &FinslerPoint<'_>) -> Result<Vec<Real>> {
    let n = p.dim();
    let ginv = p.inverse_metric()?;
    let c = p.cartan_tensor()?;
    let mut out = Vec::with_capacity(n * n * n + n);
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                let mut s = Real::ZERO;
                for d in 0..n {
                    for e in 0..n {
                        s += ginv[[a, d]] * ginv[[b, e]] * c[[d, e, k]];
                    }
                }
                out.push(s);
            }
        }
    }
    let i = p.mean_cartan()?;
    out.extend(ginv.matvec(&i));
    Ok(out)
}

/// A twisted product at one tangent sample `(x, u, y, v)`.
pub struct TwistedPoint<'t> {
    product: &'t TwistedProduct,
    z: Vec<Real>,
    w: Vec<Real>,
    plan: NumericPlan,
    pub p1: FinslerPoint<'t>,
    pub p2: FinslerPoint<'t>,
    f: Real,
    fx: Vec<Real>,
    fu: Vec<Real>,
    c1: OnceCell<Component>,
    c2: OnceCell<Component>,
    dc1: OnceCell<Vec<Vec<Real>>>,
    dc2: OnceCell<Vec<Vec<Real>>>,
    ddc1: OnceCell<Vec<Vec<Vec<Real>>>>,
    ddc2: OnceCell<Vec<Vec<Vec<Real>>>>,
    connection: OnceCell<Tensor>,
    horizontal: OnceCell<Tensor>,
    curvature: OnceCell<Tensor>,
}

impl<'t> TwistedPoint<'t> {
    pub fn new(product: &'t TwistedProduct, z: &[Real], w: &[Real], plan: &NumericPlan) -> Result<Self> {
        let n = product.dim();
        if z.len() != n || w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: z.len().max(w.len()),
            });
        }
        let (x, u) = product.split(z);
        let (y, v) = product.split(w);
        let p1 = FinslerPoint::new(product.m1.as_ref(), x, y, plan)?;
        let p2 = FinslerPoint::new(product.m2.as_ref(), u, v, plan)?;
        let f = product.twist.value(x, u);
        if !(f.to_f64() > 0.0) {
            return Err(Error::Domain(format!("twist is not positive: f = {f}")));
        }
        Ok(TwistedPoint {
            product,
            z: z.to_vec(),
            w: w.to_vec(),
            plan: *plan,
            p1,
            p2,
            f,
            fx: product.twist.grad_x(x, u),
            fu: product.twist.grad_u(x, u),
            c1: OnceCell::new(),
            c2: OnceCell::new(),
            dc1: OnceCell::new(),
            dc2: OnceCell::new(),
            ddc1: OnceCell::new(),
            ddc2: OnceCell::new(),
            connection: OnceCell::new(),
            horizontal: OnceCell::new(),
            curvature: OnceCell::new(),
        })
    }

    fn sibling(&self, z: &[Real], w: &[Real]) -> Result<TwistedPoint<'t>> {
        TwistedPoint::new(self.product, z, w, &self.plan)
    }

    pub fn n1(&self) -> usize {
        self.product.n1()
    }

    pub fn n2(&self) -> usize {
        self.product.n2()
    }

    pub fn dim(&self) -> usize {
        self.product.dim()
    }

    pub fn z(&self) -> &[Real] {
        &self.z
    }

    pub fn w(&self) -> &[Real] {
        &self.w
    }

    fn y(&self) -> &[Real] {
        &self.w[..self.n1()]
    }

    fn v(&self) -> &[Real] {
        &self.w[self.n1()..]
    }

    pub fn twist(&self) -> Real {
        self.f
    }

    pub fn twist_grad_x(&self) -> &[Real] {
        &self.fx
    }

    pub fn twist_grad_u(&self) -> &[Real] {
        &self.fu
    }

    /// Product norm `sqrt(F1^2 + f^2 F2^2)`.
    pub fn norm(&self) -> Real {
        let (a, b) = (self.p1.norm(), self.p2.norm());
        (a * a + self.f * self.f * b * b).sqrt()
    }

    fn block(&self, t: Tensor) -> BlockTensor {
        BlockTensor::new(self.n1(), self.n2(), t)
    }

    fn component(&self, second: bool) -> Result<&Component> {
        let (cell, p, grad) = if second {
            (&self.c2, &self.p2, &self.fu)
        } else {
            (&self.c1, &self.p1, &self.fx)
        };
        cached(cell, || {
            let n = p.dim();
            let g = p.fundamental_tensor()?;
            let ginv = p.inverse_metric()?;
            let c_low = p.cartan_tensor()?;
            let c_mixed = Tensor::from_fn(n, 3, |i| (0..n).map(|d| ginv[[i[0], d]] * c_low[[d, i[1], i[2]]]).sum());
            let raised = raised_cartan_field(p)?;
            let c_raised = Tensor::from_vec(n, 3, raised[..n * n * n].to_vec());
            let w_low = g.matvec(p.y());
            Ok(Component {
                norm_sq: p.norm() * p.norm(),
                w_low,
                c_mixed,
                c_raised,
                i_low: p.mean_cartan()?,
                f_up: ginv.matvec(grad),
                g,
                ginv,
                c_low,
            })
        })
    }

    fn cartan_field(&self, second_factor: bool) -> (impl Fn(&[Real]) -> Result<Vec<Real>> + '_, &FinslerPoint<'t>) {
        let (p, m) = if second_factor {
            (&self.p2, self.product.m2.as_ref())
        } else {
            (&self.p1, self.product.m1.as_ref())
        };
        let plan = self.plan;
        let x = p.x();
        (move |yy: &[Real]| raised_cartan_field(&FinslerPoint::new(m, x, yy, &plan)?), p)
    }

    /// `d/dy^k` of `(C^{ab}_c, I^a)`, stored `[k][flat]`.
    fn cartan_d1(&self, second_factor: bool) -> Result<&Vec<Vec<Real>>> {
        let cell = if second_factor { &self.dc2 } else { &self.dc1 };
        cached(cell, || {
            let (field, p) = self.cartan_field(second_factor);
            diffkit::jacobian_vec(&field, p.y(), &self.plan.nested)
        })
    }

    /// Second fiber derivatives, stored `[k][l][flat]`.
    fn cartan_d2(&self, second_factor: bool) -> Result<&Vec<Vec<Vec<Real>>>> {
        let cell = if second_factor { &self.ddc2 } else { &self.ddc1 };
        cached(cell, || {
            let (field, p) = self.cartan_field(second_factor);
            diffkit::hessian_vec(&field, p.y(), &self.plan.nested)
        })
    }

    /// Block metric: `g_ij`, `f^2 g_αβ`, zero off-diagonal blocks.
    pub fn block_metric(&self) -> Result<BlockTensor> {
        let (c1, c2) = (self.component(false)?, self.component(true)?);
        let n1 = self.n1();
        let f2 = self.f * self.f;
        Ok(self.block(Tensor::from_fn(self.dim(), 2, |i| match (i[0] < n1, i[1] < n1) {
            (true, true) => c1.g[[i[0], i[1]]],
            (false, false) => c2.g[[i[0] - n1, i[1] - n1]] * f2,
            _ => Real::ZERO,
        })))
    }

    /// Closed-form spray.
    pub fn spray(&self) -> Result<BlockTensor> {
        let (c1, c2) = (self.component(false)?, self.component(true)?);
        let (n1, n2) = (self.n1(), self.n2());
        let (g1, g2) = (self.p1.spray()?, self.p2.spray()?);
        let f = self.f;
        let (y, v) = (self.y(), self.v());
        let fy = dot(&self.fx, y);
        let fv = dot(&self.fu, v);
        let mut out = Vec::with_capacity(n1 + n2);
        for i in 0..n1 {
            out.push(g1[i] - f * c1.f_up[i] * c2.norm_sq * 0.5);
        }
        for a in 0..n2 {
            out.push(g2[a] + (fy * v[a] + fv * v[a] - c2.f_up[a] * c2.norm_sq * 0.5) / f);
        }
        Ok(self.block(Tensor::vector(&out)))
    }

    /// Closed-form nonlinear connection `G^a_b`, stored `[a][b]`.
    pub fn connection_blocks(&self) -> Result<BlockTensor> {
        cached(&self.connection, || self.connection_with(ConnectionReading::Standard)).map(|t| self.block(t.clone()))
    }

    /// Alternative reading of the `G^α_β` block in which only the
    /// Cartan term carries the `1/f` factor.
    pub fn connection_blocks_alternative(&self) -> Result<BlockTensor> {
        self.connection_with(ConnectionReading::CartanTermOnly).map(|t| self.block(t))
    }

    fn connection_with(&self, reading: ConnectionReading) -> Result<Tensor> {
        let (c1, c2) = (self.component(false)?, self.component(true)?);
        let (n1, n2) = (self.n1(), self.n2());
        let (k1, k2) = (self.p1.nonlinear_connection()?, self.p2.nonlinear_connection()?);
        let f = self.f;
        let (y, v) = (self.y(), self.v());
        let fy = dot(&self.fx, y);
        let fv = dot(&self.fu, v);
        let f2sq = c2.norm_sq;
        Ok(Tensor::from_fn(n1 + n2, 2, |ab| {
            let (a, b) = (ab[0], ab[1]);
            match (a < n1, b < n1) {
                (true, true) => {
                    let (i, j) = (a, b);
                    let t: Real = (0..n1).map(|h| c1.c_raised[[i, h, j]] * self.fx[h]).sum();
                    k1[[i, j]] + t * f * f2sq
                }
                (true, false) => -(f * c1.f_up[a] * c2.w_low[b - n1]),
                (false, true) => self.fx[b] * v[a - n1] / f,
                (false, false) => {
                    let (al, be) = (a - n1, b - n1);
                    let delta = if al == be { Real::ONE } else { Real::ZERO };
                    let cterm: Real = (0..n2).map(|g| c2.c_raised[[al, g, be]] * self.fu[g]).sum::<Real>() * f2sq;
                    let rest = fy * delta - c2.f_up[al] * c2.w_low[be] + self.fu[be] * v[al] + fv * delta;
                    match reading {
                        ConnectionReading::Standard => k2[[al, be]] + (cterm + rest) / f,
                        ConnectionReading::CartanTermOnly => k2[[al, be]] + cterm / f + rest,
                    }
                }
            }
        }))
    }

    /// Closed-form vertical coefficients `G^c_ab = dG^c_a/dy^b`, stored `[c][a][b]`.
    pub fn vertical_coefficients(&self) -> Result<BlockTensor> {
        let (c1, c2) = (self.component(false)?, self.component(true)?);
        let (n1, n2) = (self.n1(), self.n2());
        let (v1, v2) = (self.p1.vertical_coefficients()?, self.p2.vertical_coefficients()?);
        let (d1, d2) = (self.cartan_d1(false)?, self.cartan_d1(true)?);
        let f = self.f;
        let f2sq = c2.norm_sq;
        let flat = |n: usize, a: usize, b: usize, c: usize| (a * n + b) * n + c;
        Ok(self.block(Tensor::from_fn(n1 + n2, 3, |i| {
            let (c, a, b) = (i[0], i[1], i[2]);
            match (c < n1, a < n1, b < n1) {
                (true, true, true) => {
                    let t: Real = (0..n1).map(|h| d1[b][flat(n1, c, h, a)] * self.fx[h]).sum();
                    v1[[c, a, b]] + t * f * f2sq
                }
                (true, true, false) | (true, false, true) => {
                    let (i1, be) = if a < n1 { (a, b - n1) } else { (b, a - n1) };
                    let t: Real = (0..n1).map(|h| c1.c_raised[[c, h, i1]] * self.fx[h]).sum();
                    t * f * c2.w_low[be] * 2.0
                }
                (true, false, false) => -(f * c1.f_up[c] * c2.g[[a - n1, b - n1]]),
                (false, true, true) => Real::ZERO,
                (false, true, false) | (false, false, true) => {
                    let (i1, be) = if a < n1 { (a, b - n1) } else { (b, a - n1) };
                    if be == c - n1 {
                        self.fx[i1] / f
                    } else {
                        Real::ZERO
                    }
                }
                (false, false, false) => {
                    let (g, al, be) = (c - n1, a - n1, b - n1);
                    let mut s = Real::ZERO;
                    for l in 0..n2 {
                        s += d2[be][flat(n2, g, l, al)] * self.fu[l] * f2sq;
                        s += c2.c_raised[[g, l, al]] * self.fu[l] * c2.w_low[be] * 2.0;
                        s += c2.c_raised[[g, l, be]] * self.fu[l] * c2.w_low[al] * 2.0;
                    }
                    s -= c2.f_up[g] * c2.g[[al, be]];
                    if g == al {
                        s += self.fu[be];
                    }
                    if g == be {
                        s += self.fu[al];
                    }
                    v2[[g, al, be]] + s / f
                }
            }
        })))
    }

    /// Lowered Cartan tensor: `C_ijk`, `f^2 C_αβγ`, mixed blocks zero.
    pub fn cartan_blocks(&self) -> Result<BlockTensor> {
        let (c1, c2) = (self.component(false)?, self.component(true)?);
        let n1 = self.n1();
        let f2 = self.f * self.f;
        Ok(self.block(Tensor::from_fn(self.dim(), 3, |i| {
            if i.iter().all(|&a| a < n1) {
                c1.c_low[[i[0], i[1], i[2]]]
            } else if i.iter().all(|&a| a >= n1) {
                c2.c_low[[i[0] - n1, i[1] - n1, i[2] - n1]] * f2
            } else {
                Real::ZERO
            }
        })))
    }

    /// Mixed Cartan tensor `C^c_ab`: the component tensors on the diagonal blocks.
    pub fn cartan_mixed_blocks(&self) -> Result<BlockTensor> {
        let (c1, c2) = (self.component(false)?, self.component(true)?);
        let n1 = self.n1();
        Ok(self.block(Tensor::from_fn(self.dim(), 3, |i| {
            if i.iter().all(|&a| a < n1) {
                c1.c_mixed[[i[0], i[1], i[2]]]
            } else if i.iter().all(|&a| a >= n1) {
                c2.c_mixed[[i[0] - n1, i[1] - n1, i[2] - n1]]
            } else {
                Real::ZERO
            }
        })))
    }

    /// Right-hand sides of the Matsumoto contractions:
    /// `(-f^2 F1^2 F2^2 / ((n+1) F^2) I_α, -f^2 F1^2 F2^2 / ((n+1) F^2) I_i)`.
    pub fn matsumoto_contraction_rhs(&self) -> Result<(Vec<Real>, Vec<Real>)> {
        let (c1, c2) = (self.component(false)?, self.component(true)?);
        let fsq = self.norm() * self.norm();
        let k = -(self.f * self.f * c1.norm_sq * c2.norm_sq) / ((self.product.n_factor() as f64 + 1.0) * fsq);
        Ok((
            c2.i_low.iter().map(|v| *v * k).collect(),
            c1.i_low.iter().map(|v| *v * k).collect(),
        ))
    }

    /// Closed-form Berwald curvature `B^d_abc`, stored `[d][a][b][c]`.
    pub fn berwald_blocks(&self) -> Result<BlockTensor> {
        let (c1, c2) = (self.component(false)?, self.component(true)?);
        let (n1, n2) = (self.n1(), self.n2());
        let (b1, b2) = (self.p1.berwald_curvature()?, self.p2.berwald_curvature()?);
        let (d1, d2) = (self.cartan_d1(false)?, self.cartan_d1(true)?);
        let (h1, h2) = (self.cartan_d2(false)?, self.cartan_d2(true)?);
        let f = self.f;
        let f2sq = c2.norm_sq;
        let flat = |n: usize, a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let fx = &self.fx;
        let fu = &self.fu;
        // C^{kh}_{l} f_h and its fiber derivatives on M1
        let ck = |k: usize, l: usize| -> Real { (0..n1).map(|h| c1.c_raised[[k, h, l]] * fx[h]).sum() };
        let ck1 = |k: usize, l: usize, j: usize| -> Real { (0..n1).map(|h| d1[j][flat(n1, k, h, l)] * fx[h]).sum() };
        let ck2 = |k: usize, l: usize, j: usize, i: usize| -> Real {
            (0..n1).map(|h| h1[j][i][flat(n1, k, h, l)] * fx[h]).sum()
        };
        let cg = |g: usize, a: usize| -> Real { (0..n2).map(|nu| c2.c_raised[[g, nu, a]] * fu[nu]).sum() };
        let cg1 = |g: usize, a: usize, b: usize| -> Real { (0..n2).map(|nu| d2[b][flat(n2, g, nu, a)] * fu[nu]).sum() };
        let cg2 = |g: usize, a: usize, b: usize, c: usize| -> Real {
            (0..n2).map(|nu| h2[b][c][flat(n2, g, nu, a)] * fu[nu]).sum()
        };
        let vl = &c2.w_low;
        let g2 = &c2.g;
        Ok(self.block(Tensor::from_fn(n1 + n2, 4, |i| {
            let d = i[0];
            let lower = [i[1], i[2], i[3]];
            let m2_count = lower.iter().filter(|&&a| a >= n1).count();
            if d >= n1 {
                if m2_count < 3 {
                    return Real::ZERO;
                }
                let (g, al, be, la) = (d - n1, lower[0] - n1, lower[1] - n1, lower[2] - n1);
                let s = cg2(g, la, al, be) * f2sq
                    + cg1(g, al, be) * vl[la] * 2.0
                    + cg1(g, al, la) * vl[be] * 2.0
                    + cg(g, al) * g2[[la, be]] * 2.0
                    + cg1(g, la, be) * vl[al] * 2.0
                    + cg(g, be) * g2[[la, al]] * 2.0
                    + cg(g, la) * g2[[al, be]] * 2.0
                    - c2.c_low[[al, be, la]] * c2.f_up[g] * 2.0;
                return b2[[g, al, be, la]] + s / f;
            }
            let k = d;
            let m1s: Vec<usize> = lower.iter().copied().filter(|&a| a < n1).collect();
            let m2s: Vec<usize> = lower.iter().copied().filter(|&a| a >= n1).map(|a| a - n1).collect();
            match m2_count {
                0 => b1[[k, lower[0], lower[1], lower[2]]] + f * ck2(k, lower[2], lower[1], lower[0]) * f2sq,
                1 => f * ck1(k, m1s[0], m1s[1]) * vl[m2s[0]] * 2.0,
                2 => f * g2[[m2s[0], m2s[1]]] * ck(k, m1s[0]) * 2.0,
                _ => -(f * c2.c_low[[m2s[0], m2s[1], m2s[2]]] * c1.f_up[k] * 2.0),
            }
        })))
    }

    /// Mean Berwald curvature with the `1/f` coefficient on the
    /// `I^ν_{;α;β}` term, which is what the trace of the Berwald blocks gives.
    pub fn mean_berwald_blocks(&self) -> Result<BlockTensor> {
        self.mean_berwald_with(false)
    }

    /// Mean Berwald curvature with coefficient `f` on the `I^ν_{;α;β}` term.
    pub fn mean_berwald_literal(&self) -> Result<BlockTensor> {
        self.mean_berwald_with(true)
    }

    fn mean_berwald_with(&self, literal: bool) -> Result<BlockTensor> {
        let (c1, c2) = (self.component(false)?, self.component(true)?);
        let (n1, n2) = (self.n1(), self.n2());
        let (e1, e2) = (self.p1.mean_berwald()?, self.p2.mean_berwald()?);
        let (d1, d2) = (self.cartan_d1(false)?, self.cartan_d1(true)?);
        let (h1, h2) = (self.cartan_d2(false)?, self.cartan_d2(true)?);
        let f = self.f;
        let f2sq = c2.norm_sq;
        let (fx, fu) = (&self.fx, &self.fu);
        let flat = |n: usize, a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let iup1 = n1 * n1 * n1;
        let iup2 = n2 * n2 * n2;
        let i1_up = c1.ginv.matvec(&c1.i_low);
        let i2_up = c2.ginv.matvec(&c2.i_low);
        let ihf = dot(&i1_up, fx);
        let vl = &c2.w_low;
        Ok(self.block(Tensor::from_fn(n1 + n2, 2, |ab| {
            let (a, b) = (ab[0], ab[1]);
            match (a < n1, b < n1) {
                (true, true) => {
                    let t: Real = (0..n1).map(|h| h1[b][a][iup1 + h] * fx[h]).sum();
                    e1[[a, b]] + f * t * f2sq * 0.5
                }
                (true, false) | (false, true) => {
                    let (i, be) = if a < n1 { (a, b - n1) } else { (b, a - n1) };
                    let t: Real = (0..n1).map(|h| d1[i][iup1 + h] * fx[h]).sum();
                    f * t * vl[be]
                }
                (false, false) => {
                    let (al, be) = (a - n1, b - n1);
                    let second: Real = (0..n2).map(|nu| h2[al][be][iup2 + nu] * fu[nu]).sum();
                    let coeff = if literal { f * 0.5 } else { f.recip() * 0.5 };
                    let mut rest = Real::ZERO;
                    for nu in 0..n2 {
                        let mut inner = Real::ZERO;
                        for g in 0..n2 {
                            inner += d2[be][flat(n2, g, nu, al)] * vl[g];
                        }
                        inner += d2[al][iup2 + nu] * vl[be] + d2[be][iup2 + nu] * vl[al];
                        inner += c2.c_mixed[[nu, al, be]] + i2_up[nu] * c2.g[[al, be]];
                        rest += fu[nu] * inner;
                    }
                    e2[[al, be]] + f * c2.g[[al, be]] * ihf + coeff * second * f2sq + rest / f
                }
            }
        })))
    }

    /// Closed-form horizontal coefficients `F^c_ab`, stored `[c][a][b]`.
    pub fn horizontal_coeffs(&self) -> Result<BlockTensor> {
        cached(&self.horizontal, || self.horizontal_raw()).map(|t| self.block(t.clone()))
    }

    fn horizontal_raw(&self) -> Result<Tensor> {
        let (c1, c2) = (self.component(false)?, self.component(true)?);
        let (n1, n2) = (self.n1(), self.n2());
        let (hf1, hf2) = (self.p1.horizontal_coefficients()?, self.p2.horizontal_coefficients()?);
        let conn = self.connection_blocks()?.tensor;
        let f = self.f;
        let f2sq = c2.norm_sq;
        let (fx, fu) = (&self.fx, &self.fu);
        let (y, v) = (self.y(), self.v());
        let fy = dot(fx, y);
        let fv = dot(fu, v);
        // M^r_i = C^{rh}_i f f_h F2^2
        let m1 = Tensor::from_fn(n1, 2, |ri| {
            (0..n1).map(|h| c1.c_raised[[ri[0], h, ri[1]]] * fx[h]).sum::<Real>() * f * f2sq
        });
        // M^μ_α
        let m2 = Tensor::from_fn(n2, 2, |ma| {
            let (mu, al) = (ma[0], ma[1]);
            let delta = if mu == al { Real::ONE } else { Real::ZERO };
            let ct: Real = (0..n2).map(|g| c2.c_raised[[mu, g, al]] * fu[g]).sum();
            (ct * f2sq + fy * delta + fv * delta - c2.f_up[mu] * c2.w_low[al] + fu[al] * v[mu]) / f
        });
        let nn = |g: usize, al: usize, be: usize| -> Real {
            let mut s = -(c2.f_up[g] * c2.g[[al, be]]);
            if g == al {
                s += fu[be];
            }
            if g == be {
                s += fu[al];
            }
            s / f
        };
        let bold = |a: usize, b: usize| conn[[a, b]];
        Ok(Tensor::from_fn(n1 + n2, 3, |i| {
            let (c, a, b) = (i[0], i[1], i[2]);
            match (c < n1, a < n1, b < n1) {
                (true, true, true) => {
                    let (k, ii, j) = (c, a, b);
                    let mut s = Real::ZERO;
                    for r in 0..n1 {
                        s += m1[[r, j]] * c1.c_mixed[[k, ii, r]] + m1[[r, ii]] * c1.c_mixed[[k, j, r]];
                        for h in 0..n1 {
                            s -= m1[[r, h]] * c1.c_low[[ii, j, r]] * c1.ginv[[k, h]];
                        }
                    }
                    hf1[[k, ii, j]] - s
                }
                (true, true, false) | (true, false, true) => {
                    let (ii, be) = if a < n1 { (a, b) } else { (b, a) };
                    -(0..n1).map(|r| bold(r, be) * c1.c_mixed[[c, ii, r]]).sum::<Real>()
                }
                (true, false, false) => {
                    let (al, be) = (a - n1, b - n1);
                    let mut s = -(f * c1.f_up[c] * c2.g[[al, be]]);
                    for h in 0..n1 {
                        for la in 0..n2 {
                            s += f * f * c1.ginv[[c, h]] * bold(n1 + la, h) * c2.c_low[[al, be, la]];
                        }
                    }
                    s
                }
                (false, true, true) => {
                    let g = c - n1;
                    let mut s = Real::ZERO;
                    for la in 0..n2 {
                        for r in 0..n1 {
                            s += c2.ginv[[g, la]] * bold(r, n1 + la) * c1.c_low[[a, b, r]];
                        }
                    }
                    s / (f * f)
                }
                (false, true, false) | (false, false, true) => {
                    let (ii, be) = if a < n1 { (a, b - n1) } else { (b, a - n1) };
                    let g = c - n1;
                    let mut s = if g == be { fx[ii] / f } else { Real::ZERO };
                    for al in 0..n2 {
                        s -= bold(n1 + al, ii) * c2.c_mixed[[g, al, be]];
                    }
                    s
                }
                (false, false, false) => {
                    let (g, al, be) = (c - n1, a - n1, b - n1);
                    let mut s = Real::ZERO;
                    for mu in 0..n2 {
                        s += m2[[mu, be]] * c2.c_mixed[[g, al, mu]] + m2[[mu, al]] * c2.c_mixed[[g, be, mu]];
                        for la in 0..n2 {
                            s -= m2[[mu, la]] * c2.c_low[[al, be, mu]] * c2.ginv[[g, la]];
                        }
                    }
                    hf2[[g, al, be]] + nn(g, al, be) - s
                }
            }
        }))
    }

    /// Nonlinear curvature `R^c_ab` from horizontal derivatives of the
    /// closed-form connection, stored `[c][a][b]`.
    pub fn nonlinear_curvature(&self) -> Result<BlockTensor> {
        let field = |z: &[Real], w: &[Real]| Ok(self.sibling(z, w)?.connection_blocks()?.tensor.data().to_vec());
        let conn = self.connection_blocks()?.tensor;
        nonlinear_curvature_of(&field, &self.z, &self.w, &conn, &self.plan.nested2).map(|t| self.block(t))
    }

    /// `R_b^a_cd` from horizontal derivatives of the closed-form
    /// horizontal coefficients, stored `[a][b][c][d]`.
    pub fn berwald_connection_curvature(&self) -> Result<BlockTensor> {
        let r = cached(&self.curvature, || {
            let field = |z: &[Real], w: &[Real]| Ok(self.sibling(z, w)?.horizontal_coeffs()?.tensor.data().to_vec());
            let hor = self.horizontal_coeffs()?.tensor;
            let conn = self.connection_blocks()?.tensor;
            curvature_of(&field, &self.z, &self.w, &hor, &conn, &self.plan.nested2)
        })?;
        Ok(self.block(r.clone()))
    }

    /// Vertical, horizontal and almost-tangent structure on the
    /// `2(n1+n2)`-dimensional tangent space of the slit bundle, as matrices
    /// in the natural basis `(d/dx^a, d/dy^a)`.
    pub fn adapted_frame(&self) -> Result<AdaptedFrame> {
        let conn = self.connection_blocks()?.tensor;
        let n = self.dim();
        let vt = Tensor::from_fn(2 * n, 2, |rc| {
            let (r, c) = (rc[0], rc[1]);
            match (r < n, c < n) {
                (false, true) => conn[[r - n, c]],
                (false, false) if r == c => Real::ONE,
                _ => Real::ZERO,
            }
        });
        let ht = Tensor::identity(2 * n).zip_with(&vt, |a, b| a - b);
        let jt = Tensor::from_fn(2 * n, 2, |rc| {
            if rc[0] >= n && rc[1] < n && rc[0] - n == rc[1] {
                Real::ONE
            } else {
                Real::ZERO
            }
        });
        Ok(AdaptedFrame {
            vertical: vt,
            horizontal: ht,
            almost_tangent: jt,
            connection: conn,
        })
    }

    /// Residuals of the two component dually-flat conditions.
    ///
    /// `im1[l] = 2 dF1^2/dx^l + 4 f f_l F2^2 - (d^2F1^2/dx^k dy^l) y^k`,
    /// `im2[β] = 2f dF2^2/du^β + 4 f_β F2^2 - 4 f_k v_β y^k - f (d^2F2^2/du^α dv^β) v^α - 4 f_α v_β v^α`.
    pub fn ldf_residuals(&self) -> Result<(Vec<Real>, Vec<Real>)> {
        let c2 = self.component(true)?;
        let (r1, r2) = (self.p1.ldf_residual()?, self.p2.ldf_residual()?);
        let f = self.f;
        let (y, v) = (self.y(), self.v());
        let fy = dot(&self.fx, y);
        let fv = dot(&self.fu, v);
        let im1 = (0..self.n1())
            .map(|l| f * self.fx[l] * c2.norm_sq * 4.0 - r1[l])
            .collect();
        let im2 = (0..self.n2())
            .map(|b| {
                self.fu[b] * c2.norm_sq * 4.0
                    - fy * c2.w_low[b] * 4.0
                    - fv * c2.w_low[b] * 4.0
                    - f * r2[b]
            })
            .collect();
        Ok((im1, im2))
    }

    /// Second dually-flat sub-condition `f_α v^α v_β - f_β F2^2`.
    pub fn im6_residual(&self) -> Result<Vec<Real>> {
        let c2 = self.component(true)?;
        let fv = dot(&self.fu, self.v());
        Ok((0..self.n2())
            .map(|b| fv * c2.w_low[b] - self.fu[b] * c2.norm_sq)
            .collect())
    }

    /// `C^{kh}_l f_h` on `M1`, stored `[k][l]`.
    pub fn cartan_twist_contraction(&self) -> Result<Tensor> {
        let c1 = self.component(false)?;
        let n1 = self.n1();
        Ok(Tensor::from_fn(n1, 2, |kl| {
            (0..n1).map(|h| c1.c_raised[[kl[0], h, kl[1]]] * self.fx[h]).sum()
        }))
    }

    /// `I^h f_h` on `M1`.
    pub fn mean_cartan_twist_contraction(&self) -> Result<Real> {
        let c1 = self.component(false)?;
        Ok(dot(&c1.ginv.matvec(&c1.i_low), &self.fx))
    }

    /// `(F1^2, F2^2)`.
    pub fn component_norms_sq(&self) -> (Real, Real) {
        (self.p1.norm() * self.p1.norm(), self.p2.norm() * self.p2.norm())
    }

    /// `|grad f|^2 = g1^{ij} f_i f_j`, using the `M1` metric at this sample.
    pub fn grad_twist_norm_sq(&self) -> Result<Real> {
        let c1 = self.component(false)?;
        Ok(dot(&c1.f_up, &self.fx))
    }

    /// Component fundamental tensor of `M2` at `(u, v)`.
    pub fn g2(&self) -> Result<Tensor> {
        Ok(self.component(true)?.g.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ConnectionReading {
    Standard,
    CartanTermOnly,
}

/// Projector triple on `T(TM°)` in the natural basis.
#[derive(Clone, Debug, Serialize)]
pub struct AdaptedFrame {
    pub vertical: Tensor,
    pub horizontal: Tensor,
    pub almost_tangent: Tensor,
    pub connection: Tensor,
}

impl AdaptedFrame {
    /// Columns are `delta/delta x^a` in the natural basis.
    pub fn horizontal_basis(&self) -> Tensor {
        let n = self.connection.dim();
        Tensor::from_fn(2 * n, 2, |rc| {
            let (r, c) = (rc[0], rc[1]);
            if c >= n {
                return Real::ZERO;
            }
            if r < n {
                if r == c {
                    Real::ONE
                } else {
                    Real::ZERO
                }
            } else {
                -self.connection[[r - n, c]]
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{catalog_entry, Euclidean, TwistKind, TwistSpec};
    use crate::real::reals;

    fn euclid_product(n1: usize, n2: usize, kind: TwistKind) -> TwistedProduct {
        let twist = TwistSpec { id: "t".into(), kind }.instantiate(n1, n2).unwrap();
        TwistedProduct::new(Arc::new(Euclidean { dim: n1 }), Arc::new(Euclidean { dim: n2 }), twist)
    }

    fn at<'t>(t: &'t TwistedProduct, z: &[f64], w: &[f64]) -> TwistedPoint<'t> {
        t.point(&reals(z), &reals(w), &NumericPlan::default()).unwrap()
    }

    fn close(a: Real, b: f64, tol: f64) {
        assert!((a.to_f64() - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn product_norm_examples() {
        let t = euclid_product(2, 2, TwistKind::Const { c: 1.0 });
        let n = t.norm(&reals(&[0.1, 0.2, 0.3, 0.4]), &reals(&[1.0, 2.0, 2.0, 4.0])).unwrap();
        close(n, 5.0, 1e-30);
        let t = euclid_product(2, 2, TwistKind::Const { c: 2.0 });
        let n = t.norm(&reals(&[0.0; 4]), &reals(&[0.5, 0.0, 1.0, 0.0])).unwrap();
        close(n, 4.25f64.sqrt(), 1e-15);
        let p = at(&t, &[0.0; 4], &[0.5, 0.0, 1.0, 0.0]);
        let (a, b) = p.component_norms_sq();
        assert!((p.norm() * p.norm() - a - b * 4.0).abs().to_f64() < 1e-12);
    }

    #[test]
    fn block_metric_of_constant_twist() {
        let t = euclid_product(2, 2, TwistKind::Const { c: 2.0 });
        let g = at(&t, &[0.1, 0.2, 0.3, 0.4], &[1.0, 0.5, -0.2, 0.7]).block_metric().unwrap();
        let want = [1.0, 1.0, 4.0, 4.0];
        for a in 0..4 {
            for b in 0..4 {
                let expect = if a == b { want[a] } else { 0.0 };
                close(g.tensor[[a, b]], expect, 1e-18);
            }
        }
    }

    #[test]
    fn exponential_twist_spray_and_connection() {
        let t = euclid_product(1, 1, TwistKind::ExpX { a: vec![1.0] });
        let (x, u, y, v) = (0.3, -0.2, 0.7, 1.1);
        let p = at(&t, &[x, u], &[y, v]);
        let g = p.spray().unwrap().tensor;
        close(g.data()[0], -0.5 * (2.0 * x).exp() * v * v, 1e-13);
        close(g.data()[1], v * y, 1e-13);
        let c = p.connection_blocks().unwrap().tensor;
        close(c[[1, 0]], v, 1e-13);
        let p0 = at(&t, &[0.0, u], &[y, v]);
        let vert = p0.vertical_coefficients().unwrap().tensor;
        close(vert[[0, 1, 1]], -1.0, 1e-12);
        close(vert[[1, 0, 0]], 0.0, 0.0);
    }

    #[test]
    fn constant_twist_decouples() {
        let spec = catalog_entry("randers-randers-const").unwrap();
        let t = spec.instantiate().unwrap();
        let p = at(&t, &[0.1, -0.3, 0.2, 0.4], &[0.8, -0.4, 0.3, 0.9]);
        let conn = p.connection_blocks().unwrap();
        assert_eq!(conn.block_max(&[Slot::M1, Slot::M2]), 0.0);
        assert_eq!(conn.block_max(&[Slot::M2, Slot::M1]), 0.0);
        let k1 = p.p1.nonlinear_connection().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(conn.tensor[[i, j]], k1[[i, j]]);
            }
        }
        let hor = p.horizontal_coeffs().unwrap();
        let f1 = p.p1.horizontal_coefficients().unwrap();
        assert!(multi_indices(2, 3).all(|i| hor.tensor[[i[0], i[1], i[2]]] == f1[[i[0], i[1], i[2]]]));
    }

    #[test]
    fn vertical_block_families() {
        let spec = catalog_entry("randers-randers").unwrap();
        let t = spec.instantiate().unwrap();
        let p = at(&t, &[0.2, 0.1, -0.3, 0.5], &[0.6, -0.9, 0.4, 0.7]);
        let v = p.vertical_coefficients().unwrap();
        assert_eq!(v.block_max(&[Slot::M2, Slot::M1, Slot::M1]), 0.0);
        let asym = v.asymmetry(1, 2);
        assert!(asym < 1e-12, "{asym}");
    }

    #[test]
    fn riemannian_fiber_horizontal_cross_block() {
        let spec = catalog_entry("warped").unwrap();
        let t = spec.instantiate().unwrap();
        let p = at(&t, &[0.4, 0.1, -0.2], &[0.5, 1.0, -0.3]);
        let hor = p.horizontal_coeffs().unwrap().tensor;
        let f = p.twist();
        let fi = p.twist_grad_x()[0];
        for g in 0..2 {
            for b in 0..2 {
                let expect = if g == b { fi / f } else { Real::ZERO };
                let d = (hor[[1 + g, 0, 1 + b]] - expect).abs().to_f64();
                assert!(d < 1e-15, "{d}");
            }
        }
    }

    #[test]
    fn horizontal_coefficients_contract_to_connection() {
        let spec = catalog_entry("twisted").unwrap();
        let t = spec.instantiate().unwrap();
        let w = reals(&[0.6, -0.5, 0.8, 0.2]);
        let p = t.point(&reals(&[1.4, 0.2, -0.3, 0.5]), &w, &NumericPlan::default()).unwrap();
        let ladder = p.horizontal_coeffs().unwrap().tensor.contract_last(&w);
        let d = ladder.max_abs_diff(&p.connection_blocks().unwrap().tensor);
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn adapted_frame_is_a_projector_pair() {
        let spec = catalog_entry("randers-sphere").unwrap();
        let t = spec.instantiate().unwrap();
        let p = at(&t, &[0.2, 0.1, -0.3, 0.5], &[0.6, -0.9, 0.4, 0.7]);
        let fr = p.adapted_frame().unwrap();
        let (v, h, j) = (&fr.vertical, &fr.horizontal, &fr.almost_tangent);
        assert!(v.matmul(v).max_abs_diff(v) < 1e-12);
        assert!(h.matmul(h).max_abs_diff(h) < 1e-12);
        assert!(v.matmul(h).max_abs() < 1e-12);
        assert!(j.matmul(j).max_abs() < 1e-12);
        assert_eq!(v.rank_numeric(1e-9), 4);
        let jh = j.matmul(&fr.horizontal_basis());
        for i in 0..4 {
            assert_eq!(jh[[4 + i, i]], Real::ONE);
        }
    }

    #[test]
    fn matsumoto_rhs_vanishes_for_riemannian_fiber() {
        let spec = catalog_entry("randers-sphere").unwrap();
        let t = spec.instantiate().unwrap();
        let p = at(&t, &[0.2, 0.1, -0.3, 0.5], &[0.6, -0.9, 0.4, 0.7]);
        let (on_alpha, on_i) = p.matsumoto_contraction_rhs().unwrap();
        assert!(on_alpha.iter().all(|v| v.abs().to_f64() < 1e-15));
        // sign opposite to the component mean Cartan torsion
        let i1 = p.p1.mean_cartan().unwrap();
        for (a, b) in on_i.iter().zip(&i1) {
            assert!(a.to_f64() * b.to_f64() <= 0.0);
        }
    }

    #[test]
    fn berwald_zero_families_and_trace() {
        let spec = catalog_entry("polar-randers").unwrap();
        let t = spec.instantiate().unwrap();
        let p = at(&t, &[1.5, 0.1, -0.3, 0.5], &[0.6, -0.9, 0.4, 0.7]);
        let b = p.berwald_blocks().unwrap();
        for pat in b.patterns() {
            if pat[0] == Slot::M2 && pat[1..].contains(&Slot::M1) {
                assert_eq!(b.block_max(&pat), 0.0, "{}", BlockTensor::label(&pat));
            }
        }
        let e = p.mean_berwald_blocks().unwrap().tensor;
        assert!(e.max_abs_diff(&crate::finsler::mean_of_berwald(&b.tensor)) < 1e-10);
    }

    #[test]
    fn labels_follow_slot_kinds() {
        assert_eq!(BlockTensor::label(&[Slot::M1, Slot::M1, Slot::M2]), "i|jα");
        assert_eq!(BlockTensor::label(&[Slot::M2, Slot::M2, Slot::M2, Slot::M1]), "α|βγi");
    }

    struct WrongGradient;

    impl TwistFunction for WrongGradient {
        fn value(&self, x: &[Real], _u: &[Real]) -> Real {
            x[0].exp()
        }
        fn grad_x(&self, x: &[Real], _u: &[Real]) -> Vec<Real> {
            vec![x[0].exp() * 2.0]
        }
        fn grad_u(&self, _x: &[Real], u: &[Real]) -> Vec<Real> {
            vec![Real::ZERO; u.len()]
        }
    }

    #[test]
    fn twist_gradients_are_validated() {
        let t = TwistedProduct::new(Arc::new(Euclidean { dim: 1 }), Arc::new(Euclidean { dim: 1 }), Arc::new(WrongGradient));
        let err = t.validate_twist(&ChartBox::symmetric(2), 3, &NumericPlan::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
        let good = euclid_product(1, 1, TwistKind::TrigMixed { c0: 1.0, eps: 0.2 });
        good.validate_twist(&ChartBox::symmetric(2), 3, &NumericPlan::default()).unwrap();
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let t = euclid_product(1, 1, TwistKind::Const { c: 1.0 });
        let err = t.point(&reals(&[0.0]), &reals(&[1.0, 1.0]), &NumericPlan::default()).err().unwrap();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
