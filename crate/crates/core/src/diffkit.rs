//! Central finite differences with Richardson extrapolation.
//!
//! This is the independent ground truth for every closed-form block in the
//! crate. Mixed partials use tensor products of second-order central
//! stencils, so the error expansion runs in even powers of the step and
//! each Richardson level removes one more power of `h^2`.
//!
//! The step for an order-`k` derivative with `L` Richardson levels is
//! `base_step * noise^(1/(k+2+2L)) * max(1, |x_i|)`, which balances the
//! `h^(2+2L)` truncation error against `noise / h^k` rounding. `noise` is
//! the relative accuracy of the function being differenced: machine
//! epsilon for closed-form evaluators, larger for fields that are
//! themselves finite-difference results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Hard ceiling on the total order of any single stencil.
pub const MAX_SUPPORTED_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffConfig {
    pub base_step: f64,
    pub richardson_levels: u8,
    pub max_order: u8,
    pub noise: f64,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            base_step: 1.0,
            richardson_levels: 1,
            max_order: MAX_SUPPORTED_ORDER as u8,
            noise: Real::EPSILON,
        }
    }
}

impl DiffConfig {
    pub fn new(base_step: f64, richardson_levels: u8, max_order: u8) -> Result<Self> {
        let cfg = DiffConfig {
            base_step,
            richardson_levels,
            max_order,
            ..DiffConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_step > 0.0 && self.base_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("base_step must be positive, got {}", self.base_step)));
        }
        if self.richardson_levels > 2 {
            return Err(Error::InvalidConfig(format!(
                "richardson_levels must be 0, 1 or 2, got {}",
                self.richardson_levels
            )));
        }
        if self.max_order == 0 || self.max_order as usize > MAX_SUPPORTED_ORDER {
            return Err(Error::InvalidConfig(format!("max_order must be in 1..=4, got {}", self.max_order)));
        }
        if !(self.noise > 0.0 && self.noise < 1.0) {
            return Err(Error::InvalidConfig(format!("noise must be in (0, 1), got {}", self.noise)));
        }
        Ok(())
    }

    /// Unscaled step for a derivative of total order `order`.
    pub fn step(&self, order: usize) -> f64 {
        let exponent = 1.0 / (order as f64 + 2.0 + 2.0 * self.richardson_levels as f64);
        self.base_step * self.noise.powf(exponent)
    }
}

/// Per-variable derivative orders.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(orders: Vec<usize>) -> Self {
        MultiIndex(orders)
    }

    /// Multi-index of `dim` variables counting each listed variable once.
    pub fn from_vars(dim: usize, vars: &[usize]) -> Self {
        let mut o = vec![0; dim];
        for &v in vars {
            o[v] += 1;
        }
        MultiIndex(o)
    }

    pub fn orders(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }
}

/// (offset in units of h, weight) for the second-order central stencil of
/// the given order.
fn stencil(order: usize) -> &'static [(f64, f64)] {
    match order {
        1 => &[(-1.0, -0.5), (1.0, 0.5)],
        2 => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
        3 => &[(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)],
        4 => &[(-2.0, 1.0), (-1.0, -4.0), (0.0, 6.0), (1.0, -4.0), (2.0, 1.0)],
        _ => unreachable!("stencil order checked by caller"),
    }
}

fn check_finite(v: &[Real]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn raw_difference<F>(f: &F, point: &[Real], idx: &MultiIndex, h: f64) -> Result<Vec<Real>>
where
    F: Fn(&[Real]) -> Result<Vec<Real>> + ?Sized,
{
    let active: Vec<(usize, usize, f64)> = idx
        .orders()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(var, &m)| (var, m, h * point[var].to_f64().abs().max(1.0)))
        .collect();
    let stencils: Vec<&[(f64, f64)]> = active.iter().map(|&(_, m, _)| stencil(m)).collect();
    let mut counters = vec![0usize; active.len()];
    let mut acc: Option<Vec<Real>> = None;
    let mut shifted = point.to_vec();
    loop {
        let mut weight = 1.0;
        for (slot, &(var, _, hv)) in active.iter().enumerate() {
            let (off, w) = stencils[slot][counters[slot]];
            shifted[var] = point[var] + off * hv;
            weight *= w;
        }
        let value = f(&shifted)?;
        check_finite(&value)?;
        match acc.as_mut() {
            None => acc = Some(value.iter().map(|v| *v * weight).collect()),
            Some(a) => {
                if a.len() != value.len() {
                    return Err(Error::DimensionMismatch { expected: a.len(), got: value.len() });
                }
                for (s, v) in a.iter_mut().zip(&value) {
                    *s += *v * weight;
                }
            }
        }
        // odometer over the stencil product
        let mut slot = 0;
        loop {
            if slot == active.len() {
                let denom = active
                    .iter()
                    .fold(Real::ONE, |acc, &(_, m, hv)| acc * Real::new(hv).powi(m as i32));
                let out = acc.unwrap_or_default();
                return Ok(out.into_iter().map(|v| v / denom).collect());
            }
            counters[slot] += 1;
            if counters[slot] < stencils[slot].len() {
                break;
            }
            counters[slot] = 0;
            slot += 1;
        }
    }
}

/// Partial derivative `idx` of a vector-valued function at `point`.
pub fn partial_vec<F>(f: &F, point: &[Real], idx: &MultiIndex, cfg: &DiffConfig) -> Result<Vec<Real>>
where
    F: Fn(&[Real]) -> Result<Vec<Real>> + ?Sized,
{
    if idx.orders().len() != point.len() {
        return Err(Error::DimensionMismatch {
            expected: point.len(),
            got: idx.orders().len(),
        });
    }
    let order = idx.order();
    let max = (cfg.max_order as usize).min(MAX_SUPPORTED_ORDER);
    if order > max {
        return Err(Error::OrderOverflow { order, max });
    }
    if order == 0 {
        let v = f(point)?;
        check_finite(&v)?;
        return Ok(v);
    }
    let h0 = cfg.step(order);
    let levels = cfg.richardson_levels as usize;
    // Neville-style Richardson table; rows are successive halvings.
    let mut prev: Vec<Vec<Real>> = Vec::new();
    for level in 0..=levels {
        let h = h0 / f64::powi(2.0, level as i32);
        let mut row = vec![raw_difference(f, point, idx, h)?];
        for j in 1..=level {
            let factor = f64::powi(4.0, j as i32);
            let refined: Vec<Real> = row[j - 1]
                .iter()
                .zip(&prev[j - 1])
                .map(|(fine, coarse)| (*fine * factor - *coarse) / (factor - 1.0))
                .collect();
            row.push(refined);
        }
        prev = row;
    }
    Ok(prev.pop().unwrap_or_default())
}

/// Scalar convenience wrapper around [`partial_vec`].
pub fn partial<F>(f: &F, point: &[Real], idx: &MultiIndex, cfg: &DiffConfig) -> Result<Real>
where
    F: Fn(&[Real]) -> Result<Real> + ?Sized,
{
    let wrapped = |p: &[Real]| f(p).map(|v| vec![v]);
    Ok(partial_vec(&wrapped, point, idx, cfg)?[0])
}

pub fn gradient<F>(f: &F, point: &[Real], cfg: &DiffConfig) -> Result<Vec<Real>>
where
    F: Fn(&[Real]) -> Result<Real> + ?Sized,
{
    let n = point.len();
    (0..n)
        .map(|i| partial(f, point, &MultiIndex::from_vars(n, &[i]), cfg))
        .collect()
}

pub fn hessian<F>(f: &F, point: &[Real], cfg: &DiffConfig) -> Result<Tensor>
where
    F: Fn(&[Real]) -> Result<Real> + ?Sized,
{
    let wrapped = |p: &[Real]| f(p).map(|v| vec![v]);
    let h = hessian_vec(&wrapped, point, cfg)?;
    Ok(Tensor::from_fn(point.len(), 2, |i| h[i[0]][i[1]][0]))
}

pub fn third<F>(f: &F, point: &[Real], cfg: &DiffConfig) -> Result<Tensor>
where
    F: Fn(&[Real]) -> Result<Real> + ?Sized,
{
    let wrapped = |p: &[Real]| f(p).map(|v| vec![v]);
    let t = third_vec(&wrapped, point, cfg)?;
    Ok(Tensor::from_fn(point.len(), 3, |i| t[i[0]][i[1]][i[2]][0]))
}

/// `out[a][c] = d f_c / d x_a`.
pub fn jacobian_vec<F>(f: &F, point: &[Real], cfg: &DiffConfig) -> Result<Vec<Vec<Real>>>
where
    F: Fn(&[Real]) -> Result<Vec<Real>> + ?Sized,
{
    let n = point.len();
    (0..n)
        .map(|a| partial_vec(f, point, &MultiIndex::from_vars(n, &[a]), cfg))
        .collect()
}

/// `out[a][b][c] = d^2 f_c / dx_a dx_b`, each unordered pair evaluated once.
pub fn hessian_vec<F>(f: &F, point: &[Real], cfg: &DiffConfig) -> Result<Vec<Vec<Vec<Real>>>>
where
    F: Fn(&[Real]) -> Result<Vec<Real>> + ?Sized,
{
    let n = point.len();
    let mut out = vec![vec![Vec::new(); n]; n];
    for a in 0..n {
        for b in a..n {
            let d = partial_vec(f, point, &MultiIndex::from_vars(n, &[a, b]), cfg)?;
            out[b][a] = d.clone();
            out[a][b] = d;
        }
    }
    Ok(out)
}

/// `out[a][b][c][k] = d^3 f_k / dx_a dx_b dx_c`, fully symmetric.
#[allow(clippy::type_complexity)]
pub fn third_vec<F>(f: &F, point: &[Real], cfg: &DiffConfig) -> Result<Vec<Vec<Vec<Vec<Real>>>>>
where
    F: Fn(&[Real]) -> Result<Vec<Real>> + ?Sized,
{
    let n = point.len();
    let mut out = vec![vec![vec![Vec::new(); n]; n]; n];
    for a in 0..n {
        for b in a..n {
            for c in b..n {
                let d = partial_vec(f, point, &MultiIndex::from_vars(n, &[a, b, c]), cfg)?;
                for (p, q, r) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                    out[p][q][r] = d.clone();
                }
            }
        }
    }
    Ok(out)
}
