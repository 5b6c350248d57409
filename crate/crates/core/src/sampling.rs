//! Reproducible quasi-random tangent samples.
//!
//! Base points come from a Halton sequence over the chart box and each
//! fiber block gets a direction on its unit sphere scaled by a radius in
//! `[0.5, 2]`. A Cranley-Patterson rotation drawn from the run seed makes
//! different seeds give different, equally well spread, batteries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finsler::TangentSample;
use crate::real::Real;

pub const RADIUS_MIN: f64 = 0.5;
pub const RADIUS_MAX: f64 = 2.0;

/// Axis-aligned coordinate box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ChartBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = ChartBox { lo, hi };
        b.validate()?;
        Ok(b)
    }

    /// `[-1, 1]^n`.
    pub fn symmetric(dim: usize) -> Self {
        ChartBox {
            lo: vec![-1.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::InvalidSpec(format!(
                "chart box bounds have lengths {} and {}",
                self.lo.len(),
                self.hi.len()
            )));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::InvalidSpec(format!("chart box {:?}..{:?} is empty", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn product(&self, other: &ChartBox) -> ChartBox {
        ChartBox {
            lo: self.lo.iter().chain(&other.lo).copied().collect(),
            hi: self.hi.iter().chain(&other.hi).copied().collect(),
        }
    }

    /// Maps a point of the unit cube into the box.
    pub fn map_unit(&self, t: &[f64]) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(t)
            .map(|((l, h), s)| l + (h - l) * s)
            .collect()
    }

    /// Tensor grid with `per_axis` points per axis, corners included.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let k = per_axis.max(2);
        let total = k.pow(n as u32);
        (0..total)
            .map(|mut pos| {
                let mut t = vec![0.0; n];
                for slot in t.iter_mut() {
                    *slot = (pos % k) as f64 / (k - 1) as f64;
                    pos /= k;
                }
                self.map_unit(&t)
            })
            .collect()
    }
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    r
}

/// Cranley-Patterson rotated Halton sequence.
#[derive(Clone, Debug)]
pub struct Halton {
    shift: Vec<f64>,
    next: u64,
}

impl Halton {
    pub fn new(dims: usize, seed: u64) -> Result<Self> {
        if dims > PRIMES.len() {
            return Err(Error::InvalidConfig(format!(
                "Halton sequence supports at most {} dimensions, asked for {dims}",
                PRIMES.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dims).map(|_| rng.gen::<f64>()).collect();
        Ok(Halton { shift, next: 1 })
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.next;
        self.next += 1;
        self.shift
            .iter()
            .enumerate()
            .map(|(d, s)| (radical_inverse(i, PRIMES[d]) + s).fract())
            .collect()
    }
}

/// Maps `2 * ceil(n/2)` uniforms to a unit vector through Box-Muller normals.
fn unit_direction(u: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut z = Vec::with_capacity(n + 1);
    for pair in u.chunks(2) {
        let r = (-2.0 * (1.0 - pair[0]).ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * pair[1];
        z.push(r * th.cos());
        z.push(r * th.sin());
    }
    z.truncate(n);
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-6 {
        return None;
    }
    Some(z.into_iter().map(|v| v / norm).collect())
}

/// Draws `count` samples. `blocks` splits the fiber into independently
/// scaled sub-vectors (one entry per product factor); the base point comes
/// from `chart`. Samples rejected by `accept` are skipped.
pub fn sample_tangent(
    chart: &ChartBox,
    blocks: &[usize],
    count: usize,
    seed: u64,
    y_min: f64,
    accept: impl Fn(&TangentSample) -> bool,
) -> Result<Vec<TangentSample>> {
    chart.validate()?;
    let n = chart.dim();
    if blocks.iter().sum::<usize>() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: blocks.iter().sum(),
        });
    }
    let dir_dims: Vec<usize> = blocks.iter().map(|b| 2 * b.div_ceil(2)).collect();
    let dims = n + blocks.len() + dir_dims.iter().sum::<usize>();
    let mut seq = Halton::new(dims, seed)?;
    let mut out = Vec::with_capacity(count);
    let max_draws = 100 * count.max(1);
    let mut draws = 0;
    while out.len() < count {
        draws += 1;
        if draws > max_draws {
            return Err(Error::Domain(format!(
                "only {} of {count} samples fell inside the domain after {max_draws} draws",
                out.len()
            )));
        }
        let u = seq.next_point();
        let x = chart.map_unit(&u[..n]);
        let mut y = Vec::with_capacity(n);
        let mut cursor = n + blocks.len();
        let mut ok = true;
        for (b, (&size, &dd)) in blocks.iter().zip(&dir_dims).enumerate() {
            let radius = RADIUS_MIN + (RADIUS_MAX - RADIUS_MIN) * u[n + b];
            match unit_direction(&u[cursor..cursor + dd], size) {
                Some(dir) => y.extend(dir.into_iter().map(|d| d * radius)),
                None => ok = false,
            }
            cursor += dd;
        }
        if !ok || y.iter().map(|v| v * v).sum::<f64>().sqrt() < y_min {
            continue;
        }
        let s = TangentSample::new(
            x.into_iter().map(Real::new).collect(),
            y.into_iter().map(Real::new).collect(),
        );
        if accept(&s) {
            out.push(s);
        }
    }
    Ok(out)
}
