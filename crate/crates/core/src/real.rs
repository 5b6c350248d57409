//! Double-double scalar used throughout the engine.
//!
//! Every curvature object here is reached through two or three layers of
//! finite differencing. In plain `f64` the rounding noise of the inner layer
//! is amplified by `h^-k` in the outer one and swamps the 1e-4 tolerances on
//! third-derivative and curvature quantities, so all evaluators work in
//! ~106-bit arithmetic and only reports are narrowed back to `f64`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use qd::Quad;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct Real(Quad);

impl Real {
    pub const ZERO: Real = Real(Quad::ZERO);
    pub const ONE: Real = Real(Quad::ONE);
    pub const PI: Real = Real(Quad::PI);
    /// Unit roundoff of the double-double format.
    pub const EPSILON: f64 = f64::EPSILON * f64::EPSILON;

    #[inline]
    pub const fn new(v: f64) -> Self {
        Real(Quad(v, 0.0))
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.0 .0 + self.0 .1
    }

    /// High and low words; `hi + lo` is the represented value.
    pub fn parts(self) -> (f64, f64) {
        (self.0 .0, self.0 .1)
    }

    #[inline]
    pub fn abs(self) -> Self {
        Real(self.0.abs())
    }

    #[inline]
    pub fn sqrt(self) -> Self {
        if self.0 .0 == 0.0 {
            return Real::ZERO;
        }
        Real(self.0.sqrt())
    }

    #[inline]
    pub fn exp(self) -> Self {
        Real(self.0.exp())
    }

    #[inline]
    pub fn ln(self) -> Self {
        Real(self.0.ln())
    }

    #[inline]
    pub fn recip(self) -> Self {
        Real::ONE / self
    }

    pub fn powi(self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut base = self;
        let mut acc = Real::ONE;
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }

    pub fn sin(self) -> Self {
        let (s, c, q) = self.sincos_reduced();
        match q {
            0 => s,
            1 => c,
            2 => -s,
            _ => -c,
        }
    }

    pub fn cos(self) -> Self {
        let (s, c, q) = self.sincos_reduced();
        match q {
            0 => c,
            1 => -s,
            2 => -c,
            _ => s,
        }
    }

    /// Reduces by multiples of pi/2 and sums both Taylor series on |r| <= pi/4.
    fn sincos_reduced(self) -> (Real, Real, i64) {
        let half_pi = Real::PI * 0.5;
        let k = (self.to_f64() / half_pi.to_f64()).round();
        let r = self - half_pi * k;
        let r2 = r * r;
        let mut term = r;
        let mut s = r;
        let mut n = 1.0;
        loop {
            term = -term * r2 / ((n + 1.0) * (n + 2.0));
            s += term;
            n += 2.0;
            if term.abs().to_f64() < 1e-34 || n > 60.0 {
                break;
            }
        }
        let mut term = Real::ONE;
        let mut c = Real::ONE;
        let mut n = 0.0;
        loop {
            term = -term * r2 / ((n + 1.0) * (n + 2.0));
            c += term;
            n += 2.0;
            if term.abs().to_f64() < 1e-34 || n > 60.0 {
                break;
            }
        }
        (s, c, (k as i64).rem_euclid(4))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.0 .0.is_finite() && self.0 .1.is_finite()
    }

    pub fn max(self, other: Real) -> Real {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Real) -> Real {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn total_cmp(&self, other: &Real) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

impl Default for Real {
    fn default() -> Self {
        Real::ZERO
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real::new(v)
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64(), f)
    }
}

impl Neg for Real {
    type Output = Real;
    #[inline]
    fn neg(self) -> Real {
        Real(-self.0)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $atr:ident, $am:ident) => {
        impl $tr for Real {
            type Output = Real;
            #[inline]
            fn $m(self, rhs: Real) -> Real {
                Real(self.0.$m(rhs.0))
            }
        }
        impl $tr<f64> for Real {
            type Output = Real;
            #[inline]
            fn $m(self, rhs: f64) -> Real {
                Real(self.0.$m(Quad::from(rhs)))
            }
        }
        impl $tr<Real> for f64 {
            type Output = Real;
            #[inline]
            fn $m(self, rhs: Real) -> Real {
                Real(Quad::from(self).$m(rhs.0))
            }
        }
        impl $atr for Real {
            #[inline]
            fn $am(&mut self, rhs: Real) {
                *self = $tr::$m(*self, rhs);
            }
        }
        impl $atr<f64> for Real {
            #[inline]
            fn $am(&mut self, rhs: f64) {
                *self = $tr::$m(*self, rhs);
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign);
binop!(Sub, sub, SubAssign, sub_assign);
binop!(Mul, mul, MulAssign, mul_assign);
binop!(Div, div, DivAssign, div_assign);

impl Sum for Real {
    fn sum<I: Iterator<Item = Real>>(iter: I) -> Real {
        iter.fold(Real::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Real> for Real {
    fn sum<I: Iterator<Item = &'a Real>>(iter: I) -> Real {
        iter.fold(Real::ZERO, |a, b| a + *b)
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Real::new)
    }
}

/// Converts a slice of `f64` into engine scalars.
pub fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real::new).collect()
}

/// Narrows a slice of engine scalars to `f64`.
pub fn to_f64s(v: &[Real]) -> Vec<f64> {
    v.iter().map(|r| r.to_f64()).collect()
}

pub fn dot(a: &[Real], b: &[Real]) -> Real {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}
