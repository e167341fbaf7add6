//! Working-precision abstraction.
//!
//! Gram matrices of monomials are badly conditioned, so factorizations can be
//! carried out either in `f64` or in double-double arithmetic (`TwoFloat`,
//! roughly 106 significand bits).

use std::fmt::Debug;
use std::ops::Neg;

use num_complex::Complex;
use num_traits::Num;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

/// Arithmetic precision used for factorizations and determinant evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Extended,
}

impl Precision {
    pub fn epsilon(self) -> f64 {
        match self {
            Precision::Double => f64::EPSILON,
            Precision::Extended => <TwoFloat as Scalar>::EPS,
        }
    }
}

pub trait Scalar:
    Copy + Debug + PartialOrd + Num + Neg<Output = Self> + Send + Sync + 'static
{
    /// Unit roundoff of the format.
    const EPS: f64;

    fn of(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    /// Natural log rounded to `f64`, accurate to `f64` precision.
    fn ln_f64(self) -> f64;
    /// Quotient correctly rounded to the working precision.
    fn quot(self, rhs: Self) -> Self;
}

impl Scalar for f64 {
    const EPS: f64 = f64::EPSILON;

    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn ln_f64(self) -> f64 {
        self.ln()
    }
    #[inline]
    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }
}

impl Scalar for TwoFloat {
    const EPS: f64 = 1.0e-31;

    #[inline]
    fn of(x: f64) -> Self {
        TwoFloat::from(x)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    #[inline]
    fn sqrt(self) -> Self {
        TwoFloat::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        TwoFloat::abs(&self)
    }
    #[inline]
    fn ln_f64(self) -> f64 {
        let hi = self.hi();
        hi.ln() + (self.lo() / hi).ln_1p()
    }
    // `TwoFloat / TwoFloat` in twofloat 0.8 only delivers about 53 bits; one
    // Newton correction restores the full double-double quotient.
    #[inline]
    fn quot(self, rhs: Self) -> Self {
        let q = self / rhs;
        let r = self - q * rhs;
        q + r / rhs
    }
}

#[inline]
pub fn cplx<S: Scalar>(z: Complex<f64>) -> Complex<S> {
    Complex::new(S::of(z.re), S::of(z.im))
}

#[inline]
pub fn to_c64<S: Scalar>(z: Complex<S>) -> Complex<f64> {
    Complex::new(z.re.to_f64(), z.im.to_f64())
}

/// Complex quotient built on [`Scalar::quot`].
#[inline]
pub fn cdiv<S: Scalar>(a: Complex<S>, b: Complex<S>) -> Complex<S> {
    let d = norm_sqr(b);
    let num = a * b.conj();
    Complex::new(num.re.quot(d), num.im.quot(d))
}

#[inline]
pub fn norm_sqr<S: Scalar>(z: Complex<S>) -> S {
    z.re * z.re + z.im * z.im
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_resolves_below_f64_epsilon() {
        let one = TwoFloat::of(1.0);
        let tiny = TwoFloat::of(1e-20);
        let sum = one + tiny;
        assert_eq!((sum - one).to_f64(), 1e-20);
        assert_eq!((1.0f64 + 1e-20) - 1.0, 0.0);
    }

    #[test]
    fn double_double_division_is_accurate() {
        for (a, b) in [(1.0, 3.0), (1.0, 7.0), (2.0, 49.0), (-5.5, 0.1)] {
            let (a, b) = (TwoFloat::of(a), TwoFloat::of(b));
            let q = a.quot(b);
            assert!((q * b - a).to_f64().abs() <= 1e-30 * a.to_f64().abs());
        }
        let z = cdiv(
            Complex::new(TwoFloat::of(1.0), TwoFloat::of(2.0)),
            Complex::new(TwoFloat::of(3.0), TwoFloat::of(-1.0)),
        );
        let back = z * Complex::new(TwoFloat::of(3.0), TwoFloat::of(-1.0));
        assert!((back.re - TwoFloat::of(1.0)).to_f64().abs() < 1e-30);
        assert!((back.im - TwoFloat::of(2.0)).to_f64().abs() < 1e-30);
    }

    #[test]
    fn ln_matches_f64() {
        for &x in &[1e-300, 0.5, 1.0, 3.0, 1e200] {
            let a = TwoFloat::of(x).ln_f64();
            assert!((a - x.ln()).abs() <= 1e-15 * x.ln().abs().max(1.0));
        }
    }
}
